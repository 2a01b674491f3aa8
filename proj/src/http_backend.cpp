#include "qdacode/error.hpp"
#include "qdacode/llm.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace qdacode {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw InputError(fmt::format("endpoint '{}' is not an absolute URL", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::string HttpChatBackend::send(const ModelConfig& config, const CompletionRequest& request) {
  const auto ep = split_url(config.endpoint_url);
  httplib::Client client(ep.origin);
  const auto secs = static_cast<time_t>(config.request_timeout_s);
  const auto usecs = static_cast<time_t>((config.request_timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!config.api_key_env.empty()) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw AuthError(fmt::format("environment variable {} is not set", config.api_key_env), 0);
    }
    headers.emplace("Authorization", fmt::format("Bearer {}", key));
  }

  const auto body = chat_request_body(config, request.prompt.text).dump();
  const auto res = client.Post(ep.path, headers, body, "application/json");
  if (!res) {
    throw TransportError(fmt::format("POST {}{} failed: {}", ep.origin, ep.path, httplib::to_string(res.error())),
                         0, true);
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw AuthError(fmt::format("endpoint rejected credentials (HTTP {})", status), status);
  }
  if (status < 200 || status >= 300) {
    throw TransportError(fmt::format("endpoint returned HTTP {}", status), status, retryable_status(status));
  }
  return parse_chat_response(res->body);
}

}  // namespace qdacode
