#include "qdacode/llm.hpp"

#include "qdacode/error.hpp"
#include "qdacode/hash.hpp"
#include "qdacode/text.hpp"

#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace qdacode {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  if (model_id.empty()) {
    throw InputError("model config: model_id is required");
  }
  if (!(temperature >= 0.0)) {
    throw InputError(fmt::format("model '{}': temperature must be >= 0", model_id));
  }
  if (max_retries < 0) {
    throw InputError(fmt::format("model '{}': max_retries must be >= 0", model_id));
  }
  if (!(request_timeout_s > 0.0)) {
    throw InputError(fmt::format("model '{}': request_timeout must be > 0", model_id));
  }
  if (max_output_tokens <= 0) {
    throw InputError(fmt::format("model '{}': max_output_tokens must be > 0", model_id));
  }
  if (backend == BackendKind::Live && endpoint_url.empty()) {
    throw InputError(fmt::format("model '{}': live backend needs endpoint_url", model_id));
  }
  if (backend == BackendKind::Mock && mock_script.empty()) {
    throw InputError(fmt::format("model '{}': mock backend needs mock_script", model_id));
  }
}

ModelConfig model_config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (j.contains("api_key")) {
    throw InputError("model config: put the key in an environment variable and name it in api_key_env");
  }
  ModelConfig c;
  try {
    c.model_id = j.at("model_id").get<std::string>();
    c.endpoint_url = j.value("endpoint_url", std::string{});
    c.api_key_env = j.value("api_key_env", std::string{});
    c.temperature = j.value("temperature", 0.0);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.request_timeout_s = j.value("request_timeout_s", c.request_timeout_s);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.retry_base_delay = std::chrono::milliseconds(j.value("retry_base_delay_ms", std::int64_t{1000}));
    if (j.contains("mock_script")) {
      c.mock_script = base_dir / j.at("mock_script").get<std::string>();
    }
    const bool has_mock = !c.mock_script.empty();
    const bool has_live = !c.endpoint_url.empty();
    if (j.contains("backend")) {
      const auto b = j.at("backend").get<std::string>();
      if (b == "mock") {
        c.backend = BackendKind::Mock;
      } else if (b == "live") {
        c.backend = BackendKind::Live;
      } else {
        throw InputError(fmt::format("model '{}': unknown backend '{}'", c.model_id, b));
      }
      if ((c.backend == BackendKind::Mock && has_live) || (c.backend == BackendKind::Live && has_mock)) {
        throw InputError(fmt::format("model '{}': configure exactly one backend mode", c.model_id));
      }
    } else if (has_mock == has_live) {
      throw InputError(fmt::format("model '{}': configure exactly one of mock_script or endpoint_url", c.model_id));
    } else {
      c.backend = has_mock ? BackendKind::Mock : BackendKind::Live;
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("model config: {}", e.what()));
  }
  c.validate();
  return c;
}

json to_json(const ModelConfig& c) {
  json j;
  j["model_id"] = c.model_id;
  j["backend"] = c.backend == BackendKind::Mock ? "mock" : "live";
  if (c.backend == BackendKind::Live) {
    j["endpoint_url"] = c.endpoint_url;
  }
  j["temperature"] = c.temperature;
  j["max_output_tokens"] = c.max_output_tokens;
  return j;
}

std::string_view to_string(ResponseSource s) {
  switch (s) {
    case ResponseSource::Live: return "live";
    case ResponseSource::Mock: return "mock";
    case ResponseSource::Cache: return "cache";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Mock backend

MockScript MockScript::parse(std::string_view json_text) {
  MockScript s;
  try {
    const auto j = json::parse(json_text);
    for (const auto& [k, v] : j.at("responses").items()) {
      s.responses.emplace(k, v.get<std::string>());
    }
    if (j.contains("default_response") && !j.at("default_response").is_null()) {
      s.default_response = j.at("default_response").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("mock script: {}", e.what()));
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError(fmt::format("cannot open mock script '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> MockScript::lookup(const RenderedPrompt& prompt, int run_index) const {
  const std::array keys{
      fmt::format("{}#{}", prompt.requirement_id, run_index),
      sha256_hex(prompt.text),
      prompt.requirement_id,
  };
  for (const auto& k : keys) {
    if (auto it = responses.find(k); it != responses.end()) {
      return it->second;
    }
  }
  return default_response;
}

std::string MockBackend::send(const ModelConfig& config, const CompletionRequest& request) {
  auto r = script_.lookup(request.prompt, request.run_index);
  if (!r) {
    throw ProtocolError(fmt::format("mock '{}' has no response for requirement '{}'", config.model_id,
                                    request.prompt.requirement_id));
  }
  return *r;
}

std::shared_ptr<CompletionBackend> make_backend(const ModelConfig& config) {
  if (config.backend == BackendKind::Mock) {
    return std::make_shared<MockBackend>(MockScript::load(config.mock_script));
  }
  return std::make_shared<HttpChatBackend>();
}

// ---------------------------------------------------------------------------
// Wire format

json chat_request_body(const ModelConfig& config, std::string_view prompt_text) {
  json body;
  body["model"] = config.model_id;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt_text}}});
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_output_tokens;
  return body;
}

std::string parse_chat_response(std::string_view body) {
  if (text::trim(body).empty()) {
    throw ProtocolError("empty response body");
  }
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(fmt::format("response is not JSON: {}", e.what()));
  }
  const auto* content = [&]() -> const json* {
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) return nullptr;
    const auto& first = j["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content")) return nullptr;
    return &first["message"]["content"];
  }();
  if (!content || !content->is_string()) {
    throw ProtocolError("response has no choices[0].message.content");
  }
  auto text = content->get<std::string>();
  if (text::trim(text).empty()) {
    throw ProtocolError("empty completion");
  }
  return text;
}

// ---------------------------------------------------------------------------
// Cache

std::string cache_key(const ModelConfig& config, const RenderedPrompt& prompt, std::optional<int> run_index) {
  // Length-prefixed fields keep the encoding unambiguous.
  std::string buf;
  const auto field = [&buf](std::string_view v) { buf += fmt::format("{}:{};", v.size(), v); };
  field(config.model_id);
  field(fmt::format("{:.17g}", config.temperature));
  field(prompt.text);
  if (run_index) {
    field(fmt::format("run={}", *run_index));
  }
  return sha256_hex(buf);
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) {
      continue;
    }
    try {
      const auto j = json::parse(line);
      entries_.insert_or_assign(j.at("key").get<std::string>(), j.at("raw_text").get<std::string>());
    } catch (const json::exception&) {
      // A torn final line from an interrupted write is dropped.
      if (in.peek() != std::char_traits<char>::eof()) {
        throw InputError(fmt::format("{}:{}: corrupt cache record", path_.string(), line_no));
      }
    }
  }
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  if (auto it = entries_.find(key); it != entries_.end()) {
    return it->second;
  }
  return std::nullopt;
}

void ResponseCache::put(const std::string& key, const std::string& raw_text) {
  std::lock_guard lock(mu_);
  if (!entries_.insert_or_assign(key, raw_text).second) {
    return;
  }
  if (path_.empty()) {
    return;
  }
  if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  std::ofstream out(path_, std::ios::app);
  out << json{{"key", key}, {"raw_text", raw_text}}.dump() << '\n';
  out.flush();
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Label extraction

std::string extract_label(std::string_view raw_text) {
  std::string line;
  for (const auto& l : text::split(raw_text, '\n')) {
    line = text::trim(l);
    if (!line.empty()) {
      break;
    }
  }
  if (line.empty()) {
    throw ProtocolError("empty completion");
  }

  static constexpr std::array<std::string_view, 11> wrappers{
      "\"", "'", "`", "*", "_", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99", "\xC2\xAB", "\xC2\xBB"};
  const auto strip_once = [](std::string s) {
    s = text::trim(s);
    if (s.size() >= 6) {
      std::string head = s.substr(0, 6);
      for (auto& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (head == "label:") {
        s = text::trim(s.substr(6));
      }
    }
    while (!s.empty() && s.back() == '.') {
      s.pop_back();
    }
    for (auto w : wrappers) {
      if (s.starts_with(w)) s.erase(0, w.size());
      if (s.ends_with(w)) s.erase(s.size() - w.size());
    }
    return text::trim(s);
  };

  for (int i = 0; i < 16; ++i) {
    auto next = strip_once(line);
    if (next == line) {
      break;
    }
    line = std::move(next);
  }
  if (line.empty()) {
    throw ProtocolError("empty completion");
  }
  return line;
}

// ---------------------------------------------------------------------------
// Client

LlmClient::LlmClient(ModelConfig config, std::shared_ptr<CompletionBackend> backend, ResponseCache* cache,
                     Sleeper sleeper)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      cache_(cache),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      jitter_state_(std::random_device{}()) {
  config_.validate();
}

std::chrono::milliseconds LlmClient::backoff(int attempt) {
  const auto base = config_.retry_base_delay.count();
  const auto delay = base << std::min(attempt - 1, 20);
  std::uint64_t r;
  {
    // splitmix64
    std::lock_guard lock(rng_mu_);
    std::uint64_t z = (jitter_state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    r = z ^ (z >> 31);
  }
  const auto jitter = base > 1 ? static_cast<std::int64_t>(r % static_cast<std::uint64_t>(base / 2 + 1)) : 0;
  return std::chrono::milliseconds(delay + jitter);
}

CompletionResult LlmClient::complete(const RenderedPrompt& prompt, int run_index, bool consistency_run) {
  const auto key = cache_key(config_, prompt, consistency_run ? std::optional<int>(run_index) : std::nullopt);
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      return {*hit, std::chrono::milliseconds(0), ResponseSource::Cache, 0};
    }
  }

  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 1;; ++attempt) {
    try {
      auto text = backend_->send(config_, {prompt, run_index});
      if (text::trim(text).empty()) {
        throw ProtocolError("empty completion");
      }
      if (cache_) {
        cache_->put(key, text);
      }
      const auto latency =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      return {std::move(text), latency, backend_->source(), attempt};
    } catch (const TransportError& e) {
      if (!e.retryable()) {
        throw;
      }
      if (attempt > config_.max_retries) {
        throw TransportError(fmt::format("giving up after {} attempts: {}", attempt, e.what()), e.status(), false);
      }
    }
    sleeper_(backoff(attempt));
  }
}

}  // namespace qdacode
