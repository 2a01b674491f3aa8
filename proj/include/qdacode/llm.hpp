#pragma once

#include "qdacode/prompt.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace qdacode {

enum class BackendKind { Live, Mock };

struct ModelConfig {
  std::string model_id;
  BackendKind backend = BackendKind::Live;
  /// Full URL of the chat-completion endpoint, e.g.
  /// https://api.openai.com/v1/chat/completions
  std::string endpoint_url;
  /// Name of the environment variable holding the bearer token. Empty means
  /// no Authorization header.
  std::string api_key_env;
  double temperature = 0.0;
  int max_output_tokens = 16;
  double request_timeout_s = 60.0;
  int max_retries = 3;
  std::chrono::milliseconds retry_base_delay{1000};
  /// Mock backend only.
  std::filesystem::path mock_script;

  void validate() const;
};

ModelConfig model_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
/// Everything except secrets; suitable for manifests.
nlohmann::json to_json(const ModelConfig& config);

enum class ResponseSource { Live, Mock, Cache };

std::string_view to_string(ResponseSource s);

struct CompletionResult {
  std::string raw_text;
  std::chrono::milliseconds latency{0};
  ResponseSource backend = ResponseSource::Live;
  int attempt_count = 0;
};

/// What a backend needs to produce one completion.
struct CompletionRequest {
  const RenderedPrompt& prompt;
  /// Repeated-run index; only the mock backend looks at it.
  int run_index = 0;
};

class CompletionBackend {
public:
  virtual ~CompletionBackend() = default;
  /// Returns the completion text or throws TransportError (possibly
  /// retryable), AuthError or ProtocolError.
  virtual std::string send(const ModelConfig& config, const CompletionRequest& request) = 0;
  virtual ResponseSource source() const = 0;
};

/// Canned responses for offline runs. Lookup order: "<requirement_id>#<run>",
/// prompt fingerprint (SHA-256 of the prompt text), "<requirement_id>", then
/// the default response.
struct MockScript {
  std::map<std::string, std::string, std::less<>> responses;
  std::optional<std::string> default_response;

  static MockScript parse(std::string_view json_text);
  static MockScript load(const std::filesystem::path& path);
  std::optional<std::string> lookup(const RenderedPrompt& prompt, int run_index) const;
};

class MockBackend final : public CompletionBackend {
public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) {}
  std::string send(const ModelConfig& config, const CompletionRequest& request) override;
  ResponseSource source() const override { return ResponseSource::Mock; }

private:
  MockScript script_;
};

/// JSON chat-completion client: POST {model, messages:[{role:user}],
/// temperature, max_tokens}; reads choices[0].message.content.
class HttpChatBackend final : public CompletionBackend {
public:
  std::string send(const ModelConfig& config, const CompletionRequest& request) override;
  ResponseSource source() const override { return ResponseSource::Live; }
};

std::shared_ptr<CompletionBackend> make_backend(const ModelConfig& config);

/// Builds the request body sent to the endpoint.
nlohmann::json chat_request_body(const ModelConfig& config, std::string_view prompt_text);
/// Pulls the first choice's message content out of a response body.
std::string parse_chat_response(std::string_view body);

/// SHA-256 over model id, temperature and prompt text, plus the run index
/// when given.
std::string cache_key(const ModelConfig& config, const RenderedPrompt& prompt,
                      std::optional<int> run_index = std::nullopt);

/// Append-only (fingerprint, raw_text) store, one JSON object per line.
/// An empty path keeps the cache in memory only.
class ResponseCache {
public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& raw_text);
  std::size_t size() const;

private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> entries_;
};

/// Takes the first non-empty line and strips quotes, emphasis markers, a
/// "Label:" prefix and trailing periods.
std::string extract_label(std::string_view raw_text);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class LlmClient {
public:
  LlmClient(ModelConfig config, std::shared_ptr<CompletionBackend> backend, ResponseCache* cache = nullptr,
            Sleeper sleeper = {});

  /// Cache first, then the backend with exponential backoff on retryable
  /// failures. With `consistency_run` set the run index becomes part of the
  /// cache key so repeated runs are not answered from the cache.
  CompletionResult complete(const RenderedPrompt& prompt, int run_index = 0,
                            bool consistency_run = false);

  const ModelConfig& config() const { return config_; }

private:
  std::chrono::milliseconds backoff(int attempt);

  ModelConfig config_;
  std::shared_ptr<CompletionBackend> backend_;
  ResponseCache* cache_;
  Sleeper sleeper_;
  std::mutex rng_mu_;
  std::uint64_t jitter_state_;
};

}  // namespace qdacode
