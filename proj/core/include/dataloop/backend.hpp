#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "dataloop/error.hpp"

namespace dataloop {

// ---------------------------------------------------------------------------
// Errors

class BackendError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

class RateLimitExhausted : public BackendError {
 public:
  using BackendError::BackendError;
};

class UpstreamError : public BackendError {
 public:
  UpstreamError(int status, const std::string& message)
      : BackendError("upstream error (status " + std::to_string(status) + "): " + message), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class FixtureMiss : public BackendError {
 public:
  explicit FixtureMiss(std::string fingerprint, const std::string& tag)
      : BackendError("no fixture entry for request '" + tag + "' (fingerprint " + fingerprint + ")"),
        fingerprint_(std::move(fingerprint)) {}
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  std::string fingerprint_;
};

// ---------------------------------------------------------------------------
// Requests

struct DecodeParams {
  double temperature = 0.2;
  int max_tokens = 4096;
  bool greedy = false;

  /// Settings used when the engine drives benchmark inference itself:
  /// greedy decoding, temperature 0, and a 15-token cap.
  static DecodeParams evaluation() { return {0.0, 15, true}; }
};

struct PromptRequest {
  std::string role_preamble;
  std::string user_text;
  DecodeParams decode;
  std::string tag;  ///< Stage label; part of the fixture fingerprint.

  /// Throws ConfigError when user_text is empty or max_tokens < 1.
  void validate() const;
};

/// Stable request fingerprint: SHA-256 over the tag and the user text with
/// whitespace collapsed, truncated to 32 hex characters.
std::string fingerprint(std::string_view tag, std::string_view user_text);
inline std::string fingerprint(const PromptRequest& request) {
  return fingerprint(request.tag, request.user_text);
}

struct BackendConfig {
  std::string endpoint_url;
  std::string model_name;
  std::chrono::milliseconds timeout{std::chrono::seconds(120)};
  int max_retries = 3;
  int requests_per_minute = 60;
  std::chrono::milliseconds backoff_base{std::chrono::seconds(1)};
  std::string api_key_env = "DATALOOP_API_KEY";

  /// Throws ConfigError unless 0 <= max_retries <= 10 and requests_per_minute > 0.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Backends

/// Gateway for every generation call in the pipeline. Implementations are
/// safe to call from several threads at once.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Raw model text for `request`. Every failure is thrown as a BackendError
  /// subclass; there is no empty-string failure path.
  virtual std::string complete(const PromptRequest& request) = 0;
};

/// Canned responses keyed by request fingerprint. On disk this is a JSON
/// object mapping fingerprint to response text.
class FixtureScript {
 public:
  void add(std::string_view tag, std::string_view user_text, std::string response);
  void add(const PromptRequest& request, std::string response) {
    add(request.tag, request.user_text, std::move(response));
  }
  void add_fingerprint(std::string fp, std::string response);

  const std::string* find(const std::string& fp) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  static FixtureScript load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Deterministic backend that answers only from a FixtureScript.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(FixtureScript script) : script_(std::move(script)) {}
  std::string complete(const PromptRequest& request) override;
  const FixtureScript& script() const noexcept { return script_; }

 private:
  FixtureScript script_;
};

/// Adapts a callable into a backend. Calls are serialised.
class FunctionBackend final : public LlmBackend {
 public:
  using Handler = std::function<std::string(const PromptRequest&)>;
  explicit FunctionBackend(Handler handler) : handler_(std::move(handler)) {}
  std::string complete(const PromptRequest& request) override;

 private:
  std::mutex mutex_;
  Handler handler_;
};

/// Forwards to another backend and remembers every exchange, so a live or
/// scripted session can be frozen into a fixture file.
class RecordingBackend final : public LlmBackend {
 public:
  explicit RecordingBackend(LlmBackend& inner) : inner_(inner) {}
  std::string complete(const PromptRequest& request) override;
  FixtureScript recorded() const;

 private:
  LlmBackend& inner_;
  mutable std::mutex mutex_;
  FixtureScript recorded_;
};

/// Spaces calls so that no more than `requests_per_minute` start per minute.
class RateLimiter {
 public:
  explicit RateLimiter(int requests_per_minute);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_slot_;
};

/// Delay before retry number `attempt` (1-based): base * 2^(attempt-1),
/// scaled by a jitter factor in [0.8, 1.2] taken from `unit` in [0, 1).
std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int attempt, double unit);

/// Chat-completion client over HTTP(S). The API key, when present, is read from
/// the environment variable named in the config and sent as a bearer token.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(BackendConfig config);
  ~HttpBackend() override;
  std::string complete(const PromptRequest& request) override;

 private:
  struct Endpoint;
  BackendConfig config_;
  std::unique_ptr<Endpoint> endpoint_;
  RateLimiter limiter_;
  std::mutex jitter_mutex_;
  std::uint64_t jitter_state_;
};

}  // namespace dataloop
