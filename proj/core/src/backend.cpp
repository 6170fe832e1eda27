#include "dataloop/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dataloop/hashing.hpp"
#include "dataloop/jsonl.hpp"
#include "dataloop/rng.hpp"
#include "dataloop/text.hpp"

namespace dataloop {

void PromptRequest::validate() const {
  if (user_text.empty()) throw ConfigError("prompt request '" + tag + "' has empty user text");
  if (decode.max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  if (decode.temperature < 0.0) throw ConfigError("temperature must be non-negative");
}

std::string fingerprint(std::string_view tag, std::string_view user_text) {
  std::string material(tag);
  material += '\n';
  material += text::collapse_whitespace(user_text);
  return sha256_hex(material).substr(0, 32);
}

void BackendConfig::validate() const {
  if (max_retries < 0 || max_retries > 10) throw ConfigError("max_retries must be within 0..10");
  if (requests_per_minute <= 0) throw ConfigError("requests_per_minute must be positive");
  if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
}

// ---------------------------------------------------------------------------

void FixtureScript::add(std::string_view tag, std::string_view user_text, std::string response) {
  entries_[fingerprint(tag, user_text)] = std::move(response);
}

void FixtureScript::add_fingerprint(std::string fp, std::string response) {
  entries_[std::move(fp)] = std::move(response);
}

const std::string* FixtureScript::find(const std::string& fp) const {
  auto it = entries_.find(fp);
  return it == entries_.end() ? nullptr : &it->second;
}

FixtureScript FixtureScript::load(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw SchemaInvalid(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw SchemaInvalid(path.string() + ": fixture file must be a JSON object");
  FixtureScript script;
  for (auto& [fp, response] : doc.items()) {
    if (!response.is_string())
      throw SchemaInvalid(path.string() + ": fixture entry " + fp + " is not a string");
    script.entries_[fp] = response.get<std::string>();
  }
  return script;
}

void FixtureScript::save(const std::filesystem::path& path) const {
  ordered_json doc = ordered_json::object();
  for (const auto& [fp, response] : entries_) doc[fp] = response;
  write_json(path, doc);
}

std::string ReplayBackend::complete(const PromptRequest& request) {
  request.validate();
  const std::string fp = fingerprint(request);
  if (const std::string* hit = script_.find(fp)) return *hit;
  throw FixtureMiss(fp, request.tag);
}

std::string FunctionBackend::complete(const PromptRequest& request) {
  request.validate();
  std::lock_guard lock(mutex_);
  return handler_(request);
}

std::string RecordingBackend::complete(const PromptRequest& request) {
  std::string response = inner_.complete(request);
  std::lock_guard lock(mutex_);
  recorded_.add(request, response);
  return response;
}

FixtureScript RecordingBackend::recorded() const {
  std::lock_guard lock(mutex_);
  return recorded_;
}

// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int requests_per_minute)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::minutes(1)) /
                std::max(requests_per_minute, 1)),
      next_slot_(std::chrono::steady_clock::now()) {
  if (requests_per_minute <= 0) throw ConfigError("requests_per_minute must be positive");
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::chrono::milliseconds backoff_delay(std::chrono::milliseconds base, int attempt, double unit) {
  const double factor = 0.8 + 0.4 * std::clamp(unit, 0.0, 1.0);
  const double scaled = static_cast<double>(base.count()) * std::ldexp(1.0, std::max(attempt - 1, 0)) * factor;
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(scaled)));
}

// ---------------------------------------------------------------------------

struct HttpBackend::Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config)
    : config_(std::move(config)),
      limiter_(config_.requests_per_minute),
      jitter_state_(derive_seed(0x5eedULL, config_.endpoint_url)) {
  config_.validate();
  auto [origin, path] = split_url(config_.endpoint_url);
  endpoint_ = std::make_unique<Endpoint>(Endpoint{std::move(origin), std::move(path)});
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::complete(const PromptRequest& request) {
  request.validate();

  json body = {
      {"model", config_.model_name},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.role_preamble}},
                    {{"role", "user"}, {"content", request.user_text}}})},
      {"temperature", request.decode.greedy ? 0.0 : request.decode.temperature},
      {"max_tokens", request.decode.max_tokens},
  };
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0')
    headers.emplace("Authorization", std::string("Bearer ") + key);

  enum class Failure { None, Timeout, RateLimited, Upstream };
  Failure last = Failure::None;
  int last_status = 0;
  std::string last_message;

  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      double unit;
      {
        std::lock_guard lock(jitter_mutex_);
        SeededRng rng(jitter_state_);
        jitter_state_ = rng.next();
        unit = rng.unit();
      }
      std::this_thread::sleep_for(backoff_delay(config_.backoff_base, attempt, unit));
    }
    limiter_.acquire();

    httplib::Client client(endpoint_->origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());

    auto result = client.Post(endpoint_->path, headers, payload, "application/json");
    if (!result) {
      const auto err = result.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        last = Failure::Timeout;
        last_message = httplib::to_string(err);
      } else {
        last = Failure::Upstream;
        last_status = 0;
        last_message = httplib::to_string(err);
      }
      continue;
    }

    const int status = result->status;
    if (status == 429) {
      last = Failure::RateLimited;
      last_status = status;
      last_message = result->body;
      continue;
    }
    if (status >= 500) {
      last = Failure::Upstream;
      last_status = status;
      last_message = result->body;
      continue;
    }
    if (status < 200 || status >= 300) throw UpstreamError(status, result->body);

    try {
      const json reply = json::parse(result->body);
      const json& content = reply.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw UpstreamError(status, "response content is not a string");
      return content.get<std::string>();
    } catch (const json::exception& e) {
      throw UpstreamError(status, std::string("malformed completion body: ") + e.what());
    }
  }

  switch (last) {
    case Failure::Timeout:
      throw TimeoutError("request '" + request.tag + "' timed out after " +
                         std::to_string(config_.max_retries + 1) + " attempts: " + last_message);
    case Failure::RateLimited:
      throw RateLimitExhausted("rate limited on every attempt for request '" + request.tag + "'");
    default:
      throw UpstreamError(last_status, last_message);
  }
}

}  // namespace dataloop
