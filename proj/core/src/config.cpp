#include "dataloop/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "dataloop/text.hpp"

namespace dataloop {
namespace {

std::int64_t to_int(const std::string& v) {
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("not an integer: '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("not an unsigned integer: '" + v + "'");
  return out;
}

double to_real(const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("not a number: '" + v + "'");
  return out;
}

std::string real(double v) { return fmt::format("{}", v); }

struct Key {
  const char* name;
  std::function<void(ProjectConfig&, const std::string&)> set;
  std::function<std::string(const ProjectConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      {"seed", [](ProjectConfig& c, const std::string& v) { c.seed = to_uint(v); },
       [](const ProjectConfig& c) { return std::to_string(c.seed); }},
      {"backend.endpoint_url", [](ProjectConfig& c, const std::string& v) { c.backend.endpoint_url = v; },
       [](const ProjectConfig& c) { return c.backend.endpoint_url; }},
      {"backend.model_name", [](ProjectConfig& c, const std::string& v) { c.backend.model_name = v; },
       [](const ProjectConfig& c) { return c.backend.model_name; }},
      {"backend.timeout_s",
       [](ProjectConfig& c, const std::string& v) { c.backend.timeout = std::chrono::seconds(to_int(v)); },
       [](const ProjectConfig& c) {
         return std::to_string(std::chrono::duration_cast<std::chrono::seconds>(c.backend.timeout).count());
       }},
      {"backend.max_retries",
       [](ProjectConfig& c, const std::string& v) { c.backend.max_retries = static_cast<int>(to_int(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.backend.max_retries); }},
      {"backend.requests_per_minute",
       [](ProjectConfig& c, const std::string& v) { c.backend.requests_per_minute = static_cast<int>(to_int(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.backend.requests_per_minute); }},
      {"backend.api_key_env", [](ProjectConfig& c, const std::string& v) { c.backend.api_key_env = v; },
       [](const ProjectConfig& c) { return c.backend.api_key_env; }},
      {"curation.chunk_tokens", [](ProjectConfig& c, const std::string& v) { c.chunk_tokens = to_int(v); },
       [](const ProjectConfig& c) { return std::to_string(c.chunk_tokens); }},
      {"curation.chunk_overlap", [](ProjectConfig& c, const std::string& v) { c.chunk_overlap = to_int(v); },
       [](const ProjectConfig& c) { return std::to_string(c.chunk_overlap); }},
      {"curation.tau", [](ProjectConfig& c, const std::string& v) { c.tau = to_real(v); },
       [](const ProjectConfig& c) { return real(c.tau); }},
      {"extraction.min_steps",
       [](ProjectConfig& c, const std::string& v) { c.extraction.min_steps = static_cast<int>(to_int(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.extraction.min_steps); }},
      {"bench.multi_select_share", [](ProjectConfig& c, const std::string& v) { c.bench.multi_select_share = to_real(v); },
       [](const ProjectConfig& c) { return real(c.bench.multi_select_share); }},
      {"bench.ngram", [](ProjectConfig& c, const std::string& v) { c.bench.ngram = static_cast<std::size_t>(to_uint(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.bench.ngram); }},
      {"sft.per_discipline_quota", [](ProjectConfig& c, const std::string& v) { c.sft.per_discipline_quota = to_int(v); },
       [](const ProjectConfig& c) { return std::to_string(c.sft.per_discipline_quota); }},
      {"sft.window", [](ProjectConfig& c, const std::string& v) { c.sft.window = static_cast<std::size_t>(to_uint(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.sft.window); }},
      {"sft.stride", [](ProjectConfig& c, const std::string& v) { c.sft.stride = static_cast<std::size_t>(to_uint(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.sft.stride); }},
      {"sft.mix",
       [](ProjectConfig& c, const std::string& v) {
         const auto parts = text::split(v, ',');
         if (parts.size() != 3) throw ConfigError("sft.mix needs three comma-separated shares");
         c.sft.mix = {to_real(text::trim(parts[0])), to_real(text::trim(parts[1])), to_real(text::trim(parts[2]))};
       },
       [](const ProjectConfig& c) {
         return real(c.sft.mix.open_ended) + "," + real(c.sft.mix.choice) + "," + real(c.sft.mix.true_false);
       }},
      {"sft.single_choice_ratio", [](ProjectConfig& c, const std::string& v) { c.sft.single_choice_ratio = to_real(v); },
       [](const ProjectConfig& c) { return real(c.sft.single_choice_ratio); }},
      {"sft.true_ratio", [](ProjectConfig& c, const std::string& v) { c.sft.true_ratio = to_real(v); },
       [](const ProjectConfig& c) { return real(c.sft.true_ratio); }},
      {"sft.overgeneration", [](ProjectConfig& c, const std::string& v) { c.sft.overgeneration = to_real(v); },
       [](const ProjectConfig& c) { return real(c.sft.overgeneration); }},
      {"eval.model_name", [](ProjectConfig& c, const std::string& v) { c.eval_model_name = v; },
       [](const ProjectConfig& c) { return c.eval_model_name; }},
      {"debug.corpus_total", [](ProjectConfig& c, const std::string& v) { c.corpus_total = to_int(v); },
       [](const ProjectConfig& c) { return std::to_string(c.corpus_total); }},
      {"debug.patch_size", [](ProjectConfig& c, const std::string& v) { c.patch_size = to_int(v); },
       [](const ProjectConfig& c) { return std::to_string(c.patch_size); }},
      {"debug.patch_attempts",
       [](ProjectConfig& c, const std::string& v) { c.patch_attempts = static_cast<int>(to_int(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.patch_attempts); }},
      {"debug.diagnose_attempts",
       [](ProjectConfig& c, const std::string& v) { c.diagnose_attempts = static_cast<int>(to_int(v)); },
       [](const ProjectConfig& c) { return std::to_string(c.diagnose_attempts); }},
      {"debug.replay_policy",
       [](ProjectConfig& c, const std::string& v) {
         if (v == "strict") c.replay_policy = ReplayPolicy::Strict;
         else if (v == "relaxed") c.replay_policy = ReplayPolicy::Relaxed;
         else throw ConfigError("debug.replay_policy must be strict or relaxed");
       },
       [](const ProjectConfig& c) {
         return std::string(c.replay_policy == ReplayPolicy::Strict ? "strict" : "relaxed");
       }},
  };
  return k;
}

}  // namespace

ProjectConfig ProjectConfig::parse(const std::string& content) {
  ProjectConfig cfg;
  cfg.backend.endpoint_url = "http://localhost:8000/v1/chat/completions";
  cfg.backend.model_name = "default";
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    const std::string key = text::trim(line.substr(0, eq));
    const std::string value = text::trim(line.substr(eq + 1));
    const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return key == k.name; });
    if (it == keys().end()) throw ConfigError(fmt::format("line {}: unknown key '{}'", line_no, key));
    if (!seen.insert(key).second) throw ConfigError(fmt::format("line {}: '{}' set twice", line_no, key));
    try {
      it->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {} ({}): {}", line_no, key, e.what()));
    }
  }
  cfg.validate();
  return cfg;
}

ProjectConfig ProjectConfig::load(const std::filesystem::path& path) { return parse(read_file(path)); }

void ProjectConfig::validate() const {
  backend.validate();
  extraction.validate();
  sft.mix.validate();
  if (chunk_tokens < 1) throw ConfigError("curation.chunk_tokens must be positive");
  if (chunk_overlap < 0 || chunk_overlap >= chunk_tokens)
    throw ConfigError("curation.chunk_overlap must lie in [0, chunk_tokens)");
  if (tau < 1.0 || tau > 5.0) throw ConfigError("curation.tau must lie in [1, 5]");
  if (bench.multi_select_share < 0.0 || bench.multi_select_share > 1.0)
    throw ConfigError("bench.multi_select_share must lie in [0, 1]");
  if (bench.ngram < 5) throw ConfigError("bench.ngram must be at least 5");
  if (sft.per_discipline_quota < 0) throw ConfigError("sft.per_discipline_quota must be non-negative");
  if (sft.window < 1 || sft.stride < 1 || sft.stride > sft.window)
    throw ConfigError("sft.window and sft.stride need 1 <= stride <= window");
  if (sft.overgeneration < 1.0) throw ConfigError("sft.overgeneration must be at least 1");
  if (corpus_total < 0) throw ConfigError("debug.corpus_total must be non-negative");
  if (patch_size < 1) throw ConfigError("debug.patch_size must be positive");
  if (patch_attempts < 1 || diagnose_attempts < 1) throw ConfigError("attempt counts must be positive");
}

std::string ProjectConfig::render() const {
  std::string out;
  for (const auto& k : keys()) out += fmt::format("{} = {}\n", k.name, k.get(*this));
  return out;
}

}  // namespace dataloop
