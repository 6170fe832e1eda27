#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dataloop/backend.hpp"
#include "dataloop/benchmark.hpp"
#include "dataloop/debugger.hpp"
#include "dataloop/extraction.hpp"
#include "dataloop/sft.hpp"

namespace dataloop {

/// Settings read from a project's `project.conf`.
///
/// The file holds `key = value` lines; '#' starts a comment and blank lines
/// are ignored. Unknown keys and malformed values are errors. Recognised keys
/// and their defaults:
///
///   seed                      = 7
///   backend.endpoint_url      = http://localhost:8000/v1/chat/completions
///   backend.model_name        = default
///   backend.timeout_s         = 120
///   backend.max_retries       = 3
///   backend.requests_per_minute = 60
///   backend.api_key_env       = DATALOOP_API_KEY
///   curation.chunk_tokens     = 512
///   curation.chunk_overlap    = 64
///   curation.tau              = 3.0
///   extraction.min_steps      = 3
///   bench.multi_select_share  = 0.8
///   bench.ngram               = 13
///   sft.per_discipline_quota  = 10000
///   sft.window                = 8
///   sft.stride                = 8
///   sft.mix                   = 0.6,0.3,0.1
///   sft.single_choice_ratio   = 0.77
///   sft.true_ratio            = 0.5
///   sft.overgeneration        = 1.1
///   eval.model_name           = model
///   debug.corpus_total        = 0        (0: size of the corpus being repaired)
///   debug.patch_size          = 20
///   debug.patch_attempts      = 3
///   debug.diagnose_attempts   = 3
///   debug.replay_policy       = strict   (strict | relaxed)
struct ProjectConfig {
  std::uint64_t seed = 7;
  BackendConfig backend;
  std::int64_t chunk_tokens = 512;
  std::int64_t chunk_overlap = 64;
  double tau = 3.0;
  ExtractionConfig extraction;
  BenchmarkConfig bench;
  SftConfig sft;
  std::string eval_model_name = "model";
  std::int64_t corpus_total = 0;
  std::int64_t patch_size = 20;
  int patch_attempts = 3;
  int diagnose_attempts = 3;
  ReplayPolicy replay_policy = ReplayPolicy::Strict;

  /// Throws ConfigError naming the offending line.
  static ProjectConfig parse(const std::string& text);
  static ProjectConfig load(const std::filesystem::path& path);

  /// Range checks across all sections.
  void validate() const;

  /// Canonical `key = value` text with every key, in the order above.
  std::string render() const;
};

}  // namespace dataloop
