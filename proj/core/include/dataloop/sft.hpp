#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/corpus.hpp"
#include "dataloop/knowledge.hpp"

namespace dataloop {

class EmptyGeneration : public Error {
 public:
  using Error::Error;
};

/// Share of open-ended, choice and true/false samples.
struct FormatMix {
  double open_ended = 0.6;
  double choice = 0.3;
  double true_false = 0.1;

  /// Throws ConfigError unless all shares are non-negative and sum to 1 within 1e-9.
  void validate() const;
};

struct FormatCounts {
  std::int64_t open_ended = 0;
  std::int64_t choice = 0;
  std::int64_t true_false = 0;

  std::int64_t total() const { return open_ended + choice + true_false; }
  friend bool operator==(const FormatCounts&, const FormatCounts&) = default;
};

/// Largest-remainder split of `total` samples over the three formats.
FormatCounts allocate_format_mix(std::int64_t total, const FormatMix& mix);

/// Index ranges [begin, end) of consecutive windows: each starts `stride`
/// after the previous one, and the last one ends at the list end.
std::vector<std::pair<std::size_t, std::size_t>> plan_windows(std::size_t count, std::size_t window,
                                                              std::size_t stride);

/// The same windows materialised over a statement list.
std::vector<std::vector<L2Statement>> plan_windows(const std::vector<L2Statement>& statements, std::size_t window,
                                                   std::size_t stride);

enum class SftFormat { OpenEnded, Choice, TrueFalse };
std::string_view to_string(SftFormat f);  ///< "qa", "choice", "tf"

struct SynthesisParams {
  std::string cid;
  std::size_t window_index = 0;
  double single_choice_ratio = 0.77;  ///< share of single-answer items within choice batches
  double true_ratio = 0.5;            ///< share of true statements within true/false batches
  double overgeneration = 1.1;
};

/// Requests ceil(overgeneration * count) samples of one format for a window and
/// keeps the first `count` usable ones. Citations outside the window are
/// dropped; a sample left without any citation is discarded. l1_ids are the
/// linked concepts that belong to the cited statements, or all concepts of
/// those statements when none are linked.
///
/// Throws SchemaInvalid on a malformed record (including true/false answers
/// other than true or false) and EmptyGeneration when nothing usable remains.
std::vector<TrainingSample> synthesize_batch(const std::vector<L2Statement>& batch, const KnowledgeStructure& k,
                                             SftFormat format, std::size_t count, LlmBackend& backend,
                                             const SynthesisParams& params);

struct CoverageReport {
  double covered_fraction = 0.0;
  std::vector<std::string> uncovered_ids;
  bool below_target = false;  ///< covered_fraction < 0.7
};

CoverageReport coverage_report(const std::vector<TrainingSample>& samples, const std::vector<L2Statement>& statements);

struct SftConfig {
  FormatMix mix;
  std::int64_t per_discipline_quota = 10000;
  std::size_t window = 8;
  std::size_t stride = 8;
  double single_choice_ratio = 0.77;
  double true_ratio = 0.5;
  double overgeneration = 1.1;
};

struct SynthesisResult {
  std::vector<TrainingSample> samples;
  std::map<std::string, FormatCounts> planned;   ///< per cid
  std::map<std::string, CoverageReport> coverage;  ///< per cid
  std::vector<std::string> warnings;
};

/// Initial corpus: per discipline, split the quota over formats, then over
/// statement windows (sorted by id), and synthesize each (window, format)
/// batch. Failing batches are logged and skipped.
SynthesisResult synthesize_corpus(const KnowledgeStructure& k, LlmBackend& backend, const SftConfig& cfg);

}  // namespace dataloop
