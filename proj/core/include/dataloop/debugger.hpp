#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/corpus.hpp"
#include "dataloop/evaluator.hpp"
#include "dataloop/knowledge.hpp"
#include "dataloop/sft.hpp"

namespace dataloop {

class AllZeroErrors : public Error {
 public:
  using Error::Error;
};

class ShortBatch : public Error {
 public:
  using Error::Error;
};

class InsufficientDisjointPool : public Error {
 public:
  using Error::Error;
};

class QuotaMismatch : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Diagnosis

enum class IssueType { ConceptGap, CapabilityDeficit };
std::string_view to_string(IssueType t);  ///< "concept_gap", "capability_deficit"
IssueType parse_issue_type(std::string_view s);

struct Diagnosis {
  std::string item_id;
  IssueType issue_type = IssueType::ConceptGap;
  std::string key_concept;
  std::string reasoning;
  std::string recommendation;
  double confidence = 0.0;

  /// key_concept non-empty, confidence in [0, 1].
  void validate() const;
};

ordered_json to_json(const Diagnosis& d);
/// Decodes a model response or a persisted record. `item_id` is used when the
/// record does not carry one.
Diagnosis diagnosis_from_json(const json& j, const std::string& item_id = "");
std::vector<Diagnosis> load_diagnoses(const std::filesystem::path& path);
void save_diagnoses(const std::filesystem::path& path, const std::vector<Diagnosis>& diagnoses);

/// One judged diagnosis. A failed attempt is repeated up to `attempts` times
/// in total; repeats carry "#2", "#3", ... on the tag so scripted backends can
/// answer them differently. Throws the last SchemaInvalid (or payload error)
/// once attempts run out.
Diagnosis diagnose(const ErrorSample& error, LlmBackend& backend, int attempts = 3);

struct DiagnosisRun {
  std::vector<Diagnosis> diagnoses;                          ///< error order
  std::vector<std::pair<std::string, std::string>> dropped;  ///< item_id, last error
};

/// diagnose over the error set; errors that never yield a valid diagnosis are
/// dropped from patching but listed.
DiagnosisRun diagnose_all(const std::vector<ErrorSample>& errors, LlmBackend& backend, int attempts = 3);

struct PatternSummary {
  std::map<std::string, std::int64_t> by_issue_type;     ///< both issue types always present
  std::map<std::string, std::int64_t> by_question_type;  ///< over all errors
  std::int64_t errors = 0;
  std::int64_t diagnosed = 0;
  std::int64_t undiagnosed() const { return errors - diagnosed; }
};

PatternSummary aggregate_patterns(const std::vector<Diagnosis>& diagnoses, const std::vector<ErrorSample>& errors);
ordered_json to_json(const PatternSummary& p);

// ---------------------------------------------------------------------------
// Quotas

/// Splits `total` over disciplines in proportion to their error counts
/// (largest remainder, exact integer arithmetic, ties to the smaller cid).
/// Throws AllZeroErrors when total > 0 and every count is zero, ConfigError on
/// negative inputs.
std::map<std::string, std::int64_t> allocate_quota(const std::map<std::string, std::int64_t>& error_counts,
                                                   std::int64_t total);

// ---------------------------------------------------------------------------
// Patch generation

struct PatchContext {
  Diagnosis diagnosis;
  ErrorSample error;
  std::optional<L3Chain> chain;
  std::vector<L2Statement> statements;  ///< the chain's statements
  std::vector<L1Concept> concepts;      ///< concepts of those statements, by id
  std::optional<L1Concept> key;         ///< diagnosed concept resolved in the structure
  std::vector<std::string> neighbor_terms;
};

/// Resolves the diagnosed concept by normalized term, preferring a match
/// linked to the failed item's chain, and falls back to the first resolvable
/// id in the item's metadata.l1_ids.
PatchContext assemble_patch_context(const Diagnosis& d, const ErrorSample& error, const KnowledgeStructure& k);

struct PatchConfig {
  std::int64_t batch_size = 20;
  FormatMix mix;     ///< 20 at 6:3:1 is 12 / 6 / 2
  int attempts = 3;  ///< requests per format before ShortBatch
  int round = 1;
};

/// Exactly batch_size patch samples for one diagnosis. Concept gaps get
/// contrastive material built around the key concept and its neighbors;
/// capability deficits get a step-by-step scaffold over the source chain.
/// Unusable records are dropped and the remainder is requested again; a
/// format still short after `attempts` requests throws ShortBatch.
std::vector<TrainingSample> generate_patch(const PatchContext& ctx, LlmBackend& backend, const PatchConfig& cfg = {});

// ---------------------------------------------------------------------------
// Replay and round-2 assembly

enum class ReplayPolicy { Strict, Relaxed };

struct ReplaySelection {
  std::map<std::string, std::vector<TrainingSample>> replay;  ///< per cid
  std::map<std::string, std::int64_t> overlap_violations;     ///< relaxed fills that share an L2 id
  std::vector<std::string> log;
};

/// Per discipline, picks quota - |patches| samples (origin becomes replay)
/// uniformly at random from the prior corpus, among samples whose l2_ids do
/// not meet that discipline's patch l2_ids. With a prior report, samples
/// citing an L2 id of a failed item are also excluded; samples no item tests
/// stay eligible. Strict policy throws InsufficientDisjointPool on a short
/// pool; relaxed fills the gap with the least-overlapping samples.
ReplaySelection select_replay(const std::vector<TrainingSample>& prior_corpus,
                              const std::vector<TrainingSample>& patches,
                              const std::map<std::string, std::int64_t>& quotas, std::uint64_t seed,
                              ReplayPolicy policy = ReplayPolicy::Strict, const EvaluationReport* prior = nullptr);

/// Drops the oldest patches of any discipline whose patches exceed its quota.
/// Returns the kept patches and appends one line per trimmed discipline.
std::vector<TrainingSample> fit_patches_to_quota(const std::vector<TrainingSample>& patches,
                                                 const std::map<std::string, std::int64_t>& quotas,
                                                 std::vector<std::string>* log);

struct Round2Corpus {
  std::vector<TrainingSample> samples;
  ordered_json manifest;  ///< {total, counts: {cid: {patch, replay}}}
};

/// Concatenates patches and replay and shuffles with the seed. Throws
/// QuotaMismatch unless every discipline's patch + replay count equals its
/// quota and the quotas sum to target_total.
Round2Corpus assemble_round2(const std::vector<TrainingSample>& patches,
                             const std::map<std::string, std::vector<TrainingSample>>& replay,
                             const std::map<std::string, std::int64_t>& quotas, std::int64_t target_total,
                             std::uint64_t seed);

struct RepairPlan {
  int round = 1;
  std::map<std::string, std::int64_t> quotas;
  std::vector<Diagnosis> diagnoses;
  std::map<std::string, std::vector<TrainingSample>> patch_batches;  ///< per failed item
  std::map<std::string, std::vector<TrainingSample>> replay;
};

/// Summary document: quotas, diagnoses, and sample ids per batch.
ordered_json to_json(const RepairPlan& plan);

/// Human-readable diagnostic report: global metrics, per-subject table, error
/// patterns and up to `examples` diagnosed error samples.
std::string render_report(const EvaluationReport& report, const std::vector<Diagnosis>& diagnoses,
                          std::size_t examples = 2);

}  // namespace dataloop
