#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/corpus.hpp"
#include "dataloop/knowledge.hpp"

namespace dataloop {

class EmptyNeighborhood : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class OptionCountWrong : public SchemaInvalid {
 public:
  using SchemaInvalid::SchemaInvalid;
};

class AnswerNotInOptions : public SchemaInvalid {
 public:
  using SchemaInvalid::SchemaInvalid;
};

struct ItemMetadata {
  std::string chain_id;
  std::vector<std::string> l2_ids;
  std::vector<std::string> l1_ids;
};

struct BenchmarkItem {
  std::string item_id;
  std::string question;
  std::map<std::string, std::string> options;  ///< exactly A..D
  std::vector<std::string> answer;             ///< sorted, unique, non-empty
  std::string explanation;
  ItemMetadata metadata;
  std::string cid;

  QuestionType question_type() const {
    return answer.size() == 1 ? QuestionType::SingleChoice : QuestionType::MultipleChoice;
  }
  /// Canonical answer string, e.g. "A,B,D".
  std::string answer_text() const;
  void validate() const;
};

ordered_json to_json(const BenchmarkItem& item);
BenchmarkItem item_from_json(const json& j);
std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path);
void save_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkItem>& items);

/// Splits "A,B,D" (or "A B D", "ABD") into sorted unique letters.
std::vector<std::string> split_answer_letters(const std::string& answer);

// ---------------------------------------------------------------------------
// Perturbation operators

enum class PerturbationOp { SubstAdjacent, InvertRelation, Truncate };
std::string_view to_string(PerturbationOp op);

struct PerturbedChain {
  std::string base_chain_id;
  PerturbationOp op = PerturbationOp::Truncate;
  ordered_json detail;
  std::vector<std::string> steps;
};

/// Relation inverses. Lookups are case- and space-insensitive. Pairs added
/// through add_pair are registered in both directions.
class InverseLexicon {
 public:
  static InverseLexicon defaults();
  /// Tab-separated pairs, one per line; '#' starts a comment.
  static InverseLexicon load_tsv(const std::filesystem::path& path);

  void add_pair(const std::string& a, const std::string& b);
  const std::string* find(const std::string& predicate) const;
  const std::map<std::string, std::string>& entries() const noexcept { return map_; }

 private:
  std::map<std::string, std::string> map_;
};

/// Negated form of a verb phrase: "leads to" -> "does not lead to",
/// "is bound by" -> "is not bound by", "has" -> "does not have".
std::string negate_predicate(const std::string& predicate);

/// Concept a chain step is about: the chain's concept whose term occurs in the
/// step text (longest term wins, then smallest id), else a concept of the
/// statement leaving that step. Throws EmptyNeighborhood when the step has
/// no concept at all.
const L1Concept& anchor_concept(const L3Chain& chain, std::size_t step_index, const KnowledgeStructure& k);

/// SubstAdj: swaps the step's anchor concept for a seeded choice among its
/// neighbors (sorted by id).
PerturbedChain perturb_substitute(const L3Chain& chain, std::size_t step_index, const KnowledgeStructure& k,
                                  std::uint64_t seed);

/// InvRel: lexicon inverse when known, otherwise the negated predicate. The
/// statement id gains an "-inv" suffix; nothing else changes.
L2Statement perturb_invert(const L2Statement& statement, const InverseLexicon& lexicon);

/// Trunc: the first t steps, 1 <= t < T.
PerturbedChain perturb_truncate(const L3Chain& chain, std::size_t t);

// ---------------------------------------------------------------------------
// Item generation

struct BenchmarkConfig {
  double multi_select_share = 0.8;
  std::size_t ngram = 13;
};

/// Builds one item from a chain. The model sees the chain, one output of each
/// perturbation operator as distractor material, and the number of correct
/// options to write (1, or 2-3 with probability multi_select_share).
BenchmarkItem generate_item(const L3Chain& chain, const KnowledgeStructure& k, LlmBackend& backend,
                            std::uint64_t seed, const BenchmarkConfig& cfg = {},
                            const InverseLexicon& lexicon = InverseLexicon::defaults());

struct BenchmarkBuild {
  std::vector<BenchmarkItem> items;
  std::vector<std::pair<std::string, std::string>> failures;  ///< chain_id, error
};

/// generate_item over every chain in chain_id order; failing chains are
/// skipped and listed.
BenchmarkBuild build_benchmark(const KnowledgeStructure& k, LlmBackend& backend, std::uint64_t seed,
                               const BenchmarkConfig& cfg = {},
                               const InverseLexicon& lexicon = InverseLexicon::defaults());

// ---------------------------------------------------------------------------
// Orthogonality

struct Collision {
  std::string sample_id;
  std::string item_id;
  std::string span;  ///< first shared n-token span, case-folded
};

struct OrthogonalityReport {
  std::vector<Collision> collisions;  ///< at most one per (sample, item) pair
  std::vector<std::string> structural_issues;
};

/// Flags every (training sample, benchmark item) pair where the sample text
/// and the item question share a contiguous run of n whitespace tokens
/// (case-folded), plus any item without a source chain and any initial sample
/// without statement ids. n must be at least 5.
OrthogonalityReport check_orthogonality(const std::vector<BenchmarkItem>& benchmark,
                                        const std::vector<TrainingSample>& corpus, std::size_t n = 13);

}  // namespace dataloop
