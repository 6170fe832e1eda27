#pragma once

#include <set>
#include <string>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/curation.hpp"
#include "dataloop/knowledge.hpp"

namespace dataloop {

class TooFewSteps : public Error {
 public:
  using Error::Error;
};

class AdjacencyViolation : public Error {
 public:
  using Error::Error;
};

class DanglingParent : public Error {
 public:
  using Error::Error;
};

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(std::vector<Violation> report);
  const std::vector<Violation>& report() const noexcept { return report_; }

 private:
  std::vector<Violation> report_;
};

struct ExtractionConfig {
  int min_steps = 3;
  double alpha = 0.6;  ///< statement yield floor as a fraction of T-1
  double balance_max_share = 0.20;
  double balance_top3_share = 0.50;
  int step_warn_low = 3;  ///< chains outside [low, high] steps are logged, not rejected
  int step_warn_high = 19;
  bool enforce_adjacency = true;

  void validate() const;
};

/// "chain-" + chunk id when the id is all digits, otherwise "chain-" plus
/// the first 8 hex digits of the id's SHA-256.
std::string chain_id_for_chunk(const std::string& chunk_id);

L3Chain extract_chain(const Chunk& chunk, LlmBackend& backend, const ExtractionConfig& cfg,
                      std::vector<std::string>* warnings = nullptr);

/// At most T-1 statements, each parented to `chain`. Statement ids from the
/// model are kept when they start with "stmt-", mention the chain's number
/// and are unique; otherwise they become "stmt-<chain_id>-NNN".
std::vector<L2Statement> decompose_chain(const L3Chain& chain, const Chunk& chunk, LlmBackend& backend,
                                         const ExtractionConfig& cfg, std::vector<std::string>* warnings = nullptr);

/// Index of the step an endpoint phrase most plausibly refers to, or -1 when
/// no step clearly wins (content-word overlap of at least 60% of the phrase,
/// strictly ahead of the runner-up).
int locate_step(const std::string& phrase, const std::vector<std::string>& steps);

struct BalanceViolation {
  enum class Kind { SingleChain, TopThree } kind;
  std::vector<std::string> chain_ids;
  double share = 0.0;
};

/// Flags chains above balance_max_share of all statements and the three
/// largest chains together above balance_top3_share. Waived below 5 chains.
std::vector<BalanceViolation> check_balance(const std::vector<L2Statement>& statements,
                                            const std::vector<L3Chain>& chains, const ExtractionConfig& cfg);

struct HarvestResult {
  std::vector<L1Concept> concepts;
  std::vector<std::string> uncovered_statement_ids;
  std::vector<std::string> warnings;
};

/// Harvests L1 concepts from statement endpoints. Parent lists are filtered
/// to the input ids and completed by scanning subjects and objects for the
/// concept's normalized term; cids are taken from the parent chains. Concept
/// ids in `taken` are not reused, and new ids are added to it.
HarvestResult harvest_concepts(const std::vector<L2Statement>& statements, const std::vector<L3Chain>& chains,
                               LlmBackend& backend, std::set<std::string>* taken = nullptr);

struct ChunkLogEntry {
  std::string chunk_id;
  std::string status;  ///< "ok", "quarantined", "harvest_failed"
  std::string detail;
  double millis = 0.0;
};

struct ExtractionResult {
  KnowledgeStructure structure;
  std::vector<ChunkLogEntry> log;
  std::vector<std::string> warnings;
  std::vector<BalanceViolation> balance;
};

/// Extract and decompose every chunk in chunk_id order, harvest concepts per
/// chain, canonicalize, then validate. Chunks that fail are quarantined and
/// logged. Throws ValidationFailed if the assembled structure has violations.
ExtractionResult run_extraction(std::vector<Chunk> chunks, LlmBackend& backend, const ExtractionConfig& cfg);

}  // namespace dataloop
