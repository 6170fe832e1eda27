#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dataloop/error.hpp"
#include "dataloop/jsonl.hpp"

namespace dataloop {

class UnknownConcept : public Error {
 public:
  using Error::Error;
};

class DanglingReference : public Error {
 public:
  using Error::Error;
};

/// L3: an ordered multi-step reasoning chain extracted from one chunk.
struct L3Chain {
  std::string chain_id;
  std::string domain_context;
  std::string process_name;
  std::string narrative_summary;
  std::vector<std::string> preconditions;
  std::vector<std::string> negative_constraints;
  std::vector<std::string> steps;
  std::string cid;
  std::string source_chunk_id;
};

/// L2: one (subject, predicate, object) link between adjacent chain steps.
struct L2Statement {
  std::string statement_id;
  std::string parent_chain_id;
  std::string subject;
  std::string predicate;
  std::string object;
  std::string source_quote;
};

/// L1: a canonical concept harvested from statement endpoints.
struct L1Concept {
  std::string concept_id;
  std::string term;
  std::string type;
  std::string definition;
  std::vector<std::string> parent_statement_ids;
  std::vector<std::string> cids;
};

enum class ViolationKind {
  DuplicateId,
  DanglingReference,  ///< a concept lists a missing parent but is still reachable
  OrphanStatement,    ///< parent chain missing
  OrphanConcept,      ///< no parent statement reaches a chain
  MalformedRecord,    ///< empty required field or a chain with fewer than 2 steps
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string offending_id;
  std::string detail;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Immutable three-level structure with lookup indexes. Records keep the order
/// they were supplied in; indexes point at the first record for each id.
class KnowledgeStructure {
 public:
  KnowledgeStructure() = default;
  KnowledgeStructure(std::vector<L3Chain> chains, std::vector<L2Statement> statements,
                     std::vector<L1Concept> concepts);

  const std::vector<L3Chain>& chains() const noexcept { return chains_; }
  const std::vector<L2Statement>& statements() const noexcept { return statements_; }
  const std::vector<L1Concept>& concepts() const noexcept { return concepts_; }

  const L3Chain* find_chain(const std::string& id) const;
  const L2Statement* find_statement(const std::string& id) const;
  const L1Concept* find_concept(const std::string& id) const;

  /// Statements whose parent is `chain_id`, in record order.
  std::vector<const L2Statement*> statements_of_chain(const std::string& chain_id) const;

  /// Concepts listing `statement_id` as a parent, in record order.
  std::vector<const L1Concept*> concepts_of_statement(const std::string& statement_id) const;

  /// Concepts whose normalized term equals normalize_term(term).
  std::vector<const L1Concept*> find_by_term(const std::string& term) const;

  std::size_t node_count() const noexcept { return chains_.size() + statements_.size() + concepts_.size(); }

 private:
  std::vector<L3Chain> chains_;
  std::vector<L2Statement> statements_;
  std::vector<L1Concept> concepts_;
  std::unordered_map<std::string, std::size_t> chain_index_;
  std::unordered_map<std::string, std::size_t> statement_index_;
  std::unordered_map<std::string, std::size_t> concept_index_;
  std::unordered_map<std::string, std::vector<std::size_t>> chain_statements_;
  std::unordered_map<std::string, std::vector<std::size_t>> statement_concepts_;
  std::unordered_map<std::string, std::vector<std::size_t>> term_index_;
};

/// Every structural defect: duplicate ids, statements without a parent chain,
/// concepts that no chain reaches, partially dangling parent lists, and
/// malformed records. An empty report means the structure is valid.
std::vector<Violation> validate(const KnowledgeStructure& k);

/// Concepts sharing a statement with `concept_id`, together with concepts in
/// any statement whose predicate (case- and space-normalized) matches one of
/// the concept's own predicates. Sorted; never contains `concept_id`.
std::vector<std::string> neighbor_set(const KnowledgeStructure& k, const std::string& concept_id);

/// Merges concepts whose normalized terms are equal and which share a cid.
/// The survivor takes the smallest id and the tidied spelling of that
/// record's term; parents and cids are unioned and sorted; the longest
/// definition wins, ties to the smaller id. Output is sorted by id.
std::vector<L1Concept> canonicalize_concepts(const std::vector<L1Concept>& raw);

struct ConnectivityStats {
  std::size_t chains = 0;
  std::size_t statements = 0;
  std::size_t concepts = 0;
  std::size_t nodes = 0;
  std::size_t components = 0;
  std::size_t largest_component = 0;
  double lcc_ratio = 0.0;
};

/// Component analysis over the undirected parent-link graph. Throws
/// DanglingReference if any link points at a missing record.
ConnectivityStats connectivity_stats(const KnowledgeStructure& k);

// Persistence, fields in schema order.
ordered_json to_json(const L3Chain& c);
ordered_json to_json(const L2Statement& s);
ordered_json to_json(const L1Concept& c);
L3Chain chain_from_json(const json& j);
L2Statement statement_from_json(const json& j);
L1Concept concept_from_json(const json& j);

/// chains.jsonl, statements.jsonl and concepts.jsonl under `dir`.
void save_knowledge(const std::filesystem::path& dir, const KnowledgeStructure& k);
KnowledgeStructure load_knowledge(const std::filesystem::path& dir);

}  // namespace dataloop
