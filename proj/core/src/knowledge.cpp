#include "dataloop/knowledge.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_set>

#include "dataloop/text.hpp"

namespace dataloop {
namespace {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }

  std::vector<std::size_t> parent;
  std::vector<std::size_t> size;
};

std::string normalize_predicate(const std::string& p) { return text::to_lower(text::collapse_whitespace(p)); }

std::string strip_cid_prefix(std::string s) {
  if (text::starts_with_ci(s, "cid-")) s.erase(0, 4);
  return s;
}

template <typename T>
void sorted_union(std::vector<T>& into, const std::vector<T>& from) {
  into.insert(into.end(), from.begin(), from.end());
  std::sort(into.begin(), into.end());
  into.erase(std::unique(into.begin(), into.end()), into.end());
}

}  // namespace

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::DuplicateId: return "duplicate_id";
    case ViolationKind::DanglingReference: return "dangling_reference";
    case ViolationKind::OrphanStatement: return "orphan_statement";
    case ViolationKind::OrphanConcept: return "orphan_concept";
    case ViolationKind::MalformedRecord: return "malformed_record";
  }
  return "unknown";
}

KnowledgeStructure::KnowledgeStructure(std::vector<L3Chain> chains, std::vector<L2Statement> statements,
                                       std::vector<L1Concept> concepts)
    : chains_(std::move(chains)), statements_(std::move(statements)), concepts_(std::move(concepts)) {
  for (std::size_t i = 0; i < chains_.size(); ++i) chain_index_.try_emplace(chains_[i].chain_id, i);
  for (std::size_t i = 0; i < statements_.size(); ++i) {
    statement_index_.try_emplace(statements_[i].statement_id, i);
    chain_statements_[statements_[i].parent_chain_id].push_back(i);
  }
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    concept_index_.try_emplace(concepts_[i].concept_id, i);
    std::unordered_set<std::string> seen;
    for (const auto& sid : concepts_[i].parent_statement_ids)
      if (seen.insert(sid).second) statement_concepts_[sid].push_back(i);
    term_index_[text::normalize_term(concepts_[i].term)].push_back(i);
  }
}

const L3Chain* KnowledgeStructure::find_chain(const std::string& id) const {
  auto it = chain_index_.find(id);
  return it == chain_index_.end() ? nullptr : &chains_[it->second];
}

const L2Statement* KnowledgeStructure::find_statement(const std::string& id) const {
  auto it = statement_index_.find(id);
  return it == statement_index_.end() ? nullptr : &statements_[it->second];
}

const L1Concept* KnowledgeStructure::find_concept(const std::string& id) const {
  auto it = concept_index_.find(id);
  return it == concept_index_.end() ? nullptr : &concepts_[it->second];
}

std::vector<const L2Statement*> KnowledgeStructure::statements_of_chain(const std::string& chain_id) const {
  std::vector<const L2Statement*> out;
  if (auto it = chain_statements_.find(chain_id); it != chain_statements_.end())
    for (auto i : it->second) out.push_back(&statements_[i]);
  return out;
}

std::vector<const L1Concept*> KnowledgeStructure::concepts_of_statement(const std::string& statement_id) const {
  std::vector<const L1Concept*> out;
  if (auto it = statement_concepts_.find(statement_id); it != statement_concepts_.end())
    for (auto i : it->second) out.push_back(&concepts_[i]);
  return out;
}

std::vector<const L1Concept*> KnowledgeStructure::find_by_term(const std::string& term) const {
  std::vector<const L1Concept*> out;
  if (auto it = term_index_.find(text::normalize_term(term)); it != term_index_.end())
    for (auto i : it->second) out.push_back(&concepts_[i]);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Violation> validate(const KnowledgeStructure& k) {
  std::vector<Violation> report;

  auto check_duplicates = [&report](auto const& records, auto id_of) {
    std::unordered_set<std::string> seen;
    std::set<std::string> reported;
    for (const auto& r : records) {
      const std::string& id = id_of(r);
      if (!seen.insert(id).second && reported.insert(id).second)
        report.push_back({ViolationKind::DuplicateId, id, "id appears more than once"});
    }
  };
  check_duplicates(k.chains(), [](const L3Chain& c) -> const std::string& { return c.chain_id; });
  check_duplicates(k.statements(), [](const L2Statement& s) -> const std::string& { return s.statement_id; });
  check_duplicates(k.concepts(), [](const L1Concept& c) -> const std::string& { return c.concept_id; });

  for (const auto& c : k.chains()) {
    if (c.chain_id.empty() || c.steps.size() < 2)
      report.push_back({ViolationKind::MalformedRecord, c.chain_id, "chain needs an id and at least 2 steps"});
  }

  for (const auto& s : k.statements()) {
    if (s.subject.empty() || s.predicate.empty() || s.object.empty())
      report.push_back({ViolationKind::MalformedRecord, s.statement_id, "empty subject, predicate or object"});
    if (k.find_chain(s.parent_chain_id) == nullptr)
      report.push_back({ViolationKind::OrphanStatement, s.statement_id, "parent chain " + s.parent_chain_id + " not found"});
  }

  for (const auto& c : k.concepts()) {
    bool reachable = false;
    std::vector<std::string> missing;
    for (const auto& sid : c.parent_statement_ids) {
      const L2Statement* s = k.find_statement(sid);
      if (s == nullptr) {
        missing.push_back(sid);
        continue;
      }
      if (k.find_chain(s->parent_chain_id) != nullptr) reachable = true;
    }
    if (!reachable) {
      report.push_back({ViolationKind::OrphanConcept, c.concept_id, "no parent statement reaches a chain"});
    } else if (!missing.empty()) {
      report.push_back({ViolationKind::DanglingReference, c.concept_id,
                        "missing parent statements: " + text::join(missing, ", ")});
    }
  }
  return report;
}

std::vector<std::string> neighbor_set(const KnowledgeStructure& k, const std::string& concept_id) {
  const L1Concept* self = k.find_concept(concept_id);
  if (self == nullptr) throw UnknownConcept("unknown concept " + concept_id);

  std::set<std::string> predicates;
  std::set<std::string> out;
  for (const auto& sid : self->parent_statement_ids) {
    const L2Statement* s = k.find_statement(sid);
    if (s == nullptr) continue;
    predicates.insert(normalize_predicate(s->predicate));
    for (const L1Concept* c : k.concepts_of_statement(sid)) out.insert(c->concept_id);
  }
  if (!predicates.empty()) {
    for (const auto& s : k.statements()) {
      if (predicates.count(normalize_predicate(s.predicate)) == 0) continue;
      for (const L1Concept* c : k.concepts_of_statement(s.statement_id)) out.insert(c->concept_id);
    }
  }
  out.erase(concept_id);
  return {out.begin(), out.end()};
}

std::vector<L1Concept> canonicalize_concepts(const std::vector<L1Concept>& raw) {
  DisjointSets sets(raw.size());
  std::map<std::pair<std::string, std::string>, std::size_t> first_seen;  // (cid, key) -> index
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::string key = text::normalize_term(raw[i].term);
    for (const auto& cid : raw[i].cids) {
      auto [it, inserted] = first_seen.try_emplace({cid, key}, i);
      if (!inserted) sets.unite(it->second, i);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < raw.size(); ++i) groups[sets.find(i)].push_back(i);

  std::vector<L1Concept> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end(), [&raw](std::size_t a, std::size_t b) {
      return raw[a].concept_id != raw[b].concept_id ? raw[a].concept_id < raw[b].concept_id : a < b;
    });
    const L1Concept& survivor = raw[members.front()];
    L1Concept merged;
    merged.concept_id = survivor.concept_id;
    merged.term = text::tidy_term(survivor.term);
    merged.type = survivor.type;
    merged.definition = survivor.definition;
    for (std::size_t idx : members) {
      const L1Concept& c = raw[idx];
      if (c.definition.size() > merged.definition.size()) merged.definition = c.definition;
      sorted_union(merged.parent_statement_ids, c.parent_statement_ids);
      sorted_union(merged.cids, c.cids);
    }
    out.push_back(std::move(merged));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const L1Concept& a, const L1Concept& b) { return a.concept_id < b.concept_id; });
  return out;
}

ConnectivityStats connectivity_stats(const KnowledgeStructure& k) {
  ConnectivityStats stats;
  stats.chains = k.chains().size();
  stats.statements = k.statements().size();
  stats.concepts = k.concepts().size();
  stats.nodes = k.node_count();
  if (stats.nodes == 0) return stats;

  // Node numbering: chains, then statements, then concepts, each in record order.
  std::unordered_map<std::string, std::size_t> chain_node;
  std::unordered_map<std::string, std::size_t> statement_node;
  for (std::size_t i = 0; i < k.chains().size(); ++i) chain_node.try_emplace(k.chains()[i].chain_id, i);
  const std::size_t statement_base = k.chains().size();
  for (std::size_t i = 0; i < k.statements().size(); ++i)
    statement_node.try_emplace(k.statements()[i].statement_id, statement_base + i);
  const std::size_t concept_base = statement_base + k.statements().size();

  DisjointSets sets(stats.nodes);
  for (std::size_t i = 0; i < k.statements().size(); ++i) {
    const auto& s = k.statements()[i];
    auto it = chain_node.find(s.parent_chain_id);
    if (it == chain_node.end())
      throw DanglingReference("statement " + s.statement_id + " references missing chain " + s.parent_chain_id);
    sets.unite(statement_base + i, it->second);
  }
  for (std::size_t i = 0; i < k.concepts().size(); ++i) {
    const auto& c = k.concepts()[i];
    for (const auto& sid : c.parent_statement_ids) {
      auto it = statement_node.find(sid);
      if (it == statement_node.end())
        throw DanglingReference("concept " + c.concept_id + " references missing statement " + sid);
      sets.unite(concept_base + i, it->second);
    }
  }

  std::unordered_map<std::size_t, std::size_t> sizes;
  for (std::size_t i = 0; i < stats.nodes; ++i) ++sizes[sets.find(i)];
  stats.components = sizes.size();
  for (const auto& [root, n] : sizes) stats.largest_component = std::max(stats.largest_component, n);
  stats.lcc_ratio = static_cast<double>(stats.largest_component) / static_cast<double>(stats.nodes);
  return stats;
}

// ---------------------------------------------------------------------------

ordered_json to_json(const L3Chain& c) {
  return ordered_json{{"chain_id", c.chain_id},
                      {"domain_context", c.domain_context},
                      {"process_name", c.process_name},
                      {"narrative_summary", c.narrative_summary},
                      {"preconditions", c.preconditions},
                      {"negative_constraints", c.negative_constraints},
                      {"steps", c.steps},
                      {"CID", c.cid},
                      {"source_chunk_id", c.source_chunk_id}};
}

ordered_json to_json(const L2Statement& s) {
  return ordered_json{{"statement_id", s.statement_id}, {"parent_chain_id", s.parent_chain_id},
                      {"subject", s.subject},           {"predicate", s.predicate},
                      {"object", s.object},             {"source_quote", s.source_quote}};
}

ordered_json to_json(const L1Concept& c) {
  return ordered_json{{"concept_id", c.concept_id},
                      {"term", c.term},
                      {"type", c.type},
                      {"definition", c.definition},
                      {"parent_statement_ids", c.parent_statement_ids},
                      {"CID", c.cids}};
}

L3Chain chain_from_json(const json& j) {
  if (!j.is_object()) throw SchemaInvalid("chain record is not an object");
  L3Chain c;
  c.chain_id = optional_string(j, "chain_id");
  c.domain_context = optional_string(j, "domain_context");
  c.process_name = require_string(j, "process_name");
  c.narrative_summary = optional_string(j, "narrative_summary");
  c.preconditions = string_list(j, "preconditions", false);
  c.negative_constraints = string_list(j, "negative_constraints", false);
  c.steps = string_list(j, "steps", true);
  c.cid = strip_cid_prefix(optional_string(j, "CID"));
  c.source_chunk_id = optional_string(j, "source_chunk_id");
  return c;
}

L2Statement statement_from_json(const json& j) {
  if (!j.is_object()) throw SchemaInvalid("statement record is not an object");
  L2Statement s;
  s.statement_id = optional_string(j, "statement_id");
  s.parent_chain_id = optional_string(j, "parent_chain_id");
  s.subject = require_string(j, "subject");
  s.predicate = require_string(j, "predicate");
  s.object = require_string(j, "object");
  s.source_quote = optional_string(j, "source_quote");
  if (text::trim(s.subject).empty() || text::trim(s.predicate).empty() || text::trim(s.object).empty())
    throw SchemaInvalid("statement " + s.statement_id + " has an empty subject, predicate or object");
  return s;
}

L1Concept concept_from_json(const json& j) {
  if (!j.is_object()) throw SchemaInvalid("concept record is not an object");
  L1Concept c;
  c.concept_id = optional_string(j, "concept_id");
  c.term = require_string(j, "term");
  c.type = optional_string(j, "type");
  c.definition = optional_string(j, "definition");
  c.parent_statement_ids = string_list(j, "parent_statement_ids", false);
  if (j.contains("CID") && j.at("CID").is_string()) {
    c.cids.push_back(strip_cid_prefix(j.at("CID").get<std::string>()));
  } else {
    for (auto& cid : string_list(j, "CID", false)) c.cids.push_back(strip_cid_prefix(std::move(cid)));
  }
  return c;
}

void save_knowledge(const std::filesystem::path& dir, const KnowledgeStructure& k) {
  std::filesystem::create_directories(dir);
  std::vector<ordered_json> rows;
  for (const auto& c : k.chains()) rows.push_back(to_json(c));
  write_jsonl(dir / "chains.jsonl", rows);
  rows.clear();
  for (const auto& s : k.statements()) rows.push_back(to_json(s));
  write_jsonl(dir / "statements.jsonl", rows);
  rows.clear();
  for (const auto& c : k.concepts()) rows.push_back(to_json(c));
  write_jsonl(dir / "concepts.jsonl", rows);
}

KnowledgeStructure load_knowledge(const std::filesystem::path& dir) {
  std::vector<L3Chain> chains;
  std::vector<L2Statement> statements;
  std::vector<L1Concept> concepts;
  for (const auto& j : read_jsonl(dir / "chains.jsonl")) chains.push_back(chain_from_json(j));
  for (const auto& j : read_jsonl(dir / "statements.jsonl")) statements.push_back(statement_from_json(j));
  for (const auto& j : read_jsonl(dir / "concepts.jsonl")) concepts.push_back(concept_from_json(j));
  return {std::move(chains), std::move(statements), std::move(concepts)};
}

}  // namespace dataloop
