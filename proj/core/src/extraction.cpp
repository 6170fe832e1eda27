#include "dataloop/extraction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <unordered_set>

#include <fmt/format.h>

#include "dataloop/hashing.hpp"
#include "dataloop/json_payload.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/text.hpp"

namespace dataloop {
namespace {

const char* const kChainPreamble =
    "You turn passages of technical writing into structured reasoning chains. Reply with JSON only.";

const char* const kChainTask =
    "Read the passage and identify its single most important multi-step line of reasoning: a mechanism,\n"
    "derivation, or process in which each step depends on the one before. Return it as one chain.\n"
    "- domain_context: the field the chain belongs to.\n"
    "- process_name: a short title for the process.\n"
    "- narrative_summary: three to five sentences tracing the chain from start to finish.\n"
    "- preconditions: conditions that must hold for the chain to apply.\n"
    "- negative_constraints: cases where it does not apply or common misreadings.\n"
    "- steps: the ordered steps, each a self-contained sentence grounded in the passage.";

const char* const kChainOutput =
    R"([{"chain_id": "...", "domain_context": "...", "process_name": "...", "narrative_summary": "...", )"
    R"("preconditions": ["..."], "negative_constraints": ["..."], "steps": ["...", "..."]}])";

const char* const kDecomposePreamble =
    "You break reasoning chains into atomic subject-predicate-object statements. Reply with a JSON array only.";

const char* const kDecomposeTask =
    "For each pair of consecutive steps in the chain (step i and step i+1), write one statement linking them.\n"
    "- subject and object: concrete noun phrases naming what each step is about; replace pronouns and vague\n"
    "  references with the specific thing they point to.\n"
    "- predicate: a short verb phrase for the relation.\n"
    "- source_quote: a verbatim sentence from the passage supporting the link.\n"
    "Never connect steps that are not adjacent. If the passage does not support a link, leave it out.";

const char* const kDecomposeOutput =
    R"([{"statement_id": "...", "parent_chain_id": "...", "subject": "...", "predicate": "...", )"
    R"("object": "...", "source_quote": "..."}])";

const char* const kHarvestPreamble =
    "You collect the key concepts named in a set of statements. Reply with a JSON array only.";

const char* const kHarvestTask =
    "Go through the subject and object of every statement and list the distinct domain concepts they name.\n"
    "Merge spellings of the same concept into one entry under its standard name.\n"
    "- term: the canonical name.\n"
    "- type: a category such as Process, Protein, Law, Quantity or Method.\n"
    "- definition: one or two sentences, consistent with how the statements use the term.\n"
    "- parent_statement_ids: ids of every statement whose subject or object names the concept.";

const char* const kHarvestOutput =
    R"([{"concept_id": "...", "term": "...", "type": "...", "definition": "...", )"
    R"("parent_statement_ids": ["..."], "CID": ["..."]}])";

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::string chain_number(const std::string& chain_id) {
  return chain_id.rfind("chain-", 0) == 0 ? chain_id.substr(6) : chain_id;
}

void warn(std::vector<std::string>* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

json first_record(const json& payload, const char* what) {
  if (payload.is_object()) return payload;
  if (payload.is_array() && !payload.empty() && payload.front().is_object()) return payload.front();
  throw SchemaInvalid(std::string(what) + " response holds no record");
}

}  // namespace

ValidationFailed::ValidationFailed(std::vector<Violation> report)
    : Error("knowledge structure failed validation with " + std::to_string(report.size()) + " violation(s)" +
            (report.empty() ? std::string()
                            : ": first is " + std::string(to_string(report.front().kind)) + " on " +
                                  report.front().offending_id)),
      report_(std::move(report)) {}

void ExtractionConfig::validate() const {
  if (min_steps < 2) throw ConfigError("min_steps must be at least 2");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in (0, 1]");
  if (!(balance_max_share > 0.0 && balance_max_share <= 1.0)) throw ConfigError("balance_max_share must be in (0, 1]");
  if (!(balance_top3_share > 0.0 && balance_top3_share <= 1.0))
    throw ConfigError("balance_top3_share must be in (0, 1]");
}

std::string chain_id_for_chunk(const std::string& chunk_id) {
  if (all_digits(chunk_id)) return "chain-" + chunk_id;
  return "chain-" + sha256_hex(chunk_id).substr(0, 8);
}

L3Chain extract_chain(const Chunk& chunk, LlmBackend& backend, const ExtractionConfig& cfg,
                      std::vector<std::string>* warnings) {
  const ordered_json input{{"chunk_id", chunk.chunk_id}, {"cid", chunk.cid}, {"text", chunk.text}};
  PromptBuilder prompt;
  prompt.section("TASK", kChainTask).section("CHUNK", input.dump()).section("OUTPUT", kChainOutput);
  const auto raw = backend.complete(make_request(tags::kChain, kChainPreamble, prompt.str()));

  L3Chain chain = chain_from_json(first_record(extract_json_payload(raw), "chain"));
  chain.chain_id = chain_id_for_chunk(chunk.chunk_id);
  chain.cid = chunk.cid;
  chain.source_chunk_id = chunk.chunk_id;
  for (const auto& step : chain.steps)
    if (text::trim(step).empty()) throw SchemaInvalid("chain for chunk " + chunk.chunk_id + " has an empty step");

  const int steps = static_cast<int>(chain.steps.size());
  if (steps < cfg.min_steps)
    throw TooFewSteps(fmt::format("chain for chunk {} has {} steps; at least {} required", chunk.chunk_id, steps,
                                  cfg.min_steps));
  if (steps < cfg.step_warn_low || steps > cfg.step_warn_high)
    warn(warnings, fmt::format("{}: {} steps is outside the usual {}-{} range", chain.chain_id, steps,
                               cfg.step_warn_low, cfg.step_warn_high));
  return chain;
}

int locate_step(const std::string& phrase, const std::vector<std::string>& steps) {
  const auto phrase_tokens = text::content_tokens(phrase);
  const std::set<std::string> wanted(phrase_tokens.begin(), phrase_tokens.end());
  if (wanted.empty()) return -1;

  double best = -1.0;
  double runner_up = -1.0;
  int best_index = -1;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto step_tokens = text::content_tokens(steps[i]);
    const std::set<std::string> have(step_tokens.begin(), step_tokens.end());
    std::size_t hits = 0;
    for (const auto& t : wanted) hits += have.count(t);
    const double score = static_cast<double>(hits) / static_cast<double>(wanted.size());
    if (score > best) {
      runner_up = best;
      best = score;
      best_index = static_cast<int>(i);
    } else if (score > runner_up) {
      runner_up = score;
    }
  }
  if (best < 0.6 || best <= runner_up) return -1;
  return best_index;
}

std::vector<L2Statement> decompose_chain(const L3Chain& chain, const Chunk& chunk, LlmBackend& backend,
                                         const ExtractionConfig& cfg, std::vector<std::string>* warnings) {
  if (chain.steps.size() < 2) throw TooFewSteps(chain.chain_id + " has fewer than 2 steps");
  const std::size_t limit = chain.steps.size() - 1;

  ordered_json chain_view = to_json(chain);
  chain_view.erase("source_chunk_id");
  PromptBuilder prompt;
  prompt.section("TASK", kDecomposeTask)
      .section("CHAIN", chain_view.dump())
      .section("TEXT", chunk.text)
      .section("OUTPUT", kDecomposeOutput);
  const auto payload = extract_json_payload(backend.complete(make_request(tags::kDecompose, kDecomposePreamble, prompt.str())));
  if (!payload.is_array()) throw SchemaInvalid("decomposition of " + chain.chain_id + " is not an array");

  std::vector<L2Statement> statements;
  for (const auto& record : payload) statements.push_back(statement_from_json(record));

  if (statements.size() > limit) {
    warn(warnings, fmt::format("{}: {} statements for {} steps; keeping the first {}", chain.chain_id,
                               statements.size(), chain.steps.size(), limit));
    statements.resize(limit);
  }
  const auto floor = static_cast<std::size_t>(std::ceil(cfg.alpha * static_cast<double>(limit) - 1e-9));
  if (statements.size() < floor)
    warn(warnings, fmt::format("{}: only {} statements, below the floor of {}", chain.chain_id, statements.size(), floor));

  const std::string number = chain_number(chain.chain_id);
  std::unordered_set<std::string> seen;
  bool keep_ids = true;
  for (const auto& s : statements) {
    if (s.statement_id.rfind("stmt-", 0) != 0 || s.statement_id.find(number) == std::string::npos ||
        !seen.insert(s.statement_id).second) {
      keep_ids = false;
      break;
    }
  }
  for (std::size_t i = 0; i < statements.size(); ++i) {
    auto& s = statements[i];
    if (!keep_ids) s.statement_id = fmt::format("stmt-{}-{:03d}", chain.chain_id, i);
    if (!s.parent_chain_id.empty() && s.parent_chain_id != chain.chain_id)
      warn(warnings, fmt::format("{}: parent_chain_id '{}' replaced", s.statement_id, s.parent_chain_id));
    s.parent_chain_id = chain.chain_id;
    s.subject = text::trim(s.subject);
    s.predicate = text::trim(s.predicate);
    s.object = text::trim(s.object);

    if (cfg.enforce_adjacency) {
      const int from = locate_step(s.subject, chain.steps);
      const int to = locate_step(s.object, chain.steps);
      if (from >= 0 && to >= 0 && std::abs(from - to) >= 2)
        throw AdjacencyViolation(fmt::format("{} links step {} to step {}, which are not adjacent", s.statement_id,
                                             from + 1, to + 1));
    }
  }
  return statements;
}

std::vector<BalanceViolation> check_balance(const std::vector<L2Statement>& statements,
                                            const std::vector<L3Chain>& chains, const ExtractionConfig& cfg) {
  std::vector<BalanceViolation> out;
  if (chains.size() < 5 || statements.empty()) return out;

  std::map<std::string, std::size_t> counts;
  for (const auto& c : chains) counts.try_emplace(c.chain_id, 0);
  for (const auto& s : statements) ++counts[s.parent_chain_id];
  const double total = static_cast<double>(statements.size());

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  for (const auto& [id, n] : ranked) {
    const double share = static_cast<double>(n) / total;
    if (share > cfg.balance_max_share) out.push_back({BalanceViolation::Kind::SingleChain, {id}, share});
  }
  std::size_t top = 0;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) {
    top += ranked[i].second;
    ids.push_back(ranked[i].first);
  }
  const double top_share = static_cast<double>(top) / total;
  if (top_share > cfg.balance_top3_share) out.push_back({BalanceViolation::Kind::TopThree, ids, top_share});
  return out;
}

HarvestResult harvest_concepts(const std::vector<L2Statement>& statements, const std::vector<L3Chain>& chains,
                               LlmBackend& backend, std::set<std::string>* taken) {
  if (statements.empty()) throw ConfigError("harvest_concepts needs at least one statement");

  std::map<std::string, std::string> chain_cid;
  for (const auto& c : chains) chain_cid[c.chain_id] = c.cid;
  std::map<std::string, const L2Statement*> by_id;
  std::vector<ordered_json> input;
  for (const auto& s : statements) {
    by_id[s.statement_id] = &s;
    input.push_back(ordered_json{{"statement_id", s.statement_id},
                                 {"subject", s.subject},
                                 {"predicate", s.predicate},
                                 {"object", s.object}});
  }

  PromptBuilder prompt;
  prompt.section("TASK", kHarvestTask)
      .section("STATEMENTS", ordered_json(input).dump())
      .section("OUTPUT", kHarvestOutput);
  const auto payload = extract_json_payload(backend.complete(make_request(tags::kHarvest, kHarvestPreamble, prompt.str())));
  if (!payload.is_array()) throw SchemaInvalid("concept harvest response is not an array");

  HarvestResult result;
  std::set<std::string> local_taken;
  std::set<std::string>& used = taken != nullptr ? *taken : local_taken;
  std::set<std::string> covered;

  for (const auto& record : payload) {
    L1Concept c = concept_from_json(record);
    c.term = text::tidy_term(c.term);
    if (c.term.empty()) throw SchemaInvalid("concept with an empty term");

    std::vector<std::string> parents;
    for (const auto& sid : c.parent_statement_ids) {
      if (by_id.count(sid) != 0) parents.push_back(sid);
      else result.warnings.push_back(fmt::format("concept '{}' cites unknown statement {}", c.term, sid));
    }
    if (parents.empty()) throw DanglingParent("concept '" + c.term + "' has no parent statement from this batch");

    const std::string key = text::normalize_term(c.term);
    for (const auto& s : statements)
      if (text::normalize_term(s.subject) == key || text::normalize_term(s.object) == key)
        parents.push_back(s.statement_id);
    std::sort(parents.begin(), parents.end());
    parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
    c.parent_statement_ids = parents;

    std::set<std::string> cids;
    for (const auto& sid : parents) {
      auto it = chain_cid.find(by_id[sid]->parent_chain_id);
      if (it != chain_cid.end() && !it->second.empty()) cids.insert(it->second);
    }
    c.cids.assign(cids.begin(), cids.end());

    if (c.concept_id.rfind("concept-", 0) != 0 || used.count(c.concept_id) != 0) {
      const std::string material = text::join(c.cids, ",") + "|" + key + "|" + parents.front();
      c.concept_id = "concept-" + sha256_hex(material).substr(0, 10);
    }
    if (!used.insert(c.concept_id).second)
      throw SchemaInvalid("duplicate concept '" + c.term + "' in one harvest response");

    covered.insert(parents.begin(), parents.end());
    result.concepts.push_back(std::move(c));
  }

  for (const auto& s : statements)
    if (covered.count(s.statement_id) == 0) result.uncovered_statement_ids.push_back(s.statement_id);
  for (const auto& sid : result.uncovered_statement_ids)
    result.warnings.push_back("statement " + sid + " has no harvested concept");
  return result;
}

ExtractionResult run_extraction(std::vector<Chunk> chunks, LlmBackend& backend, const ExtractionConfig& cfg) {
  cfg.validate();
  std::stable_sort(chunks.begin(), chunks.end(), [](const Chunk& a, const Chunk& b) { return a.chunk_id < b.chunk_id; });

  ExtractionResult result;
  std::vector<L3Chain> chains;
  std::vector<L2Statement> statements;
  std::vector<L1Concept> raw_concepts;
  std::set<std::string> chain_ids;
  std::set<std::string> statement_ids;
  std::set<std::string> concept_ids;

  using clock = std::chrono::steady_clock;
  for (const auto& chunk : chunks) {
    const auto start = clock::now();
    ChunkLogEntry entry{chunk.chunk_id, "ok", "", 0.0};
    try {
      std::vector<std::string> warnings;
      L3Chain chain = extract_chain(chunk, backend, cfg, &warnings);
      if (!chain_ids.insert(chain.chain_id).second) throw SchemaInvalid("chain id " + chain.chain_id + " already used");
      auto chain_statements = decompose_chain(chain, chunk, backend, cfg, &warnings);
      for (const auto& s : chain_statements)
        if (statement_ids.count(s.statement_id) != 0) throw SchemaInvalid("statement id " + s.statement_id + " already used");

      std::vector<L1Concept> chain_concepts;
      if (!chain_statements.empty()) {
        try {
          std::set<std::string> trial = concept_ids;
          auto harvest = harvest_concepts(chain_statements, {chain}, backend, &trial);
          concept_ids = std::move(trial);
          chain_concepts = std::move(harvest.concepts);
          for (auto& w : harvest.warnings) warnings.push_back(chain.chain_id + ": " + w);
        } catch (const Error& e) {
          entry.status = "harvest_failed";
          entry.detail = e.what();
          warnings.push_back(chain.chain_id + ": concept harvest failed: " + e.what());
        }
      }

      for (const auto& s : chain_statements) statement_ids.insert(s.statement_id);
      chains.push_back(std::move(chain));
      statements.insert(statements.end(), chain_statements.begin(), chain_statements.end());
      raw_concepts.insert(raw_concepts.end(), chain_concepts.begin(), chain_concepts.end());
      result.warnings.insert(result.warnings.end(), warnings.begin(), warnings.end());
    } catch (const Error& e) {
      entry.status = "quarantined";
      entry.detail = e.what();
      result.warnings.push_back("chunk " + chunk.chunk_id + " quarantined: " + e.what());
    }
    entry.millis = std::chrono::duration<double, std::milli>(clock::now() - start).count();
    result.log.push_back(std::move(entry));
  }

  result.balance = check_balance(statements, chains, cfg);
  result.structure = KnowledgeStructure(std::move(chains), std::move(statements), canonicalize_concepts(raw_concepts));
  auto report = validate(result.structure);
  if (!report.empty()) throw ValidationFailed(std::move(report));
  return result;
}

}  // namespace dataloop
