#include "dataloop/benchmark.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "dataloop/json_payload.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/rng.hpp"
#include "dataloop/text.hpp"

namespace dataloop {
namespace {

const std::vector<std::string> kLetters = {"A", "B", "C", "D"};

const char* const kItemPreamble =
    "You write demanding multiple-choice exam questions about scientific processes. Reply with JSON only.";

const char* const kItemTask =
    "Write one question that tests understanding of the reasoning chain below, not recall of its wording.\n"
    "- Give exactly four options labelled A, B, C and D, each a complete statement of 20 to 60 words.\n"
    "- Exactly CORRECT_COUNT options must be correct; list their letters in answer, comma separated.\n"
    "- Build the wrong options from the distractor material: a step with a neighbouring concept swapped\n"
    "  in, a relation turned into its opposite, or a chain that stops before its conclusion. Phrase them\n"
    "  so they are plausible to someone who only half understands the chain.\n"
    "- The explanation should walk through the relevant steps and say why each wrong option fails.\n"
    "- Write in the language of the chain.";

const char* const kItemOutput =
    R"({"question": "...", "options": {"A": "...", "B": "...", "C": "...", "D": "..."}, )"
    R"("answer": "A,C", "explanation": "..."})";

std::string lower_key(const std::string& s) { return text::to_lower(text::collapse_whitespace(s)); }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Third-person singular verb -> base form.
std::string base_form(const std::string& verb) {
  if (verb.size() > 3 && ends_with(verb, "ies")) return verb.substr(0, verb.size() - 3) + "y";
  for (std::string_view suffix : {"sses", "shes", "ches", "xes", "zes", "oes"})
    if (ends_with(verb, suffix)) return verb.substr(0, verb.size() - 2);
  if (verb.size() > 2 && ends_with(verb, "s") && !ends_with(verb, "ss")) return verb.substr(0, verb.size() - 1);
  return verb;
}

std::size_t find_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return std::string::npos;
  return text::to_lower(haystack).find(text::to_lower(needle));
}

std::vector<const L1Concept*> chain_concepts(const L3Chain& chain, const KnowledgeStructure& k) {
  std::map<std::string, const L1Concept*> by_id;
  for (const L2Statement* s : k.statements_of_chain(chain.chain_id))
    for (const L1Concept* c : k.concepts_of_statement(s->statement_id)) by_id.emplace(c->concept_id, c);
  std::vector<const L1Concept*> out;
  for (const auto& [id, c] : by_id) out.push_back(c);
  return out;
}

ItemMetadata metadata_for(const L3Chain& chain, const KnowledgeStructure& k) {
  ItemMetadata m;
  m.chain_id = chain.chain_id;
  for (const L2Statement* s : k.statements_of_chain(chain.chain_id)) m.l2_ids.push_back(s->statement_id);
  std::sort(m.l2_ids.begin(), m.l2_ids.end());
  for (const L1Concept* c : chain_concepts(chain, k)) m.l1_ids.push_back(c->concept_id);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string BenchmarkItem::answer_text() const { return text::join(answer, ","); }

void BenchmarkItem::validate() const {
  if (item_id.empty()) throw SchemaInvalid("benchmark item without item_id");
  if (question.empty()) throw SchemaInvalid("item " + item_id + " has no question");
  if (options.size() != 4) throw OptionCountWrong("item " + item_id + " needs exactly 4 options");
  for (const auto& letter : kLetters)
    if (options.count(letter) == 0) throw OptionCountWrong("item " + item_id + " lacks option " + letter);
  if (answer.empty()) throw SchemaInvalid("item " + item_id + " has an empty answer");
  for (const auto& a : answer)
    if (options.count(a) == 0) throw AnswerNotInOptions("item " + item_id + ": answer " + a + " is not an option");
  if (metadata.chain_id.empty()) throw SchemaInvalid("item " + item_id + " has no source chain");
}

std::vector<std::string> split_answer_letters(const std::string& answer) {
  std::set<std::string> letters;
  for (char c : answer) {
    if (c >= 'A' && c <= 'Z') letters.insert(std::string(1, c));
    else if (c >= 'a' && c <= 'z') letters.insert(std::string(1, static_cast<char>(c - 'a' + 'A')));
  }
  return {letters.begin(), letters.end()};
}

ordered_json to_json(const BenchmarkItem& item) {
  ordered_json options = ordered_json::object();
  for (const auto& [letter, text] : item.options) options[letter] = text;
  return ordered_json{{"item_id", item.item_id},
                      {"question", item.question},
                      {"options", options},
                      {"answer", item.answer_text()},
                      {"explanation", item.explanation},
                      {"question_type", to_string(item.question_type())},
                      {"metadata",
                       ordered_json{{"chain_id", item.metadata.chain_id},
                                    {"l2_ids", item.metadata.l2_ids},
                                    {"l1_ids", item.metadata.l1_ids}}},
                      {"cid", item.cid}};
}

BenchmarkItem item_from_json(const json& j) {
  if (!j.is_object()) throw SchemaInvalid("benchmark item is not an object");
  BenchmarkItem item;
  item.item_id = require_string(j, "item_id");
  item.question = require_string(j, "question");
  if (!j.contains("options") || !j.at("options").is_object())
    throw OptionCountWrong("item " + item.item_id + " has no option map");
  for (const auto& [letter, text] : j.at("options").items()) {
    if (!text.is_string()) throw SchemaInvalid("item " + item.item_id + ": option " + letter + " is not text");
    item.options[letter] = text.get<std::string>();
  }
  item.answer = split_answer_letters(require_string(j, "answer"));
  item.explanation = optional_string(j, "explanation");
  if (!j.contains("metadata") || !j.at("metadata").is_object())
    throw SchemaInvalid("item " + item.item_id + " has no metadata");
  const json& m = j.at("metadata");
  item.metadata.chain_id = require_string(m, "chain_id");
  item.metadata.l2_ids = string_list(m, "l2_ids", false);
  item.metadata.l1_ids = string_list(m, "l1_ids", false);
  item.cid = require_string(j, "cid");
  item.validate();
  return item;
}

std::vector<BenchmarkItem> load_benchmark(const std::filesystem::path& path) {
  std::vector<BenchmarkItem> out;
  for (const auto& j : read_jsonl(path)) out.push_back(item_from_json(j));
  return out;
}

void save_benchmark(const std::filesystem::path& path, const std::vector<BenchmarkItem>& items) {
  std::vector<ordered_json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.push_back(to_json(item));
  write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------

std::string_view to_string(PerturbationOp op) {
  switch (op) {
    case PerturbationOp::SubstAdjacent: return "subst_adjacent";
    case PerturbationOp::InvertRelation: return "invert_relation";
    case PerturbationOp::Truncate: return "truncate";
  }
  return "unknown";
}

InverseLexicon InverseLexicon::defaults() {
  InverseLexicon lex;
  const std::pair<const char*, const char*> pairs[] = {
      {"promotes", "inhibits"},     {"increases", "decreases"},   {"raises", "lowers"},
      {"activates", "deactivates"}, {"enables", "prevents"},      {"strengthens", "weakens"},
      {"accelerates", "slows"},     {"expands", "contracts"},     {"attracts", "repels"},
      {"absorbs", "releases"},      {"gains", "loses"},           {"upregulates", "downregulates"},
      {"stabilizes", "destabilizes"}, {"amplifies", "attenuates"}, {"opens", "closes"},
  };
  for (const auto& [a, b] : pairs) lex.add_pair(a, b);
  return lex;
}

InverseLexicon InverseLexicon::load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read inverse lexicon " + path.string());
  InverseLexicon lex;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (text::trim(line).empty()) continue;
    const auto parts = text::split(line, '\t');
    if (parts.size() != 2 || text::trim(parts[0]).empty() || text::trim(parts[1]).empty())
      throw SchemaInvalid(fmt::format("{}:{}: expected two tab-separated predicates", path.string(), number));
    lex.add_pair(text::trim(parts[0]), text::trim(parts[1]));
  }
  return lex;
}

void InverseLexicon::add_pair(const std::string& a, const std::string& b) {
  map_[lower_key(a)] = lower_key(b);
  map_[lower_key(b)] = lower_key(a);
}

const std::string* InverseLexicon::find(const std::string& predicate) const {
  auto it = map_.find(lower_key(predicate));
  return it == map_.end() ? nullptr : &it->second;
}

std::string negate_predicate(const std::string& predicate) {
  const std::string p = text::collapse_whitespace(predicate);
  if (p.empty()) return "does not";
  const auto space = p.find(' ');
  const std::string first = p.substr(0, space);
  const std::string rest = space == std::string::npos ? std::string() : p.substr(space);
  const std::string head = text::to_lower(first);

  static const std::set<std::string> auxiliaries = {"is",    "are",    "was",  "were", "can", "could",
                                                    "will",  "would",  "shall", "should", "must", "may",
                                                    "might", "cannot"};
  if (auxiliaries.count(head) != 0) return first + " not" + rest;
  if (head == "has") return "does not have" + rest;
  if (head == "have") return "do not have" + rest;
  if (head == "does" || head == "do") return first + " not" + rest;
  return "does not " + base_form(first) + rest;
}

const L1Concept& anchor_concept(const L3Chain& chain, std::size_t step_index, const KnowledgeStructure& k) {
  if (step_index >= chain.steps.size())
    throw IndexOutOfRange(fmt::format("step {} outside chain {} of {} steps", step_index, chain.chain_id,
                                      chain.steps.size()));
  const auto concepts = chain_concepts(chain, k);
  const std::string step = text::to_lower(chain.steps[step_index]);

  const L1Concept* best = nullptr;
  for (const L1Concept* c : concepts) {
    const std::string term = text::normalize_term(c->term);
    if (term.empty() || step.find(term) == std::string::npos) continue;
    if (best == nullptr || term.size() > text::normalize_term(best->term).size()) best = c;
  }
  if (best != nullptr) return *best;

  const auto statements = k.statements_of_chain(chain.chain_id);
  if (!statements.empty()) {
    const bool last = step_index + 1 == chain.steps.size() && step_index >= statements.size();
    const L2Statement* s = statements[std::min(step_index, statements.size() - 1)];
    const std::string endpoint = text::normalize_term(last ? s->object : s->subject);
    const auto linked = k.concepts_of_statement(s->statement_id);
    for (const L1Concept* c : linked)
      if (text::normalize_term(c->term) == endpoint) return *c;
    if (!linked.empty()) return *linked.front();
  }
  throw EmptyNeighborhood(fmt::format("step {} of {} has no anchor concept", step_index + 1, chain.chain_id));
}

PerturbedChain perturb_substitute(const L3Chain& chain, std::size_t step_index, const KnowledgeStructure& k,
                                  std::uint64_t seed) {
  const L1Concept& anchor = anchor_concept(chain, step_index, k);
  const auto neighbors = neighbor_set(k, anchor.concept_id);
  if (neighbors.empty()) throw EmptyNeighborhood("concept " + anchor.concept_id + " has no neighbors");

  SeededRng rng(seed);
  const L1Concept* substitute = k.find_concept(neighbors[rng.index(neighbors.size())]);

  PerturbedChain out;
  out.base_chain_id = chain.chain_id;
  out.op = PerturbationOp::SubstAdjacent;
  out.steps = chain.steps;
  std::string& step = out.steps[step_index];
  if (const auto pos = find_ci(step, anchor.term); pos != std::string::npos) {
    step.replace(pos, anchor.term.size(), substitute->term);
  } else {
    step = substitute->term + " (in place of " + anchor.term + "): " + step;
  }
  out.detail = ordered_json{{"step_index", step_index},
                            {"original_concept_id", anchor.concept_id},
                            {"original", anchor.term},
                            {"substitute_concept_id", substitute->concept_id},
                            {"substitute", substitute->term}};
  return out;
}

L2Statement perturb_invert(const L2Statement& statement, const InverseLexicon& lexicon) {
  L2Statement out = statement;
  if (const std::string* inverse = lexicon.find(statement.predicate)) out.predicate = *inverse;
  else out.predicate = negate_predicate(statement.predicate);
  out.statement_id = statement.statement_id + "-inv";
  return out;
}

PerturbedChain perturb_truncate(const L3Chain& chain, std::size_t t) {
  if (t < 1 || t >= chain.steps.size())
    throw IndexOutOfRange(fmt::format("truncation point {} must satisfy 1 <= t < {}", t, chain.steps.size()));
  PerturbedChain out;
  out.base_chain_id = chain.chain_id;
  out.op = PerturbationOp::Truncate;
  out.steps.assign(chain.steps.begin(), chain.steps.begin() + static_cast<std::ptrdiff_t>(t));
  out.detail = ordered_json{{"t", t}, {"dropped_steps", chain.steps.size() - t}};
  return out;
}

// ---------------------------------------------------------------------------

BenchmarkItem generate_item(const L3Chain& chain, const KnowledgeStructure& k, LlmBackend& backend,
                            std::uint64_t seed, const BenchmarkConfig& cfg, const InverseLexicon& lexicon) {
  SeededRng rng(derive_seed(seed, "bench:" + chain.chain_id));
  const bool multi = rng.unit() < cfg.multi_select_share;
  const std::size_t correct = multi ? 2 + rng.index(2) : 1;

  std::vector<ordered_json> hints;
  if (!chain.steps.empty()) {
    const std::size_t start = rng.index(chain.steps.size());
    const std::uint64_t pick_seed = rng.next();
    for (std::size_t offset = 0; offset < chain.steps.size(); ++offset) {
      try {
        const auto p = perturb_substitute(chain, (start + offset) % chain.steps.size(), k, pick_seed);
        hints.push_back(ordered_json{{"operator", to_string(p.op)}, {"detail", p.detail}, {"steps", p.steps}});
        break;
      } catch (const EmptyNeighborhood&) {
      }
    }
  }
  if (const auto statements = k.statements_of_chain(chain.chain_id); !statements.empty()) {
    const L2Statement* s = statements[rng.index(statements.size())];
    const L2Statement inverted = perturb_invert(*s, lexicon);
    hints.push_back(ordered_json{{"operator", to_string(PerturbationOp::InvertRelation)},
                                 {"original", to_json(*s)},
                                 {"inverted", to_json(inverted)}});
  }
  if (chain.steps.size() >= 2) {
    const auto p = perturb_truncate(chain, chain.steps.size() - 1);
    hints.push_back(ordered_json{{"operator", to_string(p.op)}, {"detail", p.detail}, {"steps", p.steps}});
  }

  ordered_json chain_view = to_json(chain);
  chain_view.erase("source_chunk_id");
  PromptBuilder prompt;
  prompt.section("TASK", kItemTask)
      .section("CORRECT_COUNT", std::to_string(correct))
      .section("CHAIN", chain_view.dump())
      .section("DISTRACTOR_MATERIAL", ordered_json(hints).dump())
      .section("OUTPUT", kItemOutput);
  const auto raw = backend.complete(make_request(tags::kBenchItem, kItemPreamble, prompt.str()));
  json payload = extract_json_payload(raw);
  if (payload.is_array() && payload.size() == 1) payload = payload.front();
  if (!payload.is_object()) throw SchemaInvalid("item response for " + chain.chain_id + " is not an object");

  BenchmarkItem item;
  item.item_id = "item-" + (chain.chain_id.rfind("chain-", 0) == 0 ? chain.chain_id.substr(6) : chain.chain_id);
  item.question = require_string(payload, "question");
  if (!payload.contains("options")) throw OptionCountWrong("item for " + chain.chain_id + " has no options");
  const json& options = payload.at("options");
  if (options.is_array()) {
    if (options.size() != 4)
      throw OptionCountWrong(fmt::format("item for {} has {} options", chain.chain_id, options.size()));
    for (std::size_t i = 0; i < 4; ++i) {
      if (!options[i].is_string()) throw SchemaInvalid("option text must be a string");
      item.options[kLetters[i]] = options[i].get<std::string>();
    }
  } else if (options.is_object()) {
    if (options.size() != 4)
      throw OptionCountWrong(fmt::format("item for {} has {} options", chain.chain_id, options.size()));
    for (const auto& [letter, value] : options.items()) {
      if (!value.is_string()) throw SchemaInvalid("option text must be a string");
      item.options[text::trim(letter)] = value.get<std::string>();
    }
  } else {
    throw SchemaInvalid("options must be an object or array");
  }

  const json& answer = payload.contains("answer") ? payload.at("answer") : json();
  if (answer.is_string()) {
    item.answer = split_answer_letters(answer.get<std::string>());
  } else if (answer.is_array()) {
    std::string joined;
    for (const auto& a : answer)
      if (a.is_string()) joined += a.get<std::string>() + ",";
    item.answer = split_answer_letters(joined);
  } else {
    throw SchemaInvalid("item for " + chain.chain_id + " has no answer");
  }
  item.explanation = optional_string(payload, "explanation");
  item.metadata = metadata_for(chain, k);
  item.cid = chain.cid;
  item.validate();
  return item;
}

BenchmarkBuild build_benchmark(const KnowledgeStructure& k, LlmBackend& backend, std::uint64_t seed,
                               const BenchmarkConfig& cfg, const InverseLexicon& lexicon) {
  std::vector<const L3Chain*> chains;
  for (const auto& c : k.chains()) chains.push_back(&c);
  std::stable_sort(chains.begin(), chains.end(),
                   [](const L3Chain* a, const L3Chain* b) { return a->chain_id < b->chain_id; });
  BenchmarkBuild build;
  for (const L3Chain* chain : chains) {
    try {
      build.items.push_back(generate_item(*chain, k, backend, seed, cfg, lexicon));
    } catch (const Error& e) {
      build.failures.emplace_back(chain->chain_id, e.what());
    }
  }
  return build;
}

// ---------------------------------------------------------------------------

OrthogonalityReport check_orthogonality(const std::vector<BenchmarkItem>& benchmark,
                                        const std::vector<TrainingSample>& corpus, std::size_t n) {
  if (n < 5) throw ConfigError("orthogonality n-gram length must be at least 5");
  OrthogonalityReport report;

  std::unordered_map<std::string, std::vector<std::size_t>> index;
  for (std::size_t i = 0; i < benchmark.size(); ++i) {
    const auto& item = benchmark[i];
    if (item.metadata.chain_id.empty()) report.structural_issues.push_back("item " + item.item_id + " has no chain_id");
    const auto tokens = text::whitespace_tokens(item.question);
    std::set<std::string> seen;
    for (std::size_t s = 0; s + n <= tokens.size(); ++s) {
      std::string gram = text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(s),
                                                             tokens.begin() + static_cast<std::ptrdiff_t>(s + n)),
                                    " ");
      if (seen.insert(gram).second) index[gram].push_back(i);
    }
  }

  for (const auto& sample : corpus) {
    if (sample.origin == Origin::Initial && sample.l2_ids.empty())
      report.structural_issues.push_back("sample " + sample.sample_id + " has no l2_ids");
    const auto tokens = text::whitespace_tokens(sample.full_text());
    std::set<std::size_t> hit;
    for (std::size_t s = 0; s + n <= tokens.size(); ++s) {
      const std::string gram = text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(s),
                                                                   tokens.begin() + static_cast<std::ptrdiff_t>(s + n)),
                                          " ");
      auto it = index.find(gram);
      if (it == index.end()) continue;
      for (std::size_t item : it->second)
        if (hit.insert(item).second) report.collisions.push_back({sample.sample_id, benchmark[item].item_id, gram});
    }
  }
  return report;
}

}  // namespace dataloop
