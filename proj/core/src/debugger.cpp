#include "dataloop/debugger.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dataloop/apportion.hpp"
#include "dataloop/json_payload.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/rng.hpp"
#include "dataloop/text.hpp"

namespace dataloop {
namespace {

const char* const kJudgePreamble =
    "You review wrong answers given by a model on a science examination and classify the cause. "
    "Reply with one JSON object only.";

const char* const kDiagnoseTask =
    "The model below answered a benchmark item incorrectly. Decide which of two failure kinds explains it:\n"
    "- concept_gap: the model is missing, or mixes up, a piece of domain knowledge the item depends on.\n"
    "- capability_deficit: the pieces are known but the model fails to combine them, skips an inference or\n"
    "  loses track of a multi-step argument.\n"
    "Name the single concept most responsible, explain the mistake in one or two sentences, suggest a\n"
    "remedy, and give your confidence between 0 and 1.";

const char* const kDiagnoseOutput =
    R"({"issue_type": "concept_gap | capability_deficit", "key_concept": "...", "reasoning": "...", )"
    R"("recommendation": "...", "confidence": 0.0})";

const char* const kPatchPreamble =
    "You write remedial training data that fixes a diagnosed weakness of a language model in a scientific "
    "domain. Reply with a JSON array only.";

const char* const kConceptGapTask =
    "The model failed the item in FAILED_ITEM because it misunderstands TARGET_CONCEPT. Write COUNT training\n"
    "samples that repair this:\n"
    "- Build on DEFINITION and FACTS and use their terminology exactly; use every fact at least once.\n"
    "- Set the target against the related concepts in CONTRAST: state what it is and what it is not.\n"
    "- At least two samples should confront the specific wrong answer and show why it fails.\n"
    "- Mix recall of the definition, application of its attributes and comparison with neighbours,\n"
    "  going from simpler to harder.";

const char* const kCapabilityTask =
    "The model failed the item in FAILED_ITEM because it could not carry the argument through, not for lack\n"
    "of facts. Write COUNT training samples that rehearse the reasoning along CHAIN:\n"
    "- Every answer walks through at least three explicit steps (\"Step 1:\", \"Therefore:\"), each one\n"
    "  resting on a fact from FACTS.\n"
    "- Aim at the failure described in DIAGNOSIS, and vary the angle: why/how, what-if, compare, or\n"
    "  troubleshoot.\n"
    "- Paraphrase; do not copy the chain text.";

const char* const kQaFormat =
    "Open-ended question and answer. The answer is a complete explanation of several sentences.";
const char* const kChoiceFormat =
    "Multiple choice with four options A-D, two or more of them correct. The answer field holds the correct\n"
    "letters on its first line, then a blank line, then an explanation covering every option.";
const char* const kTrueFalseFormat =
    "A claim to judge as true or false. options is always {\"A\": \"True\", \"B\": \"False\"}; the answer\n"
    "field holds A or B on its first line, then a blank line, then the justification.";

const char* const kQaOutput = R"([{"question": "...", "answer": "..."}])";
const char* const kChoiceOutput =
    R"([{"question": "...", "options": {"A": "...", "B": "...", "C": "...", "D": "..."}, "answer": "A,C\n\n..."}])";
const char* const kTrueFalseOutput =
    R"([{"question": "...", "options": {"A": "True", "B": "False"}, "answer": "B\n\n..."}])";

std::string attempt_tag(std::string_view base, int attempt) {
  std::string tag(base);
  if (attempt > 1) tag += "#" + std::to_string(attempt);
  return tag;
}

ordered_json statement_view(const L2Statement& s) {
  return ordered_json{{"statement_id", s.statement_id},
                      {"subject", s.subject},
                      {"predicate", s.predicate},
                      {"object", s.object},
                      {"source_quote", s.source_quote}};
}

// Splits "A,B\n\nexplanation" into its first line and the rest.
std::pair<std::string, std::string> split_answer_field(const std::string& answer) {
  const auto nl = answer.find('\n');
  if (nl == std::string::npos) return {text::trim(answer), ""};
  return {text::trim(answer.substr(0, nl)), text::trim(answer.substr(nl + 1))};
}

std::optional<TrainingSample> parse_patch_record(const json& record, SftFormat format) {
  if (!record.is_object()) return std::nullopt;
  if (!record.contains("question") || !record.at("question").is_string()) return std::nullopt;
  if (!record.contains("answer") || !record.at("answer").is_string()) return std::nullopt;
  TrainingSample s;
  s.question = text::trim(record.at("question").get<std::string>());
  const std::string answer = record.at("answer").get<std::string>();
  if (s.question.empty() || text::trim(answer).empty()) return std::nullopt;

  if (format == SftFormat::OpenEnded) {
    s.question_type = QuestionType::OpenEnded;
    s.answer = text::trim(answer);
    return s;
  }

  auto [head, rest] = split_answer_field(answer);
  if (format == SftFormat::TrueFalse) {
    const std::string verdict = text::to_lower(head);
    if (verdict == "a" || verdict == "true") s.answer = "A";
    else if (verdict == "b" || verdict == "false") s.answer = "B";
    else return std::nullopt;
    s.options = std::map<std::string, std::string>{{"A", "True"}, {"B", "False"}};
    s.question_type = QuestionType::TrueFalse;
  } else {
    if (!record.contains("options") || !record.at("options").is_object()) return std::nullopt;
    std::map<std::string, std::string> options;
    for (const auto& [letter, value] : record.at("options").items()) {
      if (!value.is_string()) return std::nullopt;
      options[text::trim(letter)] = value.get<std::string>();
    }
    if (options.size() != 4 || options.count("A") + options.count("B") + options.count("C") + options.count("D") != 4)
      return std::nullopt;
    const std::string letters = parse_multi_choice_answer(head, "ABCD");
    if (letters.empty()) return std::nullopt;
    s.answer = letters;
    s.options = std::move(options);
    s.question_type = letters.size() == 1 ? QuestionType::SingleChoice : QuestionType::MultipleChoice;
  }
  if (!rest.empty()) s.explanation = rest;
  return s;
}

struct FormatSpec {
  SftFormat format;
  const char* description;
  const char* output;
};

const FormatSpec kFormats[] = {{SftFormat::OpenEnded, kQaFormat, kQaOutput},
                               {SftFormat::Choice, kChoiceFormat, kChoiceOutput},
                               {SftFormat::TrueFalse, kTrueFalseFormat, kTrueFalseOutput}};

std::string patch_prompt(const PatchContext& ctx, const FormatSpec& spec, std::int64_t count) {
  ordered_json facts = ordered_json::array();
  for (const auto& s : ctx.statements) facts.push_back(statement_view(s));
  const ordered_json failed{{"question", ctx.error.question},
                            {"true_answer", ctx.error.true_answer},
                            {"predicted_answer", ctx.error.predicted_answer},
                            {"question_type", ctx.error.question_type}};
  const std::string target = ctx.key ? ctx.key->term : ctx.diagnosis.key_concept;
  const std::string n = std::to_string(count);

  PromptBuilder prompt;
  if (ctx.diagnosis.issue_type == IssueType::ConceptGap) {
    std::string task = kConceptGapTask;
    task.replace(task.find("COUNT"), 5, n);
    prompt.section("TASK", task)
        .section("FORMAT", spec.description)
        .section("TARGET_CONCEPT", target)
        .section("DEFINITION", ctx.key ? ctx.key->definition : "")
        .section("FACTS", facts.dump())
        .section("CONTRAST", ordered_json(ctx.neighbor_terms).dump())
        .section("FAILED_ITEM", failed.dump());
  } else {
    std::string task = kCapabilityTask;
    task.replace(task.find("COUNT"), 5, n);
    ordered_json chain = ordered_json::object();
    if (ctx.chain) chain = ordered_json{{"process_name", ctx.chain->process_name}, {"steps", ctx.chain->steps}};
    prompt.section("TASK", task)
        .section("FORMAT", spec.description)
        .section("TARGET_CONCEPT", target)
        .section("CHAIN", chain.dump())
        .section("FACTS", facts.dump())
        .section("DIAGNOSIS", ctx.diagnosis.reasoning + "\n" + ctx.diagnosis.recommendation)
        .section("FAILED_ITEM", failed.dump());
  }
  prompt.section("COUNT", n).section("OUTPUT", spec.output);
  return prompt.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Diagnosis

std::string_view to_string(IssueType t) {
  return t == IssueType::ConceptGap ? "concept_gap" : "capability_deficit";
}

IssueType parse_issue_type(std::string_view s) {
  const std::string v = text::to_lower(text::trim(s));
  if (v == "concept_gap") return IssueType::ConceptGap;
  if (v == "capability_deficit") return IssueType::CapabilityDeficit;
  throw SchemaInvalid("unknown issue_type '" + std::string(s) + "'");
}

void Diagnosis::validate() const {
  if (text::trim(key_concept).empty()) throw SchemaInvalid("diagnosis for " + item_id + " has no key_concept");
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw SchemaInvalid(fmt::format("diagnosis for {} has confidence {} outside [0, 1]", item_id, confidence));
}

ordered_json to_json(const Diagnosis& d) {
  return ordered_json{{"item_id", d.item_id},
                      {"issue_type", to_string(d.issue_type)},
                      {"key_concept", d.key_concept},
                      {"reasoning", d.reasoning},
                      {"recommendation", d.recommendation},
                      {"confidence", d.confidence}};
}

Diagnosis diagnosis_from_json(const json& j, const std::string& item_id) {
  if (!j.is_object()) throw SchemaInvalid("diagnosis must be a JSON object");
  Diagnosis d;
  d.item_id = optional_string(j, "item_id", item_id);
  d.issue_type = parse_issue_type(require_string(j, "issue_type"));
  d.key_concept = text::trim(require_string(j, "key_concept"));
  d.reasoning = optional_string(j, "reasoning");
  d.recommendation = optional_string(j, "recommendation");
  if (!j.contains("confidence") || !j.at("confidence").is_number())
    throw SchemaInvalid("diagnosis for " + d.item_id + " needs a numeric confidence");
  d.confidence = j.at("confidence").get<double>();
  d.validate();
  return d;
}

std::vector<Diagnosis> load_diagnoses(const std::filesystem::path& path) {
  std::vector<Diagnosis> out;
  for (const auto& j : read_jsonl(path)) out.push_back(diagnosis_from_json(j));
  return out;
}

void save_diagnoses(const std::filesystem::path& path, const std::vector<Diagnosis>& diagnoses) {
  std::vector<ordered_json> records;
  for (const auto& d : diagnoses) records.push_back(to_json(d));
  write_jsonl(path, records);
}

Diagnosis diagnose(const ErrorSample& error, LlmBackend& backend, int attempts) {
  if (attempts < 1) throw ConfigError("diagnose needs at least one attempt");
  const ordered_json item{{"item_id", error.item_id},
                          {"question", error.question},
                          {"true_answer", error.true_answer},
                          {"predicted_answer", error.predicted_answer},
                          {"question_type", error.question_type},
                          {"subject", error.cid},
                          {"chain_id", error.metadata.chain_id}};
  PromptBuilder prompt;
  prompt.section("TASK", kDiagnoseTask).section("ITEM", item.dump()).section("OUTPUT", kDiagnoseOutput);
  const std::string user_text = prompt.str();

  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const auto request =
        make_request(attempt_tag(tags::kDiagnose, attempt), kJudgePreamble, user_text, DecodeParams{0.0, 512, true});
    try {
      return diagnosis_from_json(extract_json_payload(backend.complete(request)), error.item_id);
    } catch (const SchemaInvalid& e) {
      last_error = e.what();
    } catch (const NoPayloadFound& e) {
      last_error = e.what();
    } catch (const UnbalancedPayload& e) {
      last_error = e.what();
    }
  }
  throw SchemaInvalid(fmt::format("no valid diagnosis for {} after {} attempts: {}", error.item_id, attempts, last_error));
}

DiagnosisRun diagnose_all(const std::vector<ErrorSample>& errors, LlmBackend& backend, int attempts) {
  DiagnosisRun run;
  for (const auto& e : errors) {
    try {
      run.diagnoses.push_back(diagnose(e, backend, attempts));
    } catch (const SchemaInvalid& ex) {
      run.dropped.emplace_back(e.item_id, ex.what());
    }
  }
  return run;
}

PatternSummary aggregate_patterns(const std::vector<Diagnosis>& diagnoses, const std::vector<ErrorSample>& errors) {
  PatternSummary p;
  p.by_issue_type = {{"concept_gap", 0}, {"capability_deficit", 0}};
  for (const auto& d : diagnoses) ++p.by_issue_type[std::string(to_string(d.issue_type))];
  for (const auto& e : errors) ++p.by_question_type[e.question_type];
  p.errors = static_cast<std::int64_t>(errors.size());
  p.diagnosed = static_cast<std::int64_t>(diagnoses.size());
  return p;
}

ordered_json to_json(const PatternSummary& p) {
  return ordered_json{{"errors", p.errors},
                      {"diagnosed", p.diagnosed},
                      {"undiagnosed", p.undiagnosed()},
                      {"by_issue_type", p.by_issue_type},
                      {"by_question_type", p.by_question_type}};
}

// ---------------------------------------------------------------------------
// Quotas

std::map<std::string, std::int64_t> allocate_quota(const std::map<std::string, std::int64_t>& error_counts,
                                                   std::int64_t total) {
  if (total < 0) throw ConfigError("quota total must be non-negative");
  std::vector<std::int64_t> weights;
  bool any = false;
  for (const auto& [cid, n] : error_counts) {
    if (n < 0) throw ConfigError("error count for " + cid + " is negative");
    any = any || n > 0;
    weights.push_back(n);
  }
  std::map<std::string, std::int64_t> out;
  for (const auto& [cid, _] : error_counts) out[cid] = 0;
  if (total == 0) return out;
  if (!any) throw AllZeroErrors("cannot allocate a quota without any errors");
  const auto counts = largest_remainder_exact(total, weights);
  std::size_t i = 0;
  for (auto& [_, q] : out) q = counts[i++];
  return out;
}

// ---------------------------------------------------------------------------
// Patch generation

PatchContext assemble_patch_context(const Diagnosis& d, const ErrorSample& error, const KnowledgeStructure& k) {
  PatchContext ctx;
  ctx.diagnosis = d;
  ctx.error = error;
  if (const L3Chain* chain = k.find_chain(error.metadata.chain_id)) ctx.chain = *chain;

  std::set<std::string> chain_statements;
  std::map<std::string, L1Concept> concepts;
  if (ctx.chain) {
    for (const L2Statement* s : k.statements_of_chain(ctx.chain->chain_id)) {
      ctx.statements.push_back(*s);
      chain_statements.insert(s->statement_id);
      for (const L1Concept* c : k.concepts_of_statement(s->statement_id)) concepts.emplace(c->concept_id, *c);
    }
  }
  for (auto& [_, c] : concepts) ctx.concepts.push_back(c);

  const auto linked_to_chain = [&](const L1Concept* c) {
    return std::any_of(c->parent_statement_ids.begin(), c->parent_statement_ids.end(),
                       [&](const std::string& id) { return chain_statements.count(id) != 0; });
  };
  const auto matches = k.find_by_term(d.key_concept);
  const L1Concept* key = nullptr;
  for (const L1Concept* c : matches)
    if (linked_to_chain(c) && (key == nullptr || c->concept_id < key->concept_id)) key = c;
  if (key == nullptr && !matches.empty()) key = matches.front();
  if (key == nullptr)
    for (const auto& id : error.metadata.l1_ids)
      if ((key = k.find_concept(id)) != nullptr) break;

  if (key != nullptr) {
    ctx.key = *key;
    for (const auto& id : neighbor_set(k, key->concept_id))
      if (const L1Concept* n = k.find_concept(id)) ctx.neighbor_terms.push_back(n->term);
  }
  return ctx;
}

std::vector<TrainingSample> generate_patch(const PatchContext& ctx, LlmBackend& backend, const PatchConfig& cfg) {
  ctx.diagnosis.validate();
  const FormatCounts counts = allocate_format_mix(cfg.batch_size, cfg.mix);
  const std::int64_t wanted[] = {counts.open_ended, counts.choice, counts.true_false};

  // Traceability ids shared by the whole batch: the diagnosed concept's
  // statements inside the failed chain, else the whole chain.
  std::set<std::string> chain_ids;
  for (const auto& s : ctx.statements) chain_ids.insert(s.statement_id);
  std::set<std::string> l2;
  if (ctx.key && ctx.diagnosis.issue_type == IssueType::ConceptGap)
    for (const auto& id : ctx.key->parent_statement_ids)
      if (chain_ids.count(id) != 0) l2.insert(id);
  if (l2.empty()) l2 = chain_ids;
  std::set<std::string> l1;
  if (ctx.key) l1.insert(ctx.key->concept_id);
  if (ctx.diagnosis.issue_type == IssueType::CapabilityDeficit || !ctx.key)
    for (const auto& c : ctx.concepts) l1.insert(c.concept_id);

  std::vector<TrainingSample> out;
  std::set<std::string> seen_questions;
  for (std::size_t f = 0; f < 3; ++f) {
    const FormatSpec& spec = kFormats[f];
    const std::string base_tag =
        fmt::format("{}{}-{}", tags::kPatchPrefix, to_string(ctx.diagnosis.issue_type), to_string(spec.format));
    std::int64_t kept = 0;
    for (int attempt = 1; attempt <= cfg.attempts && kept < wanted[f]; ++attempt) {
      const auto request = make_request(attempt_tag(base_tag, attempt), kPatchPreamble,
                                        patch_prompt(ctx, spec, wanted[f] - kept));
      json payload;
      try {
        payload = extract_json_payload(backend.complete(request));
      } catch (const NoPayloadFound&) {
        continue;
      } catch (const UnbalancedPayload&) {
        continue;
      }
      if (!payload.is_array()) continue;
      for (const auto& record : payload) {
        if (kept == wanted[f]) break;
        auto sample = parse_patch_record(record, spec.format);
        if (!sample || !seen_questions.insert(sample->question).second) continue;
        sample->sample_id = fmt::format("patch-r{}-{}-{}-{:02d}", cfg.round, ctx.error.item_id, to_string(spec.format),
                                        kept);
        sample->l2_ids.assign(l2.begin(), l2.end());
        sample->l1_ids.assign(l1.begin(), l1.end());
        sample->cid = ctx.error.cid;
        sample->origin = Origin::Patch;
        sample->source_item_id = ctx.error.item_id;
        sample->validate();
        out.push_back(std::move(*sample));
        ++kept;
      }
    }
    if (kept < wanted[f])
      throw ShortBatch(fmt::format("{}: {} of {} {} patch samples after {} requests", ctx.error.item_id, kept, wanted[f],
                                   to_string(spec.format), cfg.attempts));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay and round-2 assembly

ReplaySelection select_replay(const std::vector<TrainingSample>& prior_corpus,
                              const std::vector<TrainingSample>& patches,
                              const std::map<std::string, std::int64_t>& quotas, std::uint64_t seed,
                              ReplayPolicy policy, const EvaluationReport* prior) {
  std::map<std::string, std::set<std::string>> patch_l2;
  std::map<std::string, std::int64_t> patch_count;
  for (const auto& p : patches) {
    patch_l2[p.cid].insert(p.l2_ids.begin(), p.l2_ids.end());
    ++patch_count[p.cid];
  }
  std::set<std::string> failed_l2;
  if (prior != nullptr)
    for (const auto& e : prior->error_samples) failed_l2.insert(e.metadata.l2_ids.begin(), e.metadata.l2_ids.end());

  std::map<std::string, std::vector<const TrainingSample*>> by_cid;
  for (const auto& s : prior_corpus) by_cid[s.cid].push_back(&s);

  ReplaySelection sel;
  for (const auto& [cid, quota] : quotas) {
    const std::int64_t need = quota - patch_count[cid];
    sel.replay[cid];
    if (need <= 0) continue;

    auto candidates = by_cid[cid];
    std::sort(candidates.begin(), candidates.end(),
              [](const TrainingSample* a, const TrainingSample* b) { return a->sample_id < b->sample_id; });
    SeededRng rng(derive_seed(seed, "replay:" + cid));
    rng.shuffle(candidates);

    const auto& blocked = patch_l2[cid];
    std::vector<const TrainingSample*> pool;
    std::vector<std::pair<std::size_t, const TrainingSample*>> overlapping;
    for (const TrainingSample* s : candidates) {
      if (std::any_of(s->l2_ids.begin(), s->l2_ids.end(), [&](const std::string& id) { return failed_l2.count(id); }))
        continue;
      const auto shared = static_cast<std::size_t>(
          std::count_if(s->l2_ids.begin(), s->l2_ids.end(), [&](const std::string& id) { return blocked.count(id); }));
      if (shared == 0) pool.push_back(s);
      else overlapping.emplace_back(shared, s);
    }

    const auto take = static_cast<std::size_t>(need);
    if (pool.size() < take) {
      if (policy == ReplayPolicy::Strict)
        throw InsufficientDisjointPool(fmt::format("{} needs {} replay samples but only {} are disjoint from its patches",
                                                   cid, need, pool.size()));
      std::stable_sort(overlapping.begin(), overlapping.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      const std::size_t fill = std::min(take - pool.size(), overlapping.size());
      for (std::size_t i = 0; i < fill; ++i) pool.push_back(overlapping[i].second);
      sel.overlap_violations[cid] = static_cast<std::int64_t>(fill);
      sel.log.push_back(fmt::format("{}: {} replay samples share an L2 id with patches", cid, fill));
      if (pool.size() < take)
        sel.log.push_back(fmt::format("{}: replay short by {}", cid, take - pool.size()));
    }
    auto& chosen = sel.replay[cid];
    for (std::size_t i = 0; i < std::min(take, pool.size()); ++i) {
      TrainingSample s = *pool[i];
      s.origin = Origin::Replay;
      chosen.push_back(std::move(s));
    }
  }
  return sel;
}

std::vector<TrainingSample> fit_patches_to_quota(const std::vector<TrainingSample>& patches,
                                                 const std::map<std::string, std::int64_t>& quotas,
                                                 std::vector<std::string>* log) {
  std::map<std::string, std::int64_t> have;
  for (const auto& p : patches) ++have[p.cid];
  std::map<std::string, std::int64_t> drop;
  for (const auto& [cid, n] : have) {
    const auto it = quotas.find(cid);
    const std::int64_t quota = it == quotas.end() ? 0 : it->second;
    if (n > quota) {
      drop[cid] = n - quota;
      if (log != nullptr) log->push_back(fmt::format("{}: dropped {} oldest patches to fit quota {}", cid, n - quota, quota));
    }
  }
  std::vector<TrainingSample> out;
  for (const auto& p : patches) {
    auto it = drop.find(p.cid);
    if (it != drop.end() && it->second > 0) {
      --it->second;
      continue;
    }
    out.push_back(p);
  }
  return out;
}

Round2Corpus assemble_round2(const std::vector<TrainingSample>& patches,
                             const std::map<std::string, std::vector<TrainingSample>>& replay,
                             const std::map<std::string, std::int64_t>& quotas, std::int64_t target_total,
                             std::uint64_t seed) {
  std::int64_t quota_sum = 0;
  for (const auto& [_, q] : quotas) quota_sum += q;
  if (quota_sum != target_total)
    throw QuotaMismatch(fmt::format("quotas sum to {} but the target is {}", quota_sum, target_total));

  std::map<std::string, std::vector<const TrainingSample*>> patch_by_cid;
  for (const auto& p : patches) patch_by_cid[p.cid].push_back(&p);
  for (const auto& [cid, _] : patch_by_cid)
    if (quotas.count(cid) == 0) throw QuotaMismatch("patches for " + cid + ", which has no quota");
  for (const auto& [cid, r] : replay)
    if (quotas.count(cid) == 0 && !r.empty()) throw QuotaMismatch("replay for " + cid + ", which has no quota");

  Round2Corpus out;
  ordered_json counts = ordered_json::object();
  for (const auto& [cid, quota] : quotas) {
    const auto& p = patch_by_cid[cid];
    const auto it = replay.find(cid);
    const std::size_t r = it == replay.end() ? 0 : it->second.size();
    if (static_cast<std::int64_t>(p.size() + r) != quota)
      throw QuotaMismatch(fmt::format("{}: {} patches + {} replay != quota {}", cid, p.size(), r, quota));
    for (const TrainingSample* s : p) {
      out.samples.push_back(*s);
      out.samples.back().origin = Origin::Patch;
    }
    if (it != replay.end())
      for (const auto& s : it->second) {
        out.samples.push_back(s);
        out.samples.back().origin = Origin::Replay;
      }
    counts[cid] = ordered_json{{"patch", p.size()}, {"replay", r}};
  }
  SeededRng(derive_seed(seed, "round2")).shuffle(out.samples);
  out.manifest = ordered_json{{"total", static_cast<std::int64_t>(out.samples.size())}, {"counts", counts}};
  return out;
}

ordered_json to_json(const RepairPlan& plan) {
  ordered_json diagnoses = ordered_json::array();
  for (const auto& d : plan.diagnoses) diagnoses.push_back(to_json(d));
  ordered_json batches = ordered_json::object();
  for (const auto& [item, samples] : plan.patch_batches) {
    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.sample_id);
    batches[item] = ids;
  }
  ordered_json replay = ordered_json::object();
  for (const auto& [cid, samples] : plan.replay) {
    std::vector<std::string> ids;
    for (const auto& s : samples) ids.push_back(s.sample_id);
    replay[cid] = ids;
  }
  return ordered_json{{"round", plan.round},
                      {"quotas", plan.quotas},
                      {"diagnoses", diagnoses},
                      {"patch_batches", batches},
                      {"replay", replay}};
}

std::string render_report(const EvaluationReport& report, const std::vector<Diagnosis>& diagnoses,
                          std::size_t examples) {
  const PatternSummary patterns = aggregate_patterns(diagnoses, report.error_samples);
  std::ostringstream out;
  out << "# Evaluation diagnostic report\n\n## Global metrics\n\n"
      << "- Model name: " << report.model_name << "\n"
      << "- Timestamp: " << report.timestamp << "\n"
      << "- Overall accuracy: " << text::percent(report.overall_accuracy, 2) << " (correct "
      << text::with_thousands(report.correct) << " / total " << text::with_thousands(report.total) << ")\n"
      << "- Error samples: " << text::with_thousands(static_cast<std::int64_t>(report.error_samples.size())) << "\n\n"
      << "## Per-subject performance\n\n| Subject | Accuracy | Total | Errors |\n|---|---|---|---|\n";
  for (const auto& [cid, s] : report.per_subject)
    out << "| " << cid << " | " << text::percent(s.accuracy, 1) << " | " << text::with_thousands(s.total) << " | "
        << text::with_thousands(s.errors) << " |\n";

  out << "\n## Error patterns\n\n- By issue type:";
  for (const auto& [k, v] : patterns.by_issue_type) out << " " << k << " " << text::with_thousands(v) << ";";
  out << "\n- By question type:";
  for (const auto& [k, v] : patterns.by_question_type) out << " " << k << " " << text::with_thousands(v) << ";";
  out << "\n- Diagnosed " << text::with_thousands(patterns.diagnosed) << " of " << text::with_thousands(patterns.errors)
      << " errors\n";

  std::map<std::string, const ErrorSample*> errors;
  for (const auto& e : report.error_samples) errors.emplace(e.item_id, &e);
  std::size_t shown = 0;
  for (std::size_t i = 0; i < diagnoses.size() && shown < examples; ++i) {
    const auto it = errors.find(diagnoses[i].item_id);
    if (it == errors.end()) continue;
    const ErrorSample& e = *it->second;
    const Diagnosis& d = diagnoses[i];
    out << "\n## Error sample " << e.item_id << " (" << to_string(d.issue_type) << ")\n\n"
        << "- Question: " << e.question << "\n"
        << "- Ground truth: " << e.true_answer << "; prediction: "
        << (e.predicted_answer.empty() ? "(none)" : e.predicted_answer) << "\n"
        << "- Key concept: " << d.key_concept << "\n"
        << "- Reasoning: " << d.reasoning << "\n"
        << "- Recommendation: " << d.recommendation << "\n";
    ++shown;
  }
  return out.str();
}

}  // namespace dataloop
