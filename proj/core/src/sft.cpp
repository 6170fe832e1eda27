#include "dataloop/sft.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "dataloop/apportion.hpp"
#include "dataloop/benchmark.hpp"
#include "dataloop/json_payload.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/text.hpp"

namespace dataloop {
namespace {

const char* const kSftPreamble =
    "You write instruction-tuning data for a scientific domain from curated knowledge statements. "
    "Reply with a JSON array only.";

const char* const kQaTask =
    "Write COUNT open-ended question and answer pairs grounded in the statements below.\n"
    "- Spread the questions over the statements so that most of them (at least seven in ten) are used.\n"
    "- Vary the angle: definitions, mechanisms, checks of a claim, and roles or functions.\n"
    "- Answers are fluent, complete explanations in the domain's own terms; never mention statement ids\n"
    "  or describe the data format.\n"
    "- Cite the statement the pair is built on in l2_statement_id and the concept ids it touches in\n"
    "  linked_concepts.";

const char* const kQaOutput =
    R"([{"question": "...", "answer": "...", "l2_statement_id": "stmt-...", "linked_concepts": ["concept-..."], )"
    R"("question_style": "definition | mechanism | verification | function"}])";

const char* const kChoiceTask =
    "Write COUNT multiple-choice questions grounded in the statements below.\n"
    "- Each has four options. About SINGLE_RATIO percent have exactly one correct option\n"
    "  (question_type single_choice); the rest have two or more (question_type multiple_choice).\n"
    "- answer lists the correct letters, comma separated.\n"
    "- The explanation argues from the science: why the correct options hold and where each distractor\n"
    "  goes wrong. Never refer to statement ids in the question, options or explanation.\n"
    "- Cite the statements used in l2_statement_ids and the concept ids in linked_concepts.";

const char* const kChoiceOutput =
    R"([{"question": "...", "options": ["...", "...", "...", "..."], "answer": "A", )"
    R"("question_type": "single_choice", "explanation": "...", "l2_statement_ids": ["stmt-..."], )"
    R"("linked_concepts": ["concept-..."]}])";

const char* const kTrueFalseTask =
    "Write COUNT true-or-false claims grounded in the statements below.\n"
    "- About TRUE_RATIO percent of the claims are true; false ones alter a condition, direction or\n"
    "  participant so that the error is subtle but checkable.\n"
    "- answer is exactly true or false; the explanation says why.\n"
    "- Cite the statements used in l2_statement_ids and the concept ids in linked_concepts.";

const char* const kTrueFalseOutput =
    R"([{"statement": "...", "answer": "true", "question_type": "true_false", "explanation": "...", )"
    R"("l2_statement_ids": ["stmt-..."], "linked_concepts": ["concept-..."]}])";

const std::vector<std::string> kLetters = {"A", "B", "C", "D"};

std::string_view tag_for(SftFormat f) {
  switch (f) {
    case SftFormat::OpenEnded: return tags::kSftOpen;
    case SftFormat::Choice: return tags::kSftChoice;
    case SftFormat::TrueFalse: return tags::kSftTrueFalse;
  }
  return tags::kSftOpen;
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) s.replace(pos, from.size(), to);
  return s;
}

std::vector<std::string> cited_ids(const json& record) {
  std::vector<std::string> ids;
  for (const char* key : {"l2_statement_ids", "l2_ids"}) {
    if (!record.contains(key)) continue;
    const json& v = record.at(key);
    if (v.is_string()) ids.push_back(v.get<std::string>());
    else if (v.is_array())
      for (const auto& x : v)
        if (x.is_string()) ids.push_back(x.get<std::string>());
  }
  if (record.contains("l2_statement_id") && record.at("l2_statement_id").is_string())
    ids.push_back(record.at("l2_statement_id").get<std::string>());
  return ids;
}

std::vector<std::string> linked_concepts(const json& record) {
  std::vector<std::string> out;
  if (record.contains("linked_concepts") && record.at("linked_concepts").is_array())
    for (const auto& x : record.at("linked_concepts"))
      if (x.is_string()) out.push_back(x.get<std::string>());
  return out;
}

std::map<std::string, std::string> parse_options(const json& record, const std::string& where) {
  if (!record.contains("options")) throw SchemaInvalid(where + ": choice record has no options");
  const json& options = record.at("options");
  std::map<std::string, std::string> out;
  if (options.is_array()) {
    if (options.size() != 4) throw SchemaInvalid(where + ": expected 4 options");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!options[i].is_string()) throw SchemaInvalid(where + ": option text must be a string");
      out[kLetters[i]] = options[i].get<std::string>();
    }
  } else if (options.is_object()) {
    for (const auto& [letter, value] : options.items()) {
      if (!value.is_string()) throw SchemaInvalid(where + ": option text must be a string");
      out[text::trim(letter)] = value.get<std::string>();
    }
    if (out.size() != 4) throw SchemaInvalid(where + ": expected 4 options");
    for (const auto& l : kLetters)
      if (out.count(l) == 0) throw SchemaInvalid(where + ": option " + l + " missing");
  } else {
    throw SchemaInvalid(where + ": options must be an array or object");
  }
  return out;
}

}  // namespace

void FormatMix::validate() const {
  if (open_ended < 0 || choice < 0 || true_false < 0) throw ConfigError("format shares must be non-negative");
  if (std::abs(open_ended + choice + true_false - 1.0) > 1e-9) throw ConfigError("format shares must sum to 1");
}

FormatCounts allocate_format_mix(std::int64_t total, const FormatMix& mix) {
  mix.validate();
  if (total < 0) throw ConfigError("sample total must be non-negative");
  const double weights[] = {mix.open_ended, mix.choice, mix.true_false};
  const auto counts = largest_remainder(total, weights);
  return {counts[0], counts[1], counts[2]};
}

std::vector<std::pair<std::size_t, std::size_t>> plan_windows(std::size_t count, std::size_t window,
                                                              std::size_t stride) {
  if (window < 1 || stride < 1 || stride > window) throw ConfigError("need window >= 1 and 1 <= stride <= window");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t start = 0; start < count; start += stride) {
    const std::size_t end = std::min(count, start + window);
    out.emplace_back(start, end);
    if (end == count) break;
  }
  return out;
}

std::vector<std::vector<L2Statement>> plan_windows(const std::vector<L2Statement>& statements, std::size_t window,
                                                   std::size_t stride) {
  std::vector<std::vector<L2Statement>> out;
  for (const auto& [b, e] : plan_windows(statements.size(), window, stride))
    out.emplace_back(statements.begin() + static_cast<std::ptrdiff_t>(b),
                     statements.begin() + static_cast<std::ptrdiff_t>(e));
  return out;
}

std::string_view to_string(SftFormat f) {
  switch (f) {
    case SftFormat::OpenEnded: return "qa";
    case SftFormat::Choice: return "choice";
    case SftFormat::TrueFalse: return "tf";
  }
  return "qa";
}

std::vector<TrainingSample> synthesize_batch(const std::vector<L2Statement>& batch, const KnowledgeStructure& k,
                                             SftFormat format, std::size_t count, LlmBackend& backend,
                                             const SynthesisParams& params) {
  if (batch.empty()) throw ConfigError("synthesize_batch needs a non-empty batch");
  if (count == 0) return {};

  std::set<std::string> batch_ids;
  std::vector<ordered_json> statement_view;
  std::map<std::string, const L1Concept*> concepts;
  for (const auto& s : batch) {
    batch_ids.insert(s.statement_id);
    statement_view.push_back(ordered_json{{"statement_id", s.statement_id},
                                          {"subject", s.subject},
                                          {"predicate", s.predicate},
                                          {"object", s.object},
                                          {"source_quote", s.source_quote}});
    for (const L1Concept* c : k.concepts_of_statement(s.statement_id)) concepts.emplace(c->concept_id, c);
  }
  std::vector<ordered_json> concept_view;
  for (const auto& [id, c] : concepts)
    concept_view.push_back(ordered_json{{"concept_id", id}, {"term", c->term}, {"definition", c->definition}});

  const auto requested = static_cast<std::size_t>(std::ceil(params.overgeneration * static_cast<double>(count) - 1e-9));
  std::string task;
  const char* output = nullptr;
  switch (format) {
    case SftFormat::OpenEnded:
      task = kQaTask;
      output = kQaOutput;
      break;
    case SftFormat::Choice:
      task = replace_all(kChoiceTask, "SINGLE_RATIO", fmt::format("{:.0f}", params.single_choice_ratio * 100));
      output = kChoiceOutput;
      break;
    case SftFormat::TrueFalse:
      task = replace_all(kTrueFalseTask, "TRUE_RATIO", fmt::format("{:.0f}", params.true_ratio * 100));
      output = kTrueFalseOutput;
      break;
  }
  task = replace_all(task, "COUNT", std::to_string(requested));

  PromptBuilder prompt;
  prompt.section("TASK", task)
      .section("COUNT", std::to_string(requested))
      .section("STATEMENTS", ordered_json(statement_view).dump())
      .section("CONCEPTS", ordered_json(concept_view).dump())
      .section("OUTPUT", output);
  const auto payload = extract_json_payload(backend.complete(make_request(tag_for(format), kSftPreamble, prompt.str())));
  if (!payload.is_array()) throw SchemaInvalid("synthesis response is not an array");

  std::vector<TrainingSample> out;
  for (const auto& record : payload) {
    if (out.size() == count) break;
    if (!record.is_object()) throw SchemaInvalid("synthesis record is not an object");
    const std::string where = fmt::format("{} window {} record", params.cid, params.window_index);

    TrainingSample s;
    s.cid = params.cid;
    s.origin = Origin::Initial;
    switch (format) {
      case SftFormat::OpenEnded:
        s.question_type = QuestionType::OpenEnded;
        s.question = require_string(record, "question");
        s.answer = require_string(record, "answer");
        break;
      case SftFormat::Choice: {
        s.question = require_string(record, "question");
        s.options = parse_options(record, where);
        const auto letters = split_answer_letters(require_string(record, "answer"));
        if (letters.empty()) throw SchemaInvalid(where + ": empty answer");
        for (const auto& l : letters)
          if (s.options->count(l) == 0) throw SchemaInvalid(where + ": answer " + l + " is not an option");
        s.answer = text::join(letters, ",");
        s.question_type = letters.size() == 1 ? QuestionType::SingleChoice : QuestionType::MultipleChoice;
        if (record.contains("question_type") && record.at("question_type").is_string()) {
          const auto declared = parse_question_type(record.at("question_type").get<std::string>());
          if (declared == QuestionType::SingleChoice && letters.size() != 1)
            throw SchemaInvalid(where + ": single_choice item with several answers");
        }
        if (record.contains("explanation") && record.at("explanation").is_string())
          s.explanation = record.at("explanation").get<std::string>();
        break;
      }
      case SftFormat::TrueFalse: {
        s.question_type = QuestionType::TrueFalse;
        s.question = record.contains("statement") ? require_string(record, "statement") : require_string(record, "question");
        const json& a = record.contains("answer") ? record.at("answer") : json();
        std::string verdict;
        if (a.is_boolean()) verdict = a.get<bool>() ? "true" : "false";
        else if (a.is_string()) verdict = text::to_lower(text::trim(a.get<std::string>()));
        if (verdict == "true" || verdict == "a") s.answer = "A";
        else if (verdict == "false" || verdict == "b") s.answer = "B";
        else throw SchemaInvalid(where + ": true/false answer must be true or false, got '" + verdict + "'");
        s.options = std::map<std::string, std::string>{{"A", "True"}, {"B", "False"}};
        if (record.contains("explanation") && record.at("explanation").is_string())
          s.explanation = record.at("explanation").get<std::string>();
        break;
      }
    }

    std::set<std::string> cited;
    for (const auto& id : cited_ids(record))
      if (batch_ids.count(id) != 0) cited.insert(id);
    if (cited.empty()) continue;
    s.l2_ids.assign(cited.begin(), cited.end());

    std::set<std::string> allowed;
    for (const auto& sid : s.l2_ids)
      for (const L1Concept* c : k.concepts_of_statement(sid)) allowed.insert(c->concept_id);
    std::set<std::string> l1;
    for (const auto& ref : linked_concepts(record)) {
      if (allowed.count(ref) != 0) {
        l1.insert(ref);
        continue;
      }
      for (const L1Concept* c : k.find_by_term(ref))
        if (allowed.count(c->concept_id) != 0) l1.insert(c->concept_id);
    }
    if (l1.empty()) l1 = allowed;
    s.l1_ids.assign(l1.begin(), l1.end());

    s.sample_id = fmt::format("sft-{}-w{:03d}-{}-{:03d}", params.cid, params.window_index, to_string(format), out.size());
    s.validate();
    out.push_back(std::move(s));
  }
  if (out.empty()) throw EmptyGeneration(fmt::format("no usable {} samples for {} window {}", to_string(format), params.cid,
                                                     params.window_index));
  return out;
}

CoverageReport coverage_report(const std::vector<TrainingSample>& samples, const std::vector<L2Statement>& statements) {
  CoverageReport report;
  std::set<std::string> cited;
  for (const auto& s : samples) cited.insert(s.l2_ids.begin(), s.l2_ids.end());
  std::size_t covered = 0;
  for (const auto& st : statements) {
    if (cited.count(st.statement_id) != 0) ++covered;
    else report.uncovered_ids.push_back(st.statement_id);
  }
  report.covered_fraction =
      statements.empty() ? 1.0 : static_cast<double>(covered) / static_cast<double>(statements.size());
  report.below_target = report.covered_fraction < 0.7;
  return report;
}

SynthesisResult synthesize_corpus(const KnowledgeStructure& k, LlmBackend& backend, const SftConfig& cfg) {
  cfg.mix.validate();
  SynthesisResult result;

  std::map<std::string, std::vector<L2Statement>> by_cid;
  for (const auto& s : k.statements()) {
    const L3Chain* chain = k.find_chain(s.parent_chain_id);
    if (chain != nullptr) by_cid[chain->cid].push_back(s);
  }

  for (auto& [cid, statements] : by_cid) {
    std::stable_sort(statements.begin(), statements.end(),
                     [](const L2Statement& a, const L2Statement& b) { return a.statement_id < b.statement_id; });
    const FormatCounts planned = allocate_format_mix(cfg.per_discipline_quota, cfg.mix);
    result.planned[cid] = planned;
    const auto windows = plan_windows(statements, cfg.window, cfg.stride);
    const std::vector<std::int64_t> equal(windows.size(), 1);

    std::vector<TrainingSample> discipline;
    const std::pair<SftFormat, std::int64_t> formats[] = {{SftFormat::OpenEnded, planned.open_ended},
                                                          {SftFormat::Choice, planned.choice},
                                                          {SftFormat::TrueFalse, planned.true_false}};
    std::vector<std::vector<std::int64_t>> per_window;
    for (const auto& [format, total] : formats) per_window.push_back(largest_remainder_exact(total, equal));

    for (std::size_t w = 0; w < windows.size(); ++w) {
      for (std::size_t f = 0; f < 3; ++f) {
        const auto n = per_window[f][w];
        if (n <= 0) continue;
        SynthesisParams params{cid, w, cfg.single_choice_ratio, cfg.true_ratio, cfg.overgeneration};
        try {
          auto batch = synthesize_batch(windows[w], k, formats[f].first, static_cast<std::size_t>(n), backend, params);
          if (batch.size() < static_cast<std::size_t>(n))
            result.warnings.push_back(fmt::format("{} window {} {}: {} of {} samples", cid, w,
                                                  to_string(formats[f].first), batch.size(), n));
          discipline.insert(discipline.end(), batch.begin(), batch.end());
        } catch (const Error& e) {
          result.warnings.push_back(fmt::format("{} window {} {} skipped: {}", cid, w, to_string(formats[f].first), e.what()));
        }
      }
    }
    auto coverage = coverage_report(discipline, statements);
    if (coverage.below_target)
      result.warnings.push_back(fmt::format("{}: only {:.1f}% of statements covered", cid, coverage.covered_fraction * 100));
    result.coverage[cid] = std::move(coverage);
    result.samples.insert(result.samples.end(), discipline.begin(), discipline.end());
  }
  return result;
}

}  // namespace dataloop
