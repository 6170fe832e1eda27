#include "dataloop/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>

#include "dataloop/prompt.hpp"
#include "dataloop/text.hpp"

namespace dataloop {
namespace {

const char* const kMarkers[] = {"answer is", "answers are", "answer:", "answers:", "option is", "options are",
                                "choice is", "choices are"};

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::set<char> scan_letters(std::string_view s, std::string_view valid) {
  std::set<char> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_alnum(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_alnum(s[j])) ++j;
    const std::string_view run = s.substr(i, j - i);
    i = j;

    const bool all_valid = std::all_of(run.begin(), run.end(), [&](char c) {
      return std::isupper(static_cast<unsigned char>(c)) != 0 && valid.find(c) != std::string_view::npos;
    });
    if (!all_valid) continue;
    const std::set<char> distinct(run.begin(), run.end());
    if (distinct.size() != run.size()) continue;
    out.insert(distinct.begin(), distinct.end());
  }
  return out;
}

ordered_json metadata_json(const ItemMetadata& m) {
  return ordered_json{{"chain_id", m.chain_id}, {"l2_ids", m.l2_ids}, {"l1_ids", m.l1_ids}};
}

ItemMetadata metadata_from(const json& j) {
  ItemMetadata m;
  if (!j.is_object()) return m;
  m.chain_id = optional_string(j, "chain_id");
  m.l2_ids = string_list(j, "l2_ids", false);
  m.l1_ids = string_list(j, "l1_ids", false);
  return m;
}

}  // namespace

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  for (const auto& j : read_jsonl(path)) out.push_back({require_string(j, "item_id"), optional_string(j, "raw_text")});
  return out;
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions) {
  std::vector<ordered_json> records;
  for (const auto& p : predictions) records.push_back(ordered_json{{"item_id", p.item_id}, {"raw_text", p.raw_text}});
  write_jsonl(path, records);
}

std::string parse_multi_choice_answer(std::string_view raw, std::string_view valid) {
  const std::string lowered = text::to_lower(raw);
  std::size_t cut = std::string::npos;
  for (const char* marker : kMarkers) {
    const auto pos = lowered.rfind(marker);
    if (pos == std::string::npos) continue;
    const std::size_t end = pos + std::string_view(marker).size();
    if (cut == std::string::npos || end > cut) cut = end;
  }
  std::set<char> letters;
  if (cut != std::string::npos) letters = scan_letters(raw.substr(cut), valid);
  if (letters.empty()) letters = scan_letters(raw, valid);

  std::string out;
  for (char c : letters) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

ordered_json to_json(const ErrorSample& e) {
  return ordered_json{{"item_id", e.item_id},
                      {"question", e.question},
                      {"true_answer", e.true_answer},
                      {"predicted_answer", e.predicted_answer},
                      {"question_type", e.question_type},
                      {"cid", e.cid},
                      {"metadata", metadata_json(e.metadata)}};
}

ErrorSample error_sample_from_json(const json& j) {
  ErrorSample e;
  e.item_id = require_string(j, "item_id");
  e.question = require_string(j, "question");
  e.true_answer = require_string(j, "true_answer");
  e.predicted_answer = optional_string(j, "predicted_answer");
  e.question_type = require_string(j, "question_type");
  e.cid = require_string(j, "cid");
  if (j.contains("metadata")) e.metadata = metadata_from(j.at("metadata"));
  return e;
}

ordered_json to_json(const EvaluationReport& r) {
  ordered_json subjects = ordered_json::object();
  for (const auto& [cid, s] : r.per_subject)
    subjects[cid] = ordered_json{{"accuracy", s.accuracy}, {"total", s.total}, {"errors", s.errors}};
  ordered_json errors = ordered_json::array();
  for (const auto& e : r.error_samples) errors.push_back(to_json(e));
  return ordered_json{{"model_name", r.model_name},
                      {"timestamp", r.timestamp},
                      {"overall_accuracy", r.overall_accuracy},
                      {"correct", r.correct},
                      {"total", r.total},
                      {"error_count", static_cast<std::int64_t>(r.error_samples.size())},
                      {"per_subject", subjects},
                      {"error_samples", errors}};
}

EvaluationReport report_from_json(const json& j) {
  if (!j.is_object()) throw SchemaInvalid("evaluation report must be an object");
  EvaluationReport r;
  r.model_name = optional_string(j, "model_name");
  r.timestamp = optional_string(j, "timestamp");
  try {
    r.correct = j.at("correct").get<std::int64_t>();
    r.total = j.at("total").get<std::int64_t>();
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    for (const auto& [cid, s] : j.at("per_subject").items())
      r.per_subject[cid] = {s.at("accuracy").get<double>(), s.at("total").get<std::int64_t>(),
                            s.at("errors").get<std::int64_t>()};
  } catch (const json::exception& e) {
    throw SchemaInvalid(std::string("evaluation report: ") + e.what());
  }
  if (j.contains("error_samples"))
    for (const auto& e : j.at("error_samples")) r.error_samples.push_back(error_sample_from_json(e));
  return r;
}

EvaluationReport load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw SchemaInvalid(path.string() + ": " + e.what());
  }
}

void save_report(const std::filesystem::path& path, const EvaluationReport& r) { write_json(path, to_json(r)); }

EvaluationReport score(const std::vector<BenchmarkItem>& benchmark, const std::vector<Prediction>& predictions,
                       const std::string& model_name, const std::string& timestamp) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < benchmark.size(); ++i) index.emplace(benchmark[i].item_id, i);

  std::vector<const Prediction*> by_item(benchmark.size(), nullptr);
  for (const auto& p : predictions) {
    const auto it = index.find(p.item_id);
    if (it == index.end()) throw UnknownItemId("prediction for unknown item " + p.item_id);
    if (by_item[it->second] != nullptr) throw DuplicatePrediction("item " + p.item_id + " is predicted twice");
    by_item[it->second] = &p;
  }

  EvaluationReport r;
  r.model_name = model_name;
  r.timestamp = timestamp;
  r.total = static_cast<std::int64_t>(benchmark.size());
  for (std::size_t i = 0; i < benchmark.size(); ++i) {
    const BenchmarkItem& item = benchmark[i];
    std::string valid;
    for (const auto& [letter, _] : item.options) valid += letter;
    const std::string predicted = by_item[i] == nullptr ? "" : parse_multi_choice_answer(by_item[i]->raw_text, valid);
    const std::string truth = item.answer_text();

    SubjectScore& subject = r.per_subject[item.cid];
    ++subject.total;
    if (predicted == truth) {
      ++r.correct;
      continue;
    }
    ++subject.errors;
    r.error_samples.push_back({item.item_id, item.question, truth, predicted,
                               std::string(to_string(item.question_type())), item.cid, item.metadata});
  }
  r.overall_accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
  for (auto& [_, s] : r.per_subject)
    s.accuracy = static_cast<double>(s.total - s.errors) / static_cast<double>(s.total);
  return r;
}

std::vector<ErrorSample> error_set(const EvaluationReport& report) { return report.error_samples; }

std::vector<Prediction> run_inference(const std::vector<BenchmarkItem>& benchmark, LlmBackend& backend) {
  std::vector<Prediction> out;
  out.reserve(benchmark.size());
  for (const auto& item : benchmark) {
    std::string body = item.question + "\n";
    for (const auto& [letter, option] : item.options) body += letter + ". " + option + "\n";
    PromptBuilder prompt;
    prompt.section("QUESTION", body)
        .section("INSTRUCTION", "One or more options are correct. Reply with the letters of all correct options only.");
    out.push_back({item.item_id, backend.complete(make_request(tags::kInference,
                                                               "You are taking a multiple-choice examination.",
                                                               prompt.str(), DecodeParams::evaluation()))});
  }
  return out;
}

}  // namespace dataloop
