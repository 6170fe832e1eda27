#include "dataloop/corpus.hpp"

#include <array>

#include "dataloop/error.hpp"

namespace dataloop {
namespace {

constexpr std::array<std::string_view, 4> kTypeNames = {"open_ended", "single_choice", "multiple_choice",
                                                        "true_false"};
constexpr std::array<std::string_view, 3> kOriginNames = {"initial", "patch", "replay"};

}  // namespace

std::string_view to_string(QuestionType t) { return kTypeNames[static_cast<std::size_t>(t)]; }
std::string_view to_string(Origin o) { return kOriginNames[static_cast<std::size_t>(o)]; }

QuestionType parse_question_type(std::string_view s) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i)
    if (kTypeNames[i] == s) return static_cast<QuestionType>(i);
  throw SchemaInvalid("unknown question_type '" + std::string(s) + "'");
}

Origin parse_origin(std::string_view s) {
  for (std::size_t i = 0; i < kOriginNames.size(); ++i)
    if (kOriginNames[i] == s) return static_cast<Origin>(i);
  throw SchemaInvalid("unknown origin '" + std::string(s) + "'");
}

void TrainingSample::validate() const {
  if (sample_id.empty()) throw SchemaInvalid("training sample without sample_id");
  if (question.empty() || answer.empty()) throw SchemaInvalid("sample " + sample_id + " lacks a question or answer");
  if (has_options(question_type) != options.has_value())
    throw SchemaInvalid("sample " + sample_id + ": options must be present exactly for choice and true/false");
  if (options && options->empty()) throw SchemaInvalid("sample " + sample_id + " has an empty option map");
  if (origin == Origin::Initial && l2_ids.empty()) throw SchemaInvalid("initial sample " + sample_id + " has no l2_ids");
}

std::string TrainingSample::full_text() const {
  std::string out = question;
  if (options)
    for (const auto& [letter, option] : *options) {
      out += '\n';
      out += option;
    }
  out += '\n';
  out += answer;
  if (explanation) {
    out += '\n';
    out += *explanation;
  }
  return out;
}

ordered_json to_json(const TrainingSample& s) {
  ordered_json j;
  j["sample_id"] = s.sample_id;
  j["question"] = s.question;
  if (s.options) {
    ordered_json options = ordered_json::object();
    for (const auto& [letter, text] : *s.options) options[letter] = text;
    j["options"] = options;
  }
  j["answer"] = s.answer;
  if (s.explanation) j["explanation"] = *s.explanation;
  j["question_type"] = to_string(s.question_type);
  j["l2_ids"] = s.l2_ids;
  j["l1_ids"] = s.l1_ids;
  j["cid"] = s.cid;
  j["origin"] = to_string(s.origin);
  if (!s.source_item_id.empty()) j["source_item_id"] = s.source_item_id;
  return j;
}

TrainingSample sample_from_json(const json& j) {
  if (!j.is_object()) throw SchemaInvalid("training sample is not an object");
  TrainingSample s;
  s.sample_id = require_string(j, "sample_id");
  s.question = require_string(j, "question");
  if (j.contains("options") && !j.at("options").is_null()) {
    if (!j.at("options").is_object()) throw SchemaInvalid("sample " + s.sample_id + ": options must be an object");
    std::map<std::string, std::string> options;
    for (const auto& [letter, text] : j.at("options").items()) {
      if (!text.is_string()) throw SchemaInvalid("sample " + s.sample_id + ": option " + letter + " is not text");
      options[letter] = text.get<std::string>();
    }
    s.options = std::move(options);
  }
  s.answer = require_string(j, "answer");
  if (j.contains("explanation") && j.at("explanation").is_string()) s.explanation = j.at("explanation").get<std::string>();
  s.question_type = parse_question_type(require_string(j, "question_type"));
  s.l2_ids = string_list(j, "l2_ids", false);
  s.l1_ids = string_list(j, "l1_ids", false);
  s.cid = require_string(j, "cid");
  s.origin = parse_origin(require_string(j, "origin"));
  s.source_item_id = optional_string(j, "source_item_id");
  s.validate();
  return s;
}

ordered_json export_record(const TrainingSample& s) {
  std::string instruction = s.question;
  if (s.options)
    for (const auto& [letter, text] : *s.options) instruction += "\n" + letter + ". " + text;
  std::string output = s.answer;
  if (s.explanation && !s.explanation->empty()) output += "\n\n" + *s.explanation;
  return ordered_json{{"instruction", instruction}, {"input", ""}, {"output", output}};
}

std::vector<TrainingSample> load_corpus(const std::filesystem::path& path) {
  std::vector<TrainingSample> out;
  for (const auto& j : read_jsonl(path)) out.push_back(sample_from_json(j));
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<TrainingSample>& samples) {
  std::vector<ordered_json> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(to_json(s));
  write_jsonl(path, rows);
}

void save_export(const std::filesystem::path& path, const std::vector<TrainingSample>& samples) {
  std::vector<ordered_json> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(export_record(s));
  write_jsonl(path, rows);
}

}  // namespace dataloop
