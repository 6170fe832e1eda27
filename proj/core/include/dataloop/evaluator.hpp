#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/benchmark.hpp"

namespace dataloop {

class UnknownItemId : public Error {
 public:
  using Error::Error;
};

class DuplicatePrediction : public Error {
 public:
  using Error::Error;
};

struct Prediction {
  std::string item_id;
  std::string raw_text;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& predictions);

/// Canonical option string from free model output.
///
/// When the text contains an answer marker ("answer is", "answers are",
/// "answer:", "correct option is", ...), only the part after the last marker
/// is read, unless it yields nothing. Within it, an alphanumeric run that is a
/// single capital letter in `valid`, or a run of 2+ distinct capitals all in
/// `valid` ("ABD"), contributes its letters. Lower-case letters never count.
/// The result is sorted, deduplicated and comma-joined; it may be empty.
std::string parse_multi_choice_answer(std::string_view raw, std::string_view valid = "ABCD");

struct SubjectScore {
  double accuracy = 0.0;
  std::int64_t total = 0;
  std::int64_t errors = 0;
};

struct ErrorSample {
  std::string item_id;
  std::string question;
  std::string true_answer;
  std::string predicted_answer;
  std::string question_type;
  std::string cid;
  ItemMetadata metadata;
};

struct EvaluationReport {
  std::string model_name;
  std::string timestamp;
  double overall_accuracy = 0.0;
  std::int64_t correct = 0;
  std::int64_t total = 0;
  std::map<std::string, SubjectScore> per_subject;
  std::vector<ErrorSample> error_samples;  ///< benchmark order
};

ordered_json to_json(const ErrorSample& e);
ErrorSample error_sample_from_json(const json& j);
ordered_json to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const json& j);
EvaluationReport load_report(const std::filesystem::path& path);
void save_report(const std::filesystem::path& path, const EvaluationReport& r);

/// Exact match on canonical option strings; a missing prediction is wrong.
/// Throws UnknownItemId for a prediction naming no item and
/// DuplicatePrediction when an item is predicted twice.
EvaluationReport score(const std::vector<BenchmarkItem>& benchmark, const std::vector<Prediction>& predictions,
                       const std::string& model_name = "model", const std::string& timestamp = "");

std::vector<ErrorSample> error_set(const EvaluationReport& report);

/// Asks the backend every benchmark question with greedy decoding and a 15
/// token cap.
std::vector<Prediction> run_inference(const std::vector<BenchmarkItem>& benchmark, LlmBackend& backend);

}  // namespace dataloop
