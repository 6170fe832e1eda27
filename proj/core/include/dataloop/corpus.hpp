#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dataloop/jsonl.hpp"

namespace dataloop {

enum class QuestionType { OpenEnded, SingleChoice, MultipleChoice, TrueFalse };
enum class Origin { Initial, Patch, Replay };

std::string_view to_string(QuestionType t);
std::string_view to_string(Origin o);
QuestionType parse_question_type(std::string_view s);  // SchemaInvalid on unknown values
Origin parse_origin(std::string_view s);

inline bool has_options(QuestionType t) { return t != QuestionType::OpenEnded; }

/// One supervised fine-tuning record with its traceability ids.
struct TrainingSample {
  std::string sample_id;
  std::string question;
  std::optional<std::map<std::string, std::string>> options;  ///< letter -> text
  std::string answer;
  std::optional<std::string> explanation;
  QuestionType question_type = QuestionType::OpenEnded;
  std::vector<std::string> l2_ids;
  std::vector<std::string> l1_ids;
  std::string cid;
  Origin origin = Origin::Initial;
  std::string source_item_id;  ///< failed benchmark item a patch repairs; empty otherwise

  /// Throws SchemaInvalid when options presence disagrees with the question
  /// type, or an initial sample has no l2_ids.
  void validate() const;

  /// Question, options, answer and explanation concatenated; the text checked
  /// for overlap with benchmark questions.
  std::string full_text() const;
};

ordered_json to_json(const TrainingSample& s);
TrainingSample sample_from_json(const json& j);

/// Instruction-tuning view handed to external trainers.
ordered_json export_record(const TrainingSample& s);

std::vector<TrainingSample> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<TrainingSample>& samples);
void save_export(const std::filesystem::path& path, const std::vector<TrainingSample>& samples);

}  // namespace dataloop
