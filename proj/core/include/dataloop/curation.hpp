#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/error.hpp"
#include "dataloop/jsonl.hpp"

namespace dataloop {

class MonotonicityViolation : public Error {
 public:
  using Error::Error;
};

/// The twelve triage domains, in prompt order.
inline constexpr std::array<std::string_view, 12> kDomains = {
    "physics",       "chemistry", "biology",           "medicine",
    "materials_science", "computer_science", "mathematics", "engineering",
    "earth_science", "astronomy", "interdisciplinary", "other",
};

enum class Level { Introductory, Undergraduate, Graduate, Research };
enum class ReasoningType { Descriptive, Procedural, Conceptual, Mathematical, Experimental };

std::string_view to_string(Level level);
std::string_view to_string(ReasoningType type);
Level parse_level(std::string_view s);                // SchemaInvalid on unknown values
ReasoningType parse_reasoning_type(std::string_view s);

struct Document {
  std::string doc_id;
  std::string title;
  std::string summary;
  std::string text;
  std::string cid;  ///< optional; chunks carry the authoritative code
};

struct DocumentTriage {
  std::string doc_id;
  std::vector<std::string> domains;
  Level level = Level::Undergraduate;
  ReasoningType reasoning_type = ReasoningType::Conceptual;
  bool keep = false;
  double confidence = 0.0;

  /// Throws SchemaInvalid unless 1..2 known domains and confidence in [0, 1].
  void validate() const;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::string cid;
  std::string text;
  std::int64_t token_count = 0;

  void validate() const;
};

struct ChunkScore {
  std::string chunk_id;
  int reasoning_depth = 0;
  int prerequisite_density = 0;
  int scenario_applicability = 0;
  int counter_intuitive_index = 0;
  int knowledge_synthesis = 0;
  int breakpoint_smoothness = 0;

  /// Throws SchemaInvalid unless every dimension is an integer in 1..5.
  void validate() const;
};

/// Inclusion rule for triaged documents: level above introductory and a
/// reasoning type other than descriptive. Domains and confidence play no part.
bool check_keep_rule(const DocumentTriage& t);

/// Mandatory smoothness gate (>= 4) plus the mean of the other five
/// dimensions reaching `tau`.
bool passes_chunk_gate(const ChunkScore& s, double tau);

struct RetentionTable {
  std::vector<std::string> stages;
  std::vector<std::int64_t> counts;
  std::vector<double> retention;  ///< count[i+1] / count[i]; one fewer than stages
};

RetentionTable retention_stats(const std::vector<std::pair<std::string, std::int64_t>>& stages);

// Record decoding. Values outside their documented ranges are rejected, never
// clamped.
Document document_from_json(const json& j);
Chunk chunk_from_json(const json& j);
DocumentTriage triage_from_json(const json& j, std::string doc_id);
ChunkScore chunk_score_from_json(const json& j, std::string chunk_id);

ordered_json to_json(const Chunk& c);
ordered_json to_json(const DocumentTriage& t);
ordered_json to_json(const ChunkScore& s);

/// Asks the model to classify a document from its title and summary.
DocumentTriage triage_document(const Document& doc, LlmBackend& backend);

/// Asks the model for the six rubric scores of a chunk.
ChunkScore score_chunk(const Chunk& chunk, LlmBackend& backend);

/// Convenience splitter: consecutive windows of `tokens_per_chunk`
/// whitespace tokens, advancing by tokens_per_chunk - overlap.
std::vector<Chunk> split_fixed_tokens(const Document& doc, const std::string& cid,
                                      std::size_t tokens_per_chunk, std::size_t overlap);

}  // namespace dataloop
