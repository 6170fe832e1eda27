#include "dataloop/curation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dataloop/json_payload.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/text.hpp"

namespace dataloop {
namespace {

constexpr std::array<std::string_view, 4> kLevelNames = {"introductory", "undergraduate", "graduate",
                                                         "research"};
constexpr std::array<std::string_view, 5> kReasoningNames = {"descriptive", "procedural", "conceptual",
                                                             "mathematical", "experimental"};

int score_field(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaInvalid(std::string("chunk score is missing '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw SchemaInvalid(std::string("chunk score '") + key + "' is not an integer");
  const auto value = v.get<std::int64_t>();
  if (value < 1 || value > 5)
    throw SchemaInvalid(std::string("chunk score '") + key + "' = " + std::to_string(value) + " is outside 1..5");
  return static_cast<int>(value);
}

const char* const kScoreKeys[] = {"reasoning_depth",         "prerequisite_density", "scenario_applicability",
                                  "counter_intuitive_index", "knowledge_synthesis",  "breakpoint_smoothness"};

const char* const kTriagePreamble =
    "You classify scientific and technical documents for a training-data pipeline. Reply with JSON only.";

const char* const kTriageTask =
    "Classify the document described below from its title and summary.\n"
    "- domains: one or two values from physics, chemistry, biology, medicine, materials_science,\n"
    "  computer_science, mathematics, engineering, earth_science, astronomy, interdisciplinary, other.\n"
    "- level: the highest background needed to follow it: introductory (general audience or school level),\n"
    "  undergraduate, graduate, or research (new results or frontier work).\n"
    "- reasoning_type: the dominant mode: descriptive, procedural, conceptual, mathematical, experimental.\n"
    "- keep: true when the text is technical, the level is undergraduate or above, and the reasoning\n"
    "  type is not descriptive; false otherwise.\n"
    "- confidence: a number from 0.0 to 1.0.";

const char* const kTriageOutput =
    R"({"domains": ["..."], "level": "...", "reasoning_type": "...", "keep": true, "confidence": 0.0})";

const char* const kScorePreamble =
    "You grade passages of technical text against a six-part rubric. Reply with JSON only.";

const char* const kScoreTask =
    "Grade the passage on each dimension with an integer from 1 (weak) to 5 (strong).\n"
    "- reasoning_depth: length of the longest chain of dependent inferences.\n"
    "- prerequisite_density: how much prior knowledge each claim leans on.\n"
    "- scenario_applicability: how directly the ideas transfer to concrete problems.\n"
    "- counter_intuitive_index: how far the content departs from naive expectations.\n"
    "- knowledge_synthesis: how many separate ideas are combined into one argument.\n"
    "- breakpoint_smoothness: whether the passage starts and ends cleanly, without cut-off\n"
    "  arguments or references to material outside it. Judge the opening and closing parts.";

const char* const kScoreOutput =
    R"({"reasoning_depth": 1, "prerequisite_density": 1, "scenario_applicability": 1, )"
    R"("counter_intuitive_index": 1, "knowledge_synthesis": 1, "breakpoint_smoothness": 1})";

}  // namespace

std::string_view to_string(Level level) { return kLevelNames[static_cast<std::size_t>(level)]; }
std::string_view to_string(ReasoningType type) { return kReasoningNames[static_cast<std::size_t>(type)]; }

Level parse_level(std::string_view s) {
  for (std::size_t i = 0; i < kLevelNames.size(); ++i)
    if (kLevelNames[i] == s) return static_cast<Level>(i);
  throw SchemaInvalid("unknown level '" + std::string(s) + "'");
}

ReasoningType parse_reasoning_type(std::string_view s) {
  for (std::size_t i = 0; i < kReasoningNames.size(); ++i)
    if (kReasoningNames[i] == s) return static_cast<ReasoningType>(i);
  throw SchemaInvalid("unknown reasoning_type '" + std::string(s) + "'");
}

void DocumentTriage::validate() const {
  if (domains.empty() || domains.size() > 2)
    throw SchemaInvalid("triage for " + doc_id + " must list one or two domains");
  for (const auto& d : domains)
    if (std::find(kDomains.begin(), kDomains.end(), d) == kDomains.end())
      throw SchemaInvalid("triage for " + doc_id + " names unknown domain '" + d + "'");
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw SchemaInvalid("triage for " + doc_id + " has confidence outside [0, 1]");
}

void Chunk::validate() const {
  if (chunk_id.empty()) throw SchemaInvalid("chunk without chunk_id");
  if (cid.empty()) throw SchemaInvalid("chunk " + chunk_id + " has no cid");
  if (token_count <= 0) throw SchemaInvalid("chunk " + chunk_id + " has no tokens");
}

void ChunkScore::validate() const {
  for (int v : {reasoning_depth, prerequisite_density, scenario_applicability, counter_intuitive_index,
                knowledge_synthesis, breakpoint_smoothness})
    if (v < 1 || v > 5) throw SchemaInvalid("chunk score for " + chunk_id + " has a dimension outside 1..5");
}

bool check_keep_rule(const DocumentTriage& t) {
  return t.level != Level::Introductory && t.reasoning_type != ReasoningType::Descriptive;
}

bool passes_chunk_gate(const ChunkScore& s, double tau) {
  if (s.breakpoint_smoothness < 4) return false;
  const int sum = s.reasoning_depth + s.prerequisite_density + s.scenario_applicability +
                  s.counter_intuitive_index + s.knowledge_synthesis;
  // mean >= tau, evaluated as sum >= 5 * tau
  return static_cast<double>(sum) >= 5.0 * tau - 1e-9;
}

RetentionTable retention_stats(const std::vector<std::pair<std::string, std::int64_t>>& stages) {
  RetentionTable table;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& [name, count] = stages[i];
    if (count < 0) throw MonotonicityViolation("stage '" + name + "' has a negative count");
    if (i > 0) {
      const auto previous = stages[i - 1].second;
      if (count > previous)
        throw MonotonicityViolation("stage '" + name + "' has more items than '" + stages[i - 1].first + "'");
      table.retention.push_back(previous == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(previous));
    }
    table.stages.push_back(name);
    table.counts.push_back(count);
  }
  return table;
}

// ---------------------------------------------------------------------------

Document document_from_json(const json& j) {
  Document d;
  d.doc_id = require_string(j, "doc_id");
  d.title = optional_string(j, "title");
  d.summary = optional_string(j, "summary");
  d.text = optional_string(j, "text");
  d.cid = optional_string(j, "cid");
  return d;
}

Chunk chunk_from_json(const json& j) {
  Chunk c;
  c.chunk_id = require_string(j, "chunk_id");
  c.doc_id = optional_string(j, "doc_id");
  c.cid = require_string(j, "cid");
  c.text = require_string(j, "text");
  if (j.contains("token_count")) {
    if (!j.at("token_count").is_number_integer())
      throw SchemaInvalid("chunk " + c.chunk_id + ": token_count is not an integer");
    c.token_count = j.at("token_count").get<std::int64_t>();
  } else {
    c.token_count = static_cast<std::int64_t>(text::token_count(c.text));
  }
  c.validate();
  return c;
}

DocumentTriage triage_from_json(const json& j, std::string doc_id) {
  if (!j.is_object()) throw SchemaInvalid("triage response is not an object");
  DocumentTriage t;
  t.doc_id = std::move(doc_id);
  t.domains = string_list(j, "domains", true);
  t.level = parse_level(require_string(j, "level"));
  t.reasoning_type = parse_reasoning_type(require_string(j, "reasoning_type"));
  if (!j.contains("keep") || !j.at("keep").is_boolean()) throw SchemaInvalid("triage 'keep' must be a boolean");
  t.keep = j.at("keep").get<bool>();
  if (!j.contains("confidence") || !j.at("confidence").is_number())
    throw SchemaInvalid("triage 'confidence' must be a number");
  t.confidence = j.at("confidence").get<double>();
  t.validate();
  return t;
}

ChunkScore chunk_score_from_json(const json& j, std::string chunk_id) {
  if (!j.is_object()) throw SchemaInvalid("chunk score response is not an object");
  ChunkScore s;
  s.chunk_id = std::move(chunk_id);
  s.reasoning_depth = score_field(j, kScoreKeys[0]);
  s.prerequisite_density = score_field(j, kScoreKeys[1]);
  s.scenario_applicability = score_field(j, kScoreKeys[2]);
  s.counter_intuitive_index = score_field(j, kScoreKeys[3]);
  s.knowledge_synthesis = score_field(j, kScoreKeys[4]);
  s.breakpoint_smoothness = score_field(j, kScoreKeys[5]);
  return s;
}

ordered_json to_json(const Chunk& c) {
  return ordered_json{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id}, {"cid", c.cid},
                      {"text", c.text},         {"token_count", c.token_count}};
}

ordered_json to_json(const DocumentTriage& t) {
  return ordered_json{{"doc_id", t.doc_id},
                      {"domains", t.domains},
                      {"level", to_string(t.level)},
                      {"reasoning_type", to_string(t.reasoning_type)},
                      {"keep", t.keep},
                      {"confidence", t.confidence}};
}

ordered_json to_json(const ChunkScore& s) {
  return ordered_json{{"chunk_id", s.chunk_id},
                      {kScoreKeys[0], s.reasoning_depth},
                      {kScoreKeys[1], s.prerequisite_density},
                      {kScoreKeys[2], s.scenario_applicability},
                      {kScoreKeys[3], s.counter_intuitive_index},
                      {kScoreKeys[4], s.knowledge_synthesis},
                      {kScoreKeys[5], s.breakpoint_smoothness}};
}

DocumentTriage triage_document(const Document& doc, LlmBackend& backend) {
  const ordered_json input{{"doc_id", doc.doc_id}, {"title", doc.title}, {"summary", doc.summary}};
  PromptBuilder prompt;
  prompt.section("TASK", kTriageTask).section("DOCUMENT", input.dump()).section("OUTPUT", kTriageOutput);
  const auto raw = backend.complete(make_request(tags::kTriage, kTriagePreamble, prompt.str(), {0.0, 256, true}));
  return triage_from_json(extract_json_payload(raw), doc.doc_id);
}

ChunkScore score_chunk(const Chunk& chunk, LlmBackend& backend) {
  const ordered_json input{{"chunk_id", chunk.chunk_id}, {"text", chunk.text}};
  PromptBuilder prompt;
  prompt.section("TASK", kScoreTask).section("CHUNK", input.dump()).section("OUTPUT", kScoreOutput);
  const auto raw =
      backend.complete(make_request(tags::kChunkScore, kScorePreamble, prompt.str(), {0.0, 256, true}));
  return chunk_score_from_json(extract_json_payload(raw), chunk.chunk_id);
}

std::vector<Chunk> split_fixed_tokens(const Document& doc, const std::string& cid, std::size_t tokens_per_chunk,
                                      std::size_t overlap) {
  if (tokens_per_chunk == 0 || overlap >= tokens_per_chunk)
    throw ConfigError("chunk size must be positive and larger than the overlap");
  std::vector<std::string> words;
  for (auto& part : text::split(text::collapse_whitespace(doc.text), ' '))
    if (!part.empty()) words.push_back(std::move(part));

  std::vector<Chunk> chunks;
  const std::size_t step = tokens_per_chunk - overlap;
  for (std::size_t start = 0; start < words.size(); start += step) {
    const std::size_t end = std::min(words.size(), start + tokens_per_chunk);
    Chunk c;
    c.chunk_id = doc.doc_id + "-" + std::to_string(chunks.size());
    c.doc_id = doc.doc_id;
    c.cid = cid;
    c.text = text::join(std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(start),
                                                 words.begin() + static_cast<std::ptrdiff_t>(end)),
                        " ");
    c.token_count = static_cast<std::int64_t>(end - start);
    chunks.push_back(std::move(c));
    if (end == words.size()) break;
  }
  return chunks;
}

}  // namespace dataloop
