#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dataloop/backend.hpp"

namespace dataloop {

// Request tags. A tag names the pipeline step that issued a request and is
// part of the fixture fingerprint.
namespace tags {
inline constexpr std::string_view kTriage = "triage";
inline constexpr std::string_view kChunkScore = "chunk-score";
inline constexpr std::string_view kChain = "l3-chain";
inline constexpr std::string_view kDecompose = "l2-decompose";
inline constexpr std::string_view kHarvest = "l1-harvest";
inline constexpr std::string_view kBenchItem = "bench-item";
inline constexpr std::string_view kSftOpen = "sft-qa";
inline constexpr std::string_view kSftChoice = "sft-choice";
inline constexpr std::string_view kSftTrueFalse = "sft-tf";
inline constexpr std::string_view kDiagnose = "diagnose";
inline constexpr std::string_view kPatchPrefix = "patch-";
inline constexpr std::string_view kInference = "inference";
}  // namespace tags

/// Assembles a prompt body out of named sections:
///
///   ### TASK
///   ...
///
///   ### INPUT
///   ...
///
/// Section bodies are free text; structured inputs are embedded as JSON so a
/// scripted model (and a human reading fixtures) can recover them.
class PromptBuilder {
 public:
  PromptBuilder& section(std::string_view name, std::string_view body);
  std::string str() const { return text_; }

 private:
  std::string text_;
};

/// Body of the section called `name`, or nullopt when absent.
std::optional<std::string> find_section(std::string_view prompt, std::string_view name);

/// Builds a request with the shared defaults for pipeline generation calls.
PromptRequest make_request(std::string_view tag, std::string preamble, std::string user_text,
                           const DecodeParams& decode = {});

}  // namespace dataloop
