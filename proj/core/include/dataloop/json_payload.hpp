#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

#include "dataloop/error.hpp"

namespace dataloop {

class NoPayloadFound : public Error {
 public:
  using Error::Error;
};

class UnbalancedPayload : public Error {
 public:
  using Error::Error;
};

/// Recovers the first balanced top-level JSON array or object from raw model
/// output. Markdown code fences and surrounding prose are ignored, and a single
/// class of defect is repaired: trailing commas before a closing bracket. The
/// result is not schema-checked.
///
/// Throws NoPayloadFound when the text holds no JSON container, and
/// UnbalancedPayload when one opens but never closes.
nlohmann::json extract_json_payload(std::string_view raw);

}  // namespace dataloop
