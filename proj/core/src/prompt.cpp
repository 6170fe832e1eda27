#include "dataloop/prompt.hpp"

namespace dataloop {

PromptBuilder& PromptBuilder::section(std::string_view name, std::string_view body) {
  if (!text_.empty()) text_ += "\n\n";
  text_ += "### ";
  text_ += name;
  text_ += '\n';
  text_ += body;
  return *this;
}

std::optional<std::string> find_section(std::string_view prompt, std::string_view name) {
  const std::string header = "### " + std::string(name) + "\n";
  std::size_t pos = prompt.starts_with(header) ? 0 : std::string_view::npos;
  if (pos == std::string_view::npos) {
    const std::string marker = "\n" + header;
    const auto hit = prompt.find(marker);
    if (hit == std::string_view::npos) return std::nullopt;
    pos = hit + 1;
  }
  const std::size_t body_start = pos + header.size();
  const auto next = prompt.find("\n\n### ", body_start);
  const auto body_end = next == std::string_view::npos ? prompt.size() : next;
  return std::string(prompt.substr(body_start, body_end - body_start));
}

PromptRequest make_request(std::string_view tag, std::string preamble, std::string user_text,
                           const DecodeParams& decode) {
  PromptRequest request;
  request.tag = std::string(tag);
  request.role_preamble = std::move(preamble);
  request.user_text = std::move(user_text);
  request.decode = decode;
  return request;
}

}  // namespace dataloop
