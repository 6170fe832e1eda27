#include <doctest.h>

#include "dataloop/prompt.hpp"

using namespace dataloop;

TEST_SUITE("prompt") {
  TEST_CASE("sections read back by name") {
    PromptBuilder b;
    b.section("TASK", "Do the thing.").section("INPUT", "{\"a\": 1}\nsecond line").section("OUTPUT", "[]");
    const std::string p = b.str();
    CHECK(find_section(p, "TASK") == "Do the thing.");
    CHECK(find_section(p, "INPUT") == "{\"a\": 1}\nsecond line");
    CHECK(find_section(p, "OUTPUT") == "[]");
    CHECK_FALSE(find_section(p, "MISSING").has_value());
    CHECK_FALSE(find_section(p, "TAS").has_value());
  }

  TEST_CASE("requests carry tag, preamble and decode settings") {
    const auto r = make_request(tags::kChain, "role", "body", DecodeParams{0.5, 100, false});
    CHECK(r.tag == "l3-chain");
    CHECK(r.role_preamble == "role");
    CHECK(r.user_text == "body");
    CHECK(r.decode.max_tokens == 100);
    CHECK(r.decode.temperature == 0.5);
  }
}
