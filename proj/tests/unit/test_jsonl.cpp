#include <doctest.h>

#include <fstream>

#include "dataloop/error.hpp"
#include "dataloop/jsonl.hpp"
#include "dataloop/testkit/testkit.hpp"

using namespace dataloop;

TEST_SUITE("jsonl") {
  TEST_CASE("write then read round-trips records in order") {
    testkit::TempDir dir;
    const auto path = dir.path() / "sub" / "r.jsonl";
    std::vector<ordered_json> records = {ordered_json{{"b", 1}, {"a", "x"}}, ordered_json{{"z", nullptr}}};
    write_jsonl(path, records);
    CHECK(read_file(path) == "{\"b\":1,\"a\":\"x\"}\n{\"z\":null}\n");
    const auto back = read_jsonl(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].at("a") == "x");
    CHECK(to_jsonl({}) == "");
  }

  TEST_CASE("blank lines are skipped and bad lines are named") {
    testkit::TempDir dir;
    atomic_write(dir.path() / "a.jsonl", "{\"x\":1}\n\n  \n{\"x\":2}\n");
    CHECK(read_jsonl(dir.path() / "a.jsonl").size() == 2);
    atomic_write(dir.path() / "b.jsonl", "{\"x\":1}\n{oops\n");
    try {
      read_jsonl(dir.path() / "b.jsonl");
      FAIL("expected SchemaInvalid");
    } catch (const SchemaInvalid& e) {
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }

  TEST_CASE("atomic write replaces contents and leaves no temp files") {
    testkit::TempDir dir;
    atomic_write(dir.path() / "f", "one");
    atomic_write(dir.path() / "f", "two");
    CHECK(read_file(dir.path() / "f") == "two");
    int files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    CHECK(files == 1);
    CHECK_THROWS_AS(read_file(dir.path() / "nope"), IoError);
  }

  TEST_CASE("typed field access") {
    const json j = {{"s", "v"}, {"n", 3}, {"l", {"a", "b"}}, {"bad", {1}}};
    CHECK(require_string(j, "s") == "v");
    CHECK_THROWS_AS(require_string(j, "n"), SchemaInvalid);
    CHECK_THROWS_AS(require_string(j, "missing"), SchemaInvalid);
    CHECK(optional_string(j, "missing", "fb") == "fb");
    CHECK(string_list(j, "l", true) == std::vector<std::string>{"a", "b"});
    CHECK(string_list(j, "missing", false).empty());
    CHECK_THROWS_AS(string_list(j, "missing", true), SchemaInvalid);
    CHECK_THROWS_AS(string_list(j, "bad", true), SchemaInvalid);
  }
}
