#include <doctest.h>

#include <random>

#include "dataloop/extraction.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/sft.hpp"
#include "dataloop/testkit/testkit.hpp"

using namespace dataloop;

namespace {

KnowledgeStructure small() {
  L3Chain c{"chain-1", "", "p", "", {}, {}, {"a", "b", "c"}, "001", "1"};
  std::vector<L2Statement> s = {{"stmt-1-001", "chain-1", "heat", "raises", "plate", "q1"},
                                {"stmt-1-002", "chain-1", "plate", "raises", "pressure", "q2"}};
  std::vector<L1Concept> k = {{"concept-heat", "heat", "Quantity", "d", {"stmt-1-001"}, {"001"}},
                              {"concept-plate", "plate", "Entity", "d", {"stmt-1-001", "stmt-1-002"}, {"001"}},
                              {"concept-pressure", "pressure", "Quantity", "d", {"stmt-1-002"}, {"001"}}};
  return KnowledgeStructure({c}, s, k);
}

FunctionBackend canned(std::string response) {
  return FunctionBackend([response](const PromptRequest&) { return response; });
}

SynthesisParams params() { return SynthesisParams{"001", 0, 0.77, 0.5, 1.1}; }

}  // namespace

TEST_SUITE("sft") {
  TEST_CASE("format mix") {
    CHECK(allocate_format_mix(10000, {}) == FormatCounts{6000, 3000, 1000});
    CHECK(allocate_format_mix(20, {}) == FormatCounts{12, 6, 2});
    CHECK(allocate_format_mix(60, {}) == FormatCounts{36, 18, 6});
    CHECK(allocate_format_mix(1, {}) == FormatCounts{1, 0, 0});
    CHECK(allocate_format_mix(0, {}).total() == 0);
    CHECK_THROWS_AS(allocate_format_mix(10, FormatMix{0.5, 0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(allocate_format_mix(10, FormatMix{1.1, -0.1, 0.0}), ConfigError);
  }

  TEST_CASE("windows cover the list and end at its end") {
    using W = std::vector<std::pair<std::size_t, std::size_t>>;
    CHECK(plan_windows(20, 8, 8) == W{{0, 8}, {8, 16}, {16, 20}});
    CHECK(plan_windows(10, 4, 3) == W{{0, 4}, {3, 7}, {6, 10}});
    CHECK(plan_windows(3, 8, 8) == W{{0, 3}});
    CHECK(plan_windows(0, 8, 8).empty());
    CHECK_THROWS_AS(plan_windows(10, 4, 5), ConfigError);
    std::mt19937_64 gen(2);
    for (int i = 0; i < 300; ++i) {
      const std::size_t n = 1 + gen() % 100, w = 1 + gen() % 20, s = 1 + gen() % w;
      const auto win = plan_windows(n, w, s);
      CHECK(win.front().first == 0);
      CHECK(win.back().second == n);
      for (std::size_t j = 1; j < win.size(); ++j) {
        CHECK(win[j].first == win[j - 1].first + s);
        CHECK(win[j].first <= win[j - 1].second);  // no gaps
      }
    }
  }

  TEST_CASE("open-ended batch keeps cited records and drops foreign citations") {
    const auto k = small();
    const auto batch = k.statements();
    auto backend = canned(R"([
      {"question": "q1", "answer": "a1", "l2_statement_id": "stmt-1-001", "linked_concepts": ["concept-heat"]},
      {"question": "q2", "answer": "a2", "l2_statement_id": "stmt-9-999"},
      {"question": "q3", "answer": "a3", "l2_statement_id": "stmt-1-002", "linked_concepts": ["pressure"]},
      {"question": "q4", "answer": "a4", "l2_statement_id": "stmt-1-002"}])");
    const auto out = synthesize_batch(batch, k, SftFormat::OpenEnded, 2, backend, params());
    REQUIRE(out.size() == 2);
    CHECK(out[0].l2_ids == std::vector<std::string>{"stmt-1-001"});
    CHECK(out[0].l1_ids == std::vector<std::string>{"concept-heat"});
    CHECK(out[1].question == "q3");
    CHECK(out[1].l1_ids == std::vector<std::string>{"concept-pressure"});  // resolved by term
    CHECK(out[0].sample_id == "sft-001-w000-qa-000");
    CHECK(out[0].origin == Origin::Initial);
  }

  TEST_CASE("unlinked samples take every concept of their statements") {
    const auto k = small();
    auto backend = canned(R"([{"question": "q", "answer": "a", "l2_statement_id": "stmt-1-002"}])");
    const auto out = synthesize_batch(k.statements(), k, SftFormat::OpenEnded, 1, backend, params());
    CHECK(out[0].l1_ids == std::vector<std::string>{"concept-plate", "concept-pressure"});
  }

  TEST_CASE("choice records") {
    const auto k = small();
    auto multi = canned(R"([{"question": "q", "options": ["a", "b", "c", "d"], "answer": "C,A", "l2_statement_ids": ["stmt-1-001", "stmt-1-002"]}])");
    const auto out = synthesize_batch(k.statements(), k, SftFormat::Choice, 1, multi, params());
    CHECK(out[0].answer == "A,C");
    CHECK(out[0].question_type == QuestionType::MultipleChoice);
    CHECK(out[0].options->at("D") == "d");
    CHECK(out[0].l2_ids.size() == 2);

    auto liar = canned(R"([{"question": "q", "options": ["a", "b", "c", "d"], "answer": "A,B", "question_type": "single_choice", "l2_statement_ids": ["stmt-1-001"]}])");
    CHECK_THROWS_AS(synthesize_batch(k.statements(), k, SftFormat::Choice, 1, liar, params()), SchemaInvalid);
    auto three = canned(R"([{"question": "q", "options": ["a", "b", "c"], "answer": "A", "l2_statement_ids": ["stmt-1-001"]}])");
    CHECK_THROWS_AS(synthesize_batch(k.statements(), k, SftFormat::Choice, 1, three, params()), SchemaInvalid);
  }

  TEST_CASE("true/false records") {
    const auto k = small();
    auto ok = canned(R"([{"statement": "s1", "answer": "true", "l2_statement_ids": ["stmt-1-001"]},
                         {"statement": "s2", "answer": false, "l2_statement_ids": ["stmt-1-002"]}])");
    const auto out = synthesize_batch(k.statements(), k, SftFormat::TrueFalse, 2, ok, params());
    CHECK(out[0].answer == "A");
    CHECK(out[1].answer == "B");
    CHECK(out[1].options->at("B") == "False");
    auto bad = canned(R"([{"statement": "s", "answer": "maybe", "l2_statement_ids": ["stmt-1-001"]}])");
    CHECK_THROWS_AS(synthesize_batch(k.statements(), k, SftFormat::TrueFalse, 1, bad, params()), SchemaInvalid);
  }

  TEST_CASE("nothing usable is an error; the prompt asks for the over-generated count") {
    const auto k = small();
    auto none = canned(R"([{"question": "q", "answer": "a", "l2_statement_id": "stmt-x"}])");
    CHECK_THROWS_AS(synthesize_batch(k.statements(), k, SftFormat::OpenEnded, 1, none, params()), EmptyGeneration);
    std::string prompt;
    FunctionBackend spy([&](const PromptRequest& r) {
      prompt = r.user_text;
      return std::string(R"([{"question": "q", "answer": "a", "l2_statement_id": "stmt-1-001"}])");
    });
    synthesize_batch(k.statements(), k, SftFormat::OpenEnded, 10, spy, params());
    CHECK(find_section(prompt, "COUNT") == "11");
  }

  TEST_CASE("coverage") {
    const auto k = small();
    TrainingSample s;
    s.l2_ids = {"stmt-1-001"};
    const auto r = coverage_report({s}, k.statements());
    CHECK(r.covered_fraction == 0.5);
    CHECK(r.below_target);
    CHECK(r.uncovered_ids == std::vector<std::string>{"stmt-1-002"});
    CHECK(coverage_report({}, {}).covered_fraction == 1.0);
  }

  TEST_CASE("corpus synthesis over the synthetic structure hits the planned counts") {
    const auto corpus = testkit::SyntheticCorpus::make();
    const auto backend = testkit::make_synthetic_backend(corpus);
    std::vector<Chunk> chunks;
    for (const auto& d : corpus.docs())
      if (d.triage_keep && d.gate_pass) chunks.push_back(split_fixed_tokens(d.doc, d.doc.cid, 512, 64).at(0));
    const auto k = run_extraction(chunks, *backend, ExtractionConfig{}).structure;
    SftConfig cfg;
    cfg.per_discipline_quota = 60;
    const auto result = synthesize_corpus(k, *backend, cfg);
    CHECK(result.samples.size() == 180);
    std::map<std::string, std::map<QuestionType, int>> counts;
    for (const auto& s : result.samples) {
      CHECK_NOTHROW(s.validate());
      ++counts[s.cid][s.question_type];
    }
    for (auto& [cid, c] : counts) {
      CHECK(c[QuestionType::OpenEnded] == 36);
      CHECK(c[QuestionType::SingleChoice] + c[QuestionType::MultipleChoice] == 18);
      CHECK(c[QuestionType::TrueFalse] == 6);
      CHECK(result.planned.at(cid) == FormatCounts{36, 18, 6});
    }
  }
}
