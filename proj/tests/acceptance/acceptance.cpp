// Acceptance checks, one per criterion. Each prints a single PASS or FAIL
// line. `dataloop_acceptance N` runs criterion N; without arguments all run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dataloop/apportion.hpp"
#include "dataloop/benchmark.hpp"
#include "dataloop/debugger.hpp"
#include "dataloop/evaluator.hpp"
#include "dataloop/extraction.hpp"
#include "dataloop/project.hpp"
#include "dataloop/rng.hpp"
#include "dataloop/sft.hpp"
#include "dataloop/statistics.hpp"
#include "dataloop/text.hpp"
#include "dataloop/testkit/testkit.hpp"

namespace fs = std::filesystem;
using namespace dataloop;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (failures.size() < 5) failures.push_back(what);
  }
};

using Timer = std::chrono::steady_clock;

const std::vector<Stage> kFullRun = {Stage::Curate, Stage::Extract, Stage::Bench, Stage::Synth, Stage::Eval,
                                     Stage::Diagnose, Stage::Patch, Stage::Mix, Stage::Report};

// Stages the bundled fixture project up to and including `last` in `dir`.
Project run_fixture(const fs::path& dir, Stage last = Stage::Report) {
  FixtureScript script = testkit::stage_fixture_project(dir);
  ReplayBackend backend(std::move(script));
  Project project = Project::open(dir);
  RunOptions run;
  run.backend = &backend;
  run.clock = testkit::fixed_time;
  run.predictions = testkit::fixture_project_dir() / "predictions" / "round-1.jsonl";
  for (const Stage s : kFullRun) {
    project.run_stage(s, run);
    if (s == last) break;
  }
  return project;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  Outcome o;
  testkit::TempDir a("accept-a"), b("accept-b");
  const auto start = Timer::now();
  run_fixture(a.path());
  const double first_s = std::chrono::duration<double>(Timer::now() - start).count();
  run_fixture(b.path());
  const double total_s = std::chrono::duration<double>(Timer::now() - start).count();

  const auto ta = testkit::tree_digest(a.path());
  const auto tb = testkit::tree_digest(b.path());
  o.expect(ta.size() > 20, fmt::format("artifact tree has only {} files", ta.size()));
  o.expect(ta == tb, "artifact trees differ");
  for (const auto& [path, hash] : ta) {
    const auto it = tb.find(path);
    if (it == tb.end() || it->second != hash) o.expect(false, "differs: " + path);
  }
  const Project p = Project::open(a.path());
  // Mix closes round 1, sending eval, diagnose and patch back to pending for round 2.
  for (const Stage s : kFullRun) {
    const auto& rec = p.manifest().stages.at(s);
    const bool reopened = s == Stage::Eval || s == Stage::Diagnose || s == Stage::Patch;
    o.expect(reopened ? rec.round == 1 && !rec.artifacts.empty() : rec.status == StageStatus::Done,
             std::string(to_string(s)) + " did not complete");
  }
  o.expect(p.manifest().round == 2, "mix did not advance to round 2");
  o.expect(fs::exists(a.path() / "round-1" / "mix" / "corpus.jsonl"), "no round-2 corpus");
  o.expect(first_s < 10.0, fmt::format("one full run took {:.2f} s", first_s));
  o.detail = fmt::format("{} files identical across two runs; run time {:.3f} s (limit 10 s), both runs {:.3f} s",
                         ta.size(), first_s, total_s);
  return o;
}

Outcome criterion_2() {
  Outcome o;
  testkit::TempDir dir("accept-orphans");
  const Project p = run_fixture(dir.path(), Stage::Extract);
  const KnowledgeStructure k = load_knowledge(p.knowledge_dir());
  o.expect(validate(k).empty(), "fixture structure has violations");

  // Fresh extraction runs over differently seeded corpora.
  int runs = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    testkit::CorpusSpec spec;
    spec.seed = seed;
    spec.chunks_per_discipline = 6;
    const auto corpus = testkit::SyntheticCorpus::make(spec);
    const auto backend = testkit::make_synthetic_backend(corpus);
    std::vector<Chunk> chunks;
    for (const auto& d : corpus.docs())
      if (d.gate_pass)
        for (auto& c : split_fixed_tokens(d.doc, d.doc.cid, 512, 64)) chunks.push_back(std::move(c));
    const auto result = run_extraction(chunks, *backend, ExtractionConfig{});
    o.expect(validate(result.structure).empty(), fmt::format("seed {} extraction has violations", seed));
    ++runs;
  }

  std::vector<L1Concept> concepts = k.concepts();
  std::set<std::string> injected;
  for (int i = 0; i < 5; ++i) {
    L1Concept c;
    c.concept_id = fmt::format("concept-injected-{}", i);
    c.term = fmt::format("dangling term {}", i);
    c.type = "Quantity";
    c.definition = "Injected with parents that do not exist.";
    c.parent_statement_ids = {fmt::format("stmt-missing-{}", i)};
    c.cids = {"006"};
    concepts.push_back(c);
    injected.insert(c.concept_id);
  }
  const KnowledgeStructure broken(k.chains(), k.statements(), concepts);
  const auto report = validate(broken);
  std::size_t orphans = 0;
  for (const auto& v : report)
    if (v.kind == ViolationKind::OrphanConcept && injected.count(v.offending_id) != 0) ++orphans;
  o.expect(report.size() == 5, fmt::format("expected 5 violations, got {}", report.size()));
  o.expect(orphans == 5, fmt::format("expected 5 orphan concepts, got {}", orphans));
  o.detail = fmt::format("fixture ({} nodes) and {} fresh extractions valid; 5 injected -> {} orphan violations",
                         k.node_count(), runs, orphans);
  return o;
}

Outcome criterion_3() {
  Outcome o;
  testkit::TempDir dir("accept-patch");
  const Project p = run_fixture(dir.path(), Stage::Mix);
  const KnowledgeStructure k = load_knowledge(p.knowledge_dir());
  const auto items = load_benchmark(p.benchmark_path());
  const auto corpus = testkit::SyntheticCorpus::make();
  const auto backend = testkit::make_synthetic_backend(corpus);

  auto check_batch = [&](const std::vector<TrainingSample>& batch, const std::string& who) {
    std::map<QuestionType, int> by_type;
    std::set<std::string> ids;
    for (const auto& s : batch) {
      ++by_type[s.question_type];
      ids.insert(s.sample_id);
      o.expect(s.origin == Origin::Patch, who + ": origin is not patch");
    }
    const int open = by_type[QuestionType::OpenEnded];
    const int choice = by_type[QuestionType::SingleChoice] + by_type[QuestionType::MultipleChoice];
    const int tf = by_type[QuestionType::TrueFalse];
    o.expect(batch.size() == 20, fmt::format("{}: {} samples", who, batch.size()));
    o.expect(open == 12 && choice == 6 && tf == 2, fmt::format("{}: split {}/{}/{}", who, open, choice, tf));
    o.expect(ids.size() == batch.size(), who + ": duplicate sample ids");
  };

  // Every error of the fixture diagnosed four ways: both issue types, each
  // against two different key concepts from the item's chain.
  std::size_t diagnoses = 0;
  for (const auto& item : items) {
    ErrorSample e;
    e.item_id = item.item_id;
    e.question = item.question;
    e.true_answer = item.answer_text();
    e.predicted_answer = testkit::wrong_answer(item);
    e.question_type = std::string(to_string(item.question_type()));
    e.cid = item.cid;
    e.metadata = item.metadata;
    const L3Chain* chain = k.find_chain(item.metadata.chain_id);
    for (const IssueType type : {IssueType::ConceptGap, IssueType::CapabilityDeficit}) {
      for (std::size_t pick = 0; pick < 2; ++pick) {
        Diagnosis d;
        d.item_id = item.item_id;
        d.issue_type = type;
        const auto stmts = k.statements_of_chain(chain->chain_id);
        d.key_concept = pick == 0 ? stmts.front()->subject : stmts.back()->object;
        d.reasoning = "Chosen option contradicts the chain.";
        d.recommendation = "Rehearse it.";
        d.confidence = 0.5;
        check_batch(generate_patch(assemble_patch_context(d, e, k), *backend), item.item_id);
        ++diagnoses;
      }
    }
  }
  o.expect(diagnoses >= 100, fmt::format("only {} diagnoses", diagnoses));

  // The patches the fixture run itself produced.
  const auto patches = load_corpus(p.patches_path(1));
  std::map<std::string, std::vector<TrainingSample>> by_item;
  for (const auto& s : patches) by_item[s.source_item_id].push_back(s);
  const auto stored = load_diagnoses(p.diagnoses_path(1));
  o.expect(by_item.size() == stored.size(), "fixture patches do not cover every diagnosis");
  for (const auto& [item, batch] : by_item) check_batch(batch, "fixture " + item);

  o.detail = fmt::format("{} generated diagnoses plus {} fixture diagnoses each gave 20 = 12 open / 6 choice / 2 tf",
                         diagnoses, stored.size());
  return o;
}

Outcome criterion_4() {
  Outcome o;
  testkit::TempDir dir("accept-replay");
  const Project p = run_fixture(dir.path(), Stage::Mix);
  const auto round2 = load_corpus(p.root() / "round-1" / "mix" / "corpus.jsonl");

  // Brute-force oracle: compare every replay id against every patch id.
  auto brute_force_overlap = [](const std::vector<TrainingSample>& samples) {
    std::size_t hits = 0;
    for (const auto& r : samples) {
      if (r.origin != Origin::Replay) continue;
      for (const auto& q : samples) {
        if (q.origin != Origin::Patch || q.cid != r.cid) continue;
        for (const auto& a : r.l2_ids)
          for (const auto& b : q.l2_ids) hits += a == b ? 1 : 0;
      }
    }
    return hits;
  };
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& s : round2) {
    if (s.origin == Origin::Patch) ++counts[s.cid].first;
    if (s.origin == Origin::Replay) ++counts[s.cid].second;
  }
  o.expect(brute_force_overlap(round2) == 0, "fixture round-2 corpus has patch/replay overlap");
  for (const auto& [cid, c] : counts) o.expect(c.second > 0, "no replay samples for " + cid);

  // Randomised corpora: strict selection succeeds exactly when the oracle
  // pool is large enough, and never overlaps.
  SeededRng rng(404);
  int selected = 0, refused = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::vector<std::string> cids = {"001", "002", "003"};
    const std::size_t statements = 20 + rng.index(60);
    std::vector<TrainingSample> prior, patches;
    const std::size_t prior_size = 60 + rng.index(200);
    for (std::size_t i = 0; i < prior_size; ++i) {
      TrainingSample s;
      s.sample_id = fmt::format("s{:04d}", i);
      s.question = "q";
      s.answer = "a";
      s.cid = cids[rng.index(3)];
      const std::size_t cites = 1 + rng.index(3);
      for (std::size_t n = 0; n < cites; ++n)
        s.l2_ids.push_back(fmt::format("stmt-{}-{:03d}", s.cid, rng.index(statements)));
      std::sort(s.l2_ids.begin(), s.l2_ids.end());
      s.l2_ids.erase(std::unique(s.l2_ids.begin(), s.l2_ids.end()), s.l2_ids.end());
      prior.push_back(s);
    }
    std::map<std::string, std::int64_t> quotas;
    for (const auto& cid : cids) {
      const std::size_t n = rng.index(6);
      for (std::size_t i = 0; i < n; ++i) {
        TrainingSample s;
        s.sample_id = fmt::format("patch-{}-{}", cid, i);
        s.question = "p";
        s.answer = "a";
        s.cid = cid;
        s.origin = Origin::Patch;
        s.l2_ids = {fmt::format("stmt-{}-{:03d}", cid, rng.index(statements))};
        patches.push_back(s);
      }
      quotas[cid] = static_cast<std::int64_t>(n + rng.index(50));
    }
    bool feasible = true;
    for (const auto& cid : cids) {
      std::set<std::string> banned;
      std::int64_t have = 0, need = quotas[cid];
      for (const auto& q : patches)
        if (q.cid == cid) {
          banned.insert(q.l2_ids.begin(), q.l2_ids.end());
          --need;
        }
      for (const auto& s : prior) {
        if (s.cid != cid) continue;
        bool clash = false;
        for (const auto& id : s.l2_ids) clash = clash || banned.count(id) != 0;
        if (!clash) ++have;
      }
      feasible = feasible && have >= need;
    }
    try {
      const auto sel = select_replay(prior, patches, quotas, rng.next());
      o.expect(feasible, fmt::format("trial {}: selection succeeded on an infeasible pool", trial));
      std::vector<TrainingSample> merged = patches;
      for (const auto& [cid, chosen] : sel.replay) {
        merged.insert(merged.end(), chosen.begin(), chosen.end());
        std::int64_t npatch = 0;
        for (const auto& q : patches) npatch += q.cid == cid ? 1 : 0;
        o.expect(static_cast<std::int64_t>(chosen.size()) == quotas[cid] - npatch,
                 fmt::format("trial {}: wrong replay count for {}", trial, cid));
      }
      o.expect(brute_force_overlap(merged) == 0, fmt::format("trial {}: replay overlaps patches", trial));
      ++selected;
    } catch (const InsufficientDisjointPool&) {
      o.expect(!feasible, fmt::format("trial {}: refused a feasible pool", trial));
      ++refused;
    }
  }
  o.detail = fmt::format("fixture: {} disciplines disjoint; random: {} selections disjoint, {} short pools refused",
                         counts.size(), selected, refused);
  return o;
}

Outcome criterion_5() {
  Outcome o;
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int buckets = 1 + static_cast<int>(gen() % 20);
    std::map<std::string, std::int64_t> errors;
    std::int64_t sum = 0;
    for (int b = 0; b < buckets; ++b) {
      const std::int64_t e = gen() % 4 == 0 ? 0 : static_cast<std::int64_t>(gen() % 5000);
      errors[fmt::format("{:03d}", b + 1)] = e;
      sum += e;
    }
    if (sum == 0) errors["001"] = sum = 1;
    const auto total = static_cast<std::int64_t>(gen() % 200001);
    const auto quotas = allocate_quota(errors, total);
    std::int64_t got = 0;
    for (const auto& [cid, q] : quotas) {
      got += q;
      // |q - total*e/sum| < 1, checked exactly as |q*sum - total*e| < sum.
      const __int128 diff = static_cast<__int128>(q) * sum - static_cast<__int128>(total) * errors.at(cid);
      o.expect((diff < 0 ? -diff : diff) < sum, fmt::format("trial {}: bucket {} off by a unit or more", trial, cid));
    }
    o.expect(got == total, fmt::format("trial {}: quotas sum to {} not {}", trial, got, total));
  }

  // 30% of the errors on a 160,000-sample budget.
  const auto two = allocate_quota({{"001", 3}, {"002", 7}}, 160000);
  const auto sixteen = allocate_quota({{"001", 1500}, {"002", 2000}, {"003", 1000}, {"004", 500}}, 160000);
  o.expect(two.at("001") == 48000, fmt::format("3:7 split gave {}", two.at("001")));
  o.expect(sixteen.at("001") == 48000, fmt::format("1500/5000 share gave {}", sixteen.at("001")));
  o.detail = fmt::format("1000 random distributions sum exactly and stay within 1; 30% of 160,000 -> {}",
                         sixteen.at("001"));
  return o;
}

Outcome criterion_6() {
  Outcome o;
  const auto fx = testkit::make_scoring_fixture();
  testkit::TempDir dir("accept-score");
  save_predictions(dir.path() / "predictions.jsonl", fx.predictions);
  const auto predictions = load_predictions(dir.path() / "predictions.jsonl");
  const auto report = score(fx.items, predictions, "fixture", "20260210_220124");
  save_report(dir.path() / "report.json", report);
  const auto reloaded = load_report(dir.path() / "report.json");

  std::int64_t multi = 0, single = 0;
  for (const auto& e : report.error_samples) (e.question_type == "multiple_choice" ? multi : single) += 1;
  o.expect(report.total == 14072, fmt::format("total {}", report.total));
  o.expect(report.correct == 9268, fmt::format("correct {}", report.correct));
  o.expect(report.error_samples.size() == 4804, fmt::format("errors {}", report.error_samples.size()));
  o.expect(report.overall_accuracy == 9268.0 / 14072.0, "accuracy is not exactly 9268/14072");
  o.expect(text::percent(report.overall_accuracy, 2) == "65.86%", text::percent(report.overall_accuracy, 2));
  o.expect(reloaded.overall_accuracy == report.overall_accuracy, "accuracy changed through save/load");
  o.expect(multi == 4787 && single == 17, fmt::format("by type {} multi / {} single", multi, single));
  for (const std::string cid : {"001", "002", "003"}) {
    const auto& s = report.per_subject.at(cid);
    o.expect(s.total == 1000 && s.errors == fx.subject_errors.at(cid), "subject " + cid + " counts");
  }
  o.expect(std::abs(report.per_subject.at("001").accuracy - 0.646) < 1e-12, "subject 001 accuracy");
  o.detail = fmt::format("{} ({}/{}), {} errors: {} multi, {} single", text::percent(report.overall_accuracy, 2),
                         text::with_thousands(report.correct), text::with_thousands(report.total),
                         text::with_thousands(static_cast<std::int64_t>(report.error_samples.size())), multi, single);
  return o;
}

Outcome criterion_7() {
  Outcome o;
  o.expect(parse_multi_choice_answer("The answer is B and D.") == "B,D", "example 1");
  o.expect(parse_multi_choice_answer("B,A,B") == "A,B", "example 2");
  o.expect(parse_multi_choice_answer("I think option C. Also C.") == "C", "example 3");

  const std::vector<std::string> fragments = {
      "A",  "B",   "C",  "D",   "E",   "AB",     "BD",      "ACD",     "ABCD", "DA",   "a",      "b",
      "c",  ",",   " ",  ", ",  ".",   "and",    "or",      "(",       ")",    "\n",   "answer", "The answer is ",
      "Answer: ", "answers are ", "option is ", "I", "Option", "X", "Z9", "B2", "AA", "both", "none", ":", "-",
      "the correct options are ", "C)", "(D)", "**B**", "A/B", "ABCDE", "not C"};
  std::mt19937_64 gen(7);
  const std::vector<std::string> valid_sets = {"ABCD", "ABC", "AB", "ABCDE", "BD"};
  std::size_t nonempty = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::string raw;
    const int n = static_cast<int>(gen() % 12);
    for (int i = 0; i < n; ++i) raw += fragments[gen() % fragments.size()];
    const std::string& valid = valid_sets[gen() % valid_sets.size()];
    const std::string out = parse_multi_choice_answer(raw, valid);
    const auto parts = out.empty() ? std::vector<std::string>{} : text::split(out, ',');
    bool shape = true;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      shape = shape && parts[i].size() == 1 && valid.find(parts[i][0]) != std::string::npos;
      if (i > 0) shape = shape && parts[i - 1] < parts[i];  // strictly increasing: sorted and unique
    }
    o.expect(shape, fmt::format("'{}' -> '{}' is not a sorted unique subset of {}", raw, out, valid));
    o.expect(parse_multi_choice_answer(out, valid) == out, fmt::format("not idempotent on '{}'", raw));
    nonempty += out.empty() ? 0 : 1;
  }
  o.detail = fmt::format("3 documented examples verbatim; 10,000 fuzz cases ({} non-empty) sorted, unique, "
                         "within the valid set and idempotent",
                         nonempty);
  return o;
}

Outcome criterion_8() {
  Outcome o;
  const FormatCounts c = allocate_format_mix(10000, FormatMix{0.6, 0.3, 0.1});
  o.expect(c == FormatCounts{6000, 3000, 1000},
           fmt::format("10,000 split as {}/{}/{}", c.open_ended, c.choice, c.true_false));
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    double a = unit(gen), b = unit(gen), t = unit(gen);
    const double s = a + b + t;
    FormatMix mix{a / s, b / s, 0.0};
    mix.true_false = 1.0 - mix.open_ended - mix.choice;
    if (mix.true_false < 0) mix.true_false = 0;
    const auto total = static_cast<std::int64_t>(gen() % 100001);
    const FormatCounts got = allocate_format_mix(total, mix);
    o.expect(got.total() == total, fmt::format("trial {}: sum {} != {}", trial, got.total(), total));
    const double shares[] = {mix.open_ended, mix.choice, mix.true_false};
    const std::int64_t counts[] = {got.open_ended, got.choice, got.true_false};
    for (int i = 0; i < 3; ++i)
      o.expect(std::abs(static_cast<double>(counts[i]) - shares[i] * static_cast<double>(total)) < 1.0 + 1e-6,
               fmt::format("trial {}: format {} too far from its share", trial, i));
  }
  o.detail = fmt::format("10,000 -> {}/{}/{}; 1000 random mixes sum exactly", c.open_ended, c.choice, c.true_false);
  return o;
}

// Ranks from the definition: count of smaller values plus the mean position
// among equal ones.
std::vector<long double> oracle_ranks(const std::vector<double>& v) {
  std::vector<long double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    long double less = 0, equal = 0;
    for (const double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

long double oracle_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = oracle_ranks(a), rb = oracle_ranks(b);
  const auto n = static_cast<long double>(a.size());
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

Outcome criterion_9() {
  Outcome o;
  std::mt19937_64 gen(31);
  double worst = 0;
  int compared = 0;
  while (compared < 200) {
    const std::size_t n = 3 + gen() % 60;
    const int levels = 2 + static_cast<int>(gen() % 8);  // few levels, so plenty of ties
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(gen() % levels) * 0.5;
      b[i] = static_cast<double>(gen() % levels) - 3.0;
    }
    if (std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; }) ||
        std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; }))
      continue;
    const double got = spearman_rho(a, b);
    const long double want = oracle_spearman(a, b);
    worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(got) - want)));
    ++compared;
  }
  o.expect(worst <= 1e-12, fmt::format("max deviation {:.3e}", worst));

  std::vector<double> values;
  for (int i = 0; i < 50; ++i) values.push_back(static_cast<double>(gen() % 1000) / 10.0);
  const auto ci1 = bootstrap_ci(values, 1000, 0.95, 17);
  const auto ci2 = bootstrap_ci(values, 1000, 0.95, 17);
  o.expect(ci1 == ci2, "same seed gave different intervals");
  o.expect(ci1.first <= ci1.second, "interval bounds out of order");
  for (const double c : {0.7, -3.25, 1e6}) {
    const auto ci = bootstrap_ci(std::vector<double>(40, c), 500, 0.9, 3);
    o.expect(ci.first == c && ci.second == c, fmt::format("constant {} did not collapse", c));
  }
  o.detail = fmt::format("200 tied vectors within {:.1e} of the rank oracle (limit 1e-12); bootstrap reproducible "
                         "and constant inputs collapse",
                         worst);
  return o;
}

Outcome criterion_10() {
  Outcome o;
  std::mt19937_64 gen(1313);
  auto word = [&] { return fmt::format("w{}", gen() % 100000); };
  auto sentence = [&](std::size_t n) {
    std::vector<std::string> w;
    for (std::size_t i = 0; i < n; ++i) w.push_back(word());
    return w;
  };
  // Every (sample, item) pair sharing a 13-token window, by direct scan.
  auto oracle = [](const std::vector<BenchmarkItem>& items, const std::vector<TrainingSample>& corpus) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& s : corpus) {
      const auto st = text::whitespace_tokens(text::to_lower(s.full_text()));
      for (const auto& item : items) {
        const auto it = text::whitespace_tokens(text::to_lower(item.question));
        bool hit = false;
        for (std::size_t i = 0; !hit && i + 13 <= st.size(); ++i)
          for (std::size_t j = 0; !hit && j + 13 <= it.size(); ++j)
            hit = std::equal(st.begin() + static_cast<std::ptrdiff_t>(i), st.begin() + static_cast<std::ptrdiff_t>(i + 13),
                             it.begin() + static_cast<std::ptrdiff_t>(j));
        if (hit) out.emplace(s.sample_id, item.item_id);
      }
    }
    return out;
  };

  int trials = 0;
  for (int k = 0; k <= 20; ++k) {
    std::vector<BenchmarkItem> items;
    for (int i = 0; i < 40; ++i) {
      BenchmarkItem item;
      item.item_id = fmt::format("item-{:03d}", i);
      item.question = text::join(sentence(15 + gen() % 20), " ");
      item.options = {{"A", "a"}, {"B", "b"}, {"C", "c"}, {"D", "d"}};
      item.answer = {"A"};
      item.metadata.chain_id = "chain-" + std::to_string(i);
      items.push_back(item);
    }
    std::vector<TrainingSample> corpus;
    const std::size_t size = 200 + gen() % 801;
    for (std::size_t i = 0; i < size; ++i) {
      TrainingSample s;
      s.sample_id = fmt::format("s{:04d}", i);
      s.question = text::join(sentence(10 + gen() % 30), " ");
      s.answer = text::join(sentence(5 + gen() % 10), " ");
      s.l2_ids = {"stmt-x"};
      corpus.push_back(s);
    }
    // Plant k spans of exactly 13 tokens, some upper-cased to test folding.
    std::set<std::pair<std::string, std::string>> planted;
    while (static_cast<int>(planted.size()) < k) {
      TrainingSample& s = corpus[gen() % corpus.size()];
      const BenchmarkItem& item = items[gen() % items.size()];
      if (planted.count({s.sample_id, item.item_id}) != 0) continue;
      const auto tokens = text::split(item.question, ' ');
      const std::size_t at = gen() % (tokens.size() - 12);
      std::string span = text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(at),
                                                             tokens.begin() + static_cast<std::ptrdiff_t>(at + 13)),
                                    " ");
      if (gen() % 2 == 0) std::transform(span.begin(), span.end(), span.begin(), ::toupper);
      s.question += " " + span + " tail";
      planted.emplace(s.sample_id, item.item_id);
    }
    const auto report = check_orthogonality(items, corpus, 13);
    std::set<std::pair<std::string, std::string>> found;
    for (const auto& c : report.collisions) found.emplace(c.sample_id, c.item_id);
    const auto expected = oracle(items, corpus);
    o.expect(found == expected, fmt::format("k={}: checker found {} pairs, oracle {}", k, found.size(), expected.size()));
    o.expect(found == planted, fmt::format("k={}: found {} pairs, planted {}", k, found.size(), planted.size()));
    o.expect(report.collisions.size() == found.size(), fmt::format("k={}: duplicate collision rows", k));
    ++trials;
  }
  o.detail = fmt::format("{} corpora (k = 0..20, up to 1000 samples): planted overlaps found exactly, matching the "
                         "quadratic oracle",
                         trials);
  return o;
}

// Seeded pick written independently of SeededRng: rejection sampling on the
// raw mt19937_64 stream.
std::size_t oracle_pick(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 engine(seed);
  const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
  for (;;) {
    const std::uint64_t r = engine();
    if (r >= threshold) return static_cast<std::size_t>(r % n);
  }
}

Outcome criterion_11() {
  Outcome o;
  std::mt19937_64 gen(1111);

  int truncations = 0;
  for (int trial = 0; trial < 500; ++trial) {
    L3Chain chain;
    chain.chain_id = "chain-" + std::to_string(trial);
    const std::size_t T = 2 + gen() % 19;
    for (std::size_t i = 0; i < T; ++i) chain.steps.push_back(fmt::format("step {} of {}", i, trial));
    const std::size_t t = 1 + gen() % (T - 1);
    const L3Chain before = chain;
    const auto p = perturb_truncate(chain, t);
    o.expect(p.steps.size() == t, fmt::format("T={} t={} gave {} steps", T, t, p.steps.size()));
    o.expect(std::equal(p.steps.begin(), p.steps.end(), chain.steps.begin()), "truncation is not a prefix");
    o.expect(chain.steps == before.steps, "truncation changed its input");
    for (const std::size_t bad : {T, std::size_t{0}}) {
      bool threw = false;
      try {
        perturb_truncate(chain, bad);
      } catch (const IndexOutOfRange&) {
        threw = true;
      }
      o.expect(threw, fmt::format("T={} t={} accepted", T, bad));
    }
    ++truncations;
  }

  // A chain of distinct terms with one unique predicate per link: the end
  // concepts each have exactly one neighbor, whatever the seed.
  int forced = 0, seeded = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 3 + gen() % 6;
    L3Chain chain;
    chain.chain_id = fmt::format("chain-{}", trial);
    chain.cid = "001";
    std::vector<L2Statement> statements;
    std::vector<L1Concept> concepts;
    for (std::size_t i = 0; i < T; ++i) {
      const std::string term = fmt::format("term{}x{}", trial, i);
      chain.steps.push_back(fmt::format("The {} moves on.", term));
      L1Concept c;
      c.concept_id = fmt::format("concept-{}-{}", trial, i);
      c.term = term;
      c.type = "Quantity";
      c.definition = "d";
      c.cids = {"001"};
      concepts.push_back(c);
    }
    for (std::size_t i = 0; i + 1 < T; ++i) {
      L2Statement s{fmt::format("stmt-{}-{:03d}", trial, i), chain.chain_id, concepts[i].term,
                    fmt::format("links{}", i), concepts[i + 1].term, "q"};
      concepts[i].parent_statement_ids.push_back(s.statement_id);
      concepts[i + 1].parent_statement_ids.push_back(s.statement_id);
      statements.push_back(s);
    }
    const KnowledgeStructure k({chain}, statements, concepts);
    for (const std::size_t step : {std::size_t{0}, T - 1}) {
      const std::string expected = step == 0 ? concepts[1].concept_id : concepts[T - 2].concept_id;
      for (int s = 0; s < 5; ++s) {
        const auto p = perturb_substitute(chain, step, k, gen());
        o.expect(p.detail.at("substitute_concept_id") == expected, "forced substitution picked another concept");
        o.expect(p.steps[step].find(k.find_concept(expected)->term) != std::string::npos, "step text not rewritten");
        for (std::size_t i = 0; i < T; ++i)
          if (i != step) o.expect(p.steps[i] == chain.steps[i], "another step changed");
        ++forced;
      }
    }

    // Hub concept with ten neighbors: the pick matches the independent oracle.
    L3Chain hub_chain;
    hub_chain.chain_id = "chain-hub";
    hub_chain.steps = {"The hubterm starts.", "It ends."};
    std::vector<L1Concept> hub_concepts;
    std::vector<L2Statement> hub_statements;
    L1Concept hub{"concept-hub", "hubterm", "Quantity", "d", {}, {"001"}};
    for (int n = 0; n < 10; ++n) {
      const std::string sid = fmt::format("stmt-hub-{:03d}", n);
      hub_statements.push_back({sid, "chain-hub", "hubterm", fmt::format("rel{}", n), fmt::format("leaf{}", n), "q"});
      hub.parent_statement_ids.push_back(sid);
      hub_concepts.push_back({fmt::format("concept-leaf-{}", n), fmt::format("leaf{}", n), "Quantity", "d", {sid}, {"001"}});
    }
    hub_concepts.push_back(hub);
    const KnowledgeStructure hk({hub_chain}, hub_statements, hub_concepts);
    const auto neighbors = neighbor_set(hk, "concept-hub");
    const std::uint64_t seed = gen();
    const auto p = perturb_substitute(hub_chain, 0, hk, seed);
    o.expect(neighbors.size() == 10, "hub does not have ten neighbors");
    o.expect(p.detail.at("substitute_concept_id") == neighbors[oracle_pick(seed, neighbors.size())],
             "seeded pick disagrees with the oracle");
    ++seeded;
  }

  // Inversion twice through a pair returns the original predicate.
  InverseLexicon lexicon = InverseLexicon::defaults();
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int i = 0; i < 50; ++i) {
    pairs.emplace_back(fmt::format("fwd{}", i), fmt::format("rev{}", i));
    lexicon.add_pair(pairs.back().first, pairs.back().second);
  }
  for (const auto& [a, b] : lexicon.entries()) pairs.emplace_back(a, b);
  int involutions = 0;
  for (const auto& [a, b] : pairs) {
    L2Statement s{"stmt-1-001", "chain-1", "subject x", a, "object y", "quote"};
    const L2Statement once = perturb_invert(s, lexicon);
    const L2Statement twice = perturb_invert(once, lexicon);
    o.expect(once.predicate != a, "inversion left " + a + " unchanged");
    o.expect(twice.predicate == a, fmt::format("{} -> {} -> {}", a, once.predicate, twice.predicate));
    o.expect(once.subject == s.subject && once.object == s.object && once.source_quote == s.source_quote &&
                 once.parent_chain_id == s.parent_chain_id,
             "inversion touched other fields");
    o.expect(once.statement_id == s.statement_id + "-inv", "inverted id lacks the -inv suffix");
    ++involutions;
  }
  o.detail = fmt::format("{} truncations, {} forced and {} seeded substitutions, {} lexicon involutions", truncations,
                         forced, seeded, involutions);
  return o;
}

struct Criterion {
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {"end-to-end determinism on the fixture project", criterion_1},
      {"zero orphans after extraction; injected orphans reported", criterion_2},
      {"every diagnosis yields 20 patches split 12/6/2", criterion_3},
      {"replay disjoint from patches per discipline", criterion_4},
      {"quota allocation sums exactly and stays within 1", criterion_5},
      {"scoring fixture reproduces 65.86% (9,268/14,072), 4,804 errors", criterion_6},
      {"answer parser properties and documented examples", criterion_7},
      {"format mix 10,000 -> 6000/3000/1000 and sum-exactness", criterion_8},
      {"spearman rank oracle and bootstrap determinism", criterion_9},
      {"orthogonality checker against a quadratic oracle", criterion_10},
      {"perturbation operator properties", criterion_11},
  };
  return list;
}

bool run_one(std::size_t n) {
  const Criterion& c = criteria()[n - 1];
  Outcome o;
  const auto start = Timer::now();
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o.pass = false;
    o.failures.push_back(std::string("unexpected exception: ") + e.what());
  }
  const double ms = std::chrono::duration<double, std::milli>(Timer::now() - start).count();
  std::cout << fmt::format("criterion {:>2} {}: {} [{}] ({:.0f} ms)\n", n, o.pass ? "PASS" : "FAIL", c.title, o.detail, ms);
  for (const auto& f : o.failures) std::cout << "    " << f << "\n";
  return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const std::size_t n = std::stoul(argv[i]);
    if (n < 1 || n > criteria().size()) {
      std::cerr << "criterion must be between 1 and " << criteria().size() << "\n";
      return 2;
    }
    selected.push_back(n);
  }
  if (selected.empty())
    for (std::size_t n = 1; n <= criteria().size(); ++n) selected.push_back(n);
  bool ok = true;
  for (const std::size_t n : selected) ok = run_one(n) && ok;
  return ok ? 0 : 1;
}
