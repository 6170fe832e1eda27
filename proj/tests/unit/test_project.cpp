#include <doctest.h>

#include <fstream>

#include "dataloop/json_payload.hpp"
#include "dataloop/jsonl.hpp"
#include "dataloop/project.hpp"
#include "dataloop/prompt.hpp"
#include "dataloop/testkit/testkit.hpp"

using namespace dataloop;
namespace fs = std::filesystem;

namespace {

RunOptions replay_run(LlmBackend& backend) {
  RunOptions run;
  run.backend = &backend;
  run.clock = testkit::fixed_time;
  run.predictions = testkit::fixture_project_dir() / "predictions" / "round-1.jsonl";
  return run;
}

// Flips the model's keep flag on every triage answer.
class ContraryTriage final : public LlmBackend {
 public:
  explicit ContraryTriage(LlmBackend& inner) : inner_(inner) {}
  std::string complete(const PromptRequest& r) override {
    std::string out = inner_.complete(r);
    if (r.tag != tags::kTriage) return out;
    json j = extract_json_payload(out);
    j["keep"] = !j.at("keep").get<bool>();
    return j.dump();
  }

 private:
  LlmBackend& inner_;
};

}  // namespace

TEST_SUITE("project") {
  TEST_CASE("stage names") {
    for (const Stage s : kStages) CHECK(parse_stage(to_string(s)) == s);
    CHECK_THROWS_AS(parse_stage("train"), ConfigError);
    CHECK(to_string(StageStatus::Failed) == "failed");
    CHECK(parse_stage_status("running") == StageStatus::Running);
  }

  TEST_CASE("time formats") {
    const auto t = std::chrono::system_clock::time_point(std::chrono::seconds(1770760884));
    CHECK(iso_time(t) == "2026-02-10T22:01:24Z");
    CHECK(compact_time(t) == "20260210_220124");
    CHECK(iso_time(std::chrono::system_clock::time_point{}) == "1970-01-01T00:00:00Z");
  }

  TEST_CASE("init and open") {
    testkit::TempDir dir("proj");
    const fs::path root = dir.path() / "p";
    const Project p = Project::init(root, "", 99);
    CHECK(p.manifest().seed == 99);
    CHECK(p.manifest().round == 1);
    CHECK(p.config().seed == 99);
    CHECK(fs::exists(root / "project.conf"));
    CHECK(fs::exists(root / "manifest.json"));
    CHECK(fs::is_directory(root / "corpus"));
    for (const Stage s : kStages) CHECK(p.manifest().stages.at(s).status == StageStatus::Pending);
    CHECK(p.runnable(Stage::Curate));
    CHECK(!p.runnable(Stage::Extract));
    CHECK(p.verify().empty());
    CHECK_THROWS_AS(Project::init(root), ConfigError);
    CHECK_THROWS_AS(Project::open(dir.path() / "missing"), ConfigError);

    const Project q = Project::open(root);
    CHECK(q.manifest().seed == 99);
    CHECK(to_json(q.manifest()).dump() == to_json(p.manifest()).dump());
    // The manifest never records the absolute root.
    CHECK(read_file(root / "manifest.json").find(root.string()) == std::string::npos);

    CHECK(q.training_corpus_path(1) == q.initial_corpus_path());
    CHECK(q.training_corpus_path(3) == root / "round-2" / "mix" / "corpus.jsonl");
  }

  TEST_CASE("stages run in order") {
    testkit::TempDir dir("proj");
    ReplayBackend backend(testkit::stage_fixture_project(dir.path()));
    Project p = Project::open(dir.path());
    const auto run = replay_run(backend);
    CHECK_THROWS_AS(p.run_stage(Stage::Bench, run), PredecessorIncomplete);

    RunOptions no_model = run;
    no_model.backend = nullptr;
    CHECK_THROWS_AS(p.run_stage(Stage::Curate, no_model), StageFailed);
    CHECK(p.manifest().stages.at(Stage::Curate).status == StageStatus::Failed);
    CHECK(!p.manifest().stages.at(Stage::Curate).error.empty());

    std::vector<std::pair<Stage, double>> progress;
    RunOptions tracked = run;
    tracked.progress = [&](Stage s, double f) { progress.emplace_back(s, f); };
    p.run_stage(Stage::Curate, tracked);
    const auto& rec = p.manifest().stages.at(Stage::Curate);
    CHECK(rec.status == StageStatus::Done);
    CHECK(rec.round == 1);
    CHECK(rec.started == "2026-02-10T22:01:24Z");
    CHECK(!rec.artifacts.empty());
    CHECK(rec.content_hash == artifact_hash(p.root(), rec.artifacts));
    REQUIRE(progress.size() >= 2);
    CHECK(progress.front().second == 0.0);
    CHECK(progress.back().second == 1.0);
    CHECK(!fs::exists(p.root() / ".lock"));

    // Triage rows carry the recomputed rule.
    for (const auto& row : read_jsonl(p.root() / "round-1" / "curation" / "triage.jsonl")) {
      CHECK(row.contains("keep_rule"));
      CHECK(row["keep_inconsistent"] == false);
    }

    // Rerunning an earlier stage sends later ones back to pending.
    p.run_stage(Stage::Extract, run);
    CHECK(p.manifest().stages.at(Stage::Extract).status == StageStatus::Done);
    p.run_stage(Stage::Curate, run);
    CHECK(p.manifest().stages.at(Stage::Extract).status == StageStatus::Pending);
  }

  TEST_CASE("curation keeps by the rule, not the model's flag") {
    testkit::TempDir a("proj-a"), b("proj-b");
    ReplayBackend plain(testkit::stage_fixture_project(a.path()));
    ReplayBackend inner(testkit::stage_fixture_project(b.path()));
    ContraryTriage contrary(inner);

    Project pa = Project::open(a.path());
    Project pb = Project::open(b.path());
    pa.run_stage(Stage::Curate, replay_run(plain));
    pb.run_stage(Stage::Curate, replay_run(contrary));

    const auto rows = read_jsonl(pb.root() / "round-1" / "curation" / "triage.jsonl");
    REQUIRE(!rows.empty());
    for (const auto& row : rows) {
      CHECK(row["keep_inconsistent"] == true);
      CHECK(row["keep"] != row["keep_rule"]);
    }
    CHECK(read_file(pa.chunks_path()) == read_file(pb.chunks_path()));
  }

  TEST_CASE("verify detects tampering and config edits") {
    testkit::TempDir dir("proj");
    ReplayBackend backend(testkit::stage_fixture_project(dir.path()));
    Project p = Project::open(dir.path());
    p.run_stage(Stage::Curate, replay_run(backend));
    CHECK(p.verify().empty());

    {
      std::ofstream out(p.chunks_path(), std::ios::app);
      out << "\n";
    }
    CHECK(p.verify() == std::vector<std::string>{"curate"});
    fs::remove(p.chunks_path());
    CHECK(p.verify() == std::vector<std::string>{"curate"});

    {
      std::ofstream out(p.root() / "project.conf", std::ios::app);
      out << "# edited\n";
    }
    const auto v = Project::open(p.root()).verify();
    CHECK(v == std::vector<std::string>{"curate", "config"});
  }

  TEST_CASE("lock") {
    testkit::TempDir dir("lock");
    {
      ProjectLock lock(dir.path());
      CHECK(fs::exists(dir.path() / ".lock"));
      CHECK_THROWS_AS(ProjectLock(dir.path()), ProjectLocked);
    }
    CHECK(!fs::exists(dir.path() / ".lock"));

    // A lock whose owner has exited is taken over.
    atomic_write(dir.path() / ".lock", "2147483646\n");
    { ProjectLock lock(dir.path()); }
    CHECK(!fs::exists(dir.path() / ".lock"));

    const fs::path root = dir.path() / "p";
    ReplayBackend backend(testkit::stage_fixture_project(root));
    Project p = Project::open(root);
    ProjectLock held(root);
    CHECK_THROWS_AS(p.run_stage(Stage::Curate, replay_run(backend)), ProjectLocked);
  }

  TEST_CASE("mix closes the round") {
    testkit::TempDir dir("proj");
    ReplayBackend backend(testkit::stage_fixture_project(dir.path()));
    Project p = Project::open(dir.path());
    const auto run = replay_run(backend);
    for (const Stage s : kStages) {
      p.run_stage(s, run);
      if (s == Stage::Mix) {
        CHECK(p.manifest().round == 2);
        CHECK(p.manifest().stages.at(Stage::Mix).round == 1);
        for (const Stage reset : {Stage::Eval, Stage::Diagnose, Stage::Patch})
          CHECK(p.manifest().stages.at(reset).status == StageStatus::Pending);
        CHECK(p.runnable(Stage::Report));
        CHECK(!p.runnable(Stage::Diagnose));
      }
    }
    CHECK(fs::exists(p.report_path(1)));
    CHECK(fs::exists(p.diagnoses_path(1)));
    CHECK(fs::exists(p.patches_path(1)));
    CHECK(fs::exists(p.training_corpus_path(2)));
    CHECK(fs::exists(p.round_dir(1) / "report.md"));
    CHECK(p.verify().empty());

    const auto m = manifest_from_json(json::parse(read_file(p.root() / "manifest.json")), p.root());
    CHECK(m.round == 2);
    CHECK(m.stages.at(Stage::Report).status == StageStatus::Done);
  }
}
