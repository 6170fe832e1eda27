// fixture_forge: regenerates the bundled fixture project.
//
// Runs the whole loop once against the synthetic model with a recording
// backend in front of it, then keeps only the inputs a replay run needs:
// project.conf, corpus/documents.jsonl, predictions/round-1.jsonl and the
// recorded fixtures.json.

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dataloop/benchmark.hpp"
#include "dataloop/jsonl.hpp"
#include "dataloop/project.hpp"
#include "dataloop/testkit/testkit.hpp"

namespace fs = std::filesystem;
using namespace dataloop;

namespace {

const char* const kConfig =
    "# Fixture project: three disciplines, ten gated chunks each.\n"
    "seed = 7\n"
    "sft.per_discipline_quota = 60\n"
    "sft.window = 8\n"
    "sft.stride = 8\n"
    "eval.model_name = fixture-model\n"
    "debug.replay_policy = strict\n";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regenerate the fixture project"};
  fs::path out = fs::path(DATALOOP_FIXTURE_DIR) / "project";
  app.add_option("--out", out, "Destination directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto corpus = testkit::SyntheticCorpus::make();
    const auto model = testkit::make_synthetic_backend(corpus);
    RecordingBackend recorder(*model);

    testkit::TempDir work("forge");
    const fs::path root = work.path() / "project";
    Project project = Project::init(root, kConfig);
    std::vector<ordered_json> docs;
    for (const auto& d : corpus.documents())
      docs.push_back(ordered_json{{"doc_id", d.doc_id},
                                  {"title", d.title},
                                  {"summary", d.summary},
                                  {"text", d.text},
                                  {"cid", d.cid}});
    write_jsonl(project.documents_path(), docs);

    RunOptions run;
    run.backend = &recorder;
    run.clock = testkit::fixed_time;
    for (const Stage s : {Stage::Curate, Stage::Extract, Stage::Bench, Stage::Synth}) project.run_stage(s, run);

    const auto items = load_benchmark(project.benchmark_path());
    const fs::path predictions = work.path() / "round-1.jsonl";
    save_predictions(predictions, testkit::plant_predictions(items, {{"001", 3}, {"006", 2}, {"007", 1}}));
    run.predictions = predictions;
    for (const Stage s : {Stage::Eval, Stage::Diagnose, Stage::Patch, Stage::Mix, Stage::Report})
      project.run_stage(s, run);

    fs::create_directories(out / "corpus");
    fs::create_directories(out / "predictions");
    atomic_write(out / "project.conf", kConfig);
    fs::copy_file(project.documents_path(), out / "corpus" / "documents.jsonl", fs::copy_options::overwrite_existing);
    fs::copy_file(predictions, out / "predictions" / "round-1.jsonl", fs::copy_options::overwrite_existing);
    recorder.recorded().save(out / "fixtures.json");

    fmt::print("wrote {} ({} documents, {} items, {} recorded responses)\n", out.string(), docs.size(), items.size(),
               recorder.recorded().size());
  } catch (const std::exception& e) {
    std::cerr << "fixture_forge: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
