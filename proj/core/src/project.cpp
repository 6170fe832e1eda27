#include "dataloop/project.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include <fmt/format.h>

#include "dataloop/benchmark.hpp"
#include "dataloop/curation.hpp"
#include "dataloop/debugger.hpp"
#include "dataloop/evaluator.hpp"
#include "dataloop/extraction.hpp"
#include "dataloop/hashing.hpp"
#include "dataloop/knowledge.hpp"
#include "dataloop/rng.hpp"
#include "dataloop/sft.hpp"

namespace fs = std::filesystem;

namespace dataloop {
namespace {

const char* const kStageNames[] = {"curate", "extract", "bench", "synth", "eval", "diagnose", "patch", "mix", "report"};

std::size_t stage_index(Stage s) { return static_cast<std::size_t>(s); }

ordered_json retention_json(const RetentionTable& t) {
  return ordered_json{{"stages", t.stages}, {"counts", t.counts}, {"retention", t.retention}};
}

LlmBackend& need_backend(const RunOptions& o, Stage s) {
  if (o.backend == nullptr) throw ConfigError(std::string(to_string(s)) + " needs a model backend");
  return *o.backend;
}

void report_progress(const RunOptions& o, Stage s, double fraction) {
  if (o.progress) o.progress(s, fraction);
}

std::vector<TrainingSample> load_patches(const fs::path& path) { return load_corpus(path); }

}  // namespace

std::string_view to_string(Stage s) { return kStageNames[stage_index(s)]; }

Stage parse_stage(std::string_view s) {
  for (Stage st : kStages)
    if (to_string(st) == s) return st;
  throw ConfigError("unknown stage '" + std::string(s) + "'");
}

std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::Pending: return "pending";
    case StageStatus::Running: return "running";
    case StageStatus::Done: return "done";
    case StageStatus::Failed: return "failed";
  }
  return "pending";
}

StageStatus parse_stage_status(std::string_view s) {
  for (StageStatus st : {StageStatus::Pending, StageStatus::Running, StageStatus::Done, StageStatus::Failed})
    if (to_string(st) == s) return st;
  throw SchemaInvalid("unknown stage status '" + std::string(s) + "'");
}

ordered_json to_json(const ProjectManifest& m) {
  ordered_json stages = ordered_json::object();
  for (Stage s : kStages) {
    const auto it = m.stages.find(s);
    const StageRecord r = it == m.stages.end() ? StageRecord{} : it->second;
    stages[std::string(to_string(s))] = ordered_json{{"status", to_string(r.status)},
                                                     {"round", r.round},
                                                     {"artifacts", r.artifacts},
                                                     {"content_hash", r.content_hash},
                                                     {"started", r.started},
                                                     {"finished", r.finished},
                                                     {"error", r.error}};
  }
  return ordered_json{{"round", m.round}, {"seed", m.seed}, {"config_hash", m.config_hash}, {"stages", stages}};
}

ProjectManifest manifest_from_json(const json& j, const fs::path& root) {
  ProjectManifest m;
  m.project_root = root;
  try {
    m.round = j.at("round").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    for (Stage s : kStages) {
      StageRecord r;
      const std::string name(to_string(s));
      if (j.at("stages").contains(name)) {
        const json& x = j.at("stages").at(name);
        r.status = parse_stage_status(x.at("status").get<std::string>());
        r.round = x.value("round", 0);
        r.artifacts = x.value("artifacts", std::vector<std::string>{});
        r.content_hash = x.value("content_hash", "");
        r.started = x.value("started", "");
        r.finished = x.value("finished", "");
        r.error = x.value("error", "");
      }
      m.stages[s] = r;
    }
  } catch (const json::exception& e) {
    throw SchemaInvalid(std::string("manifest: ") + e.what());
  }
  if (m.round < 1) throw SchemaInvalid("manifest round must be at least 1");
  return m;
}

std::string artifact_hash(const fs::path& root, const std::vector<std::string>& artifacts) {
  std::string digest_input;
  for (const auto& rel : artifacts) digest_input += rel + "\t" + sha256_file((root / rel).string()) + "\n";
  return sha256_hex(digest_input);
}

// ---------------------------------------------------------------------------

ProjectLock::ProjectLock(const fs::path& root) : path_(root / ".lock") {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const auto written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      if (written != static_cast<ssize_t>(pid.size())) {
        fs::remove(path_);
        throw IoError("cannot write " + path_.string());
      }
      return;
    }
    if (errno != EEXIST) throw IoError("cannot create " + path_.string());

    std::ifstream in(path_);
    long owner = 0;
    in >> owner;
    if (owner > 0 && ::kill(static_cast<pid_t>(owner), 0) == -1 && errno == ESRCH) {
      std::error_code ec;
      fs::remove(path_, ec);
      continue;
    }
    throw ProjectLocked(fmt::format("{} is locked by process {}", root.string(), owner));
  }
  throw ProjectLocked(root.string() + " is locked");
}

ProjectLock::~ProjectLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

Clock default_clock() {
  return []() -> std::chrono::system_clock::time_point {
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
      long long seconds = 0;
      const std::string_view v(epoch);
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), seconds);
      if (ec == std::errc() && ptr == v.data() + v.size())
        return std::chrono::system_clock::time_point(std::chrono::seconds(seconds));
    }
    return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  };
}

namespace {
std::tm utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  ::gmtime_r(&tt, &tm);
  return tm;
}
}  // namespace

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::tm tm = utc(t);
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec);
}

std::string compact_time(std::chrono::system_clock::time_point t) {
  const std::tm tm = utc(t);
  return fmt::format("{:04d}{:02d}{:02d}_{:02d}{:02d}{:02d}", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                     tm.tm_min, tm.tm_sec);
}

// ---------------------------------------------------------------------------

Project::Project(fs::path root, ProjectConfig config, ProjectManifest manifest)
    : root_(std::move(root)), config_(std::move(config)), manifest_(std::move(manifest)) {}

Project Project::init(const fs::path& root, const std::string& config_text, std::optional<std::uint64_t> seed) {
  if (fs::exists(root / "manifest.json")) throw ConfigError(root.string() + " already holds a project");
  ProjectConfig cfg = ProjectConfig::parse(config_text);
  std::string text = config_text.empty() ? cfg.render() : config_text;
  if (seed && *seed != cfg.seed) {
    cfg.seed = *seed;
    text = cfg.render();
  }
  fs::create_directories(root / "corpus");
  atomic_write(root / "project.conf", text);

  ProjectManifest m;
  m.project_root = root;
  m.seed = cfg.seed;
  m.config_hash = sha256_hex(text);
  for (Stage s : kStages) m.stages[s] = StageRecord{};
  Project p(root, std::move(cfg), std::move(m));
  p.save_manifest();
  return p;
}

Project Project::open(const fs::path& root) {
  if (!fs::exists(root / "manifest.json")) throw ConfigError(root.string() + " is not a project (no manifest.json)");
  ProjectConfig cfg = ProjectConfig::load(root / "project.conf");
  json j;
  try {
    j = json::parse(read_file(root / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw SchemaInvalid(std::string("manifest.json: ") + e.what());
  }
  return Project(root, std::move(cfg), manifest_from_json(j, root));
}

void Project::save_manifest() const { write_json(root_ / "manifest.json", to_json(manifest_)); }

fs::path Project::round_dir(int round) const { return root_ / fmt::format("round-{}", round); }

fs::path Project::training_corpus_path(int round) const {
  if (round <= 1) return initial_corpus_path();
  return round_dir(round - 1) / "mix" / "corpus.jsonl";
}

std::vector<std::string> Project::verify() const {
  std::vector<std::string> out;
  for (Stage s : kStages) {
    const StageRecord& r = manifest_.stages.at(s);
    if (r.status != StageStatus::Done) continue;
    try {
      if (artifact_hash(root_, r.artifacts) != r.content_hash) out.emplace_back(to_string(s));
    } catch (const IoError&) {
      out.emplace_back(to_string(s));
    }
  }
  if (sha256_hex(read_file(root_ / "project.conf")) != manifest_.config_hash) out.emplace_back("config");
  return out;
}

bool Project::runnable(Stage s) const {
  const std::size_t i = stage_index(s);
  return i == 0 || manifest_.stages.at(kStages[i - 1]).status == StageStatus::Done;
}

void Project::run_stage(Stage s, const RunOptions& options) {
  ProjectLock lock(root_);
  // Another writer may have moved the project on since this object was opened.
  *this = Project::open(root_);
  if (!runnable(s))
    throw PredecessorIncomplete(fmt::format("{} needs {} to be done first", to_string(s),
                                            to_string(kStages[stage_index(s) - 1])));

  const std::string conf_text = read_file(root_ / "project.conf");
  manifest_.config_hash = sha256_hex(conf_text);
  for (std::size_t i = stage_index(s); i < kStages.size(); ++i) {
    StageRecord& r = manifest_.stages[kStages[i]];
    r.status = StageStatus::Pending;
    r.error.clear();
  }
  save_manifest();

  StageRecord& record = manifest_.stages[s];
  record.started = iso_time(options.clock());
  record.round = manifest_.round;
  std::vector<std::string> artifacts;
  try {
    report_progress(options, s, 0.0);
    artifacts = execute(s, options);
  } catch (const Error& e) {
    const bool validation = dynamic_cast<const SchemaInvalid*>(&e) != nullptr ||
                            dynamic_cast<const ValidationFailed*>(&e) != nullptr;
    record.status = StageStatus::Failed;
    record.error = e.what();
    record.finished = iso_time(options.clock());
    save_manifest();
    throw StageFailed(std::string(to_string(s)), e.what(), validation);
  } catch (const std::exception& e) {
    record.status = StageStatus::Failed;
    record.error = e.what();
    record.finished = iso_time(options.clock());
    save_manifest();
    throw StageFailed(std::string(to_string(s)), e.what(), false);
  }

  record.status = StageStatus::Done;
  record.artifacts = artifacts;
  record.content_hash = artifact_hash(root_, artifacts);
  record.finished = iso_time(options.clock());
  if (s == Stage::Mix) {
    ++manifest_.round;
    for (Stage reset : {Stage::Eval, Stage::Diagnose, Stage::Patch}) {
      StageRecord& r = manifest_.stages[reset];
      r.status = StageStatus::Pending;
    }
  }
  save_manifest();
  report_progress(options, s, 1.0);
}

std::vector<std::string> Project::execute(Stage s, const RunOptions& options) {
  const int round = manifest_.round;
  const std::uint64_t seed = config_.seed;
  std::vector<std::string> written;
  const auto rel = [&](const fs::path& p) {
    written.push_back(p.lexically_relative(root_).generic_string());
    return p;
  };

  switch (s) {
    case Stage::Curate: {
      LlmBackend& backend = need_backend(options, s);
      std::vector<Document> docs;
      for (const auto& j : read_jsonl(documents_path())) docs.push_back(document_from_json(j));
      std::vector<ordered_json> triage_rows, score_rows, chunk_rows;
      std::int64_t kept_docs = 0, chunk_total = 0;
      for (std::size_t d = 0; d < docs.size(); ++d) {
        const Document& doc = docs[d];
        const DocumentTriage t = triage_document(doc, backend);
        const bool keep = check_keep_rule(t);
        ordered_json row = to_json(t);
        row["keep_rule"] = keep;
        row["keep_inconsistent"] = keep != t.keep;
        triage_rows.push_back(std::move(row));
        report_progress(options, s, static_cast<double>(d) / static_cast<double>(docs.size()));
        if (!keep) continue;
        ++kept_docs;
        for (const Chunk& c : split_fixed_tokens(doc, doc.cid, static_cast<std::size_t>(config_.chunk_tokens),
                                                 static_cast<std::size_t>(config_.chunk_overlap))) {
          ++chunk_total;
          const ChunkScore score = score_chunk(c, backend);
          score_rows.push_back(to_json(score));
          if (passes_chunk_gate(score, config_.tau)) chunk_rows.push_back(to_json(c));
        }
      }
      const fs::path dir = round_dir(1) / "curation";
      write_jsonl(rel(dir / "triage.jsonl"), triage_rows);
      write_jsonl(rel(dir / "scores.jsonl"), score_rows);
      write_jsonl(rel(chunks_path()), chunk_rows);
      const auto doc_table = retention_stats({{"documents", static_cast<std::int64_t>(docs.size())}, {"kept", kept_docs}});
      const auto chunk_table =
          retention_stats({{"chunks", chunk_total}, {"gated", static_cast<std::int64_t>(chunk_rows.size())}});
      write_json(rel(dir / "retention.json"),
                 ordered_json{{"documents", retention_json(doc_table)}, {"chunks", retention_json(chunk_table)}});
      break;
    }

    case Stage::Extract: {
      std::vector<Chunk> chunks;
      for (const auto& j : read_jsonl(chunks_path())) chunks.push_back(chunk_from_json(j));
      ExtractionResult result = run_extraction(std::move(chunks), need_backend(options, s), config_.extraction);
      save_knowledge(knowledge_dir(), result.structure);
      for (const char* f : {"chains.jsonl", "statements.jsonl", "concepts.jsonl"}) rel(knowledge_dir() / f);

      std::vector<ordered_json> log;
      for (const auto& e : result.log)
        log.push_back(ordered_json{{"chunk_id", e.chunk_id}, {"status", e.status}, {"detail", e.detail}});
      write_jsonl(rel(knowledge_dir() / "extraction_log.jsonl"), log);

      ordered_json balance = ordered_json::array();
      for (const auto& b : result.balance)
        balance.push_back(ordered_json{
            {"kind", b.kind == BalanceViolation::Kind::SingleChain ? "single_chain" : "top_three"},
            {"chain_ids", b.chain_ids},
            {"share", b.share}});
      const ConnectivityStats stats = connectivity_stats(result.structure);
      write_json(rel(knowledge_dir() / "extraction_report.json"),
                 ordered_json{{"warnings", result.warnings},
                              {"balance", balance},
                              {"connectivity",
                               ordered_json{{"chains", stats.chains},
                                            {"statements", stats.statements},
                                            {"concepts", stats.concepts},
                                            {"nodes", stats.nodes},
                                            {"components", stats.components},
                                            {"largest_component", stats.largest_component},
                                            {"lcc_ratio", stats.lcc_ratio}}}});
      break;
    }

    case Stage::Bench: {
      const KnowledgeStructure k = load_knowledge(knowledge_dir());
      const BenchmarkBuild build = build_benchmark(k, need_backend(options, s), seed, config_.bench);
      save_benchmark(rel(benchmark_path()), build.items);
      ordered_json failures = ordered_json::array();
      for (const auto& [chain, error] : build.failures)
        failures.push_back(ordered_json{{"chain_id", chain}, {"error", error}});
      write_json(rel(benchmark_path().parent_path() / "failures.json"), failures);
      break;
    }

    case Stage::Synth: {
      const KnowledgeStructure k = load_knowledge(knowledge_dir());
      const SynthesisResult result = synthesize_corpus(k, need_backend(options, s), config_.sft);
      save_corpus(rel(initial_corpus_path()), result.samples);
      const fs::path dir = initial_corpus_path().parent_path();
      save_export(rel(dir / "export.jsonl"), result.samples);

      ordered_json planned = ordered_json::object(), coverage = ordered_json::object();
      for (const auto& [cid, c] : result.planned)
        planned[cid] = ordered_json{{"open_ended", c.open_ended}, {"choice", c.choice}, {"true_false", c.true_false}};
      for (const auto& [cid, c] : result.coverage)
        coverage[cid] = ordered_json{{"covered_fraction", c.covered_fraction},
                                     {"below_target", c.below_target},
                                     {"uncovered_ids", c.uncovered_ids}};
      write_json(rel(dir / "synthesis.json"),
                 ordered_json{{"planned", planned}, {"coverage", coverage}, {"warnings", result.warnings}});

      const OrthogonalityReport ortho = check_orthogonality(load_benchmark(benchmark_path()), result.samples,
                                                            config_.bench.ngram);
      ordered_json collisions = ordered_json::array();
      for (const auto& c : ortho.collisions)
        collisions.push_back(ordered_json{{"sample_id", c.sample_id}, {"item_id", c.item_id}, {"span", c.span}});
      write_json(rel(dir / "orthogonality.json"), ordered_json{{"ngram", config_.bench.ngram},
                                                               {"collisions", collisions},
                                                               {"structural_issues", ortho.structural_issues}});
      break;
    }

    case Stage::Eval: {
      const auto benchmark = load_benchmark(benchmark_path());
      const fs::path dir = round_dir(round) / "eval";
      const fs::path stored = dir / "predictions.jsonl";
      std::vector<Prediction> predictions;
      if (options.predictions) predictions = load_predictions(*options.predictions);
      else if (fs::exists(stored)) predictions = load_predictions(stored);
      else if (options.backend != nullptr) predictions = run_inference(benchmark, *options.backend);
      else throw ConfigError("eval needs a predictions file or a backend to run inference");
      save_predictions(rel(stored), predictions);
      const EvaluationReport report =
          score(benchmark, predictions, config_.eval_model_name, compact_time(options.clock()));
      save_report(rel(report_path(round)), report);
      break;
    }

    case Stage::Diagnose: {
      LlmBackend& backend = need_backend(options, s);
      const EvaluationReport report = load_report(report_path(round));
      DiagnosisRun run;
      for (std::size_t i = 0; i < report.error_samples.size(); ++i) {
        const ErrorSample& e = report.error_samples[i];
        try {
          run.diagnoses.push_back(diagnose(e, backend, config_.diagnose_attempts));
        } catch (const SchemaInvalid& ex) {
          run.dropped.emplace_back(e.item_id, ex.what());
        }
        report_progress(options, s, static_cast<double>(i + 1) / static_cast<double>(report.error_samples.size()));
      }
      save_diagnoses(rel(diagnoses_path(round)), run.diagnoses);
      ordered_json dropped = ordered_json::array();
      for (const auto& [item, error] : run.dropped) dropped.push_back(ordered_json{{"item_id", item}, {"error", error}});
      const fs::path dir = diagnoses_path(round).parent_path();
      write_json(rel(dir / "dropped.json"), dropped);
      write_json(rel(dir / "patterns.json"), to_json(aggregate_patterns(run.diagnoses, report.error_samples)));
      break;
    }

    case Stage::Patch: {
      LlmBackend& backend = need_backend(options, s);
      const KnowledgeStructure k = load_knowledge(knowledge_dir());
      const EvaluationReport report = load_report(report_path(round));
      const auto diagnoses = load_diagnoses(diagnoses_path(round));
      std::map<std::string, const ErrorSample*> errors;
      for (const auto& e : report.error_samples) errors.emplace(e.item_id, &e);

      PatchConfig pc;
      pc.batch_size = config_.patch_size;
      pc.mix = config_.sft.mix;
      pc.attempts = config_.patch_attempts;
      pc.round = round;
      std::vector<TrainingSample> patches;
      ordered_json failures = ordered_json::array();
      for (std::size_t i = 0; i < diagnoses.size(); ++i) {
        const Diagnosis& d = diagnoses[i];
        const auto it = errors.find(d.item_id);
        if (it == errors.end()) {
          failures.push_back(ordered_json{{"item_id", d.item_id}, {"error", "not in the error set"}});
          continue;
        }
        try {
          const auto batch = generate_patch(assemble_patch_context(d, *it->second, k), backend, pc);
          patches.insert(patches.end(), batch.begin(), batch.end());
        } catch (const ShortBatch& e) {
          failures.push_back(ordered_json{{"item_id", d.item_id}, {"error", e.what()}});
        }
        report_progress(options, s, static_cast<double>(i + 1) / static_cast<double>(diagnoses.size()));
      }
      save_corpus(rel(patches_path(round)), patches);
      write_json(rel(patches_path(round).parent_path() / "patch_failures.json"), failures);
      break;
    }

    case Stage::Mix: {
      const auto prior = load_corpus(training_corpus_path(round));
      const EvaluationReport report = load_report(report_path(round));
      const auto diagnoses = load_diagnoses(diagnoses_path(round));
      const auto patches_all = load_patches(patches_path(round));
      const std::int64_t total = config_.corpus_total > 0 ? config_.corpus_total : static_cast<std::int64_t>(prior.size());

      std::map<std::string, std::int64_t> error_counts;
      for (const auto& [cid, subject] : report.per_subject) error_counts[cid] = subject.errors;
      for (const auto& sample : prior) error_counts.try_emplace(sample.cid, 0);
      const auto quotas = allocate_quota(error_counts, total);

      std::vector<std::string> log;
      const auto patches = fit_patches_to_quota(patches_all, quotas, &log);
      const ReplaySelection replay = select_replay(prior, patches, quotas, derive_seed(seed, fmt::format("round-{}", round)),
                                                   config_.replay_policy, &report);
      log.insert(log.end(), replay.log.begin(), replay.log.end());
      const Round2Corpus corpus =
          assemble_round2(patches, replay.replay, quotas, total, derive_seed(seed, fmt::format("mix-{}", round)));

      const fs::path dir = round_dir(round) / "mix";
      save_corpus(rel(dir / "corpus.jsonl"), corpus.samples);
      save_export(rel(dir / "export.jsonl"), corpus.samples);
      write_json(rel(dir / "manifest.json"), ordered_json{{"round", round},
                                                           {"quotas", quotas},
                                                           {"provenance", corpus.manifest},
                                                           {"overlap_violations", replay.overlap_violations},
                                                           {"log", log}});
      RepairPlan plan;
      plan.round = round;
      plan.quotas = quotas;
      plan.diagnoses = diagnoses;
      for (const auto& p : patches) plan.patch_batches[p.source_item_id].push_back(p);
      plan.replay = replay.replay;
      write_json(rel(dir / "plan.json"), to_json(plan));
      break;
    }

    case Stage::Report: {
      const int r = manifest_.stages.at(Stage::Mix).round > 0 ? manifest_.stages.at(Stage::Mix).round : round;
      const EvaluationReport report = load_report(report_path(r));
      const auto diagnoses = load_diagnoses(diagnoses_path(r));
      atomic_write(rel(round_dir(r) / "report.md"), render_report(report, diagnoses));
      break;
    }
  }
  return written;
}

}  // namespace dataloop
