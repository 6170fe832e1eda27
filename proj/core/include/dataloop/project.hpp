#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dataloop/backend.hpp"
#include "dataloop/config.hpp"

namespace dataloop {

class PredecessorIncomplete : public Error {
 public:
  using Error::Error;
};

class ProjectLocked : public Error {
 public:
  using Error::Error;
};

/// A stage threw. `validation` is set when the cause was bad data (schema or
/// structural validation) rather than an operational failure.
class StageFailed : public Error {
 public:
  StageFailed(std::string stage, const std::string& inner, bool validation)
      : Error(stage + " failed: " + inner), stage_(std::move(stage)), validation_(validation) {}
  const std::string& stage() const noexcept { return stage_; }
  bool validation() const noexcept { return validation_; }

 private:
  std::string stage_;
  bool validation_;
};

enum class Stage { Curate, Extract, Bench, Synth, Eval, Diagnose, Patch, Mix, Report };
inline constexpr std::array<Stage, 9> kStages = {Stage::Curate, Stage::Extract,  Stage::Bench,
                                                 Stage::Synth,  Stage::Eval,     Stage::Diagnose,
                                                 Stage::Patch,  Stage::Mix,      Stage::Report};
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);  // ConfigError on unknown names

enum class StageStatus { Pending, Running, Done, Failed };
std::string_view to_string(StageStatus s);
StageStatus parse_stage_status(std::string_view s);

struct StageRecord {
  StageStatus status = StageStatus::Pending;
  int round = 0;                       ///< round the stage last ran in
  std::vector<std::string> artifacts;  ///< paths relative to the project root
  std::string content_hash;
  std::string started;
  std::string finished;
  std::string error;
};

/// Persisted as manifest.json in the project root. The root itself is not
/// written, so a project tree can be moved or compared byte for byte.
struct ProjectManifest {
  std::filesystem::path project_root;
  int round = 1;
  std::map<Stage, StageRecord> stages;
  std::string config_hash;
  std::uint64_t seed = 0;
};

ordered_json to_json(const ProjectManifest& m);
ProjectManifest manifest_from_json(const json& j, const std::filesystem::path& root);

/// Hash over (relative path, file SHA-256) pairs in the given order.
std::string artifact_hash(const std::filesystem::path& root, const std::vector<std::string>& artifacts);

/// Exclusive writer lock: a `.lock` file holding the owner's pid, created
/// with O_EXCL. A lock left by a dead process is taken over.
class ProjectLock {
 public:
  explicit ProjectLock(const std::filesystem::path& root);  // throws ProjectLocked
  ~ProjectLock();
  ProjectLock(const ProjectLock&) = delete;
  ProjectLock& operator=(const ProjectLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Timestamp source for manifests and reports. The default honours
/// SOURCE_DATE_EPOCH when it is set and reads the system clock otherwise.
using Clock = std::function<std::chrono::system_clock::time_point()>;
Clock default_clock();
std::string iso_time(std::chrono::system_clock::time_point t);      ///< 2026-02-10T22:01:24Z
std::string compact_time(std::chrono::system_clock::time_point t);  ///< 20260210_220124

struct RunOptions {
  LlmBackend* backend = nullptr;  ///< required by every stage that calls a model
  std::optional<std::filesystem::path> predictions;  ///< eval input; copied into the round directory
  Clock clock = default_clock();
  std::function<void(Stage, double)> progress;  ///< fraction of the current stage done
};

/// A project directory:
///
///   project.conf, manifest.json, corpus/documents.jsonl
///   round-1/curation, round-1/knowledge, round-1/benchmark, round-1/sft
///   round-N/eval, round-N/debug, round-N/mix, round-N/report.md
///
/// Builder stages (curate..synth) write under round-1; the loop stages write
/// under the current round. Mix closes a round: it increments the round and
/// sends eval, diagnose and patch back to pending.
class Project {
 public:
  /// Creates the directory layout, writes `config_text` (defaults when empty)
  /// as project.conf and a fresh manifest. Throws ConfigError when a manifest
  /// already exists.
  static Project init(const std::filesystem::path& root, const std::string& config_text = "",
                      std::optional<std::uint64_t> seed = std::nullopt);
  static Project open(const std::filesystem::path& root);

  const std::filesystem::path& root() const noexcept { return root_; }
  const ProjectManifest& manifest() const noexcept { return manifest_; }
  const ProjectConfig& config() const noexcept { return config_; }

  /// Names of stages whose artifacts no longer match the recorded hash, plus
  /// "config" when project.conf changed since the last stage ran.
  std::vector<std::string> verify() const;

  /// Previous stage in the linear order is done (curate is always runnable).
  bool runnable(Stage s) const;

  /// Runs one stage under the project lock. Later stages go back to pending
  /// first, so an interrupted run never leaves a stage marked done with
  /// partial artifacts. Throws PredecessorIncomplete, ProjectLocked or
  /// StageFailed.
  void run_stage(Stage s, const RunOptions& options);

  // Artifact locations.
  std::filesystem::path round_dir(int round) const;
  std::filesystem::path documents_path() const { return root_ / "corpus" / "documents.jsonl"; }
  std::filesystem::path chunks_path() const { return round_dir(1) / "curation" / "chunks.jsonl"; }
  std::filesystem::path knowledge_dir() const { return round_dir(1) / "knowledge"; }
  std::filesystem::path benchmark_path() const { return round_dir(1) / "benchmark" / "items.jsonl"; }
  std::filesystem::path initial_corpus_path() const { return round_dir(1) / "sft" / "corpus.jsonl"; }
  /// Corpus the round-N model was trained on: the initial corpus for round 1,
  /// the previous round's mix afterwards.
  std::filesystem::path training_corpus_path(int round) const;
  std::filesystem::path report_path(int round) const { return round_dir(round) / "eval" / "report.json"; }
  std::filesystem::path diagnoses_path(int round) const { return round_dir(round) / "debug" / "diagnoses.jsonl"; }
  std::filesystem::path patches_path(int round) const { return round_dir(round) / "debug" / "patches.jsonl"; }

 private:
  Project(std::filesystem::path root, ProjectConfig config, ProjectManifest manifest);
  void save_manifest() const;
  std::vector<std::string> execute(Stage s, const RunOptions& options);

  std::filesystem::path root_;
  ProjectConfig config_;
  ProjectManifest manifest_;
};

}  // namespace dataloop
