#include "dataloop/api_server.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "dataloop/benchmark.hpp"
#include "dataloop/corpus.hpp"
#include "dataloop/debugger.hpp"
#include "dataloop/evaluator.hpp"
#include "dataloop/knowledge.hpp"

namespace fs = std::filesystem;

namespace dataloop {
namespace {

struct HttpError {
  int status;
  std::string message;
};

void send(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

long long int_param(const httplib::Request& req, const char* name, long long fallback, long long lo, long long hi) {
  const auto raw = param(req, name);
  if (!raw) return fallback;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc() || ptr != raw->data() + raw->size() || v < lo || v > hi)
    throw HttpError{400, fmt::format("{} must be an integer in [{}, {}]", name, lo, hi)};
  return v;
}

template <typename T, typename Keep, typename Render>
ordered_json paged(const httplib::Request& req, const std::vector<T>& rows, Keep keep, Render render) {
  const long long page = int_param(req, "page", 1, 1, 1LL << 40);
  const long long size = int_param(req, "page_size", 50, 1, 1000);
  ordered_json items = ordered_json::array();
  long long total = 0;
  const long long first = (page - 1) * size;
  for (const auto& row : rows) {
    if (!keep(row)) continue;
    if (total >= first && total < first + size) items.push_back(render(row));
    ++total;
  }
  return ordered_json{{"total", total}, {"page", page}, {"page_size", size}, {"items", items}};
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw HttpError{404, p.filename().string() + " has not been produced yet"};
}

}  // namespace

struct ApiServer::Impl {
  fs::path root;
  BackendFactory factory;
  ServeOptions options;
  httplib::Server server;
  std::thread server_thread;

  std::mutex debug_mutex;
  std::thread debug_thread;
  bool debug_running = false;
  std::string debug_stage;
  double debug_fraction = 0.0;
  std::string debug_error;
  int debug_started_round = 0;
  int debug_cycles = 0;

  Impl(fs::path r, BackendFactory f, ServeOptions o) : root(std::move(r)), factory(std::move(f)), options(std::move(o)) {
    routes();
  }

  Project project() const { return Project::open(root); }

  ordered_json progress_json() {
    std::lock_guard lock(debug_mutex);
    return ordered_json{{"running", debug_running},       {"stage", debug_stage},
                        {"fraction", debug_fraction},     {"error", debug_error},
                        {"started_round", debug_started_round}, {"completed_cycles", debug_cycles}};
  }

  template <typename Handler>
  void get(const char* path, Handler handler) {
    server.Get(path, [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, 200, handler(req));
      } catch (const HttpError& e) {
        send(res, e.status, ordered_json{{"error", e.message}});
      } catch (const std::exception& e) {
        send(res, 500, ordered_json{{"error", e.what()}});
      }
    });
  }

  void routes() {
    get("/status", [this](const httplib::Request&) {
      const Project p = project();
      ordered_json out = to_json(p.manifest());
      out["hash_mismatches"] = p.verify();
      out["debug"] = progress_json();
      return out;
    });

    get("/knowledge/chains", [this](const httplib::Request& req) {
      const Project p = project();
      require_file(p.knowledge_dir() / "chains.jsonl");
      const KnowledgeStructure k = load_knowledge(p.knowledge_dir());
      const auto cid = param(req, "cid");
      return paged(req, k.chains(), [&](const L3Chain& c) { return !cid || c.cid == *cid; },
                   [](const L3Chain& c) { return to_json(c); });
    });

    get("/knowledge/statements", [this](const httplib::Request& req) {
      const Project p = project();
      require_file(p.knowledge_dir() / "statements.jsonl");
      const KnowledgeStructure k = load_knowledge(p.knowledge_dir());
      const auto cid = param(req, "cid");
      const auto chain_id = param(req, "chain_id");
      return paged(
          req, k.statements(),
          [&](const L2Statement& s) {
            if (chain_id && s.parent_chain_id != *chain_id) return false;
            if (!cid) return true;
            const L3Chain* chain = k.find_chain(s.parent_chain_id);
            return chain != nullptr && chain->cid == *cid;
          },
          [](const L2Statement& s) { return to_json(s); });
    });

    get("/knowledge/concepts", [this](const httplib::Request& req) {
      const Project p = project();
      require_file(p.knowledge_dir() / "concepts.jsonl");
      const KnowledgeStructure k = load_knowledge(p.knowledge_dir());
      const auto cid = param(req, "cid");
      const auto statement_id = param(req, "statement_id");
      return paged(
          req, k.concepts(),
          [&](const L1Concept& c) {
            if (cid && std::find(c.cids.begin(), c.cids.end(), *cid) == c.cids.end()) return false;
            return !statement_id || std::find(c.parent_statement_ids.begin(), c.parent_statement_ids.end(),
                                              *statement_id) != c.parent_statement_ids.end();
          },
          [](const L1Concept& c) { return to_json(c); });
    });

    get("/samples", [this](const httplib::Request& req) {
      const Project p = project();
      int round = static_cast<int>(int_param(req, "round", 0, 1, 1 << 20));
      if (round == 0)
        for (round = p.manifest().round; round > 1 && !fs::exists(p.training_corpus_path(round)); --round) {
        }
      const fs::path path = p.training_corpus_path(round);
      require_file(path);
      const auto origin = param(req, "origin");
      const auto type = param(req, "type");
      const auto cid = param(req, "cid");
      if (origin) try {
          parse_origin(*origin);
        } catch (const SchemaInvalid&) {
          throw HttpError{400, "unknown origin '" + *origin + "'"};
        }
      if (type) try {
          parse_question_type(*type);
        } catch (const SchemaInvalid&) {
          throw HttpError{400, "unknown type '" + *type + "'"};
        }
      ordered_json out = paged(
          req, load_corpus(path),
          [&](const TrainingSample& s) {
            return (!origin || to_string(s.origin) == *origin) && (!type || to_string(s.question_type) == *type) &&
                   (!cid || s.cid == *cid);
          },
          [](const TrainingSample& s) { return to_json(s); });
      out["round"] = round;
      return out;
    });

    get("/benchmark/items", [this](const httplib::Request& req) {
      const Project p = project();
      require_file(p.benchmark_path());
      const auto cid = param(req, "cid");
      return paged(req, load_benchmark(p.benchmark_path()),
                   [&](const BenchmarkItem& i) { return !cid || i.cid == *cid; },
                   [](const BenchmarkItem& i) { return to_json(i); });
    });

    get("/evaluation/report", [this](const httplib::Request& req) {
      const Project p = project();
      int round = static_cast<int>(int_param(req, "round", 0, 1, 1 << 20));
      if (round == 0)
        for (round = p.manifest().round; round > 1 && !fs::exists(p.report_path(round)); --round) {
        }
      require_file(p.report_path(round));
      const EvaluationReport report = load_report(p.report_path(round));
      ordered_json out = to_json(report);
      out["round"] = round;
      if (fs::exists(p.diagnoses_path(round)))
        out["patterns"] = to_json(aggregate_patterns(load_diagnoses(p.diagnoses_path(round)), report.error_samples));
      return out;
    });

    get("/debug/progress", [this](const httplib::Request&) { return progress_json(); });

    server.Post("/debug/run", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(debug_mutex);
      if (debug_running) return send(res, 409, ordered_json{{"error", "a debug cycle is already running"}});
      Project p = [&] {
        try {
          return project();
        } catch (const std::exception& e) {
          throw HttpError{500, e.what()};
        }
      }();
      if (p.manifest().stages.at(Stage::Eval).status != StageStatus::Done)
        return send(res, 409, ordered_json{{"error", "evaluate the current round before starting a debug cycle"}});
      if (fs::exists(root / ".lock")) return send(res, 409, ordered_json{{"error", "the project is locked by a writer"}});

      if (debug_thread.joinable()) debug_thread.join();
      debug_running = true;
      debug_stage = "diagnose";
      debug_fraction = 0.0;
      debug_error.clear();
      debug_started_round = p.manifest().round;
      debug_thread = std::thread([this] { run_cycle(); });
      send(res, 202, ordered_json{{"accepted", true}, {"round", debug_started_round}});
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const HttpError& e) {
        send(res, e.status, ordered_json{{"error", e.message}});
      } catch (const std::exception& e) {
        send(res, 500, ordered_json{{"error", e.what()}});
      } catch (...) {
        send(res, 500, ordered_json{{"error", "unknown failure"}});
      }
    });

    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
  }

  void run_cycle() {
    const Stage cycle[] = {Stage::Diagnose, Stage::Patch, Stage::Mix};
    try {
      std::unique_ptr<LlmBackend> backend = factory ? factory() : nullptr;
      Project p = project();
      for (std::size_t i = 0; i < 3; ++i) {
        {
          std::lock_guard lock(debug_mutex);
          debug_stage = std::string(to_string(cycle[i]));
        }
        RunOptions run;
        run.backend = backend.get();
        run.clock = options.clock;
        run.progress = [this, i](Stage, double f) {
          std::lock_guard lock(debug_mutex);
          debug_fraction = (static_cast<double>(i) + f) / 3.0;
        };
        p.run_stage(cycle[i], run);
      }
      std::lock_guard lock(debug_mutex);
      debug_stage = "done";
      debug_fraction = 1.0;
      ++debug_cycles;
    } catch (const std::exception& e) {
      std::lock_guard lock(debug_mutex);
      debug_error = e.what();
    }
    std::lock_guard lock(debug_mutex);
    debug_running = false;
  }
};

ApiServer::ApiServer(fs::path project_root, BackendFactory backend_factory, ServeOptions options)
    : impl_(std::make_unique<Impl>(std::move(project_root), std::move(backend_factory), std::move(options))) {
  Project::open(impl_->root);
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::start() {
  int port = impl_->options.port;
  if (port == 0) port = impl_->server.bind_to_any_port(impl_->options.host);
  else if (!impl_->server.bind_to_port(impl_->options.host, port)) port = -1;
  if (port < 0) throw IoError(fmt::format("cannot bind {}:{}", impl_->options.host, impl_->options.port));
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void ApiServer::run() {
  if (!impl_->server.listen(impl_->options.host, impl_->options.port))
    throw IoError(fmt::format("cannot serve on {}:{}", impl_->options.host, impl_->options.port));
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
  if (impl_->debug_thread.joinable()) impl_->debug_thread.join();
}

}  // namespace dataloop
