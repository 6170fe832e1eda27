#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "dataloop/backend.hpp"
#include "dataloop/project.hpp"

namespace dataloop {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  ///< 0 picks a free port
  std::optional<std::filesystem::path> static_dir;  ///< mounted at /
  Clock clock = default_clock();
};

/// HTTP view over a project directory.
///
/// Read endpoints (GET, JSON bodies, never write to the project):
///   /status
///   /knowledge/chains      ?cid&page&page_size
///   /knowledge/statements  ?cid&chain_id&page&page_size
///   /knowledge/concepts    ?cid&statement_id&page&page_size
///   /samples               ?round&origin&type&cid&page&page_size
///   /benchmark/items       ?cid&page&page_size
///   /evaluation/report     ?round
///   /debug/progress
///
/// Control endpoint:
///   POST /debug/run  runs diagnose, patch and mix in the background and
///                    answers 202; 409 while a cycle runs or when the project
///                    is not ready for one.
///
/// Paged lists answer {total, page, page_size, items}; pages are 1-based and
/// page_size is capped at 1000. Missing artifacts give 404, bad parameters 400.
class ApiServer {
 public:
  /// `backend_factory` supplies the model backend for a debug cycle.
  using BackendFactory = std::function<std::unique_ptr<LlmBackend>()>;

  ApiServer(std::filesystem::path project_root, BackendFactory backend_factory, ServeOptions options = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  /// Stops serving and waits for a running debug cycle to finish.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dataloop
