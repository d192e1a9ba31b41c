#pragma once

// JSON-over-HTTP front end for an AnnotationStore.
//
//   GET  /api/tasks/next?annotator=ID[&kind=K]  200 task | 204 queue empty
//   POST /api/labels {task_id, annotator_id, label, issues[]}
//                                               201 record | 400 | 404
//   GET  /api/stats?kind=K                      agreement statistics
//   GET  /api/progress                          per-annotator counts
//   GET  /api/health
//
// Anything else is served from the static directory, when one is given.

#include "normalign/annotation.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace normalign {

class AnnotationServer {
 public:
  AnnotationServer(std::shared_ptr<AnnotationStore> store,
                   std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace normalign
