#pragma once

// The bundled toy corpus run through every stage with its scripted backends.

#include "normalign/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace normalign::testing {

inline constexpr const char* kToyNow = "2024-02-01T00:00:00Z";

/// Stage outputs compared byte for byte against the frozen goldens.
inline const std::vector<std::string>& toy_outputs() {
  static const std::vector<std::string> files{
      "dilemmas.jsonl",    "audit.jsonl",       "responses.jsonl",
      "solutions.jsonl",   "matches.jsonl",     "matches.meta.json",
      "report.json",       "report_per_dilemma.csv", "report_aggregate.csv",
      "report_topics.csv", "report_style.csv"};
  return files;
}

struct ToyRun {
  ClientStats stats;
  std::size_t network_backends = 0;
};

inline ToyRun run_toy(const std::filesystem::path& toy_dir, const std::filesystem::path& data_dir,
                      std::size_t parallelism) {
  auto config = load_config(toy_dir / "config.ini");
  config.parallelism = parallelism;
  ToyRun out;
  for (const auto& [name, spec] : config.backends) {
    out.network_backends += spec.kind == "chat" || spec.kind == "embedding";
  }
  BackendRegistry registry(config);
  StageContext ctx;
  ctx.data_dir = data_dir;
  ctx.registry = &registry;
  ctx.parallelism = parallelism;
  ctx.now = kToyNow;
  std::filesystem::create_directories(data_dir);

  IngestStageOptions ingest;
  ingest.transcripts = toy_dir / "transcripts.jsonl";
  run_ingest(ctx, ingest);
  run_respond(ctx, "model-a");
  run_respond(ctx, "model-b");
  run_extract(ctx, std::nullopt);
  run_match(ctx, "model-a", kPanelAgent);
  run_match(ctx, "model-b", kPanelAgent);
  run_score(ctx, ScoreOptions{AggregateMode::Macro, toy_dir / "topics.csv"});
  run_report(ctx);
  out.stats = registry.total_stats();
  return out;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Names of the toy outputs that differ between two directories.
inline std::vector<std::string> differing_outputs(const std::filesystem::path& a,
                                                  const std::filesystem::path& b) {
  std::vector<std::string> out;
  for (const auto& f : toy_outputs()) {
    if (!std::filesystem::exists(a / f) || !std::filesystem::exists(b / f) ||
        slurp(a / f) != slurp(b / f)) {
      out.push_back(f);
    }
  }
  return out;
}

}  // namespace normalign::testing
