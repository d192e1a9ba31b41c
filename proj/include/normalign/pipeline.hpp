#pragma once

// File-based pipeline stages. Every stage reads its inputs from the data
// directory and replaces its outputs atomically:
//
//   ingest    transcripts.jsonl        -> dilemmas.jsonl, audit.jsonl, responses.jsonl (panel)
//   respond   dilemmas.jsonl           -> responses.jsonl (one agent's records)
//   extract   dilemmas + responses     -> solutions.jsonl
//   match     dilemmas + solutions     -> matches.jsonl, matches.meta.json
//   score     matches + solutions      -> report.json
//   report    report.json              -> report_*.csv

#include "normalign/config.hpp"
#include "normalign/corpus.hpp"
#include "normalign/metrics.hpp"
#include "normalign/prompt_template.hpp"
#include "normalign/serialization.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace normalign {

namespace files {
inline constexpr const char* kTranscripts = "transcripts.jsonl";
inline constexpr const char* kDilemmas = "dilemmas.jsonl";
inline constexpr const char* kAudit = "audit.jsonl";
inline constexpr const char* kResponses = "responses.jsonl";
inline constexpr const char* kSolutions = "solutions.jsonl";
inline constexpr const char* kMatches = "matches.jsonl";
inline constexpr const char* kMatchesMeta = "matches.meta.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kTopics = "topics.csv";
inline constexpr const char* kAnnotationDir = "annotation";
}  // namespace files

/// Agent id under which the transcript sections are stored.
inline constexpr const char* kPanelAgent = "panel";

struct StageContext {
  std::filesystem::path data_dir;
  BackendRegistry* registry = nullptr;
  /// stage -> backend name, overriding [stages].
  std::map<std::string, std::string> backend_overrides;
  std::size_t parallelism = 1;
  std::optional<std::size_t> limit;
  std::uint64_t seed = 0;
  /// Timestamp for created_at fields; the current UTC time when empty.
  std::string now;

  std::string backend_for(const std::string& stage) const;
  const PipelineConfig& config() const;
  std::filesystem::path path(const char* name) const { return data_dir / name; }
  std::filesystem::path lexicon(const std::string& file) const;
  PromptTemplate prompt(const std::string& name) const;
  std::string timestamp() const;
};

struct IngestStageOptions {
  std::optional<std::filesystem::path> transcripts;
  std::size_t chunk_size = 3;
  std::size_t stride = 1;
  std::optional<std::size_t> ceiling;
};

/// Each stage returns a JSON summary printed by the CLI.
Json run_ingest(const StageContext& ctx, const IngestStageOptions& options);
Json run_respond(const StageContext& ctx, const std::string& agent);
Json run_extract(const StageContext& ctx, const std::optional<std::string>& agent);
Json run_match(const StageContext& ctx, const std::string& cand, const std::string& ref);

struct ScoreOptions {
  AggregateMode mode = AggregateMode::Macro;
  std::optional<std::filesystem::path> topics;
};
Json run_score(const StageContext& ctx, const ScoreOptions& options);

/// Writes the CSV tables and returns a printable summary table.
std::string run_report(const StageContext& ctx);

/// Structural checks over whatever stage outputs exist.
std::vector<Violation> run_validate(const StageContext& ctx);

struct ServeSetup {
  std::size_t per_cell = 4;
  std::vector<std::string> annotators;
  std::size_t overlap = 0;
};

/// Builds annotation/tasks.jsonl from the stage outputs when it does not
/// exist yet; returns the annotation directory.
std::filesystem::path prepare_annotation(const StageContext& ctx, const ServeSetup& setup);

/// Loads matches.jsonl back into matrices for one comparison; partial
/// dilemmas are returned with partial set.
std::vector<MatchMatrix> load_matrices(const StageContext& ctx, const Json& comparison,
                                       const std::vector<Solution>& solutions);

}  // namespace normalign
