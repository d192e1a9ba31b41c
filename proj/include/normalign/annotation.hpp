#pragma once

// Human validation of pipeline outputs: task construction and sampling, an
// append-only label log, and agreement statistics.

#include "normalign/metrics.hpp"
#include "normalign/serialization.hpp"
#include "normalign/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace normalign {

struct LabelSchema {
  std::vector<std::string> labels;
  std::vector<std::string> issues;

  bool operator==(const LabelSchema&) const = default;
};

/// Labels and issue taxonomy per task kind. MatchPair labels judge the
/// pipeline ("correct" / "incorrect"); DilemmaMapping labels are direct
/// ("match" / "no_match"); the other two are "ok" / "has_issues".
LabelSchema default_label_schema(TargetKind kind);

struct AnnotationTask {
  std::string task_id;
  TargetKind kind = TargetKind::MatchPair;
  Json payload = Json::object();
  LabelSchema label_schema;
  /// Empty: anyone may label it. Several names: a shared overlap item.
  std::vector<std::string> assigned_to;
  /// What the pipeline claimed, in the same label space as `gold_label`.
  std::string pipeline_label;

  bool operator==(const AnnotationTask&) const = default;
};

Json encode(const AnnotationTask& task);
template <>
AnnotationTask decode<AnnotationTask>(const Json& json);

/// Maps a human label into the pipeline's label space: for MatchPair,
/// "correct" means the pipeline label and "incorrect" its opposite.
std::string gold_label(const AnnotationTask& task, const std::string& label);

/// Up to `per_cell` matched and `per_cell` unmatched judgments per
/// (dilemma, candidate agent), drawn uniformly with a seeded engine. The
/// lookup maps solution ids to solutions for the task payloads.
std::vector<AnnotationTask> sample_match_tasks(const std::vector<MatchMatrix>& matrices,
                                               const std::map<std::string, Solution>& solutions,
                                               const std::map<std::string, Dilemma>& dilemmas,
                                               std::size_t per_cell, std::uint64_t seed);

/// One located-chunk task (pipeline "match") and, where the audit has a
/// runner-up chunk, one runner-up task (pipeline "no_match") per summary.
std::vector<AnnotationTask> mapping_tasks(const std::vector<Json>& audit);

/// One task per dilemma pairing the generated text with its section.
std::vector<AnnotationTask> content_tasks(const std::vector<Dilemma>& dilemmas,
                                          const std::vector<AgentResponse>& panel_responses);

/// One task per (dilemma, agent) listing the extracted solutions.
std::vector<AnnotationTask> extraction_tasks(const std::vector<Dilemma>& dilemmas,
                                             const std::vector<AgentResponse>& responses,
                                             const std::vector<Solution>& solutions);

/// The first `overlap` tasks of each kind go to every annotator, the rest
/// round-robin. No annotators leaves every task open.
void assign_tasks(std::vector<AnnotationTask>& tasks, const std::vector<std::string>& annotators,
                  std::size_t overlap);

struct PairKappa {
  std::string annotator_a;
  std::string annotator_b;
  std::size_t shared_items = 0;
  MaybeRational kappa;
};

struct AgreementStats {
  TargetKind kind = TargetKind::MatchPair;
  std::size_t records = 0;
  std::size_t items = 0;
  /// Items whose annotators split evenly; left out of the classification.
  std::size_t contested = 0;
  /// Records with an issue tag or a label that disagrees with the pipeline.
  std::size_t flagged = 0;
  MaybeRational issue_rate;
  std::optional<ClassificationReport> classification;
  std::vector<PairKappa> kappa;
  std::map<std::string, std::size_t> issue_histogram;
};

/// Current (non-superseded) records only. Gold is the annotators' majority
/// label; the pipeline label is the prediction. Throws EmptyInput when no
/// record has this kind.
AgreementStats agreement_stats(TargetKind kind, const std::vector<AnnotationRecord>& records,
                               const std::map<std::string, AnnotationTask>& tasks);

Json encode(const AgreementStats& stats);

/// Latest record per (task, annotator), in log order of the latest write.
std::vector<AnnotationRecord> current_records(const std::vector<AnnotationRecord>& history);

/// Tasks plus the append-only label log in one directory:
/// `tasks.jsonl` (read at start) and `labels.jsonl` (appended to).
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path directory);

  static void write_tasks(const std::filesystem::path& directory,
                          const std::vector<AnnotationTask>& tasks);

  /// The first task, in file order, open to this annotator and not yet
  /// labelled by them.
  std::optional<AnnotationTask> next_task(const std::string& annotator,
                                          std::optional<TargetKind> kind = std::nullopt) const;

  /// Validates against the task's schema and appends. Throws UnknownTask or
  /// SchemaViolation.
  AnnotationRecord record_label(const std::string& task_id, const std::string& annotator,
                                const std::string& label, const std::vector<std::string>& issues,
                                const std::string& created_at = {});

  std::vector<AnnotationRecord> history() const;
  std::vector<AnnotationRecord> current() const;

  /// Stats for a kind; an explicit empty state when nothing is labelled yet.
  Json stats(TargetKind kind) const;
  /// Per annotator: labelled, open and total tasks.
  Json progress() const;

  const std::vector<AnnotationTask>& tasks() const { return tasks_; }

 private:
  std::filesystem::path directory_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  mutable std::mutex mutex_;
  std::vector<AnnotationRecord> history_;
};

}  // namespace normalign
