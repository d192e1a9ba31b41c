#pragma once

// Synthetic annotation sets shaped like the published validation studies.

#include "normalign/annotation.hpp"

#include <map>
#include <string>
#include <vector>

namespace normalign::testing {

struct LabelFixture {
  std::map<std::string, AnnotationTask> tasks;
  std::vector<AnnotationRecord> records;
};

inline AnnotationTask match_task(const std::string& id, bool pipeline_matched) {
  AnnotationTask t;
  t.task_id = id;
  t.kind = TargetKind::MatchPair;
  t.label_schema = default_label_schema(t.kind);
  t.pipeline_label = pipeline_matched ? "match" : "no_match";
  t.payload = Json{{"target_ref", id}};
  return t;
}

inline AnnotationRecord label(const AnnotationTask& task, const std::string& annotator,
                              const std::string& value, std::vector<std::string> issues = {}) {
  return AnnotationRecord{task.task_id, annotator, task.kind, task.task_id, value, std::move(issues),
                          "2024-01-01T00:00:00Z"};
}

/// 1,095 matching pairs split 541/554 between two annotators, with `flagged`
/// of them marked: every seventh flagged one through a wrong verdict, the
/// rest through an issue tag.
inline LabelFixture matching_study(std::size_t flagged = 46) {
  LabelFixture f;
  for (std::size_t i = 0; i < 1095; ++i) {
    const auto task = match_task("match:p" + std::to_string(i), i % 2 == 0);
    f.tasks.emplace(task.task_id, task);
    const std::string annotator = i < 541 ? "ann1" : "ann2";
    // Spread the flagged records over both annotators.
    const bool flag = i % (1095 / flagged) == 0 && i / (1095 / flagged) < flagged;
    if (!flag) {
      f.records.push_back(label(task, annotator, "correct"));
    } else if ((i / (1095 / flagged)) % 7 == 0) {
      f.records.push_back(label(task, annotator, "incorrect"));
    } else {
      f.records.push_back(label(task, annotator, "correct", {"Unclear solution"}));
    }
  }
  return f;
}

/// Mapping tasks where two annotators share the first `shared` items and
/// split the rest. Labels disagree on every fifth shared item.
inline LabelFixture mapping_overlap(std::size_t shared = 25, std::size_t solo = 40) {
  LabelFixture f;
  for (std::size_t i = 0; i < shared + solo; ++i) {
    AnnotationTask t;
    t.task_id = "mapping:e#" + std::to_string(i) + "@0";
    t.kind = TargetKind::DilemmaMapping;
    t.label_schema = default_label_schema(t.kind);
    t.pipeline_label = i % 3 ? "match" : "no_match";
    t.payload = Json{{"target_ref", t.task_id}};
    f.tasks.emplace(t.task_id, t);
    const std::string truth = t.pipeline_label;
    const std::string other = truth == "match" ? "no_match" : "match";
    if (i < shared) {
      f.records.push_back(label(t, "ann1", truth));
      f.records.push_back(label(t, "ann2", i % 5 == 4 ? other : truth));
    } else {
      f.records.push_back(label(t, i % 2 ? "ann1" : "ann2", truth));
    }
  }
  return f;
}

}  // namespace normalign::testing
