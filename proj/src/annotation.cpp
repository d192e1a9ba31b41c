#include "normalign/annotation.hpp"

#include "normalign/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <set>

namespace normalign {

namespace {

const std::vector<std::string> kExtractionIssues = {
    "Duplicate",        "NotAdv has Neg",         "Irrelevant",          "Missing Solution",
    "Contains manipulation", "Joke/Too Literal",  "Too general",         "Missing Context",
    "Incorrect Analogy", "Incorrect Person",      "Made up, but relevant", "Made up condition",
    "Incorrect Important Details", "Too specific detail"};

const std::vector<std::string> kContentIssues = {"Missing", "Mis-Un", "Hall", "Not-In"};

const std::vector<std::string> kMatchIssues = {"False match", "Missed match", "Unclear solution"};

Json solution_view(const Solution& s) {
  return Json{{"id", s.id}, {"text", s.text}, {"stance", std::string(to_string(s.stance))}};
}

Json dilemma_view(const Dilemma& d) {
  return Json{{"id", d.id}, {"summary", d.summary}, {"body", d.body}, {"question", d.question}};
}

bool contains(const std::vector<std::string>& values, const std::string& value) {
  return std::find(values.begin(), values.end(), value) != values.end();
}

bool open_to(const AnnotationTask& task, const std::string& annotator) {
  return task.assigned_to.empty() || contains(task.assigned_to, annotator);
}

Json class_metrics_json(const ClassMetrics& m) {
  return Json{{"label", m.label},
              {"precision", render_fixed(m.precision, 2)},
              {"recall", render_fixed(m.recall, 2)},
              {"f1", render_fixed(m.f1, 2)},
              {"support", m.support},
              {"precision_exact", to_exact_string(m.precision)},
              {"recall_exact", to_exact_string(m.recall)},
              {"f1_exact", to_exact_string(m.f1)}};
}

}  // namespace

LabelSchema default_label_schema(TargetKind kind) {
  switch (kind) {
    case TargetKind::MatchPair:
      return {{"correct", "incorrect"}, kMatchIssues};
    case TargetKind::Extraction:
      return {{"ok", "has_issues"}, kExtractionIssues};
    case TargetKind::DilemmaMapping:
      return {{"match", "no_match"}, {}};
    case TargetKind::DilemmaContent:
      return {{"ok", "has_issues"}, kContentIssues};
  }
  return {};
}

Json encode(const AnnotationTask& task) {
  return Json{{"task_id", task.task_id},
              {"kind", std::string(to_string(task.kind))},
              {"payload", task.payload},
              {"label_schema",
               Json{{"labels", task.label_schema.labels}, {"issues", task.label_schema.issues}}},
              {"assigned_to", task.assigned_to},
              {"pipeline_label", task.pipeline_label}};
}

template <>
AnnotationTask decode<AnnotationTask>(const Json& json) {
  AnnotationTask task;
  try {
    task.task_id = json.at("task_id").get<std::string>();
    task.kind = target_kind_from_string(json.at("kind").get<std::string>());
    task.payload = json.value("payload", Json::object());
    const auto& schema = json.at("label_schema");
    task.label_schema.labels = schema.at("labels").get<std::vector<std::string>>();
    task.label_schema.issues = schema.value("issues", std::vector<std::string>{});
    task.assigned_to = json.value("assigned_to", std::vector<std::string>{});
    task.pipeline_label = json.value("pipeline_label", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed task: ") + e.what());
  }
  return task;
}

std::string gold_label(const AnnotationTask& task, const std::string& label) {
  if (task.kind != TargetKind::MatchPair) return label;
  if (label == "correct") return task.pipeline_label;
  return task.pipeline_label == "match" ? "no_match" : "match";
}

std::vector<AnnotationTask> sample_match_tasks(const std::vector<MatchMatrix>& matrices,
                                               const std::map<std::string, Solution>& solutions,
                                               const std::map<std::string, Dilemma>& dilemmas,
                                               std::size_t per_cell, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AnnotationTask> tasks;
  auto lookup = [&](const std::string& id) -> const Solution& {
    const auto it = solutions.find(id);
    if (it == solutions.end()) throw InvalidInput("unknown solution id " + id);
    return it->second;
  };
  for (const auto& matrix : matrices) {
    if (!matrix.complete()) {
      spdlog::warn("not sampling partial matrix for {}", matrix.dilemma_id);
      continue;
    }
    std::vector<MatchJudgment> matched, unmatched;
    for (auto& j : matrix.ordered()) (j.matched ? matched : unmatched).push_back(std::move(j));
    std::vector<MatchJudgment> picked;
    std::sample(matched.begin(), matched.end(), std::back_inserter(picked), per_cell, rng);
    std::sample(unmatched.begin(), unmatched.end(), std::back_inserter(picked), per_cell, rng);

    Json reference_set = Json::array();
    for (const auto& id : matrix.ref_ids) reference_set.push_back(solution_view(lookup(id)));
    const auto d = dilemmas.find(matrix.dilemma_id);

    for (const auto& j : picked) {
      AnnotationTask task;
      task.task_id = "match:" + j.cand_solution_id + "~" + j.ref_solution_id;
      task.kind = TargetKind::MatchPair;
      task.label_schema = default_label_schema(task.kind);
      task.pipeline_label = j.matched ? "match" : "no_match";
      task.payload = Json{{"target_ref", j.cand_solution_id + "~" + j.ref_solution_id},
                          {"dilemma_id", matrix.dilemma_id},
                          {"dilemma", d == dilemmas.end() ? Json() : dilemma_view(d->second)},
                          {"candidate", solution_view(lookup(j.cand_solution_id))},
                          {"reference", solution_view(lookup(j.ref_solution_id))},
                          {"reference_set", reference_set},
                          {"pipeline_matched", j.matched},
                          {"rationale", j.verdicts.rationale}};
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

std::vector<AnnotationTask> mapping_tasks(const std::vector<Json>& audit) {
  std::vector<AnnotationTask> tasks;
  for (const auto& record : audit) {
    const auto& chunk_index = record.at("chunk_index");
    if (chunk_index.is_null()) continue;
    const auto& candidates = record.value("top_similarities", Json::array());
    auto make = [&](const Json& candidate, bool located) {
      if (!candidate.contains("text")) return;
      AnnotationTask task;
      const std::string ref = record.at("episode_id").get<std::string>() + "#" +
                              std::to_string(record.at("summary_index").get<std::size_t>()) + "@" +
                              std::to_string(candidate.at("chunk_index").get<std::size_t>());
      task.task_id = "mapping:" + ref;
      task.kind = TargetKind::DilemmaMapping;
      task.label_schema = default_label_schema(task.kind);
      task.pipeline_label = located ? "match" : "no_match";
      task.payload = Json{{"target_ref", ref},
                          {"episode_id", record.at("episode_id")},
                          {"summary", record.at("summary")},
                          {"chunk_index", candidate.at("chunk_index")},
                          {"chunk", candidate.at("text")}};
      tasks.push_back(std::move(task));
    };
    const Json* located = nullptr;
    const Json* runner_up = nullptr;
    for (const auto& c : candidates) {
      if (c.at("chunk_index") == chunk_index) {
        located = &c;
      } else if (!runner_up) {
        runner_up = &c;
      }
    }
    if (located) make(*located, true);
    if (runner_up) make(*runner_up, false);
  }
  return tasks;
}

std::vector<AnnotationTask> content_tasks(const std::vector<Dilemma>& dilemmas,
                                          const std::vector<AgentResponse>& panel_responses) {
  std::map<std::string, const AgentResponse*> sections;
  for (const auto& r : panel_responses) sections.emplace(r.dilemma_id, &r);
  std::vector<AnnotationTask> tasks;
  for (const auto& d : dilemmas) {
    AnnotationTask task;
    task.task_id = "content:" + d.id;
    task.kind = TargetKind::DilemmaContent;
    task.label_schema = default_label_schema(task.kind);
    task.pipeline_label = "ok";
    const auto it = sections.find(d.id);
    task.payload = Json{{"target_ref", d.id},
                        {"dilemma", dilemma_view(d)},
                        {"section", it == sections.end() ? Json() : Json(it->second->text)}};
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<AnnotationTask> extraction_tasks(const std::vector<Dilemma>& dilemmas,
                                             const std::vector<AgentResponse>& responses,
                                             const std::vector<Solution>& solutions) {
  std::map<std::string, const Dilemma*> by_id;
  for (const auto& d : dilemmas) by_id.emplace(d.id, &d);
  std::map<std::string, Json> listed;
  for (const auto& s : solutions) {
    auto& list = listed[s.agent_id + "/" + s.dilemma_id];
    if (list.is_null()) list = Json::array();
    list.push_back(solution_view(s));
  }
  std::vector<AnnotationTask> tasks;
  for (const auto& r : responses) {
    const auto d = by_id.find(r.dilemma_id);
    if (d == by_id.end()) continue;
    AnnotationTask task;
    task.task_id = "extraction:" + r.id();
    task.kind = TargetKind::Extraction;
    task.label_schema = default_label_schema(task.kind);
    task.pipeline_label = "ok";
    const auto it = listed.find(r.id());
    task.payload = Json{{"target_ref", r.id()},
                        {"dilemma", dilemma_view(*d->second)},
                        {"agent_id", r.agent_id},
                        {"response", r.text},
                        {"solutions", it == listed.end() ? Json::array() : it->second}};
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void assign_tasks(std::vector<AnnotationTask>& tasks, const std::vector<std::string>& annotators,
                  std::size_t overlap) {
  if (annotators.empty()) {
    for (auto& t : tasks) t.assigned_to.clear();
    return;
  }
  std::map<TargetKind, std::size_t> seen;
  for (auto& t : tasks) {
    const std::size_t i = seen[t.kind]++;
    if (i < overlap) {
      t.assigned_to = annotators;
    } else {
      t.assigned_to = {annotators[(i - overlap) % annotators.size()]};
    }
  }
}

std::vector<AnnotationRecord> current_records(const std::vector<AnnotationRecord>& history) {
  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  for (std::size_t i = 0; i < history.size(); ++i) {
    latest[{history[i].task_id, history[i].annotator_id}] = i;
  }
  std::vector<std::size_t> keep;
  for (const auto& [key, index] : latest) keep.push_back(index);
  std::sort(keep.begin(), keep.end());
  std::vector<AnnotationRecord> out;
  for (const auto i : keep) out.push_back(history[i]);
  return out;
}

AgreementStats agreement_stats(TargetKind kind, const std::vector<AnnotationRecord>& records,
                               const std::map<std::string, AnnotationTask>& tasks) {
  AgreementStats stats;
  stats.kind = kind;
  // task -> annotator -> label, in task-id order for reproducibility.
  std::map<std::string, std::map<std::string, std::string>> labels;
  for (const auto& r : records) {
    if (r.target_kind != kind) continue;
    const auto task = tasks.find(r.task_id);
    if (task == tasks.end()) throw UnknownTask("record refers to unknown task " + r.task_id);
    ++stats.records;
    for (const auto& issue : r.issues) ++stats.issue_histogram[issue];
    if (!r.issues.empty() || gold_label(task->second, r.label) != task->second.pipeline_label) {
      ++stats.flagged;
    }
    labels[r.task_id][r.annotator_id] = r.label;
  }
  if (stats.records == 0) {
    throw EmptyInput("no labels recorded for " + std::string(to_string(kind)) + " tasks");
  }
  stats.items = labels.size();
  stats.issue_rate = Rational(stats.flagged) / Rational(stats.records);

  std::vector<std::string> gold, predicted;
  std::set<std::string> annotators;
  for (const auto& [task_id, by_annotator] : labels) {
    const auto& task = tasks.at(task_id);
    std::map<std::string, std::size_t> votes;
    for (const auto& [annotator, label] : by_annotator) {
      ++votes[gold_label(task, label)];
      annotators.insert(annotator);
    }
    std::size_t best = 0, n_best = 0;
    std::string winner;
    for (const auto& [label, count] : votes) {
      if (count > best) {
        best = count;
        n_best = 1;
        winner = label;
      } else if (count == best) {
        ++n_best;
      }
    }
    if (n_best > 1) {
      ++stats.contested;
      continue;
    }
    gold.push_back(winner);
    predicted.push_back(task.pipeline_label);
  }
  if (!gold.empty()) stats.classification = classification_report(gold, predicted);

  const std::vector<std::string> names(annotators.begin(), annotators.end());
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      // Compared in the pipeline's label space, so "correct" on a matched
      // pair and "incorrect" on an unmatched one count as the same belief.
      std::vector<std::string> la, lb;
      for (const auto& [task_id, by_annotator] : labels) {
        const auto ia = by_annotator.find(names[a]);
        const auto ib = by_annotator.find(names[b]);
        if (ia == by_annotator.end() || ib == by_annotator.end()) continue;
        const auto& task = tasks.at(task_id);
        la.push_back(gold_label(task, ia->second));
        lb.push_back(gold_label(task, ib->second));
      }
      if (la.empty()) continue;
      stats.kappa.push_back({names[a], names[b], la.size(), cohen_kappa(la, lb)});
    }
  }
  return stats;
}

Json encode(const AgreementStats& stats) {
  Json out{{"kind", std::string(to_string(stats.kind))},
           {"empty", false},
           {"records", stats.records},
           {"items", stats.items},
           {"contested", stats.contested},
           {"flagged", stats.flagged},
           {"issue_rate", encode_metric(stats.issue_rate)},
           {"issue_rate_exact", encode_exact(stats.issue_rate)},
           {"issue_rate_percent",
            stats.issue_rate ? Json(render_percent(*stats.issue_rate, 1)) : Json()}};
  if (stats.classification) {
    const auto& c = *stats.classification;
    Json classes = Json::array();
    for (const auto& m : c.classes) classes.push_back(class_metrics_json(m));
    out["classification"] = Json{{"classes", classes},
                                 {"accuracy", render_fixed(c.accuracy, 2)},
                                 {"accuracy_exact", to_exact_string(c.accuracy)},
                                 {"macro", class_metrics_json(c.macro)},
                                 {"weighted", class_metrics_json(c.weighted)},
                                 {"total", c.total},
                                 {"table", c.render(2)}};
  } else {
    out["classification"] = Json();
  }
  Json kappa = Json::array();
  for (const auto& k : stats.kappa) {
    kappa.push_back(Json{{"annotator_a", k.annotator_a},
                         {"annotator_b", k.annotator_b},
                         {"shared_items", k.shared_items},
                         {"kappa", k.kappa ? Json(render_fixed(*k.kappa, 3)) : Json()},
                         {"kappa_exact", encode_exact(k.kappa)}});
  }
  out["kappa"] = std::move(kappa);
  Json histogram = Json::object();
  for (const auto& [issue, count] : stats.issue_histogram) histogram[issue] = count;
  out["issue_histogram"] = std::move(histogram);
  return out;
}

AnnotationStore::AnnotationStore(std::filesystem::path directory)
    : directory_(std::move(directory)) {
  const auto tasks_path = directory_ / "tasks.jsonl";
  if (!std::filesystem::exists(tasks_path)) {
    throw IoError("missing " + tasks_path.string() + " (run `serve` with pipeline outputs first)");
  }
  tasks_ = read_jsonl<AnnotationTask>(tasks_path);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!task_index_.emplace(tasks_[i].task_id, i).second) {
      throw InvalidInput("duplicate task id " + tasks_[i].task_id);
    }
  }
  const auto labels_path = directory_ / "labels.jsonl";
  if (std::filesystem::exists(labels_path)) history_ = read_jsonl<AnnotationRecord>(labels_path);
}

void AnnotationStore::write_tasks(const std::filesystem::path& directory,
                                  const std::vector<AnnotationTask>& tasks) {
  std::filesystem::create_directories(directory);
  write_jsonl(directory / "tasks.jsonl", tasks);
}

std::optional<AnnotationTask> AnnotationStore::next_task(const std::string& annotator,
                                                         std::optional<TargetKind> kind) const {
  std::lock_guard lock(mutex_);
  std::set<std::string> done;
  for (const auto& r : history_) {
    if (r.annotator_id == annotator) done.insert(r.task_id);
  }
  for (const auto& t : tasks_) {
    if (kind && t.kind != *kind) continue;
    if (open_to(t, annotator) && !done.contains(t.task_id)) return t;
  }
  return std::nullopt;
}

AnnotationRecord AnnotationStore::record_label(const std::string& task_id,
                                               const std::string& annotator,
                                               const std::string& label,
                                               const std::vector<std::string>& issues,
                                               const std::string& created_at) {
  const auto it = task_index_.find(task_id);
  if (it == task_index_.end()) throw UnknownTask("unknown task " + task_id);
  const auto& task = tasks_[it->second];
  if (annotator.empty()) throw SchemaViolation("annotator_id must not be empty");
  if (!contains(task.label_schema.labels, label)) {
    throw SchemaViolation("label '" + label + "' is not one of " +
                          Json(task.label_schema.labels).dump());
  }
  for (const auto& issue : issues) {
    if (!contains(task.label_schema.issues, issue)) {
      throw SchemaViolation("issue '" + issue + "' is not in the taxonomy for " +
                            std::string(to_string(task.kind)));
    }
  }
  AnnotationRecord record;
  record.task_id = task_id;
  record.annotator_id = annotator;
  record.target_kind = task.kind;
  record.target_ref = task.payload.value("target_ref", task_id);
  record.label = label;
  record.issues = issues;
  record.created_at = created_at.empty() ? utc_now_iso() : created_at;

  std::lock_guard lock(mutex_);
  std::ofstream out(directory_ / "labels.jsonl", std::ios::app | std::ios::binary);
  out << dump_line(encode(record)) << '\n';
  out.flush();
  if (!out) throw IoError("cannot append to " + (directory_ / "labels.jsonl").string());
  history_.push_back(record);
  return record;
}

std::vector<AnnotationRecord> AnnotationStore::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

std::vector<AnnotationRecord> AnnotationStore::current() const {
  return current_records(history());
}

Json AnnotationStore::stats(TargetKind kind) const {
  const auto records = current();
  const bool any = std::any_of(records.begin(), records.end(),
                               [&](const AnnotationRecord& r) { return r.target_kind == kind; });
  if (!any) {
    return Json{{"kind", std::string(to_string(kind))}, {"empty", true},       {"records", 0},
                {"items", 0},                          {"contested", 0},       {"flagged", 0},
                {"issue_rate", Json()},                {"issue_rate_exact", Json()},
                {"issue_rate_percent", Json()},        {"classification", Json()},
                {"kappa", Json::array()},              {"issue_histogram", Json::object()}};
  }
  std::map<std::string, AnnotationTask> by_id;
  for (const auto& t : tasks_) by_id.emplace(t.task_id, t);
  return encode(agreement_stats(kind, records, by_id));
}

Json AnnotationStore::progress() const {
  const auto records = current();
  std::set<std::string> annotators;
  for (const auto& t : tasks_) annotators.insert(t.assigned_to.begin(), t.assigned_to.end());
  std::map<std::string, std::set<std::string>> done;
  for (const auto& r : records) {
    annotators.insert(r.annotator_id);
    done[r.annotator_id].insert(r.task_id);
  }
  Json per = Json::object();
  for (const auto& a : annotators) {
    std::size_t open = 0;
    for (const auto& t : tasks_) open += open_to(t, a) && !done[a].contains(t.task_id);
    per[a] = Json{{"labelled", done[a].size()}, {"open", open}};
  }
  std::map<std::string, std::size_t> by_kind;
  for (const auto& t : tasks_) ++by_kind[std::string(to_string(t.kind))];
  Json kinds = Json::object();
  for (const auto& [k, n] : by_kind) kinds[k] = n;
  return Json{{"total_tasks", tasks_.size()},
              {"tasks_by_kind", kinds},
              {"records", records.size()},
              {"annotators", per}};
}

}  // namespace normalign
