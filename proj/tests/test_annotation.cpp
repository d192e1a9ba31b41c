#include "normalign/annotation.hpp"
#include "normalign/errors.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace normalign;
namespace nt = normalign::testing;

namespace {

Solution sol(const std::string& id, const std::string& dilemma = "d1") {
  return Solution{id, dilemma, id.substr(0, id.find('/')), "text " + id, Stance::Advised, false, ""};
}

/// cand x ref matrix where the first `n_matched` pairs (cand-major) match.
MatchMatrix matrix(const std::string& dilemma, std::size_t n_cand, std::size_t n_ref,
                   std::size_t n_matched, std::map<std::string, Solution>& solutions) {
  MatchMatrix m;
  m.dilemma_id = dilemma;
  m.cand_agent = "c";
  m.ref_agent = "panel";
  for (std::size_t i = 0; i < n_cand; ++i) m.cand_ids.push_back("c/" + dilemma + "/a" + std::to_string(i));
  for (std::size_t j = 0; j < n_ref; ++j) m.ref_ids.push_back("panel/" + dilemma + "/a" + std::to_string(j));
  for (const auto& id : m.cand_ids) solutions.emplace(id, sol(id, dilemma));
  for (const auto& id : m.ref_ids) solutions.emplace(id, sol(id, dilemma));
  std::size_t k = 0;
  for (const auto& c : m.cand_ids) {
    for (const auto& r : m.ref_ids) {
      m.judgments.emplace(SolutionPair{c, r},
                          MatchJudgment::make(c, Stance::Advised, r, Stance::Advised,
                                              CmrVerdict::all(k++ < n_matched, "why")));
    }
  }
  return m;
}

AnnotationTask mapping_task(const std::string& id) {
  AnnotationTask t;
  t.task_id = id;
  t.kind = TargetKind::DilemmaMapping;
  t.label_schema = default_label_schema(t.kind);
  t.pipeline_label = "match";
  t.payload = Json{{"target_ref", id}};
  return t;
}

}  // namespace

TEST_CASE("match task sampling quotas", "[sampling]") {
  std::map<std::string, Solution> solutions;
  const std::map<std::string, Dilemma> dilemmas{{"d1", Dilemma{"d1", "e", "s", "b", "q"}}};
  const auto full = matrix("d1", 4, 5, 10, solutions);
  const auto tasks = sample_match_tasks({full}, solutions, dilemmas, 4, 7);
  REQUIRE(tasks.size() == 8);
  CHECK(std::count_if(tasks.begin(), tasks.end(), [](const auto& t) { return t.pipeline_label == "match"; }) == 4);
  CHECK(tasks[0].payload["reference_set"].size() == 5);
  CHECK(tasks[0].payload["dilemma"]["question"] == "q");
  CHECK(tasks[0].label_schema.labels == std::vector<std::string>{"correct", "incorrect"});

  const auto short_cell = matrix("d2", 2, 2, 2, solutions);
  const auto few = sample_match_tasks({short_cell}, solutions, dilemmas, 4, 7);
  CHECK(few.size() == 4);
  CHECK(few[2].payload["dilemma"].is_null());

  CHECK(sample_match_tasks({full, short_cell}, solutions, dilemmas, 4, 99) ==
        sample_match_tasks({full, short_cell}, solutions, dilemmas, 4, 99));

  auto partial = full;
  partial.partial = true;
  CHECK(sample_match_tasks({partial}, solutions, dilemmas, 4, 7).empty());
}

TEST_CASE("sampled tasks reference existing judgments", "[sampling][property]") {
  std::mt19937_64 rng(12);
  for (int round = 0; round < 50; ++round) {
    std::map<std::string, Solution> solutions;
    std::vector<MatchMatrix> matrices;
    for (int d = 0; d < 3; ++d) {
      const std::size_t nc = rng() % 6, nr = rng() % 6;
      matrices.push_back(matrix("d" + std::to_string(d), nc, nr, nc * nr ? rng() % (nc * nr) : 0, solutions));
    }
    for (const auto& t : sample_match_tasks(matrices, solutions, {}, 4, rng())) {
      const auto cand = t.payload["candidate"]["id"].get<std::string>();
      const auto ref = t.payload["reference"]["id"].get<std::string>();
      const auto& m = *std::find_if(matrices.begin(), matrices.end(),
                                    [&](const auto& x) { return x.dilemma_id == t.payload["dilemma_id"]; });
      REQUIRE(m.judgments.contains({cand, ref}));
      CHECK(m.judgments.at({cand, ref}).matched == (t.pipeline_label == "match"));
    }
  }
}

TEST_CASE("mapping, content and extraction tasks", "[tasks]") {
  const std::vector<Json> audit{
      Json{{"episode_id", "e1"}, {"summary_index", 0}, {"summary", "s"}, {"chunk_index", 4},
           {"top_similarities", Json::array({Json{{"chunk_index", 2}, {"text", "two"}},
                                             Json{{"chunk_index", 4}, {"text", "four"}}})}},
      Json{{"episode_id", "e1"}, {"summary_index", 1}, {"summary", "t"}, {"chunk_index", nullptr},
           {"top_similarities", Json::array()}}};
  const auto mapping = mapping_tasks(audit);
  REQUIRE(mapping.size() == 2);
  CHECK(mapping[0].task_id == "mapping:e1#0@4");
  CHECK(mapping[0].pipeline_label == "match");
  CHECK(mapping[1].payload["chunk"] == "two");
  CHECK(mapping[1].pipeline_label == "no_match");

  const std::vector<Dilemma> dilemmas{{"d1", "e1", "s", "b", "q"}};
  const auto content = content_tasks(dilemmas, {AgentResponse{"panel", "d1", "section", ""}});
  REQUIRE(content.size() == 1);
  CHECK(content[0].payload["section"] == "section");
  CHECK(content[0].label_schema.issues.size() == 4);

  const auto extraction = extraction_tasks(dilemmas, {AgentResponse{"m", "d1", "r", ""}, AgentResponse{"m", "zz", "r", ""}},
                                           {sol("m/d1/a0"), sol("m/d1/n0")});
  REQUIRE(extraction.size() == 1);
  CHECK(extraction[0].task_id == "extraction:m/d1");
  CHECK(extraction[0].payload["solutions"].size() == 2);
}

TEST_CASE("task assignment with an overlap block", "[tasks]") {
  std::vector<AnnotationTask> tasks;
  for (int i = 0; i < 6; ++i) tasks.push_back(mapping_task("m" + std::to_string(i)));
  tasks.push_back(nt::match_task("x0", true));
  assign_tasks(tasks, {"a", "b"}, 2);
  CHECK(tasks[0].assigned_to == std::vector<std::string>{"a", "b"});
  CHECK(tasks[1].assigned_to.size() == 2);
  CHECK(tasks[2].assigned_to == std::vector<std::string>{"a"});
  CHECK(tasks[3].assigned_to == std::vector<std::string>{"b"});
  CHECK(tasks[6].assigned_to.size() == 2);
  assign_tasks(tasks, {}, 2);
  CHECK(tasks[0].assigned_to.empty());
}

TEST_CASE("the label log keeps history and the latest label wins", "[store]") {
  nt::TempDir dir;
  std::vector<AnnotationTask> tasks{mapping_task("t1"), mapping_task("t2"), nt::match_task("t3", true)};
  tasks[1].assigned_to = {"bob"};
  AnnotationStore::write_tasks(dir.path(), tasks);
  AnnotationStore store(dir.path());

  CHECK(store.next_task("alice")->task_id == "t1");
  CHECK(store.next_task("alice", TargetKind::MatchPair)->task_id == "t3");
  store.record_label("t1", "alice", "match", {}, "2024-01-01T00:00:00Z");
  CHECK(store.next_task("alice")->task_id == "t3");
  store.record_label("t1", "alice", "no_match", {}, "2024-01-02T00:00:00Z");
  CHECK(store.history().size() == 2);
  REQUIRE(store.current().size() == 1);
  CHECK(store.current()[0].label == "no_match");
  CHECK(store.current()[0].target_ref == "t1");

  CHECK_THROWS_AS(store.record_label("nope", "alice", "match", {}), UnknownTask);
  CHECK_THROWS_AS(store.record_label("t1", "alice", "maybe", {}), SchemaViolation);
  CHECK_THROWS_AS(store.record_label("t3", "alice", "correct", {"Typo"}), SchemaViolation);
  CHECK_THROWS_AS(store.record_label("t1", "", "match", {}), SchemaViolation);

  // A fresh store sees the persisted log.
  AnnotationStore reopened(dir.path());
  CHECK(reopened.history() == store.history());
  const auto progress = reopened.progress();
  CHECK(progress["annotators"]["alice"]["labelled"] == 1);
  CHECK(progress["annotators"]["alice"]["open"] == 1);
  CHECK(progress["annotators"]["bob"]["open"] == 3);
  CHECK(progress["tasks_by_kind"]["DilemmaMapping"] == 2);

  CHECK(reopened.stats(TargetKind::Extraction)["empty"] == true);
  CHECK(reopened.stats(TargetKind::DilemmaMapping)["records"] == 1);
  CHECK_THROWS_AS(AnnotationStore(dir / "missing"), IoError);
}

TEST_CASE("match labels translate into the pipeline's label space", "[stats]") {
  const auto yes = nt::match_task("a", true);
  const auto no = nt::match_task("b", false);
  CHECK(gold_label(yes, "correct") == "match");
  CHECK(gold_label(yes, "incorrect") == "no_match");
  CHECK(gold_label(no, "incorrect") == "match");
  CHECK(gold_label(mapping_task("m"), "no_match") == "no_match");
}

TEST_CASE("agreement with the pipeline everywhere", "[stats]") {
  std::map<std::string, AnnotationTask> tasks;
  std::vector<AnnotationRecord> records;
  for (int i = 0; i < 6; ++i) {
    auto t = nt::match_task("p" + std::to_string(i), i % 2 == 0);
    tasks.emplace(t.task_id, t);
    records.push_back(nt::label(t, "a", "correct"));
    records.push_back(nt::label(t, "b", "correct"));
  }
  const auto s = agreement_stats(TargetKind::MatchPair, records, tasks);
  REQUIRE(s.classification);
  CHECK(s.classification->accuracy == 1);
  REQUIRE(s.kappa.size() == 1);
  CHECK(s.kappa[0].kappa == Rational(1));
  CHECK(s.flagged == 0);
  CHECK(s.issue_rate == Rational(0));
  CHECK_THROWS_AS(agreement_stats(TargetKind::Extraction, records, tasks), EmptyInput);
  records.push_back(nt::label(nt::match_task("ghost", true), "a", "correct"));
  CHECK_THROWS_AS(agreement_stats(TargetKind::MatchPair, records, tasks), UnknownTask);
}

TEST_CASE("ties are contested and left out of the report", "[stats]") {
  const auto t = nt::match_task("p", true);
  const auto u = nt::match_task("q", true);
  const std::map<std::string, AnnotationTask> tasks{{"p", t}, {"q", u}};
  const auto s = agreement_stats(
      TargetKind::MatchPair,
      {nt::label(t, "a", "correct"), nt::label(t, "b", "incorrect"), nt::label(u, "a", "incorrect")}, tasks);
  CHECK(s.contested == 1);
  CHECK(s.items == 2);
  REQUIRE(s.classification);
  CHECK(s.classification->total == 1);
  CHECK(s.flagged == 2);
}

TEST_CASE("issue rate of the matching study renders as 4.2%", "[stats]") {
  const auto f = nt::matching_study();
  const auto s = agreement_stats(TargetKind::MatchPair, f.records, f.tasks);
  CHECK(s.records == 1095);
  CHECK(s.flagged == 46);
  CHECK(s.issue_rate == make_rational(46, 1095));
  CHECK(render_percent(*s.issue_rate, 1) == "4.2%");
  CHECK(encode(s)["issue_rate_percent"] == "4.2%");
  CHECK(s.issue_histogram.at("Unclear solution") == 39);
  // Disjoint annotators share no items, so there is no kappa.
  CHECK(s.kappa.empty());
  // Pure: the same records give the same answer.
  CHECK(encode(agreement_stats(TargetKind::MatchPair, f.records, f.tasks)) == encode(s));
}

TEST_CASE("kappa is computed on the shared block only", "[stats]") {
  const auto f = nt::mapping_overlap(25, 40);
  const auto s = agreement_stats(TargetKind::DilemmaMapping, f.records, f.tasks);
  REQUIRE(s.kappa.size() == 1);
  CHECK(s.kappa[0].shared_items == 25);
  std::vector<std::string> a, b;
  for (const auto& r : f.records) {
    const auto i = std::stoul(r.task_id.substr(r.task_id.find('#') + 1));
    if (i >= 25) continue;
    (r.annotator_id == "ann1" ? a : b).push_back(r.label);
  }
  CHECK(s.kappa[0].kappa == nt::kappa_oracle(a, b));
  CHECK(s.items == 65);
}

TEST_CASE("current records keep the latest write per annotator", "[store][property]") {
  std::mt19937 rng(5);
  const auto t = mapping_task("t");
  for (int round = 0; round < 100; ++round) {
    std::vector<AnnotationRecord> history;
    std::map<std::string, std::string> last;
    for (int i = 0; i < 10; ++i) {
      const std::string who = "a" + std::to_string(rng() % 3);
      const std::string value = rng() % 2 ? "match" : "no_match";
      history.push_back(nt::label(t, who, value));
      last[who] = value;
    }
    const auto current = current_records(history);
    CHECK(current.size() == last.size());
    for (const auto& r : current) CHECK(last.at(r.annotator_id) == r.label);
  }
}
