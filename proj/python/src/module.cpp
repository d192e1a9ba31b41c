// Python bindings. Exact values cross the boundary as "num/den" strings and
// become fractions.Fraction on the Python side; JSON summaries cross as text.

#include "normalign/annotation.hpp"
#include "normalign/config.hpp"
#include "normalign/corpus_pipeline.hpp"
#include "normalign/errors.hpp"
#include "normalign/extraction.hpp"
#include "normalign/metrics.hpp"
#include "normalign/pipeline.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace normalign;

namespace {

py::object exact(const MaybeRational& value) {
  if (!value) return py::none();
  return py::str(to_exact_string(*value));
}

MatchMatrix build_matrix(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                         const std::vector<std::vector<bool>>& matched) {
  if (matched.size() != cand.size()) throw LengthMismatch("matched needs one row per candidate");
  MatchMatrix m;
  m.dilemma_id = "d";
  m.cand_agent = "cand";
  m.ref_agent = "ref";
  for (std::size_t i = 0; i < cand.size(); ++i) m.cand_ids.push_back("cand/d/s" + std::to_string(i));
  for (std::size_t j = 0; j < ref.size(); ++j) m.ref_ids.push_back("ref/d/s" + std::to_string(j));
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (matched[i].size() != ref.size()) throw LengthMismatch("matched rows need one entry per reference");
    for (std::size_t j = 0; j < ref.size(); ++j) {
      auto mj = MatchJudgment::make(m.cand_ids[i], stance_from_string(cand[i]), m.ref_ids[j],
                                    stance_from_string(ref[j]), CmrVerdict::all(matched[i][j]));
      m.judgments.emplace(SolutionPair{mj.cand_solution_id, mj.ref_solution_id}, mj);
    }
  }
  return m;
}

py::dict scores_dict(const AlignmentScores& s) {
  py::dict d;
  d["n_agree"] = s.n_agree();
  d["n_conflict"] = s.n_conflict();
  d["n_cand"] = s.n_cand();
  d["n_ref"] = s.n_ref();
  d["saa"] = exact(s.saa());
  d["eaa"] = exact(s.eaa());
  d["avg"] = exact(s.avg());
  return d;
}

py::dict class_dict(const ClassMetrics& c) {
  py::dict d;
  d["label"] = c.label;
  d["precision"] = to_exact_string(c.precision);
  d["recall"] = to_exact_string(c.recall);
  d["f1"] = to_exact_string(c.f1);
  d["support"] = c.support;
  return d;
}

/// Owns the registry a StageContext points into.
class Pipeline {
 public:
  Pipeline(const std::filesystem::path& config, const std::filesystem::path& data_dir,
           std::size_t parallelism, std::string now)
      : registry_(load_config(config)) {
    ctx_.data_dir = data_dir;
    ctx_.registry = &registry_;
    ctx_.parallelism = parallelism > 0 ? parallelism : registry_.config().parallelism;
    ctx_.now = std::move(now);
    std::filesystem::create_directories(data_dir);
  }

  std::string ingest(std::optional<std::filesystem::path> transcripts) {
    IngestStageOptions options;
    options.transcripts = std::move(transcripts);
    return run_ingest(ctx_, options).dump();
  }
  std::string respond(const std::string& agent) { return run_respond(ctx_, agent).dump(); }
  std::string extract(std::optional<std::string> agent) { return run_extract(ctx_, agent).dump(); }
  std::string match(const std::string& cand, const std::string& ref) {
    return run_match(ctx_, cand, ref).dump();
  }
  std::string score(const std::string& mode, std::optional<std::filesystem::path> topics) {
    return run_score(ctx_, ScoreOptions{aggregate_mode_from_string(mode), std::move(topics)}).dump();
  }
  std::string report() { return run_report(ctx_); }
  std::vector<std::string> validate() {
    std::vector<std::string> out;
    for (const auto& v : run_validate(ctx_)) {
      out.push_back(std::string(to_string(v.kind)) + " " + v.subject + ": " + v.detail);
    }
    return out;
  }
  py::dict stats() const {
    const auto s = registry_.total_stats();
    py::dict d;
    d["transport_calls"] = s.transport_calls;
    d["cache_hits"] = s.cache_hits;
    d["retries"] = s.retries;
    d["reasks"] = s.reasks;
    return d;
  }

 private:
  BackendRegistry registry_;
  StageContext ctx_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "normalign core bindings";

  auto base = py::register_exception<Error>(m, "NormalignError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<MissingStageInput>(m, "MissingStageInput", base.ptr());
  py::register_exception<PartialMatrix>(m, "PartialMatrix", base.ptr());
  py::register_exception<EmptyInput>(m, "EmptyInput", PyExc_ValueError);
  py::register_exception<LengthMismatch>(m, "LengthMismatch", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);

  m.def("default_resources_dir", [] { return default_resources_dir(); });

  m.def(
      "normalize_negation",
      [](const std::string& text, const std::string& stance,
         const std::vector<std::filesystem::path>& lexicons) {
        const auto lexicon = NegationLexicon::load_all(lexicons);
        const auto out = normalize_negation(text, stance_from_string(stance), lexicon);
        return py::make_tuple(out.text, std::string(to_string(out.stance)), out.flipped);
      },
      py::arg("text"), py::arg("stance"), py::arg("lexicons"));

  m.def(
      "score_matrix",
      [](const std::vector<std::string>& cand, const std::vector<std::string>& ref,
         const std::vector<std::vector<bool>>& matched) {
        return scores_dict(compute_scores(build_matrix(cand, ref, matched)));
      },
      py::arg("cand"), py::arg("ref"), py::arg("matched"));

  m.def(
      "aggregate",
      [](const std::vector<std::array<std::size_t, 4>>& counts, const std::string& mode) {
        std::vector<AlignmentScores> per;
        for (const auto& c : counts) per.push_back(AlignmentScores::from_counts(c[0], c[1], c[2], c[3]));
        const auto a = aggregate(per, aggregate_mode_from_string(mode));
        py::dict d;
        d["mode"] = std::string(to_string(a.mode));
        d["n_dilemmas"] = a.n_dilemmas;
        d["saa"] = exact(a.saa);
        d["eaa"] = exact(a.eaa);
        d["avg"] = exact(a.avg);
        d["saa_skipped"] = a.saa_skipped;
        d["eaa_skipped"] = a.eaa_skipped;
        d["avg_skipped"] = a.avg_skipped;
        return d;
      },
      py::arg("counts"), py::arg("mode") = "macro");

  m.def(
      "cohen_kappa",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        return exact(cohen_kappa(a, b));
      },
      py::arg("labels_a"), py::arg("labels_b"));

  m.def(
      "classification_report",
      [](const std::vector<std::string>& gold, const std::vector<std::string>& predicted, int decimals) {
        const auto r = classification_report(gold, predicted);
        py::list classes;
        for (const auto& c : r.classes) classes.append(class_dict(c));
        py::dict d;
        d["classes"] = classes;
        d["accuracy"] = to_exact_string(r.accuracy);
        d["macro"] = class_dict(r.macro);
        d["weighted"] = class_dict(r.weighted);
        d["total"] = r.total;
        d["text"] = r.render(decimals);
        return d;
      },
      py::arg("gold"), py::arg("predicted"), py::arg("decimals") = 2);

  m.def("render_fixed", [](const std::string& v, int decimals) { return render_fixed(parse_exact(v), decimals); },
        py::arg("value"), py::arg("decimals"));

  m.def("segment_sentences", [](const std::string& text) { return segment_sentences(text); },
        py::arg("text"));

  m.def(
      "chunk",
      [](const std::vector<std::string>& sentences, std::size_t size, std::size_t stride) {
        py::list out;
        for (const auto& c : chunk(sentences, size, stride)) {
          out.append(py::make_tuple(c.span.begin, c.span.end, c.text));
        }
        return out;
      },
      py::arg("sentences"), py::arg("size") = 3, py::arg("stride") = 1);

  m.def(
      "detect_award_section",
      [](const std::vector<std::string>& sentences, const std::vector<std::string>& keywords) -> py::object {
        const auto span = detect_award_section(sentences, keywords);
        if (!span) return py::none();
        return py::make_tuple(span->begin, span->end);
      },
      py::arg("sentences"), py::arg("keywords"));

  m.def(
      "annotation_stats",
      [](const std::filesystem::path& directory, const std::string& kind) {
        return AnnotationStore(directory).stats(target_kind_from_string(kind)).dump();
      },
      py::arg("directory"), py::arg("kind"));

  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init<const std::filesystem::path&, const std::filesystem::path&, std::size_t, std::string>(),
           py::arg("config"), py::arg("data_dir"), py::arg("parallelism") = 0, py::arg("now") = "")
      .def("ingest", &Pipeline::ingest, py::arg("transcripts") = std::nullopt,
           py::call_guard<py::gil_scoped_release>())
      .def("respond", &Pipeline::respond, py::arg("agent"), py::call_guard<py::gil_scoped_release>())
      .def("extract", &Pipeline::extract, py::arg("agent") = std::nullopt,
           py::call_guard<py::gil_scoped_release>())
      .def("match", &Pipeline::match, py::arg("cand"), py::arg("ref") = kPanelAgent,
           py::call_guard<py::gil_scoped_release>())
      .def("score", &Pipeline::score, py::arg("mode") = "macro", py::arg("topics") = std::nullopt,
           py::call_guard<py::gil_scoped_release>())
      .def("report", &Pipeline::report, py::call_guard<py::gil_scoped_release>())
      .def("validate", &Pipeline::validate)
      .def("stats", &Pipeline::stats);
}
