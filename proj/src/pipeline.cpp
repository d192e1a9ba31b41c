#include "normalign/pipeline.hpp"

#include "normalign/annotation.hpp"
#include "normalign/corpus_pipeline.hpp"
#include "normalign/errors.hpp"
#include "normalign/extraction.hpp"
#include "normalign/matching.hpp"
#include "normalign/parallel.hpp"
#include "normalign/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace normalign {

namespace {

template <class T>
std::vector<T> read_required(const StageContext& ctx, const char* name, const char* stage) {
  const auto p = ctx.path(name);
  if (!std::filesystem::exists(p)) throw MissingStageInput(stage, p.string());
  return read_jsonl<T>(p);
}

template <class T>
std::vector<T> read_optional(const StageContext& ctx, const char* name) {
  const auto p = ctx.path(name);
  return std::filesystem::exists(p) ? read_jsonl<T>(p) : std::vector<T>{};
}

template <class T>
void apply_limit(const StageContext& ctx, std::vector<T>& items) {
  if (ctx.limit && items.size() > *ctx.limit) items.resize(*ctx.limit);
}

std::map<std::string, Dilemma> index_dilemmas(const std::vector<Dilemma>& dilemmas) {
  std::map<std::string, Dilemma> out;
  for (const auto& d : dilemmas) out.emplace(d.id, d);
  return out;
}

/// Rethrows the first failure, after logging every one of them.
template <class T>
void require_all(const std::vector<Outcome<T>>& outcomes, const std::vector<std::string>& labels,
                 const std::string& stage) {
  std::size_t failed = 0;
  std::exception_ptr first;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].ok()) continue;
    ++failed;
    if (!first) first = outcomes[i].error;
    spdlog::error("{}: {} failed: {}", stage, labels[i], outcomes[i].error_message());
  }
  if (!first) return;
  spdlog::error("{}: {} of {} items failed; nothing written", stage, failed, outcomes.size());
  std::rethrow_exception(first);
}

std::string dilemma_prompt_text(const Dilemma& d) { return d.body + "\n\n" + d.question; }

std::set<std::string> load_set(const std::filesystem::path& path) {
  std::set<std::string> out;
  for (const auto& line : text::read_lines(path)) out.insert(text::to_lower(line));
  return out;
}

bool owned_by(const std::string& solution_id, const std::string& agent) {
  return solution_id.rfind(agent + "/", 0) == 0;
}

Json encode_aggregate(const Aggregate& a) {
  return Json{{"n_dilemmas", a.n_dilemmas},
              {"n_agree", a.n_agree},
              {"n_conflict", a.n_conflict},
              {"n_cand", a.n_cand},
              {"n_ref", a.n_ref},
              {"saa", encode_metric(a.saa)},
              {"eaa", encode_metric(a.eaa)},
              {"avg", encode_metric(a.avg)},
              {"saa_exact", encode_exact(a.saa)},
              {"eaa_exact", encode_exact(a.eaa)},
              {"avg_exact", encode_exact(a.avg)},
              {"skipped", Json{{"saa", a.saa_skipped}, {"eaa", a.eaa_skipped}, {"avg", a.avg_skipped}}}};
}

Json encode_style(const StyleStats& s) {
  Json out{{"word_count", s.word_count}};
  for (const char* feature : kStyleFeatures) out[feature] = encode_metric(style_feature(s, feature));
  return out;
}

std::string json_cell(const Json& value) {
  if (value.is_null()) return {};
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

std::string render_exact(const Json& exact, int decimals) {
  if (exact.is_null()) return "n/a";
  return render_fixed(parse_exact(exact.get<std::string>()), decimals);
}

Json read_json_file(const std::filesystem::path& p, const char* stage) {
  if (!std::filesystem::exists(p)) throw MissingStageInput(stage, p.string());
  try {
    return Json::parse(read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(p.string() + ": " + e.what());
  }
}

}  // namespace

std::string StageContext::backend_for(const std::string& stage) const {
  if (auto it = backend_overrides.find(stage); it != backend_overrides.end()) return it->second;
  if (stage == "postprocess" && !config().stages.contains("postprocess")) {
    return backend_for("extract");
  }
  return config().stage_backend(stage);
}

const PipelineConfig& StageContext::config() const {
  if (!registry) throw ConfigError("stage needs a backend registry");
  return registry->config();
}

std::filesystem::path StageContext::lexicon(const std::string& file) const {
  return config().resources / "lexicons" / config().language / file;
}

PromptTemplate StageContext::prompt(const std::string& name) const {
  return PromptTemplate::load(config().resources / "prompts" / (name + ".prompt"));
}

std::string StageContext::timestamp() const { return now.empty() ? utc_now_iso() : now; }

Json run_ingest(const StageContext& ctx, const IngestStageOptions& options) {
  const auto source = options.transcripts.value_or(ctx.path(files::kTranscripts));
  if (!std::filesystem::exists(source)) throw IoError("missing transcripts " + source.string());
  auto transcripts = read_jsonl<Transcript>(source);
  apply_limit(ctx, transcripts);

  auto& registry = *ctx.registry;
  const SectionMapper mapper(registry.embedding(ctx.backend_for("embed")),
                             registry.chat(ctx.backend_for("verify")), ctx.prompt("verification"),
                             ctx.config().temperature("verify"));
  IngestOptions ingest;
  ingest.chunk_size = options.chunk_size;
  ingest.stride = options.stride;
  ingest.ceiling = options.ceiling;
  ingest.parallelism = ctx.parallelism;
  ingest.abbreviations = load_set(ctx.lexicon("abbreviations.txt"));
  ingest.award_keywords = text::read_lines(ctx.lexicon("award.txt"));
  ingest.dilemma_temperature = ctx.config().temperature("dilemma");
  ingest.panel_agent = kPanelAgent;
  ingest.created_at = ctx.timestamp();

  const auto result = ingest_transcripts(transcripts, mapper,
                                         *registry.chat(ctx.backend_for("dilemma")),
                                         ctx.prompt("dilemma"), ingest);

  auto responses = read_optional<AgentResponse>(ctx, files::kResponses);
  std::erase_if(responses, [](const AgentResponse& r) { return r.agent_id == kPanelAgent; });
  responses.insert(responses.begin(), result.panel_responses.begin(), result.panel_responses.end());

  write_jsonl(ctx.path(files::kDilemmas), result.dilemmas);
  write_jsonl_values(ctx.path(files::kAudit), result.audit);
  write_jsonl(ctx.path(files::kResponses), responses);

  std::map<std::string, std::size_t> paths, outcomes;
  for (const auto& record : result.audit) {
    ++paths[record.at("path").get<std::string>()];
    ++outcomes[record.at("outcome").get<std::string>()];
  }
  return Json{{"stage", "ingest"},
              {"episodes", transcripts.size() - result.episodes_skipped},
              {"episodes_without_summaries", result.episodes_skipped},
              {"summaries", result.audit.size()},
              {"dilemmas", result.dilemmas.size()},
              {"ceiling", result.ceiling},
              {"paths", paths},
              {"outcomes", outcomes}};
}

Json run_respond(const StageContext& ctx, const std::string& agent) {
  if (agent.empty() || agent == kPanelAgent) {
    throw InvalidInput("respond needs a candidate agent name other than '" +
                       std::string(kPanelAgent) + "'");
  }
  auto dilemmas = read_required<Dilemma>(ctx, files::kDilemmas, "ingest");
  apply_limit(ctx, dilemmas);

  std::string backend;
  if (auto it = ctx.backend_overrides.find("respond"); it != ctx.backend_overrides.end()) {
    backend = it->second;
  } else if (auto a = ctx.config().agents.find(agent); a != ctx.config().agents.end()) {
    backend = a->second;
  } else {
    backend = ctx.config().stage_backend("respond");
  }
  const auto client = ctx.registry->chat(backend);

  // The agent sees the dilemma alone: no system prompt, no instructions.
  std::vector<ChatRequest> requests;
  std::vector<std::string> labels;
  for (const auto& d : dilemmas) {
    ChatRequest request;
    request.user_prompt = dilemma_prompt_text(d);
    request.temperature = ctx.config().temperature("respond");
    requests.push_back(std::move(request));
    labels.push_back(d.id);
  }
  const auto outcomes = client->complete_batch(requests, ctx.parallelism);
  require_all(outcomes, labels, "respond");

  auto responses = read_optional<AgentResponse>(ctx, files::kResponses);
  std::erase_if(responses, [&](const AgentResponse& r) { return r.agent_id == agent; });
  const auto created_at = ctx.timestamp();
  for (std::size_t i = 0; i < dilemmas.size(); ++i) {
    responses.push_back(AgentResponse{agent, dilemmas[i].id, outcomes[i].get().text, created_at});
  }
  write_jsonl(ctx.path(files::kResponses), responses);
  return Json{{"stage", "respond"},
              {"agent", agent},
              {"backend", ctx.registry->describe(backend)},
              {"responses", dilemmas.size()}};
}

Json run_extract(const StageContext& ctx, const std::optional<std::string>& agent) {
  const auto dilemmas = index_dilemmas(read_required<Dilemma>(ctx, files::kDilemmas, "ingest"));
  auto responses = read_required<AgentResponse>(ctx, files::kResponses, "respond");
  if (agent) {
    std::erase_if(responses, [&](const AgentResponse& r) { return r.agent_id != *agent; });
    if (responses.empty()) throw InvalidInput("no responses from agent '" + *agent + "'");
  }
  apply_limit(ctx, responses);

  const SolutionExtractor extractor(
      ctx.registry->chat(ctx.backend_for("extract")),
      ctx.registry->chat(ctx.backend_for("postprocess")), ctx.prompt("extraction"),
      ctx.prompt("postprocess"), NegationLexicon::load(ctx.lexicon("negation.txt")),
      ExtractorOptions{ctx.config().temperature("extract"), ctx.config().temperature("postprocess")});

  std::vector<std::string> labels;
  for (const auto& r : responses) {
    if (!dilemmas.contains(r.dilemma_id)) {
      throw InvalidInput("response " + r.id() + " refers to unknown dilemma " + r.dilemma_id);
    }
    labels.push_back(r.id());
  }
  const auto outcomes = parallel_map(responses.size(), ctx.parallelism, [&](std::size_t i) {
    const auto& dilemma = dilemmas.at(responses[i].dilemma_id);
    auto extracted = extractor.extract(dilemma, responses[i]);
    auto all = std::move(extracted.advised);
    all.insert(all.end(), extracted.not_advised.begin(), extracted.not_advised.end());
    return extractor.postprocess(all, dilemma);
  });
  require_all(outcomes, labels, "extract");

  std::set<std::string> processed;
  for (const auto& r : responses) processed.insert(r.id());
  auto solutions = read_optional<Solution>(ctx, files::kSolutions);
  std::erase_if(solutions, [&](const Solution& s) {
    return !agent || processed.contains(s.source_response_id) || s.agent_id == *agent;
  });
  std::size_t advised = 0, flipped = 0, produced = 0;
  for (const auto& outcome : outcomes) {
    for (const auto& s : outcome.get()) {
      advised += s.stance == Stance::Advised;
      flipped += s.negation_flipped;
      ++produced;
      solutions.push_back(s);
    }
  }
  write_jsonl(ctx.path(files::kSolutions), solutions);
  return Json{{"stage", "extract"},
              {"responses", responses.size()},
              {"solutions", produced},
              {"advised", advised},
              {"not_advised", produced - advised},
              {"negation_flipped", flipped}};
}

Json run_match(const StageContext& ctx, const std::string& cand, const std::string& ref) {
  if (cand == ref) throw InvalidInput("candidate and reference must differ");
  const auto dilemmas = read_required<Dilemma>(ctx, files::kDilemmas, "ingest");
  const auto responses = read_required<AgentResponse>(ctx, files::kResponses, "respond");
  const auto solutions = read_required<Solution>(ctx, files::kSolutions, "extract");

  std::set<std::string> cand_answered, ref_answered;
  for (const auto& r : responses) {
    if (r.agent_id == cand) cand_answered.insert(r.dilemma_id);
    if (r.agent_id == ref) ref_answered.insert(r.dilemma_id);
  }
  if (cand_answered.empty()) throw InvalidInput("no responses from candidate '" + cand + "'");
  if (ref_answered.empty()) throw InvalidInput("no responses from reference '" + ref + "'");

  std::vector<Dilemma> selected;
  for (const auto& d : dilemmas) {
    if (cand_answered.contains(d.id) && ref_answered.contains(d.id)) selected.push_back(d);
  }
  apply_limit(ctx, selected);

  std::map<std::string, std::vector<Solution>> cand_sets, ref_sets;
  for (const auto& s : solutions) {
    if (s.agent_id == cand) cand_sets[s.dilemma_id].push_back(s);
    if (s.agent_id == ref) ref_sets[s.dilemma_id].push_back(s);
  }

  const auto judge_name = ctx.backend_for("match");
  std::unique_ptr<Judge> judge;
  if (judge_name == BackendRegistry::kEqualityJudge) {
    judge = std::make_unique<EqualityJudge>();
  } else {
    judge = std::make_unique<LlmJudge>(ctx.registry->chat(judge_name), ctx.prompt("matching"),
                                       ctx.config().temperature("match"));
  }

  std::vector<Json> records;
  Json dilemma_meta = Json::array();
  std::size_t judgments = 0, matched = 0, partial = 0;
  for (const auto& d : selected) {
    const auto matrix = match_all(cand_sets[d.id], ref_sets[d.id], d, *judge, ctx.parallelism);
    for (const auto& e : matrix.errors) spdlog::error("match {}: {}", d.id, e);
    for (const auto& j : matrix.ordered()) {
      records.push_back(encode(MatchRecord{d.id, j}));
      ++judgments;
      matched += j.matched;
    }
    partial += matrix.partial;
    dilemma_meta.push_back(Json{{"id", d.id},
                                {"n_cand", matrix.cand_ids.size()},
                                {"n_ref", matrix.ref_ids.size()},
                                {"partial", matrix.partial},
                                {"errors", matrix.errors}});
  }

  // Replace this comparison's records and meta entry, keep the others.
  std::vector<Json> kept;
  if (std::filesystem::exists(ctx.path(files::kMatches))) {
    for (auto& value : read_jsonl_values(ctx.path(files::kMatches))) {
      const auto c = value.at("cand_solution_id").get<std::string>();
      const auto r = value.at("ref_solution_id").get<std::string>();
      if (!(owned_by(c, cand) && owned_by(r, ref))) kept.push_back(std::move(value));
    }
  }
  kept.insert(kept.end(), records.begin(), records.end());

  Json meta{{"comparisons", Json::array()}};
  if (std::filesystem::exists(ctx.path(files::kMatchesMeta))) {
    const auto old = read_json_file(ctx.path(files::kMatchesMeta), "match");
    for (const auto& c : old.value("comparisons", Json::array())) {
      if (!(c.at("cand") == cand && c.at("ref") == ref)) meta["comparisons"].push_back(c);
    }
  }
  meta["comparisons"].push_back(Json{{"cand", cand},
                                     {"ref", ref},
                                     {"judge", judge->describe()},
                                     {"template_hash", judge->template_hash()},
                                     {"dilemmas", dilemma_meta}});

  write_jsonl_values(ctx.path(files::kMatches), kept);
  write_text_atomic(ctx.path(files::kMatchesMeta), dump_pretty(meta) + "\n");
  if (partial > 0) {
    throw Error(std::to_string(partial) + " dilemma(s) have failed judgments and were marked " +
                "partial; re-run `match` to complete them");
  }
  return Json{{"stage", "match"},
              {"cand", cand},
              {"ref", ref},
              {"judge", judge->describe()},
              {"dilemmas", selected.size()},
              {"judgments", judgments},
              {"matched", matched}};
}

std::vector<MatchMatrix> load_matrices(const StageContext& ctx, const Json& comparison,
                                       const std::vector<Solution>& solutions) {
  const auto cand = comparison.at("cand").get<std::string>();
  const auto ref = comparison.at("ref").get<std::string>();
  if (!std::filesystem::exists(ctx.path(files::kMatches))) {
    throw MissingStageInput("match", ctx.path(files::kMatches).string());
  }
  std::map<std::string, std::vector<MatchRecord>> by_dilemma;
  for (const auto& value : read_jsonl_values(ctx.path(files::kMatches))) {
    auto record = decode<MatchRecord>(value);
    if (owned_by(record.judgment.cand_solution_id, cand) &&
        owned_by(record.judgment.ref_solution_id, ref)) {
      by_dilemma[record.dilemma_id].push_back(std::move(record));
    }
  }
  std::vector<MatchMatrix> out;
  for (const auto& entry : comparison.at("dilemmas")) {
    MatchMatrix m;
    m.dilemma_id = entry.at("id").get<std::string>();
    m.cand_agent = cand;
    m.ref_agent = ref;
    m.partial = entry.value("partial", false);
    m.errors = entry.value("errors", std::vector<std::string>{});
    for (const auto& s : solutions) {
      if (s.dilemma_id != m.dilemma_id) continue;
      if (s.agent_id == cand) m.cand_ids.push_back(s.id);
      if (s.agent_id == ref) m.ref_ids.push_back(s.id);
    }
    if (m.cand_ids.size() != entry.at("n_cand").get<std::size_t>() ||
        m.ref_ids.size() != entry.at("n_ref").get<std::size_t>()) {
      throw InvalidInput("solutions for " + m.dilemma_id + " changed since matching " + cand +
                         " against " + ref + "; re-run `match`");
    }
    for (const auto& r : by_dilemma[m.dilemma_id]) {
      m.judgments.emplace(SolutionPair{r.judgment.cand_solution_id, r.judgment.ref_solution_id},
                          r.judgment);
    }
    out.push_back(std::move(m));
  }
  return out;
}

Json run_score(const StageContext& ctx, const ScoreOptions& options) {
  if (!std::filesystem::exists(ctx.path(files::kMatches))) {
    throw MissingStageInput("match", ctx.path(files::kMatches).string());
  }
  const auto meta = read_json_file(ctx.path(files::kMatchesMeta), "match");
  const auto solutions = read_required<Solution>(ctx, files::kSolutions, "extract");

  std::optional<TopicMatrix> topics;
  if (options.topics) {
    topics = read_topics_csv(*options.topics);
  } else if (std::filesystem::exists(ctx.path(files::kTopics))) {
    topics = read_topics_csv(ctx.path(files::kTopics));
  }

  Json per_dilemma = Json::array();
  Json aggregates = Json::object();
  Json topic_scores = Json::object();
  Json comparisons = Json::array();
  for (const auto& comparison : meta.at("comparisons")) {
    const auto cand = comparison.at("cand").get<std::string>();
    const auto ref = comparison.at("ref").get<std::string>();
    std::vector<AlignmentScores> scores;
    std::map<std::string, MaybeRational> avg_by_dilemma;
    std::size_t partial_skipped = 0;
    for (const auto& matrix : load_matrices(ctx, comparison, solutions)) {
      if (!matrix.complete()) {
        spdlog::warn("score: skipping partial matrix {} ({} vs {})", matrix.dilemma_id, cand, ref);
        ++partial_skipped;
        continue;
      }
      const auto s = compute_scores(matrix);
      Json row{{"cand", cand}, {"ref", ref}, {"dilemma_id", matrix.dilemma_id}};
      row.update(encode(s));
      per_dilemma.push_back(std::move(row));
      avg_by_dilemma[matrix.dilemma_id] = s.avg();
      scores.push_back(s);
    }
    Json agg{{"ref", ref}};
    if (scores.empty()) {
      agg["macro"] = Json();
      agg["micro"] = Json();
    } else {
      agg["macro"] = encode_aggregate(aggregate(scores, AggregateMode::Macro));
      agg["micro"] = encode_aggregate(aggregate(scores, AggregateMode::Micro));
    }
    aggregates[cand] = std::move(agg);
    if (topics) {
      Json t = Json::object();
      for (const auto& [topic, value] : topic_weighted_avg(avg_by_dilemma, *topics)) {
        t[topic] = Json{{"avg", encode_metric(value)}, {"avg_exact", encode_exact(value)}};
      }
      topic_scores[cand] = std::move(t);
    }
    comparisons.push_back(Json{{"cand", cand},
                               {"ref", ref},
                               {"judge", comparison.value("judge", "")},
                               {"template_hash", comparison.value("template_hash", "")},
                               {"dilemmas_scored", scores.size()},
                               {"partial_skipped", partial_skipped}});
  }

  Json style = Json::object();
  if (std::filesystem::exists(ctx.path(files::kResponses))) {
    const auto lexicons = StyleLexicons::load(ctx.lexicon(""));
    std::map<std::string, std::vector<StyleStats>> by_agent;
    for (const auto& r : read_jsonl<AgentResponse>(ctx.path(files::kResponses))) {
      by_agent[r.agent_id].push_back(stylometrics(r, lexicons));
    }
    for (const auto& [agent, stats] : by_agent) {
      auto entry = encode_style(mean_style(stats));
      entry["responses"] = stats.size();
      style[agent] = std::move(entry);
    }
  }

  Json prompt_hashes = Json::object();
  for (const auto& name : {"dilemma", "extraction", "matching", "postprocess", "verification"}) {
    prompt_hashes[name] = ctx.prompt(name).hash();
  }
  Json report{{"per_dilemma", std::move(per_dilemma)},
              {"aggregate", std::move(aggregates)},
              {"topics", topics ? std::move(topic_scores) : Json()},
              {"style", std::move(style)},
              {"meta",
               Json{{"mode", std::string(to_string(options.mode))},
                    {"comparisons", std::move(comparisons)},
                    {"template_hashes", std::move(prompt_hashes)},
                    {"language", ctx.config().language}}}};
  write_text_atomic(ctx.path(files::kReport), dump_pretty(report) + "\n");

  Json summary{{"stage", "score"}, {"mode", std::string(to_string(options.mode))}};
  Json headline = Json::object();
  for (const auto& [cand, agg] : report.at("aggregate").items()) {
    headline[cand] = agg.at(std::string(to_string(options.mode)));
  }
  summary["aggregate"] = std::move(headline);
  return summary;
}

std::string run_report(const StageContext& ctx) {
  const auto report = read_json_file(ctx.path(files::kReport), "score");
  const auto mode = report.at("meta").value("mode", std::string("macro"));

  std::vector<std::string> lines{csv_line({"cand", "ref", "dilemma_id", "n_agree", "n_conflict",
                                           "n_cand", "n_ref", "saa", "eaa", "avg",
                                           "saa_exceeds_one"})};
  for (const auto& row : report.at("per_dilemma")) {
    lines.push_back(csv_line({json_cell(row.at("cand")), json_cell(row.at("ref")),
                              json_cell(row.at("dilemma_id")), json_cell(row.at("n_agree")),
                              json_cell(row.at("n_conflict")), json_cell(row.at("n_cand")),
                              json_cell(row.at("n_ref")), json_cell(row.at("saa")),
                              json_cell(row.at("eaa")), json_cell(row.at("avg")),
                              json_cell(row.at("saa_exceeds_one"))}));
  }
  write_text_atomic(ctx.path("report_per_dilemma.csv"), text::join(lines, ""));

  lines = {csv_line({"cand", "ref", "mode", "n_dilemmas", "saa", "eaa", "avg", "saa_skipped",
                     "eaa_skipped", "avg_skipped"})};
  std::ostringstream table;
  table << std::left << std::setw(20) << "candidate" << std::setw(12) << "reference"
        << std::setw(8) << "SAA" << std::setw(8) << "EAA" << std::setw(8) << "AVG"
        << "dilemmas\n";
  for (const auto& [cand, agg] : report.at("aggregate").items()) {
    for (const auto* m : {"macro", "micro"}) {
      const auto& a = agg.at(m);
      if (a.is_null()) continue;
      lines.push_back(csv_line({cand, json_cell(agg.at("ref")), m, json_cell(a.at("n_dilemmas")),
                                json_cell(a.at("saa")), json_cell(a.at("eaa")),
                                json_cell(a.at("avg")), json_cell(a.at("skipped").at("saa")),
                                json_cell(a.at("skipped").at("eaa")),
                                json_cell(a.at("skipped").at("avg"))}));
      if (mode == m) {
        table << std::setw(20) << cand << std::setw(12) << agg.at("ref").get<std::string>()
              << std::setw(8) << render_exact(a.at("saa_exact"), 2) << std::setw(8)
              << render_exact(a.at("eaa_exact"), 2) << std::setw(8)
              << render_exact(a.at("avg_exact"), 2) << a.at("n_dilemmas").get<std::size_t>()
              << "\n";
      }
    }
  }
  write_text_atomic(ctx.path("report_aggregate.csv"), text::join(lines, ""));

  if (!report.at("topics").is_null()) {
    lines = {csv_line({"cand", "topic", "avg"})};
    for (const auto& [cand, topics] : report.at("topics").items()) {
      for (const auto& [topic, value] : topics.items()) {
        lines.push_back(csv_line({cand, topic, json_cell(value.at("avg"))}));
      }
    }
    write_text_atomic(ctx.path("report_topics.csv"), text::join(lines, ""));
  }

  std::vector<std::string> header{"agent", "responses", "word_count"};
  for (const char* f : kStyleFeatures) header.emplace_back(f);
  lines = {csv_line(header)};
  for (const auto& [agent, s] : report.at("style").items()) {
    std::vector<std::string> row{agent, json_cell(s.at("responses")), json_cell(s.at("word_count"))};
    for (const char* f : kStyleFeatures) row.push_back(json_cell(s.at(f)));
    lines.push_back(csv_line(row));
  }
  write_text_atomic(ctx.path("report_style.csv"), text::join(lines, ""));
  table << "(" << mode << " aggregation; values rounded half-up)\n";
  return table.str();
}

std::vector<Violation> run_validate(const StageContext& ctx) {
  Corpus corpus;
  corpus.episodes = read_optional<Transcript>(ctx, files::kTranscripts);
  corpus.dilemmas = read_optional<Dilemma>(ctx, files::kDilemmas);
  corpus.responses = read_optional<AgentResponse>(ctx, files::kResponses);
  if (corpus.episodes.empty() && corpus.dilemmas.empty() && corpus.responses.empty()) {
    throw MissingStageInput("ingest", ctx.path(files::kDilemmas).string());
  }
  return validate_corpus(corpus);
}

std::filesystem::path prepare_annotation(const StageContext& ctx, const ServeSetup& setup) {
  const auto dir = ctx.data_dir / files::kAnnotationDir;
  if (std::filesystem::exists(dir / "tasks.jsonl")) return dir;

  const auto dilemmas = read_optional<Dilemma>(ctx, files::kDilemmas);
  const auto responses = read_optional<AgentResponse>(ctx, files::kResponses);
  const auto solutions = read_optional<Solution>(ctx, files::kSolutions);
  std::vector<AnnotationTask> tasks;

  if (std::filesystem::exists(ctx.path(files::kMatchesMeta))) {
    const auto meta = read_json_file(ctx.path(files::kMatchesMeta), "match");
    std::vector<MatchMatrix> matrices;
    for (const auto& comparison : meta.at("comparisons")) {
      auto more = load_matrices(ctx, comparison, solutions);
      matrices.insert(matrices.end(), more.begin(), more.end());
    }
    std::map<std::string, Solution> by_id;
    for (const auto& s : solutions) by_id.emplace(s.id, s);
    auto match = sample_match_tasks(matrices, by_id, index_dilemmas(dilemmas), setup.per_cell,
                                    ctx.seed);
    tasks.insert(tasks.end(), match.begin(), match.end());
  }
  if (std::filesystem::exists(ctx.path(files::kAudit))) {
    auto mapping = mapping_tasks(read_jsonl_values(ctx.path(files::kAudit)));
    tasks.insert(tasks.end(), mapping.begin(), mapping.end());
  }
  std::vector<AgentResponse> panel, others;
  for (const auto& r : responses) (r.agent_id == kPanelAgent ? panel : others).push_back(r);
  auto content = content_tasks(dilemmas, panel);
  tasks.insert(tasks.end(), content.begin(), content.end());
  if (!solutions.empty()) {
    auto extraction = extraction_tasks(dilemmas, responses, solutions);
    tasks.insert(tasks.end(), extraction.begin(), extraction.end());
  }
  if (tasks.empty()) throw MissingStageInput("ingest", ctx.path(files::kDilemmas).string());
  assign_tasks(tasks, setup.annotators, setup.overlap);
  AnnotationStore::write_tasks(dir, tasks);
  return dir;
}

}  // namespace normalign
