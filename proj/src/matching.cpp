#include "normalign/matching.hpp"

#include "normalign/errors.hpp"
#include "normalign/hashing.hpp"
#include "normalign/parallel.hpp"
#include "normalign/text.hpp"

#include <spdlog/spdlog.h>

#include <set>

namespace normalign {

namespace {

std::string dilemma_text(const Dilemma& dilemma) {
  if (dilemma.question.empty()) return dilemma.body;
  if (dilemma.body.empty()) return dilemma.question;
  return dilemma.body + "\n\n" + dilemma.question;
}

void check_unique(const std::vector<Solution>& set, std::string_view side) {
  std::set<std::string> ids;
  for (const auto& s : set) {
    if (!ids.insert(s.id).second) {
      throw InvalidInput("duplicate solution id " + s.id + " in " + std::string(side) + " set");
    }
  }
}

}  // namespace

CmrVerdict EqualityJudge::judge(const Solution& a, const Solution& b, const Dilemma&) const {
  const bool equal = text::normalize_for_compare(a.text) == text::normalize_for_compare(b.text);
  return CmrVerdict::all(equal, equal ? "normalized texts are equal" : "normalized texts differ");
}

LlmJudge::LlmJudge(std::shared_ptr<const ChatClient> client, PromptTemplate prompt,
                   double temperature)
    : client_(std::move(client)), prompt_(std::move(prompt)), temperature_(temperature) {
  if (!client_) throw std::invalid_argument("LlmJudge needs a chat client");
}

const SchemaHint& LlmJudge::schema() {
  // Rationale first: the model reasons over each rule before deciding.
  static const SchemaHint schema{"cmr_verdict",
                                 {{"rationale", FieldType::String, true},
                                  {"order", FieldType::Boolean, true},
                                  {"semantics", FieldType::Boolean, true},
                                  {"conditions", FieldType::Boolean, true},
                                  {"entities", FieldType::Boolean, true},
                                  {"match", FieldType::Boolean, false}}};
  return schema;
}

std::string LlmJudge::describe() const { return "llm:" + client_->model_ref(); }

std::string LlmJudge::render(const Solution& a, const Solution& b, const Dilemma& dilemma) const {
  return prompt_.render(
      {{"dilemma", dilemma_text(dilemma)}, {"solution_a", a.text}, {"solution_b", b.text}});
}

CmrVerdict LlmJudge::judge(const Solution& a, const Solution& b, const Dilemma& dilemma) const {
  const std::string key = sha256_hex(text::normalize_for_compare(a.text) + '\x1f' +
                                     text::normalize_for_compare(b.text) + '\x1f' + dilemma.id +
                                     '\x1f' + prompt_.hash());
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }

  ChatRequest request;
  request.user_prompt = render(a, b, dilemma);
  request.schema_hint = schema();
  request.temperature = temperature_;
  const Json parsed = *client_->complete(request).parsed;

  CmrVerdict verdict;
  verdict.order_ok = parsed.at("order").get<bool>();
  verdict.semantics_ok = parsed.at("semantics").get<bool>();
  verdict.conditions_ok = parsed.at("conditions").get<bool>();
  verdict.entities_ok = parsed.at("entities").get<bool>();
  verdict.rationale = parsed.at("rationale").get<std::string>();
  if (const auto m = parsed.find("match"); m != parsed.end() && m->get<bool>() != verdict.all_ok()) {
    spdlog::warn("judge said match={} for {} vs {} but the rules give {}; using the rules",
                 m->get<bool>(), a.id, b.id, verdict.all_ok());
  }

  std::lock_guard lock(mutex_);
  return cache_.emplace(key, std::move(verdict)).first->second;
}

MatchJudgment judge_pair(const Solution& cand, const Solution& ref, const Dilemma& dilemma,
                         const Judge& judge) {
  if (cand.dilemma_id != ref.dilemma_id) {
    throw InvalidInput("cannot match " + cand.id + " (" + cand.dilemma_id + ") against " + ref.id +
                       " (" + ref.dilemma_id + ")");
  }
  // Stance-blind: the judge only ever sees texts.
  return MatchJudgment::make(cand.id, cand.stance, ref.id, ref.stance,
                             judge.judge(cand, ref, dilemma));
}

MatchMatrix match_all(const std::vector<Solution>& cand_set, const std::vector<Solution>& ref_set,
                      const Dilemma& dilemma, const Judge& judge, std::size_t parallelism) {
  check_unique(cand_set, "candidate");
  check_unique(ref_set, "reference");
  MatchMatrix matrix;
  matrix.dilemma_id = dilemma.id;
  for (const auto& s : cand_set) {
    if (s.dilemma_id != dilemma.id) throw InvalidInput("solution " + s.id + " is not for " + dilemma.id);
    matrix.cand_ids.push_back(s.id);
    if (matrix.cand_agent.empty()) matrix.cand_agent = s.agent_id;
  }
  for (const auto& s : ref_set) {
    if (s.dilemma_id != dilemma.id) throw InvalidInput("solution " + s.id + " is not for " + dilemma.id);
    matrix.ref_ids.push_back(s.id);
    if (matrix.ref_agent.empty()) matrix.ref_agent = s.agent_id;
  }

  const std::size_t n_ref = ref_set.size();
  const auto outcomes = parallel_map(cand_set.size() * n_ref, parallelism, [&](std::size_t i) {
    return judge_pair(cand_set[i / n_ref], ref_set[i % n_ref], dilemma, judge);
  });

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& outcome = outcomes[i];
    if (outcome.ok()) {
      const auto& j = *outcome.value;
      matrix.judgments.emplace(SolutionPair{j.cand_solution_id, j.ref_solution_id}, j);
      continue;
    }
    // A credential problem is not a per-pair failure.
    try {
      std::rethrow_exception(outcome.error);
    } catch (const AuthError&) {
      throw;
    } catch (...) {
    }
    matrix.partial = true;
    matrix.errors.push_back(cand_set[i / n_ref].id + " x " + ref_set[i % n_ref].id + ": " +
                            outcome.error_message());
  }
  return matrix;
}

}  // namespace normalign
