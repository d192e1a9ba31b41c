#pragma once

// Pairwise matching of candidate solutions against reference solutions
// under the four component matching rules (CMRs).

#include "normalign/model_client.hpp"
#include "normalign/prompt_template.hpp"
#include "normalign/types.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace normalign {

/// Decides the CMR verdicts for a pair. Judges see texts only; stance is
/// applied afterwards by judge_pair.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual CmrVerdict judge(const Solution& a, const Solution& b, const Dilemma& dilemma) const = 0;
  /// Recorded in matches.meta.json.
  virtual std::string describe() const = 0;
  /// Hash of the prompt template, empty for judges without one.
  virtual std::string template_hash() const { return {}; }
};

/// Built-in deterministic judge: all four rules hold iff the normalized texts
/// are equal. Symmetric by construction.
class EqualityJudge : public Judge {
 public:
  CmrVerdict judge(const Solution& a, const Solution& b, const Dilemma& dilemma) const override;
  std::string describe() const override { return "equality"; }
};

/// Asks a chat model for the four verdicts. Results are cached in memory per
/// (normalized texts, dilemma, template hash), so repeated pairs cost one call.
class LlmJudge : public Judge {
 public:
  LlmJudge(std::shared_ptr<const ChatClient> client, PromptTemplate prompt,
           double temperature = 0.0);

  static const SchemaHint& schema();

  CmrVerdict judge(const Solution& a, const Solution& b, const Dilemma& dilemma) const override;
  std::string describe() const override;
  std::string template_hash() const override { return prompt_.hash(); }

  /// Prompt sent for a pair; exposed for golden tests.
  std::string render(const Solution& a, const Solution& b, const Dilemma& dilemma) const;

 private:
  std::shared_ptr<const ChatClient> client_;
  PromptTemplate prompt_;
  double temperature_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, CmrVerdict> cache_;
};

/// One judgment; `matched` is the conjunction of the verdicts and
/// `stance_agree` compares the stored stances.
MatchJudgment judge_pair(const Solution& cand, const Solution& ref, const Dilemma& dilemma,
                         const Judge& judge);

/// Judges the full cross product. Failed pairs are recorded in `errors` and
/// mark the matrix partial; the result does not depend on `parallelism`.
MatchMatrix match_all(const std::vector<Solution>& cand_set, const std::vector<Solution>& ref_set,
                      const Dilemma& dilemma, const Judge& judge, std::size_t parallelism = 1);

}  // namespace normalign
