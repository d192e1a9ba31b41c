#pragma once

#include "normalign/rational.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace normalign {

enum class Stance { Advised, NotAdvised };

std::string_view to_string(Stance stance);
Stance stance_from_string(std::string_view text);
Stance flip(Stance stance);

struct Turn {
  std::string speaker;
  std::string text;

  bool operator==(const Turn&) const = default;
};

/// One diarized episode transcript with the one-sentence dilemma summaries
/// from the episode metadata.
struct Transcript {
  std::string episode_id;
  std::vector<Turn> turns;
  std::vector<std::string> summaries;
  std::string aired_on;

  bool operator==(const Transcript&) const = default;
};

struct Dilemma {
  std::string id;
  std::string episode_id;
  std::string summary;
  std::string body;
  std::string question;

  bool operator==(const Dilemma&) const = default;
};

struct AgentResponse {
  std::string agent_id;
  std::string dilemma_id;
  std::string text;
  std::string created_at;

  /// Each agent answers a dilemma once, so (agent, dilemma) names the response.
  std::string id() const { return agent_id + "/" + dilemma_id; }

  bool operator==(const AgentResponse&) const = default;
};

/// An actionable recommendation in positive form; negation lives in `stance`.
struct Solution {
  std::string id;
  std::string dilemma_id;
  std::string agent_id;
  std::string text;
  Stance stance = Stance::Advised;
  bool negation_flipped = false;
  std::string source_response_id;

  bool operator==(const Solution&) const = default;
};

/// Verdicts on the four component matching rules: action order, action
/// semantics, conditions, and entities/actors.
struct CmrVerdict {
  bool order_ok = false;
  bool semantics_ok = false;
  bool conditions_ok = false;
  bool entities_ok = false;
  std::string rationale;

  bool all_ok() const { return order_ok && semantics_ok && conditions_ok && entities_ok; }
  static CmrVerdict all(bool value, std::string rationale = {});

  bool operator==(const CmrVerdict&) const = default;
};

struct MatchJudgment {
  std::string cand_solution_id;
  std::string ref_solution_id;
  CmrVerdict verdicts;
  bool matched = false;
  bool stance_agree = false;

  /// Derives `matched` from the verdicts and `stance_agree` from the stances.
  static MatchJudgment make(const std::string& cand_id, Stance cand_stance,
                            const std::string& ref_id, Stance ref_stance, CmrVerdict verdicts);

  bool operator==(const MatchJudgment&) const = default;
};

using SolutionPair = std::pair<std::string, std::string>;

/// All pairwise judgments between a candidate and a reference solution set
/// for one dilemma.
struct MatchMatrix {
  std::string dilemma_id;
  std::string cand_agent;
  std::string ref_agent;
  std::vector<std::string> cand_ids;
  std::vector<std::string> ref_ids;
  std::map<SolutionPair, MatchJudgment> judgments;
  bool partial = false;
  std::vector<std::string> errors;

  /// True when not partial and judgments cover cand_ids x ref_ids exactly.
  bool complete() const;

  /// Judgments in cand-major, ref-minor order.
  std::vector<MatchJudgment> ordered() const;

  bool operator==(const MatchMatrix&) const = default;
};

/// SAA/EAA/AVG with the counts they are computed from. Only constructible
/// from counts, so the arithmetic invariants always hold.
class AlignmentScores {
 public:
  AlignmentScores() = default;

  static AlignmentScores from_counts(std::size_t n_agree, std::size_t n_conflict,
                                     std::size_t n_cand, std::size_t n_ref);

  std::size_t n_agree() const { return n_agree_; }
  std::size_t n_conflict() const { return n_conflict_; }
  std::size_t n_cand() const { return n_cand_; }
  std::size_t n_ref() const { return n_ref_; }

  const MaybeRational& saa() const { return saa_; }
  const MaybeRational& eaa() const { return eaa_; }
  const MaybeRational& avg() const { return avg_; }

  /// Many-to-many matching can push |A| past |S_cand| + |S_ref|.
  bool saa_exceeds_one() const { return saa_ && *saa_ > 1; }

  bool operator==(const AlignmentScores&) const = default;

 private:
  std::size_t n_agree_ = 0;
  std::size_t n_conflict_ = 0;
  std::size_t n_cand_ = 0;
  std::size_t n_ref_ = 0;
  MaybeRational saa_;
  MaybeRational eaa_;
  MaybeRational avg_;
};

/// Topic proportions per dilemma, ingested as-is from an external topic model.
struct TopicMatrix {
  std::vector<std::string> topic_names;
  std::map<std::string, std::vector<Rational>> proportions;

  bool operator==(const TopicMatrix&) const = default;
};

enum class TargetKind { MatchPair, Extraction, DilemmaMapping, DilemmaContent };

std::string_view to_string(TargetKind kind);
TargetKind target_kind_from_string(std::string_view text);

struct AnnotationRecord {
  std::string task_id;
  std::string annotator_id;
  TargetKind target_kind = TargetKind::MatchPair;
  std::string target_ref;
  std::string label;
  std::vector<std::string> issues;
  std::string created_at;

  bool operator==(const AnnotationRecord&) const = default;
};

}  // namespace normalign
