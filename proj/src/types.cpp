#include "normalign/types.hpp"

#include "normalign/errors.hpp"

namespace normalign {

std::string_view to_string(Stance stance) {
  return stance == Stance::Advised ? "advised" : "not_advised";
}

Stance stance_from_string(std::string_view text) {
  if (text == "advised") return Stance::Advised;
  if (text == "not_advised") return Stance::NotAdvised;
  throw InvalidInput("unknown stance '" + std::string(text) + "'");
}

Stance flip(Stance stance) {
  return stance == Stance::Advised ? Stance::NotAdvised : Stance::Advised;
}

CmrVerdict CmrVerdict::all(bool value, std::string rationale) {
  return CmrVerdict{value, value, value, value, std::move(rationale)};
}

MatchJudgment MatchJudgment::make(const std::string& cand_id, Stance cand_stance,
                                  const std::string& ref_id, Stance ref_stance,
                                  CmrVerdict verdicts) {
  MatchJudgment judgment;
  judgment.cand_solution_id = cand_id;
  judgment.ref_solution_id = ref_id;
  judgment.matched = verdicts.all_ok();
  judgment.stance_agree = cand_stance == ref_stance;
  judgment.verdicts = std::move(verdicts);
  return judgment;
}

bool MatchMatrix::complete() const {
  if (partial) return false;
  if (judgments.size() != cand_ids.size() * ref_ids.size()) return false;
  for (const auto& cand : cand_ids) {
    for (const auto& ref : ref_ids) {
      if (!judgments.contains({cand, ref})) return false;
    }
  }
  return true;
}

std::vector<MatchJudgment> MatchMatrix::ordered() const {
  std::vector<MatchJudgment> out;
  out.reserve(judgments.size());
  for (const auto& cand : cand_ids) {
    for (const auto& ref : ref_ids) {
      if (auto it = judgments.find({cand, ref}); it != judgments.end()) out.push_back(it->second);
    }
  }
  return out;
}

AlignmentScores AlignmentScores::from_counts(std::size_t n_agree, std::size_t n_conflict,
                                             std::size_t n_cand, std::size_t n_ref) {
  AlignmentScores scores;
  scores.n_agree_ = n_agree;
  scores.n_conflict_ = n_conflict;
  scores.n_cand_ = n_cand;
  scores.n_ref_ = n_ref;
  if (n_cand + n_ref > 0) {
    scores.saa_ = Rational(n_agree) / Rational(n_cand + n_ref);
  }
  if (n_agree + n_conflict > 0) {
    scores.eaa_ = Rational(n_agree) / Rational(n_agree + n_conflict);
  }
  if (scores.saa_ && scores.eaa_) {
    scores.avg_ = (*scores.saa_ + *scores.eaa_) / 2;
  }
  return scores;
}

std::string_view to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::MatchPair:
      return "MatchPair";
    case TargetKind::Extraction:
      return "Extraction";
    case TargetKind::DilemmaMapping:
      return "DilemmaMapping";
    case TargetKind::DilemmaContent:
      return "DilemmaContent";
  }
  return "MatchPair";
}

TargetKind target_kind_from_string(std::string_view text) {
  if (text == "MatchPair") return TargetKind::MatchPair;
  if (text == "Extraction") return TargetKind::Extraction;
  if (text == "DilemmaMapping") return TargetKind::DilemmaMapping;
  if (text == "DilemmaContent") return TargetKind::DilemmaContent;
  throw InvalidInput("unknown target kind '" + std::string(text) + "'");
}

}  // namespace normalign
