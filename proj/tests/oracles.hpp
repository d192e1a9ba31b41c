#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the metrics implementation.

#include "normalign/rational.hpp"
#include "normalign/types.hpp"

#include <array>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace normalign::testing {

/// A match matrix as plain arrays: stances per side and a match bit per pair.
struct MatrixCase {
  std::vector<Stance> cand;
  std::vector<Stance> ref;
  std::vector<std::vector<bool>> matched;  // [cand][ref]
};

inline MatrixCase random_case(std::mt19937_64& rng, std::size_t max_side = 8) {
  std::uniform_int_distribution<std::size_t> side(0, max_side);
  std::bernoulli_distribution coin(0.5);
  // Vary density so both sparse and dense matrices occur.
  std::bernoulli_distribution match(std::uniform_real_distribution<double>(0.05, 0.6)(rng));
  MatrixCase c;
  c.cand.resize(side(rng));
  c.ref.resize(side(rng));
  for (auto& s : c.cand) s = coin(rng) ? Stance::Advised : Stance::NotAdvised;
  for (auto& s : c.ref) s = coin(rng) ? Stance::Advised : Stance::NotAdvised;
  c.matched.assign(c.cand.size(), std::vector<bool>(c.ref.size()));
  for (auto& row : c.matched) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = match(rng);
  }
  return c;
}

/// Appends `k` solutions that match nothing to one side.
inline MatrixCase pad(MatrixCase c, std::size_t k, bool cand_side, Stance stance = Stance::Advised) {
  if (cand_side) {
    for (std::size_t i = 0; i < k; ++i) {
      c.cand.push_back(stance);
      c.matched.emplace_back(c.ref.size(), false);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      c.ref.push_back(stance);
      for (auto& row : c.matched) row.push_back(false);
    }
  }
  return c;
}

inline MatrixCase flip_cand(MatrixCase c) {
  for (auto& s : c.cand) s = s == Stance::Advised ? Stance::NotAdvised : Stance::Advised;
  return c;
}

inline std::string cand_id(std::size_t i) { return "cand/d/s" + std::to_string(i); }
inline std::string ref_id(std::size_t j) { return "ref/d/s" + std::to_string(j); }

/// Builds the library matrix field by field, without MatchJudgment::make.
inline MatchMatrix to_matrix(const MatrixCase& c) {
  MatchMatrix m;
  m.dilemma_id = "d";
  m.cand_agent = "cand";
  m.ref_agent = "ref";
  for (std::size_t i = 0; i < c.cand.size(); ++i) m.cand_ids.push_back(cand_id(i));
  for (std::size_t j = 0; j < c.ref.size(); ++j) m.ref_ids.push_back(ref_id(j));
  for (std::size_t i = 0; i < c.cand.size(); ++i) {
    for (std::size_t j = 0; j < c.ref.size(); ++j) {
      MatchJudgment mj;
      mj.cand_solution_id = cand_id(i);
      mj.ref_solution_id = ref_id(j);
      const bool hit = c.matched[i][j];
      mj.verdicts = CmrVerdict{hit, hit, hit, hit, ""};
      mj.matched = hit;
      mj.stance_agree = c.cand[i] == c.ref[j];
      m.judgments.emplace(SolutionPair{mj.cand_solution_id, mj.ref_solution_id}, mj);
    }
  }
  return m;
}

struct OracleScores {
  std::set<SolutionPair> agree;
  std::set<SolutionPair> conflict;
  MaybeRational saa;
  MaybeRational eaa;
  MaybeRational avg;
};

/// Enumerates every pair and applies the definitions directly.
inline OracleScores oracle(const MatrixCase& c) {
  OracleScores o;
  for (std::size_t i = 0; i < c.cand.size(); ++i) {
    for (std::size_t j = 0; j < c.ref.size(); ++j) {
      if (!c.matched[i][j]) continue;
      (c.cand[i] == c.ref[j] ? o.agree : o.conflict).insert({cand_id(i), ref_id(j)});
    }
  }
  const long long a = static_cast<long long>(o.agree.size());
  const long long conflicts = static_cast<long long>(o.conflict.size());
  const long long total = static_cast<long long>(c.cand.size() + c.ref.size());
  if (total > 0) o.saa = Rational(a) / Rational(total);
  if (a + conflicts > 0) o.eaa = Rational(a) / Rational(a + conflicts);
  if (o.saa && o.eaa) o.avg = (*o.saa + *o.eaa) / Rational(2);
  return o;
}

/// Textbook kappa with its own label tally.
inline MaybeRational kappa_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> labels(a.begin(), a.end());
  labels.insert(b.begin(), b.end());
  const Rational n(static_cast<long long>(a.size()));
  Rational agree = 0, chance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i] ? 1 : 0;
  for (const auto& label : labels) {
    long long na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      na += a[i] == label;
      nb += b[i] == label;
    }
    chance += Rational(na) / n * (Rational(nb) / n);
  }
  const Rational p_o = agree / n;
  if (chance == 1) return std::nullopt;
  return (p_o - chance) / (1 - chance);
}

/// Gold/predicted vectors realizing a two-class confusion matrix, with M as
/// the positive class.
inline std::pair<std::vector<std::string>, std::vector<std::string>> confusion_vectors(
    int tp, int fn, int fp, int tn) {
  std::vector<std::string> gold, pred;
  auto add = [&](int n, const char* g, const char* p) {
    for (int i = 0; i < n; ++i) {
      gold.emplace_back(g);
      pred.emplace_back(p);
    }
  };
  add(tp, "M", "M");
  add(fn, "M", "NM");
  add(fp, "NM", "M");
  add(tn, "NM", "NM");
  return {gold, pred};
}

/// Rounded cells of the mapping-annotation table: per class P/R/F1, then
/// accuracy, then macro and weighted P/R/F1.
struct MappingTable {
  double m[3];
  double nm[3];
  double accuracy;
  double macro[3];
  double weighted[3];
};

inline constexpr MappingTable kMappingTable{
    {0.99, 0.97, 0.98}, {0.88, 0.97, 0.92}, 0.97, {0.94, 0.97, 0.95}, {0.97, 0.97, 0.97}};

/// Every two-decimal cell of the table computed from counts with doubles and
/// compared at half a unit in the last place, i.e. independent of the
/// rational renderer.
inline bool reproduces_table(int tp, int fn, int fp, int tn, const MappingTable& t = kMappingTable) {
  auto close = [](double x, double target) {
    // Half-up rounding to 2 places lands on target iff x is in [target-0.005, target+0.005).
    return x >= target - 0.005 - 1e-12 && x < target + 0.005 - 1e-12;
  };
  const double p_m = tp + fp ? double(tp) / (tp + fp) : 0;
  const double r_m = tp + fn ? double(tp) / (tp + fn) : 0;
  const double f_m = p_m + r_m > 0 ? 2 * p_m * r_m / (p_m + r_m) : 0;
  const double p_n = tn + fn ? double(tn) / (tn + fn) : 0;
  const double r_n = tn + fp ? double(tn) / (tn + fp) : 0;
  const double f_n = p_n + r_n > 0 ? 2 * p_n * r_n / (p_n + r_n) : 0;
  const double n = tp + fn + fp + tn;
  const double w_m = (tp + fn) / n, w_n = (fp + tn) / n;
  const double acc = (tp + tn) / n;
  return close(p_m, t.m[0]) && close(r_m, t.m[1]) && close(f_m, t.m[2]) && close(p_n, t.nm[0]) &&
         close(r_n, t.nm[1]) && close(f_n, t.nm[2]) && close(acc, t.accuracy) &&
         close((p_m + p_n) / 2, t.macro[0]) && close((r_m + r_n) / 2, t.macro[1]) &&
         close((f_m + f_n) / 2, t.macro[2]) && close(w_m * p_m + w_n * p_n, t.weighted[0]) &&
         close(w_m * r_m + w_n * r_n, t.weighted[1]) && close(w_m * f_m + w_n * f_n, t.weighted[2]);
}

/// All (tp, fn, fp, tn) with tp+fn = positives and fp+tn = negatives that
/// reproduce the table.
inline std::vector<std::array<int, 4>> search_confusions(int positives = 240, int negatives = 60) {
  std::vector<std::array<int, 4>> out;
  for (int tp = 0; tp <= positives; ++tp) {
    for (int fp = 0; fp <= negatives; ++fp) {
      if (reproduces_table(tp, positives - tp, fp, negatives - fp)) {
        out.push_back({tp, positives - tp, fp, negatives - fp});
      }
    }
  }
  return out;
}

}  // namespace normalign::testing
