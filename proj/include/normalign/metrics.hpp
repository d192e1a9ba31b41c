#pragma once

// Alignment scores, aggregation, topic weighting, stylometrics and
// annotation agreement. Everything here is pure and exact.

#include "normalign/types.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace normalign {

struct Partition {
  std::set<SolutionPair> agree;     // A: matched, same stance
  std::set<SolutionPair> conflict;  // C: matched, opposite stance
};

/// Throws PartialMatrix unless the matrix is complete.
Partition partition_matches(const MatchMatrix& matrix);

MaybeRational saa(const MatchMatrix& matrix);
MaybeRational eaa(const MatchMatrix& matrix);
MaybeRational avg_score(const AlignmentScores& scores);

/// Counts and all three metrics for one dilemma.
AlignmentScores compute_scores(const MatchMatrix& matrix);

enum class AggregateMode { Macro, Micro };

std::string_view to_string(AggregateMode mode);
AggregateMode aggregate_mode_from_string(std::string_view text);

struct Aggregate {
  AggregateMode mode = AggregateMode::Macro;
  std::size_t n_dilemmas = 0;
  /// Pooled counts (informational in macro mode).
  std::size_t n_agree = 0;
  std::size_t n_conflict = 0;
  std::size_t n_cand = 0;
  std::size_t n_ref = 0;
  MaybeRational saa;
  MaybeRational eaa;
  MaybeRational avg;
  /// Macro only: per-dilemma entries left out because the metric was undefined.
  std::size_t saa_skipped = 0;
  std::size_t eaa_skipped = 0;
  std::size_t avg_skipped = 0;

  bool operator==(const Aggregate&) const = default;
};

/// Macro: mean of each defined per-dilemma metric. Micro: metrics of the
/// pooled counts. Throws EmptyInput on an empty list.
Aggregate aggregate(const std::vector<AlignmentScores>& per_dilemma, AggregateMode mode);

/// For each topic, sum_d w[d,t] * avg[d] / sum_d w[d,t] over dilemmas with a
/// defined AVG; undefined where the total weight is zero. Throws
/// MissingTopicRow when a dilemma has no row.
std::map<std::string, MaybeRational> topic_weighted_avg(
    const std::map<std::string, MaybeRational>& per_dilemma_avg, const TopicMatrix& topics);

struct StyleLexicons {
  std::set<std::string> modal_verbs;
  std::set<std::string> hedges;
  std::set<std::string> you_pronouns;

  /// `<dir>/modal.txt`, `hedges.txt`, `you.txt`; entries are lower-cased.
  static StyleLexicons load(const std::filesystem::path& dir);
};

/// Counts person mentions in a text; plugged in from outside because it needs
/// a named-entity tagger.
using PersonTagger = std::function<std::size_t(const std::string&)>;

struct StyleStats {
  std::size_t word_count = 0;
  MaybeRational numerals;
  MaybeRational question_marks;
  MaybeRational modal_verbs;
  MaybeRational hedges;
  MaybeRational you_pronouns;
  /// Stays undefined without a tagger.
  MaybeRational person_mentions;

  bool operator==(const StyleStats&) const = default;
};

inline constexpr const char* kStyleFeatures[] = {"numerals", "question_marks", "modal_verbs",
                                                 "hedges",   "you_pronouns",   "person_mentions"};

/// The named feature of `stats` (one of kStyleFeatures).
const MaybeRational& style_feature(const StyleStats& stats, std::string_view name);

StyleStats stylometrics(const AgentResponse& response, const StyleLexicons& lexicons,
                        const PersonTagger& tagger = {});

/// Per-feature mean over the responses where the feature is defined;
/// word_count is the total.
StyleStats mean_style(const std::vector<StyleStats>& stats);

struct ClassMetrics {
  std::string label;
  Rational precision;
  Rational recall;
  Rational f1;
  std::size_t support = 0;

  bool operator==(const ClassMetrics&) const = default;
};

struct ClassificationReport {
  std::vector<ClassMetrics> classes;  // sorted by label
  Rational accuracy;
  ClassMetrics macro;
  ClassMetrics weighted;
  std::size_t total = 0;

  /// Fixed-width table with values rounded half-up to `decimals`.
  std::string render(int decimals = 2) const;

  bool operator==(const ClassificationReport&) const = default;
};

/// Per-class precision, recall and F1 over the sorted union of labels; a
/// zero denominator yields 0. Throws LengthMismatch or EmptyInput.
ClassificationReport classification_report(const std::vector<std::string>& gold,
                                           const std::vector<std::string>& predicted);

/// (p_o - p_e) / (1 - p_e); undefined when p_e == 1. Throws LengthMismatch,
/// or EmptyInput for empty vectors.
MaybeRational cohen_kappa(const std::vector<std::string>& labels_a,
                          const std::vector<std::string>& labels_b);

}  // namespace normalign
