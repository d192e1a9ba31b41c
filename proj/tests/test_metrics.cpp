#include "normalign/errors.hpp"
#include "normalign/metrics.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace normalign;
namespace nt = normalign::testing;

namespace {

Rational r(long long n, long long d = 1) { return make_rational(n, d); }

nt::MatrixCase fixed_case(std::vector<Stance> cand, std::vector<Stance> ref,
                          std::vector<std::pair<int, int>> hits) {
  nt::MatrixCase c{std::move(cand), std::move(ref), {}};
  c.matched.assign(c.cand.size(), std::vector<bool>(c.ref.size(), false));
  for (auto [i, j] : hits) c.matched[i][j] = true;
  return c;
}

constexpr Stance P = Stance::Advised;
constexpr Stance N = Stance::NotAdvised;

}  // namespace

TEST_CASE("partition splits matched pairs by stance", "[partition]") {
  const auto c = fixed_case({P, P, N}, {P, N, N}, {{0, 0}, {1, 1}, {2, 2}});
  const auto p = partition_matches(nt::to_matrix(c));
  CHECK(p.agree.size() == 2);
  CHECK(p.conflict.size() == 1);
  CHECK(p.conflict.contains({nt::cand_id(1), nt::ref_id(1)}));

  const auto none = partition_matches(nt::to_matrix(fixed_case({P}, {N}, {})));
  CHECK(none.agree.empty());
  CHECK(none.conflict.empty());
}

TEST_CASE("metrics refuse partial matrices", "[partition]") {
  auto m = nt::to_matrix(fixed_case({P}, {P}, {{0, 0}}));
  m.partial = true;
  CHECK_THROWS_AS(partition_matches(m), PartialMatrix);
  CHECK_THROWS_AS(saa(m), PartialMatrix);
  m.partial = false;
  m.judgments.clear();
  CHECK_THROWS_AS(eaa(m), PartialMatrix);
}

TEST_CASE("worked metric examples", "[metrics]") {
  // |A| = 2 with 4 + 4 solutions.
  const auto two = fixed_case({P, P, P, P}, {P, P, P, P}, {{0, 0}, {1, 1}});
  CHECK(saa(nt::to_matrix(two)) == r(1, 4));
  CHECK(saa(nt::to_matrix(fixed_case({P}, {N}, {{0, 0}}))) == r(0));
  // |A| = 3, |C| = 1.
  const auto mixed = fixed_case({P, P, P, P}, {P, P, P, N}, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  CHECK(eaa(nt::to_matrix(mixed)) == r(3, 4));
  CHECK_FALSE(eaa(nt::to_matrix(fixed_case({P}, {P}, {}))).has_value());
  CHECK_FALSE(saa(nt::to_matrix(fixed_case({}, {}, {}))).has_value());

  CHECK(avg_score(AlignmentScores::from_counts(2, 0, 4, 4)) == r(5, 8));
  CHECK(AlignmentScores::from_counts(3, 1, 6, 6).avg() == (r(1, 4) + r(3, 4)) / 2);
  CHECK_FALSE(AlignmentScores::from_counts(0, 0, 3, 3).avg().has_value());
  CHECK(AlignmentScores::from_counts(2, 0, 1, 1).avg() == r(1));
}

TEST_CASE("many-to-many matching can push SAA past one", "[metrics]") {
  const auto dense = fixed_case({P, P}, {P, P}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto scores = compute_scores(nt::to_matrix(dense));
  CHECK(scores.saa() == r(1));
  CHECK_FALSE(scores.saa_exceeds_one());
  const auto wide = fixed_case({P}, {P, P, P}, {{0, 0}, {0, 1}, {0, 2}});
  CHECK_FALSE(compute_scores(nt::to_matrix(wide)).saa_exceeds_one());
  const auto more = AlignmentScores::from_counts(9, 0, 2, 2);
  CHECK(more.saa() == r(9, 4));
  CHECK(more.saa_exceeds_one());
}

TEST_CASE("metrics agree with the enumeration oracle", "[metrics][property]") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto c = nt::random_case(rng, 6);
    const auto m = nt::to_matrix(c);
    const auto o = nt::oracle(c);
    const auto p = partition_matches(m);
    CHECK(p.agree == o.agree);
    CHECK(p.conflict == o.conflict);
    const auto s = compute_scores(m);
    CHECK(s.saa() == o.saa);
    CHECK(s.eaa() == o.eaa);
    CHECK(s.avg() == o.avg);
    std::size_t matched = 0;
    for (const auto& [pair, j] : m.judgments) matched += j.matched;
    CHECK(p.agree.size() + p.conflict.size() == matched);
  }
}

TEST_CASE("unmatched padding leaves EAA alone and lowers SAA", "[metrics][property]") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto c = nt::random_case(rng);
    const auto base = compute_scores(nt::to_matrix(c));
    for (std::size_t k : {2, 6, 10, 20, 40, 100}) {
      for (bool cand_side : {true, false}) {
        const auto padded = compute_scores(nt::to_matrix(nt::pad(c, k, cand_side, N)));
        CHECK(padded.eaa() == base.eaa());
        if (base.n_agree() > 0) CHECK(*padded.saa() < *base.saa());
      }
    }
  }
}

TEST_CASE("flipping candidate stances swaps agree and conflict", "[metrics][property]") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto c = nt::random_case(rng);
    const auto before = partition_matches(nt::to_matrix(c));
    const auto flipped = nt::to_matrix(nt::flip_cand(c));
    const auto after = partition_matches(flipped);
    CHECK(after.agree == before.conflict);
    CHECK(after.conflict == before.agree);
    const auto hits = before.agree.size() + before.conflict.size();
    if (hits == 0) {
      CHECK_FALSE(eaa(flipped).has_value());
    } else {
      CHECK(eaa(flipped) == Rational(before.conflict.size()) / Rational(hits));
    }
  }
}

TEST_CASE("macro and micro aggregation", "[aggregate]") {
  const auto a = AlignmentScores::from_counts(1, 0, 3, 2);  // saa 1/5
  const auto b = AlignmentScores::from_counts(2, 1, 3, 2);  // saa 2/5, eaa 2/3
  auto agg = aggregate({a, b}, AggregateMode::Macro);
  CHECK(agg.saa == r(3, 10));
  CHECK(agg.n_dilemmas == 2);
  CHECK(agg.n_agree == 3);

  const auto undefined = AlignmentScores::from_counts(0, 0, 2, 2);
  const auto three_quarters = AlignmentScores::from_counts(3, 1, 4, 4);
  agg = aggregate({three_quarters, undefined}, AggregateMode::Macro);
  CHECK(agg.eaa == r(3, 4));
  CHECK(agg.eaa_skipped == 1);
  CHECK(agg.avg_skipped == 1);
  CHECK(agg.saa_skipped == 0);

  agg = aggregate({three_quarters, undefined}, AggregateMode::Micro);
  CHECK(agg.saa == r(1, 4));
  CHECK(agg.eaa == r(3, 4));
  CHECK(agg.eaa_skipped == 0);
  CHECK_THROWS_AS(aggregate({}, AggregateMode::Macro), EmptyInput);
  CHECK(aggregate_mode_from_string("micro") == AggregateMode::Micro);
  CHECK_THROWS_AS(aggregate_mode_from_string("mean"), InvalidInput);
}

TEST_CASE("micro aggregation equals the metrics of pooled counts", "[aggregate][property]") {
  std::mt19937_64 rng(4);
  for (int round = 0; round < 200; ++round) {
    std::vector<AlignmentScores> scores;
    nt::MatrixCase pooled;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int d = 0; d < n; ++d) {
      const auto c = nt::random_case(rng, 5);
      scores.push_back(compute_scores(nt::to_matrix(c)));
      // Block-diagonal concatenation: no cross-dilemma matches.
      const auto rows = pooled.cand.size(), cols = pooled.ref.size();
      pooled = nt::pad(nt::pad(pooled, c.cand.size(), true), c.ref.size(), false);
      for (std::size_t i = 0; i < c.cand.size(); ++i) {
        pooled.cand[rows + i] = c.cand[i];
        for (std::size_t j = 0; j < c.ref.size(); ++j) pooled.matched[rows + i][cols + j] = c.matched[i][j];
      }
      for (std::size_t j = 0; j < c.ref.size(); ++j) pooled.ref[cols + j] = c.ref[j];
    }
    const auto micro = aggregate(scores, AggregateMode::Micro);
    const auto o = nt::oracle(pooled);
    CHECK(micro.saa == o.saa);
    CHECK(micro.eaa == o.eaa);
    CHECK(micro.avg == o.avg);
  }
}

TEST_CASE("macro equals micro for identical dilemmas", "[aggregate][property]") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 100; ++round) {
    const auto s = compute_scores(nt::to_matrix(nt::random_case(rng)));
    const std::vector<AlignmentScores> same(1 + rng() % 5, s);
    const auto macro = aggregate(same, AggregateMode::Macro);
    const auto micro = aggregate(same, AggregateMode::Micro);
    CHECK(macro.saa == micro.saa);
    CHECK(macro.eaa == micro.eaa);
    CHECK(macro.avg == micro.avg);
    // Pure: repeated calls give identical results.
    CHECK(aggregate(same, AggregateMode::Macro) == macro);
  }
}

TEST_CASE("topic-weighted AVG", "[topics]") {
  TopicMatrix topics{{"family", "work"},
                     {{"d1", {r(1), r(0)}}, {"d2", {r(1), r(1, 2)}}, {"d3", {r(1), r(0)}}}};
  const std::map<std::string, MaybeRational> avg{{"d1", r(1, 2)}, {"d2", r(1, 4)}, {"d3", std::nullopt}};
  auto out = topic_weighted_avg(avg, topics);
  CHECK(out.at("family") == r(3, 8));
  CHECK(out.at("work") == r(1, 4));

  topics.proportions["d2"] = {r(1), r(0)};
  out = topic_weighted_avg(avg, topics);
  CHECK_FALSE(out.at("work").has_value());

  CHECK_THROWS_AS(topic_weighted_avg({{"d9", r(1)}}, topics), MissingTopicRow);
}

TEST_CASE("topic weighting agrees with a naive double loop", "[topics][property]") {
  std::mt19937_64 rng(6);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n_topics = 1 + rng() % 4, n_dilemmas = 1 + rng() % 8;
    TopicMatrix topics;
    for (std::size_t t = 0; t < n_topics; ++t) topics.topic_names.push_back("t" + std::to_string(t));
    std::map<std::string, MaybeRational> avg;
    for (std::size_t d = 0; d < n_dilemmas; ++d) {
      const auto id = "d" + std::to_string(d);
      for (std::size_t t = 0; t < n_topics; ++t) topics.proportions[id].push_back(r(rng() % 5, 4));
      if (rng() % 4) avg[id] = r(rng() % 9, 8);
      else avg[id] = std::nullopt;
    }
    const auto out = topic_weighted_avg(avg, topics);
    for (std::size_t t = 0; t < n_topics; ++t) {
      Rational num = 0, den = 0;
      for (std::size_t d = 0; d < n_dilemmas; ++d) {
        const auto id = "d" + std::to_string(d);
        if (!avg[id]) continue;
        num += topics.proportions[id][t] * *avg[id];
        den += topics.proportions[id][t];
      }
      const auto& got = out.at(topics.topic_names[t]);
      if (den == 0) {
        CHECK_FALSE(got.has_value());
      } else {
        CHECK(got == num / den);
      }
    }
  }
}

TEST_CASE("stylometric features", "[style]") {
  const auto da = StyleLexicons::load(nt::resources_dir() / "lexicons" / "da");
  const auto s = stylometrics(AgentResponse{"m", "d", "Du skal måske ringe?", ""}, da);
  CHECK(s.word_count == 4);
  CHECK(s.you_pronouns == r(1, 4));
  CHECK(s.modal_verbs == r(1, 4));
  CHECK(s.hedges == r(1, 4));
  CHECK(s.question_marks == r(1, 4));
  CHECK(s.numerals == r(0));
  CHECK_FALSE(s.person_mentions.has_value());

  const auto empty = stylometrics(AgentResponse{"m", "d", " ?! ", ""}, da);
  CHECK(empty.word_count == 0);
  CHECK_FALSE(empty.question_marks.has_value());
  CHECK_FALSE(empty.numerals.has_value());

  const auto en = StyleLexicons::load(nt::resources_dir() / "lexicons" / "en");
  const auto nums = stylometrics(AgentResponse{"m", "d", "Pay 2,50 or 3.5 in 2024, Anna.", ""}, en,
                                 [](const std::string&) { return std::size_t{1}; });
  CHECK(nums.word_count == 7);
  CHECK(nums.numerals == r(3, 7));
  CHECK(nums.person_mentions == r(1, 7));
}

TEST_CASE("style means skip undefined features", "[style]") {
  StyleStats a, b, c;
  a.word_count = 4;
  a.hedges = r(1, 4);
  b.word_count = 4;
  b.hedges = r(3, 4);
  const auto m = mean_style({a, b, c});
  CHECK(m.hedges == r(1, 2));
  CHECK(m.word_count == 8);
  CHECK_FALSE(m.numerals.has_value());
  CHECK_THROWS_AS(style_feature(m, "emoji"), InvalidInput);
}

TEST_CASE("classification report on the mapping confusion matrix", "[report]") {
  const auto [gold, pred] = nt::confusion_vectors(232, 8, 2, 58);
  const auto rep = classification_report(gold, pred);
  REQUIRE(rep.classes.size() == 2);
  CHECK(rep.classes[0].label == "M");
  CHECK(rep.classes[0].precision == r(232, 234));
  CHECK(rep.classes[0].support + rep.classes[1].support == rep.total);
  CHECK(rep.accuracy == r(290, 300));
  const std::string expected =
      "             precision    recall  f1-score   support\n"
      "\n"
      "           M      0.99      0.97      0.98       240\n"
      "          NM      0.88      0.97      0.92        60\n"
      "\n"
      "    accuracy                          0.97       300\n"
      "   macro avg      0.94      0.97      0.95       300\n"
      "weighted avg      0.97      0.97      0.97       300\n";
  CHECK(rep.render() == expected);
}

TEST_CASE("classification report edge cases", "[report]") {
  const std::vector<std::string> g{"a", "b", "a", "c"};
  const auto same = classification_report(g, g);
  CHECK(same.accuracy == 1);
  for (const auto& c : same.classes) CHECK(c.f1 == 1);
  CHECK(same.macro.f1 == 1);

  const auto one = classification_report({"x", "y", "y"}, {"x", "x", "x"});
  CHECK(one.classes[0].recall == 1);
  CHECK(one.classes[1].recall == 0);
  CHECK(one.classes[1].precision == 0);
  CHECK(one.classes[1].f1 == 0);

  CHECK_THROWS_AS(classification_report({"a"}, {}), LengthMismatch);
  CHECK_THROWS_AS(classification_report({}, {}), EmptyInput);
}

TEST_CASE("kappa: perfect, chance and oracle agreement", "[kappa][property]") {
  CHECK(cohen_kappa({"yes", "no", "yes"}, {"yes", "no", "yes"}) == r(1));
  CHECK(cohen_kappa({"yes", "no", "yes", "no"}, {"yes", "yes", "yes", "yes"}) == r(0));
  CHECK_FALSE(cohen_kappa({"yes", "yes"}, {"yes", "yes"}).has_value());
  CHECK_THROWS_AS(cohen_kappa({"a"}, {"a", "b"}), LengthMismatch);
  CHECK_THROWS_AS(cohen_kappa({}, {}), EmptyInput);

  std::mt19937_64 rng(8);
  const std::vector<std::string> labels{"M", "NM", "?"};
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = 1 + rng() % 30, k = 1 + rng() % 3;
    std::vector<std::string> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(labels[rng() % k]);
      b.push_back(rng() % 3 ? a.back() : labels[rng() % k]);
    }
    CHECK(cohen_kappa(a, b) == nt::kappa_oracle(a, b));
  }
}
