#include "normalign/errors.hpp"
#include "normalign/matching.hpp"

#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace normalign;
namespace nt = normalign::testing;

namespace {

const Dilemma kDilemma{"ep-d1", "ep", "s", "My neighbour plays loud music.", "What should I do?"};

Solution sol(const std::string& agent, std::size_t i, const std::string& text,
             Stance stance = Stance::Advised) {
  return Solution{agent + "/ep-d1/s" + std::to_string(i), kDilemma.id, agent, text, stance, false,
                  agent + "/ep-d1"};
}

Json verdict(bool all, const std::string& why = "r") {
  return Json{{"rationale", why}, {"order", all}, {"semantics", all},
              {"conditions", all}, {"entities", all}, {"match", all}};
}

PromptTemplate matching_prompt() {
  return PromptTemplate::load(nt::resources_dir() / "prompts" / "matching.prompt");
}

/// Judge that fails on chosen texts.
class FlakyJudge : public Judge {
 public:
  explicit FlakyJudge(std::string poison, bool auth = false) : poison_(std::move(poison)), auth_(auth) {}
  CmrVerdict judge(const Solution& a, const Solution& b, const Dilemma& d) const override {
    if (a.text == poison_ || b.text == poison_) {
      if (auth_) throw AuthError("bad key");
      throw ExhaustedRetries(3, "timeout");
    }
    return EqualityJudge().judge(a, b, d);
  }
  std::string describe() const override { return "flaky"; }

 private:
  std::string poison_;
  bool auth_;
};

}  // namespace

TEST_CASE("equality judge compares normalized texts", "[judge]") {
  const EqualityJudge judge;
  const auto a = sol("x", 0, "Talk to him.");
  const auto b = sol("y", 0, "talk  to HIM", Stance::NotAdvised);
  const auto c = sol("y", 1, "Call the police");
  CHECK(judge.judge(a, b, kDilemma).all_ok());
  CHECK_FALSE(judge.judge(a, c, kDilemma).order_ok);

  const auto same = judge_pair(a, sol("y", 2, "Talk to him"), kDilemma, judge);
  CHECK(same.matched);
  CHECK(same.stance_agree);
  const auto conflict = judge_pair(a, b, kDilemma, judge);
  CHECK(conflict.matched);
  CHECK_FALSE(conflict.stance_agree);
}

TEST_CASE("equality judge is symmetric", "[judge][property]") {
  const std::vector<std::string> texts{"Talk to him", "talk to him.", "Talk  to him!", "Call",
                                       "CALL", "call him", ""};
  const EqualityJudge judge;
  for (const auto& x : texts) {
    for (const auto& y : texts) {
      CHECK(judge.judge(sol("a", 0, x), sol("b", 0, y), kDilemma) ==
            judge.judge(sol("a", 0, y), sol("b", 0, x), kDilemma));
    }
  }
}

TEST_CASE("stances never change the matched bit", "[judge][property]") {
  const EqualityJudge judge;
  const std::vector<std::string> texts{"Move out", "move out", "Stay", "Ask him nicely"};
  std::mt19937 rng(7);
  for (int round = 0; round < 50; ++round) {
    std::vector<Solution> cand, ref, cand_flipped;
    for (std::size_t i = 0; i < 4; ++i) {
      const Stance s = rng() % 2 ? Stance::Advised : Stance::NotAdvised;
      cand.push_back(sol("c", i, texts[rng() % texts.size()], s));
      ref.push_back(sol("r", i, texts[rng() % texts.size()], rng() % 2 ? Stance::Advised : Stance::NotAdvised));
      cand_flipped.push_back(cand.back());
      cand_flipped.back().stance = flip(s);
    }
    const auto m1 = match_all(cand, ref, kDilemma, judge);
    const auto m2 = match_all(cand_flipped, ref, kDilemma, judge);
    for (const auto& [pair, j] : m1.judgments) {
      CHECK(m2.judgments.at(pair).matched == j.matched);
      CHECK(m2.judgments.at(pair).stance_agree != j.stance_agree);
    }
  }
}

TEST_CASE("the LLM judge asks once per distinct pair", "[judge]") {
  auto t = nt::script({
      Json{{"contains", {"Solution A: Buy an apple to feel better\nSolution B: Buy an apple to have one\n"}},
           {"response", verdict(true, "motivation differs only")}},
      Json{{"default", true}, {"response", verdict(false)}},
  });
  const LlmJudge judge(nt::client(t), matching_prompt());
  const auto a = sol("c", 0, "Buy an apple to feel better");
  const auto b = sol("r", 0, "Buy an apple to have one");
  const auto v = judge.judge(a, b, kDilemma);
  CHECK(v.all_ok());
  CHECK(v.rationale == "motivation differs only");
  // Same texts up to case and punctuation hit the cache.
  CHECK(judge.judge(sol("c", 5, "buy an apple to feel better."), b, kDilemma) == v);
  CHECK(t->calls() == 1);
  CHECK_FALSE(judge.judge(b, a, kDilemma).all_ok());
  CHECK(t->calls() == 2);
  CHECK(judge.describe() == "llm:mock:script");
  CHECK(judge.template_hash() == matching_prompt().hash());
}

TEST_CASE("the judge prompt carries the dilemma and both texts only", "[judge]") {
  auto t = nt::script({Json{{"default", true}, {"response", verdict(false)}}});
  const LlmJudge judge(nt::client(t), matching_prompt());
  const auto rendered = judge.render(sol("c", 0, "Move out", Stance::NotAdvised), sol("r", 0, "Stay"), kDilemma);
  CHECK(rendered.find("My neighbour plays loud music.\n\nWhat should I do?") != std::string::npos);
  CHECK(rendered.find("Solution A: Move out\nSolution B: Stay\n") != std::string::npos);
  CHECK(rendered.find("not_advised") == std::string::npos);
  CHECK(rendered.find("{") == rendered.find("{\"rationale\""));
}

TEST_CASE("the rule conjunction overrides the judge's match field", "[judge]") {
  Json reply = verdict(true);
  reply["entities"] = false;
  auto t = nt::script({Json{{"default", true}, {"response", reply}}});
  const LlmJudge judge(nt::client(t), matching_prompt());
  const auto j = judge_pair(sol("c", 0, "Call mum"), sol("r", 0, "Call dad"), kDilemma, judge);
  CHECK_FALSE(j.matched);
  CHECK(j.verdicts.semantics_ok);
}

TEST_CASE("match_all covers the cross product", "[match_all]") {
  const EqualityJudge judge;
  std::vector<Solution> cand, ref;
  for (std::size_t i = 0; i < 4; ++i) {
    cand.push_back(sol("c", i, "t" + std::to_string(i)));
    ref.push_back(sol("r", i, "t" + std::to_string(3 - i), Stance::NotAdvised));
  }
  const auto m = match_all(cand, ref, kDilemma, judge);
  CHECK(m.judgments.size() == 16);
  CHECK(m.complete());
  CHECK(m.cand_agent == "c");
  CHECK(m.ref_agent == "r");
  const auto ordered = m.ordered();
  REQUIRE(ordered.size() == 16);
  CHECK(ordered[1].cand_solution_id == "c/ep-d1/s0");
  CHECK(ordered[1].ref_solution_id == "r/ep-d1/s1");

  const auto empty = match_all({}, ref, kDilemma, judge);
  CHECK(empty.judgments.empty());
  CHECK(empty.complete());
}

TEST_CASE("match_all rejects bad input", "[match_all]") {
  const EqualityJudge judge;
  const auto a = sol("c", 0, "x");
  CHECK_THROWS_AS(match_all({a, a}, {}, kDilemma, judge), InvalidInput);
  auto other = sol("r", 0, "x");
  other.dilemma_id = "ep-d2";
  CHECK_THROWS_AS(match_all({a}, {other}, kDilemma, judge), InvalidInput);
  CHECK_THROWS_AS(judge_pair(a, other, kDilemma, judge), InvalidInput);
}

TEST_CASE("failed pairs mark the matrix partial", "[match_all]") {
  const FlakyJudge judge("boom");
  const auto m = match_all({sol("c", 0, "ok"), sol("c", 1, "boom")}, {sol("r", 0, "ok"), sol("r", 1, "no")},
                           kDilemma, judge, 3);
  CHECK(m.partial);
  CHECK_FALSE(m.complete());
  CHECK(m.judgments.size() == 2);
  REQUIRE(m.errors.size() == 2);
  CHECK(m.errors[0].rfind("c/ep-d1/s1 x r/ep-d1/s0: ", 0) == 0);

  CHECK_THROWS_AS(match_all({sol("c", 0, "boom")}, {sol("r", 0, "x")}, kDilemma, FlakyJudge("boom", true)),
                  AuthError);
}

TEST_CASE("match_all does not depend on parallelism", "[match_all][property]") {
  const std::vector<std::string> texts{"Move out", "Stay", "Ask", "ask", "Wait", "Call"};
  auto t = nt::script({
      Json{{"contains", {"Solution A: Ask\n"}}, {"response", verdict(true)}},
      Json{{"default", true}, {"response", verdict(false)}},
  });
  std::mt19937 rng(11);
  std::vector<Solution> cand, ref;
  for (std::size_t i = 0; i < 8; ++i) {
    cand.push_back(sol("c", i, texts[rng() % texts.size()]));
    ref.push_back(sol("r", i, texts[rng() % texts.size()], Stance::NotAdvised));
  }
  const auto sequential = match_all(cand, ref, kDilemma, EqualityJudge(), 1);
  for (std::size_t p : {2, 4, 16}) CHECK(match_all(cand, ref, kDilemma, EqualityJudge(), p) == sequential);

  const LlmJudge one(nt::client(t), matching_prompt());
  const LlmJudge four(nt::client(t), matching_prompt());
  CHECK(match_all(cand, ref, kDilemma, one, 1) == match_all(cand, ref, kDilemma, four, 4));
}
