#include <gtest/gtest.h>

#include <random>

#include "streamrev/policies.hpp"

using namespace streamrev;

namespace {

using C = ReversibilityClass;

// Acts flagged with args {"ok": "no"} conflict with any revised spec.
const CompatFn kCompat = [](const ActPayload& a, const Specification&) {
  auto it = a.args.find("ok");
  return it == a.args.end() || it->second != "no";
};

struct Fixture {
  std::vector<ActPayload> payloads;
  std::vector<LiveAct> acts;

  Fixture(const std::vector<C>& classes, const std::vector<bool>& bad = {}) {
    payloads.reserve(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) {
      ActPayload p{"t" + std::to_string(i), {}, classes[i], Phase::Plan, "s" + std::to_string(i)};
      if (i < bad.size() && bad[i]) p.args["ok"] = "no";
      payloads.push_back(p);
    }
    for (std::size_t i = 0; i < payloads.size(); ++i) {
      acts.push_back({i + 1, static_cast<Seq>(10 * (i + 1)), &payloads[i]});
    }
  }
};

Specification spec() {
  Specification s;
  s.clauses = {{"c1", "venue_style", "indoor", "", ClauseStatus::Active}};
  return s;
}

Revision rev() {
  return {RevisionType::Substitutive, "outdoor", std::string("c1"), {"venue_style=indoor"}, "",
          "outdoor"};
}

// Independent oracle for the Absorber's rollback point: the largest k such
// that no act at position <= k is a conflicting K/X act.
std::size_t oracle_k_star(const std::vector<C>& classes, const std::vector<bool>& bad) {
  std::size_t k = classes.size();
  for (std::size_t i = classes.size(); i-- > 0;) {
    bool kx = classes[i] == C::K || classes[i] == C::X;
    if (kx && i < bad.size() && bad[i]) k = i;
  }
  return k;
}

}  // namespace

TEST(Policy, Names) {
  for (const char* n : {"oracle", "absorber", "full_restart", "naive", "ignore", "interrupt",
                        "checkpoint_3"}) {
    EXPECT_EQ(parse_policy(n).name(), n);
  }
  EXPECT_EQ(parse_policy("checkpoint").checkpoint, 5u);
  EXPECT_THROW(parse_policy("checkpoint_0"), ValidationError);
  EXPECT_THROW(parse_policy("bogus"), ValidationError);
}

// [R,R,R,R,K,K,K,K,K] under FullRestart: every act is discarded (waste 9) and
// every one is inverted or compensated (comp 4 + 5 = 9).
TEST(Policy, FullRestartSyntheticCost) {
  Fixture f({C::R, C::R, C::R, C::R, C::K, C::K, C::K, C::K, C::K});
  auto t = decide(Policy{Policy::Kind::FullRestart}, f.acts, spec(), rev(), kCompat);
  EXPECT_EQ(t.k_star, 0u);
  auto c = adapt_cost(t, f.acts);
  EXPECT_EQ(c.comp_cost, 9u);
  EXPECT_EQ(c.waste_cost, 9u);
  EXPECT_EQ(c.total(), 18u);
}

TEST(Policy, AbsorberRollsBackToJustBeforeConflict) {
  //             1     2     3     4     5     6     7
  Fixture f({C::I, C::R, C::K, C::R, C::K, C::X, C::R}, {false, false, false, false, true, true});
  auto t = decide(Policy{}, f.acts, spec(), rev(), kCompat);
  EXPECT_EQ(t.k_star, 4u);
  ASSERT_EQ(t.program.steps.size(), 3u);
  EXPECT_EQ(t.program.steps[0], (CompensationStep{5, 50, CompAction::Compensate}));
  EXPECT_EQ(t.program.steps[1], (CompensationStep{6, 60, CompAction::Fallback}));
  EXPECT_EQ(t.program.steps[2], (CompensationStep{7, 70, CompAction::Invert}));
  auto c = adapt_cost(t, f.acts);
  EXPECT_EQ(c.comp_cost, 2u);  // fallback is not a compensation call
  EXPECT_EQ(c.waste_cost, 3u);
  EXPECT_TRUE(t.spec_updated);
  EXPECT_EQ(t.spec.value_of("venue_style"), "outdoor");
}

TEST(Policy, AbsorberNoConflictKeepsEverything) {
  Fixture f({C::R, C::K, C::X});
  auto t = decide(Policy{}, f.acts, spec(), rev(), kCompat);
  EXPECT_EQ(t.k_star, 3u);
  EXPECT_TRUE(t.program.steps.empty());
}

TEST(Policy, BaselineRollbackPoints) {
  Fixture f({C::I, C::R, C::R, C::K, C::R, C::R, C::K}, {false, false, false, false, false, false,
                                                          true});
  auto k = [&](Policy p) { return decide(p, f.acts, spec(), rev(), kCompat).k_star; };
  EXPECT_EQ(k(Policy{Policy::Kind::Absorber}), 6u);
  EXPECT_EQ(k(Policy::checkpoint_every(4)), 4u);
  EXPECT_EQ(k(Policy::checkpoint_every(5)), 5u);
  EXPECT_EQ(k(Policy{Policy::Kind::InterruptPattern}), 3u);
  EXPECT_EQ(k(Policy{Policy::Kind::Naive}), 7u);
  auto ign = decide(Policy{Policy::Kind::Ignore}, f.acts, spec(), rev(), kCompat);
  EXPECT_EQ(ign.k_star, 7u);
  EXPECT_FALSE(ign.spec_updated);
  EXPECT_EQ(ign.spec, spec());
  EXPECT_THROW(decide(Policy{Policy::Kind::Oracle}, f.acts, spec(), rev(), kCompat),
               UnsupportedPolicyError);
}

TEST(Policy, ForcedRollbackBounds) {
  Fixture f({C::R, C::R});
  EXPECT_THROW(decide_forced(f.acts, spec(), rev(), 3), ValidationError);
  EXPECT_EQ(decide_forced(f.acts, spec(), rev(), 1).program.steps.size(), 1u);
}

// Properties over random traces: the Absorber's k* matches an independent
// oracle, is feasible, is maximal among feasible points, and no feasible
// rollback point has lower cost.
TEST(PolicyProperty, AbsorberIsSoundMaximalAndCheapest) {
  std::mt19937_64 rng(2024);
  const C classes_all[] = {C::I, C::R, C::K, C::X};
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<C> classes;
    std::vector<bool> bad;
    for (std::size_t i = 0; i < n; ++i) {
      classes.push_back(classes_all[rng() % 4]);
      bad.push_back(rng() % 5 == 0);
    }
    Fixture f(classes, bad);
    auto t = decide(Policy{}, f.acts, spec(), rev(), kCompat);
    const std::size_t expect = oracle_k_star(classes, bad);
    ASSERT_EQ(t.k_star, expect);
    ASSERT_TRUE(rollback_feasible(f.acts, t.spec, kCompat, t.k_star));
    if (t.k_star < n) ASSERT_FALSE(rollback_feasible(f.acts, t.spec, kCompat, t.k_star + 1));

    auto best = adapt_cost(t, f.acts);
    for (std::size_t k = 0; k <= n; ++k) {
      if (!rollback_feasible(f.acts, t.spec, kCompat, k)) continue;
      auto other = adapt_cost(decide_forced(f.acts, spec(), rev(), k), f.acts);
      ASSERT_LE(best.total(), other.total()) << "trial " << trial << " k " << k;
      ASSERT_LE(best.waste_cost, other.waste_cost);
    }
    // Suffix program covers exactly the non-I acts after k*.
    std::size_t expected_steps = 0;
    for (std::size_t i = t.k_star; i < n; ++i) expected_steps += classes[i] != C::I;
    ASSERT_EQ(t.program.steps.size(), expected_steps);
  }
}
