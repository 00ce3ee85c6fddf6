#include <gtest/gtest.h>

#include <thread>

#include "streamrev/runtime.hpp"
#include "streamrev/serialize.hpp"

using namespace streamrev;

namespace {

RunConfig cfg(std::string policy, std::optional<RevisionType> rtype = RevisionType::Substitutive,
              std::string timing = "mid") {
  RunConfig c;
  c.policy = std::move(policy);
  c.revision_type = rtype;
  c.timing = std::move(timing);
  return c;
}

std::size_t count_kind(const RunRecord& r, EventKind k) {
  std::size_t n = 0;
  for (const auto& e : r.trace.events) n += e.kind() == k;
  return n;
}

}  // namespace

TEST(Runtime, NoInjectionRunsWholeScript) {
  auto r = run_session(cfg("absorber", std::nullopt));
  EXPECT_EQ(r.termination, Termination::Completed);
  EXPECT_EQ(count_kind(r, EventKind::Act), 15u);
  EXPECT_EQ(r.counters.wasted_acts, 0u);
  EXPECT_EQ(r.counters.steps, 15u);
  EXPECT_EQ(r.trace.events.front().kind(), EventKind::Thought);
  EXPECT_EQ(r.trace.events[1].act()->tool, "search_venues");
  EXPECT_DOUBLE_EQ(*r.quality, 5.0);
  check_integrity(r);
}

TEST(Runtime, CaseStudyAbsorber) {
  auto r = run_session(cfg("absorber"));
  EXPECT_EQ(r.counters.wasted_acts, 1u);
  EXPECT_EQ(r.counters.comp_calls, 1u);
  ASSERT_EQ(r.injections.size(), 1u);
  EXPECT_EQ(r.injections[0].decision.k_star, 8u);
  // Inj first, then the compensation act, then the re-planned proposal.
  const Event& inj = r.trace.at(r.injections[0].inj_seq);
  EXPECT_EQ(inj.kind(), EventKind::Inj);
  const Event& comp = r.trace.at(inj.seq + 1);
  ASSERT_NE(comp.act(), nullptr);
  EXPECT_EQ(comp.act()->phase, Phase::Compensation);
  EXPECT_EQ(comp.act()->tool, "send_correction");
  const ActPayload* next = r.trace.at(inj.seq + 3).act();
  ASSERT_NE(next, nullptr);
  EXPECT_EQ(next->tool, "send_proposal");
  EXPECT_EQ(next->phase, Phase::Replanned);
  EXPECT_EQ(next->args.at("venue_style"), "outdoor BBQ");
  EXPECT_EQ(r.termination, Termination::Completed);
  EXPECT_DOUBLE_EQ(*r.quality, 5.0);
  check_integrity(r);
}

TEST(Runtime, CaseStudyFullRestart) {
  auto r = run_session(cfg("full_restart"));
  EXPECT_EQ(r.counters.wasted_acts, 9u);
  EXPECT_EQ(r.counters.comp_calls, 6u);  // 5 drafts inverted + 1 proposal corrected
  check_integrity(r);
}

TEST(Runtime, IgnoreKeepsOriginalSpec) {
  auto r = run_session(cfg("ignore"));
  EXPECT_EQ(r.counters.wasted_acts, 0u);
  EXPECT_EQ(r.final_spec.value_of("venue_style"), "indoor dinner");
  EXPECT_TRUE(r.final_spec.absorbed.empty());
  EXPECT_EQ(r.reference_spec.value_of("venue_style"), "outdoor BBQ");
  check_integrity(r);
}

TEST(Runtime, QualityOrdering) {
  for (auto t : {RevisionType::Substitutive, RevisionType::PriorityShift}) {
    double ignore = *run_session(cfg("ignore", t)).quality;
    double naive = *run_session(cfg("naive", t)).quality;
    double absorber = *run_session(cfg("absorber", t)).quality;
    EXPECT_LT(ignore, naive) << to_string(t);
    EXPECT_LT(naive, absorber) << to_string(t);
  }
}

TEST(Runtime, OracleStartsMerged) {
  auto r = run_session(cfg("oracle"));
  EXPECT_TRUE(r.oracle_merged);
  EXPECT_TRUE(r.injections.empty());
  EXPECT_EQ(count_kind(r, EventKind::Inj), 0u);
  EXPECT_EQ(r.final_spec, r.reference_spec);
  EXPECT_DOUBLE_EQ(*r.quality, 5.0);
}

TEST(Runtime, EarlyInjectionWastesNothing) {
  for (const char* p : {"absorber", "full_restart", "naive", "interrupt", "checkpoint_5"}) {
    auto r = run_session(cfg(p, RevisionType::Restrictive, "early"));
    EXPECT_EQ(r.counters.wasted_acts, 0u) << p;
    EXPECT_EQ(r.trace.events.front().kind(), EventKind::Inj) << p;
  }
}

TEST(Runtime, DeterministicRecords) {
  auto c = cfg("absorber", RevisionType::PriorityShift, "late");
  nlohmann::json a = run_session(c);
  nlohmann::json b = run_session(c);
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Runtime, EmptyScheduleMatchesNoQueue) {
  auto c = cfg("absorber", std::nullopt);
  MockBackend m1, m2;
  InjectionQueue q;
  auto a = run_session(c, m1);
  auto b = run_session(c, m2, SessionHooks{&q, nullptr});
  EXPECT_EQ(a.trace, b.trace);
}

TEST(Runtime, ExternalQueueAbsorbsOnePerPoll) {
  auto c = cfg("absorber", std::nullopt);
  MockBackend backend;
  InjectionQueue q;
  const auto& def = scenario_def("event_planning");
  std::size_t acts = 0;
  SessionHooks hooks{&q, [&](const Event& e) {
                       if (e.act() && ++acts == 10) {
                         q.push(def.revisions.at(RevisionType::Substitutive));
                         q.push(def.revisions.at(RevisionType::Restrictive));
                       }
                     }};
  auto r = run_session(c, backend, hooks);
  ASSERT_EQ(r.injections.size(), 2u);
  // The second absorption happens at a later boundary than the first.
  EXPECT_GT(r.injections[1].inj_seq, r.injections[0].inj_seq + 1);
  EXPECT_EQ(r.reference_spec.value_of("budget"), "5000");
  check_integrity(r);
}

TEST(Runtime, RecordRoundTrip) {
  auto r = run_session(cfg("full_restart", RevisionType::Cancellation, "late"));
  nlohmann::json j = r;
  RunRecord back = j.get<RunRecord>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  check_integrity(back);
}

TEST(Runtime, TamperedCountersAreDetected) {
  auto r = run_session(cfg("absorber"));
  r.counters.wasted_acts += 1;
  EXPECT_THROW(check_integrity(r), IntegrityError);
}

TEST(Runtime, BudgetExhaustion) {
  auto c = cfg("full_restart");
  c.budget = 12;
  auto r = run_session(c);
  EXPECT_EQ(r.termination, Termination::BudgetExhausted);
  EXPECT_GE(r.counters.steps, 12u);
}

TEST(Schedule, TriggerPoints) {
  auto sc = build_scenario("event_planning", 0.25);
  EXPECT_EQ(trigger_point(TimingSpec::parse("early"), sc), 0u);
  EXPECT_EQ(trigger_point(TimingSpec::parse("mid"), sc), 9u);
  EXPECT_EQ(trigger_point(TimingSpec::parse("late"), sc), 14u);
  EXPECT_EQ(trigger_point(TimingSpec::parse("very_late"), sc), 15u);
  EXPECT_EQ(trigger_point(TimingSpec::parse("at_fraction:0.5"), sc), 8u);
  EXPECT_THROW(TimingSpec::parse("soon"), ConfigError);
  auto s = make_schedule(sc, RevisionType::Substitutive, TimingSpec::parse("spread"), 5);
  ASSERT_EQ(s.entries.size(), 5u);
  EXPECT_EQ(s.entries[0].after_live_acts, 3u);
  EXPECT_EQ(s.entries[4].after_live_acts, 13u);
  EXPECT_EQ(s.entries[2].revision.rtype, RevisionType::Additive);
  EXPECT_THROW(make_schedule(sc, RevisionType::Additive, TimingSpec::parse("mid"), 2), ConfigError);
}

TEST(Queue, ConcurrentProducers) {
  InjectionQueue q;
  std::vector<std::thread> producers;
  for (int t = 0; t < 4; ++t) {
    producers.emplace_back([&] {
      for (int i = 0; i < 250; ++i) q.push(Revision{});
    });
  }
  for (auto& p : producers) p.join();
  std::size_t n = 0;
  while (q.try_pop()) ++n;
  EXPECT_EQ(n, 1000u);
}
