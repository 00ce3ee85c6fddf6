#include <gtest/gtest.h>

#include "streamrev/core.hpp"

using namespace streamrev;

namespace {

ToolSpec tool(std::string name, ReversibilityClass cls) {
  ToolSpec t;
  t.name = std::move(name);
  t.cls = cls;
  if (cls == ReversibilityClass::R) t.inverse_of = "undo";
  if (cls == ReversibilityClass::K) t.compensator = "fix";
  return t;
}

Specification base_spec() {
  Specification s;
  s.initial_query = "plan a dinner";
  s.clauses = {{"c1", "venue_style", "indoor dinner", "", ClauseStatus::Active},
               {"c2", "budget", "8000", "", ClauseStatus::Active}};
  return s;
}

}  // namespace

TEST(Enums, RoundTrip) {
  for (auto c : {ReversibilityClass::I, ReversibilityClass::R, ReversibilityClass::K,
                 ReversibilityClass::X}) {
    EXPECT_EQ(parse_class(to_string(c)), c);
  }
  for (auto t : kAllRevisionTypes) EXPECT_EQ(parse_revision_type(to_string(t)), t);
  EXPECT_EQ(to_string(RevisionType::PriorityShift), "priority_shift");
  EXPECT_EQ(to_string(EventKind::Inj), "inj");
  EXPECT_THROW(parse_class("Z"), ValidationError);
}

TEST(Registry, RejectsUnboundClasses) {
  ToolRegistry r;
  ToolSpec bad_r{"draft", ReversibilityClass::R};
  EXPECT_THROW(r.add(bad_r), RegistryError);
  ToolSpec bad_k{"send", ReversibilityClass::K};
  EXPECT_THROW(r.add(bad_k), RegistryError);
  ToolSpec bad_i{"look", ReversibilityClass::I};
  bad_i.inverse_of = "x";
  EXPECT_THROW(r.add(bad_i), RegistryError);
  r.add(tool("draft", ReversibilityClass::R));
  EXPECT_THROW(r.add(tool("draft", ReversibilityClass::R)), RegistryError);
  EXPECT_THROW(r.validate(), RegistryError);  // "undo" not registered
  r.add(tool("undo", ReversibilityClass::R));
  EXPECT_NO_THROW(r.validate());
  EXPECT_THROW(r.get("missing"), RegistryError);
}

TEST(Rho, CountsIAndR) {
  std::vector<ToolSpec> ts = {tool("a", ReversibilityClass::I), tool("b", ReversibilityClass::R),
                              tool("c", ReversibilityClass::K), tool("d", ReversibilityClass::X)};
  EXPECT_DOUBLE_EQ(reversibility_ratio(ts), 0.5);
  std::vector<ToolSpec> all_r = {tool("a", ReversibilityClass::R)};
  EXPECT_DOUBLE_EQ(reversibility_ratio(all_r), 1.0);
  std::vector<ToolSpec> none;
  EXPECT_THROW(reversibility_ratio(none), DomainError);
}

TEST(Revision, ShapeValidation) {
  Revision sub{RevisionType::Substitutive, "x", std::nullopt, {}, "venue_style", "bbq"};
  EXPECT_THROW(validate_revision(sub), ValidationError);
  Revision add{RevisionType::Additive, "x", std::nullopt, {}, "", "marketing"};
  EXPECT_THROW(validate_revision(add), ValidationError);
  Revision cancel{RevisionType::Cancellation, "x", std::string("c1"), {}, "", ""};
  EXPECT_NO_THROW(validate_revision(cancel));
}

TEST(Revision, SubstitutiveReplacesTarget) {
  Revision r{RevisionType::Substitutive, "bbq", std::string("c1"), {}, "", "outdoor BBQ"};
  auto s = apply_revision(base_spec(), r);
  EXPECT_EQ(s.find_clause("c1")->status, ClauseStatus::Replaced);
  EXPECT_EQ(s.value_of("venue_style"), "outdoor BBQ");
  EXPECT_EQ(s.find_clause("rev1")->key, "venue_style");
  EXPECT_EQ(s.absorbed.size(), 1u);
  EXPECT_EQ(s.clauses.size(), 3u);
}

TEST(Revision, CancellationRevokesWithoutDeleting) {
  Revision r{RevisionType::Cancellation, "no budget", std::string("c2"), {}, "", ""};
  auto s = apply_revision(base_spec(), r);
  EXPECT_EQ(s.clauses.size(), 2u);
  EXPECT_EQ(s.find_clause("c2")->status, ClauseStatus::Revoked);
  EXPECT_FALSE(s.value_of("budget").has_value());
  EXPECT_EQ(s.revoked_keys(), std::vector<std::string>{"budget"});
  // A second cancellation of the same clause is invalid.
  EXPECT_THROW(apply_revision(s, r), ValidationError);
}

TEST(Revision, RestrictiveOverridesByRecency) {
  Revision r{RevisionType::Restrictive, "cap", std::nullopt, {}, "budget", "5000"};
  auto s = apply_revision(base_spec(), r);
  EXPECT_EQ(s.value_of("budget"), "5000");
  EXPECT_EQ(s.effective().at("budget")->id, "rev1");
  auto s2 = apply_revision(s, Revision{RevisionType::Restrictive, "cap", std::nullopt, {},
                                       "budget", "4000"});
  EXPECT_EQ(s2.value_of("budget"), "4000");
  EXPECT_EQ(s2.effective().at("budget")->id, "rev2");
}

TEST(Revision, UnknownTarget) {
  Revision r{RevisionType::Cancellation, "x", std::string("nope"), {}, "", ""};
  EXPECT_THROW(apply_revision(base_spec(), r), ValidationError);
}

TEST(Trace, AppendRequiresConsecutiveSeq) {
  Trace t;
  t = append_event(t, make_event(1, ThoughtPayload{"a"}));
  EXPECT_THROW(append_event(t, make_event(3, ThoughtPayload{"b"})), IntegrityError);
  EXPECT_THROW(append_event(t, make_event(1, ThoughtPayload{"b"})), IntegrityError);
  // Persistence: the original trace is untouched.
  Trace t2 = append_event(t, make_event(2, ObsPayload{"ok"}));
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t2.size(), 2u);
  EXPECT_EQ(t2.at(2).kind(), EventKind::Obs);
  EXPECT_THROW(t2.at(3), IntegrityError);
}

TEST(Trace, LiveActsSkipCompensation) {
  Trace t;
  ActPayload plan{"draft", {}, ReversibilityClass::R, Phase::Plan, "s1"};
  ActPayload comp{"undo", {}, ReversibilityClass::R, Phase::Compensation, ""};
  comp.action = CompAction::Invert;
  comp.target_seq = 2;
  append_event_in_place(t, make_event(1, ThoughtPayload{"t"}));
  append_event_in_place(t, make_event(2, plan));
  append_event_in_place(t, make_event(3, comp));
  ActPayload re = plan;
  re.phase = Phase::Replanned;
  append_event_in_place(t, make_event(4, re));
  auto acts = live_acts(t);
  ASSERT_EQ(acts.size(), 2u);
  EXPECT_EQ(acts[0].seq, 2u);
  EXPECT_EQ(acts[1].seq, 4u);
  EXPECT_EQ(acts[1].position, 2u);
}

TEST(Epistemic, TruncationKeepsPrefix) {
  EpistemicState e{{1, 2, 5, 7, 9}, base_spec()};
  auto t = e.truncated(5);
  EXPECT_EQ(t.context, (std::vector<Seq>{1, 2, 5}));
  EXPECT_EQ(t.spec, e.spec);
  EXPECT_TRUE(e.truncated(0).context.empty());
}

TEST(EffectTags, OnlyDeclaredKeys) {
  ToolSpec t = tool("send", ReversibilityClass::K);
  t.effect_tags = {"budget", "venue_style"};
  ActPayload a{"send", {{"budget", "8000"}, {"recipients", "all"}}, ReversibilityClass::K};
  EXPECT_EQ(act_effect_tags(a, t), std::vector<std::string>{"budget=8000"});
}
