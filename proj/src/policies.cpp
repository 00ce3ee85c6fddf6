#include "streamrev/policies.hpp"

#include <charconv>

namespace streamrev {

Policy Policy::checkpoint_every(unsigned k) {
  if (k < 1) throw ValidationError("checkpoint interval must be >= 1");
  return Policy{Kind::CheckpointK, k};
}

std::string Policy::name() const {
  switch (kind) {
    case Kind::Oracle: return "oracle";
    case Kind::Absorber: return "absorber";
    case Kind::FullRestart: return "full_restart";
    case Kind::Naive: return "naive";
    case Kind::Ignore: return "ignore";
    case Kind::CheckpointK: return "checkpoint_" + std::to_string(checkpoint);
    case Kind::InterruptPattern: return "interrupt";
  }
  return "?";
}

Policy parse_policy(std::string_view s) {
  using K = Policy::Kind;
  if (s == "oracle") return {K::Oracle};
  if (s == "absorber") return {K::Absorber};
  if (s == "full_restart" || s == "full-restart") return {K::FullRestart};
  if (s == "naive") return {K::Naive};
  if (s == "ignore") return {K::Ignore};
  if (s == "interrupt" || s == "langgraph_interrupt") return {K::InterruptPattern};
  if (s == "checkpoint") return Policy::checkpoint_every(5);
  if (s.starts_with("checkpoint_")) {
    auto digits = s.substr(11);
    unsigned k = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && ptr == digits.data() + digits.size()) {
      return Policy::checkpoint_every(k);
    }
  }
  throw ValidationError("unknown policy '" + std::string(s) + "'");
}

std::size_t earliest_conflict_scan(std::span<const LiveAct> acts, const Specification& spec_new,
                                   const CompatFn& compat) {
  for (const auto& a : acts) {
    if (!is_kx(a.act->cls)) continue;
    if (!compat(*a.act, spec_new)) return a.position;
  }
  return acts.size() + 1;
}

std::size_t earliest_conflict_scan(const Trace& trace, const Specification& spec_new,
                                   const CompatFn& compat) {
  auto acts = live_acts(trace);
  return earliest_conflict_scan(acts, spec_new, compat);
}

CompensationProgram suffix_program(std::span<const LiveAct> acts, std::size_t k_star) {
  CompensationProgram p;
  for (const auto& a : acts) {
    if (a.position <= k_star) continue;
    switch (a.act->cls) {
      case ReversibilityClass::I:
        break;
      case ReversibilityClass::R:
        p.steps.push_back({a.position, a.seq, CompAction::Invert});
        break;
      case ReversibilityClass::K:
        p.steps.push_back({a.position, a.seq, CompAction::Compensate});
        break;
      case ReversibilityClass::X:
        p.steps.push_back({a.position, a.seq, CompAction::Fallback});
        break;
    }
  }
  return p;
}

namespace {

DecisionTriple rollback_to(std::span<const LiveAct> acts, const Specification& spec_new,
                           std::size_t k_star) {
  DecisionTriple t;
  t.k_star = k_star;
  t.program = suffix_program(acts, k_star);
  t.spec = spec_new;
  t.spec_updated = true;
  t.continuation = k_star == acts.size()
                       ? "continue under the updated specification"
                       : "re-plan from step " + std::to_string(k_star + 1) +
                             " under the updated specification";
  return t;
}

}  // namespace

DecisionTriple decide(const Policy& policy, std::span<const LiveAct> acts,
                      const Specification& spec, const Revision& rev, const CompatFn& compat) {
  using K = Policy::Kind;
  const std::size_t n = acts.size();
  if (policy.kind == K::Oracle) {
    throw UnsupportedPolicyError("oracle receives the merged specification at t=0; it cannot decide "
                                 "mid-run");
  }
  if (policy.kind == K::Ignore) {
    DecisionTriple t;
    t.k_star = n;
    t.spec = spec;
    t.spec_updated = false;
    t.continuation = "continue under the original specification";
    return t;
  }

  Specification spec_new = apply_revision(spec, rev);
  switch (policy.kind) {
    case K::Naive:
      return rollback_to(acts, spec_new, n);
    case K::FullRestart: {
      auto t = rollback_to(acts, spec_new, 0);
      t.continuation = "restart from scratch under the updated specification";
      return t;
    }
    case K::Absorber:
      return rollback_to(acts, spec_new, earliest_conflict_scan(acts, spec_new, compat) - 1);
    case K::CheckpointK: {
      const std::size_t optimal = earliest_conflict_scan(acts, spec_new, compat) - 1;
      return rollback_to(acts, spec_new, optimal / policy.checkpoint * policy.checkpoint);
    }
    case K::InterruptPattern: {
      std::size_t first_kx = n + 1;
      for (const auto& a : acts) {
        if (is_kx(a.act->cls)) {
          first_kx = a.position;
          break;
        }
      }
      return rollback_to(acts, spec_new, first_kx - 1);
    }
    default:
      break;
  }
  throw UnsupportedPolicyError("unhandled policy " + policy.name());
}

DecisionTriple decide(const Policy& policy, const Trace& trace, const Specification& spec,
                      const Revision& rev, const CompatFn& compat) {
  auto acts = live_acts(trace);
  return decide(policy, acts, spec, rev, compat);
}

DecisionTriple decide_forced(std::span<const LiveAct> acts, const Specification& spec,
                             const Revision& rev, std::size_t k) {
  if (k > acts.size()) throw ValidationError("forced rollback point beyond trace length");
  return rollback_to(acts, apply_revision(spec, rev), k);
}

bool rollback_feasible(std::span<const LiveAct> acts, const Specification& spec_new,
                       const CompatFn& compat, std::size_t k) {
  for (const auto& a : acts) {
    if (a.position > k) break;
    if (is_kx(a.act->cls) && !compat(*a.act, spec_new)) return false;
  }
  return true;
}

AdaptCostReport adapt_cost(const DecisionTriple& triple, std::span<const LiveAct> acts) {
  AdaptCostReport r;
  for (const auto& s : triple.program.steps) {
    if (s.action != CompAction::Fallback) ++r.comp_cost;
  }
  for (const auto& a : acts) {
    if (a.position > triple.k_star) ++r.waste_cost;
  }
  return r;
}

AdaptCostReport adapt_cost(const DecisionTriple& triple, const Trace& trace) {
  auto acts = live_acts(trace);
  return adapt_cost(triple, acts);
}

}  // namespace streamrev
