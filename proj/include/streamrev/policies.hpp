#pragma once

// Revision-response policies. The Absorber scans the live acts for the
// earliest K/X act incompatible with the revised specification, rolls back
// to just before it, and compensates the discarded suffix class by class.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "streamrev/core.hpp"

namespace streamrev {

/// Compatibility oracle: is this (K/X) act still valid under spec_new?
using CompatFn = std::function<bool(const ActPayload& act, const Specification& spec_new)>;

struct CompensationStep {
  std::size_t position = 0;  // live-act position of the undone act
  Seq act_seq = 0;
  CompAction action = CompAction::Invert;

  friend bool operator==(const CompensationStep&, const CompensationStep&) = default;
};

struct CompensationProgram {
  std::vector<CompensationStep> steps;
  friend bool operator==(const CompensationProgram&, const CompensationProgram&) = default;
};

struct Policy {
  enum class Kind { Oracle, Absorber, FullRestart, Naive, Ignore, CheckpointK, InterruptPattern };
  Kind kind = Kind::Absorber;
  unsigned checkpoint = 0;  // CheckpointK only, >= 1

  static Policy checkpoint_every(unsigned k);
  std::string name() const;
  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Accepts oracle, absorber, full_restart, naive, ignore, interrupt,
/// checkpoint_<k> (and checkpoint, meaning k = 5).
Policy parse_policy(std::string_view s);

struct DecisionTriple {
  std::size_t k_star = 0;
  CompensationProgram program;
  std::string continuation;  // directive handed to the planner
  Specification spec;        // specification the planner continues under
  bool spec_updated = true;

  friend bool operator==(const DecisionTriple&, const DecisionTriple&) = default;
};

struct AdaptCostReport {
  std::size_t comp_cost = 0;
  std::size_t waste_cost = 0;
  std::size_t total() const { return comp_cost + waste_cost; }
  friend bool operator==(const AdaptCostReport&, const AdaptCostReport&) = default;
};

/// Smallest position of a K/X act incompatible with spec_new, or n + 1.
/// compat is consulted only for K/X acts, in order, stopping at the first
/// conflict.
std::size_t earliest_conflict_scan(std::span<const LiveAct> acts, const Specification& spec_new,
                                   const CompatFn& compat);
std::size_t earliest_conflict_scan(const Trace& trace, const Specification& spec_new,
                                   const CompatFn& compat);

/// Undo program for positions k_star+1..n: R invert, K compensate, X fallback.
CompensationProgram suffix_program(std::span<const LiveAct> acts, std::size_t k_star);

DecisionTriple decide(const Policy& policy, std::span<const LiveAct> acts,
                      const Specification& spec, const Revision& rev, const CompatFn& compat);
DecisionTriple decide(const Policy& policy, const Trace& trace, const Specification& spec,
                      const Revision& rev, const CompatFn& compat);

/// Same as the Absorber but with the rollback point forced to k.
DecisionTriple decide_forced(std::span<const LiveAct> acts, const Specification& spec,
                             const Revision& rev, std::size_t k);

/// True iff no retained act (position <= k) is an incompatible K/X act.
bool rollback_feasible(std::span<const LiveAct> acts, const Specification& spec_new,
                       const CompatFn& compat, std::size_t k);

AdaptCostReport adapt_cost(const DecisionTriple& triple, std::span<const LiveAct> acts);
AdaptCostReport adapt_cost(const DecisionTriple& triple, const Trace& trace);

}  // namespace streamrev
