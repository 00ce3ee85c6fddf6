#pragma once

// The stream runtime: plan -> act -> observe, with a non-blocking revision
// queue polled at event boundaries.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "streamrev/backends.hpp"
#include "streamrev/policies.hpp"
#include "streamrev/scenario.hpp"
#include "streamrev/world.hpp"

namespace streamrev {

// ---------------------------------------------------------------------------
// Injection schedule

enum class Timing { Early, Mid, Late, VeryLate, AtFraction, Spread };
std::string_view to_string(Timing t);

struct TimingSpec {
  Timing timing = Timing::Mid;
  double fraction = 0.0;  // AtFraction only, in [0, 1]

  /// "early", "mid", "late", "very_late", "spread" or "at_fraction:<f>".
  static TimingSpec parse(std::string_view s);
  std::string name() const;
  friend bool operator==(const TimingSpec&, const TimingSpec&) = default;
};

struct ScheduledInjection {
  std::size_t after_live_acts = 0;  // fires once this many live acts exist
  Revision revision;
  std::string trigger;  // regime label, e.g. "mid" or "spread:2/5"
};

struct InjectionSchedule {
  std::vector<ScheduledInjection> entries;
};

/// Trigger point of a single injection, as a count of live acts:
///   early      0 (before the first act)
///   mid        first_kx_index (right after the first K/X step)
///   late       ceil(0.9 N), at least mid + 1
///   very_late  N (after every scripted act)
///   at_fraction(f)  ceil(f N)
std::size_t trigger_point(const TimingSpec& t, const Scenario& sc);

/// Revision types used by successive injections, starting from first and
/// cycling substitutive, restrictive, additive, priority_shift, cancellation.
std::vector<RevisionType> revision_rotation(RevisionType first, unsigned n);

/// n == 1: one revision of rtype at the timing's trigger point.
/// n > 1 (timing must be spread): revision i of the rotation fires at
/// ceil(i N / (n + 1)).
InjectionSchedule make_schedule(const Scenario& sc, RevisionType rtype, const TimingSpec& timing,
                                unsigned n_injections);

/// Initial specification with every scheduled revision absorbed in order.
Specification merged_spec(const Specification& initial, const InjectionSchedule& schedule);

/// Multi-producer, single-consumer FIFO. push never blocks on the consumer.
class InjectionQueue {
 public:
  /// Returns the revision's 1-based position in the queue.
  std::size_t push(Revision rev, std::string trigger = "external");
  std::optional<std::pair<Revision, std::string>> try_pop();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::deque<std::pair<Revision, std::string>> items_;
};

// ---------------------------------------------------------------------------
// Runs

struct RunConfig {
  std::string scenario = "event_planning";
  double rho = 0.25;
  std::string policy = "absorber";
  std::optional<RevisionType> revision_type = RevisionType::Substitutive;  // nullopt: no schedule
  std::string timing = "mid";
  unsigned n_injections = 1;
  unsigned length_mult = 1;
  std::uint64_t seed = 0;
  std::string backend = "mock";
  std::size_t budget = 0;  // 0: twice the scripted plan length
  unsigned tokens_per_event = 250;
  unsigned step_delay_ms = 0;  // pause after each observation (live sessions)

  /// e.g. "event_planning-r0.25-substitutive-absorber-mid-n1-m1-s0".
  std::string run_id() const;
};

std::string format_rho(double rho);

enum class Termination { Completed, BudgetExhausted, BackendError, Cancelled };
std::string_view to_string(Termination t);
Termination parse_termination(std::string_view s);

struct InjectionRecord {
  Seq inj_seq = 0;
  std::string trigger;
  Revision revision;
  DecisionTriple decision;
  AdaptCostReport cost;
  std::vector<Seq> compensation_seqs;  // act or fallback-observation events
};

struct Counters {
  std::size_t events = 0;
  std::size_t steps = 0;  // act events of every phase; the budgeted quantity
  std::size_t wasted_acts = 0;
  std::size_t comp_calls = 0;
  std::uint64_t token_estimate = 0;

  friend bool operator==(const Counters&, const Counters&) = default;
};

struct RunRecord {
  RunConfig config;
  std::string run_id;
  double realized_rho = 0.0;
  std::size_t plan_length = 0;
  std::size_t budget = 0;
  bool oracle_merged = false;  // oracle started from the merged specification
  Trace trace;
  WorldState world;
  std::vector<InjectionRecord> injections;
  Specification final_spec;
  Specification reference_spec;  // what quality is judged against
  Counters counters;
  std::optional<double> quality;
  Termination termination = Termination::Completed;
  std::string error;  // backend failure message, if any
};

using EventObserver = std::function<void(const Event&)>;

struct SessionHooks {
  InjectionQueue* queue = nullptr;  // external producers; schedule entries also go here
  EventObserver on_event;
  const std::atomic<bool>* cancel = nullptr;  // stops the session at the next step
};

/// Runs one session to completion, budget exhaustion or backend failure.
/// Backend failures are reported in the record, never thrown; configuration
/// errors throw.
RunRecord run_session(const RunConfig& cfg, Backend& backend, const SessionHooks& hooks = {});
RunRecord run_session(const RunConfig& cfg);

/// Recomputes wasted_acts, comp_calls, steps and events by replaying the
/// trace (context truncation included) from the stored decisions alone.
Counters recompute_counters(const RunRecord& rec);

/// Throws IntegrityError when stored counters disagree with the trace.
void check_integrity(const RunRecord& rec);

}  // namespace streamrev
