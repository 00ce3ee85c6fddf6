#pragma once

// Stream vocabulary: reversibility taxonomy, tools, specifications,
// revisions, events and traces. Everything here is a value type.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "streamrev/error.hpp"

namespace streamrev {

using Seq = std::uint64_t;

/// Reversibility class of a tool's effect on world state.
///   I  idempotent, no world effect
///   R  exact inverse exists
///   K  compensable (imperfect undo)
///   X  irreversible
enum class ReversibilityClass { I, R, K, X };

std::string_view to_string(ReversibilityClass c);
ReversibilityClass parse_class(std::string_view s);

inline bool is_kx(ReversibilityClass c) {
  return c == ReversibilityClass::K || c == ReversibilityClass::X;
}

// ---------------------------------------------------------------------------
// Tools

struct ToolSpec {
  std::string name;
  ReversibilityClass cls = ReversibilityClass::I;
  std::optional<std::string> inverse_of;   // required iff cls == R
  std::optional<std::string> compensator;  // required iff cls == K
  std::vector<std::string> effect_tags;    // tag keys written into entries
  std::vector<std::string> params_schema;
  bool public_effect = false;  // entries visible to the outside world
  std::string description;

  friend bool operator==(const ToolSpec&, const ToolSpec&) = default;
};

/// Registry of tools. Rejects tools whose bindings do not match their class.
class ToolRegistry {
 public:
  void add(ToolSpec tool);
  // Checks that every inverse/compensator binding resolves. Call after all
  // tools (including auxiliary ones) are registered.
  void validate() const;

  const ToolSpec& get(std::string_view name) const;
  const ToolSpec* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const std::vector<ToolSpec>& tools() const { return tools_; }

 private:
  std::vector<ToolSpec> tools_;
};

/// Fraction of tools in the set that are I or R class.
double reversibility_ratio(std::span<const ToolSpec> toolset);

// ---------------------------------------------------------------------------
// Specifications and revisions

enum class ClauseStatus { Active, Revoked, Replaced };
std::string_view to_string(ClauseStatus s);
ClauseStatus parse_clause_status(std::string_view s);

struct Clause {
  std::string id;
  std::string key;    // structured slot the clause constrains, e.g. "venue_style"
  std::string value;  // value the slot must take
  std::string text;
  ClauseStatus status = ClauseStatus::Active;

  friend bool operator==(const Clause&, const Clause&) = default;
};

enum class RevisionType { Additive, Restrictive, Substitutive, Cancellation, PriorityShift };
std::string_view to_string(RevisionType t);
RevisionType parse_revision_type(std::string_view s);
inline constexpr RevisionType kAllRevisionTypes[] = {
    RevisionType::Additive, RevisionType::Restrictive, RevisionType::Substitutive,
    RevisionType::Cancellation, RevisionType::PriorityShift};

struct Revision {
  RevisionType rtype = RevisionType::Additive;
  std::string text;
  std::optional<std::string> target_clause;  // required for substitutive/cancellation
  std::vector<std::string> conflict_tags;    // "key=value" effect tags this contradicts
  // Structured clause content for additive/restrictive/substitutive/priority_shift.
  std::string key;
  std::string value;

  friend bool operator==(const Revision&, const Revision&) = default;
};

/// Throws ValidationError if the revision violates its type's shape.
void validate_revision(const Revision& rev);

struct Specification {
  std::string initial_query;
  std::vector<Clause> clauses;
  std::vector<Revision> absorbed;

  const Clause* find_clause(std::string_view id) const;
  std::vector<const Clause*> active_clauses() const;
  // Latest active clause per key; later clauses override earlier ones.
  std::map<std::string, const Clause*> effective() const;
  // Keys whose every clause has been revoked.
  std::vector<std::string> revoked_keys() const;
  std::optional<std::string> value_of(std::string_view key) const;

  friend bool operator==(const Specification&, const Specification&) = default;
};

/// Returns spec with rev absorbed. Clause records are never deleted.
Specification apply_revision(const Specification& spec, const Revision& rev);

// ---------------------------------------------------------------------------
// Events

enum class EventKind { Act, Thought, Obs, Inj };
std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view s);

enum class Phase { Plan, Compensation, Replanned };
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

enum class CompAction { Invert, Compensate, Fallback };
std::string_view to_string(CompAction a);
CompAction parse_comp_action(std::string_view s);

using Args = std::map<std::string, std::string>;

struct ActPayload {
  std::string tool;
  Args args;
  ReversibilityClass cls = ReversibilityClass::I;
  Phase phase = Phase::Plan;
  std::string step_id;  // scripted step this act realizes (plan/replanned acts)
  // Set on compensation-phase acts: what was done and to which act.
  std::optional<CompAction> action;
  std::optional<Seq> target_seq;

  friend bool operator==(const ActPayload&, const ActPayload&) = default;
};

/// "key=value" tags for every effect tag of the tool present in the args.
std::vector<std::string> act_effect_tags(const ActPayload& act, const ToolSpec& tool);

struct ThoughtPayload {
  std::string text;
  friend bool operator==(const ThoughtPayload&, const ThoughtPayload&) = default;
};

struct ObsPayload {
  std::string text;
  friend bool operator==(const ObsPayload&, const ObsPayload&) = default;
};

// Decision taken when the revision was absorbed. Stored on the Inj event so
// counters can be recomputed from the trace alone.
struct InjDecision {
  std::string policy;
  std::size_t k_star = 0;    // live-act position retained
  std::size_t n_live = 0;    // live acts at absorption time
  bool spec_updated = true;

  friend bool operator==(const InjDecision&, const InjDecision&) = default;
};

struct InjPayload {
  Revision revision;
  InjDecision decision;
  friend bool operator==(const InjPayload&, const InjPayload&) = default;
};

using Payload = std::variant<ActPayload, ThoughtPayload, ObsPayload, InjPayload>;

struct Event {
  Seq seq = 0;
  Seq timestamp = 0;  // logical time; equals seq
  Payload payload;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }
  const ActPayload* act() const { return std::get_if<ActPayload>(&payload); }
  const InjPayload* inj() const { return std::get_if<InjPayload>(&payload); }

  friend bool operator==(const Event&, const Event&) = default;
};

Event make_event(Seq seq, Payload payload);

struct Trace {
  std::vector<Event> events;
  std::vector<std::pair<Seq, Specification>> spec_history;

  Seq last_seq() const { return events.empty() ? 0 : events.back().seq; }
  Seq next_seq() const { return last_seq() + 1; }
  const Event& at(Seq seq) const;
  std::size_t size() const { return events.size(); }

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Returns trace with e appended. e.seq must be last_seq + 1.
Trace append_event(const Trace& trace, Event e);
// In-place variant used on hot paths; same contract.
void append_event_in_place(Trace& trace, Event e);

// ---------------------------------------------------------------------------
// Epistemic state

struct EpistemicState {
  std::vector<Seq> context;  // increasing seq references visible to the planner
  Specification spec;

  /// Keeps exactly the context references with seq <= k.
  EpistemicState truncated(Seq k) const;

  friend bool operator==(const EpistemicState&, const EpistemicState&) = default;
};

/// A plan or replanned act visible in the planner's context, with its
/// 1-based position among such acts. Positions are the rollback coordinates.
struct LiveAct {
  std::size_t position = 0;
  Seq seq = 0;
  const ActPayload* act = nullptr;
};

/// Live plan acts in context order. Compensation-phase acts are excluded.
std::vector<LiveAct> live_acts(const Trace& trace, std::span<const Seq> context);
/// Every plan/replanned act of the trace (context = whole trace).
std::vector<LiveAct> live_acts(const Trace& trace);

}  // namespace streamrev
