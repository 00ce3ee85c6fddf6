#include "streamrev/core.hpp"

#include <algorithm>
#include <set>

namespace streamrev {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::pair<Enum, std::string_view> (&table)[N],
                std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw ValidationError("unknown " + std::string(what) + ": '" + std::string(s) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum e, const std::pair<Enum, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::pair<ReversibilityClass, std::string_view> kClassNames[] = {
    {ReversibilityClass::I, "I"},
    {ReversibilityClass::R, "R"},
    {ReversibilityClass::K, "K"},
    {ReversibilityClass::X, "X"}};

constexpr std::pair<ClauseStatus, std::string_view> kStatusNames[] = {
    {ClauseStatus::Active, "active"},
    {ClauseStatus::Revoked, "revoked"},
    {ClauseStatus::Replaced, "replaced"}};

constexpr std::pair<RevisionType, std::string_view> kRevisionNames[] = {
    {RevisionType::Additive, "additive"},
    {RevisionType::Restrictive, "restrictive"},
    {RevisionType::Substitutive, "substitutive"},
    {RevisionType::Cancellation, "cancellation"},
    {RevisionType::PriorityShift, "priority_shift"}};

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::Act, "act"},
    {EventKind::Thought, "thought"},
    {EventKind::Obs, "obs"},
    {EventKind::Inj, "inj"}};

constexpr std::pair<Phase, std::string_view> kPhaseNames[] = {
    {Phase::Plan, "plan"},
    {Phase::Compensation, "compensation"},
    {Phase::Replanned, "replanned"}};

constexpr std::pair<CompAction, std::string_view> kActionNames[] = {
    {CompAction::Invert, "invert"},
    {CompAction::Compensate, "compensate"},
    {CompAction::Fallback, "fallback"}};

}  // namespace

std::string_view to_string(ReversibilityClass c) { return enum_name(c, kClassNames); }
ReversibilityClass parse_class(std::string_view s) {
  return parse_enum(s, kClassNames, "reversibility class");
}
std::string_view to_string(ClauseStatus s) { return enum_name(s, kStatusNames); }
ClauseStatus parse_clause_status(std::string_view s) {
  return parse_enum(s, kStatusNames, "clause status");
}
std::string_view to_string(RevisionType t) { return enum_name(t, kRevisionNames); }
RevisionType parse_revision_type(std::string_view s) {
  return parse_enum(s, kRevisionNames, "revision type");
}
std::string_view to_string(EventKind k) { return enum_name(k, kKindNames); }
EventKind parse_event_kind(std::string_view s) { return parse_enum(s, kKindNames, "event kind"); }
std::string_view to_string(Phase p) { return enum_name(p, kPhaseNames); }
Phase parse_phase(std::string_view s) { return parse_enum(s, kPhaseNames, "phase"); }
std::string_view to_string(CompAction a) { return enum_name(a, kActionNames); }
CompAction parse_comp_action(std::string_view s) {
  return parse_enum(s, kActionNames, "compensation action");
}

// ---------------------------------------------------------------------------

void ToolRegistry::add(ToolSpec tool) {
  if (tool.name.empty()) throw RegistryError("tool without a name");
  if (contains(tool.name)) throw RegistryError("duplicate tool '" + tool.name + "'");
  switch (tool.cls) {
    case ReversibilityClass::I:
      if (tool.inverse_of || tool.compensator) {
        throw RegistryError("I-class tool '" + tool.name + "' must not bind inverse/compensator");
      }
      break;
    case ReversibilityClass::R:
      if (!tool.inverse_of) throw RegistryError("R-class tool '" + tool.name + "' needs inverse_of");
      break;
    case ReversibilityClass::K:
      if (!tool.compensator) {
        throw RegistryError("K-class tool '" + tool.name + "' needs a compensator");
      }
      break;
    case ReversibilityClass::X:
      break;
  }
  tools_.push_back(std::move(tool));
}

void ToolRegistry::validate() const {
  for (const auto& t : tools_) {
    if (t.inverse_of && !contains(*t.inverse_of)) {
      throw RegistryError("tool '" + t.name + "' inverse '" + *t.inverse_of + "' is not registered");
    }
    if (t.compensator && !contains(*t.compensator)) {
      throw RegistryError("tool '" + t.name + "' compensator '" + *t.compensator +
                          "' is not registered");
    }
  }
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
  auto it = std::find_if(tools_.begin(), tools_.end(),
                         [&](const ToolSpec& t) { return t.name == name; });
  return it == tools_.end() ? nullptr : &*it;
}

const ToolSpec& ToolRegistry::get(std::string_view name) const {
  if (const auto* t = find(name)) return *t;
  throw RegistryError("unknown tool '" + std::string(name) + "'");
}

double reversibility_ratio(std::span<const ToolSpec> toolset) {
  if (toolset.empty()) throw DomainError("reversibility ratio of an empty toolset");
  auto reversible = std::count_if(toolset.begin(), toolset.end(), [](const ToolSpec& t) {
    return t.cls == ReversibilityClass::I || t.cls == ReversibilityClass::R;
  });
  return static_cast<double>(reversible) / static_cast<double>(toolset.size());
}

// ---------------------------------------------------------------------------

void validate_revision(const Revision& rev) {
  switch (rev.rtype) {
    case RevisionType::Substitutive:
    case RevisionType::Cancellation:
      if (!rev.target_clause || rev.target_clause->empty()) {
        throw ValidationError(std::string(to_string(rev.rtype)) + " revision needs target_clause");
      }
      break;
    default:
      break;
  }
  if (rev.rtype != RevisionType::Cancellation && rev.value.empty()) {
    throw ValidationError(std::string(to_string(rev.rtype)) + " revision needs a clause value");
  }
  if (rev.rtype != RevisionType::Cancellation && rev.rtype != RevisionType::Substitutive &&
      rev.key.empty()) {
    throw ValidationError(std::string(to_string(rev.rtype)) + " revision needs a clause key");
  }
}

const Clause* Specification::find_clause(std::string_view id) const {
  auto it = std::find_if(clauses.begin(), clauses.end(),
                         [&](const Clause& c) { return c.id == id; });
  return it == clauses.end() ? nullptr : &*it;
}

std::vector<const Clause*> Specification::active_clauses() const {
  std::vector<const Clause*> out;
  for (const auto& c : clauses) {
    if (c.status == ClauseStatus::Active) out.push_back(&c);
  }
  return out;
}

std::map<std::string, const Clause*> Specification::effective() const {
  std::map<std::string, const Clause*> out;
  for (const auto& c : clauses) {
    if (c.status == ClauseStatus::Active) out[c.key] = &c;
  }
  return out;
}

std::vector<std::string> Specification::revoked_keys() const {
  std::set<std::string> revoked;
  for (const auto& c : clauses) {
    if (c.status == ClauseStatus::Revoked) revoked.insert(c.key);
  }
  auto eff = effective();
  std::vector<std::string> out;
  for (const auto& k : revoked) {
    if (!eff.contains(k)) out.push_back(k);
  }
  return out;
}

std::optional<std::string> Specification::value_of(std::string_view key) const {
  std::optional<std::string> out;
  for (const auto& c : clauses) {
    if (c.status == ClauseStatus::Active && c.key == key) out = c.value;
  }
  return out;
}

Specification apply_revision(const Specification& spec, const Revision& rev) {
  validate_revision(rev);
  Specification out = spec;
  const std::string new_id = "rev" + std::to_string(spec.absorbed.size() + 1);

  auto target = [&]() -> Clause& {
    auto it = std::find_if(out.clauses.begin(), out.clauses.end(),
                           [&](const Clause& c) { return c.id == *rev.target_clause; });
    if (it == out.clauses.end()) {
      throw ValidationError("unknown target clause '" + *rev.target_clause + "'");
    }
    if (it->status != ClauseStatus::Active) {
      throw ValidationError("target clause '" + *rev.target_clause + "' is already " +
                            std::string(to_string(it->status)));
    }
    return *it;
  };

  switch (rev.rtype) {
    case RevisionType::Additive:
    case RevisionType::Restrictive:
    case RevisionType::PriorityShift:
      out.clauses.push_back({new_id, rev.key, rev.value, rev.text, ClauseStatus::Active});
      break;
    case RevisionType::Substitutive: {
      Clause& old = target();
      old.status = ClauseStatus::Replaced;
      std::string key = rev.key.empty() ? old.key : rev.key;
      out.clauses.push_back({new_id, std::move(key), rev.value, rev.text, ClauseStatus::Active});
      break;
    }
    case RevisionType::Cancellation:
      target().status = ClauseStatus::Revoked;
      break;
  }
  out.absorbed.push_back(rev);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> act_effect_tags(const ActPayload& act, const ToolSpec& tool) {
  std::vector<std::string> out;
  for (const auto& key : tool.effect_tags) {
    if (auto it = act.args.find(key); it != act.args.end()) {
      out.push_back(key + "=" + it->second);
    }
  }
  return out;
}

Event make_event(Seq seq, Payload payload) {
  return Event{seq, seq, std::move(payload)};
}

const Event& Trace::at(Seq seq) const {
  if (seq == 0 || seq > events.size()) {
    throw IntegrityError("trace has no event with seq " + std::to_string(seq));
  }
  return events[seq - 1];
}

void append_event_in_place(Trace& trace, Event e) {
  if (e.seq != trace.last_seq() + 1) {
    throw IntegrityError("non-consecutive seq: trace ends at " + std::to_string(trace.last_seq()) +
                         ", got " + std::to_string(e.seq));
  }
  if (e.timestamp < (trace.events.empty() ? 0 : trace.events.back().timestamp)) {
    throw IntegrityError("timestamp regression at seq " + std::to_string(e.seq));
  }
  trace.events.push_back(std::move(e));
}

Trace append_event(const Trace& trace, Event e) {
  Trace out = trace;
  append_event_in_place(out, std::move(e));
  return out;
}

EpistemicState EpistemicState::truncated(Seq k) const {
  EpistemicState out;
  out.spec = spec;
  for (Seq s : context) {
    if (s <= k) out.context.push_back(s);
  }
  return out;
}

std::vector<LiveAct> live_acts(const Trace& trace, std::span<const Seq> context) {
  std::vector<LiveAct> out;
  for (Seq s : context) {
    const Event& e = trace.at(s);
    const ActPayload* a = e.act();
    if (a == nullptr || a->phase == Phase::Compensation) continue;
    out.push_back({out.size() + 1, s, a});
  }
  return out;
}

std::vector<LiveAct> live_acts(const Trace& trace) {
  std::vector<Seq> all;
  all.reserve(trace.events.size());
  for (const auto& e : trace.events) all.push_back(e.seq);
  return live_acts(trace, all);
}

}  // namespace streamrev
