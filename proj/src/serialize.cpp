#include "streamrev/serialize.hpp"

namespace streamrev {

using nlohmann::json;

namespace {

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

template <typename T>
void put_opt(json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

}  // namespace

void to_json(json& j, const Clause& c) {
  j = {{"id", c.id}, {"key", c.key}, {"value", c.value}, {"text", c.text},
       {"status", to_string(c.status)}};
}

void from_json(const json& j, Clause& c) {
  c.id = j.at("id").get<std::string>();
  c.key = j.at("key").get<std::string>();
  c.value = j.value("value", "");
  c.text = j.value("text", "");
  c.status = parse_clause_status(j.value("status", "active"));
}

void to_json(json& j, const Revision& r) {
  j = {{"rtype", to_string(r.rtype)}, {"text", r.text},   {"conflict_tags", r.conflict_tags},
       {"key", r.key},                {"value", r.value}};
  put_opt(j, "target_clause", r.target_clause);
}

void from_json(const json& j, Revision& r) {
  r.rtype = parse_revision_type(j.at("rtype").get<std::string>());
  r.text = j.value("text", "");
  r.target_clause = opt<std::string>(j, "target_clause");
  r.conflict_tags = j.value("conflict_tags", std::vector<std::string>{});
  r.key = j.value("key", "");
  r.value = j.value("value", "");
}

Revision revision_from_json(const json& j) {
  try {
    Revision r = j.get<Revision>();
    validate_revision(r);
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed revision: ") + e.what());
  }
}

void to_json(json& j, const Specification& s) {
  j = {{"initial_query", s.initial_query}, {"clauses", s.clauses}, {"absorbed", s.absorbed}};
}

void from_json(const json& j, Specification& s) {
  s.initial_query = j.value("initial_query", "");
  s.clauses = j.value("clauses", std::vector<Clause>{});
  s.absorbed = j.value("absorbed", std::vector<Revision>{});
}

void to_json(json& j, const ActPayload& a) {
  j = {{"tool", a.tool},         {"args", a.args},         {"class", to_string(a.cls)},
       {"phase", to_string(a.phase)}, {"step_id", a.step_id}};
  j["action"] = a.action ? json(to_string(*a.action)) : json(nullptr);
  put_opt(j, "target_seq", a.target_seq);
}

void from_json(const json& j, ActPayload& a) {
  a.tool = j.at("tool").get<std::string>();
  a.args = j.value("args", Args{});
  a.cls = parse_class(j.at("class").get<std::string>());
  a.phase = parse_phase(j.value("phase", "plan"));
  a.step_id = j.value("step_id", "");
  if (auto s = opt<std::string>(j, "action")) a.action = parse_comp_action(*s);
  a.target_seq = opt<Seq>(j, "target_seq");
}

void to_json(json& j, const Event& e) {
  j = {{"seq", e.seq}, {"timestamp", e.timestamp}, {"kind", to_string(e.kind())}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ActPayload>) {
          j["payload"] = p;
        } else if constexpr (std::is_same_v<T, InjPayload>) {
          j["payload"] = {{"revision", p.revision},
                          {"policy", p.decision.policy},
                          {"k_star", p.decision.k_star},
                          {"n_live", p.decision.n_live},
                          {"spec_updated", p.decision.spec_updated}};
        } else {
          j["payload"] = {{"text", p.text}};
        }
      },
      e.payload);
}

void from_json(const json& j, Event& e) {
  e.seq = j.at("seq").get<Seq>();
  e.timestamp = j.value("timestamp", e.seq);
  const json& p = j.at("payload");
  switch (parse_event_kind(j.at("kind").get<std::string>())) {
    case EventKind::Act: e.payload = p.get<ActPayload>(); break;
    case EventKind::Thought: e.payload = ThoughtPayload{p.at("text").get<std::string>()}; break;
    case EventKind::Obs: e.payload = ObsPayload{p.at("text").get<std::string>()}; break;
    case EventKind::Inj: {
      InjPayload inj;
      inj.revision = p.at("revision").get<Revision>();
      inj.decision.policy = p.value("policy", "");
      inj.decision.k_star = p.at("k_star").get<std::size_t>();
      inj.decision.n_live = p.at("n_live").get<std::size_t>();
      inj.decision.spec_updated = p.value("spec_updated", true);
      e.payload = std::move(inj);
      break;
    }
  }
}

void to_json(json& j, const Trace& t) {
  json history = json::array();
  for (const auto& [seq, spec] : t.spec_history) history.push_back({{"seq", seq}, {"spec", spec}});
  j = {{"events", t.events}, {"spec_history", history}};
}

void from_json(const json& j, Trace& t) {
  t = Trace{};
  for (const auto& e : j.at("events")) append_event_in_place(t, e.get<Event>());
  for (const auto& h : j.value("spec_history", json::array())) {
    t.spec_history.push_back({h.at("seq").get<Seq>(), h.at("spec").get<Specification>()});
  }
}

void to_json(json& j, const EffectEntry& e) {
  j = {{"entry_id", e.entry_id}, {"source_seq", e.source_seq}, {"kind", to_string(e.kind)},
       {"tool", e.tool},         {"class", to_string(e.cls)},  {"public", e.is_public},
       {"content", e.content},   {"effect_tags", e.effect_tags}};
  put_opt(j, "ref_seq", e.ref_seq);
  put_opt(j, "ref_entry", e.ref_entry);
}

void from_json(const json& j, EffectEntry& e) {
  e.entry_id = j.at("entry_id").get<std::string>();
  e.source_seq = j.at("source_seq").get<Seq>();
  e.kind = parse_effect_kind(j.at("kind").get<std::string>());
  e.tool = j.value("tool", "");
  e.cls = parse_class(j.at("class").get<std::string>());
  e.is_public = j.value("public", false);
  e.content = j.value("content", Args{});
  e.effect_tags = j.value("effect_tags", std::vector<std::string>{});
  e.ref_seq = opt<Seq>(j, "ref_seq");
  e.ref_entry = opt<std::string>(j, "ref_entry");
}

void to_json(json& j, const WorldEntry& e) {
  j = {{"entry_id", e.entry_id}, {"subject", e.subject},         {"tool", e.tool},
       {"class", to_string(e.cls)}, {"public", e.is_public},     {"status", to_string(e.status)},
       {"source_seq", e.source_seq}, {"content", e.content},     {"effect_tags", e.effect_tags}};
  put_opt(j, "compensated_by", e.compensated_by);
}

void to_json(json& j, const DecisionTriple& d) {
  json steps = json::array();
  for (const auto& s : d.program.steps) {
    steps.push_back(
        {{"position", s.position}, {"act_seq", s.act_seq}, {"action", to_string(s.action)}});
  }
  j = {{"k_star", d.k_star},
       {"program", steps},
       {"continuation", d.continuation},
       {"spec_updated", d.spec_updated}};
}

void from_json(const json& j, DecisionTriple& d) {
  d.k_star = j.at("k_star").get<std::size_t>();
  d.program.steps.clear();
  for (const auto& s : j.value("program", json::array())) {
    d.program.steps.push_back({s.at("position").get<std::size_t>(), s.at("act_seq").get<Seq>(),
                               parse_comp_action(s.at("action").get<std::string>())});
  }
  d.continuation = j.value("continuation", "");
  d.spec_updated = j.value("spec_updated", true);
}

void to_json(json& j, const InjectionRecord& r) {
  j = {{"inj_seq", r.inj_seq},
       {"trigger", r.trigger},
       {"revision", r.revision},
       {"decision", r.decision},
       {"cost", {{"comp_cost", r.cost.comp_cost}, {"waste_cost", r.cost.waste_cost}}},
       {"compensation_seqs", r.compensation_seqs}};
}

void from_json(const json& j, InjectionRecord& r) {
  r.inj_seq = j.at("inj_seq").get<Seq>();
  r.trigger = j.value("trigger", "");
  r.revision = j.at("revision").get<Revision>();
  r.decision = j.at("decision").get<DecisionTriple>();
  r.cost.comp_cost = j.at("cost").at("comp_cost").get<std::size_t>();
  r.cost.waste_cost = j.at("cost").at("waste_cost").get<std::size_t>();
  r.compensation_seqs = j.value("compensation_seqs", std::vector<Seq>{});
}

void to_json(json& j, const Counters& c) {
  j = {{"events", c.events},
       {"steps", c.steps},
       {"wasted_acts", c.wasted_acts},
       {"comp_calls", c.comp_calls},
       {"token_estimate", c.token_estimate}};
}

void from_json(const json& j, Counters& c) {
  c.events = j.at("events").get<std::size_t>();
  c.steps = j.at("steps").get<std::size_t>();
  c.wasted_acts = j.at("wasted_acts").get<std::size_t>();
  c.comp_calls = j.at("comp_calls").get<std::size_t>();
  c.token_estimate = j.value("token_estimate", std::uint64_t{0});
}

void to_json(json& j, const RunConfig& c) {
  j = {{"scenario", c.scenario},
       {"rho", c.rho},
       {"policy", c.policy},
       {"timing", c.timing},
       {"n_injections", c.n_injections},
       {"length_mult", c.length_mult},
       {"seed", c.seed},
       {"backend", c.backend},
       {"budget", c.budget},
       {"tokens_per_event", c.tokens_per_event},
       {"step_delay_ms", c.step_delay_ms}};
  j["revision_type"] = c.revision_type ? json(to_string(*c.revision_type)) : json(nullptr);
}

void from_json(const json& j, RunConfig& c) {
  c = RunConfig{};
  c.scenario = j.value("scenario", c.scenario);
  c.rho = j.value("rho", c.rho);
  c.policy = j.value("policy", c.policy);
  c.timing = j.value("timing", c.timing);
  c.n_injections = j.value("n_injections", c.n_injections);
  c.length_mult = j.value("length_mult", c.length_mult);
  c.seed = j.value("seed", c.seed);
  c.backend = j.value("backend", c.backend);
  c.budget = j.value("budget", c.budget);
  c.tokens_per_event = j.value("tokens_per_event", c.tokens_per_event);
  c.step_delay_ms = j.value("step_delay_ms", c.step_delay_ms);
  if (j.contains("revision_type")) {
    if (j["revision_type"].is_null()) {
      c.revision_type.reset();
    } else {
      c.revision_type = parse_revision_type(j["revision_type"].get<std::string>());
    }
  }
}

void to_json(json& j, const RunRecord& r) {
  json entries = json::array();
  for (const auto& [id, e] : r.world.entries()) entries.push_back(e);
  json unsat = json::array();
  for (const auto& u : r.world.unsatisfiable()) {
    unsat.push_back(
        {{"action_seq", u.action_seq}, {"revision_ref", u.revision_ref}, {"note", u.note}});
  }
  j = {{"run_id", r.run_id},
       {"config", r.config},
       {"realized_rho", r.realized_rho},
       {"plan_length", r.plan_length},
       {"budget", r.budget},
       {"oracle_merged", r.oracle_merged},
       {"trace", r.trace},
       {"world", {{"log", r.world.log()}, {"entries", entries}, {"unsatisfiable", unsat}}},
       {"injections", r.injections},
       {"final_spec", r.final_spec},
       {"reference_spec", r.reference_spec},
       {"counters", r.counters},
       {"termination", to_string(r.termination)},
       {"error", r.error}};
  put_opt(j, "quality", r.quality);
}

void from_json(const json& j, RunRecord& r) {
  r = RunRecord{};
  r.run_id = j.at("run_id").get<std::string>();
  r.config = j.at("config").get<RunConfig>();
  r.realized_rho = j.value("realized_rho", 0.0);
  r.plan_length = j.value("plan_length", std::size_t{0});
  r.budget = j.value("budget", std::size_t{0});
  r.oracle_merged = j.value("oracle_merged", false);
  r.trace = j.at("trace").get<Trace>();
  for (const auto& e : j.at("world").at("log")) r.world.append(e.get<EffectEntry>());
  r.injections = j.value("injections", std::vector<InjectionRecord>{});
  r.final_spec = j.at("final_spec").get<Specification>();
  r.reference_spec = j.at("reference_spec").get<Specification>();
  r.counters = j.at("counters").get<Counters>();
  r.termination = parse_termination(j.at("termination").get<std::string>());
  r.error = j.value("error", "");
  r.quality = opt<double>(j, "quality");
}

json summary_row(const RunRecord& r) {
  json row = {{"run_id", r.run_id},
              {"scenario", r.config.scenario},
              {"rho", r.config.rho},
              {"realized_rho", r.realized_rho},
              {"policy", r.config.policy},
              {"seed", r.config.seed},
              {"timing", r.config.timing},
              {"n_injections", r.config.n_injections},
              {"length_mult", r.config.length_mult},
              {"wasted_acts", r.counters.wasted_acts},
              {"comp_calls", r.counters.comp_calls},
              {"steps", r.counters.steps},
              {"token_estimate", r.counters.token_estimate},
              {"termination", to_string(r.termination)}};
  row["revision_type"] =
      r.config.revision_type ? json(to_string(*r.config.revision_type)) : json(nullptr);
  put_opt(row, "quality", r.quality);
  return row;
}

}  // namespace streamrev
