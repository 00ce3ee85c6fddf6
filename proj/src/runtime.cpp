#include "streamrev/runtime.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

namespace streamrev {

// ---------------------------------------------------------------------------
// Schedules

std::string_view to_string(Timing t) {
  switch (t) {
    case Timing::Early: return "early";
    case Timing::Mid: return "mid";
    case Timing::Late: return "late";
    case Timing::VeryLate: return "very_late";
    case Timing::AtFraction: return "at_fraction";
    case Timing::Spread: return "spread";
  }
  return "?";
}

TimingSpec TimingSpec::parse(std::string_view s) {
  if (s == "early") return {Timing::Early};
  if (s == "mid") return {Timing::Mid};
  if (s == "late") return {Timing::Late};
  if (s == "very_late" || s == "very-late") return {Timing::VeryLate};
  if (s == "spread") return {Timing::Spread};
  constexpr std::string_view prefix = "at_fraction:";
  if (s.starts_with(prefix)) {
    std::string num(s.substr(prefix.size()));
    try {
      std::size_t used = 0;
      double f = std::stod(num, &used);
      if (used == num.size() && f >= 0.0 && f <= 1.0) return {Timing::AtFraction, f};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown timing '" + std::string(s) +
                    "' (early, mid, late, very_late, spread, at_fraction:<0..1>)");
}

std::string TimingSpec::name() const {
  if (timing != Timing::AtFraction) return std::string(to_string(timing));
  std::ostringstream out;
  out << "at_fraction:" << fraction;
  return out.str();
}

std::size_t trigger_point(const TimingSpec& t, const Scenario& sc) {
  const std::size_t n = sc.plan_length;
  const std::size_t mid = sc.first_kx_index;
  switch (t.timing) {
    case Timing::Early: return 0;
    case Timing::Mid: return mid;
    case Timing::Late: {
      auto late = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
      return std::min(n, std::max(late, mid + 1));
    }
    case Timing::VeryLate: return n;
    case Timing::AtFraction:
      return static_cast<std::size_t>(std::ceil(t.fraction * static_cast<double>(n)));
    case Timing::Spread: break;
  }
  throw ConfigError("spread timing has no single trigger point");
}

std::vector<RevisionType> revision_rotation(RevisionType first, unsigned n) {
  static constexpr RevisionType cycle[] = {RevisionType::Substitutive, RevisionType::Restrictive,
                                           RevisionType::Additive, RevisionType::PriorityShift,
                                           RevisionType::Cancellation};
  std::size_t start = std::find(std::begin(cycle), std::end(cycle), first) - std::begin(cycle);
  std::vector<RevisionType> out;
  for (unsigned i = 0; i < n; ++i) out.push_back(cycle[(start + i) % std::size(cycle)]);
  return out;
}

InjectionSchedule make_schedule(const Scenario& sc, RevisionType rtype, const TimingSpec& timing,
                                unsigned n_injections) {
  InjectionSchedule s;
  if (n_injections == 0) return s;
  if (n_injections > 5) throw ConfigError("at most 5 injections per run (one per revision type)");
  if (n_injections == 1 && timing.timing != Timing::Spread) {
    s.entries.push_back({trigger_point(timing, sc), build_revision(sc, rtype), timing.name()});
    return s;
  }
  if (timing.timing != Timing::Spread) {
    throw ConfigError("multiple injections require spread timing");
  }
  const auto types = revision_rotation(rtype, n_injections);
  const double n = static_cast<double>(sc.plan_length);
  for (unsigned i = 1; i <= n_injections; ++i) {
    auto at = static_cast<std::size_t>(std::ceil(i * n / (n_injections + 1)));
    s.entries.push_back({at, build_revision(sc, types[i - 1]),
                         "spread:" + std::to_string(i) + "/" + std::to_string(n_injections)});
  }
  return s;
}

Specification merged_spec(const Specification& initial, const InjectionSchedule& schedule) {
  Specification s = initial;
  for (const auto& e : schedule.entries) s = apply_revision(s, e.revision);
  return s;
}

std::size_t InjectionQueue::push(Revision rev, std::string trigger) {
  std::lock_guard lock(mu_);
  items_.emplace_back(std::move(rev), std::move(trigger));
  return items_.size();
}

std::optional<std::pair<Revision, std::string>> InjectionQueue::try_pop() {
  std::lock_guard lock(mu_);
  if (items_.empty()) return std::nullopt;
  auto item = std::move(items_.front());
  items_.pop_front();
  return item;
}

std::size_t InjectionQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

// ---------------------------------------------------------------------------
// Run configuration

std::string format_rho(double rho) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, rho);
  return std::string(buf, ptr);
}

std::string RunConfig::run_id() const {
  std::ostringstream out;
  out << scenario << "-r" << format_rho(rho) << "-"
      << (revision_type ? std::string(to_string(*revision_type)) : std::string("none")) << "-"
      << policy << "-" << timing << "-n" << n_injections << "-m" << length_mult << "-s" << seed;
  return out.str();
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::BudgetExhausted: return "budget_exhausted";
    case Termination::BackendError: return "backend_error";
    case Termination::Cancelled: return "cancelled";
  }
  return "?";
}

Termination parse_termination(std::string_view s) {
  if (s == "completed") return Termination::Completed;
  if (s == "budget_exhausted") return Termination::BudgetExhausted;
  if (s == "backend_error") return Termination::BackendError;
  if (s == "cancelled") return Termination::Cancelled;
  throw ValidationError("unknown termination '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Session

namespace {

class Session {
 public:
  Session(const RunConfig& cfg, Backend& backend, const SessionHooks& hooks)
      : cfg_(cfg), backend_(backend), hooks_(hooks) {
    sc_ = build_scenario(cfg.scenario, cfg.rho, cfg.length_mult);
    policy_ = parse_policy(cfg.policy);
    if (cfg.revision_type && cfg.n_injections > 0) {
      schedule_ = make_schedule(sc_, *cfg.revision_type, TimingSpec::parse(cfg.timing),
                                cfg.n_injections);
    } else {
      TimingSpec::parse(cfg.timing);
    }
    queue_ = hooks.queue != nullptr ? hooks.queue : &own_queue_;

    rec_.config = cfg;
    rec_.run_id = cfg.run_id();
    rec_.realized_rho = sc_.realized_rho;
    rec_.plan_length = sc_.plan_length;
    rec_.budget = cfg.budget > 0 ? cfg.budget : 2 * sc_.plan_length;
    rec_.reference_spec = merged_spec(sc_.initial_spec, schedule_);

    ep_.spec = sc_.initial_spec;
    if (policy_.kind == Policy::Kind::Oracle) {
      // The oracle knows every scheduled revision from the start.
      ep_.spec = rec_.reference_spec;
      rec_.oracle_merged = true;
      schedule_.entries.clear();
    }
    rec_.trace.spec_history.push_back({0, ep_.spec});
  }

  RunRecord run() {
    try {
      loop();
    } catch (const BackendError& e) {
      rec_.termination = Termination::BackendError;
      rec_.error = e.what();
    }
    rec_.final_spec = ep_.spec;
    rec_.world = world_;
    rec_.counters.events = rec_.trace.size();
    rec_.counters.token_estimate =
        backend_.kind() == BackendConfig::Kind::Mock
            ? static_cast<std::uint64_t>(rec_.trace.size()) * cfg_.tokens_per_event
            : backend_.tokens_used();
    if (rec_.termination == Termination::Completed ||
        rec_.termination == Termination::BudgetExhausted) {
      try {
        JudgeInput in{&sc_, &rec_.reference_spec, &world_,
                      std::string(to_string(rec_.termination))};
        rec_.quality = backend_.judge_quality(in);
      } catch (const BackendError& e) {
        rec_.termination = Termination::BackendError;
        rec_.error = e.what();
      }
    }
    return std::move(rec_);
  }

 private:
  void loop() {
    boundary();
    while (true) {
      if (cancelled()) {
        rec_.termination = Termination::Cancelled;
        return;
      }
      PlanContext ctx{&sc_, &rec_.trace, &ep_, &world_, cfg_.seed};
      PlanStepResult step = backend_.plan_next(ctx);
      if (step.done) {
        rec_.termination = Termination::Completed;
        return;
      }
      if (rec_.counters.steps >= rec_.budget) {
        rec_.termination = Termination::BudgetExhausted;
        return;
      }
      emit(ThoughtPayload{step.thought});
      if (boundary()) continue;  // the chosen act predates the revision; plan again

      // The act and its observation form one tool execution.
      ActPayload act = std::move(step.act);
      act.phase = replanned_ ? Phase::Replanned : Phase::Plan;
      const ToolSpec& tool = sc_.registry.get(act.tool);
      act.cls = tool.cls;
      const Seq act_seq = emit(act);
      ++rec_.counters.steps;
      world_ = apply_effect(world_, act_seq, act, tool);
      emit(ObsPayload{step.obs.empty() ? act.tool + " executed." : step.obs});
      pause();
      boundary();
    }
  }

  bool cancelled() const { return hooks_.cancel != nullptr && hooks_.cancel->load(); }

  // Pacing for live sessions, cut short by cancellation.
  void pause() {
    const auto until =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg_.step_delay_ms);
    while (!cancelled() && std::chrono::steady_clock::now() < until) {
      std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
          std::chrono::milliseconds(10), until - std::chrono::steady_clock::now()));
    }
  }

  Seq emit(Payload p) {
    const Seq seq = rec_.trace.next_seq();
    append_event_in_place(rec_.trace, make_event(seq, std::move(p)));
    ep_.context.push_back(seq);
    if (hooks_.on_event) hooks_.on_event(rec_.trace.events.back());
    return seq;
  }

  std::size_t live_count() const { return live_acts(rec_.trace, ep_.context).size(); }

  // Releases due schedule entries into the queue, then absorbs at most one
  // pending revision. Returns true when a revision was absorbed.
  bool boundary() {
    const std::size_t live = live_count();
    while (next_entry_ < schedule_.entries.size() &&
           schedule_.entries[next_entry_].after_live_acts <= live) {
      const auto& e = schedule_.entries[next_entry_++];
      queue_->push(e.revision, e.trigger);
    }
    auto item = queue_->try_pop();
    if (!item) return false;
    absorb(item->first, item->second);
    return true;
  }

  void absorb(const Revision& rev, const std::string& trigger) {
    const auto acts = live_acts(rec_.trace, ep_.context);
    CompatFn compat = [&](const ActPayload& a, const Specification& s) {
      return backend_.is_compatible(a, s, sc_.registry);
    };
    DecisionTriple d = decide(policy_, acts, ep_.spec, rev, compat);
    AdaptCostReport cost = adapt_cost(d, acts);

    if (trigger == "external") {
      rec_.reference_spec = apply_revision(rec_.reference_spec, rev);
    }

    InjectionRecord ir;
    ir.trigger = trigger;
    ir.revision = rev;
    ir.inj_seq = emit(InjPayload{rev, InjDecision{policy_.name(), d.k_star, acts.size(),
                                                  d.spec_updated}});

    // Undo the discarded suffix, most recent act first.
    for (auto it = d.program.steps.rbegin(); it != d.program.steps.rend(); ++it) {
      // Copied: emitting below may reallocate the event storage.
      const ActPayload orig = *rec_.trace.at(it->act_seq).act();
      const std::string target =
          world_.effect_of(it->act_seq) ? world_.effect_of(it->act_seq)->entry_id : orig.tool;
      switch (it->action) {
        case CompAction::Invert: {
          const ToolSpec& inv = sc_.registry.get(sc_.registry.get(orig.tool).inverse_of.value());
          ActPayload a{inv.name, {{"target", target}}, inv.cls, Phase::Compensation, ""};
          a.action = CompAction::Invert;
          a.target_seq = it->act_seq;
          const Seq s = emit(a);
          ++rec_.counters.steps;
          world_ = invert(world_, it->act_seq, s);
          ir.compensation_seqs.push_back(s);
          break;
        }
        case CompAction::Compensate: {
          const ToolSpec& comp =
              sc_.registry.get(sc_.registry.get(orig.tool).compensator.value());
          ActPayload a{comp.name, {{"compensates", target}}, comp.cls, Phase::Compensation, ""};
          if (auto r = orig.args.find("recipients"); r != orig.args.end()) {
            a.args["recipients"] = r->second;
          }
          a.action = CompAction::Compensate;
          a.target_seq = it->act_seq;
          const Seq s = emit(a);
          ++rec_.counters.steps;
          world_ = compensate(world_, it->act_seq, sc_.registry, s);
          ir.compensation_seqs.push_back(s);
          break;
        }
        case CompAction::Fallback: {
          const Seq s = emit(ObsPayload{"Irreversible effect " + target +
                                        " cannot be undone; recorded as unsatisfiable under: " +
                                        rev.text});
          world_ = x_fallback(world_, it->act_seq, rev, s);
          ir.compensation_seqs.push_back(s);
          break;
        }
      }
    }

    // Truncate the planner's view to the retained prefix, keeping the
    // injection and the compensation record so it can re-plan.
    Seq keep = 0;
    if (d.k_star > 0) {
      const Seq act_seq = acts[d.k_star - 1].seq;
      keep = act_seq;
      auto pos = std::find(ep_.context.begin(), ep_.context.end(), act_seq);
      if (pos + 1 != ep_.context.end() && rec_.trace.at(*(pos + 1)).kind() == EventKind::Obs) {
        keep = *(pos + 1);
      }
    }
    EpistemicState next = ep_.truncated(keep);
    next.context.push_back(ir.inj_seq);
    for (Seq s : ir.compensation_seqs) next.context.push_back(s);
    if (d.spec_updated) {
      next.spec = d.spec;
      rec_.trace.spec_history.push_back({ir.inj_seq, d.spec});
      replanned_ = true;
    }
    ep_ = std::move(next);

    rec_.counters.wasted_acts += cost.waste_cost;
    rec_.counters.comp_calls += cost.comp_cost;
    ir.decision = std::move(d);
    ir.cost = cost;
    rec_.injections.push_back(std::move(ir));
  }

  const RunConfig& cfg_;
  Backend& backend_;
  SessionHooks hooks_;
  Scenario sc_;
  Policy policy_;
  InjectionSchedule schedule_;
  std::size_t next_entry_ = 0;
  InjectionQueue own_queue_;
  InjectionQueue* queue_ = nullptr;
  EpistemicState ep_;
  WorldState world_;
  bool replanned_ = false;
  RunRecord rec_;
};

}  // namespace

RunRecord run_session(const RunConfig& cfg, Backend& backend, const SessionHooks& hooks) {
  Session s(cfg, backend, hooks);
  return s.run();
}

RunRecord run_session(const RunConfig& cfg) {
  BackendConfig bc = cfg.backend == "chat" ? BackendConfig::chat_from_env() : BackendConfig{};
  bc.kind = parse_backend_kind(cfg.backend);
  auto backend = make_backend(bc);
  return run_session(cfg, *backend);
}

Counters recompute_counters(const RunRecord& rec) {
  Counters c;
  c.events = rec.trace.size();
  c.token_estimate = rec.counters.token_estimate;
  std::size_t live = 0;
  for (const auto& e : rec.trace.events) {
    if (const ActPayload* a = e.act()) {
      ++c.steps;
      if (a->phase == Phase::Compensation) {
        if (a->action != CompAction::Fallback) ++c.comp_calls;
      } else {
        ++live;
      }
    } else if (const InjPayload* inj = e.inj()) {
      const auto& d = inj->decision;
      if (d.n_live != live) {
        throw IntegrityError("injection at seq " + std::to_string(e.seq) + " records " +
                             std::to_string(d.n_live) + " live acts, replay finds " +
                             std::to_string(live));
      }
      if (d.k_star > live) {
        throw IntegrityError("rollback point beyond live acts at seq " + std::to_string(e.seq));
      }
      c.wasted_acts += live - d.k_star;
      live = d.k_star;
    }
  }
  return c;
}

void check_integrity(const RunRecord& rec) {
  for (std::size_t i = 0; i < rec.trace.events.size(); ++i) {
    if (rec.trace.events[i].seq != i + 1) throw IntegrityError("trace seq gap at index " +
                                                               std::to_string(i));
  }
  Counters c = recompute_counters(rec);
  if (c != rec.counters) {
    std::ostringstream msg;
    msg << "counter mismatch for " << rec.run_id << ": stored wasted/comp/steps/events "
        << rec.counters.wasted_acts << "/" << rec.counters.comp_calls << "/" << rec.counters.steps
        << "/" << rec.counters.events << ", replay " << c.wasted_acts << "/" << c.comp_calls << "/"
        << c.steps << "/" << c.events;
    throw IntegrityError(msg.str());
  }
  if (fold_log(rec.world.log()) != rec.world.view()) {
    throw IntegrityError("world view is not the fold of its log");
  }
}

}  // namespace streamrev
