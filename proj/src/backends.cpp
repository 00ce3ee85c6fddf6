#include "streamrev/backends.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "streamrev/chat_backend.hpp"

namespace streamrev {

namespace {

std::string env_or(const char* name, const std::string& fallback = "") {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

constexpr const char* kThoughtTemplates[] = {
    "Next I will call {tool} for {step}.",
    "Continuing with {step}: {tool} is the right tool here.",
    "The plan calls for {step} now, using {tool}.",
};

std::string render_thought(std::uint64_t seed, std::size_t position, const PlannedStep& step) {
  std::string t = kThoughtTemplates[(seed + position) % std::size(kThoughtTemplates)];
  auto replace = [&](const std::string& key, const std::string& value) {
    auto pos = t.find(key);
    if (pos != std::string::npos) t.replace(pos, key.size(), value);
  };
  replace("{tool}", step.tool);
  replace("{step}", step.step_id);
  return t;
}

}  // namespace

std::string_view to_string(BackendConfig::Kind k) {
  return k == BackendConfig::Kind::Mock ? "mock" : "chat";
}

BackendConfig::Kind parse_backend_kind(std::string_view s) {
  if (s == "mock") return BackendConfig::Kind::Mock;
  if (s == "chat") return BackendConfig::Kind::Chat;
  throw ConfigError("unknown backend '" + std::string(s) + "' (expected mock or chat)");
}

BackendConfig BackendConfig::chat_from_env() {
  BackendConfig c;
  c.kind = Kind::Chat;
  c.api_base = env_or("CHAT_API_BASE");
  c.api_key = env_or("CHAT_API_KEY");
  c.agent_model = env_or("AGENT_MODEL");
  c.judge_model = env_or("JUDGE_MODEL", c.agent_model);
  c.compat_model = env_or("COMPAT_MODEL", c.agent_model);
  return c;
}

void BackendConfig::validate() const {
  if (kind == Kind::Mock) return;
  if (api_base.empty()) throw ConfigError("chat backend needs CHAT_API_BASE");
  if (api_key.empty()) throw ConfigError("chat backend needs CHAT_API_KEY");
  if (agent_model.empty()) throw ConfigError("chat backend needs AGENT_MODEL");
  if (judge_runs == 0) throw ConfigError("judge_runs must be >= 1");
  if (max_retries == 0) throw ConfigError("max_retries must be >= 1");
  if (max_concurrent == 0) throw ConfigError("max_concurrent must be >= 1");
}

bool tag_conflicts(const std::string& tag, const Specification& spec) {
  auto eq = tag.find('=');
  if (eq == std::string::npos) return false;
  const std::string key = tag.substr(0, eq);
  const std::string value = tag.substr(eq + 1);
  if (auto current = spec.value_of(key)) return value != *current;
  auto revoked = spec.revoked_keys();
  if (std::find(revoked.begin(), revoked.end(), key) != revoked.end()) return value != "none";
  return false;
}

RubricReport rubric(const Specification& spec, const WorldState& world) {
  RubricReport r;
  std::set<std::string> contradicted;
  for (const auto& [id, e] : world.entries()) {
    if (!e.is_public || e.status != EntryStatus::Live) continue;
    bool stale = false;
    for (const auto& tag : e.effect_tags) {
      if (tag_conflicts(tag, spec)) {
        stale = true;
        contradicted.insert(tag.substr(0, tag.find('=')));
      }
    }
    r.stale_entries += stale;
  }
  r.contradicted_clauses = contradicted.size();
  r.unsatisfiable = world.unsatisfiable().size();
  const double raw = 5.0 - 2.0 * static_cast<double>(r.contradicted_clauses) -
                     static_cast<double>(r.stale_entries) - static_cast<double>(r.unsatisfiable);
  r.score = std::max(1.0, raw);
  return r;
}

PlanStepResult MockBackend::plan_next(const PlanContext& ctx) {
  const Scenario& sc = *ctx.scenario;
  std::set<std::string> done;
  const auto live = live_acts(*ctx.trace, ctx.epistemic->context);
  for (const auto& a : live) done.insert(a.act->step_id);

  PlanStepResult out;
  for (const auto& step : sc.plan_for(ctx.epistemic->spec)) {
    if (done.contains(step.step_id)) continue;
    ActPayload act{step.tool, step.args, step.cls, Phase::Plan, step.step_id};
    // A committed irreversible effect cannot be produced a second time.
    if (step.cls == ReversibilityClass::X &&
        !ctx.world->live_by_subject(act_subject(act)).empty()) {
      continue;
    }
    out.thought = render_thought(ctx.seed, live.size() + 1, step);
    out.act = std::move(act);
    out.obs = step.obs;
    return out;
  }
  out.done = true;
  out.thought = "All planned steps are complete.";
  return out;
}

bool MockBackend::is_compatible(const ActPayload& act, const Specification& spec_new,
                                const ToolRegistry& registry) {
  if (!is_kx(act.cls)) {
    throw ClassError("compatibility is only defined for K/X acts, got " +
                     std::string(to_string(act.cls)) + " act '" + act.tool + "'");
  }
  if (spec_new.absorbed.empty()) return true;
  const auto& conflicts = spec_new.absorbed.back().conflict_tags;
  for (const auto& tag : act_effect_tags(act, registry.get(act.tool))) {
    if (std::find(conflicts.begin(), conflicts.end(), tag) != conflicts.end()) return false;
  }
  return true;
}

double MockBackend::judge_quality(const JudgeInput& in) {
  return rubric(*in.spec, *in.world).score;
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendConfig::Kind::Mock) return std::make_unique<MockBackend>();
  return std::make_unique<ChatBackend>(cfg);
}

}  // namespace streamrev
