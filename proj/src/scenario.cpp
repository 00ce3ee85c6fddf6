#include "streamrev/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "assets.hpp"
#include "json.hpp"

namespace streamrev {

using nlohmann::json;

namespace {

ToolSpec parse_tool(const json& j) {
  ToolSpec t;
  t.name = j.at("name").get<std::string>();
  t.cls = parse_class(j.at("class").get<std::string>());
  if (j.contains("inverse_of")) t.inverse_of = j["inverse_of"].get<std::string>();
  if (j.contains("compensator")) t.compensator = j["compensator"].get<std::string>();
  t.effect_tags = j.value("effect_tags", std::vector<std::string>{});
  t.params_schema = j.value("params", std::vector<std::string>{});
  t.public_effect = j.value("public", false);
  t.description = j.value("description", "");
  return t;
}

ScriptStep parse_step(const json& j) {
  ScriptStep s;
  s.id = j.at("id").get<std::string>();
  s.tool = j.at("tool").get<std::string>();
  s.args = j.value("args", Args{});
  if (j.contains("requires")) s.requires_key = j["requires"].get<std::string>();
  s.obs = j.value("obs", "ok");
  return s;
}

Revision parse_revision(RevisionType t, const json& j) {
  Revision r;
  r.rtype = t;
  r.text = j.at("text").get<std::string>();
  if (j.contains("target_clause")) r.target_clause = j["target_clause"].get<std::string>();
  r.conflict_tags = j.value("conflict_tags", std::vector<std::string>{});
  r.key = j.value("key", "");
  r.value = j.value("value", "");
  return r;
}

}  // namespace

ScenarioDef parse_scenario_def(const std::string& json_text) {
  ScenarioDef d;
  try {
    const json j = json::parse(json_text);
    d.name = j.at("name").get<std::string>();
    d.initial_query = j.at("initial_query").get<std::string>();
    for (const auto& c : j.at("clauses")) {
      d.clauses.push_back({c.at("id").get<std::string>(), c.at("key").get<std::string>(),
                           c.at("value").get<std::string>(), c.value("text", ""),
                           ClauseStatus::Active});
    }
    d.order_key = j.value("order_key", "order");
    for (const auto& t : j.at("tools")) {
      ToolSpec tool = parse_tool(t);
      if (t.contains("draft_equivalent")) {
        ToolSpec draft;
        draft.name = t["draft_equivalent"].get<std::string>();
        draft.cls = ReversibilityClass::R;
        draft.inverse_of = "revert_draft";
        draft.effect_tags = tool.effect_tags;
        draft.params_schema = tool.params_schema;
        draft.description = "Draft stand-in for " + tool.name + " (no external effect).";
        d.draft_equivalents[tool.name] = std::move(draft);
      } else if (is_kx(tool.cls)) {
        throw ConfigError("K/X tool '" + tool.name + "' has no draft_equivalent");
      }
      d.tools.push_back(std::move(tool));
    }
    for (const auto& t : j.value("aux_tools", json::array())) d.aux_tools.push_back(parse_tool(t));
    for (const auto& s : j.at("body")) d.body.push_back(parse_step(s));
    for (const auto& s : j.at("tail")) d.tail.push_back(parse_step(s));
    d.tail_orders = j.value("tail_orders", std::map<std::string, std::vector<std::string>>{});
    d.kx_disable_order = j.at("kx_disable_order").get<std::vector<std::string>>();
    for (const auto& [k, v] : j.at("revisions").items()) {
      RevisionType t = parse_revision_type(k);
      d.revisions[t] = parse_revision(t, v);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario fixture: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("malformed scenario fixture: ") + e.what());
  }

  std::size_t kx_tools = std::count_if(d.tools.begin(), d.tools.end(),
                                       [](const ToolSpec& t) { return is_kx(t.cls); });
  if (kx_tools != d.kx_disable_order.size()) {
    throw ConfigError("scenario '" + d.name + "': kx_disable_order must list every K/X tool");
  }
  return d;
}

std::vector<std::string> scenario_names() {
  return {"event_planning", "travel", "report_publish"};
}

const ScenarioDef& scenario_def(std::string_view name) {
  static std::mutex mu;
  static std::map<std::string, ScenarioDef, std::less<>> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  auto names = scenario_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
  }
  ScenarioDef def =
      parse_scenario_def(detail::load_asset("data/scenarios/" + std::string(name) + ".json"));
  return cache.emplace(std::string(name), std::move(def)).first->second;
}

std::string expand_template(const std::string& text, const Specification& spec) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find("${", pos);
    if (open == std::string::npos) {
      out.append(text, pos);
      break;
    }
    auto close = text.find('}', open);
    if (close == std::string::npos) throw ConfigError("unterminated placeholder in '" + text + "'");
    out.append(text, pos, open - pos);
    std::string body = text.substr(open + 2, close - open - 2);
    std::string key = body;
    std::optional<std::string> fallback;
    if (auto bar = body.find('|'); bar != std::string::npos) {
      key = body.substr(0, bar);
      fallback = body.substr(bar + 1);
    }
    if (auto v = spec.value_of(key)) {
      out += *v;
    } else if (fallback) {
      out += *fallback;
    }
    pos = close + 1;
  }
  return out;
}

std::vector<PlannedStep> Scenario::plan_for(const Specification& spec) const {
  std::vector<PlannedStep> out;
  auto expand_args = [&](const Args& args) {
    Args a;
    for (const auto& [k, v] : args) a[k] = expand_template(v, spec);
    return a;
  };

  // The I/R body is repeated cyclically so the whole plan scales with the
  // multiplier: |body'| = m * (|body| + |tail|) - |tail|.
  const std::size_t body_len =
      length_multiplier * (def->body.size() + def->tail.size()) - def->tail.size();
  for (std::size_t i = 0; i < body_len; ++i) {
    const ScriptStep& s = def->body[i % def->body.size()];
    const std::size_t r = i / def->body.size() + 1;
    PlannedStep p;
    p.step_id = r == 1 ? s.id : s.id + "#" + std::to_string(r);
    p.tool = s.tool;
    p.cls = registry.get(s.tool).cls;
    p.args = expand_args(s.args);
    if (r > 1) {
      if (auto it = p.args.find("item"); it != p.args.end()) it->second += "-" + std::to_string(r);
      if (auto it = p.args.find("query"); it != p.args.end()) {
        it->second += " (pass " + std::to_string(r) + ")";
      }
    }
    p.obs = expand_template(s.obs, spec);
    out.push_back(std::move(p));
  }

  std::vector<const ScriptStep*> tail;
  auto order_value = spec.value_of(def->order_key);
  auto order_it = order_value ? def->tail_orders.find(*order_value) : def->tail_orders.end();
  if (order_it == def->tail_orders.end()) {
    for (const auto& s : def->tail) tail.push_back(&s);
  } else {
    for (const auto& id : order_it->second) {
      auto it = std::find_if(def->tail.begin(), def->tail.end(),
                             [&](const ScriptStep& s) { return s.id == id; });
      if (it == def->tail.end()) throw ConfigError("tail order names unknown step '" + id + "'");
      tail.push_back(&*it);
    }
  }
  for (const ScriptStep* s : tail) {
    if (s->requires_key && !spec.value_of(*s->requires_key)) continue;
    PlannedStep p;
    p.step_id = s->id;
    p.tool = enabled_kx.contains(s->tool) ? s->tool : def->draft_equivalents.at(s->tool).name;
    p.cls = registry.get(p.tool).cls;
    p.args = expand_args(s->args);
    p.obs = expand_template(s->obs, spec);
    out.push_back(std::move(p));
  }
  return out;
}

Scenario build_scenario(std::string_view name, double target_rho, unsigned length_multiplier,
                        RhoMode mode) {
  const ScenarioDef& def = scenario_def(name);
  if (length_multiplier < 1) throw ConfigError("length multiplier must be >= 1");
  if (!(target_rho >= 0.0 && target_rho <= 1.0)) {
    throw ConfigError("rho target must lie in [0, 1]");
  }

  // Disabling e K/X tools (replacing each with an R stand-in) yields
  // rho = (|I/R| + e) / |A_T|. Pick the e closest to the target; ties go to
  // fewer disabled tools.
  const std::size_t total = def.tools.size();
  const std::size_t kx = def.kx_disable_order.size();
  const std::size_t base_ir = total - kx;
  std::size_t best_disabled = 0;
  double best_gap = 2.0;
  for (std::size_t e = 0; e <= kx; ++e) {
    double ratio = static_cast<double>(base_ir + e) / static_cast<double>(total);
    double gap = std::abs(ratio - target_rho);
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      best_disabled = e;
    }
  }
  const double realized = static_cast<double>(base_ir + best_disabled) / static_cast<double>(total);
  if (mode == RhoMode::Exact && best_gap > 1e-9) {
    std::ostringstream msg;
    msg << "rho target " << target_rho << " is unreachable for scenario '" << def.name
        << "'; nearest achievable is " << realized;
    throw ConfigError(msg.str());
  }

  Scenario s;
  s.name = def.name;
  s.def = &def;
  s.target_rho = target_rho;
  s.realized_rho = realized;
  s.length_multiplier = length_multiplier;
  for (std::size_t i = best_disabled; i < kx; ++i) s.enabled_kx.insert(def.kx_disable_order[i]);

  for (const auto& t : def.tools) {
    if (is_kx(t.cls) && !s.enabled_kx.contains(t.name)) {
      s.toolset.push_back(def.draft_equivalents.at(t.name));
    } else {
      s.toolset.push_back(t);
    }
  }
  for (const auto& t : s.toolset) s.registry.add(t);
  for (const auto& t : def.aux_tools) s.registry.add(t);
  s.registry.validate();

  s.initial_spec.initial_query = def.initial_query;
  s.initial_spec.clauses = def.clauses;
  s.plan_length = s.plan_for(s.initial_spec).size();
  s.first_kx_index =
      length_multiplier * (def.body.size() + def.tail.size()) - def.tail.size() + 1;
  s.last_kx_index = s.plan_length;
  return s;
}

Revision build_revision(const Scenario& scenario, RevisionType rtype) {
  auto it = scenario.def->revisions.find(rtype);
  if (it == scenario.def->revisions.end()) {
    throw ConfigError("scenario '" + scenario.name + "' has no " + std::string(to_string(rtype)) +
                      " revision");
  }
  return it->second;
}

}  // namespace streamrev
