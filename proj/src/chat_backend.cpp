#include "streamrev/chat_backend.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <regex>
#include <sstream>

#include "assets.hpp"
#include "httplib.h"
#include "json.hpp"

namespace streamrev {

using nlohmann::json;

namespace {

// Process-wide cap on outstanding requests.
class RequestLimiter {
 public:
  static RequestLimiter& instance() {
    static RequestLimiter l;
    return l;
  }
  void set_capacity(unsigned c) {
    std::lock_guard lock(mu_);
    capacity_ = std::max(capacity_, c);
  }
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < capacity_; });
    ++in_flight_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  unsigned capacity_ = 1;
  unsigned in_flight_ = 0;
};

std::string fill(std::string text, const std::map<std::string, std::string>& vars) {
  for (const auto& [k, v] : vars) {
    const std::string key = "{{" + k + "}}";
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + v.size())) {
      text.replace(pos, key.size(), v);
    }
  }
  return text;
}

std::string render_clauses(const Specification& spec) {
  std::ostringstream out;
  for (const auto* c : spec.active_clauses()) {
    out << "- " << c->key << " = " << c->value;
    if (!c->text.empty()) out << " (" << c->text << ")";
    out << "\n";
  }
  std::string s = out.str();
  return s.empty() ? "(none)" : s;
}

std::string render_revoked(const Specification& spec) {
  std::ostringstream out;
  for (const auto& c : spec.clauses) {
    if (c.status == ClauseStatus::Revoked) out << "- " << c.key << " (" << c.text << ")\n";
  }
  std::string s = out.str();
  return s.empty() ? "(none)" : s;
}

std::string args_json(const Args& args) { return json(args).dump(); }

json tool_schema(const ToolSpec& t) {
  json props = json::object();
  for (const auto& p : t.params_schema) props[p] = {{"type", "string"}};
  return {{"type", "function"},
          {"function",
           {{"name", t.name},
            {"description", t.description},
            {"parameters", {{"type", "object"}, {"properties", props}}}}}};
}

}  // namespace

std::pair<std::string, std::string> split_api_base(const std::string& base) {
  auto scheme = base.find("://");
  if (scheme == std::string::npos) throw ConfigError("CHAT_API_BASE must include a scheme: " + base);
  auto path = base.find('/', scheme + 3);
  if (path == std::string::npos) return {base, ""};
  std::string prefix = base.substr(path);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base.substr(0, path), prefix};
}

std::optional<bool> parse_compat_verdict(const std::string& text) {
  static const std::regex re(R"(\b(INCOMPATIBLE|COMPATIBLE)\b)", std::regex::icase);
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  std::string w = m[1].str();
  return w.size() == std::string("COMPATIBLE").size();
}

std::optional<double> parse_judge_score(const std::string& text) {
  static const std::regex re(R"(SCORE\s*:\s*([1-5](?:\.[0-9]+)?))", std::regex::icase);
  std::smatch m;
  std::optional<double> out;
  for (auto it = text.cbegin(); std::regex_search(it, text.cend(), m, re); it = m[0].second) {
    out = std::stod(m[1].str());
  }
  if (out && (*out < 1.0 || *out > 5.0)) return std::nullopt;
  return out;
}

struct ChatBackend::Impl {
  BackendConfig cfg;
  std::string origin;
  std::string prefix;
  std::atomic<std::uint64_t> tokens{0};

  // One chat-completions round trip. Transport errors and non-200 replies
  // throw BackendError; callers decide whether to retry.
  json complete(const std::string& model, double temperature, const json& messages,
                const json& tools = nullptr) {
    json body = {{"model", model}, {"messages", messages}, {"temperature", temperature}};
    if (!tools.is_null() && !tools.empty()) {
      body["tools"] = tools;
      body["tool_choice"] = "auto";
    }
    httplib::Client cli(origin);
    cli.set_connection_timeout(cfg.timeout_seconds, 0);
    cli.set_read_timeout(cfg.timeout_seconds, 0);
    cli.set_bearer_token_auth(cfg.api_key);
    auto& limiter = RequestLimiter::instance();
    limiter.acquire();
    auto res = cli.Post(prefix + "/chat/completions", body.dump(), "application/json");
    limiter.release();
    if (!res) throw BackendError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw BackendError("chat endpoint returned HTTP " + std::to_string(res->status));
    }
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw BackendError(std::string("chat endpoint returned invalid JSON: ") + e.what());
    }
    if (reply.contains("usage") && reply["usage"].contains("total_tokens")) {
      tokens += reply["usage"]["total_tokens"].get<std::uint64_t>();
    }
    if (!reply.contains("choices") || reply["choices"].empty()) {
      throw BackendError("chat reply without choices");
    }
    return reply["choices"][0]["message"];
  }

  // Retries fn on malformed output or transport failure.
  template <typename T, typename Fn>
  T with_retries(const std::string& role, Fn fn) {
    std::string last;
    for (unsigned attempt = 0; attempt < cfg.max_retries; ++attempt) {
      try {
        if (auto v = fn()) return *v;
        last = "unparseable reply";
      } catch (const BackendError& e) {
        last = e.what();
      }
    }
    throw BackendError(role + " failed after " + std::to_string(cfg.max_retries) +
                       " attempts: " + last);
  }
};

ChatBackend::ChatBackend(BackendConfig cfg) : impl_(std::make_unique<Impl>()) {
  cfg.kind = BackendConfig::Kind::Chat;
  cfg.validate();
  impl_->cfg = std::move(cfg);
  std::tie(impl_->origin, impl_->prefix) = split_api_base(impl_->cfg.api_base);
  RequestLimiter::instance().set_capacity(impl_->cfg.max_concurrent);
}

ChatBackend::~ChatBackend() = default;

std::uint64_t ChatBackend::tokens_used() const { return impl_->tokens.load(); }

PlanStepResult ChatBackend::plan_next(const PlanContext& ctx) {
  const Scenario& sc = *ctx.scenario;
  const Specification& spec = ctx.epistemic->spec;
  const std::string system = fill(detail::load_asset("prompts/agent_system.txt"),
                                  {{"query", spec.initial_query},
                                   {"clauses", render_clauses(spec)},
                                   {"revoked", render_revoked(spec)}});
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", system}});
  messages.push_back({{"role", "user"}, {"content", spec.initial_query}});

  const auto& ctx_seqs = ctx.epistemic->context;
  for (std::size_t i = 0; i < ctx_seqs.size(); ++i) {
    const Event& e = ctx.trace->at(ctx_seqs[i]);
    switch (e.kind()) {
      case EventKind::Thought:
        messages.push_back(
            {{"role", "assistant"}, {"content", std::get<ThoughtPayload>(e.payload).text}});
        break;
      case EventKind::Act: {
        const ActPayload& a = *e.act();
        const std::string id = "call_" + std::to_string(e.seq);
        messages.push_back(
            {{"role", "assistant"},
             {"content", nullptr},
             {"tool_calls",
              json::array({{{"id", id},
                            {"type", "function"},
                            {"function", {{"name", a.tool}, {"arguments", args_json(a.args)}}}}})}});
        std::string result = "ok";
        if (i + 1 < ctx_seqs.size()) {
          const Event& next = ctx.trace->at(ctx_seqs[i + 1]);
          if (next.kind() == EventKind::Obs) {
            result = std::get<ObsPayload>(next.payload).text;
            ++i;
          }
        }
        messages.push_back({{"role", "tool"}, {"tool_call_id", id}, {"content", result}});
        break;
      }
      case EventKind::Obs:
        messages.push_back(
            {{"role", "user"}, {"content", "Note: " + std::get<ObsPayload>(e.payload).text}});
        break;
      case EventKind::Inj:
        messages.push_back({{"role", "user"},
                            {"content", "Revision to the task: " + e.inj()->revision.text +
                                            "\nActions after the rollback point were undone; "
                                            "continue from here under the revised requirements."}});
        break;
    }
  }

  json tools = json::array();
  for (const auto& t : sc.toolset) tools.push_back(tool_schema(t));
  const std::size_t position = live_acts(*ctx.trace, ctx_seqs).size() + 1;

  return impl_->with_retries<PlanStepResult>("agent", [&]() -> std::optional<PlanStepResult> {
    json msg = impl_->complete(impl_->cfg.agent_model, impl_->cfg.agent_temperature, messages,
                               tools);
    PlanStepResult r;
    if (msg.contains("content") && msg["content"].is_string()) r.thought = msg["content"];
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
      const json& fn = msg["tool_calls"][0]["function"];
      const std::string name = fn.value("name", "");
      const ToolSpec* tool = nullptr;
      for (const auto& t : sc.toolset) {
        if (t.name == name) tool = &t;
      }
      if (tool == nullptr) return std::nullopt;
      json args;
      try {
        args = json::parse(fn.value("arguments", "{}"));
      } catch (const json::exception&) {
        return std::nullopt;
      }
      if (!args.is_object()) return std::nullopt;
      for (const auto& [k, v] : args.items()) {
        r.act.args[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      r.act.tool = name;
      r.act.cls = tool->cls;
      r.act.step_id = "chat-" + std::to_string(position);
      if (r.thought.empty()) r.thought = "Calling " + name + ".";
      return r;
    }
    if (r.thought.find("DONE") != std::string::npos) {
      r.done = true;
      return r;
    }
    return std::nullopt;
  });
}

bool ChatBackend::is_compatible(const ActPayload& act, const Specification& spec_new,
                                const ToolRegistry& registry) {
  if (!is_kx(act.cls)) {
    throw ClassError("compatibility is only defined for K/X acts, got '" + act.tool + "'");
  }
  (void)registry;
  const std::string revision = spec_new.absorbed.empty() ? "(none)" : spec_new.absorbed.back().text;
  const std::string prompt = fill(detail::load_asset("prompts/compat.txt"),
                                  {{"clauses", render_clauses(spec_new)},
                                   {"revoked", render_revoked(spec_new)},
                                   {"revision", revision},
                                   {"tool", act.tool},
                                   {"args", args_json(act.args)}});
  json messages = json::array({{{"role", "user"}, {"content", prompt}}});
  return impl_->with_retries<bool>("compatibility check", [&]() -> std::optional<bool> {
    json msg = impl_->complete(impl_->cfg.compat_model, impl_->cfg.compat_temperature, messages);
    if (!msg.contains("content") || !msg["content"].is_string()) return std::nullopt;
    return parse_compat_verdict(msg["content"].get<std::string>());
  });
}

double ChatBackend::judge_quality(const JudgeInput& in) {
  std::ostringstream entries;
  for (const auto& [id, e] : in.world->entries()) {
    entries << "- " << id << " [" << to_string(e.status) << (e.is_public ? ", public" : ", private")
            << "] " << e.tool << " " << args_json(e.content) << "\n";
  }
  std::ostringstream unsat;
  for (const auto& u : in.world->unsatisfiable()) {
    unsat << "- act " << u.action_seq << ": " << u.revision_ref << " (" << u.note << ")\n";
  }
  const std::string prompt =
      fill(detail::load_asset("prompts/judge.txt"),
           {{"clauses", render_clauses(*in.spec)},
            {"revoked", render_revoked(*in.spec)},
            {"outcome", in.declared_outcome},
            {"entries", entries.str().empty() ? "(none)" : entries.str()},
            {"unsatisfiable", unsat.str().empty() ? "(none)" : unsat.str()}});
  json messages = json::array({{{"role", "user"}, {"content", prompt}}});
  double total = 0.0;
  for (unsigned run = 0; run < impl_->cfg.judge_runs; ++run) {
    total += impl_->with_retries<double>("judge", [&]() -> std::optional<double> {
      json msg = impl_->complete(impl_->cfg.judge_model, impl_->cfg.judge_temperature, messages);
      if (!msg.contains("content") || !msg["content"].is_string()) return std::nullopt;
      return parse_judge_score(msg["content"].get<std::string>());
    });
  }
  return total / impl_->cfg.judge_runs;
}

}  // namespace streamrev
