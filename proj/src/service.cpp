#include "streamrev/service.hpp"

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "streamrev/serialize.hpp"

namespace streamrev {

using nlohmann::json;

json FrameBuilder::operator()(const Event& e) {
  json f = {{"seq", e.seq}, {"kind", to_string(e.kind())}};
  f["class"] = nullptr;
  std::string summary;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ActPayload>) {
          phase_ = p.phase;
          f["class"] = to_string(p.cls);
          summary = p.tool + "(";
          bool first = true;
          for (const auto& [k, v] : p.args) {
            summary += (first ? "" : ", ") + k + "=" + v;
            first = false;
          }
          summary += ")";
          if (p.action) summary += " [" + std::string(to_string(*p.action)) + "]";
        } else if constexpr (std::is_same_v<T, InjPayload>) {
          if (p.decision.spec_updated) {
            ++spec_version_;
            replanned_ = true;
          }
          summary = std::string(to_string(p.revision.rtype)) + ": " + p.revision.text;
        } else if constexpr (std::is_same_v<T, ThoughtPayload>) {
          // A thought opens the next step, which runs under the current spec.
          phase_ = replanned_ ? Phase::Replanned : Phase::Plan;
          summary = p.text;
        } else {
          summary = p.text;
        }
      },
      e.payload);
  f["phase"] = e.kind() == EventKind::Inj ? json(nullptr) : json(to_string(phase_));
  f["summary"] = summary;
  f["spec_version"] = spec_version_;
  f["event"] = e;
  return f;
}

namespace {

enum class Status { Running, Completed, Failed };

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Completed: return "completed";
    case Status::Failed: return "failed";
  }
  return "failed";
}

struct LiveSession {
  std::string id;
  RunConfig cfg;
  Scenario scenario;
  InjectionQueue queue;
  std::atomic<bool> cancel{false};

  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::string> frames;  // index = seq - 1, encoded
  Status status = Status::Running;
  std::optional<RunRecord> record;
  std::string error;
  std::thread worker;
};

struct HttpError {
  int status;
  json body;
};

HttpError rejection(int status, const std::string& msg, const std::string& field = {}) {
  json b = {{"error", msg}};
  if (!field.empty()) b["field"] = field;
  return {status, b};
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct Service::Impl {
  ServiceOptions opts;
  httplib::Server server;
  std::mutex mu;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::uint64_t next_id = 1;
  std::shared_ptr<std::atomic<bool>> stopping = std::make_shared<std::atomic<bool>>(false);

  explicit Impl(ServiceOptions o) : opts(std::move(o)) { routes(); }

  std::shared_ptr<LiveSession> find(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw rejection(404, "no session '" + id + "'");
    return it->second;
  }

  RunConfig parse_config(const json& body) {
    if (!body.is_object()) throw rejection(400, "session config must be a JSON object");
    RunConfig cfg;
    try {
      cfg = body.get<RunConfig>();
    } catch (const json::exception& e) {
      throw rejection(400, std::string("malformed session config: ") + e.what());
    } catch (const Error& e) {
      throw rejection(400, e.what(), "revision_type");
    }
    // Live sessions take their revisions from clients unless a schedule is asked for.
    if (!body.contains("revision_type")) cfg.revision_type.reset();
    if (!body.contains("step_delay_ms") && cfg.backend == "mock") {
      cfg.step_delay_ms = opts.default_step_delay_ms;
    }

    const auto names = scenario_names();
    if (std::find(names.begin(), names.end(), cfg.scenario) == names.end()) {
      throw rejection(400, "unknown scenario '" + cfg.scenario + "'", "scenario");
    }
    auto check = [](const char* field, auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        throw rejection(400, e.what(), field);
      }
    };
    check("policy", [&] { parse_policy(cfg.policy); });
    check("timing", [&] { TimingSpec::parse(cfg.timing); });
    check("backend", [&] { parse_backend_kind(cfg.backend); });
    check("length_mult", [&] {
      if (cfg.length_mult == 0) throw ConfigError("length_mult must be at least 1");
    });
    check("rho", [&] { build_scenario(cfg.scenario, cfg.rho, cfg.length_mult); });
    return cfg;
  }

  BackendConfig backend_config(const RunConfig& cfg) {
    BackendConfig bc;
    try {
      if (cfg.backend == "chat") bc = BackendConfig::chat_from_env();
      bc.kind = parse_backend_kind(cfg.backend);
      bc.validate();
    } catch (const Error& e) {
      throw rejection(400, e.what(), "backend");
    }
    return bc;
  }

  json state(LiveSession& s, bool full) {
    std::lock_guard lock(s.mu);
    json j = {{"session_id", s.id},
              {"status", to_string(s.status)},
              {"config", s.cfg},
              {"run_id", s.cfg.run_id()},
              {"events", s.frames.size()},
              {"pending_injections", s.queue.size()}};
    if (!s.error.empty()) j["error"] = s.error;
    if (s.record) {
      j["summary"] = summary_row(*s.record);
      if (full) j["record"] = *s.record;
    }
    return j;
  }

  json create(const json& body) {
    RunConfig cfg = parse_config(body);
    BackendConfig bc = backend_config(cfg);
    auto s = std::make_shared<LiveSession>();
    s->cfg = cfg;
    s->scenario = build_scenario(cfg.scenario, cfg.rho, cfg.length_mult);
    {
      std::lock_guard lock(mu);
      s->id = "s" + std::to_string(next_id++);
      sessions[s->id] = s;
    }
    s->worker = std::thread([this, s, bc] { run(*s, bc); });
    return state(*s, false);
  }

  void run(LiveSession& s, const BackendConfig& bc) {
    FrameBuilder frames;
    SessionHooks hooks;
    hooks.queue = &s.queue;
    hooks.cancel = &s.cancel;
    hooks.on_event = [&](const Event& e) {
      std::string f = frames(e).dump();
      {
        std::lock_guard lock(s.mu);
        s.frames.push_back(std::move(f));
      }
      s.cv.notify_all();
    };
    std::optional<RunRecord> rec;
    std::string error;
    try {
      auto backend = make_backend(bc);
      rec = run_session(s.cfg, *backend, hooks);
      check_integrity(*rec);
    } catch (const std::exception& e) {
      error = e.what();
    }
    if (rec && !opts.records_dir.empty()) {
      try {
        std::filesystem::create_directories(opts.records_dir);
        std::ofstream(std::filesystem::path(opts.records_dir) / (s.id + ".json")) << json(*rec).dump();
      } catch (const std::exception& e) {
        error = std::string("cannot write record: ") + e.what();
      }
    }
    {
      std::lock_guard lock(s.mu);
      if (rec) {
        const bool ok = rec->termination == Termination::Completed ||
                        rec->termination == Termination::BudgetExhausted;
        s.status = ok && error.empty() ? Status::Completed : Status::Failed;
        if (error.empty()) error = rec->error;
        if (rec->termination == Termination::Cancelled && error.empty()) error = "cancelled";
        s.record = std::move(rec);
      } else {
        s.status = Status::Failed;
      }
      s.error = error;
    }
    s.cv.notify_all();
  }

  json inject(LiveSession& s, const json& body) {
    if (parse_policy(s.cfg.policy).kind == Policy::Kind::Oracle) {
      throw rejection(409, "oracle sessions know every revision from the start");
    }
    Revision rev;
    try {
      if (body.is_object() && body.size() == 1 && body.contains("rtype")) {
        rev = build_revision(s.scenario, parse_revision_type(body["rtype"].get<std::string>()));
      } else {
        rev = revision_from_json(body);
      }
    } catch (const json::exception& e) {
      throw rejection(400, std::string("malformed revision: ") + e.what(), "rtype");
    } catch (const Error& e) {
      throw rejection(400, e.what());
    }
    std::lock_guard lock(s.mu);
    if (s.status != Status::Running) {
      throw rejection(409, "session " + s.id + " is " + std::string(to_string(s.status)));
    }
    const std::size_t pos = s.queue.push(rev);
    return {{"accepted", true}, {"queue_position", pos}, {"revision", rev}};
  }

  void stream(const std::shared_ptr<LiveSession>& s, std::size_t from_seq, httplib::Response& res) {
    auto next = std::make_shared<std::size_t>(from_seq == 0 ? 0 : from_seq - 1);
    auto stop = stopping;
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [s, next, stop](std::size_t, httplib::DataSink& sink) {
          std::string out;
          bool finished = false;
          {
            std::unique_lock lock(s->mu);
            s->cv.wait_for(lock, std::chrono::milliseconds(100), [&] {
              return *next < s->frames.size() || s->status != Status::Running;
            });
            for (; *next < s->frames.size(); ++*next) {
              out += "id: " + std::to_string(*next + 1) + "\nevent: frame\ndata: " +
                     s->frames[*next] + "\n\n";
            }
            if (s->status != Status::Running) {
              json end = {{"status", to_string(s->status)}, {"events", s->frames.size()}};
              if (s->record) end["termination"] = streamrev::to_string(s->record->termination);
              out += "event: end\ndata: " + end.dump() + "\n\n";
              finished = true;
            }
          }
          if (!out.empty() && !sink.write(out.data(), out.size())) return false;
          if (finished || stop->load()) {
            sink.done();
            return true;
          }
          return sink.is_writable();
        });
  }

  template <class F>
  static void guarded(httplib::Response& res, F&& fn) {
    try {
      fn();
    } catch (const HttpError& e) {
      reply(res, e.status, e.body);
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  }

  static json body_json(const httplib::Request& req) {
    try {
      return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
      throw rejection(400, std::string("malformed JSON: ") + e.what());
    }
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 201, create(body_json(req))); });
    });
    server.Post("/sessions/:id/inject", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.path_params.at("id"));
        reply(res, 202, inject(*s, body_json(req)));
      });
    });
    server.Get("/sessions/:id/events", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.path_params.at("id"));
        std::size_t from = 1;
        if (req.has_param("from_seq")) {
          try {
            from = std::stoull(req.get_param_value("from_seq"));
          } catch (const std::exception&) {
            throw rejection(400, "from_seq must be a positive integer", "from_seq");
          }
        }
        stream(s, from, res);
      });
    });
    server.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.path_params.at("id"));
        reply(res, 200, state(*s, req.has_param("full")));
      });
    });
  }

  void shutdown() {
    stopping->store(true);
    server.stop();
    std::vector<std::shared_ptr<LiveSession>> all;
    {
      std::lock_guard lock(mu);
      for (auto& [id, s] : sessions) all.push_back(s);
    }
    for (auto& s : all) s->cancel = true;
    for (auto& s : all) {
      if (s->worker.joinable()) s->worker.join();
    }
  }
};

Service::Service(ServiceOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}

Service::~Service() { impl_->shutdown(); }

int Service::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->shutdown(); }

}  // namespace streamrev
