// streamrev: run sessions, execute grids, aggregate records, serve live sessions.
//
// Exit codes: 0 success, 1 usage, 2 backend failure, 3 integrity failure.

#include <pthread.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "streamrev/grid.hpp"
#include "streamrev/serialize.hpp"
#include "streamrev/service.hpp"
#include "streamrev/stats.hpp"

namespace sr = streamrev;
using nlohmann::json;

namespace {

constexpr int kUsage = 1;
constexpr int kBackend = 2;
constexpr int kIntegrity = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::trunc);
  f << text;
  if (!f) throw UsageError("cannot write " + p.string());
}

// A file holds either one JSON document (record or array of rows) or JSONL.
std::vector<json> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<json> rows;
  json whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array()) return whole.get<std::vector<json>>();
    rows.push_back(std::move(whole));
    return rows;
  }
  std::istringstream lines(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(lines, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw sr::ValidationError(path + ":" + std::to_string(lineno) + ": not valid JSON");
    }
    rows.push_back(std::move(j));
  }
  return rows;
}

struct RunFlags {
  std::string scenario = "event_planning";
  double rho = 0.25;
  std::string policy = "absorber";
  std::string revision = "substitutive";
  std::string timing = "mid";
  unsigned injections = 1;
  unsigned length_mult = 1;
  std::uint64_t seed = 0;
  std::string backend = "mock";
  std::string out;
};

int cmd_run(const RunFlags& f) {
  sr::RunConfig cfg;
  cfg.scenario = f.scenario;
  cfg.rho = f.rho;
  cfg.policy = f.policy;
  if (f.revision == "none") {
    cfg.revision_type.reset();
  } else {
    cfg.revision_type = sr::parse_revision_type(f.revision);
  }
  cfg.timing = f.timing;
  cfg.n_injections = f.injections;
  cfg.length_mult = f.length_mult;
  cfg.seed = f.seed;
  cfg.backend = f.backend;

  sr::BackendConfig bc = f.backend == "chat" ? sr::BackendConfig::chat_from_env() : sr::BackendConfig{};
  bc.kind = sr::parse_backend_kind(f.backend);
  bc.validate();
  auto backend = sr::make_backend(bc);
  sr::RunRecord rec = sr::run_session(cfg, *backend);
  sr::check_integrity(rec);

  const std::string out = f.out.empty() ? rec.run_id + ".json" : f.out;
  write_file(out, json(rec).dump(2) + "\n");
  std::cout << sr::summary_row(rec).dump() << "\n";
  if (rec.termination == sr::Termination::BackendError) {
    std::cerr << "backend failure: " << rec.error << "\n";
    return kBackend;
  }
  return 0;
}

struct GridFlags {
  std::string preset;
  std::string scenarios, rhos, revisions, policies, timings, injections, length_mults, seeds;
  std::string backend;
  std::string out;
  std::string group = "policy,rho";
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  bool full_records = false;
  unsigned resamples = 2000;
  double level = 0.95;
};

template <class T, class F>
void override_dim(std::vector<T>& dim, const std::string& flag, F&& conv) {
  if (flag.empty()) return;
  dim.clear();
  for (const auto& s : split_csv(flag)) dim.push_back(conv(s));
}

sr::GridConfig grid_from_flags(const GridFlags& f) {
  sr::GridConfig g;
  if (!f.preset.empty()) {
    g = sr::load_preset(f.preset);
  } else {
    g.name = "custom";
    g.scenarios = sr::scenario_names();
    g.rhos = {0.25};
    g.revision_types = {sr::RevisionType::Substitutive};
    g.policies = {"absorber"};
    g.timings = {"mid"};
    g.n_injections = {1};
    g.length_mults = {1};
    g.seeds = {0};
  }
  auto id = [](const std::string& s) { return s; };
  auto to_u = [](const std::string& s) { return static_cast<unsigned>(std::stoul(s)); };
  override_dim(g.scenarios, f.scenarios, id);
  override_dim(g.rhos, f.rhos, [](const std::string& s) { return std::stod(s); });
  override_dim(g.revision_types, f.revisions, [](const std::string& s) { return sr::parse_revision_type(s); });
  override_dim(g.policies, f.policies, id);
  override_dim(g.timings, f.timings, id);
  override_dim(g.n_injections, f.injections, to_u);
  override_dim(g.length_mults, f.length_mults, to_u);
  override_dim(g.seeds, f.seeds, [](const std::string& s) { return std::stoull(s); });
  if (!f.backend.empty()) g.backend = f.backend;
  for (const auto& p : g.policies) sr::parse_policy(p);
  for (const auto& t : g.timings) sr::TimingSpec::parse(t);
  return g;
}

int cmd_grid(const GridFlags& f) {
  sr::GridConfig g;
  try {
    g = grid_from_flags(f);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("bad numeric list: ") + e.what());
  }
  const std::size_t total = sr::grid_cardinality(g);
  std::cerr << "grid " << g.name << ": " << total << " runs\n";

  sr::GridRunOptions opts;
  opts.workers = f.workers;
  opts.out_path = f.out;
  opts.full_records = f.full_records;
  opts.progress = [total](std::size_t done, std::size_t) {
    const std::size_t step = std::max<std::size_t>(1, total / 10);
    if (done % step == 0 || done == total) std::cerr << "  " << done << "/" << total << "\n";
  };
  const auto rows = sr::run_grid(g, opts);

  const auto rep = sr::group_table(rows, split_csv(f.group),
                                   {.resamples = f.resamples, .level = f.level});
  std::filesystem::path summary(f.out);
  summary.replace_extension(".summary.csv");
  write_file(summary, sr::groups_csv(rep));
  std::cerr << "wrote " << f.out << " and " << summary.string() << "\n";

  std::size_t failed = 0;
  for (const auto& r : rows) {
    failed += r.value("termination", "") == "backend_error";
  }
  if (failed > 0) {
    std::cerr << failed << " runs ended with a backend failure\n";
    return kBackend;
  }
  return 0;
}

struct ReportFlags {
  std::vector<std::string> files;
  std::string group = "policy";
  unsigned resamples = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_report(const ReportFlags& f) {
  std::vector<json> rows;
  for (const auto& path : f.files) {
    auto part = read_rows(path);
    for (const auto& row : part) {
      if (row.contains("trace")) sr::extract_metrics(row.get<sr::RunRecord>());
    }
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const auto rep = sr::group_table(rows, split_csv(f.group),
                                   {.resamples = f.resamples, .level = f.level, .seed = f.seed});
  if (f.out.empty()) {
    std::cout << sr::groups_csv(rep);
    if (!rep.pairwise.empty()) std::cout << "\n" << sr::pairwise_csv(rep);
    return 0;
  }
  write_file(f.out, sr::groups_csv(rep));
  if (!rep.pairwise.empty()) {
    std::filesystem::path pw(f.out);
    pw.replace_extension(".pairwise.csv");
    write_file(pw, sr::pairwise_csv(rep));
  }
  return 0;
}

struct ServeFlags {
  std::string host = "127.0.0.1";
  int port = 8080;
  unsigned step_delay_ms = 250;
  std::string records_dir;
};

int cmd_serve(const ServeFlags& f) {
  // Signals are taken synchronously on a helper thread; every thread started
  // after this inherits the blocked mask.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  sr::Service svc({.default_step_delay_ms = f.step_delay_ms, .records_dir = f.records_dir});
  const int port = svc.bind(f.host, f.port);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    svc.stop();
  });
  std::cerr << "serving on http://" << f.host << ":" << port << "\n";
  svc.serve();
  pthread_kill(waiter.native_handle(), SIGTERM);  // no-op if it already fired
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming task revision: sessions, grids, reports and a live service"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "run one session and write its RunRecord");
  run->add_option("--scenario", rf.scenario)->capture_default_str();
  run->add_option("--rho", rf.rho)->capture_default_str();
  run->add_option("--policy", rf.policy)->capture_default_str();
  run->add_option("--revision", rf.revision, "revision type, or none")->capture_default_str();
  run->add_option("--timing", rf.timing)->capture_default_str();
  run->add_option("--injections", rf.injections)->capture_default_str();
  run->add_option("--length-mult", rf.length_mult)->check(CLI::PositiveNumber)->capture_default_str();
  run->add_option("--seed", rf.seed)->capture_default_str();
  run->add_option("--backend", rf.backend)->check(CLI::IsMember({"mock", "chat"}))->capture_default_str();
  run->add_option("--out", rf.out, "record path (default <run_id>.json)");

  GridFlags gf;
  auto* grid = app.add_subcommand("grid", "execute a grid; resumes from an existing --out");
  grid->add_option("--preset", gf.preset)->check(CLI::IsMember(sr::preset_names()));
  grid->add_option("--scenario", gf.scenarios, "comma-separated; overrides the preset");
  grid->add_option("--rho", gf.rhos);
  grid->add_option("--revision", gf.revisions);
  grid->add_option("--policy", gf.policies);
  grid->add_option("--timing", gf.timings);
  grid->add_option("--injections", gf.injections);
  grid->add_option("--length-mult", gf.length_mults);
  grid->add_option("--seed", gf.seeds);
  grid->add_option("--backend", gf.backend)->check(CLI::IsMember({"mock", "chat"}));
  grid->add_option("--out", gf.out, "JSONL output")->required();
  grid->add_option("--workers", gf.workers)->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--group", gf.group, "summary table grouping")->capture_default_str();
  grid->add_option("--resamples", gf.resamples)->check(CLI::PositiveNumber)->capture_default_str();
  grid->add_option("--level", gf.level)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  grid->add_flag("--full-records", gf.full_records, "write whole RunRecords instead of summary rows");

  ReportFlags pf;
  auto* report = app.add_subcommand("report", "aggregate record files into CSV tables");
  report->add_option("files", pf.files, "JSONL or JSON record files")->required()->check(CLI::ExistingFile);
  report->add_option("--group", pf.group)->capture_default_str();
  report->add_option("--resamples", pf.resamples)->check(CLI::PositiveNumber)->capture_default_str();
  report->add_option("--level", pf.level)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  report->add_option("--seed", pf.seed)->capture_default_str();
  report->add_option("--out", pf.out, "group table path; pairwise table goes beside it");

  ServeFlags sf;
  auto* serve = app.add_subcommand("serve", "start the live-session service");
  serve->add_option("--host", sf.host)->capture_default_str();
  serve->add_option("--port", sf.port)->capture_default_str();
  serve->add_option("--step-delay-ms", sf.step_delay_ms, "mock pacing per step")->capture_default_str();
  serve->add_option("--records-dir", sf.records_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*run) return cmd_run(rf);
    if (*grid) return cmd_grid(gf);
    if (*report) return cmd_report(pf);
    if (*serve) return cmd_serve(sf);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const sr::BackendError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return kBackend;
  } catch (const sr::IntegrityError& e) {
    std::cerr << "integrity failure: " << e.what() << "\n";
    return kIntegrity;
  } catch (const sr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
