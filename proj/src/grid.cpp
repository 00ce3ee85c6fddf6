#include "streamrev/grid.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "assets.hpp"
#include "streamrev/serialize.hpp"

namespace streamrev {

using nlohmann::json;

GridConfig parse_grid_config(const json& j) {
  GridConfig g;
  try {
    g.name = j.value("name", "custom");
    g.scenarios = j.at("scenarios").get<std::vector<std::string>>();
    g.rhos = j.at("rhos").get<std::vector<double>>();
    for (const auto& t : j.at("revision_types")) {
      g.revision_types.push_back(parse_revision_type(t.get<std::string>()));
    }
    g.policies = j.at("policies").get<std::vector<std::string>>();
    g.timings = j.value("timings", std::vector<std::string>{"mid"});
    g.n_injections = j.value("n_injections", std::vector<unsigned>{1});
    g.length_mults = j.value("length_mults", std::vector<unsigned>{1});
    g.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
    g.backend = j.value("backend", "mock");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed grid config: ") + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("malformed grid config: ") + e.what());
  }
  for (const auto& p : g.policies) parse_policy(p);
  for (const auto& t : g.timings) TimingSpec::parse(t);
  return g;
}

std::vector<std::string> preset_names() {
  return {"main-grid", "rho-sweep", "timing-ablation", "multi-injection", "plan-length"};
}

GridConfig load_preset(const std::string& name) {
  auto names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return parse_grid_config(json::parse(detail::load_asset("data/presets/" + name + ".json")));
}

std::size_t grid_cardinality(const GridConfig& g) {
  return g.scenarios.size() * g.rhos.size() * g.revision_types.size() * g.policies.size() *
         g.timings.size() * g.n_injections.size() * g.length_mults.size() * g.seeds.size();
}

std::vector<RunConfig> enumerate_grid(const GridConfig& g) {
  if (grid_cardinality(g) == 0) throw ConfigError("grid '" + g.name + "' is empty");
  std::vector<RunConfig> out;
  out.reserve(grid_cardinality(g));
  for (const auto& sc : g.scenarios)
    for (double rho : g.rhos)
      for (auto rt : g.revision_types)
        for (const auto& pol : g.policies)
          for (const auto& tm : g.timings)
            for (unsigned n : g.n_injections)
              for (unsigned m : g.length_mults)
                for (auto seed : g.seeds) {
                  RunConfig c;
                  c.scenario = sc;
                  c.rho = rho;
                  c.revision_type = rt;
                  c.policy = pol;
                  c.timing = tm;
                  c.n_injections = n;
                  c.length_mult = m;
                  c.seed = seed;
                  c.backend = g.backend;
                  out.push_back(std::move(c));
                }
  return out;
}

namespace {

void read_rows(const std::filesystem::path& p, std::map<std::string, std::string>& rows) {
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      rows[j.at("run_id").get<std::string>()] = line;
    } catch (const json::exception&) {
      // A torn final line from an interrupted write; the run is redone.
    }
  }
}

}  // namespace

std::vector<json> run_grid(const GridConfig& g, const GridRunOptions& opts) {
  const auto configs = enumerate_grid(g);
  std::map<std::string, std::string> existing;
  std::filesystem::path out(opts.out_path);
  std::filesystem::path journal = opts.out_path + ".partial";
  if (!opts.out_path.empty()) {
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    read_rows(out, existing);
    read_rows(journal, existing);
  }

  std::vector<std::string> lines(configs.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto it = existing.find(configs[i].run_id());
    if (it != existing.end()) {
      lines[i] = it->second;
    } else {
      todo.push_back(i);
    }
  }

  BackendConfig bc = g.backend == "chat" ? BackendConfig::chat_from_env() : BackendConfig{};
  bc.kind = parse_backend_kind(g.backend);
  bc.validate();

  std::ofstream journal_out;
  if (!opts.out_path.empty() && !todo.empty()) journal_out.open(journal, std::ios::app);
  std::mutex write_mu;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{configs.size() - todo.size()};
  std::exception_ptr failure;

  auto worker = [&] {
    auto backend = make_backend(bc);
    while (true) {
      const std::size_t k = next++;
      if (k >= todo.size()) return;
      {
        std::lock_guard lock(write_mu);
        if (failure) return;
      }
      try {
        const std::size_t i = todo[k];
        RunRecord rec = run_session(configs[i], *backend);
        check_integrity(rec);
        std::string line = opts.full_records ? json(rec).dump() : summary_row(rec).dump();
        std::lock_guard lock(write_mu);
        if (journal_out.is_open()) journal_out << line << '\n' << std::flush;
        lines[i] = std::move(line);
        const std::size_t d = ++done;
        if (opts.progress) opts.progress(d, configs.size());
      } catch (...) {
        std::lock_guard lock(write_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const unsigned width = std::max(1u, std::min<unsigned>(opts.workers, todo.size()));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (journal_out.is_open()) journal_out.close();
  if (failure) std::rethrow_exception(failure);

  if (!opts.out_path.empty()) {
    const std::filesystem::path tmp = opts.out_path + ".tmp";
    {
      std::ofstream f(tmp, std::ios::trunc);
      for (const auto& l : lines) f << l << '\n';
      if (!f) throw ConfigError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, out);
    std::filesystem::remove(journal);
  }

  std::vector<json> rows;
  rows.reserve(lines.size());
  for (const auto& l : lines) rows.push_back(json::parse(l));
  return rows;
}

}  // namespace streamrev
