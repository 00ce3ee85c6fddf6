#include "streamrev/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace streamrev {

using nlohmann::json;

Metrics extract_metrics(const RunRecord& rec) {
  check_integrity(rec);
  Metrics m;
  m.quality = rec.quality;
  m.wasted_acts = rec.counters.wasted_acts;
  m.comp_calls = rec.counters.comp_calls;
  m.steps = rec.counters.steps;
  m.tokens_k = static_cast<double>(rec.counters.token_estimate) / 1000.0;

  // Waste can only come from acts executed before the last injection.
  std::size_t pre = 0;
  Seq last_inj = 0;
  for (const auto& e : rec.trace.events) {
    if (e.kind() == EventKind::Inj) last_inj = e.seq;
  }
  for (const auto& e : rec.trace.events) {
    if (e.kind() == EventKind::Act && e.seq < last_inj) ++pre;
  }
  if (m.wasted_acts > pre) {
    throw IntegrityError("wasted_acts exceeds the acts executed before injection in " + rec.run_id);
  }
  return m;
}

Metrics metrics_from_row(const json& row) {
  try {
    Metrics m;
    if (row.contains("counters")) {  // full record
      const auto& c = row.at("counters");
      m.wasted_acts = c.at("wasted_acts").get<std::size_t>();
      m.comp_calls = c.at("comp_calls").get<std::size_t>();
      m.steps = c.at("steps").get<std::size_t>();
      m.tokens_k = c.at("token_estimate").get<double>() / 1000.0;
    } else {
      m.wasted_acts = row.at("wasted_acts").get<std::size_t>();
      m.comp_calls = row.at("comp_calls").get<std::size_t>();
      m.steps = row.at("steps").get<std::size_t>();
      m.tokens_k = row.value("token_estimate", 0.0) / 1000.0;
    }
    if (row.contains("quality") && !row.at("quality").is_null()) {
      m.quality = row.at("quality").get<double>();
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed record row: ") + e.what());
  }
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("cohens_d needs at least two values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = std::pow(sample_sd(a), 2);
  const double vb = std::pow(sample_sd(b), 2);
  const double pooled = std::sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2));
  if (pooled == 0.0) throw UndefinedEffectError("pooled standard deviation is zero");
  return (mean(a) - mean(b)) / pooled;
}

double percentile_of_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("percentile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  // The tolerance keeps q * n = 50.000000000000004 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

namespace {

// Uniform index in [0, n) by multiply-shift; no modulo bias worth measuring.
std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

double resample_mean(std::span<const double> xs, std::mt19937_64& rng) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += xs[draw(rng, xs.size())];
  return s / static_cast<double>(xs.size());
}

Interval percentile_interval(std::vector<double>& stats, double level) {
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  return {percentile_of_sorted(stats, alpha / 2), percentile_of_sorted(stats, 1.0 - alpha / 2)};
}

void check_ci_args(unsigned resamples, double level) {
  if (resamples == 0) throw DomainError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
}

}  // namespace

Interval bootstrap_ci(std::span<const double> xs, unsigned resamples, double level,
                      std::uint64_t seed) {
  if (xs.empty()) throw DomainError("bootstrap of an empty sample");
  check_ci_args(resamples, level);
  std::mt19937_64 rng(seed);
  std::vector<double> stats(resamples);
  for (auto& s : stats) s = resample_mean(xs, rng);
  return percentile_interval(stats, level);
}

Interval bootstrap_diff_ci(std::span<const double> a, std::span<const double> b,
                           unsigned resamples, double level, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw DomainError("bootstrap of an empty sample");
  check_ci_args(resamples, level);
  std::mt19937_64 rng(seed);
  std::vector<double> stats(resamples);
  for (auto& s : stats) {
    const double ma = resample_mean(a, rng);
    s = ma - resample_mean(b, rng);
  }
  return percentile_interval(stats, level);
}

std::vector<std::string> groupable_keys() {
  return {"scenario", "rho",         "policy",       "revision_type", "timing",
          "n_injections", "length_mult", "seed", "termination", "backend"};
}

std::vector<std::string> metric_names() {
  return {"quality", "wasted_acts", "comp_calls", "steps", "tokens_k"};
}

namespace {

json key_value(const json& row, const std::string& key) {
  if (row.contains("config")) {  // full record
    if (key == "termination") return row.value(key, json(nullptr));
    return row.at("config").value(key, json(nullptr));
  }
  return row.value(key, json(nullptr));
}

std::string key_text(const json& v) {
  if (v.is_null()) return "none";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_rho(v.get<double>());
  return v.dump();
}

std::vector<double> metric_values(const std::vector<Metrics>& ms, const std::string& metric) {
  std::vector<double> out;
  for (const auto& m : ms) {
    if (metric == "quality") {
      if (m.quality) out.push_back(*m.quality);
    } else if (metric == "wasted_acts") {
      out.push_back(static_cast<double>(m.wasted_acts));
    } else if (metric == "comp_calls") {
      out.push_back(static_cast<double>(m.comp_calls));
    } else if (metric == "steps") {
      out.push_back(static_cast<double>(m.steps));
    } else {
      out.push_back(m.tokens_k);
    }
  }
  return out;
}

// Distinct, reproducible stream per (group, metric) cell.
std::uint64_t cell_seed(std::uint64_t base, std::size_t group, std::size_t metric) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(group), static_cast<std::uint32_t>(metric)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

StatReport group_table(const std::vector<json>& rows, const std::vector<std::string>& group_keys,
                       const ReportOptions& opts) {
  const auto allowed = groupable_keys();
  for (const auto& k : group_keys) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("unknown group key '" + k + "'");
    }
  }
  if (rows.empty()) throw ConfigError("no records to aggregate");
  check_ci_args(opts.resamples, opts.level);

  std::map<std::vector<json>, std::vector<Metrics>> buckets;
  for (const auto& row : rows) {
    std::vector<json> key;
    for (const auto& k : group_keys) key.push_back(key_value(row, k));
    buckets[key].push_back(metrics_from_row(row));
  }

  StatReport rep;
  rep.group_keys = group_keys;
  rep.options = opts;
  rep.total = rows.size();
  const auto metrics = metric_names();
  std::size_t gi = 0;
  for (const auto& [key, ms] : buckets) {
    GroupRow g;
    for (const auto& v : key) g.key.push_back(key_text(v));
    g.n = ms.size();
    for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
      auto xs = metric_values(ms, metrics[mi]);
      MetricSummary s;
      s.n = xs.size();
      if (!xs.empty()) {
        s.mean = mean(xs);
        s.sd = sample_sd(xs);
        s.ci = bootstrap_ci(xs, opts.resamples, opts.level, cell_seed(opts.seed, gi, mi));
      }
      g.metrics[metrics[mi]] = s;
    }
    rep.groups.push_back(std::move(g));
    ++gi;
  }

  auto pit = std::find(group_keys.begin(), group_keys.end(), "policy");
  if (pit == group_keys.end()) return rep;
  const std::size_t pcol = static_cast<std::size_t>(pit - group_keys.begin());

  // Rebucket by the remaining keys, then compare the baseline to each policy.
  std::map<std::vector<json>, std::map<std::string, const std::vector<Metrics>*>> strata;
  for (const auto& [key, ms] : buckets) {
    std::vector<json> rest;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (i != pcol) rest.push_back(key[i]);
    }
    strata[rest][key_text(key[pcol])] = &ms;
  }
  std::size_t si = 0;
  for (const auto& [rest, by_policy] : strata) {
    auto base = by_policy.find(opts.baseline);
    if (base != by_policy.end()) {
      for (const auto& [other, ms] : by_policy) {
        if (other == opts.baseline) continue;
        for (std::size_t mi = 0; mi < 2; ++mi) {  // quality, wasted_acts
          const auto a = metric_values(*base->second, metrics[mi]);
          const auto b = metric_values(*ms, metrics[mi]);
          if (a.empty() || b.empty()) continue;
          PairwiseRow p;
          for (const auto& v : rest) p.key.push_back(key_text(v));
          p.other = other;
          p.metric = metrics[mi];
          p.delta = mean(a) - mean(b);
          try {
            p.d = cohens_d(a, b);
          } catch (const Error&) {
            p.d.reset();
          }
          p.ci = bootstrap_diff_ci(a, b, opts.resamples, opts.level,
                                   cell_seed(opts.seed ^ 0x9e3779b97f4a7c15ull, si, mi));
          rep.pairwise.push_back(std::move(p));
        }
        ++si;
      }
    }
  }
  return rep;
}

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string groups_csv(const StatReport& r) {
  std::ostringstream out;
  for (const auto& k : r.group_keys) out << k << ',';
  out << "n";
  for (const auto& m : metric_names()) {
    out << ',' << m << "_n," << m << "_mean," << m << "_sd," << m << "_ci_lo," << m << "_ci_hi";
  }
  out << '\n';
  for (const auto& g : r.groups) {
    for (const auto& v : g.key) out << csv_field(v) << ',';
    out << g.n;
    for (const auto& m : metric_names()) {
      const auto& s = g.metrics.at(m);
      if (s.n == 0) {
        out << ",0,,,,";
        continue;
      }
      out << ',' << s.n << ',' << num(s.mean) << ',' << num(s.sd) << ',' << num(s.ci.lo) << ','
          << num(s.ci.hi);
    }
    out << '\n';
  }
  return out.str();
}

std::string pairwise_csv(const StatReport& r) {
  std::ostringstream out;
  for (const auto& k : r.group_keys) {
    if (k != "policy") out << k << ',';
  }
  out << "baseline,other,metric,delta,cohens_d,ci_lo,ci_hi\n";
  for (const auto& p : r.pairwise) {
    for (const auto& v : p.key) out << csv_field(v) << ',';
    out << r.options.baseline << ',' << p.other << ',' << p.metric << ',' << num(p.delta) << ','
        << (p.d ? num(*p.d) : std::string()) << ',' << num(p.ci.lo) << ',' << num(p.ci.hi) << '\n';
  }
  return out.str();
}

}  // namespace streamrev
