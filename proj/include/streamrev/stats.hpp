#pragma once

// Per-run metrics and aggregate statistics over grid rows.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "streamrev/runtime.hpp"

namespace streamrev {

struct Metrics {
  std::optional<double> quality;  // absent when the judge did not run
  std::size_t wasted_acts = 0;
  std::size_t comp_calls = 0;
  std::size_t steps = 0;
  double tokens_k = 0.0;
};

/// Throws IntegrityError when the stored counters disagree with the trace.
Metrics extract_metrics(const RunRecord& rec);
/// Same fields from a summary row or a full serialized record.
Metrics metrics_from_row(const nlohmann::json& row);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_sd(std::span<const double> xs);

/// Standardized mean difference over the pooled sd. DomainError when either
/// sample has fewer than two values, UndefinedEffectError when the pooled sd is 0.
double cohens_d(std::span<const double> a, std::span<const double> b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile interval of the resampled mean.
Interval bootstrap_ci(std::span<const double> xs, unsigned resamples, double level,
                      std::uint64_t seed);
/// Percentile interval of mean(a) - mean(b), resampling each side independently.
Interval bootstrap_diff_ci(std::span<const double> a, std::span<const double> b,
                           unsigned resamples, double level, std::uint64_t seed);

/// Lower-type percentile: the ceil(q * n)-th smallest value (1-based).
double percentile_of_sorted(std::span<const double> sorted, double q);

struct ReportOptions {
  unsigned resamples = 2000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string baseline = "absorber";  // compared against every other policy
};

struct MetricSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  Interval ci;
};

struct GroupRow {
  std::vector<std::string> key;  // one value per group key
  std::size_t n = 0;
  std::map<std::string, MetricSummary> metrics;  // quality, wasted_acts, comp_calls, steps
};

struct PairwiseRow {
  std::vector<std::string> key;  // group key values with the policy column dropped
  std::string other;
  std::string metric;
  double delta = 0.0;  // baseline mean minus other mean
  std::optional<double> d;
  Interval ci;
};

struct StatReport {
  std::vector<std::string> group_keys;
  ReportOptions options;
  std::size_t total = 0;
  std::vector<GroupRow> groups;
  std::vector<PairwiseRow> pairwise;  // filled when policy is a group key
};

std::vector<std::string> groupable_keys();
std::vector<std::string> metric_names();

/// Throws ConfigError for an unknown key or empty input.
StatReport group_table(const std::vector<nlohmann::json>& rows,
                       const std::vector<std::string>& group_keys,
                       const ReportOptions& opts = {});

std::string groups_csv(const StatReport& r);
std::string pairwise_csv(const StatReport& r);

}  // namespace streamrev
