#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "streamrev/serialize.hpp"
#include "streamrev/stats.hpp"

using namespace streamrev;

namespace {

// Exact distribution of the resampled mean, enumerating all n^n index tuples.
std::vector<double> all_resample_means(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= n;
  std::vector<double> out;
  for (std::size_t code = 0; code < total; ++code) {
    double s = 0;
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= n) s += xs[c % n];
    out.push_back(s / static_cast<double>(n));
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json row(std::string policy, double rho, std::size_t wasted, double quality) {
  return {{"run_id", policy + std::to_string(wasted)},
          {"policy", policy},
          {"rho", rho},
          {"scenario", "travel"},
          {"wasted_acts", wasted},
          {"comp_calls", 1},
          {"steps", 20},
          {"token_estimate", 1000},
          {"quality", quality}};
}

}  // namespace

TEST(Stats, CohensDHandComputed) {
  std::vector<double> a{2, 4}, b{1, 3};
  EXPECT_NEAR(cohens_d(a, b), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(cohens_d(a, a), 0.0, 1e-12);
}

TEST(Stats, CohensDGuards) {
  std::vector<double> c{3, 3, 3};
  EXPECT_THROW(cohens_d(c, c), UndefinedEffectError);
  std::vector<double> one{1};
  EXPECT_THROW(cohens_d(one, c), DomainError);
}

TEST(Stats, CohensDUnequalSizes) {
  std::vector<double> a{1, 2, 3, 4}, b{0, 2};
  // var(a) = 5/3, var(b) = 2; pooled = (3*5/3 + 1*2) / 4 = 7/4
  EXPECT_NEAR(cohens_d(a, b), (2.5 - 1.0) / std::sqrt(7.0 / 4.0), 1e-12);
}

TEST(Stats, EffectSignFollowsMeanDifference) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(2 + rng() % 6), b(2 + rng() % 6);
    for (auto& x : a) x = nd(rng);
    for (auto& x : b) x = nd(rng) + 0.3;
    const double diff = mean(a) - mean(b);
    const double d = cohens_d(a, b);
    EXPECT_EQ(std::signbit(d), std::signbit(diff));
  }
}

TEST(Stats, BootstrapConstantSample) {
  std::vector<double> c(7, 2.5);
  auto ci = bootstrap_ci(c, 2000, 0.95, 1);
  EXPECT_NEAR(ci.lo, 2.5, 1e-12);
  EXPECT_NEAR(ci.hi, 2.5, 1e-12);
}

TEST(Stats, BootstrapMatchesExhaustiveEnumeration) {
  const std::vector<double> xs{0, 1};
  const auto exact = all_resample_means(xs);  // {0, .5, .5, 1}
  for (double level : {0.4, 0.8}) {
    const double alpha = 1 - level;
    const double want_lo = percentile_of_sorted(exact, alpha / 2);
    const double want_hi = percentile_of_sorted(exact, 1 - alpha / 2);
    auto ci = bootstrap_ci(xs, 20000, level, 3);
    EXPECT_NEAR(ci.lo, want_lo, 1e-12) << level;
    EXPECT_NEAR(ci.hi, want_hi, 1e-12) << level;
  }
  // The percentile bounds at 0.4 are both the middle atom.
  auto ci = bootstrap_ci(xs, 2000, 0.4, 0);
  EXPECT_NEAR(ci.lo, 0.5, 1e-12);
  EXPECT_NEAR(ci.hi, 0.5, 1e-12);
}

TEST(Stats, BootstrapBoundsAreResampleAtoms) {
  const std::vector<double> xs{0, 1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ci = bootstrap_ci(xs, 50, 0.95, seed);
    for (double v : {ci.lo, ci.hi}) {
      EXPECT_TRUE(v == 0.0 || v == 0.5 || v == 1.0) << v;
    }
    EXPECT_LE(ci.lo, ci.hi);
  }
}

TEST(Stats, BootstrapDeterministicPerSeed) {
  std::vector<double> xs{1, 5, 2, 8, 3};
  auto a = bootstrap_ci(xs, 2000, 0.95, 42);
  auto b = bootstrap_ci(xs, 2000, 0.95, 42);
  EXPECT_EQ(a.lo, b.lo);
  EXPECT_EQ(a.hi, b.hi);
}

TEST(Stats, BootstrapIntervalBracketsResampleMean) {
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ed(0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(3 + rng() % 30);
    for (auto& x : xs) x = ed(rng);
    auto ci = bootstrap_ci(xs, 200, 0.95, trial);
    EXPECT_LE(ci.lo, ci.hi);
    EXPECT_LE(ci.lo, mean(xs));
    EXPECT_GE(ci.hi, mean(xs));
  }
}

TEST(Stats, PercentileRanks) {
  std::vector<double> s{1, 2, 3, 4};
  EXPECT_EQ(percentile_of_sorted(s, 0.25), 1);
  EXPECT_EQ(percentile_of_sorted(s, 0.26), 2);
  EXPECT_EQ(percentile_of_sorted(s, 1.0), 4);
  EXPECT_EQ(percentile_of_sorted(s, 0.0), 1);
}

TEST(Stats, GroupTableConservesCountsAndMeans) {
  std::vector<nlohmann::json> rows;
  for (std::size_t i = 0; i < 6; ++i) rows.push_back(row("absorber", 0.25, i % 2, 4.0));
  for (std::size_t i = 0; i < 4; ++i) rows.push_back(row("full_restart", 0.25, 8 + i, 3.0));
  for (std::size_t i = 0; i < 3; ++i) rows.push_back(row("full_restart", 1.0, 0, 5.0));

  auto rep = group_table(rows, {"policy", "rho"}, {.resamples = 500});
  ASSERT_EQ(rep.groups.size(), 3u);
  std::size_t total = 0;
  for (const auto& g : rep.groups) total += g.n;
  EXPECT_EQ(total, rows.size());
  EXPECT_EQ(rep.groups[0].key, (std::vector<std::string>{"absorber", "0.25"}));
  EXPECT_NEAR(rep.groups[0].metrics.at("wasted_acts").mean, 0.5, 1e-12);
  EXPECT_NEAR(rep.groups[1].metrics.at("wasted_acts").mean, 9.5, 1e-12);
  EXPECT_EQ(rep.groups[2].key, (std::vector<std::string>{"full_restart", "1"}));

  // Only the rho = 0.25 stratum has both policies.
  ASSERT_EQ(rep.pairwise.size(), 2u);
  const auto& w = rep.pairwise[1];
  EXPECT_EQ(w.metric, "wasted_acts");
  EXPECT_EQ(w.other, "full_restart");
  EXPECT_NEAR(w.delta, -9.0, 1e-12);
  ASSERT_TRUE(w.d.has_value());
  EXPECT_LT(*w.d, 0);
  EXPECT_FALSE(rep.pairwise[0].d.has_value());  // constant quality on both sides
}

TEST(Stats, GroupTableRejectsUnknownKey) {
  std::vector<nlohmann::json> rows{row("absorber", 0.5, 0, 4)};
  EXPECT_THROW(group_table(rows, {"colour"}), ConfigError);
  EXPECT_THROW(group_table({}, {"policy"}), ConfigError);
}

TEST(Stats, CsvIsDeterministic) {
  std::vector<nlohmann::json> rows;
  for (std::size_t i = 0; i < 8; ++i) rows.push_back(row(i % 2 ? "naive" : "absorber", 0.5, i, 3));
  auto a = group_table(rows, {"policy"}, {.seed = 9});
  auto b = group_table(rows, {"policy"}, {.seed = 9});
  EXPECT_EQ(groups_csv(a), groups_csv(b));
  EXPECT_EQ(pairwise_csv(a), pairwise_csv(b));
  EXPECT_EQ(groups_csv(a).substr(0, 19), "policy,n,quality_n,");
}

TEST(Stats, ExtractMetricsFromCaseStudy) {
  RunConfig c;
  auto rec = run_session(c);
  auto m = extract_metrics(rec);
  EXPECT_EQ(m.wasted_acts, 1u);
  EXPECT_EQ(m.comp_calls, 1u);

  c.revision_type.reset();
  auto quiet = extract_metrics(run_session(c));
  EXPECT_EQ(quiet.wasted_acts, 0u);
  EXPECT_EQ(quiet.comp_calls, 0u);

  c = RunConfig{};
  c.policy = "full_restart";
  EXPECT_EQ(extract_metrics(run_session(c)).wasted_acts, 9u);

  rec.counters.wasted_acts += 1;
  EXPECT_THROW(extract_metrics(rec), IntegrityError);
}

TEST(Stats, RowAndRecordMetricsAgree) {
  RunConfig c;
  c.policy = "naive";
  auto rec = run_session(c);
  auto from_rec = extract_metrics(rec);
  auto from_row = metrics_from_row(summary_row(rec));
  auto from_full = metrics_from_row(nlohmann::json(rec));
  for (const auto& m : {from_row, from_full}) {
    EXPECT_EQ(m.wasted_acts, from_rec.wasted_acts);
    EXPECT_EQ(m.comp_calls, from_rec.comp_calls);
    EXPECT_EQ(m.steps, from_rec.steps);
    EXPECT_EQ(m.quality, from_rec.quality);
  }
}
