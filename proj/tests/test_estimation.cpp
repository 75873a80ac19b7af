#include <cmath>
#include <random>

#include "doctest.h"
#include "isostat/estimation.hpp"
#include "isostat/isotonic.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace isostat;
using testutil::random_stats;
using testutil::table1_stats;

namespace {

ScenarioConfig config(Scenario scenario, double tol = 1e-3) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.tol = tol;
  cfg.max_iter = 5000;
  return cfg;
}

ScenarioConfig tight(Scenario scenario) { return config(scenario, 1e-11); }

// Profile objective of the unknown-variances model at a feasible mean vector.
double profile_objective(const SufficientStats& stats, const std::vector<double>& mu) {
  double p = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = stats.mean[i] - mu[i];
    p -= 0.5 * stats.n[i] * std::log(stats.var[i] + d * d);
  }
  return p;
}

void check_trace_ascends(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] >= trace[i - 1] - 1e-10);
}

}  // namespace

TEST_CASE("fit_case1: application data with ratios var_i / pooled variance") {
  const SufficientStats stats = table1_stats();
  const double sigma2 = pooled_total_variance(stats);
  ScenarioConfig cfg = config(Scenario::KnownRatio);
  cfg.sigma2 = sigma2;
  cfg.ratios.resize(4);
  for (int i = 0; i < 4; ++i) cfg.ratios[i] = stats.var[i] / sigma2;

  const RestrictedFit fit = fit_case1(stats, cfg);
  const std::vector<double> expected{0.815, 0.833, 0.867, 0.867};
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(fit.mu[i] - expected[i]) < 1e-3);
  // sigma2_i = c_i * sigma2 gives back the per-level variances here
  for (int i = 0; i < 4; ++i)
    CHECK(fit.sigma2[i] == doctest::Approx(stats.var[i]).epsilon(1e-12));
  CHECK(fit.converged);
  CHECK_FALSE(fit.uniqueness_certificate.has_value());
}

TEST_CASE("fit_case1: ordered two-level means are untouched") {
  const SufficientStats stats = stats_from_summary({3, 7}, {0.0, 1.0}, {0.5, 0.25});
  const RestrictedFit fit = fit_case1(stats, config(Scenario::KnownRatio));
  CHECK(fit.mu == std::vector<double>{0.0, 1.0});
}

TEST_CASE("fit_case1 agrees with the max-min oracle for unit ratios") {
  std::mt19937_64 rng(515);
  for (int rep = 0; rep < 300; ++rep) {
    const SufficientStats stats = random_stats(rng, 2 + static_cast<int>(rng() % 5));
    const RestrictedFit fit = fit_case1(stats, config(Scenario::KnownRatio));
    WeightedVector v;
    v.values = stats.mean;
    v.weights.assign(stats.n.begin(), stats.n.end());
    const std::vector<double> ref = oracle::isotonic_maxmin(v);
    for (std::size_t i = 0; i < stats.size(); ++i)
      CHECK(std::abs(fit.mu[i] - ref[i]) < 1e-10);
  }
}

TEST_CASE("fit_case1 rejects ratios of the wrong length") {
  const SufficientStats stats = table1_stats();
  ScenarioConfig cfg = config(Scenario::KnownRatio);
  cfg.ratios = {1.0, 2.0};
  CHECK_THROWS_AS(fit_case1(stats, cfg), InvalidInput);
}

TEST_CASE("fit_case2: application data reproduces the published fit") {
  const RestrictedFit fit = fit_case2(table1_stats(), config(Scenario::UnknownVariances));
  const std::vector<double> mu_expected{0.815, 0.833, 0.867, 0.867};
  const std::vector<double> sig_expected{0.035, 0.024, 0.017, 0.022};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(fit.mu[i] - mu_expected[i]) < 1e-3);
    CHECK(std::abs(fit.sigma2[i] - sig_expected[i]) < 1e-3);
  }
  CHECK(fit.converged);
  CHECK(fit.uniqueness_certificate == true);
  check_trace_ascends(fit.log_lik_trace);
}

TEST_CASE("fit_case2: already isotonic means are a one-sweep fixed point") {
  const SufficientStats stats =
      stats_from_summary({5, 6, 7}, {0.1, 0.4, 0.9}, {0.3, 0.2, 0.5});
  const RestrictedFit fit = fit_case2(stats, config(Scenario::UnknownVariances));
  CHECK(fit.mu == stats.mean);
  CHECK(fit.sigma2 == stats.var);
  CHECK(fit.iterations == 1);
  CHECK(fit.converged);
}

TEST_CASE("fit_case2: variance substitution holds at convergence") {
  std::mt19937_64 rng(616);
  for (int rep = 0; rep < 100; ++rep) {
    const SufficientStats stats = random_stats(rng, 4);
    const RestrictedFit fit = fit_case2(stats, tight(Scenario::UnknownVariances));
    for (std::size_t i = 0; i < 4; ++i) {
      const double d = stats.mean[i] - fit.mu[i];
      CHECK(fit.sigma2[i] == doctest::Approx(stats.var[i] + d * d).epsilon(1e-12));
    }
    check_trace_ascends(fit.log_lik_trace);
  }
}

TEST_CASE("fit_case2 beats random isotonic candidates on the profile") {
  std::mt19937_64 rng(717);
  for (int inst = 0; inst < 5; ++inst) {
    const SufficientStats stats = random_stats(rng, 3, 2, 60, 0.15, 0.1, 2.0);
    REQUIRE(check_condition1(stats));
    const RestrictedFit fit = fit_case2(stats, tight(Scenario::UnknownVariances));
    const double fit_profile = profile_objective(stats, fit.mu);
    const double lo = stats.min_mean() - 0.3;
    const double hi = stats.max_mean() + 0.3;
    for (int rep = 0; rep < 100000; ++rep) {
      const std::vector<double> cand = testutil::random_isotonic_vector(rng, 3, lo, hi);
      CHECK(fit_profile >= profile_objective(stats, cand) - 1e-8);
    }
  }
}

TEST_CASE("fit_case2 error paths") {
  const SufficientStats degenerate =
      stats_from_summary({3, 4}, {0.2, 0.1}, {0.0, 0.5});
  CHECK_THROWS_AS(fit_case2(degenerate, config(Scenario::UnknownVariances)),
                  DegenerateVariance);

  ScenarioConfig cfg = config(Scenario::UnknownVariances, 1e-14);
  cfg.max_iter = 1;
  const RestrictedFit fit = fit_case2(
      stats_from_summary({5, 5}, {1.0, 0.0}, {0.4, 0.6}), cfg);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations == 1);
}

TEST_CASE("fit_case3: application data reproduces the published fit") {
  const RestrictedFit fit =
      fit_case3(table1_stats(), config(Scenario::OrderedVariances));
  const std::vector<double> mu_expected{0.815, 0.833, 0.866, 0.866};
  const std::vector<double> sig_expected{0.035, 0.024, 0.018, 0.018};
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(fit.mu[i] - mu_expected[i]) < 1e-3);
    CHECK(std::abs(fit.sigma2[i] - sig_expected[i]) < 1e-3);
  }
  CHECK(fit.sigma2[2] == fit.sigma2[3]);
  CHECK(fit.uniqueness_certificate == false);  // condition2 fails here
  check_trace_ascends(fit.log_lik_trace);
}

TEST_CASE("fit_case3: inactive constraints return the data in one sweep") {
  const SufficientStats stats =
      stats_from_summary({5, 6, 7}, {0.1, 0.4, 0.9}, {0.5, 0.3, 0.2});
  const RestrictedFit fit = fit_case3(stats, config(Scenario::OrderedVariances));
  CHECK(fit.mu == stats.mean);
  CHECK(fit.sigma2 == stats.var);
  CHECK(fit.iterations == 1);
}

TEST_CASE("fit_case3 matches the cone grid oracle") {
  std::mt19937_64 rng(818);
  for (int inst = 0; inst < 40; ++inst) {
    const SufficientStats stats = random_stats(rng, 3, 5, 40, 0.5, 0.2, 1.5);
    const RestrictedFit fit = fit_case3(stats, tight(Scenario::OrderedVariances));
    const double range = stats.max_mean() - stats.min_mean();
    const double var_lo = *std::min_element(stats.var.begin(), stats.var.end());
    const double var_hi =
        *std::max_element(stats.var.begin(), stats.var.end()) + range * range;
    const oracle::ConeMax grid = oracle::cone_grid_max(
        stats, {stats.min_mean(), stats.max_mean(), 120},
        {var_lo, var_hi, 120});
    CHECK(fit.log_lik >= grid.value - 1e-6);
    for (std::size_t i = 1; i < 3; ++i) {
      CHECK(fit.mu[i - 1] <= fit.mu[i] + 1e-12);
      CHECK(fit.sigma2[i - 1] >= fit.sigma2[i] - 1e-12);
    }
  }
}

TEST_CASE("check_condition1") {
  CHECK(check_condition1(table1_stats()));
  CHECK(check_condition1(stats_from_summary({3}, {1.0}, {0.0})));  // k = 1
  CHECK_FALSE(
      check_condition1(stats_from_summary({2, 2}, {0.0, 10.0}, {1.0, 1.0})));
}

TEST_CASE("check_condition2") {
  CHECK_FALSE(check_condition2(table1_stats()));
  CHECK(check_condition2(stats_from_summary({2, 2}, {0.5, 0.5}, {0.2, 0.3})));
  CHECK(check_condition2(stats_from_summary({2, 2}, {0.0, 0.1}, {1.0, 1.0})));
}

TEST_CASE("check_profile_uniqueness") {
  CHECK(check_profile_uniqueness(table1_stats()));
  CHECK(check_profile_uniqueness(stats_from_summary({2, 2}, {1.0, 1.0}, {0.5, 0.5})));
  CHECK_FALSE(
      check_profile_uniqueness(stats_from_summary({2, 2}, {0.0, 10.0}, {1.0, 1.0})));
}

TEST_CASE("h0_mean_case1: application data") {
  const SufficientStats stats = table1_stats();
  SUBCASE("unit ratios") {
    ScenarioConfig cfg = config(Scenario::KnownRatio);
    cfg.sigma2 = pooled_total_variance(stats);
    const NullFit fit = h0_mean_case1(stats, cfg);
    CHECK(std::abs(fit.mu0 - 0.827) < 1e-3);
    for (int i = 0; i < 4; ++i)
      CHECK(fit.sigma2[i] == doctest::Approx(*cfg.sigma2).epsilon(1e-12));
  }
  SUBCASE("ratios var_i / pooled variance") {
    const double sigma2 = pooled_total_variance(stats);
    ScenarioConfig cfg = config(Scenario::KnownRatio);
    cfg.ratios.resize(4);
    for (int i = 0; i < 4; ++i) cfg.ratios[i] = stats.var[i] / sigma2;
    const NullFit fit = h0_mean_case1(stats, cfg);
    CHECK(std::abs(fit.mu0 - 0.831) < 1e-3);
  }
  SUBCASE("equal weights give the arithmetic mean") {
    const SufficientStats two = stats_from_summary({4, 4}, {1.0, 3.0}, {0.5, 0.5});
    const NullFit fit = h0_mean_case1(two, config(Scenario::KnownRatio));
    CHECK(fit.mu0 == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("h0_fit_case2: application data") {
  const NullFit fit = h0_fit_case2(table1_stats(), config(Scenario::UnknownVariances));
  CHECK(std::abs(fit.mu0 - 0.831) < 1e-3);
  const std::vector<double> sig_expected{0.035, 0.024, 0.018, 0.022};
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(fit.sigma2[i] - sig_expected[i]) < 1.1e-3);
  check_trace_ascends(fit.log_lik_trace);
}

TEST_CASE("h0_fit_case2: single group") {
  const SufficientStats stats = stats_from_summary({6}, {1.3}, {0.4});
  const NullFit fit = h0_fit_case2(stats, config(Scenario::UnknownVariances));
  CHECK(fit.mu0 == 1.3);
  CHECK(fit.sigma2[0] == 0.4);
  CHECK(fit.iterations == 0);
}

TEST_CASE("h0_fit_case2 matches the profile grid oracle") {
  std::mt19937_64 rng(919);
  for (int inst = 0; inst < 30; ++inst) {
    const SufficientStats stats = random_stats(rng, 4);
    const NullFit fit = h0_fit_case2(stats, tight(Scenario::UnknownVariances));
    CHECK(fit.mu0 >= stats.min_mean());
    CHECK(fit.mu0 <= stats.max_mean());
    constexpr int kPoints = 200001;
    const oracle::GridMax grid = oracle::profile_grid_max(
        stats, {stats.min_mean(), stats.max_mean(), kPoints});
    const double step = (stats.max_mean() - stats.min_mean()) / (kPoints - 1);
    CHECK(std::abs(fit.mu0 - grid.argmax) < 2.0 * step);

    // score equations hold at the returned point
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const double w = stats.n[i] / fit.sigma2[i];
      num += w * stats.mean[i];
      den += w;
    }
    CHECK(std::abs(fit.mu0 - num / den) < 1e-8);
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const double d = stats.mean[i] - fit.mu0;
      CHECK(fit.sigma2[i] == doctest::Approx(stats.var[i] + d * d).epsilon(1e-12));
    }
  }
}

TEST_CASE("h0_fit_case2 rejects singleton levels") {
  const SufficientStats stats = stats_from_summary({1, 5}, {0.0, 1.0}, {0.0, 0.5});
  CHECK_THROWS_AS(h0_fit_case2(stats, config(Scenario::UnknownVariances)),
                  InvalidInput);
}

TEST_CASE("h0_fit_case3: application data") {
  const NullFit fit =
      h0_fit_case3(table1_stats(), config(Scenario::OrderedVariances));
  CHECK(std::abs(fit.mu0 - 0.831) < 1e-3);
  const std::vector<double> sig_expected{0.035, 0.024, 0.019, 0.019};
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(fit.sigma2[i] - sig_expected[i]) < 1e-3);
  check_trace_ascends(fit.log_lik_trace);
}

TEST_CASE("h0_fit_case3: inactive variance order matches the unknown-variances fit") {
  // With the antitonic constraint slack at the optimum the two null fits
  // solve the same score equations.
  const SufficientStats stats =
      stats_from_summary({20, 25}, {0.4, 0.55}, {0.9, 0.3});
  const NullFit unknown = h0_fit_case2(stats, tight(Scenario::UnknownVariances));
  const NullFit ordered = h0_fit_case3(stats, tight(Scenario::OrderedVariances));
  const double d0 = stats.mean[0] - unknown.mu0;
  const double d1 = stats.mean[1] - unknown.mu0;
  REQUIRE(stats.var[0] + d0 * d0 >= stats.var[1] + d1 * d1);
  CHECK(ordered.mu0 == doctest::Approx(unknown.mu0).epsilon(1e-7));
  for (int i = 0; i < 2; ++i)
    CHECK(ordered.sigma2[i] == doctest::Approx(unknown.sigma2[i]).epsilon(1e-6));
}

TEST_CASE("h0_fit_case3 matches the constrained grid oracle") {
  std::mt19937_64 rng(1020);
  for (int inst = 0; inst < 40; ++inst) {
    const SufficientStats stats = random_stats(rng, 3, 5, 40, 0.5, 0.2, 1.5);
    const NullFit fit = h0_fit_case3(stats, tight(Scenario::OrderedVariances));
    const double range = stats.max_mean() - stats.min_mean();
    const double var_lo = *std::min_element(stats.var.begin(), stats.var.end());
    const double var_hi =
        *std::max_element(stats.var.begin(), stats.var.end()) + range * range;
    const oracle::ConeMax grid = oracle::cone_grid_max_common_mean(
        stats, {stats.min_mean(), stats.max_mean(), 120}, {var_lo, var_hi, 120});
    CHECK(fit.log_lik >= grid.value - 1e-6);
    CHECK(fit.mu0 >= stats.min_mean());
    CHECK(fit.mu0 <= stats.max_mean());

    // sigma2 is exactly the antitonic regression at mu0
    std::vector<double> s2(3);
    for (int i = 0; i < 3; ++i) {
      const double d = stats.mean[i] - fit.mu0;
      s2[i] = stats.var[i] + d * d;
    }
    const std::vector<double> anti =
        antitonic_regression({s2, std::vector<double>(stats.n.begin(), stats.n.end())})
            .fitted;
    for (int i = 0; i < 3; ++i) CHECK(fit.sigma2[i] == anti[i]);
  }
}

TEST_CASE("equal variances with inactive constraints reduce every fit to case 1") {
  const SufficientStats stats =
      stats_from_summary({8, 12, 9}, {0.1, 0.5, 0.8}, {0.6, 0.6, 0.6});
  const RestrictedFit f1 = fit_case1(stats, tight(Scenario::KnownRatio));
  const RestrictedFit f2 = fit_case2(stats, tight(Scenario::UnknownVariances));
  const RestrictedFit f3 = fit_case3(stats, tight(Scenario::OrderedVariances));
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(f2.mu[i] - f1.mu[i]) < 1e-8);
    CHECK(std::abs(f3.mu[i] - f1.mu[i]) < 1e-8);
    CHECK(std::abs(f2.sigma2[i] - f1.sigma2[i]) < 1e-8);
    CHECK(std::abs(f3.sigma2[i] - f1.sigma2[i]) < 1e-8);
  }
}

TEST_CASE("all-equal means short-circuit to zero iterations") {
  const SufficientStats stats =
      stats_from_summary({4, 6, 5}, {0.7, 0.7, 0.7}, {0.4, 0.9, 0.2});
  const RestrictedFit f2 = fit_case2(stats, config(Scenario::UnknownVariances));
  CHECK(f2.iterations == 0);
  CHECK(f2.mu == stats.mean);
  CHECK(f2.sigma2 == stats.var);

  const RestrictedFit f3 = fit_case3(stats, config(Scenario::OrderedVariances));
  CHECK(f3.iterations == 0);
  CHECK(f3.mu == stats.mean);
  for (int i = 1; i < 3; ++i) CHECK(f3.sigma2[i - 1] >= f3.sigma2[i]);

  const NullFit n2 = h0_fit_case2(stats, config(Scenario::UnknownVariances));
  CHECK(n2.iterations == 0);
  CHECK(n2.mu0 == 0.7);
}

TEST_CASE("decreasing mean direction mirrors the increasing fit") {
  std::mt19937_64 rng(1121);
  for (int rep = 0; rep < 50; ++rep) {
    const SufficientStats stats = random_stats(rng, 4);
    SufficientStats negated = stats;
    for (double& m : negated.mean) m = -m;

    for (Scenario sc : {Scenario::UnknownVariances, Scenario::OrderedVariances}) {
      ScenarioConfig inc = tight(sc);
      ScenarioConfig dec = tight(sc);
      dec.mean_order = OrderDirection::Decreasing;
      const RestrictedFit up = sc == Scenario::UnknownVariances
                                   ? fit_case2(stats, inc)
                                   : fit_case3(stats, inc);
      const RestrictedFit down = sc == Scenario::UnknownVariances
                                     ? fit_case2(negated, dec)
                                     : fit_case3(negated, dec);
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(down.mu[i] == doctest::Approx(-up.mu[i]).epsilon(1e-12));
        CHECK(down.sigma2[i] == doctest::Approx(up.sigma2[i]).epsilon(1e-12));
      }
      CHECK(down.log_lik == doctest::Approx(up.log_lik).epsilon(1e-12));
    }
  }
}

TEST_CASE("aim state boxes contain the data and the iterates") {
  std::mt19937_64 rng(1222);
  for (int rep = 0; rep < 200; ++rep) {
    const SufficientStats stats = random_stats(rng, 3);
    const AimState aim = make_aim_state(stats);
    CHECK(aim.nu_lower <= aim.nu_upper);
    CHECK(-aim.half_width <= stats.min_mean());
    CHECK(stats.max_mean() <= aim.half_width);

    const RestrictedFit fit = fit_case2(stats, tight(Scenario::UnknownVariances));
    for (double s : fit.sigma2) {
      CHECK(1.0 / s >= aim.nu_lower - 1e-12);
      CHECK(1.0 / s <= aim.nu_upper + 1e-12);
    }
  }
}

TEST_CASE("two-step and aim stopping rules land on the same fit") {
  const SufficientStats stats = table1_stats();
  ScenarioConfig aim = config(Scenario::UnknownVariances, 1e-9);
  ScenarioConfig two_step = aim;
  two_step.solver = Solver::TwoStep;
  const RestrictedFit a = fit_case2(stats, aim);
  const RestrictedFit b = fit_case2(stats, two_step);
  for (int i = 0; i < 4; ++i) CHECK(a.mu[i] == doctest::Approx(b.mu[i]).epsilon(1e-6));
}

TEST_CASE("log_likelihood guards") {
  const SufficientStats stats = stats_from_summary({3, 3}, {0.0, 1.0}, {0.5, 0.5});
  CHECK(log_likelihood(stats, {0.0, 1.0}, {1.0, 0.0}) ==
        -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(log_likelihood(stats, std::vector<double>{0.0}, {1.0, 1.0}),
                  InvalidInput);
}
