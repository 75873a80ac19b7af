#include "isostat/lrt.hpp"

#include <cmath>

namespace isostat {

namespace {

// The alternating fitters stop at a finite tolerance, so a nearly-null data
// set can leave the alternative fit a hair below the null one. Restarting
// the alternative ascent from the null point (which is feasible under the
// alternative) restores the likelihood ordering.
void ensure_alt_dominates(const SufficientStats& stats, const ScenarioConfig& cfg,
                          const NullFit& null_fit, RestrictedFit& alt_fit) {
  if (alt_fit.log_lik >= null_fit.log_lik) return;
  RestrictedFit warm =
      cfg.scenario == Scenario::UnknownVariances
          ? detail::fit_case2_from(stats, cfg, null_fit.mu0, null_fit.sigma2)
          : detail::fit_case3_from(stats, cfg, null_fit.mu0, null_fit.sigma2);
  if (warm.log_lik > alt_fit.log_lik) alt_fit = std::move(warm);
}

}  // namespace

std::string to_string(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::ChiBarSq: return "chibar";
    case StatisticKind::EBarSq: return "ebar";
    case StatisticKind::Neg2LogLambdaTilde: return "lrt-unknown";
    case StatisticKind::Neg2LogLambdaI: return "lrt-ordered";
  }
  return "unknown";
}

std::string scale_label(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::ChiBarSq: return "chi-bar-square";
    case StatisticKind::EBarSq: return "E-bar-square (0..1)";
    case StatisticKind::Neg2LogLambdaTilde:
    case StatisticKind::Neg2LogLambdaI: return "deviance (-2 log LR)";
  }
  return "unknown";
}

TestStatistic chi_bar_sq(const SufficientStats& stats, double sigma2,
                         OrderDirection mean_order) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw InvalidInput("chi_bar_sq needs a positive known variance");
  ScenarioConfig cfg;
  cfg.scenario = Scenario::KnownRatio;
  cfg.sigma2 = sigma2;
  cfg.mean_order = mean_order;

  TestStatistic t;
  t.kind = StatisticKind::ChiBarSq;
  t.null_fit = h0_mean_case1(stats, cfg);
  t.alt_fit = fit_case1(stats, cfg);
  double sum = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = t.alt_fit.mu[i] - t.null_fit.mu0;
    sum += stats.n[i] * d * d;
  }
  t.value = sum / sigma2;
  return t;
}

TestStatistic e_bar_sq(const SufficientStats& stats, const std::vector<double>& ratios,
                       OrderDirection mean_order) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::KnownRatio;
  cfg.ratios = ratios;
  cfg.mean_order = mean_order;
  const std::vector<double> c = cfg.resolved_ratios(stats.size());

  TestStatistic t;
  t.kind = StatisticKind::EBarSq;
  t.null_fit = h0_mean_case1(stats, cfg);
  t.alt_fit = fit_case1(stats, cfg);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double w = stats.n[i] / c[i];
    const double d = t.alt_fit.mu[i] - t.null_fit.mu0;
    const double e = stats.mean[i] - t.null_fit.mu0;
    num += w * d * d;
    den += w * (stats.var[i] + e * e);
  }
  if (!(den > 0.0)) throw DegenerateVariance("E-bar-square denominator is zero");
  t.value = num / den;
  return t;
}

TestStatistic lrt_unknown(const SufficientStats& stats, const ScenarioConfig& cfg) {
  if (cfg.scenario != Scenario::UnknownVariances)
    throw InvalidInput("lrt_unknown requires the unknown-variances scenario");
  TestStatistic t;
  t.kind = StatisticKind::Neg2LogLambdaTilde;
  t.null_fit = h0_fit_case2(stats, cfg);
  t.alt_fit = fit_case2(stats, cfg);
  ensure_alt_dominates(stats, cfg, t.null_fit, t.alt_fit);
  double sum = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (!(t.null_fit.sigma2[i] > 0.0) || !(t.alt_fit.sigma2[i] > 0.0))
      throw DegenerateVariance("non-positive fitted variance");
    sum += stats.n[i] * std::log(t.null_fit.sigma2[i] / t.alt_fit.sigma2[i]);
  }
  t.value = sum;
  return t;
}

TestStatistic lrt_ordered(const SufficientStats& stats, const ScenarioConfig& cfg) {
  if (cfg.scenario != Scenario::OrderedVariances)
    throw InvalidInput("lrt_ordered requires the ordered-variances scenario");
  TestStatistic t;
  t.kind = StatisticKind::Neg2LogLambdaI;
  t.null_fit = h0_fit_case3(stats, cfg);
  t.alt_fit = fit_case3(stats, cfg);
  ensure_alt_dominates(stats, cfg, t.null_fit, t.alt_fit);
  for (std::size_t i = 0; i < stats.size(); ++i)
    if (!(t.null_fit.sigma2[i] > 0.0) || !(t.alt_fit.sigma2[i] > 0.0))
      throw DegenerateVariance("non-positive fitted variance");
  t.value = 2.0 * (t.alt_fit.log_lik - t.null_fit.log_lik);
  return t;
}

TestStatistic compute_statistic(StatisticKind kind, const SufficientStats& stats,
                                const ScenarioConfig& cfg) {
  switch (kind) {
    case StatisticKind::ChiBarSq:
      if (cfg.scenario != Scenario::KnownRatio || !cfg.sigma2)
        throw InvalidInput("chibar needs the known-ratio scenario with sigma2");
      return chi_bar_sq(stats, *cfg.sigma2, cfg.mean_order);
    case StatisticKind::EBarSq:
      if (cfg.scenario != Scenario::KnownRatio)
        throw InvalidInput("ebar needs the known-ratio scenario");
      return e_bar_sq(stats, cfg.resolved_ratios(stats.size()), cfg.mean_order);
    case StatisticKind::Neg2LogLambdaTilde: return lrt_unknown(stats, cfg);
    case StatisticKind::Neg2LogLambdaI: return lrt_ordered(stats, cfg);
  }
  throw InvalidInput("unknown statistic kind");
}

}  // namespace isostat
