#pragma once

#include <string>
#include <vector>

#include "isostat/core.hpp"
#include "isostat/estimation.hpp"

namespace isostat {

/// The four homogeneity-vs-monotone-means test statistics.
///
/// ChiBarSq and EBarSq keep their classical scales (EBarSq lies in [0, 1]);
/// the two likelihood-ratio statistics are reported on the -2 log scale.
enum class StatisticKind { ChiBarSq, EBarSq, Neg2LogLambdaTilde, Neg2LogLambdaI };

std::string to_string(StatisticKind kind);

/// Short human-readable description of the statistic's scale.
std::string scale_label(StatisticKind kind);

struct TestStatistic {
  StatisticKind kind = StatisticKind::ChiBarSq;
  double value = 0.0;
  NullFit null_fit;
  RestrictedFit alt_fit;
};

/// Known common variance (unit ratios): sum_i n_i (muIso_i - mu0)^2 / sigma2,
/// with mu0 the count-weighted grand mean and muIso the isotonic fit.
TestStatistic chi_bar_sq(const SufficientStats& stats, double sigma2,
                         OrderDirection mean_order = OrderDirection::Increasing);

/// Known variance ratios, common scale unknown:
/// sum c_i^-1 n_i (muIso_i - mu0)^2 / sum c_i^-1 n_i (var_i + (mean_i - mu0)^2).
TestStatistic e_bar_sq(const SufficientStats& stats, const std::vector<double>& ratios,
                       OrderDirection mean_order = OrderDirection::Increasing);

/// Completely unknown variances: sum_i n_i ln(sigma2_i(H0) / sigma2_i(H1)).
TestStatistic lrt_unknown(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Ordered variances: twice the gap between the fitted group log-likelihoods,
/// evaluated in full (the quadratic terms do not drop out a priori here).
TestStatistic lrt_ordered(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Dispatch on the statistic kind; validates that cfg matches its scenario.
TestStatistic compute_statistic(StatisticKind kind, const SufficientStats& stats,
                                const ScenarioConfig& cfg);

}  // namespace isostat
