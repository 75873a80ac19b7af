#pragma once

#include <optional>
#include <vector>

#include "isostat/core.hpp"

namespace isostat {

/// Alternative-hypothesis fit: isotonic means plus per-level variances.
struct RestrictedFit {
  std::vector<double> mu;
  std::vector<double> sigma2;
  Scenario scenario = Scenario::KnownRatio;
  int iterations = 0;
  bool converged = true;
  double log_lik = 0.0;
  /// Condition 1 (unknown variances) or Condition 2 (ordered variances)
  /// when the scenario has such a certificate; empty for the known-ratio case.
  std::optional<bool> uniqueness_certificate;
  /// Group log-likelihood after each sweep (feasible iterates only).
  std::vector<double> log_lik_trace;
  double final_mu_delta = 0.0;
  double final_sigma2_delta = 0.0;
};

/// Null-hypothesis fit: common mean plus per-level variances.
struct NullFit {
  double mu0 = 0.0;
  std::vector<double> sigma2;
  Scenario scenario = Scenario::KnownRatio;
  int iterations = 0;
  bool converged = true;
  double log_lik = 0.0;
  std::vector<double> log_lik_trace;
};

/// Compact boxes for the alternating iterations: means are searched on
/// [-half_width, half_width] and precisions on [nu_lower, nu_upper]. The
/// box endpoints come from the range of s2_i(theta) = var_i + (mean_i -
/// theta)^2 over theta in [min mean, max mean], so every iterate of the
/// alternating fitters stays inside.
struct AimState {
  double half_width = 0.0;
  double nu_lower = 0.0;
  double nu_upper = 0.0;
};

AimState make_aim_state(const SufficientStats& stats);

/// Normal group log-likelihood with the additive constant dropped:
/// sum_i -n_i/2 [ln sigma2_i + (var_i + (mean_i - mu_i)^2) / sigma2_i].
/// Returns -infinity when some sigma2_i <= 0.
double log_likelihood(const SufficientStats& stats, const std::vector<double>& mu,
                      const std::vector<double>& sigma2);
double log_likelihood(const SufficientStats& stats, double mu,
                      const std::vector<double>& sigma2);

/// Known variance ratio: means by one weighted isotonic regression with
/// weights n_i / c_i; common variance either supplied or profiled out.
RestrictedFit fit_case1(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Completely unknown variances: alternates the isotonic regression of the
/// means (weights n_i / sigma2_i) with the exact variance update
/// sigma2_i = var_i + (mean_i - mu_i)^2. Stops on the mean difference
/// (two-step) or the likelihood difference (AIM, default).
RestrictedFit fit_case2(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Simultaneously ordered means (non-decreasing) and variances
/// (non-increasing): alternates the isotonic mean step with an antitonic
/// regression of var_i + (mean_i - mu_i)^2 weighted by n_i.
RestrictedFit fit_case3(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Known-ratio null fit: precision-weighted mean, variance per the profile
/// estimate when sigma2 is not supplied.
NullFit h0_mean_case1(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Unknown-variances null fit: maximises the profile likelihood of the
/// common mean over [min mean, max mean]. Coordinate ascent from the
/// Graybill-Deal start, then a safeguarded Newton/bisection polish on the
/// profile score; a coarse scan locates the global basin when the
/// uniqueness interval check fails or the ascent hits the iteration cap.
NullFit h0_fit_case2(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Ordered-variances null fit: alternates the precision-weighted common
/// mean with the antitonic regression of var_i + (mean_i - mu)^2, starting
/// from the order-restricted Graybill-Deal mean. The loop ends on a
/// variance update, so the returned sigma2 is exactly that antitonic fit.
NullFit h0_fit_case3(const SufficientStats& stats, const ScenarioConfig& cfg);

/// Sufficient condition for uniqueness of the unknown-variances MLE:
/// var_i > max{(mean_i - min mean)^2, (mean_i - max mean)^2} for all i.
bool check_condition1(const SufficientStats& stats);

/// Sufficient condition for uniqueness of the ordered-variances MLE:
/// min_i var_i > 2 (max mean - min mean).
bool check_condition2(const SufficientStats& stats);

/// True when [min mean, max mean] lies inside
/// [max_i(mean_i - sd_i), min_i(mean_i + sd_i)], which makes the profile
/// likelihood of the common mean strictly concave on the bracket.
bool check_profile_uniqueness(const SufficientStats& stats);

namespace detail {

// Alternating fits started from a constant mean vector, e.g. from a null
// fit. Ascent from a feasible point keeps the fitted likelihood at least
// as large as the start's; the deviance statistics rely on this.
RestrictedFit fit_case2_from(const SufficientStats& stats, const ScenarioConfig& cfg,
                             double mu_const, const std::vector<double>& sigma2);
RestrictedFit fit_case3_from(const SufficientStats& stats, const ScenarioConfig& cfg,
                             double mu_const, const std::vector<double>& sigma2);

}  // namespace detail

}  // namespace isostat
