#include "isostat/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isostat/isotonic.hpp"

namespace isostat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void require_positive_variances(const SufficientStats& stats) {
  for (double v : stats.var)
    if (!(v > 0.0))
      throw DegenerateVariance("a level has zero within-group variance");
}

void require_replicated_levels(const SufficientStats& stats) {
  for (int ni : stats.n)
    if (ni < 2) throw InvalidInput("every level needs at least 2 observations");
}

SufficientStats negate_means(SufficientStats stats) {
  for (double& m : stats.mean) m = -m;
  return stats;
}

// Box for the variance updates, in sigma^2 space. Computed directly (not via
// the reciprocal precisions) so that clamping is bit-exact at the endpoints.
struct VarianceBox {
  double lo;
  double hi;
};

VarianceBox variance_box(const SufficientStats& stats) {
  const double lo_mean = stats.min_mean();
  const double hi_mean = stats.max_mean();
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double dlo = stats.mean[i] - lo_mean;
    const double dhi = stats.mean[i] - hi_mean;
    const double dev2 = std::max(dlo * dlo, dhi * dhi);
    lo = std::min(lo, stats.var[i]);
    hi = std::max(hi, stats.var[i] + dev2);
  }
  return {lo, hi};
}

// Alternating fit for the unknown-variances model from a given start point.
RestrictedFit case2_core(const SufficientStats& stats, const ScenarioConfig& cfg,
                         std::vector<double> mu, std::vector<double> sigma2) {
  RestrictedFit fit;
  fit.scenario = Scenario::UnknownVariances;
  fit.uniqueness_certificate = check_condition1(stats);
  if (stats.all_means_equal()) {
    fit.mu = stats.mean;
    fit.sigma2 = stats.var;
    fit.log_lik = log_likelihood(stats, fit.mu, fit.sigma2);
    fit.log_lik_trace = {fit.log_lik};
    return fit;
  }

  const VarianceBox box = variance_box(stats);
  const std::size_t k = stats.size();
  // The seed can be infeasible (it is only a weight source), so the trace
  // starts at the first sweep; the seed value just feeds the l = 1 stop check.
  double ll = log_likelihood(stats, mu, sigma2);
  WeightedVector wv{stats.mean, std::vector<double>(k)};
  fit.converged = false;
  for (int l = 1; l <= cfg.max_iter; ++l) {
    for (std::size_t i = 0; i < k; ++i) wv.weights[i] = stats.n[i] / sigma2[i];
    std::vector<double> mu_new = isotonic_regression(wv).fitted;
    std::vector<double> sig_new(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double d = stats.mean[i] - mu_new[i];
      sig_new[i] = std::clamp(stats.var[i] + d * d, box.lo, box.hi);
    }
    const double ll_new = log_likelihood(stats, mu_new, sig_new);
    fit.log_lik_trace.push_back(ll_new);
    fit.final_mu_delta = max_abs_diff(mu_new, mu);
    fit.final_sigma2_delta = max_abs_diff(sig_new, sigma2);
    const bool stop = cfg.solver == Solver::TwoStep
                          ? fit.final_mu_delta <= cfg.tol
                          : std::abs(ll_new - ll) <= cfg.tol;
    mu = std::move(mu_new);
    sigma2 = std::move(sig_new);
    ll = ll_new;
    fit.iterations = l;
    if (stop) {
      fit.converged = true;
      break;
    }
  }
  fit.mu = std::move(mu);
  fit.sigma2 = std::move(sigma2);
  fit.log_lik = ll;
  return fit;
}

// Alternating fit for simultaneously ordered means and variances.
RestrictedFit case3_core(const SufficientStats& stats, const ScenarioConfig& cfg,
                         std::vector<double> mu, std::vector<double> sigma2) {
  RestrictedFit fit;
  fit.scenario = Scenario::OrderedVariances;
  fit.uniqueness_certificate = check_condition2(stats);
  const std::size_t k = stats.size();
  std::vector<double> counts(stats.n.begin(), stats.n.end());
  if (stats.all_means_equal()) {
    fit.mu = stats.mean;
    fit.sigma2 = antitonic_regression({stats.var, counts}).fitted;
    fit.log_lik = log_likelihood(stats, fit.mu, fit.sigma2);
    fit.log_lik_trace = {fit.log_lik};
    return fit;
  }

  const VarianceBox box = variance_box(stats);
  // As in the unknown-variances core, the seed may violate the cone; the
  // trace covers the feasible sweeps only.
  double ll = log_likelihood(stats, mu, sigma2);
  WeightedVector wv{stats.mean, std::vector<double>(k)};
  std::vector<double> s2(k);
  fit.converged = false;
  for (int l = 1; l <= cfg.max_iter; ++l) {
    for (std::size_t i = 0; i < k; ++i) wv.weights[i] = stats.n[i] / sigma2[i];
    std::vector<double> mu_new = isotonic_regression(wv).fitted;
    for (std::size_t i = 0; i < k; ++i) {
      const double d = stats.mean[i] - mu_new[i];
      s2[i] = stats.var[i] + d * d;
    }
    std::vector<double> sig_new = antitonic_regression({s2, counts}).fitted;
    for (double& v : sig_new) v = std::clamp(v, box.lo, box.hi);
    const double ll_new = log_likelihood(stats, mu_new, sig_new);
    fit.log_lik_trace.push_back(ll_new);
    fit.final_mu_delta = max_abs_diff(mu_new, mu);
    fit.final_sigma2_delta = max_abs_diff(sig_new, sigma2);
    const bool stop =
        cfg.solver == Solver::TwoStep
            ? fit.final_mu_delta <= cfg.tol && fit.final_sigma2_delta <= cfg.tol
            : std::abs(ll_new - ll) <= cfg.tol;
    mu = std::move(mu_new);
    sigma2 = std::move(sig_new);
    ll = ll_new;
    fit.iterations = l;
    if (stop) {
      fit.converged = true;
      break;
    }
  }
  fit.mu = std::move(mu);
  fit.sigma2 = std::move(sigma2);
  fit.log_lik = ll;
  return fit;
}

// Profile log-likelihood of the common mean (unknown variances), without
// the -N/2 constant, and its first two derivatives.
double profile_value(const SufficientStats& stats, double mu) {
  double v = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = stats.mean[i] - mu;
    v -= 0.5 * stats.n[i] * std::log(stats.var[i] + d * d);
  }
  return v;
}

double profile_score(const SufficientStats& stats, double mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = stats.mean[i] - mu;
    s += stats.n[i] * d / (stats.var[i] + d * d);
  }
  return s;
}

double profile_curvature(const SufficientStats& stats, double mu) {
  double c = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = stats.mean[i] - mu;
    const double s2 = stats.var[i] + d * d;
    c += stats.n[i] * (d * d - stats.var[i]) / (s2 * s2);
  }
  return c;
}

// Safeguarded Newton/bisection for a zero of the profile score inside
// [lo, hi]; requires score(lo) >= 0 >= score(hi). Always converges to a
// local maximum of the profile (a downward crossing of the score).
double polish_score_zero(const SufficientStats& stats, double lo, double hi,
                         double start) {
  double a = lo, b = hi;
  double x = std::clamp(start, a, b);
  for (int it = 0; it < 120; ++it) {
    const double s = profile_score(stats, x);
    if (s > 0.0)
      a = x;
    else
      b = x;
    const double c = profile_curvature(stats, x);
    double xn = c < 0.0 ? x - s / c : std::numeric_limits<double>::quiet_NaN();
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (std::abs(xn - x) <= 4.0 * std::numeric_limits<double>::epsilon() *
                                (std::abs(x) + 1.0) ||
        b - a <= 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(a) + 1.0)) {
      return xn;
    }
    x = xn;
  }
  return x;
}

std::vector<double> h0_sigma2(const SufficientStats& stats, double mu0) {
  std::vector<double> sig(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = stats.mean[i] - mu0;
    sig[i] = stats.var[i] + d * d;
  }
  return sig;
}

double precision_weighted_mean(const SufficientStats& stats,
                               const std::vector<double>& sigma2) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double w = stats.n[i] / sigma2[i];
    num += w * stats.mean[i];
    den += w;
  }
  return num / den;
}

}  // namespace

AimState make_aim_state(const SufficientStats& stats) {
  if (stats.size() == 0) throw InvalidInput("empty stats");
  AimState state;
  const double lo = stats.min_mean();
  const double hi = stats.max_mean();
  state.half_width = std::max(std::abs(lo), std::abs(hi)) + 1.0;
  const VarianceBox box = variance_box(stats);
  state.nu_lower = 1.0 / box.hi;
  state.nu_upper = box.lo > 0.0 ? 1.0 / box.lo : kInf;
  return state;
}

double log_likelihood(const SufficientStats& stats, const std::vector<double>& mu,
                      const std::vector<double>& sigma2) {
  if (mu.size() != stats.size() || sigma2.size() != stats.size())
    throw InvalidInput("parameter length does not match the number of levels");
  double ll = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (!(sigma2[i] > 0.0)) return -kInf;
    const double d = stats.mean[i] - mu[i];
    ll -= 0.5 * stats.n[i] *
          (std::log(sigma2[i]) + (stats.var[i] + d * d) / sigma2[i]);
  }
  return ll;
}

double log_likelihood(const SufficientStats& stats, double mu,
                      const std::vector<double>& sigma2) {
  return log_likelihood(stats, std::vector<double>(stats.size(), mu), sigma2);
}

RestrictedFit fit_case1(const SufficientStats& stats, const ScenarioConfig& cfg) {
  cfg.validate(stats.size());
  if (cfg.scenario != Scenario::KnownRatio)
    throw InvalidInput("fit_case1 requires the known-ratio scenario");
  if (cfg.mean_order == OrderDirection::Decreasing) {
    ScenarioConfig inc = cfg;
    inc.mean_order = OrderDirection::Increasing;
    RestrictedFit fit = fit_case1(negate_means(stats), inc);
    for (double& m : fit.mu) m = -m;
    return fit;
  }

  const std::size_t k = stats.size();
  const std::vector<double> c = cfg.resolved_ratios(k);
  WeightedVector wv{stats.mean, std::vector<double>(k)};
  for (std::size_t i = 0; i < k; ++i) wv.weights[i] = stats.n[i] / c[i];

  RestrictedFit fit;
  fit.scenario = Scenario::KnownRatio;
  fit.mu = isotonic_regression(wv).fitted;
  double s2;
  if (cfg.sigma2) {
    s2 = *cfg.sigma2;
  } else {
    s2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double d = stats.mean[i] - fit.mu[i];
      s2 += stats.n[i] / c[i] * (stats.var[i] + d * d);
    }
    s2 /= static_cast<double>(stats.total);
    if (!(s2 > 0.0))
      throw DegenerateVariance("profiled common variance is zero");
  }
  fit.sigma2.resize(k);
  for (std::size_t i = 0; i < k; ++i) fit.sigma2[i] = c[i] * s2;
  fit.log_lik = log_likelihood(stats, fit.mu, fit.sigma2);
  fit.log_lik_trace = {fit.log_lik};
  return fit;
}

RestrictedFit fit_case2(const SufficientStats& stats, const ScenarioConfig& cfg) {
  cfg.validate(stats.size());
  if (cfg.scenario != Scenario::UnknownVariances)
    throw InvalidInput("fit_case2 requires the unknown-variances scenario");
  require_positive_variances(stats);
  if (cfg.mean_order == OrderDirection::Decreasing) {
    ScenarioConfig inc = cfg;
    inc.mean_order = OrderDirection::Increasing;
    RestrictedFit fit = fit_case2(negate_means(stats), inc);
    for (double& m : fit.mu) m = -m;
    return fit;
  }
  return case2_core(stats, cfg, stats.mean, stats.var);
}

RestrictedFit fit_case3(const SufficientStats& stats, const ScenarioConfig& cfg) {
  cfg.validate(stats.size());
  if (cfg.scenario != Scenario::OrderedVariances)
    throw InvalidInput("fit_case3 requires the ordered-variances scenario");
  require_positive_variances(stats);
  if (cfg.mean_order == OrderDirection::Decreasing) {
    ScenarioConfig inc = cfg;
    inc.mean_order = OrderDirection::Increasing;
    RestrictedFit fit = fit_case3(negate_means(stats), inc);
    for (double& m : fit.mu) m = -m;
    return fit;
  }
  return case3_core(stats, cfg, stats.mean, stats.var);
}

NullFit h0_mean_case1(const SufficientStats& stats, const ScenarioConfig& cfg) {
  cfg.validate(stats.size());
  if (cfg.scenario != Scenario::KnownRatio)
    throw InvalidInput("h0_mean_case1 requires the known-ratio scenario");
  const std::size_t k = stats.size();
  const std::vector<double> c = cfg.resolved_ratios(k);

  NullFit fit;
  fit.scenario = Scenario::KnownRatio;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = stats.n[i] / c[i];
    num += w * stats.mean[i];
    den += w;
  }
  fit.mu0 = num / den;
  double s2;
  if (cfg.sigma2) {
    s2 = *cfg.sigma2;
  } else {
    s2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double d = stats.mean[i] - fit.mu0;
      s2 += stats.n[i] / c[i] * (stats.var[i] + d * d);
    }
    s2 /= static_cast<double>(stats.total);
    if (!(s2 > 0.0))
      throw DegenerateVariance("profiled common variance is zero");
  }
  fit.sigma2.resize(k);
  for (std::size_t i = 0; i < k; ++i) fit.sigma2[i] = c[i] * s2;
  fit.log_lik = log_likelihood(stats, fit.mu0, fit.sigma2);
  fit.log_lik_trace = {fit.log_lik};
  return fit;
}

NullFit h0_fit_case2(const SufficientStats& stats, const ScenarioConfig& cfg) {
  cfg.validate(stats.size());
  if (cfg.scenario != Scenario::UnknownVariances)
    throw InvalidInput("h0_fit_case2 requires the unknown-variances scenario");
  require_replicated_levels(stats);
  require_positive_variances(stats);

  NullFit fit;
  fit.scenario = Scenario::UnknownVariances;
  if (stats.all_means_equal()) {
    fit.mu0 = stats.mean[0];
    fit.sigma2 = stats.var;
    fit.log_lik = log_likelihood(stats, fit.mu0, fit.sigma2);
    fit.log_lik_trace = {fit.log_lik};
    return fit;
  }

  const double lo = stats.min_mean();
  const double hi = stats.max_mean();

  // Graybill-Deal start: precisions from the unbiased variances.
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double w = stats.n[i] / stats.var_unbiased[i];
    num += w * stats.mean[i];
    den += w;
  }
  double mu = num / den;
  double ll = log_likelihood(stats, mu, h0_sigma2(stats, mu));
  fit.log_lik_trace = {ll};

  fit.converged = false;
  for (int l = 1; l <= cfg.max_iter; ++l) {
    const double mu_new = precision_weighted_mean(stats, h0_sigma2(stats, mu));
    const double ll_new = log_likelihood(stats, mu_new, h0_sigma2(stats, mu_new));
    fit.log_lik_trace.push_back(ll_new);
    const bool stop = cfg.solver == Solver::TwoStep
                          ? std::abs(mu_new - mu) <= cfg.tol
                          : std::abs(ll_new - ll) <= cfg.tol;
    mu = mu_new;
    ll = ll_new;
    fit.iterations = l;
    if (stop) {
      fit.converged = true;
      break;
    }
  }

  // Polish to the nearest downward score crossing; when the concavity check
  // fails (or the ascent stalled) scan the bracket so a better separated
  // maximum is not missed.
  double best = polish_score_zero(stats, lo, hi, mu);
  double best_value = profile_value(stats, best);
  if (!check_profile_uniqueness(stats) || !fit.converged) {
    constexpr int kScan = 4096;
    const double step = (hi - lo) / kScan;
    double prev_x = lo;
    double prev_s = profile_score(stats, prev_x);
    for (int j = 1; j <= kScan; ++j) {
      const double x = lo + j * step;
      const double s = profile_score(stats, x);
      if (prev_s > 0.0 && s <= 0.0) {
        const double cand = polish_score_zero(stats, prev_x, x, 0.5 * (prev_x + x));
        const double value = profile_value(stats, cand);
        if (value > best_value) {
          best = cand;
          best_value = value;
        }
      }
      prev_x = x;
      prev_s = s;
    }
    fit.converged = true;
  }
  if (best_value >= profile_value(stats, mu)) mu = best;

  fit.mu0 = mu;
  fit.sigma2 = h0_sigma2(stats, mu);
  fit.log_lik = log_likelihood(stats, fit.mu0, fit.sigma2);
  if (fit.log_lik > fit.log_lik_trace.back())
    fit.log_lik_trace.push_back(fit.log_lik);
  return fit;
}

NullFit h0_fit_case3(const SufficientStats& stats, const ScenarioConfig& cfg) {
  cfg.validate(stats.size());
  if (cfg.scenario != Scenario::OrderedVariances)
    throw InvalidInput("h0_fit_case3 requires the ordered-variances scenario");
  require_replicated_levels(stats);
  require_positive_variances(stats);

  const std::size_t k = stats.size();
  std::vector<double> counts(stats.n.begin(), stats.n.end());
  NullFit fit;
  fit.scenario = Scenario::OrderedVariances;
  if (stats.all_means_equal()) {
    fit.mu0 = stats.mean[0];
    fit.sigma2 = antitonic_regression({stats.var, counts}).fitted;
    fit.log_lik = log_likelihood(stats, fit.mu0, fit.sigma2);
    fit.log_lik_trace = {fit.log_lik};
    return fit;
  }

  // Order-restricted Graybill-Deal start: isotonic regression of the
  // unbiased precisions, then their weighted mean.
  std::vector<double> prec(k);
  for (std::size_t i = 0; i < k; ++i) prec[i] = 1.0 / stats.var_unbiased[i];
  const std::vector<double> tau = isotonic_regression({prec, counts}).fitted;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    num += stats.n[i] * tau[i] * stats.mean[i];
    den += stats.n[i] * tau[i];
  }
  double mu = num / den;
  std::vector<double> sigma2 =
      antitonic_regression({h0_sigma2(stats, mu), counts}).fitted;
  double ll = log_likelihood(stats, mu, sigma2);
  fit.log_lik_trace = {ll};

  fit.converged = false;
  for (int l = 1; l <= cfg.max_iter; ++l) {
    const double mu_new = precision_weighted_mean(stats, sigma2);
    std::vector<double> sig_new =
        antitonic_regression({h0_sigma2(stats, mu_new), counts}).fitted;
    const double ll_new = log_likelihood(stats, mu_new, sig_new);
    fit.log_lik_trace.push_back(ll_new);
    const double mu_delta = std::abs(mu_new - mu);
    const double sig_delta = max_abs_diff(sig_new, sigma2);
    const bool stop = cfg.solver == Solver::TwoStep
                          ? mu_delta <= cfg.tol && sig_delta <= cfg.tol
                          : std::abs(ll_new - ll) <= cfg.tol;
    mu = mu_new;
    sigma2 = std::move(sig_new);
    ll = ll_new;
    fit.iterations = l;
    if (stop) {
      fit.converged = true;
      break;
    }
  }
  fit.mu0 = mu;
  fit.sigma2 = std::move(sigma2);
  fit.log_lik = ll;
  return fit;
}

bool check_condition1(const SufficientStats& stats) {
  if (stats.size() <= 1) return true;
  const double lo = stats.min_mean();
  const double hi = stats.max_mean();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double dlo = stats.mean[i] - lo;
    const double dhi = stats.mean[i] - hi;
    if (!(stats.var[i] > std::max(dlo * dlo, dhi * dhi))) return false;
  }
  return true;
}

bool check_condition2(const SufficientStats& stats) {
  const double range = stats.max_mean() - stats.min_mean();
  const double min_var = *std::min_element(stats.var.begin(), stats.var.end());
  return min_var > 2.0 * range;
}

bool check_profile_uniqueness(const SufficientStats& stats) {
  double left = -kInf, right = kInf;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double sd = std::sqrt(stats.var[i]);
    left = std::max(left, stats.mean[i] - sd);
    right = std::min(right, stats.mean[i] + sd);
  }
  return stats.min_mean() >= left && stats.max_mean() <= right;
}

namespace detail {

RestrictedFit fit_case2_from(const SufficientStats& stats, const ScenarioConfig& cfg,
                             double mu_const, const std::vector<double>& sigma2) {
  if (cfg.mean_order == OrderDirection::Decreasing) {
    ScenarioConfig inc = cfg;
    inc.mean_order = OrderDirection::Increasing;
    RestrictedFit fit = fit_case2_from(negate_means(stats), inc, -mu_const, sigma2);
    for (double& m : fit.mu) m = -m;
    return fit;
  }
  return case2_core(stats, cfg, std::vector<double>(stats.size(), mu_const), sigma2);
}

RestrictedFit fit_case3_from(const SufficientStats& stats, const ScenarioConfig& cfg,
                             double mu_const, const std::vector<double>& sigma2) {
  if (cfg.mean_order == OrderDirection::Decreasing) {
    ScenarioConfig inc = cfg;
    inc.mean_order = OrderDirection::Increasing;
    RestrictedFit fit = fit_case3_from(negate_means(stats), inc, -mu_const, sigma2);
    for (double& m : fit.mu) m = -m;
    return fit;
  }
  return case3_core(stats, cfg, std::vector<double>(stats.size(), mu_const), sigma2);
}

}  // namespace detail

}  // namespace isostat
