#pragma once

#include <cstdint>
#include <vector>

#include "isostat/core.hpp"
#include "isostat/estimation.hpp"
#include "isostat/lrt.hpp"

namespace isostat {

enum class BootstrapMode { Parametric, NonParametric };

/// How parametric replicates are produced. RawSamples draws n_i responses
/// per level and reduces them; SufficientOnly draws the replicate moments
/// directly (mean from a normal, variance from a scaled chi-square), which
/// is distributionally identical under normality and O(k) per replicate.
enum class Generation { RawSamples, SufficientOnly };

struct BootstrapPlan {
  BootstrapMode mode = BootstrapMode::Parametric;
  int replicates = 20000;
  std::uint64_t seed = 1;
  StatisticKind statistic = StatisticKind::Neg2LogLambdaTilde;
  Scenario scenario = Scenario::UnknownVariances;
  Generation generation = Generation::SufficientOnly;
  /// Worker threads; <= 0 means use the hardware concurrency. The replicate
  /// RNG streams are keyed by (seed, replicate index) and the exceedance
  /// reduction is order-independent, so results do not depend on this.
  int workers = 1;

  void validate() const;
};

struct BootstrapResult {
  /// #(replicate > observed) / #valid replicates, strict inequality.
  double p_value = 0.0;
  /// Never-zero variant (#exceeding + 1) / (#valid + 1).
  double p_value_add_one = 0.0;
  double observed = 0.0;
  int replicates = 0;
  /// Replicates whose refit failed or did not converge; these are excluded
  /// from both the numerator and the denominator of p_value.
  int failures = 0;
  /// One entry per replicate in replicate order; failures are NaN.
  std::vector<double> replicate_values;

  int valid_replicates() const noexcept { return replicates - failures; }
};

/// Parametric bootstrap of the null distribution: replicates are generated
/// from N(mu0, sigma2_i(H0)), refitted under both hypotheses and compared
/// against the observed statistic. Deterministic for a fixed seed.
BootstrapResult parametric_bootstrap(const NullFit& null_fit,
                                     const std::vector<int>& counts, double observed,
                                     const ScenarioConfig& cfg,
                                     const BootstrapPlan& plan);

/// Non-parametric bootstrap: pools the standardized residuals
/// (y_ij - mean_i) / sd_i across all levels, resamples k simple random
/// samples with replacement of sizes n_i, rescales them with the null-fit
/// standard deviations around mu0, then refits. Needs raw data and n_i >= 2.
BootstrapResult nonparametric_bootstrap(const GroupedSample& sample,
                                        const NullFit& null_fit, double observed,
                                        const ScenarioConfig& cfg,
                                        const BootstrapPlan& plan);

/// The pooled standardized residual vector used by the non-parametric
/// algorithm, in level-major order. Its mean is ~0 and its variance ~1.
std::vector<double> standardized_residual_pool(const GroupedSample& sample);

}  // namespace isostat
