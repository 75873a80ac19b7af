#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isostat {

/// Thrown when an input violates a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a fit would have to divide by a zero within-group variance.
class DegenerateVariance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown for configurations that are intentionally out of scope.
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raw responses grouped by the ordered levels of the explanatory variable.
///
/// Levels must be strictly increasing and every level must hold at least one
/// observation. A single level is a valid sample for summarisation; the
/// testing pipeline requires at least two (enforced by the CLI).
struct GroupedSample {
  std::vector<double> levels;
  std::vector<std::vector<double>> observations;

  std::size_t level_count() const noexcept { return levels.size(); }
  long total_count() const noexcept;
  void validate() const;
};

/// Per-level sufficient statistics. `var` uses divisor n_i; `var_unbiased`
/// uses divisor n_i - 1 and is NaN for singleton levels. Everything the
/// estimators and statistics need is a function of (n, mean, var).
struct SufficientStats {
  std::vector<int> n;
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> var_unbiased;
  long total = 0;

  std::size_t size() const noexcept { return n.size(); }
  double min_mean() const;
  double max_mean() const;
  bool all_means_equal() const;
};

/// Exact reduction of a sample to its per-level moments.
SufficientStats summarize(const GroupedSample& sample);

/// Builds stats from already-tabulated (n, mean, var) rows.
SufficientStats stats_from_summary(std::vector<int> n, std::vector<double> mean,
                                   std::vector<double> var);

/// Variance of the pooled data by the law of total variance:
/// sum_i n_i (var_i + (mean_i - m)^2) / N with m the pooled mean.
double pooled_total_variance(const SufficientStats& stats);

enum class Scenario { KnownRatio, UnknownVariances, OrderedVariances };
enum class Solver { TwoStep, Aim };
enum class OrderDirection { Increasing, Decreasing };

std::string to_string(Scenario scenario);
std::string to_string(Solver solver);
std::string to_string(OrderDirection direction);

/// Fitting configuration shared by the estimators, tests and CLI.
///
/// `ratios` and `sigma2` only apply to the known-ratio scenario. The mean
/// order defaults to increasing; decreasing means are handled by negating
/// the responses around every fit. The variance order (ordered-variances
/// scenario) is fixed to decreasing.
struct ScenarioConfig {
  Scenario scenario = Scenario::UnknownVariances;
  std::vector<double> ratios;
  std::optional<double> sigma2;
  OrderDirection mean_order = OrderDirection::Increasing;
  OrderDirection variance_order = OrderDirection::Decreasing;
  double tol = 1e-3;
  int max_iter = 1000;
  Solver solver = Solver::Aim;

  void validate(std::size_t k) const;

  /// Ratios to use for k levels: the configured vector, or all ones.
  std::vector<double> resolved_ratios(std::size_t k) const;
};

}  // namespace isostat
