#include "isostat/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace isostat {

namespace {

bool finite(double x) { return std::isfinite(x); }

}  // namespace

long GroupedSample::total_count() const noexcept {
  long n = 0;
  for (const auto& obs : observations) n += static_cast<long>(obs.size());
  return n;
}

void GroupedSample::validate() const {
  if (levels.empty()) throw InvalidInput("sample has no levels");
  if (levels.size() != observations.size())
    throw InvalidInput("levels and observations differ in length");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!finite(levels[i])) throw InvalidInput("non-finite level value");
    if (i > 0 && !(levels[i - 1] < levels[i]))
      throw InvalidInput("levels must be strictly increasing");
    if (observations[i].empty())
      throw InvalidInput("level " + std::to_string(i) + " has no observations");
    for (double y : observations[i])
      if (!finite(y)) throw InvalidInput("non-finite observation");
  }
}

double SufficientStats::min_mean() const {
  return *std::min_element(mean.begin(), mean.end());
}

double SufficientStats::max_mean() const {
  return *std::max_element(mean.begin(), mean.end());
}

bool SufficientStats::all_means_equal() const {
  for (std::size_t i = 1; i < mean.size(); ++i)
    if (mean[i] != mean[0]) return false;
  return true;
}

SufficientStats summarize(const GroupedSample& sample) {
  sample.validate();
  const std::size_t k = sample.level_count();
  SufficientStats s;
  s.n.resize(k);
  s.mean.resize(k);
  s.var.resize(k);
  s.var_unbiased.resize(k);
  s.total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& obs = sample.observations[i];
    const double ni = static_cast<double>(obs.size());
    double sum = 0.0;
    for (double y : obs) sum += y;
    const double m = sum / ni;
    double ss = 0.0;
    for (double y : obs) ss += (y - m) * (y - m);
    s.n[i] = static_cast<int>(obs.size());
    s.mean[i] = m;
    s.var[i] = ss / ni;
    s.var_unbiased[i] =
        obs.size() > 1 ? ss / (ni - 1.0) : std::numeric_limits<double>::quiet_NaN();
    s.total += static_cast<long>(obs.size());
  }
  return s;
}

SufficientStats stats_from_summary(std::vector<int> n, std::vector<double> mean,
                                   std::vector<double> var) {
  if (n.empty()) throw InvalidInput("summary has no levels");
  if (n.size() != mean.size() || n.size() != var.size())
    throw InvalidInput("summary columns differ in length");
  SufficientStats s;
  s.n = std::move(n);
  s.mean = std::move(mean);
  s.var = std::move(var);
  s.var_unbiased.resize(s.n.size());
  s.total = 0;
  for (std::size_t i = 0; i < s.n.size(); ++i) {
    if (s.n[i] < 1) throw InvalidInput("level count must be at least 1");
    if (!finite(s.mean[i])) throw InvalidInput("non-finite level mean");
    if (!finite(s.var[i]) || s.var[i] < 0.0)
      throw InvalidInput("level variance must be finite and non-negative");
    const double ni = static_cast<double>(s.n[i]);
    s.var_unbiased[i] = s.n[i] > 1 ? s.var[i] * ni / (ni - 1.0)
                                   : std::numeric_limits<double>::quiet_NaN();
    s.total += s.n[i];
  }
  return s;
}

double pooled_total_variance(const SufficientStats& stats) {
  if (stats.size() == 0) throw InvalidInput("empty stats");
  if (stats.total < 2) throw InvalidInput("pooled variance needs N >= 2");
  const double total = static_cast<double>(stats.total);
  double pooled_mean = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i)
    pooled_mean += stats.n[i] * stats.mean[i];
  pooled_mean /= total;
  double v = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double d = stats.mean[i] - pooled_mean;
    v += stats.n[i] * (stats.var[i] + d * d);
  }
  return v / total;
}

std::string to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::KnownRatio: return "known-ratio";
    case Scenario::UnknownVariances: return "unknown";
    case Scenario::OrderedVariances: return "ordered";
  }
  return "unknown";
}

std::string to_string(Solver solver) {
  return solver == Solver::Aim ? "aim" : "two-step";
}

std::string to_string(OrderDirection direction) {
  return direction == OrderDirection::Increasing ? "increasing" : "decreasing";
}

void ScenarioConfig::validate(std::size_t k) const {
  if (tol <= 0.0) throw InvalidInput("tol must be positive");
  if (max_iter < 1) throw InvalidInput("max_iter must be at least 1");
  if (variance_order != OrderDirection::Decreasing)
    throw Unsupported("increasing variance order is not supported");
  if (scenario == Scenario::KnownRatio) {
    if (!ratios.empty() && ratios.size() != k)
      throw InvalidInput("ratios length does not match the number of levels");
    for (double c : ratios)
      if (!(c > 0.0) || !std::isfinite(c))
        throw InvalidInput("ratios must be positive");
    if (sigma2 && (!(*sigma2 > 0.0) || !std::isfinite(*sigma2)))
      throw InvalidInput("sigma2 must be positive");
  } else {
    if (!ratios.empty())
      throw InvalidInput("ratios apply to the known-ratio scenario only");
    if (sigma2)
      throw InvalidInput("sigma2 applies to the known-ratio scenario only");
  }
}

std::vector<double> ScenarioConfig::resolved_ratios(std::size_t k) const {
  if (ratios.empty()) return std::vector<double>(k, 1.0);
  if (ratios.size() != k)
    throw InvalidInput("ratios length does not match the number of levels");
  return ratios;
}

}  // namespace isostat
