#include "isostat/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace isostat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::mt19937_64 replicate_rng(std::uint64_t seed, int replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

SufficientStats reduce_level_major(const std::vector<int>& counts,
                                   const std::vector<double>& values) {
  SufficientStats s;
  const std::size_t k = counts.size();
  s.n = counts;
  s.mean.resize(k);
  s.var.resize(k);
  s.var_unbiased.resize(k);
  s.total = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const int ni = counts[i];
    double sum = 0.0;
    for (int j = 0; j < ni; ++j) sum += values[pos + j];
    const double m = sum / ni;
    double ss = 0.0;
    for (int j = 0; j < ni; ++j) {
      const double d = values[pos + j] - m;
      ss += d * d;
    }
    s.mean[i] = m;
    s.var[i] = ss / ni;
    s.var_unbiased[i] = ni > 1 ? ss / (ni - 1.0) : kNaN;
    s.total += ni;
    pos += ni;
  }
  return s;
}

SufficientStats generate_sufficient(std::mt19937_64& rng, const NullFit& null_fit,
                                    const std::vector<int>& counts) {
  const std::size_t k = counts.size();
  SufficientStats s;
  s.n = counts;
  s.mean.resize(k);
  s.var.resize(k);
  s.var_unbiased.resize(k);
  s.total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const int ni = counts[i];
    const double sig2 = null_fit.sigma2[i];
    std::normal_distribution<double> mean_draw(null_fit.mu0, std::sqrt(sig2 / ni));
    s.mean[i] = mean_draw(rng);
    if (ni > 1) {
      std::chi_squared_distribution<double> chi(ni - 1);
      const double ss = sig2 * chi(rng);  // n_i * var_i ~ sigma2 * chisq(n_i - 1)
      s.var[i] = ss / ni;
      s.var_unbiased[i] = ss / (ni - 1.0);
    } else {
      s.var[i] = 0.0;
      s.var_unbiased[i] = kNaN;
    }
    s.total += ni;
  }
  return s;
}

SufficientStats generate_raw(std::mt19937_64& rng, const NullFit& null_fit,
                             const std::vector<int>& counts,
                             std::vector<double>& buffer) {
  buffer.clear();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::normal_distribution<double> draw(null_fit.mu0,
                                          std::sqrt(null_fit.sigma2[i]));
    for (int j = 0; j < counts[i]; ++j) buffer.push_back(draw(rng));
  }
  return reduce_level_major(counts, buffer);
}

SufficientStats generate_resampled(std::mt19937_64& rng, const NullFit& null_fit,
                                   const std::vector<int>& counts,
                                   const std::vector<double>& pool,
                                   std::vector<double>& buffer) {
  buffer.clear();
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double scale = std::sqrt(null_fit.sigma2[i]);
    for (int j = 0; j < counts[i]; ++j)
      buffer.push_back(pool[pick(rng)] * scale + null_fit.mu0);
  }
  return reduce_level_major(counts, buffer);
}

template <typename MakeStats>
BootstrapResult run_replicates(double observed, const ScenarioConfig& cfg,
                               const BootstrapPlan& plan, MakeStats make_stats) {
  const int m = plan.replicates;
  std::vector<double> values(m, kNaN);

  int workers = plan.workers;
  if (workers <= 0)
    workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, m);

  auto worker = [&](int begin, int end) {
    std::vector<double> buffer;
    for (int r = begin; r < end; ++r) {
      std::mt19937_64 rng = replicate_rng(plan.seed, r);
      try {
        const SufficientStats stats = make_stats(rng, buffer);
        const TestStatistic t = compute_statistic(plan.statistic, stats, cfg);
        if (t.null_fit.converged && t.alt_fit.converged && std::isfinite(t.value))
          values[r] = t.value;
      } catch (const std::exception&) {
        // counted as a failure below
      }
    }
  };

  if (workers == 1) {
    worker(0, m);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    const int chunk = (m + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int begin = w * chunk;
      const int end = std::min(m, begin + chunk);
      if (begin < end) threads.emplace_back(worker, begin, end);
    }
    for (auto& t : threads) t.join();
  }

  BootstrapResult result;
  result.observed = observed;
  result.replicates = m;
  int exceed = 0;
  for (double v : values) {
    if (std::isnan(v))
      ++result.failures;
    else if (v > observed)
      ++exceed;
  }
  const int valid = m - result.failures;
  if (valid == 0)
    throw DegenerateVariance("every bootstrap replicate failed to refit");
  result.p_value = static_cast<double>(exceed) / valid;
  result.p_value_add_one = static_cast<double>(exceed + 1) / (valid + 1);
  result.replicate_values = std::move(values);
  return result;
}

void check_inputs(const NullFit& null_fit, const std::vector<int>& counts,
                  const ScenarioConfig& cfg, const BootstrapPlan& plan) {
  plan.validate();
  cfg.validate(counts.size());
  if (plan.scenario != cfg.scenario)
    throw InvalidInput("bootstrap plan and config disagree on the scenario");
  if (null_fit.scenario != cfg.scenario)
    throw InvalidInput("null fit comes from a different scenario");
  if (null_fit.sigma2.size() != counts.size())
    throw InvalidInput("null fit and counts differ in length");
  for (int ni : counts)
    if (ni < 1) throw InvalidInput("level counts must be at least 1");
  for (double s : null_fit.sigma2)
    if (!(s > 0.0)) throw DegenerateVariance("null fit has a non-positive variance");
}

}  // namespace

void BootstrapPlan::validate() const {
  if (replicates < 1) throw InvalidInput("at least one replicate is required");
}

BootstrapResult parametric_bootstrap(const NullFit& null_fit,
                                     const std::vector<int>& counts, double observed,
                                     const ScenarioConfig& cfg,
                                     const BootstrapPlan& plan) {
  check_inputs(null_fit, counts, cfg, plan);
  if (plan.mode != BootstrapMode::Parametric)
    throw InvalidInput("plan mode must be parametric");
  if (plan.generation == Generation::SufficientOnly) {
    return run_replicates(observed, cfg, plan,
                          [&](std::mt19937_64& rng, std::vector<double>&) {
                            return generate_sufficient(rng, null_fit, counts);
                          });
  }
  return run_replicates(observed, cfg, plan,
                        [&](std::mt19937_64& rng, std::vector<double>& buffer) {
                          return generate_raw(rng, null_fit, counts, buffer);
                        });
}

std::vector<double> standardized_residual_pool(const GroupedSample& sample) {
  const SufficientStats stats = summarize(sample);
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(stats.total));
  for (std::size_t i = 0; i < sample.level_count(); ++i) {
    if (stats.n[i] < 2)
      throw InvalidInput("non-parametric residuals need at least 2 observations per level");
    if (!(stats.var_unbiased[i] > 0.0))
      throw DegenerateVariance("a level has zero sample variance");
    const double sd = std::sqrt(stats.var_unbiased[i]);
    for (double y : sample.observations[i])
      pool.push_back((y - stats.mean[i]) / sd);
  }
  return pool;
}

BootstrapResult nonparametric_bootstrap(const GroupedSample& sample,
                                        const NullFit& null_fit, double observed,
                                        const ScenarioConfig& cfg,
                                        const BootstrapPlan& plan) {
  const SufficientStats stats = summarize(sample);
  check_inputs(null_fit, stats.n, cfg, plan);
  if (plan.mode != BootstrapMode::NonParametric)
    throw InvalidInput("plan mode must be non-parametric");
  const std::vector<double> pool = standardized_residual_pool(sample);
  const std::vector<int> counts = stats.n;
  return run_replicates(observed, cfg, plan,
                        [&](std::mt19937_64& rng, std::vector<double>& buffer) {
                          return generate_resampled(rng, null_fit, counts, pool,
                                                    buffer);
                        });
}

}  // namespace isostat
