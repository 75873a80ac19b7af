// Command-line front end: ingest grouped data, fit the selected scenario,
// compute the matching test statistic and bootstrap its null distribution.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "isostat/bootstrap.hpp"
#include "isostat/core.hpp"
#include "isostat/estimation.hpp"
#include "isostat/io.hpp"
#include "isostat/lrt.hpp"
#include "isostat/version.hpp"

namespace {

using namespace isostat;

struct RunOptions {
  std::string input;
  std::string scenario;
  std::string sigma2;
  std::vector<double> ratios;
  std::string statistic = "auto";
  std::string bootstrap = "parametric";
  int replicates = 20000;
  std::uint64_t seed = 1;
  double tol = 1e-3;
  int max_iter = 1000;
  std::string solver = "aim";
  std::string direction = "inc";
  std::string format = "json";
  std::string generation = "sufficient";
  int workers = 0;
  bool strict = false;
  std::string output;
  std::string dump_replicates;
};

struct GroupOptions {
  std::string input;
  std::optional<int> cap;
  std::string output;
};

Scenario parse_scenario(const std::string& s) {
  if (s == "known-ratio") return Scenario::KnownRatio;
  if (s == "unknown") return Scenario::UnknownVariances;
  if (s == "ordered") return Scenario::OrderedVariances;
  throw InvalidInput("unknown scenario: " + s);
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open output file: " + path);
  out << content;
}

void dump_values(const std::string& path, const BootstrapResult& result) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open dump file: " + path);
  for (double v : result.replicate_values)
    if (!std::isnan(v)) out << format_double(v) << '\n';
}

StatisticKind resolve_statistic(const RunOptions& opt, const ScenarioConfig& cfg) {
  if (opt.statistic == "auto") {
    switch (cfg.scenario) {
      case Scenario::KnownRatio:
        return opt.sigma2.empty() ? StatisticKind::EBarSq : StatisticKind::ChiBarSq;
      case Scenario::UnknownVariances: return StatisticKind::Neg2LogLambdaTilde;
      case Scenario::OrderedVariances: return StatisticKind::Neg2LogLambdaI;
    }
  }
  if (opt.statistic == "chibar") {
    if (cfg.scenario != Scenario::KnownRatio || opt.sigma2.empty())
      throw InvalidInput("chibar needs --scenario known-ratio and --sigma2");
    return StatisticKind::ChiBarSq;
  }
  if (opt.statistic == "ebar") {
    if (cfg.scenario != Scenario::KnownRatio)
      throw InvalidInput("ebar needs --scenario known-ratio");
    return StatisticKind::EBarSq;
  }
  if (opt.statistic == "lrt") {
    if (cfg.scenario == Scenario::KnownRatio)
      throw InvalidInput("lrt needs --scenario unknown or ordered");
    return cfg.scenario == Scenario::UnknownVariances
               ? StatisticKind::Neg2LogLambdaTilde
               : StatisticKind::Neg2LogLambdaI;
  }
  throw InvalidInput("unknown statistic: " + opt.statistic);
}

int run_command(const RunOptions& opt) {
  Dataset data = read_dataset_file(opt.input);
  const SufficientStats& stats = data.stats;
  if (stats.size() < 2)
    throw InvalidInput("testing needs at least 2 levels");

  ScenarioConfig cfg;
  cfg.scenario = parse_scenario(opt.scenario);
  cfg.tol = opt.tol;
  cfg.max_iter = opt.max_iter;
  cfg.solver = opt.solver == "two-step" ? Solver::TwoStep : Solver::Aim;
  cfg.mean_order = opt.direction == "dec" ? OrderDirection::Decreasing
                                          : OrderDirection::Increasing;

  // Resolve the known variance, if any. "pooled" follows the application
  // convention: the total variance of the pooled data acts as the known
  // common variance.
  std::optional<double> sigma2_known;
  if (!opt.sigma2.empty()) {
    if (cfg.scenario != Scenario::KnownRatio)
      throw InvalidInput("--sigma2 applies to --scenario known-ratio only");
    if (opt.sigma2 == "pooled") {
      sigma2_known = pooled_total_variance(stats);
    } else {
      try {
        sigma2_known = std::stod(opt.sigma2);
      } catch (const std::exception&) {
        throw InvalidInput("--sigma2 must be a number or \"pooled\"");
      }
    }
    if (!(*sigma2_known > 0.0)) throw InvalidInput("--sigma2 must be positive");
  }
  if (!opt.ratios.empty()) cfg.ratios = opt.ratios;

  const StatisticKind kind = resolve_statistic(opt, cfg);
  if (kind == StatisticKind::ChiBarSq) {
    for (double c : cfg.ratios)
      if (c != 1.0)
        throw InvalidInput("chibar assumes unit ratios; use ebar for general ratios");
    cfg.ratios.clear();
    cfg.sigma2 = sigma2_known;
  } else if (kind == StatisticKind::EBarSq) {
    // With a known scale but no explicit ratios, take c_i = var_i / sigma2.
    if (cfg.ratios.empty() && sigma2_known) {
      cfg.ratios.resize(stats.size());
      for (std::size_t i = 0; i < stats.size(); ++i)
        cfg.ratios[i] = stats.var[i] / *sigma2_known;
    }
    cfg.sigma2.reset();
  }
  cfg.validate(stats.size());

  std::vector<std::string> warnings;
  if (cfg.scenario == Scenario::UnknownVariances && !check_condition1(stats))
    warnings.push_back("uniqueness of the unknown-variances fit is not certified "
                       "(condition1 fails)");
  if (cfg.scenario == Scenario::OrderedVariances && !check_condition2(stats))
    warnings.push_back("uniqueness of the ordered-variances fit is not certified "
                       "(condition2 fails)");
  if (cfg.scenario == Scenario::UnknownVariances && !check_profile_uniqueness(stats))
    warnings.push_back("the common-mean profile may be multimodal "
                       "(theorem1Interval fails)");

  const TestStatistic stat = compute_statistic(kind, stats, cfg);

  const bool want_parametric = opt.bootstrap == "parametric" || opt.bootstrap == "both";
  const bool want_nonparametric =
      opt.bootstrap == "nonparametric" || opt.bootstrap == "both";
  if (want_nonparametric && !data.has_raw_data())
    throw InvalidInput("non-parametric bootstrap needs long-format (raw) input");

  BootstrapPlan plan;
  plan.replicates = opt.replicates;
  plan.seed = opt.seed;
  plan.statistic = kind;
  plan.scenario = cfg.scenario;
  plan.generation = opt.generation == "raw" ? Generation::RawSamples
                                            : Generation::SufficientOnly;
  plan.workers = opt.workers;

  std::optional<BootstrapResult> parametric, nonparametric;
  if (want_parametric) {
    plan.mode = BootstrapMode::Parametric;
    parametric = parametric_bootstrap(stat.null_fit, stats.n, stat.value, cfg, plan);
  }
  if (want_nonparametric) {
    plan.mode = BootstrapMode::NonParametric;
    nonparametric =
        nonparametric_bootstrap(data.sample, stat.null_fit, stat.value, cfg, plan);
  }
  for (const auto* r : {parametric ? &*parametric : nullptr,
                        nonparametric ? &*nonparametric : nullptr}) {
    if (r && r->failures > 0.01 * r->replicates) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "bootstrap: %d of %d replicates failed to refit",
                    r->failures, r->replicates);
      warnings.push_back(buf);
    }
  }

  if (!opt.dump_replicates.empty()) {
    if (parametric && nonparametric) {
      dump_values(opt.dump_replicates + ".parametric", *parametric);
      dump_values(opt.dump_replicates + ".nonparametric", *nonparametric);
    } else if (parametric) {
      dump_values(opt.dump_replicates, *parametric);
    } else if (nonparametric) {
      dump_values(opt.dump_replicates, *nonparametric);
    }
  }

  ReportInputs inputs;
  inputs.data = &data;
  inputs.cfg = &cfg;
  inputs.statistic = &stat;
  inputs.parametric = parametric ? &*parametric : nullptr;
  inputs.nonparametric = nonparametric ? &*nonparametric : nullptr;
  inputs.plan = (want_parametric || want_nonparametric) ? &plan : nullptr;
  inputs.warnings = warnings;
  const nlohmann::ordered_json report = build_report(inputs);

  write_output(opt.output,
               opt.format == "text" ? render_text(report) : report.dump(2) + "\n");

  if (opt.strict && (!stat.null_fit.converged || !stat.alt_fit.converged)) return 3;
  return 0;
}

int group_command(const GroupOptions& opt) {
  std::ifstream in(opt.input);
  if (!in) throw InvalidInput("cannot open input file: " + opt.input);
  const auto rows = group_records(in, opt.cap);
  if (opt.output.empty()) {
    write_long_format(std::cout, rows);
  } else {
    std::ofstream out(opt.output);
    if (!out) throw InvalidInput("cannot open output file: " + opt.output);
    write_long_format(out, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Order-restricted estimation and likelihood-ratio testing "
               "for grouped normal data"};
  app.set_version_flag("--version", std::string("isostat ") + kVersion);
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "Fit, test and bootstrap a data set");
  run->add_option("input", run_opt.input, "CSV input file")->required();
  run->add_option("--scenario", run_opt.scenario, "Variance scenario")
      ->required()
      ->check(CLI::IsMember({"known-ratio", "unknown", "ordered"}));
  run->add_option("--sigma2", run_opt.sigma2,
                  "Known common variance (number or \"pooled\")");
  run->add_option("--ratios", run_opt.ratios, "Known variance ratios c_i")
      ->delimiter(',');
  run->add_option("--statistic", run_opt.statistic, "Test statistic")
      ->check(CLI::IsMember({"auto", "chibar", "ebar", "lrt"}));
  run->add_option("--bootstrap", run_opt.bootstrap, "Bootstrap mode")
      ->check(CLI::IsMember({"parametric", "nonparametric", "both", "none"}));
  run->add_option("--replicates", run_opt.replicates, "Bootstrap replicates");
  run->add_option("--seed", run_opt.seed, "RNG seed");
  run->add_option("--tol", run_opt.tol, "Convergence threshold");
  run->add_option("--max-iter", run_opt.max_iter, "Iteration cap");
  run->add_option("--solver", run_opt.solver, "Stopping rule")
      ->check(CLI::IsMember({"aim", "two-step"}));
  run->add_option("--direction", run_opt.direction, "Mean order under H1")
      ->check(CLI::IsMember({"inc", "dec"}));
  run->add_option("--format", run_opt.format, "Report format")
      ->check(CLI::IsMember({"json", "text"}));
  run->add_option("--generation", run_opt.generation,
                  "Parametric replicate generation")
      ->check(CLI::IsMember({"sufficient", "raw"}));
  run->add_option("--workers", run_opt.workers,
                  "Bootstrap worker threads (0 = auto)");
  run->add_flag("--strict", run_opt.strict, "Exit 3 on fitter non-convergence");
  run->add_option("-o,--output", run_opt.output, "Write the report to a file");
  run->add_option("--dump-replicates", run_opt.dump_replicates,
                  "Write replicate statistic values, one per line");

  GroupOptions group_opt;
  CLI::App* group =
      app.add_subcommand("group", "Aggregate per-cell records into long format");
  group->add_option("input", group_opt.input, "CSV with header cell,count,value")
      ->required();
  int cap_value = -1;
  CLI::Option* cap_opt =
      group->add_option("--cap", cap_value, "Merge counts above this level into it");
  group->add_option("-o,--output", group_opt.output, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return run_command(run_opt);
    if (cap_opt->count() > 0) group_opt.cap = cap_value;
    return group_command(group_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
