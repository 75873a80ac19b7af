#include "isostat/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "isostat/version.hpp"

namespace isostat {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && p == end && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [p, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && p == end;
}

std::string normalized_header(const std::string& line) {
  std::string h;
  for (const auto& f : split_csv(line)) {
    if (!h.empty()) h.push_back(',');
    h += lower(f);
  }
  return h;
}

nlohmann::ordered_json json_array(const std::vector<double>& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

nlohmann::ordered_json json_array(const std::vector<int>& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (int x : v) arr.push_back(x);
  return arr;
}

std::string short_number(const nlohmann::ordered_json& v) {
  if (v.is_null()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v.get<double>());
  return buf;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty input");
  const std::string header = normalized_header(line);

  Dataset data;
  if (header == "level,value") {
    data.format = InputFormat::Long;
    std::map<double, std::vector<double>> groups;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto fields = split_csv(line);
      double level, value;
      if (fields.size() != 2 || !parse_double(fields[0], level) ||
          !parse_double(fields[1], value))
        throw InvalidInput("malformed long-format row at line " +
                           std::to_string(line_no));
      groups[level].push_back(value);
    }
    if (groups.empty()) throw InvalidInput("no data rows");
    for (auto& [level, values] : groups) {
      data.levels.push_back(level);
      data.sample.levels.push_back(level);
      data.sample.observations.push_back(std::move(values));
    }
    data.stats = summarize(data.sample);
    return data;
  }

  if (header == "level,n,mean,var") {
    data.format = InputFormat::Summary;
    std::map<double, std::pair<int, std::pair<double, double>>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto fields = split_csv(line);
      double level, mean, var;
      int n;
      if (fields.size() != 4 || !parse_double(fields[0], level) ||
          !parse_int(fields[1], n) || !parse_double(fields[2], mean) ||
          !parse_double(fields[3], var))
        throw InvalidInput("malformed summary row at line " +
                           std::to_string(line_no));
      if (rows.count(level))
        throw InvalidInput("duplicate summary level at line " +
                           std::to_string(line_no));
      rows[level] = {n, {mean, var}};
    }
    if (rows.empty()) throw InvalidInput("no data rows");
    std::vector<int> n;
    std::vector<double> mean, var;
    for (const auto& [level, row] : rows) {
      data.levels.push_back(level);
      n.push_back(row.first);
      mean.push_back(row.second.first);
      var.push_back(row.second.second);
    }
    data.stats = stats_from_summary(std::move(n), std::move(mean), std::move(var));
    return data;
  }

  throw InvalidInput(
      "unrecognised header; expected \"level,value\" or \"level,n,mean,var\"");
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open input file: " + path);
  return read_dataset(in);
}

std::vector<std::pair<double, double>> group_records(std::istream& in,
                                                     std::optional<int> cap) {
  if (cap && *cap < 0) throw InvalidInput("cap must be non-negative");
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty input");
  if (normalized_header(line) != "cell,count,value")
    throw InvalidInput("unrecognised header; expected \"cell,count,value\"");

  std::vector<std::pair<double, double>> rows;
  std::vector<int> bad_lines;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    int count;
    double value;
    if (fields.size() != 3 || fields[0].empty() || !parse_int(fields[1], count) ||
        count < 0 || !parse_double(fields[2], value)) {
      bad_lines.push_back(line_no);
      continue;
    }
    const int level = cap ? std::min(count, *cap) : count;
    rows.emplace_back(static_cast<double>(level), value);
  }
  if (!bad_lines.empty()) {
    std::string msg = "malformed rows at line(s)";
    for (int l : bad_lines) msg += " " + std::to_string(l);
    throw InvalidInput(msg);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return rows;
}

void write_long_format(std::ostream& out,
                       const std::vector<std::pair<double, double>>& rows) {
  out << "level,value\n";
  for (const auto& [level, value] : rows)
    out << format_double(level) << ',' << format_double(value) << '\n';
}

nlohmann::ordered_json build_report(const ReportInputs& inputs) {
  using json = nlohmann::ordered_json;
  const Dataset& data = *inputs.data;
  const ScenarioConfig& cfg = *inputs.cfg;
  const TestStatistic& stat = *inputs.statistic;
  const SufficientStats& stats = data.stats;

  json report;
  report["tool"] = {{"name", "isostat"}, {"version", kVersion}};
  report["scenario"] = to_string(cfg.scenario);
  report["meanOrder"] = to_string(cfg.mean_order);
  if (cfg.scenario == Scenario::OrderedVariances)
    report["varianceOrder"] = to_string(cfg.variance_order);
  report["solver"] = to_string(cfg.solver);
  report["tol"] = cfg.tol;
  report["maxIter"] = cfg.max_iter;
  if (cfg.scenario == Scenario::KnownRatio) {
    report["ratios"] = json_array(cfg.resolved_ratios(stats.size()));
    if (cfg.sigma2) report["sigma2Known"] = *cfg.sigma2;
  }

  report["input"] = {{"format", data.format == InputFormat::Long ? "long" : "summary"},
                     {"levels", json_array(data.levels)},
                     {"N", stats.total}};

  json est;
  est["n"] = json_array(stats.n);
  est["mean"] = json_array(stats.mean);
  est["var"] = json_array(stats.var);
  est["varUnbiased"] = json_array(stats.var_unbiased);
  est["muIso"] = json_array(stat.alt_fit.mu);
  est["sigma2"] = json_array(stat.alt_fit.sigma2);
  est["iterations"] = stat.alt_fit.iterations;
  est["converged"] = stat.alt_fit.converged;
  est["logLik"] = stat.alt_fit.log_lik;
  if (stat.alt_fit.uniqueness_certificate)
    est["uniquenessCertificate"] = *stat.alt_fit.uniqueness_certificate;
  else
    est["uniquenessCertificate"] = nullptr;
  report["estimates"] = est;

  report["nullFit"] = {{"mu0", stat.null_fit.mu0},
                       {"sigma2", json_array(stat.null_fit.sigma2)},
                       {"iterations", stat.null_fit.iterations},
                       {"converged", stat.null_fit.converged},
                       {"logLik", stat.null_fit.log_lik}};

  report["conditions"] = {{"condition1", check_condition1(stats)},
                          {"condition2", check_condition2(stats)},
                          {"theorem1Interval", check_profile_uniqueness(stats)}};

  report["statistic"] = {{"kind", to_string(stat.kind)},
                         {"value", stat.value},
                         {"scale", scale_label(stat.kind)}};

  json boot = json::object();
  auto boot_block = [&](const BootstrapResult& r) {
    json b;
    b["pValue"] = r.p_value;
    b["pValueAddOne"] = r.p_value_add_one;
    b["observed"] = r.observed;
    b["replicates"] = r.replicates;
    b["failures"] = r.failures;
    if (inputs.plan) {
      b["seed"] = inputs.plan->seed;
      b["workers"] = inputs.plan->workers;
    }
    return b;
  };
  if (inputs.parametric) {
    json b = boot_block(*inputs.parametric);
    if (inputs.plan)
      b["generation"] = inputs.plan->generation == Generation::SufficientOnly
                            ? "sufficient-only"
                            : "raw-samples";
    boot["parametric"] = b;
  }
  if (inputs.nonparametric) boot["nonparametric"] = boot_block(*inputs.nonparametric);
  if (!boot.empty()) report["bootstrap"] = boot;

  report["warnings"] = inputs.warnings;
  return report;
}

std::string render_text(const nlohmann::ordered_json& report) {
  std::ostringstream out;
  out << "isostat " << report["tool"]["version"].get<std::string>() << "\n";
  out << "scenario: " << report["scenario"].get<std::string>()
      << " (means " << report["meanOrder"].get<std::string>() << ")\n";
  out << "input: " << report["input"]["format"].get<std::string>() << " format, k = "
      << report["input"]["levels"].size() << ", N = " << report["input"]["N"] << "\n\n";

  const auto& est = report["estimates"];
  auto row = [&](const std::string& label, const nlohmann::ordered_json& arr) {
    out << "  ";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%-8s", label.c_str());
    out << buf;
    for (const auto& v : arr) {
      std::snprintf(buf, sizeof(buf), " %10s", short_number(v).c_str());
      out << buf;
    }
    out << "\n";
  };
  row("level", report["input"]["levels"]);
  row("n", est["n"]);
  row("mean", est["mean"]);
  row("var", est["var"]);
  row("s2", est["varUnbiased"]);
  row("muIso", est["muIso"]);
  row("sigma2", est["sigma2"]);
  out << "\n";

  const auto& nf = report["nullFit"];
  out << "null fit: mu0 = " << short_number(nf["mu0"]) << ", iterations = "
      << nf["iterations"] << ", converged = "
      << (nf["converged"].get<bool>() ? "yes" : "no") << "\n";
  row("sigma2H0", nf["sigma2"]);

  const auto& cond = report["conditions"];
  out << "conditions: condition1 = " << (cond["condition1"].get<bool>() ? "yes" : "no")
      << ", condition2 = " << (cond["condition2"].get<bool>() ? "yes" : "no")
      << ", theorem1 interval = "
      << (cond["theorem1Interval"].get<bool>() ? "yes" : "no") << "\n";

  const auto& st = report["statistic"];
  out << "statistic: " << st["kind"].get<std::string>() << " = "
      << short_number(st["value"]) << " [" << st["scale"].get<std::string>() << "]\n";

  if (report.contains("bootstrap")) {
    for (const auto& [mode, b] : report["bootstrap"].items()) {
      out << mode << " bootstrap: p = " << short_number(b["pValue"]) << ", p(+1) = "
          << short_number(b["pValueAddOne"]) << ", replicates = " << b["replicates"]
          << ", failures = " << b["failures"];
      if (b.contains("seed")) out << ", seed = " << b["seed"];
      out << "\n";
    }
  }
  if (report.contains("warnings")) {
    for (const auto& w : report["warnings"])
      out << "warning: " << w.get<std::string>() << "\n";
  }
  return out.str();
}

}  // namespace isostat
