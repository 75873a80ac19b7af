#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "isostat/bootstrap.hpp"
#include "isostat/core.hpp"
#include "isostat/lrt.hpp"

namespace isostat {

enum class InputFormat { Long, Summary };

/// Parsed input data. `sample` is only populated for long-format input;
/// `stats` is always available.
struct Dataset {
  InputFormat format = InputFormat::Long;
  std::vector<double> levels;
  GroupedSample sample;
  SufficientStats stats;

  bool has_raw_data() const noexcept { return format == InputFormat::Long; }
};

/// Reads a CSV data set, detecting the format from the header row:
/// "level,value" (long) or "level,n,mean,var" (summary).
Dataset read_dataset(std::istream& in);
Dataset read_dataset_file(const std::string& path);

/// Aggregates per-cell records ("cell,count,value") into long-format rows
/// (level = count, optionally capped). Rows keep their input order within a
/// level; levels are sorted ascending.
std::vector<std::pair<double, double>> group_records(std::istream& in,
                                                     std::optional<int> cap);

/// Writes long-format rows as "level,value" CSV at full precision.
void write_long_format(std::ostream& out,
                       const std::vector<std::pair<double, double>>& rows);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double x);

struct ReportInputs {
  const Dataset* data = nullptr;
  const ScenarioConfig* cfg = nullptr;
  const TestStatistic* statistic = nullptr;
  const BootstrapResult* parametric = nullptr;
  const BootstrapResult* nonparametric = nullptr;
  const BootstrapPlan* plan = nullptr;
  std::vector<std::string> warnings;
};

/// The canonical JSON report; numbers round-trip at full precision.
nlohmann::ordered_json build_report(const ReportInputs& inputs);

/// Plain-text rendering of the same report object.
std::string render_text(const nlohmann::ordered_json& report);

}  // namespace isostat
