#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semprobe/fit_io.hpp"
#include "semprobe/trial_log.hpp"

namespace semprobe::analysis {

enum class ReportMode { bias, sensitivity };

std::optional<ReportMode> parse_report_mode(std::string_view text);

struct TableCell {
  double value = 0.0;      // rounded to 2 decimals
  double intensity = 0.0;  // global normalization in [0, 1]
  int direction = 0;       // sign of the value; bias mode only
  std::optional<double> sem;
  int n_observers = 1;

  friend bool operator==(const TableCell&, const TableCell&) = default;
};

/// Guidance scale (rows) x observer (columns).
struct ReportTable {
  ReportMode mode = ReportMode::bias;
  std::string pair_id;
  std::vector<double> guidance_scales;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<TableCell>>> cells;  // [row][column]

  friend bool operator==(const ReportTable&, const ReportTable&) = default;
};

struct SourcedRows {
  std::string source;
  std::vector<FitRow> rows;
};

struct ReportOptions {
  std::string human_group_label = "Humans";
  bool include_individual_humans = false;
};

/// Throws Error(conflict) when two sources disagree on a cell and
/// Error(schema) when a row lacks the field the mode needs.
ReportTable build_report(const std::vector<SourcedRows>& inputs, ReportMode mode,
                         const ReportOptions& options = {});

std::string report_to_json(const ReportTable& table);
ReportTable report_from_json(const std::string& text);
std::string render_text(const ReportTable& table);

struct ObservedPoint {
  double alpha = 0.0;
  double proportion = 0.0;
  std::uint64_t n = 0;
  double sem = 0.0;  // sqrt(p (1 - p) / n)
};

struct CurvePlot {
  std::string observer_id;
  std::string pair_id;
  double guidance_scale = 0.0;
  double pse = 0.0;
  double beta1 = 0.0;
  double lambda = 0.0;
  std::vector<ObservedPoint> observed;
  std::vector<std::pair<double, double>> fitted;  // 101 points on [0, 1]
};

struct CurvesResult {
  std::vector<CurvePlot> plots;
  std::vector<std::string> warnings;
};

inline constexpr int kFittedCurvePoints = 101;

/// Throws Error(validation) when a fit row has no matching curve in the log.
/// Curves without a fit (e.g. denied observers) are not plotted.
CurvesResult build_curves(const std::vector<FitRow>& fits,
                          const std::vector<ResponseCurve>& curves);

std::string curves_to_json(const CurvesResult& result);

}  // namespace semprobe::analysis
