#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semprobe/psychometric.hpp"
#include "semprobe/types.hpp"

namespace semprobe {

/// One line of a fit results file. Numeric fields are optional on read so
/// that partial files (e.g. bias-only exports) can be detected by the
/// consumer; the writer emits all of them for successful fits.
struct FitRow {
  std::string observer_id;
  ObserverKind observer_kind = ObserverKind::human;
  std::string pair_id;
  double guidance_scale = 0.0;
  std::optional<double> pse;
  std::optional<double> beta1;
  std::optional<double> lambda;
  std::optional<double> deviance;
  std::optional<double> bias;
  std::optional<double> sensitivity;
  std::optional<double> log_likelihood;
  bool converged = false;
  bool degenerate = false;
  bool passes_gof = false;
  int n_points = 0;
  /// Set for cells that could not be fitted at all.
  std::string error;

  friend bool operator==(const FitRow&, const FitRow&) = default;
};

FitRow make_fit_row(const ResponseCurve& curve, const PsychometricFit& fit, double gof_critical);
FitRow make_error_row(const ResponseCurve& curve, const std::string& error);

/// JSON Lines, one object per row, decimals with 6 significant digits.
void write_fit_rows(std::ostream& out, const std::vector<FitRow>& rows);
std::string fit_row_line(const FitRow& row);

std::vector<FitRow> read_fit_rows(std::istream& in, const std::string& source);
std::vector<FitRow> load_fit_rows(const std::filesystem::path& path);

}  // namespace semprobe
