#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semprobe/psychometric.hpp"
#include "semprobe/types.hpp"

namespace semprobe {

struct ObserverSummary {
  std::string observer_id;
  ObserverKind observer_kind = ObserverKind::human;
  std::string pair_id;
  double guidance_scale = 0.0;
  double bias = 0.0;
  double sensitivity = 0.0;
  double deviance = 0.0;
  bool passes_gof = false;
};

ObserverSummary summarize(const ResponseCurve& curve, const PsychometricFit& fit,
                          double gof_critical = 11.07);

/// Across-observer mean with standard error of the mean. The SEM fields are
/// empty for a single observer.
struct GrandAverage {
  std::string group_label;
  double guidance_scale = 0.0;
  double mean_bias = 0.0;
  std::optional<double> sem_bias;
  double mean_sensitivity = 0.0;
  std::optional<double> sem_sensitivity;
  int n_observers = 0;
};

/// Throws Error(domain) on an empty list or mixed guidance scales.
GrandAverage grand_average(std::span<const ObserverSummary> summaries,
                           const std::string& group_label);

enum class IntensityMode {
  /// |v| / max|v|; sign is reported separately.
  magnitude,
  /// (v - min) / (max - min).
  range,
};

/// Global normalization of table entries onto [0, 1]. A constant input maps
/// to all zeros.
std::vector<double> min_max_intensity(std::span<const double> values, IntensityMode mode);

/// Round half away from zero to `decimals` places. Negative zero is folded
/// to +0.
double round_half_away(double value, int decimals = 2);

}  // namespace semprobe
