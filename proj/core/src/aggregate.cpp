#include "semprobe/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe {

ObserverSummary summarize(const ResponseCurve& curve, const PsychometricFit& fit,
                          double gof_critical) {
  auto values = bias_sensitivity(fit, /*force_accept=*/true);
  ObserverSummary summary;
  summary.observer_id = curve.observer_id;
  summary.observer_kind = curve.observer_kind;
  summary.pair_id = curve.pair_id;
  summary.guidance_scale = curve.guidance_scale;
  summary.bias = values.bias;
  summary.sensitivity = values.sensitivity;
  summary.deviance = fit.deviance;
  summary.passes_gof = passes_gof(fit.deviance, gof_critical);
  return summary;
}

namespace {

struct MeanSem {
  double mean = 0.0;
  std::optional<double> sem;
};

MeanSem mean_sem(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  MeanSem out{mean, std::nullopt};
  if (values.size() > 1) {
    double squares = 0.0;
    for (double v : values) squares += (v - mean) * (v - mean);
    out.sem = std::sqrt(squares / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

}  // namespace

GrandAverage grand_average(std::span<const ObserverSummary> summaries,
                           const std::string& group_label) {
  if (summaries.empty()) throw Error(ErrorKind::domain, "grand average of an empty group");
  const double scale = summaries.front().guidance_scale;
  std::vector<double> biases;
  std::vector<double> sensitivities;
  for (const auto& summary : summaries) {
    if (summary.guidance_scale != scale) {
      throw Error(ErrorKind::domain, "grand average over mixed guidance scales " +
                                         format_shortest(scale) + " and " +
                                         format_shortest(summary.guidance_scale));
    }
    biases.push_back(summary.bias);
    sensitivities.push_back(summary.sensitivity);
  }
  auto bias = mean_sem(biases);
  auto sensitivity = mean_sem(sensitivities);
  return {group_label,      scale, bias.mean, bias.sem, sensitivity.mean, sensitivity.sem,
          static_cast<int>(summaries.size())};
}

std::vector<double> min_max_intensity(std::span<const double> values, IntensityMode mode) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return out;  // constant input carries no contrast
  if (mode == IntensityMode::magnitude) {
    double scale = std::max(std::abs(*lo), std::abs(*hi));
    if (scale == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::abs(values[i]) / scale;
  } else {
    double range = *hi - *lo;
    if (range == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  }
  return out;
}

double round_half_away(double value, int decimals) {
  if (!std::isfinite(value)) return value;
  double rounded = *parse_double(format_fixed(value, decimals));
  return rounded == 0.0 ? 0.0 : rounded;
}

}  // namespace semprobe
