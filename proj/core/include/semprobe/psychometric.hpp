#pragma once

#include <cstdint>
#include <span>

#include "semprobe/types.hpp"

namespace semprobe {

/// Logistic psychometric function with equal lower and upper asymptotes:
///
///   p(alpha) = lambda + (1 - 2 lambda) / (1 + exp(-beta1 (alpha - pse)))
///
/// With lambda = 0 this is the plain two-parameter logistic. Throws
/// Error(domain) for non-finite pse/beta1/lambda, a NaN alpha, or lambda
/// outside [0, 0.5). alpha may be +-infinity (the asymptotes).
double logistic_p(double alpha, double pse, double beta1, double lambda = 0.0);

enum class LambdaMode { fixed, free };

/// Box bounds and optimizer settings for fit_psychometric.
struct FitConfig {
  double pse_min = 0.0;
  double pse_max = 1.0;
  double beta_min = 0.01;
  double beta_max = 7.62;
  LambdaMode lambda_mode = LambdaMode::fixed;
  double lambda_fixed = 0.0;
  double lambda_max = 0.1;  // upper bound when lambda is free
  int grid_size = 21;       // coarse seeding grid per parameter
  int max_iterations = 500;
  double tolerance = 1e-8;  // parameter step at convergence
  double gof_critical = 11.07;

  /// Throws Error(validation) on inverted or out-of-range bounds.
  void validate() const;
};

struct PsychometricFit {
  double pse = 0.0;
  double beta1 = 0.0;
  double lambda = 0.0;
  double deviance = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
  /// All responses fell in one category; the fit sits at a corner of the box.
  bool degenerate = false;
  int n_points = 0;
  int iterations = 0;

  friend bool operator==(const PsychometricFit&, const PsychometricFit&) = default;
};

/// Binomial log-likelihood of the curve under (pse, beta1, lambda), omitting
/// the binomial coefficients.
double log_likelihood(const ResponseCurve& curve, double pse, double beta1, double lambda);

/// Maximum-likelihood fit inside the configured box. Deterministic. Never
/// throws on optimizer exhaustion; reports converged = false instead.
///
/// Throws Error(insufficient_data) for fewer than two alpha levels and
/// Error(domain) when some level has no trials.
PsychometricFit fit_psychometric(const ResponseCurve& curve, const FitConfig& config = {});

/// 2 (l_saturated - l_fit). Tiny negative round-off is clamped to zero.
/// Throws Error(domain) if the fit was made on a different number of levels.
double deviance(const ResponseCurve& curve, const PsychometricFit& fit);

struct BiasSensitivity {
  double bias = 0.0;         // pse - 0.5
  double sensitivity = 0.0;  // beta1
};

/// Throws Error(domain) for an unconverged fit unless force_accept is set.
BiasSensitivity bias_sensitivity(const PsychometricFit& fit, bool force_accept = false);

/// Acceptable fit: deviance strictly below the chi-square critical value.
inline bool passes_gof(double deviance_value, double critical = 11.07) {
  return deviance_value < critical;
}

}  // namespace semprobe
