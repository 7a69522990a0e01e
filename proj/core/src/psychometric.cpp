#include "semprobe/psychometric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "semprobe/error.hpp"
#include "semprobe/format.hpp"

namespace semprobe {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_lambda(double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda >= 0.5) {
    throw Error(ErrorKind::domain, "lambda " + format_shortest(lambda) + " outside [0, 0.5)");
  }
}

// (log p, log (1 - p)) at a single level.
std::pair<double, double> log_probabilities(double alpha, double pse, double beta1,
                                            double lambda) {
  double z = beta1 * (alpha - pse);
  if (lambda == 0.0) return {-softplus(-z), -softplus(z)};
  double span = 1.0 - 2.0 * lambda;
  return {std::log(lambda + span * sigmoid(z)), std::log(lambda + span * sigmoid(-z))};
}

double binomial_term(std::uint64_t n_b, std::uint64_t n_total, double log_p, double log_q) {
  double term = 0.0;
  if (n_b > 0) term += static_cast<double>(n_b) * log_p;
  if (n_total > n_b) term += static_cast<double>(n_total - n_b) * log_q;
  return term;
}

double saturated_log_likelihood(const ResponseCurve& curve) {
  double total = 0.0;
  for (const auto& point : curve.points) {
    if (point.n_total == 0) continue;
    double observed = point.proportion();
    // 0 * log 0 terms vanish; binomial_term already skips them.
    double log_p = observed > 0.0 ? std::log(observed) : 0.0;
    double log_q = observed < 1.0 ? std::log1p(-observed) : 0.0;
    total += binomial_term(point.n_b, point.n_total, log_p, log_q);
  }
  return total;
}

// Parameters live in the unit cube; `to_params` maps back to the box.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dims() const { return lower.size(); }

  std::vector<double> to_params(const std::vector<double>& unit) const {
    std::vector<double> params(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
      params[i] = lower[i] + unit[i] * (upper[i] - lower[i]);
    }
    return params;
  }
};

class Objective {
 public:
  Objective(const ResponseCurve& curve, const FitConfig& config, const Box& box)
      : curve_(curve), config_(config), box_(box) {}

  // Negative log-likelihood at a unit-cube point.
  double operator()(const std::vector<double>& unit) const {
    auto params = box_.to_params(unit);
    double lambda = params.size() > 2 ? params[2] : config_.lambda_fixed;
    return -log_likelihood(curve_, params[0], params[1], lambda);
  }

 private:
  const ResponseCurve& curve_;
  const FitConfig& config_;
  const Box& box_;
};

struct Vertex {
  std::vector<double> unit;
  double value = 0.0;
};

double clamp_unit(double value) { return std::clamp(value, 0.0, 1.0); }

// Largest coordinate distance (in parameter units) from the best vertex.
double simplex_extent(const std::vector<Vertex>& simplex, const Box& box) {
  double extent = 0.0;
  for (std::size_t v = 1; v < simplex.size(); ++v) {
    for (std::size_t i = 0; i < box.dims(); ++i) {
      double width = box.upper[i] - box.lower[i];
      extent = std::max(extent, std::abs(simplex[v].unit[i] - simplex[0].unit[i]) * width);
    }
  }
  return extent;
}

struct SearchResult {
  Vertex best;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead on the unit cube with trial points projected back onto it.
SearchResult nelder_mead(const Objective& objective, const Box& box, std::vector<double> start,
                         double initial_step, int budget, double tolerance) {
  const std::size_t n = box.dims();
  std::vector<Vertex> simplex;
  simplex.push_back({start, objective(start)});
  for (std::size_t i = 0; i < n; ++i) {
    auto point = start;
    point[i] = point[i] + initial_step <= 1.0 ? point[i] + initial_step : point[i] - initial_step;
    point[i] = clamp_unit(point[i]);
    simplex.push_back({point, objective(point)});
  }

  auto order = [&] {
    std::stable_sort(simplex.begin(), simplex.end(),
                     [](const Vertex& a, const Vertex& b) { return a.value < b.value; });
  };
  auto along = [&](const std::vector<double>& centroid, const std::vector<double>& worst,
                   double coefficient) {
    std::vector<double> point(n);
    for (std::size_t i = 0; i < n; ++i) {
      point[i] = clamp_unit(centroid[i] + coefficient * (worst[i] - centroid[i]));
    }
    return point;
  };

  SearchResult result;
  order();
  while (result.iterations < budget) {
    if (simplex_extent(simplex, box) < tolerance) {
      result.converged = true;
      break;
    }
    ++result.iterations;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].unit[i] / static_cast<double>(n);
    }
    Vertex& worst = simplex[n];

    Vertex reflected{along(centroid, worst.unit, -1.0), 0.0};
    reflected.value = objective(reflected.unit);

    if (reflected.value < simplex[0].value) {
      Vertex expanded{along(centroid, worst.unit, -2.0), 0.0};
      expanded.value = objective(expanded.unit);
      worst = expanded.value < reflected.value ? expanded : reflected;
    } else if (reflected.value < simplex[n - 1].value) {
      worst = reflected;
    } else {
      bool outside = reflected.value < worst.value;
      Vertex contracted{along(centroid, worst.unit, outside ? -0.5 : 0.5), 0.0};
      contracted.value = objective(contracted.unit);
      if (contracted.value < (outside ? reflected.value : worst.value)) {
        worst = contracted;
      } else {
        for (std::size_t v = 1; v <= n; ++v) {
          for (std::size_t i = 0; i < n; ++i) {
            simplex[v].unit[i] = simplex[0].unit[i] + 0.5 * (simplex[v].unit[i] - simplex[0].unit[i]);
          }
          simplex[v].value = objective(simplex[v].unit);
        }
      }
    }
    order();
  }
  if (!result.converged && simplex_extent(simplex, box) < tolerance) result.converged = true;
  result.best = simplex[0];
  return result;
}

Box make_box(const FitConfig& config) {
  Box box{{config.pse_min, config.beta_min}, {config.pse_max, config.beta_max}};
  if (config.lambda_mode == LambdaMode::free) {
    box.lower.push_back(0.0);
    box.upper.push_back(config.lambda_max);
  }
  return box;
}

// Best point of a regular grid over the unit cube; the lambda axis (if any)
// uses a coarser grid.
std::vector<double> grid_seed(const Objective& objective, const Box& box, int grid_size) {
  const int steps = std::max(grid_size, 2);
  const int lambda_steps = box.dims() > 2 ? 6 : 1;
  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (int k = 0; k < lambda_steps; ++k) {
    for (int i = 0; i < steps; ++i) {
      for (int j = 0; j < steps; ++j) {
        std::vector<double> unit{i / double(steps - 1), j / double(steps - 1)};
        if (box.dims() > 2) unit.push_back(k / double(lambda_steps - 1));
        double value = objective(unit);
        if (value < best_value) {
          best_value = value;
          best = unit;
        }
      }
    }
  }
  return best;
}

}  // namespace

double logistic_p(double alpha, double pse, double beta1, double lambda) {
  if (std::isnan(alpha) || !std::isfinite(pse) || !std::isfinite(beta1)) {
    throw Error(ErrorKind::domain, "logistic_p: non-finite input");
  }
  check_lambda(lambda);
  double z = beta1 * (alpha - pse);
  if (std::isnan(z)) throw Error(ErrorKind::domain, "logistic_p: undefined at infinite alpha");
  return lambda + (1.0 - 2.0 * lambda) * sigmoid(z);
}

void FitConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::validation, what); };
  if (!(pse_min < pse_max)) fail("pse bounds must satisfy pse_min < pse_max");
  if (!(beta_min < beta_max)) fail("beta bounds must satisfy beta_min < beta_max");
  if (!std::isfinite(pse_min) || !std::isfinite(pse_max) || !std::isfinite(beta_min) ||
      !std::isfinite(beta_max)) {
    fail("fit bounds must be finite");
  }
  if (lambda_mode == LambdaMode::fixed && (lambda_fixed < 0.0 || lambda_fixed >= 0.5)) {
    fail("lambda_fixed must lie in [0, 0.5)");
  }
  if (lambda_mode == LambdaMode::free && !(lambda_max > 0.0 && lambda_max < 0.5)) {
    fail("lambda_max must lie in (0, 0.5)");
  }
  if (grid_size < 2) fail("grid_size must be at least 2");
  if (max_iterations < 1) fail("max_iterations must be positive");
  if (!(tolerance > 0.0)) fail("tolerance must be positive");
  if (!(gof_critical > 0.0)) fail("gof_critical must be positive");
}

double log_likelihood(const ResponseCurve& curve, double pse, double beta1, double lambda) {
  double total = 0.0;
  for (const auto& point : curve.points) {
    auto [log_p, log_q] = log_probabilities(point.alpha, pse, beta1, lambda);
    total += binomial_term(point.n_b, point.n_total, log_p, log_q);
  }
  return total;
}

PsychometricFit fit_psychometric(const ResponseCurve& curve, const FitConfig& config) {
  config.validate();
  curve.validate();
  if (curve.points.size() < 2) {
    throw Error(ErrorKind::insufficient_data,
                "curve " + curve.observer_id + " has fewer than 2 alpha levels");
  }
  for (const auto& point : curve.points) {
    if (point.n_total == 0) {
      throw Error(ErrorKind::domain, "curve " + curve.observer_id + " has a level with no trials");
    }
  }

  const Box box = make_box(config);
  const Objective objective(curve, config, box);

  auto start = grid_seed(objective, box, config.grid_size);
  double step = 1.0 / static_cast<double>(std::max(config.grid_size, 2) - 1);

  // Restart from the incumbent with a fresh simplex until a restart no longer
  // improves it; guards against premature collapse near the box faces.
  int used = 0;
  auto search = nelder_mead(objective, box, start, step, config.max_iterations, config.tolerance);
  used += search.iterations;
  Vertex best = search.best;
  bool converged = search.converged;
  for (int restart = 0; restart < 4 && converged && used < config.max_iterations; ++restart) {
    auto again = nelder_mead(objective, box, best.unit, 1e-3, config.max_iterations - used,
                             config.tolerance);
    used += again.iterations;
    converged = again.converged;
    bool improved = again.best.value < best.value - 1e-12;
    if (again.best.value < best.value) best = again.best;
    if (!improved) break;
  }

  auto params = box.to_params(best.unit);
  PsychometricFit fit;
  fit.pse = params[0];
  fit.beta1 = params[1];
  fit.lambda = params.size() > 2 ? params[2] : config.lambda_fixed;
  fit.n_points = static_cast<int>(curve.points.size());
  fit.iterations = used;
  fit.converged = converged;

  bool all_a = std::all_of(curve.points.begin(), curve.points.end(),
                           [](const CurvePoint& p) { return p.n_b == 0; });
  bool all_b = std::all_of(curve.points.begin(), curve.points.end(),
                           [](const CurvePoint& p) { return p.n_b == p.n_total; });
  if (all_a || all_b) {
    // No transition in the data: the likelihood keeps rising toward a corner
    // of the box, so pin the boundary solution there if it is at least as good.
    fit.degenerate = true;
    double corner_pse = all_a ? config.pse_max : config.pse_min;
    double corner_lambda = config.lambda_mode == LambdaMode::free ? 0.0 : config.lambda_fixed;
    double corner_ll = log_likelihood(curve, corner_pse, config.beta_max, corner_lambda);
    double current_ll = log_likelihood(curve, fit.pse, fit.beta1, fit.lambda);
    if (corner_ll >= current_ll) {
      fit.pse = corner_pse;
      fit.beta1 = config.beta_max;
      fit.lambda = corner_lambda;
    }
    fit.converged = true;
  }

  fit.log_likelihood = log_likelihood(curve, fit.pse, fit.beta1, fit.lambda);
  fit.deviance = deviance(curve, fit);
  return fit;
}

double deviance(const ResponseCurve& curve, const PsychometricFit& fit) {
  if (fit.n_points != static_cast<int>(curve.points.size())) {
    throw Error(ErrorKind::domain, "fit was made on " + std::to_string(fit.n_points) +
                                       " levels but the curve has " +
                                       std::to_string(curve.points.size()));
  }
  double fitted = log_likelihood(curve, fit.pse, fit.beta1, fit.lambda);
  double value = 2.0 * (saturated_log_likelihood(curve) - fitted);
  if (value < 0.0 && value >= -1e-9) value = 0.0;
  return value;
}

BiasSensitivity bias_sensitivity(const PsychometricFit& fit, bool force_accept) {
  if (!fit.converged && !force_accept) {
    throw Error(ErrorKind::domain, "fit did not converge; pass force_accept to use it anyway");
  }
  return {fit.pse - 0.5, fit.beta1};
}

}  // namespace semprobe
