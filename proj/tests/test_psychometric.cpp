#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles/oracles.hpp"
#include "semprobe/error.hpp"
#include "semprobe/format.hpp"
#include "semprobe/psychometric.hpp"

using namespace semprobe;

namespace {

ResponseCurve make_curve(const std::vector<oracle::Level>& levels) {
  ResponseCurve curve{"obs", ObserverKind::human, "duck-rabbit", 7.5, {}};
  for (const auto& level : levels) {
    curve.points.push_back({level.alpha, static_cast<std::uint64_t>(level.n_b),
                            static_cast<std::uint64_t>(level.n_total)});
  }
  return curve;
}

std::vector<oracle::Level> analytic_levels(double pse, double beta1, int n) {
  std::vector<oracle::Level> levels;
  for (double alpha : {0.3, 0.4, 0.5, 0.6, 0.7}) {
    int n_b = static_cast<int>(std::lround(n * oracle::logistic(alpha, pse, beta1)));
    levels.push_back({alpha, n_b, n});
  }
  return levels;
}

}  // namespace

TEST(LogisticP, MidpointAtPse) { EXPECT_EQ(logistic_p(0.5, 0.5, 6.2, 0.0), 0.5); }

TEST(LogisticP, MatchesHighPrecisionValue) {
  // 1 / (1 + exp(-1.24)) evaluated with 40-digit arithmetic.
  EXPECT_NEAR(logistic_p(0.7, 0.5, 6.2, 0.0), 0.7755640142690735, 1e-15);
}

TEST(LogisticP, UpperAsymptoteIsOneMinusLambda) {
  EXPECT_DOUBLE_EQ(logistic_p(INFINITY, 0.5, 6.2, 0.05), 0.95);
  EXPECT_DOUBLE_EQ(logistic_p(-INFINITY, 0.5, 6.2, 0.05), 0.05);
}

TEST(LogisticP, RejectsNonFiniteInputs) {
  EXPECT_THROW(logistic_p(NAN, 0.5, 6.2), Error);
  EXPECT_THROW(logistic_p(0.5, INFINITY, 6.2), Error);
  EXPECT_THROW(logistic_p(0.5, 0.5, NAN), Error);
  EXPECT_THROW(logistic_p(0.5, 0.5, 6.2, 0.5), Error);
  EXPECT_THROW(logistic_p(0.5, 0.5, 6.2, -0.1), Error);
}

TEST(LogisticP, StrictlyIncreasingForPositiveSlope) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    double pse = unit(rng);
    double beta = 0.05 + 10.0 * unit(rng);
    double lambda = 0.1 * unit(rng);
    double a = unit(rng);
    double b = a + 1e-3 + 0.5 * unit(rng);
    ASSERT_LT(logistic_p(a, pse, beta, lambda), logistic_p(b, pse, beta, lambda));
  }
}

TEST(LogisticP, AgreesWithDirectTranscription) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 5000; ++trial) {
    double alpha = unit(rng);
    double pse = unit(rng);
    double beta = 20.0 * unit(rng) - 5.0;
    ASSERT_NEAR(logistic_p(alpha, pse, beta, 0.0), oracle::logistic(alpha, pse, beta), 1e-12);
  }
}

TEST(FitPsychometric, SymmetricCurveHasPseAtMidpoint) {
  auto curve = make_curve({{0.3, 10, 100}, {0.4, 30, 100}, {0.5, 50, 100}, {0.6, 70, 100}, {0.7, 90, 100}});
  auto fit = fit_psychometric(curve);
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.pse, 0.5, 1e-6);
  EXPECT_EQ(fit.n_points, 5);
}

TEST(FitPsychometric, RecoversAnalyticCurve) {
  auto levels = analytic_levels(0.47, 6.0, 10000);
  auto fit = fit_psychometric(make_curve(levels));
  EXPECT_TRUE(fit.converged);
  EXPECT_NEAR(fit.pse, 0.47, 0.005);
  EXPECT_NEAR(fit.beta1, 6.0, 0.15);

  auto grid = oracle::grid_search(levels, 0.0, 1.0, 0.01, 7.62, 400);
  EXPECT_NEAR(fit.pse, grid.pse, 2.0 / 399);
  EXPECT_GE(fit.log_likelihood, grid.log_likelihood - 1e-9);
}

TEST(FitPsychometric, LikelihoodMatchesOracle) {
  std::vector<oracle::Level> levels{{0.3, 2, 10}, {0.5, 6, 10}, {0.7, 9, 10}};
  auto curve = make_curve(levels);
  for (double pse : {0.2, 0.5, 0.8}) {
    for (double beta : {0.5, 3.0, 7.0}) {
      EXPECT_NEAR(log_likelihood(curve, pse, beta, 0.0), oracle::log_likelihood(levels, pse, beta), 1e-12);
      EXPECT_NEAR(log_likelihood(curve, pse, beta, 0.04),
                  oracle::log_likelihood(levels, pse, beta, 0.04), 1e-12);
    }
  }
}

TEST(FitPsychometric, BeatsDenseGridOnRandomCurves) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(0, 10);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<oracle::Level> levels;
    for (double alpha : {0.3, 0.4, 0.5, 0.6, 0.7}) levels.push_back({alpha, count(rng), 10});
    auto fit = fit_psychometric(make_curve(levels));
    auto grid = oracle::grid_search(levels, 0.0, 1.0, 0.01, 7.62, 200);
    ASSERT_GE(fit.log_likelihood, grid.log_likelihood - 1e-6) << "trial " << trial;
  }
}

TEST(FitPsychometric, AllZeroCurveIsDegenerateAtUpperBound) {
  auto curve = make_curve({{0.3, 0, 10}, {0.5, 0, 10}, {0.7, 0, 10}});
  auto fit = fit_psychometric(curve);
  EXPECT_TRUE(fit.converged);
  EXPECT_TRUE(fit.degenerate);
  EXPECT_EQ(fit.pse, 1.0);
  EXPECT_EQ(fit.beta1, 7.62);
}

TEST(FitPsychometric, AllOneCurveIsDegenerateAtLowerBound) {
  auto curve = make_curve({{0.3, 10, 10}, {0.5, 10, 10}, {0.7, 10, 10}});
  auto fit = fit_psychometric(curve);
  EXPECT_TRUE(fit.degenerate);
  EXPECT_EQ(fit.pse, 0.0);
}

TEST(FitPsychometric, IsDeterministic) {
  auto curve = make_curve({{0.3, 1, 10}, {0.4, 4, 10}, {0.5, 4, 10}, {0.6, 8, 10}, {0.7, 9, 10}});
  EXPECT_EQ(fit_psychometric(curve), fit_psychometric(curve));
}

TEST(FitPsychometric, ErrorPaths) {
  EXPECT_THROW(
      {
        try {
          fit_psychometric(make_curve({{0.5, 3, 10}}));
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
          throw;
        }
      },
      Error);
  try {
    fit_psychometric(make_curve({{0.3, 0, 0}, {0.5, 0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
  EXPECT_THROW(fit_psychometric(make_curve({{0.5, 3, 10}, {0.4, 3, 10}})), Error);
}

TEST(FitPsychometric, IterationLimitReportsUnconverged) {
  FitConfig config;
  config.max_iterations = 2;
  auto curve = make_curve({{0.3, 1, 10}, {0.4, 4, 10}, {0.5, 4, 10}, {0.6, 8, 10}, {0.7, 9, 10}});
  PsychometricFit fit;
  ASSERT_NO_THROW(fit = fit_psychometric(curve, config));
  EXPECT_FALSE(fit.converged);
}

TEST(FitPsychometric, FreeLambdaStaysInBounds) {
  FitConfig config;
  config.lambda_mode = LambdaMode::free;
  std::vector<oracle::Level> levels;
  for (int i = 0; i <= 10; ++i) {
    double alpha = i / 10.0;
    int n_b = static_cast<int>(std::lround(10000 * oracle::logistic_with_lapse(alpha, 0.5, 7.0, 0.08)));
    levels.push_back({alpha, n_b, 10000});
  }
  auto fit = fit_psychometric(make_curve(levels), config);
  EXPECT_TRUE(fit.converged);
  EXPECT_GE(fit.lambda, 0.0);
  EXPECT_LE(fit.lambda, 0.1);
  EXPECT_NEAR(fit.lambda, 0.08, 0.01);
  EXPECT_GE(fit.log_likelihood, oracle::grid_search(levels, 0, 1, 0.01, 7.62, 200).log_likelihood);
}

TEST(Deviance, ZeroWhenPredictionsMatchObservations) {
  // Observations generated exactly from the model at these parameters.
  ResponseCurve curve = make_curve({{0.3, 0, 0}});
  curve.points.clear();
  PsychometricFit fit;
  fit.pse = 0.5;
  fit.beta1 = std::log(4.0) / 0.2;  // p(0.7) = 0.8, p(0.3) = 0.2
  fit.n_points = 3;
  curve.points = {{0.3, 2, 10}, {0.5, 5, 10}, {0.7, 8, 10}};
  EXPECT_NEAR(deviance(curve, fit), 0.0, 1e-9);
  EXPECT_GE(deviance(curve, fit), 0.0);
}

TEST(Deviance, MatchesIndependentScript) {
  auto curve = make_curve({{0.3, 1, 10}, {0.5, 5, 10}, {0.7, 9, 10}});
  PsychometricFit fit;
  fit.pse = 0.5;
  fit.beta1 = 7.0;
  fit.n_points = 3;
  // 40-digit reference: 1.413377461080107483931...
  EXPECT_NEAR(deviance(curve, fit), 1.4133774610801075, 1e-12);
  EXPECT_NEAR(deviance(curve, fit),
              oracle::deviance({{0.3, 1, 10}, {0.5, 5, 10}, {0.7, 9, 10}}, 0.5, 7.0), 1e-12);
}

TEST(Deviance, MismatchedLevelsAreADomainError) {
  auto curve = make_curve({{0.3, 1, 10}, {0.5, 5, 10}, {0.7, 9, 10}});
  PsychometricFit fit;
  fit.n_points = 5;
  EXPECT_THROW(deviance(curve, fit), Error);
}

TEST(Deviance, NonNegativeOnRandomCurves) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(0, 12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::Level> levels;
    for (double alpha : {0.3, 0.4, 0.5, 0.6, 0.7}) levels.push_back({alpha, count(rng), 12});
    auto fit = fit_psychometric(make_curve(levels));
    ASSERT_GE(fit.deviance, 0.0);
  }
}

TEST(Gof, CriticalValue) {
  EXPECT_TRUE(passes_gof(3.051, 11.07));
  EXPECT_FALSE(passes_gof(11.07, 11.07));
  EXPECT_FALSE(passes_gof(12.0));
}

TEST(BiasSensitivity, Identities) {
  PsychometricFit fit;
  fit.converged = true;
  fit.pse = 0.5;
  fit.beta1 = 3.94;
  EXPECT_EQ(bias_sensitivity(fit).bias, 0.0);
  EXPECT_EQ(bias_sensitivity(fit).sensitivity, 3.94);
  fit.pse = 0.47;
  EXPECT_EQ(format_fixed(bias_sensitivity(fit).bias, 2), "-0.03");
}

TEST(BiasSensitivity, ReparameterizationIsExact) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    PsychometricFit fit;
    fit.converged = true;
    fit.pse = unit(rng);
    ASSERT_EQ(bias_sensitivity(fit).bias, fit.pse - 0.5);
  }
}

TEST(BiasSensitivity, UnconvergedNeedsForce) {
  PsychometricFit fit;
  fit.converged = false;
  fit.pse = 0.4;
  EXPECT_THROW(bias_sensitivity(fit), Error);
  EXPECT_NEAR(bias_sensitivity(fit, true).bias, -0.1, 1e-15);
}
