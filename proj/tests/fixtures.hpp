#pragma once

// Shared problem catalog for the test binaries.  Everything here is small
// enough to be evaluated exactly or with cheap quadrature.

#include <cmath>
#include <vector>

#include "eic/axioms.hpp"
#include "eic/config.hpp"
#include "eic/estimators.hpp"
#include "eic/losses.hpp"
#include "eic/model.hpp"
#include "eic/risk.hpp"

namespace fx {

using eic::DataModel;
using eic::EstimationProblem;
using eic::ParameterSpace;
using eic::Prior;
using eic::ValidationLevel;
using eic::Vec;

inline EstimationProblem bern(double lo = 0.05, double hi = 0.95) {
  return EstimationProblem(ParameterSpace::box({lo}, {hi}),
                           DataModel::bernoulli(), Prior::uniform_box());
}

inline EstimationProblem binom(int n = 10) {
  return EstimationProblem(ParameterSpace::box({0.05}, {0.95}),
                           DataModel::binomial(n), Prior::uniform_box());
}

inline EstimationProblem gauss(double sigma = 1.0, double lo = -2.0,
                               double hi = 2.0) {
  return EstimationProblem(ParameterSpace::box({lo}, {hi}),
                           DataModel::gaussian_known_sigma(sigma),
                           Prior::uniform_box());
}

// wide box so that posteriors for |x| <= 2 carry no visible truncation
inline EstimationProblem gauss_wide(double sigma = 1.0) {
  return gauss(sigma, -8.0, 8.0);
}

inline EstimationProblem gms(int n = 5) {
  return EstimationProblem(ParameterSpace::box({-2.0, 0.3}, {2.0, 3.0}),
                           DataModel::gaussian_mean_sigma(n),
                           Prior::uniform_box());
}

// the scale-invariant prior 1/sigma; improper, argmax use only
inline EstimationProblem gms_scale_prior(int n) {
  return EstimationProblem(ParameterSpace::box({0.0, 0.1}, {5.0, 3.0}),
                           DataModel::gaussian_mean_sigma(n),
                           Prior::power_law_sigma(1));
}

inline EstimationProblem expo(double lo = 0.2, double hi = 5.0) {
  return EstimationProblem(ParameterSpace::box({lo}, {hi}),
                           DataModel::exponential_rate(), Prior::uniform_box());
}

// the two-hypothesis measurement device example: posterior (0.9, 0.1) at x=1
inline EstimationProblem table_two_point() {
  return EstimationProblem(
      ParameterSpace::finite({{1.0}, {2.0}}),
      DataModel::table({{1.0}, {2.0}}, {{1.0}, {2.0}},
                       {{0.9, 0.1}, {0.1, 0.9}}),
      Prior::finite_pmf({0.5, 0.5}));
}

inline double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(std::fabs(want), 1e-300);
}

// ---- frozen oracle values (independent closed forms, see test comments)

// Bernoulli(0.8) against Bernoulli(0.5), exact two-term sums
inline constexpr double kBernH2 = 0.05131670194948623;
inline constexpr double kBernKL = 0.19274475702175753;
inline constexpr double kBernChi2 = 0.36;
inline constexpr double kBernGap = 0.09;  // sum f2 (f1-f2)^2
inline constexpr double kBernBhat = 0.05268025782891318;

// scalar Gaussians, equal sigma: H2 = 1 - exp(-d^2/(8 s^2)), KL = d^2/(2 s^2),
// chi2 = exp(d^2/s^2) - 1, Bhattacharyya = d^2/(8 s^2)
inline constexpr double kGaussH2_d1s1 = 0.11750309741540454;
inline constexpr double kGaussKL_d1s1 = 0.5;
inline constexpr double kGaussChi2_d1s1 = 1.718281828459045;
inline constexpr double kGaussBhat_d1s1 = 0.125;
inline constexpr double kGaussH2_d07s15 = 0.026855036941949018;
inline constexpr double kGaussKL_d07s15 = 0.10888888888888881;

// 5-sample joint Gaussians (0,1) vs (0.5,1.5): H2 = 1 - BC^5, KL = 5 KL1
inline constexpr double kGms5H2 = 0.2564063891345828;
inline constexpr double kGms5KL = 0.9162144294297109;

// Exponential rates: H2(1.0 vs 2.5), KL(1.0 vs 2.5), chi2(1.0 vs 1.5)
inline constexpr double kExpoH2 = 0.09649209709474871;
inline constexpr double kExpoKL = 0.5837092681258449;
inline constexpr double kExpoChi2 = 0.33333333333333337;

// Binomial(10), 0.7 vs 0.4, exact 11-term sums
inline constexpr double kBin10H2 = 0.37939287696113244;
inline constexpr double kBin10KL = 1.8378689738681218;
inline constexpr double kBin10Chi2 = 23.15610905829814;

// posterior-over-curvature value at theta=0.5 for Binomial(10), x=3,
// squared-Hellinger curvature, uniform prior on [0.05, 0.95]:
// (1/0.9) * pmf / sqrt(0.25 * 40)
inline constexpr double kBin10EicMetric = 0.04117549036677577;
inline constexpr double kBin10Pmf3 = 0.1171875;

}  // namespace fx
