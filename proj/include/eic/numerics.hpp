#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "eic/errors.hpp"
#include "eic/rng.hpp"

namespace eic {

using Vec = std::vector<double>;

struct ParameterSpace;
class EstimationProblem;
class Loss;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense symmetric matrix with a cached determinant and definiteness verdict.
class SymMatrix {
public:
  explicit SymMatrix(int dim);
  static SymMatrix identity(int dim, double scale = 1.0);

  int dim() const { return n_; }
  void set(int i, int j, double v);
  double at(int i, int j) const { return a_[(std::size_t)i * n_ + j]; }
  double det() const;
  bool positive_definite() const;
  SymMatrix scaled(double c) const;
  SymMatrix inverse() const;
  double inf_norm() const;  // max row sum of absolute values

private:
  int n_;
  std::vector<double> a_;
  void decompose() const;
  mutable bool decomposed_ = false;
  mutable double det_ = 0.0;
  mutable bool pd_ = false;
};

// ||a - ref||_inf / ||ref||_inf
double rel_deviation(const SymMatrix& a, const SymMatrix& ref);

struct QuadSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  int max_intervals = 4000;
  int initial_splits = 8;
};

struct IntegralResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  long evaluations = 0;
};

// Adaptive Gauss-Kronrod (G7,K15) over [a,b]; either endpoint may be
// infinite, in which case the axis is compactified with a tangent map.
// Breakpoints force initial interval boundaries (kinks, known peaks).
IntegralResult integrate_1d(const std::function<double(double)>& f, double a,
                            double b, const QuadSpec& spec = {},
                            const std::vector<double>& breakpoints = {});

struct IntegBox {
  Vec lo, hi;  // entries may be +-inf
  int dim() const { return (int)lo.size(); }
};

// Nested 1-D rules; supported up to 3 dimensions.
IntegralResult integrate_box(
    const std::function<double(const Vec&)>& f, const IntegBox& box,
    const QuadSpec& spec = {},
    const std::vector<std::vector<double>>& breakpoints = {});

struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
};

// Seeded Monte Carlo estimate of E[f(X)] under the sampler's distribution.
McResult integrate_mc(const std::function<double(const Vec&)>& f,
                      const std::function<void(Rng&, Vec&)>& sampler, long n,
                      std::uint64_t seed);

struct ArgmaxConfig {
  int grid_per_axis = 32;
  long grid_total_cap = 1L << 15;
  int refine_top_k = 5;
  double tie_rel_tol = 1e-9;
  double merge_radius = 1e-6;  // relative to axis width
  double nm_rel_tol = 1e-10;
  int nm_max_iter = 600;
  int polish_rounds = 3;
};

struct ArgmaxDiagnostics {
  long grid_points = 0;
  long metric_evaluations = 0;
  int refinements = 0;
  bool boundary_maximum = false;
  long excluded_points = 0;  // metric was NaN/-inf there
};

struct EstimateSet {
  std::vector<Vec> points;  // all maximisers within the tie tolerance
  std::vector<double> values;
  double value = 0.0;  // best metric value
  double tie_tolerance = 0.0;
  ArgmaxDiagnostics diagnostics;
};

// Exact scan on finite parameter sets; multi-start grid + Nelder-Mead with a
// parabolic polish on boxes.  The metric may return NaN or -inf to exclude a
// point.  Throws NoFiniteValue if nothing evaluable remains.
EstimateSet argmax(const std::function<double(const Vec&)>& metric,
                   const ParameterSpace& space, const ArgmaxConfig& cfg = {});

struct HessianConfig {
  // h_i = max(step_scale, step_scale*|theta_i|).  The step is deliberately
  // generous: loss values near the diagonal are differences of almost equal
  // densities, and a short stencil amplifies their rounding noise by 1/h
  // while the Richardson pass already removes the h^2 truncation term.
  double step_scale = 2e-3;
  // Loss integrands shrink quadratically with the stencil step, so the
  // quadrature underneath a second difference runs in pure relative mode.
  // Near the diagonal the integrand is assembled from cancelling regions
  // orders larger than the total; where that caps the achievable accuracy
  // above this request, the integrator stops at its roundoff floor instead.
  QuadSpec quad{1e-11, 0.0, 4000, 8};
};

// Hessian in the first argument of L(., theta) evaluated at the diagonal,
// by central differences (4-point cross stencil off-diagonal) with one
// Richardson extrapolation step.
SymMatrix hessian_at_diagonal(const Loss& loss, const EstimationProblem& prob,
                              const Vec& theta, const HessianConfig& cfg = {});

enum class FisherMethod { Analytic, BruteForce, MonteCarlo };

struct FisherConfig {
  FisherMethod method = FisherMethod::Analytic;
  bool fallback_to_brute = true;  // when no analytic form exists
  double fd_step = 1e-5;
  QuadSpec quad{1e-10, 0.0, 4000, 8};
  long mc_samples = 200000;
  std::uint64_t seed = 0;
};

SymMatrix fisher_information(const EstimationProblem& prob, const Vec& theta,
                             const FisherConfig& cfg = {});

}  // namespace eic
