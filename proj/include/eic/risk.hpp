#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eic/losses.hpp"
#include "eic/model.hpp"

namespace eic {

// Family of saturating penalty curves T_eps indexed by the error limit eps:
// T_eps is non-decreasing, T_eps(0) < vmax and T_eps(t) = vmax for t >= eps.
// The attenuation A_eps is the affine remap of T_eps with A_eps(0) = 1 and
// A_eps(t) = 0 for t >= eps.
class RiskSpectrum {
public:
  enum class Family { SmoothStep, ExpSaturate, Custom };

  static RiskSpectrum smooth_step(double vmax = 1.0);
  static RiskSpectrum exp_saturate(double vmax = 1.0);
  // T(t, eps); probed on construction, InvalidSpectrum when the shape
  // requirements fail
  static RiskSpectrum custom(std::function<double(double, double)> T,
                             double vmax);

  double T(double t, double eps) const;
  double attenuation(double t, double eps) const;
  double vmax() const { return vmax_; }
  Family family() const { return family_; }
  const std::string& name() const { return name_; }

private:
  Family family_ = Family::SmoothStep;
  std::string name_;
  double vmax_ = 1.0;
  std::function<double(double, double)> t_;
  void probe_() const;
};

struct UtilityResult {
  double value = 0.0;
  double quad_error = 0.0;
  bool stable = true;  // quad_error <= 5% of value
};

// E[A_eps(L(theta', theta_hat)) | x] under the normalised posterior.
UtilityResult expected_utility(const EstimationProblem& p, const Loss& loss,
                               const RiskSpectrum& spectrum, double eps,
                               const Vec& theta_hat, const Vec& x,
                               const QuadSpec& spec = {1e-7, 0.0, 4000, 8});

struct RatioPoint {
  double eps = 0.0;
  double u1 = 0.0, u2 = 0.0;
  double ratio = 0.0;
  bool stable = true;
};

struct RatioCurve {
  std::vector<RatioPoint> points;  // eps descending
  double predicted_limit = 0.0;    // eic metric ratio theta1 : theta2
  double eps_min_stable = 0.0;
  double ratio_at_min_stable = 0.0;
};

std::vector<double> default_eps_grid();  // {1, 1e-1, ..., 1e-4}

RatioCurve utility_ratio_curve(const EstimationProblem& p, const Loss& loss,
                               const RiskSpectrum& spectrum, const Vec& theta1,
                               const Vec& theta2, const Vec& x,
                               std::vector<double> eps_grid = {},
                               const HessianConfig& hessian = {},
                               const QuadSpec& utility_quad = {1e-7, 0.0, 4000, 8});

struct PairVerdict {
  int i = 0, j = 0;       // candidate indices
  bool inferior = false;  // i strictly worse than j on the whole tail
  double eps_from = 0.0;  // largest grid eps starting the tail
};

struct InferiorityReport {
  std::vector<Vec> candidates;
  std::vector<double> eps_grid;                 // descending
  std::vector<std::vector<double>> utilities;   // [eps index][candidate]
  std::vector<PairVerdict> pairs;
  std::vector<bool> inferior;  // per candidate
  std::vector<bool> maximal;
};

InferiorityReport ei_inferiority_report(const EstimationProblem& p,
                                        const Loss& loss,
                                        const RiskSpectrum& spectrum,
                                        const std::vector<Vec>& candidates,
                                        const Vec& x,
                                        std::vector<double> eps_grid = {},
                                        const QuadSpec& utility_quad = {1e-7, 0.0, 4000, 8});

}  // namespace eic
