#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eic/losses.hpp"
#include "eic/model.hpp"

namespace eic {

struct ParamTransform {
  enum class Kind { AffineInvertible, CoordinatewiseMonotoneC1, Custom };
  Kind kind = Kind::Custom;
  std::string name;
  std::function<Vec(const Vec&)> fwd, inv;
  std::function<double(const Vec&)> jac_det_fwd;  // |det dF/dtheta|
  std::function<bool(const ParameterSpace&)> applicable_fn;

  bool applicable(const ParameterSpace& space) const;

  static ParamTransform affine(Vec scale, Vec shift);  // positive scales
  static ParamTransform cube_plus_linear();            // theta^3 + theta
  static ParamTransform cube_root();  // needs strictly positive boxes
  static ParamTransform custom(std::string name, std::function<Vec(const Vec&)> fwd,
                               std::function<Vec(const Vec&)> inv,
                               std::function<double(const Vec&)> jac_det_fwd);
};

struct ObsTransform {
  enum class Kind { AffineInvertible, CoordinatewisePower3, PiecewiseAffine, CdfMap };
  Kind kind = Kind::AffineInvertible;
  std::string name;
  std::function<Vec(const Vec&)> fwd, inv;
  std::function<double(const Vec&)> jac_det_inv;  // |det dG^{-1}/dy|
  std::vector<double> breakpoints_y;  // per-axis kink images, quadrature seeds
  bool continuous_only = false;

  static ObsTransform affine(double a, double b);  // a > 0, per axis
  static ObsTransform power3();
  static ObsTransform piecewise_affine();  // slope 1 below 0, slope 2 above
  static ObsTransform cdf_map();           // standard normal cdf per axis
};

enum class NoiseKind { BernoulliHalf, Uniform01, Gauss01, Degenerate };

const char* noise_name(NoiseKind k);

// Pushforward problems.  Parameter transforms remap the parameter space,
// prior (with the Jacobian correction) and conditional family; observation
// transforms remap observations by the change-of-variables formula; noise
// augmentation appends an independent coordinate to every observation.
EstimationProblem transform_parameters(const EstimationProblem& p,
                                       const ParamTransform& t);
EstimationProblem transform_observations(const EstimationProblem& p,
                                         const ObsTransform& t);
EstimationProblem augment_with_noise(const EstimationProblem& p, NoiseKind k);

enum class Verdict { Pass, Fail, Inconclusive };

const char* verdict_name(Verdict v);

struct CheckResult {
  double max_abs_dev = 0.0;
  double max_rel_dev = 0.0;
  // original and transformed loss value per pair
  std::vector<std::array<double, 2>> per_pair;
  double ratio_min = 1.0, ratio_max = 1.0;  // transformed / original
  Verdict verdict = Verdict::Inconclusive;
};

struct CheckThresholds {
  double pass_below = 1e-5;
  double fail_above = 1e-2;
};

using ThetaPairs = std::vector<std::pair<Vec, Vec>>;

CheckResult check_irp(const Loss& loss, const EstimationProblem& p,
                      const ParamTransform& t, const ThetaPairs& pairs,
                      const CheckThresholds& thr = {});
CheckResult check_iro(const Loss& loss, const EstimationProblem& p,
                      const ObsTransform& t, const ThetaPairs& pairs,
                      const CheckThresholds& thr = {});
// PreconditionViolated unless the two problems agree (prior density and
// conditional distribution) at both elements of every pair.
CheckResult check_iia(const Loss& loss, const EstimationProblem& a,
                      const EstimationProblem& b, const ThetaPairs& pairs,
                      const CheckThresholds& thr = {});
CheckResult check_isi(const Loss& loss, const EstimationProblem& p,
                      NoiseKind noise, const ThetaPairs& pairs,
                      const CheckThresholds& thr = {});

// Quantile function of the likelihood ratio r = f_theta1/f_theta2 under
// f_theta2: exact step function on finite observation spaces, seeded
// empirical quantile otherwise.
class CFunction {
public:
  double operator()(double t) const;  // t in (0, 1]
  bool discrete() const { return discrete_; }
  // (cumulative mass, ratio) steps, ascending in ratio (discrete case)
  const std::vector<std::pair<double, double>>& steps() const { return steps_; }
  double integral01() const;

  static CFunction from_steps(std::vector<std::pair<double, double>> steps);
  static CFunction from_samples(std::vector<double> sorted_ratios);

private:
  bool discrete_ = true;
  std::vector<std::pair<double, double>> steps_;
  std::vector<double> samples_;
};

CFunction c_function(const EstimationProblem& p, const Vec& theta1,
                     const Vec& theta2, long n_samples = 100000,
                     std::uint64_t seed = 0);

// Monotone step density on [0,1] carrying the same f-divergences against the
// uniform density as (f_theta1, f_theta2); scalar continuous observations
// only.  Cell values are exact cell averages of the density ratio under the
// quantile map of f_theta2, sorted ascending.
struct Rearrangement1D {
  std::vector<double> values;
  double delta = 0.0;
  double p_density(double t) const;
};

Rearrangement1D canonical_rearrangement_1d(const EstimationProblem& p,
                                           const Vec& theta1, const Vec& theta2,
                                           int cells = 512);

double f_divergence_of_rearrangement(const Generator& gen,
                                     const Rearrangement1D& r);

struct AxiomAuditRow {
  std::string axiom;  // IRP / IRO / IIA / ISI
  std::string item;   // transform or noise name
  double max_rel_dev = 0.0;
  double ratio_min = 1.0, ratio_max = 1.0;
  Verdict verdict = Verdict::Inconclusive;
};

struct BatteryConfig {
  int n_pairs = 6;
  std::uint64_t seed = 41;
  CheckThresholds thresholds;
};

// Runs the fixed transform/noise catalog applicable to the problem.  The IIA
// row needs a partner problem agreeing with `p` at the checked pairs.  Pass
// one explicitly, or pass nullptr: scalar box problems then get a per-pair
// partner built with iia_partner_problem, and other problems skip the row.
std::vector<AxiomAuditRow> axiom_battery(const Loss& loss,
                                         const EstimationProblem& p,
                                         const EstimationProblem* iia_partner,
                                         const BatteryConfig& cfg = {});

// Partner construction for IIA audits on scalar box parameter spaces: keeps
// the prior density fixed at theta1/theta2 and moves mass elsewhere.
EstimationProblem iia_partner_problem(const EstimationProblem& p,
                                      const Vec& theta1, const Vec& theta2);

ThetaPairs seeded_theta_pairs(const EstimationProblem& p, int n,
                              std::uint64_t seed);

}  // namespace eic
