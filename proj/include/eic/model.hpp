#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eic/errors.hpp"
#include "eic/numerics.hpp"
#include "eic/rng.hpp"

namespace eic {

struct ParameterSpace {
  enum class Kind { FiniteSet, Box };
  Kind kind = Kind::Box;
  std::vector<Vec> points;  // FiniteSet
  Vec lower, upper;         // Box

  static ParameterSpace finite(std::vector<Vec> pts);
  static ParameterSpace box(Vec lo, Vec hi);

  int dim() const;
  bool contains(const Vec& theta, double pad = 0.0) const;
  // smallest distance to a box face, scaled per axis in absolute units;
  // +inf for finite sets
  double boundary_distance(const Vec& theta) const;
};

struct ObservationSpace {
  enum class Kind { FiniteSet, Continuum };
  Kind kind = Kind::Continuum;
  std::vector<Vec> points;  // FiniteSet support
  IntegBox box;             // Continuum support

  static ObservationSpace finite(std::vector<Vec> pts);
  static ObservationSpace continuum(IntegBox b);

  int dim() const;
  bool contains(const Vec& x, double tol = 1e-9) const;
};

enum class Family {
  Bernoulli,
  BinomialN,
  Categorical,
  GaussianKnownSigma,
  GaussianMeanSigma,
  ExponentialRate,
  IIDProduct,
  Custom,
};

// Low-dimensional coordinates u(x) sufficient for every theta-expectation the
// toolkit needs: log f_theta(x) = log_density(theta, u(x)) + (term free of
// theta), and weight(theta, .) is the distribution of u(x) under f_theta.
// The identity reduction (u = x) is the default.
struct Reduction {
  bool finite = false;
  std::vector<Vec> finite_points;
  IntegBox domain;
  std::vector<std::vector<double>> breakpoints;  // per axis, quadrature seeds
  std::function<double(const Vec&, const Vec&)> weight;
  std::function<double(const Vec&, const Vec&)> log_density;
};

class DataModel {
public:
  Family family() const;
  const std::string& name() const;
  int theta_dim() const;
  const ObservationSpace& obs_space() const;

  double density(const Vec& theta, const Vec& x) const;
  double log_density(const Vec& theta, const Vec& x) const;

  bool has_reduction() const;
  const Reduction& reduction() const;  // UnsupportedClass if absent

  bool has_analytic_fisher() const;
  SymMatrix analytic_fisher(const Vec& theta) const;  // NoAnalyticForm if none

  bool can_sample() const;
  void sample(const Vec& theta, Rng& rng, Vec& out) const;

  bool has_cdf() const;  // scalar observations only
  double cdf(const Vec& theta, double x) const;

  void validate_theta(const Vec& theta) const;  // DomainError on bad values

  static DataModel bernoulli();
  static DataModel binomial(int n);
  static DataModel categorical(int k);
  static DataModel gaussian_known_sigma(double sigma);
  static DataModel gaussian_mean_sigma(int n);
  static DataModel exponential_rate();
  static DataModel iid_product(DataModel base, int count);
  // finite theta-set x finite observation-set conditional pmf table;
  // pmf_rows[i] is the distribution over obs_points given theta_points[i]
  static DataModel table(std::vector<Vec> theta_points,
                         std::vector<Vec> obs_points,
                         std::vector<std::vector<double>> pmf_rows);
  static DataModel custom(std::string name, int theta_dim,
                          ObservationSpace obs,
                          std::function<double(const Vec&, const Vec&)> density,
                          std::function<void(const Vec&, Rng&, Vec&)> sampler = {},
                          std::function<void(const Vec&)> theta_check = {});
  // custom model carrying an explicit expectation route instead of the
  // automatic identity one
  static DataModel custom_reduced(
      std::string name, int theta_dim, ObservationSpace obs,
      std::function<double(const Vec&, const Vec&)> density,
      std::function<double(const Vec&, const Vec&)> log_density,
      Reduction reduction,
      std::function<void(const Vec&, Rng&, Vec&)> sampler = {},
      std::function<void(const Vec&)> theta_check = {});

  // Same conditional family over a remapped parameter: density'(eta, x) =
  // density(to_base(eta), x).  Keeps the reduction, sampler and cdf; drops
  // any closed-form information matrix.
  DataModel with_parameter_map(
      std::string name_suffix, std::function<Vec(const Vec&)> to_base,
      std::function<void(const Vec&)> theta_check = {}) const;

  struct Impl;
  explicit DataModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  const Impl& impl() const;

private:
  std::shared_ptr<const Impl> impl_;
};

class Prior {
public:
  enum class Kind {
    FinitePmf,
    UniformBox,
    BetaParams,
    GaussianParams,
    PowerLawSigma,
    CustomDensity,
  };

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  // false for PowerLawSigma and custom densities declared improper; such
  // priors support argmax-style use only
  bool claims_normalised() const { return normalised_; }

  double density(const ParameterSpace& space, const Vec& theta) const;
  bool can_sample() const;
  Vec sample(const ParameterSpace& space, Rng& rng) const;

  static Prior finite_pmf(std::vector<double> weights);
  static Prior uniform_box();
  static Prior beta(double a, double b);
  static Prior gaussian(Vec mean, Vec sigma);
  static Prior power_law_sigma(int axis);
  static Prior custom(std::function<double(const Vec&)> dens, bool normalised,
                      std::function<Vec(Rng&)> sampler = {},
                      std::string name = "custom");

private:
  Kind kind_ = Kind::UniformBox;
  std::string name_;
  bool normalised_ = true;
  std::vector<double> weights_;
  double a_ = 1.0, b_ = 1.0;
  Vec mean_, sigma_;
  int axis_ = 0;
  std::function<double(const Vec&)> dens_;
  std::function<Vec(Rng&)> sampler_;
  struct CdfCache;
  mutable std::shared_ptr<CdfCache> cache_;
  Vec sample_grid_inverse_(const ParameterSpace& space, Rng& rng) const;
};

enum class ProblemClass { Discrete, Continuous, SemiContinuous };

enum class ValidationLevel { Light, Standard };

class EstimationProblem {
public:
  EstimationProblem(ParameterSpace theta_space, DataModel model, Prior prior,
                    ValidationLevel level = ValidationLevel::Standard);

  const ParameterSpace& theta_space() const { return theta_space_; }
  const DataModel& model() const { return model_; }
  const Prior& prior() const { return prior_; }
  ProblemClass problem_class() const { return class_; }
  int theta_dim() const;
  int obs_dim() const;

private:
  ParameterSpace theta_space_;
  DataModel model_;
  Prior prior_;
  ProblemClass class_;
  void validate_(ValidationLevel level) const;
};

double cond_density(const EstimationProblem& p, const Vec& theta, const Vec& x);
double likelihood_ratio(const EstimationProblem& p, const Vec& theta1,
                        const Vec& theta2, const Vec& x);
double prior_density(const EstimationProblem& p, const Vec& theta);
double posterior_unnorm(const EstimationProblem& p, const Vec& theta,
                        const Vec& x);
double evidence(const EstimationProblem& p, const Vec& x,
                const QuadSpec& spec = {1e-10, 0.0, 4000, 8});
double posterior(const EstimationProblem& p, const Vec& theta, const Vec& x,
                 const QuadSpec& spec = {1e-10, 0.0, 4000, 8});
// normalised posterior over the points of a finite parameter space
std::vector<double> posterior_pmf(const EstimationProblem& p, const Vec& x);

// E_{x ~ f_theta2}[ G(r_theta1,theta2(x)) ] routed through the model's
// reduction: exact sums on finite support, nested quadrature otherwise.
double expect_ratio_functional(const EstimationProblem& p, const Vec& theta1,
                               const Vec& theta2,
                               const std::function<double(double)>& G,
                               const QuadSpec& spec);

// integral (or sum) of f_theta over the observation space, via the same route
double normalisation_mass(const EstimationProblem& p, const Vec& theta,
                          const QuadSpec& spec = {1e-9, 0.0, 4000, 8});

}  // namespace eic
