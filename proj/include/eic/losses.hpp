#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "eic/model.hpp"
#include "eic/numerics.hpp"

namespace eic {

// Convex generator of an f-divergence, with exact derivatives and the
// metadata the feasibility checks need.
struct Generator {
  std::string name;
  std::function<double(double)> F, dF, d2F;
  double second_at_one = 0.0;  // F''(1)
  // true when F(0+) and F'(inf) are both finite
  bool problem_continuous = false;
};

enum class BuiltinGenerator { Hellinger2, KL, ChiSquared };

Generator builtin_generator(BuiltinGenerator g);

struct LossFlags {
  bool smooth = false;
  bool discriminative_checked = false;
  bool conditional_distribution_based = false;
};

enum class LossKind {
  Quadratic,
  FDivergence,
  Bhattacharyya,
  PmleInduced,
  NoIRO,
  NoIIA,
  NoISI,
  Custom,
};

class Loss {
public:
  LossKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const LossFlags& flags() const { return flags_; }
  const Generator* generator() const;  // FDivergence only, else nullptr
  const QuadSpec& quad() const { return quad_; }

  double operator()(const EstimationProblem& p, const Vec& theta1,
                    const Vec& theta2) const;

  Loss with_quad(const QuadSpec& q) const;
  Loss mark_discriminative() const;

  static Loss quadratic();
  static Loss f_divergence(BuiltinGenerator g);
  static Loss f_divergence(Generator g);
  static Loss bhattacharyya();
  static Loss pmle_induced(std::function<double(const Vec&)> g,
                           std::string g_name = "g");
  static Loss no_iro();
  static Loss no_isi();
  // weight(theta2) = Prob_{theta ~ prior}(l1(theta, theta2) <= threshold),
  // estimated by seeded Monte Carlo over prior draws; loss = weight * l2
  static Loss no_iia(Loss l1, Loss l2, double threshold, int mc_samples = 2048,
                     std::uint64_t seed = 17);
  static Loss custom(
      std::string name, LossFlags flags,
      std::function<double(const EstimationProblem&, const Vec&, const Vec&)> fn);
  // scale(problem, theta2) * inner(theta1, theta2), reported as Custom
  static Loss scaled(
      std::function<double(const EstimationProblem&, const Vec&)> scale,
      Loss inner, std::string name, LossFlags flags);

private:
  LossKind kind_ = LossKind::Custom;
  std::string name_;
  LossFlags flags_;
  QuadSpec quad_{1e-8, 1e-8, 4000, 8};
  std::shared_ptr<const Generator> gen_;
  std::function<double(const Vec&)> penalty_;
  std::shared_ptr<const Loss> inner_, l1_, l2_;
  std::function<double(const EstimationProblem&, const Vec&)> scale_;
  std::function<double(const EstimationProblem&, const Vec&, const Vec&)> fn_;
  double threshold_ = 0.0;
  int mc_samples_ = 0;
  std::uint64_t seed_ = 0;
  double eval_(const EstimationProblem& p, const Vec& t1, const Vec& t2) const;
};

double eval_loss(const Loss& loss, const EstimationProblem& p, const Vec& t1,
                 const Vec& t2);

double f_divergence_expectation(const Generator& gen,
                                const EstimationProblem& p, const Vec& t1,
                                const Vec& t2, const QuadSpec& spec);

double hellinger2(const EstimationProblem& p, const Vec& t1, const Vec& t2,
                  const QuadSpec& spec = {1e-8, 1e-8, 4000, 8});

// -ln(1 - H^2); SingularDivergence when H^2 >= 1 - 1e-12
double bhattacharyya_loss(const EstimationProblem& p, const Vec& t1,
                          const Vec& t2,
                          const QuadSpec& spec = {1e-8, 1e-8, 4000, 8});

// min over a grid of theta' with |theta'-theta| >= delta of L(theta', theta)
// stays strictly positive
bool check_discriminative(const Loss& loss, const EstimationProblem& p,
                          const Vec& theta, double delta,
                          int grid_per_axis = 16);

// Losses whose error-intolerance estimate reproduces maximum likelihood:
// a prior-squashing rescale of the quadratic loss, and a Fisher-normalised
// rescale of the squared Hellinger loss (the latter is reparameterisation
// invariant).
Loss mle_via_quadratic();
Loss mle_via_hellinger(const FisherConfig& fisher = {});

}  // namespace eic
