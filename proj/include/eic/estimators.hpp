#pragma once

#include <functional>
#include <optional>
#include <string>

#include "eic/losses.hpp"
#include "eic/model.hpp"
#include "eic/numerics.hpp"

namespace eic {

enum class EstimatorKind { DMAP, CMAP, WF, PMLE, Bayes, EIC };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::CMAP;
  std::optional<Loss> loss;                   // EIC, Bayes
  std::function<double(const Vec&)> penalty;  // PMLE
  std::string penalty_name = "g";
  bool extend_to_box = false;                 // Bayes on finite theta sets
  FisherConfig fisher;                        // WF
  HessianConfig hessian;                      // EIC
  ArgmaxConfig argmax;
  QuadSpec posterior_quad{1e-10, 0.0, 4000, 8};  // Bayes expectations

  std::string name() const;
};

// Point estimate(s) for one observation.  Metric conventions:
//   DMAP   argmax of the posterior pmf (normalised when the prior is proper)
//   CMAP   argmax of the unnormalised posterior density
//   WF     argmax of posterior_unnorm / sqrt(det Fisher)
//   PMLE   argmax of likelihood * penalty
//   Bayes  argmin of posterior-expected loss (values hold expected losses)
//   EIC    discrete problems: the DMAP rule; otherwise argmax of
//          posterior_unnorm / sqrt(det hessian_at_diagonal)
EstimateSet estimate(const EstimatorSpec& spec, const EstimationProblem& p,
                     const Vec& x);

double eic_metric(const Loss& loss, const EstimationProblem& p, const Vec& x,
                  const Vec& theta, const HessianConfig& cfg = {});

// Loss whose error-intolerance estimate equals the penalised MLE with
// penalty g: (prior(theta2)/g(theta2))^(2/M) * |theta1 - theta2|^2.
Loss pmle_to_loss(std::function<double(const Vec&)> g, std::string g_name = "g");

// Penalty whose penalised MLE equals the error-intolerance estimate for the
// given loss: g(theta) = prior(theta) / sqrt(det hessian_at_diagonal(theta)).
std::function<double(const Vec&)> induced_penalty(const Loss& loss,
                                                  const EstimationProblem& p,
                                                  const HessianConfig& cfg = {});

}  // namespace eic
