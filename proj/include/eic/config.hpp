#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eic/estimators.hpp"
#include "eic/losses.hpp"
#include "eic/model.hpp"
#include "eic/report.hpp"

namespace eic {

inline constexpr int kSpecVersion = 1;

struct RunConfig {
  std::uint64_t seed = 0;
  std::string command;
  std::optional<EstimationProblem> problem;
  std::optional<Loss> loss;
  std::vector<EstimatorSpec> estimators;
  std::vector<std::string> estimator_names;
  std::vector<Vec> observations;
  std::string out_path;
  std::string format = "json";
  // command knobs
  double compare_tol = 1e-4;
  int fisher_n_thetas = 10;
  double fisher_tol = 1e-2;
  Vec limit_theta1, limit_theta2;
  std::vector<double> limit_eps;
  double limit_tol = 0.02;
  int pmle_n_penalties = 10;
  double pmle_tol = 1e-4;
  int audit_pairs = 6;
  Vec c_theta1, c_theta2;
  long c_samples = 100000;
  int c_grid = 64;
  // numeric overrides
  QuadSpec loss_quad{1e-8, 1e-8, 4000, 8};
  QuadSpec posterior_quad{1e-10, 0.0, 4000, 8};
  HessianConfig hessian;
  ArgmaxConfig argmax;
  Json resolved;  // config as parsed, embedded in reports
};

// Strict parser: unknown keys are errors, spec_version is required.
// Throws Error(InvalidConfig) with a message naming the offending key.
RunConfig parse_config(const Json& j);

// "key=value" numeric override (quad_rel, quad_abs, posterior_quad_rel,
// hessian_step, argmax_grid, compare_tol, fisher_tol, limit_tol, pmle_tol)
void apply_tol_override(RunConfig& cfg, const std::string& kv);

// Exit codes: 0 pass, 1 check failure, 2 config error, 3 numeric error.
int run(RunConfig& cfg);

// Full command-line entry (flag parsing + config load + run).
int cli_main(const std::vector<std::string>& args);

}  // namespace eic
