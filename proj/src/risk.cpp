#include "eic/risk.hpp"

#include <algorithm>
#include <cmath>

#include "eic/estimators.hpp"

namespace eic {

// ------------------------------------------------------------ RiskSpectrum

RiskSpectrum RiskSpectrum::smooth_step(double vmax) {
  require(vmax > 0.0, Errc::InvalidSpectrum, "vmax must be positive");
  RiskSpectrum s;
  s.family_ = Family::SmoothStep;
  s.name_ = "smooth_step";
  s.vmax_ = vmax;
  s.t_ = [vmax](double t, double eps) {
    double u = t / eps;
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return vmax;
    return vmax * u * u * (3.0 - 2.0 * u);
  };
  return s;
}

RiskSpectrum RiskSpectrum::exp_saturate(double vmax) {
  require(vmax > 0.0, Errc::InvalidSpectrum, "vmax must be positive");
  RiskSpectrum s;
  s.family_ = Family::ExpSaturate;
  s.name_ = "exp_saturate";
  s.vmax_ = vmax;
  s.t_ = [vmax](double t, double eps) {
    double u = t / eps;
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return vmax;
    return vmax * (1.0 - std::exp(-u * u / (1.0 - u * u)));
  };
  return s;
}

RiskSpectrum RiskSpectrum::custom(std::function<double(double, double)> T,
                                  double vmax) {
  require((bool)T, Errc::InvalidSpectrum, "curve function required");
  require(vmax > 0.0, Errc::InvalidSpectrum, "vmax must be positive");
  RiskSpectrum s;
  s.family_ = Family::Custom;
  s.name_ = "custom";
  s.vmax_ = vmax;
  s.t_ = std::move(T);
  s.probe_();
  return s;
}

void RiskSpectrum::probe_() const {
  for (double eps : {1.0, 1e-2}) {
    double t0 = t_(0.0, eps);
    require(std::isfinite(t0) && t0 < vmax_ - 1e-12, Errc::InvalidSpectrum,
            "curve must start strictly below its ceiling");
    double prev = t0;
    for (int i = 1; i <= 64; ++i) {
      double v = t_(2.0 * eps * i / 64.0, eps);
      require(std::isfinite(v) && v >= prev - 1e-12, Errc::InvalidSpectrum,
              "curve must be non-decreasing");
      prev = v;
    }
    for (double m : {1.0, 1.25, 2.0})
      require(std::fabs(t_(m * eps, eps) - vmax_) <= 1e-9 * vmax_,
              Errc::InvalidSpectrum,
              "curve must sit at its ceiling beyond the error limit");
  }
}

double RiskSpectrum::T(double t, double eps) const {
  require(eps > 0.0, Errc::DomainError, "error limit must be positive");
  return t_(t, eps);
}

double RiskSpectrum::attenuation(double t, double eps) const {
  require(eps > 0.0, Errc::DomainError, "error limit must be positive");
  double t0 = t_(0.0, eps);
  return (vmax_ - t_(t, eps)) / (vmax_ - t0);
}

// -------------------------------------------------------- expected utility

namespace {

// Per-axis doubling scan for the loss level set L(., theta_hat) = eps.
// Returns half-widths (down, up) clamped to the box; breakeven only needs a
// rough bracket, since the attenuation vanishes beyond it anyway.
void support_radii(const EstimationProblem& p, const Loss& loss, double eps,
                   const Vec& theta_hat, Vec& down, Vec& up) {
  const ParameterSpace& sp = p.theta_space();
  int n = sp.dim();
  down.assign(n, 0.0);
  up.assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double w = sp.upper[k] - sp.lower[k];
    for (int dir = 0; dir < 2; ++dir) {
      double limit = dir == 0 ? theta_hat[k] - sp.lower[k]
                              : sp.upper[k] - theta_hat[k];
      double r = std::min(limit, 1e-6 * w);
      while (r < limit) {
        Vec t = theta_hat;
        t[k] += dir == 0 ? -r : r;
        double v = loss(p, t, theta_hat);
        if (!std::isfinite(v) || v >= eps) break;
        r = std::min(limit, 2.0 * r);
        if (r == limit) break;
      }
      double padded = std::min(limit, 1.5 * r);
      (dir == 0 ? down : up)[k] = padded;
    }
  }
}

}  // namespace

UtilityResult expected_utility(const EstimationProblem& p, const Loss& loss,
                               const RiskSpectrum& spectrum, double eps,
                               const Vec& theta_hat, const Vec& x,
                               const QuadSpec& spec) {
  require(eps > 0.0, Errc::DomainError, "error limit must be positive");
  const ParameterSpace& sp = p.theta_space();
  UtilityResult out;
  if (sp.kind == ParameterSpace::Kind::FiniteSet) {
    std::vector<double> pmf = posterior_pmf(p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < sp.points.size(); ++i) {
      if (pmf[i] == 0.0) continue;
      s += pmf[i] *
           spectrum.attenuation(loss(p, sp.points[i], theta_hat), eps);
    }
    out.value = s;
    out.quad_error = 0.0;
    out.stable = true;
    return out;
  }
  require(sp.dim() <= 3, Errc::UnsupportedClass,
          "utility integral supports at most 3 parameter dimensions");
  double z = evidence(p, x);
  require(z > 0.0, Errc::DomainError, "evidence vanishes at this observation");

  Vec down, up;
  support_radii(p, loss, eps, theta_hat, down, up);
  IntegBox box{Vec(sp.dim()), Vec(sp.dim())};
  std::vector<std::vector<double>> bps(sp.dim());
  for (int k = 0; k < sp.dim(); ++k) {
    box.lo[k] = theta_hat[k] - down[k];
    box.hi[k] = theta_hat[k] + up[k];
    bps[k] = {theta_hat[k]};
  }
  auto f = [&](const Vec& th) {
    double w = posterior_unnorm(p, th, x);
    if (w <= 0.0) return 0.0;
    return w * spectrum.attenuation(loss(p, th, theta_hat), eps);
  };
  IntegralResult r = integrate_box(f, box, spec, bps);
  out.value = r.value / z;
  out.quad_error = r.error / z;
  out.stable = r.converged && out.value > 0.0 &&
               out.quad_error <= 0.05 * out.value;
  return out;
}

// --------------------------------------------------------------- curves

std::vector<double> default_eps_grid() {
  return {1.0, 1e-1, 1e-2, 1e-3, 1e-4};
}

RatioCurve utility_ratio_curve(const EstimationProblem& p, const Loss& loss,
                               const RiskSpectrum& spectrum, const Vec& theta1,
                               const Vec& theta2, const Vec& x,
                               std::vector<double> eps_grid,
                               const HessianConfig& hessian,
                               const QuadSpec& utility_quad) {
  if (eps_grid.empty()) eps_grid = default_eps_grid();
  std::sort(eps_grid.rbegin(), eps_grid.rend());
  RatioCurve out;
  if (p.theta_space().kind == ParameterSpace::Kind::FiniteSet) {
    std::vector<double> pmf = posterior_pmf(p, x);
    double m1 = 0.0, m2 = 0.0;
    const auto& pts = p.theta_space().points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      bool e1 = true, e2 = true;
      for (std::size_t k = 0; k < theta1.size(); ++k) {
        if (pts[i][k] != theta1[k]) e1 = false;
        if (pts[i][k] != theta2[k]) e2 = false;
      }
      if (e1) m1 = pmf[i];
      if (e2) m2 = pmf[i];
    }
    out.predicted_limit = m1 / m2;
  } else {
    out.predicted_limit = eic_metric(loss, p, x, theta1, hessian) /
                          eic_metric(loss, p, x, theta2, hessian);
  }
  for (double eps : eps_grid) {
    UtilityResult u1 = expected_utility(p, loss, spectrum, eps, theta1, x,
                                        utility_quad);
    UtilityResult u2 = expected_utility(p, loss, spectrum, eps, theta2, x,
                                        utility_quad);
    RatioPoint pt;
    pt.eps = eps;
    pt.u1 = u1.value;
    pt.u2 = u2.value;
    pt.ratio = u2.value > 0.0 ? u1.value / u2.value : kInf;
    pt.stable = u1.stable && u2.stable && u2.value > 0.0;
    out.points.push_back(pt);
  }
  out.eps_min_stable = 0.0;
  for (const auto& pt : out.points) {
    if (pt.stable) {
      out.eps_min_stable = pt.eps;
      out.ratio_at_min_stable = pt.ratio;
    }
  }
  return out;
}

InferiorityReport ei_inferiority_report(const EstimationProblem& p,
                                        const Loss& loss,
                                        const RiskSpectrum& spectrum,
                                        const std::vector<Vec>& candidates,
                                        const Vec& x,
                                        std::vector<double> eps_grid,
                                        const QuadSpec& utility_quad) {
  require(candidates.size() >= 2, Errc::InvalidConfig,
          "need at least two candidates to compare");
  if (eps_grid.empty()) eps_grid = default_eps_grid();
  std::sort(eps_grid.rbegin(), eps_grid.rend());

  InferiorityReport out;
  out.candidates = candidates;
  out.eps_grid = eps_grid;
  std::vector<std::vector<bool>> stable(eps_grid.size());
  for (std::size_t e = 0; e < eps_grid.size(); ++e) {
    std::vector<double> row(candidates.size());
    stable[e].resize(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      UtilityResult u = expected_utility(p, loss, spectrum, eps_grid[e],
                                         candidates[c], x, utility_quad);
      row[c] = u.value;
      stable[e][c] = u.stable;
    }
    out.utilities.push_back(std::move(row));
  }

  std::size_t n = candidates.size(), m = eps_grid.size();
  out.inferior.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      // longest suffix of the (descending) eps grid on which i loses to j
      std::size_t k = m;
      while (k > 0 && stable[k - 1][i] && stable[k - 1][j] &&
             out.utilities[k - 1][i] < out.utilities[k - 1][j])
        --k;
      bool inf = m - k >= 2;
      PairVerdict v;
      v.i = (int)i;
      v.j = (int)j;
      v.inferior = inf;
      v.eps_from = inf ? eps_grid[k] : 0.0;
      out.pairs.push_back(v);
      if (inf) out.inferior[i] = true;
    }
  }
  out.maximal.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.maximal[i] = !out.inferior[i];
  return out;
}

}  // namespace eic
