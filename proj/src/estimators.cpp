#include "eic/estimators.hpp"

#include <cmath>

namespace eic {

std::string EstimatorSpec::name() const {
  switch (kind) {
    case EstimatorKind::DMAP:
      return "dmap";
    case EstimatorKind::CMAP:
      return "cmap";
    case EstimatorKind::WF:
      return "wf";
    case EstimatorKind::PMLE:
      return "pmle(" + penalty_name + ")";
    case EstimatorKind::Bayes:
      return "bayes(" + (loss ? loss->name() : std::string("?")) + ")";
    case EstimatorKind::EIC:
      return "eic(" + (loss ? loss->name() : std::string("?")) + ")";
  }
  return "?";
}

double eic_metric(const Loss& loss, const EstimationProblem& p, const Vec& x,
                  const Vec& theta, const HessianConfig& cfg) {
  SymMatrix h = hessian_at_diagonal(loss, p, theta, cfg);
  if (!h.positive_definite()) return std::nan("");
  return posterior_unnorm(p, theta, x) / std::sqrt(h.det());
}

namespace {

EstimateSet dmap_rule(const EstimationProblem& p, const Vec& x,
                      const ArgmaxConfig& argmax_cfg) {
  const ParameterSpace& sp = p.theta_space();
  require(sp.kind == ParameterSpace::Kind::FiniteSet, Errc::UnsupportedClass,
          "posterior-mode selection needs a finite parameter set");
  std::vector<double> pmf = posterior_pmf(p, x);
  auto metric = [&](const Vec& t) {
    for (std::size_t i = 0; i < sp.points.size(); ++i) {
      bool eq = true;
      for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] != sp.points[i][k]) {
          eq = false;
          break;
        }
      if (eq) return pmf[i];
    }
    fail(Errc::DomainError, "candidate is not a member of the parameter set");
  };
  return argmax(metric, sp, argmax_cfg);
}

EstimateSet bayes_rule(const EstimatorSpec& spec, const EstimationProblem& p,
                       const Vec& x) {
  require(spec.loss.has_value(), Errc::InvalidConfig,
          "risk minimisation needs a loss");
  const Loss& loss = *spec.loss;
  const ParameterSpace& sp = p.theta_space();

  std::function<double(const Vec&)> expected_loss;
  ParameterSpace search = sp;
  if (sp.kind == ParameterSpace::Kind::FiniteSet) {
    std::vector<double> pmf = posterior_pmf(p, x);
    expected_loss = [&, pmf](const Vec& t) {
      double s = 0.0;
      for (std::size_t i = 0; i < sp.points.size(); ++i)
        s += pmf[i] * loss(p, t, sp.points[i]);
      return s;
    };
    if (spec.extend_to_box) {
      Vec lo = sp.points[0], hi = sp.points[0];
      for (const auto& pt : sp.points)
        for (std::size_t k = 0; k < pt.size(); ++k) {
          lo[k] = std::min(lo[k], pt[k]);
          hi[k] = std::max(hi[k], pt[k]);
        }
      for (std::size_t k = 0; k < lo.size(); ++k)
        require(lo[k] < hi[k], Errc::InvalidConfig,
                "degenerate hull for the extended search box");
      search = ParameterSpace::box(lo, hi);
    }
  } else {
    double z = evidence(p, x, spec.posterior_quad);
    require(z > 0.0, Errc::DomainError,
            "evidence vanishes at this observation");
    IntegBox box{sp.lower, sp.upper};
    expected_loss = [&, z, box](const Vec& t) {
      auto f = [&](const Vec& th) {
        return loss(p, t, th) * posterior_unnorm(p, th, x);
      };
      IntegralResult r = integrate_box(f, box, spec.posterior_quad);
      require(r.converged, Errc::IntegralNotConverged,
              "posterior loss expectation did not converge");
      return r.value / z;
    };
  }
  auto metric = [&](const Vec& t) { return -expected_loss(t); };
  EstimateSet out = argmax(metric, search, spec.argmax);
  out.value = -out.value;
  for (double& v : out.values) v = -v;
  return out;
}

}  // namespace

EstimateSet estimate(const EstimatorSpec& spec, const EstimationProblem& p,
                     const Vec& x) {
  require(p.model().obs_space().contains(x), Errc::OutOfSupport,
          "observation lies outside the observation space");
  const ParameterSpace& sp = p.theta_space();
  switch (spec.kind) {
    case EstimatorKind::DMAP:
      return dmap_rule(p, x, spec.argmax);
    case EstimatorKind::CMAP: {
      auto metric = [&](const Vec& t) { return posterior_unnorm(p, t, x); };
      return argmax(metric, sp, spec.argmax);
    }
    case EstimatorKind::WF: {
      auto metric = [&](const Vec& t) {
        SymMatrix info = fisher_information(p, t, spec.fisher);
        double det = info.det();
        if (!(det > 0.0)) return std::nan("");
        return posterior_unnorm(p, t, x) / std::sqrt(det);
      };
      return argmax(metric, sp, spec.argmax);
    }
    case EstimatorKind::PMLE: {
      require((bool)spec.penalty, Errc::InvalidConfig,
              "penalised likelihood needs a penalty function");
      auto metric = [&](const Vec& t) {
        double g = spec.penalty(t);
        if (!(g >= 0.0) || !std::isfinite(g)) return std::nan("");
        return cond_density(p, t, x) * g;
      };
      return argmax(metric, sp, spec.argmax);
    }
    case EstimatorKind::Bayes:
      return bayes_rule(spec, p, x);
    case EstimatorKind::EIC: {
      if (sp.kind == ParameterSpace::Kind::FiniteSet)
        return dmap_rule(p, x, spec.argmax);
      require(spec.loss.has_value(), Errc::InvalidConfig,
              "error-intolerance estimation needs a loss");
      require(spec.loss->flags().smooth, Errc::IllDefinedEstimator,
              "error-intolerance estimation needs a loss that is smooth "
              "around the diagonal");
      auto metric = [&](const Vec& t) {
        return eic_metric(*spec.loss, p, x, t, spec.hessian);
      };
      return argmax(metric, sp, spec.argmax);
    }
  }
  fail(Errc::InvalidConfig, "unknown estimator kind");
}

Loss pmle_to_loss(std::function<double(const Vec&)> g, std::string g_name) {
  return Loss::pmle_induced(std::move(g), std::move(g_name));
}

std::function<double(const Vec&)> induced_penalty(const Loss& loss,
                                                  const EstimationProblem& p,
                                                  const HessianConfig& cfg) {
  require(loss.flags().smooth, Errc::IllDefinedEstimator,
          "penalty induction needs a loss that is smooth around the diagonal");
  return [loss, p, cfg](const Vec& theta) {
    SymMatrix h = hessian_at_diagonal(loss, p, theta, cfg);
    double det = h.det();
    require(h.positive_definite() && det > 0.0, Errc::IllDefinedEstimator,
            "loss curvature is not positive definite at theta");
    return prior_density(p, theta) / std::sqrt(det);
  };
}

}  // namespace eic
