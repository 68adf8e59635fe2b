#include "eic/axioms.hpp"

#include <algorithm>
#include <cmath>

namespace eic {

namespace {
constexpr double kInvSqrt2PiLocal = 0.3989422804014327;
}

// --------------------------------------------------------- ParamTransform

bool ParamTransform::applicable(const ParameterSpace& space) const {
  return applicable_fn ? applicable_fn(space) : true;
}

ParamTransform ParamTransform::affine(Vec scale, Vec shift) {
  require(scale.size() == shift.size() && !scale.empty(), Errc::InvalidConfig,
          "scale and shift must share a dimension");
  for (double s : scale)
    require(s > 0.0, Errc::InvalidConfig, "affine scales must be positive");
  ParamTransform t;
  t.kind = Kind::AffineInvertible;
  t.name = "affine";
  double jd = 1.0;
  for (double s : scale) jd *= s;
  t.fwd = [scale, shift](const Vec& th) {
    Vec out(th.size());
    for (std::size_t i = 0; i < th.size(); ++i)
      out[i] = scale[i] * th[i] + shift[i];
    return out;
  };
  t.inv = [scale, shift](const Vec& et) {
    Vec out(et.size());
    for (std::size_t i = 0; i < et.size(); ++i)
      out[i] = (et[i] - shift[i]) / scale[i];
    return out;
  };
  t.jac_det_fwd = [jd](const Vec&) { return jd; };
  std::size_t d = scale.size();
  t.applicable_fn = [d](const ParameterSpace& sp) {
    return (std::size_t)sp.dim() == d;
  };
  return t;
}

namespace {

// solve y = v^3 + v by a bracketed Newton iteration
double inv_cube_plus_linear(double y) {
  double lo = -1.0, hi = 1.0;
  while (lo * lo * lo + lo > y) lo *= 2.0;
  while (hi * hi * hi + hi < y) hi *= 2.0;
  double v = std::cbrt(y);
  for (int it = 0; it < 80; ++it) {
    double f = v * v * v + v - y;
    if (f > 0.0)
      hi = v;
    else
      lo = v;
    double step = f / (3.0 * v * v + 1.0);
    double next = v - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - v) <= 1e-15 * (1.0 + std::fabs(v))) return next;
    v = next;
  }
  return v;
}

Vec map_each(const Vec& v, double (*f)(double)) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return out;
}

}  // namespace

ParamTransform ParamTransform::cube_plus_linear() {
  ParamTransform t;
  t.kind = Kind::CoordinatewiseMonotoneC1;
  t.name = "cube_plus_linear";
  t.fwd = [](const Vec& th) {
    return map_each(th, [](double v) { return v * v * v + v; });
  };
  t.inv = [](const Vec& et) { return map_each(et, inv_cube_plus_linear); };
  t.jac_det_fwd = [](const Vec& th) {
    double j = 1.0;
    for (double v : th) j *= 3.0 * v * v + 1.0;
    return j;
  };
  return t;
}

ParamTransform ParamTransform::cube_root() {
  ParamTransform t;
  t.kind = Kind::CoordinatewiseMonotoneC1;
  t.name = "cube_root";
  t.fwd = [](const Vec& th) { return map_each(th, std::cbrt); };
  t.inv = [](const Vec& et) {
    return map_each(et, [](double v) { return v * v * v; });
  };
  t.jac_det_fwd = [](const Vec& th) {
    double j = 1.0;
    for (double v : th) j *= std::pow(v, -2.0 / 3.0) / 3.0;
    return j;
  };
  t.applicable_fn = [](const ParameterSpace& sp) {
    if (sp.kind == ParameterSpace::Kind::Box) {
      for (double v : sp.lower)
        if (v <= 0.0) return false;
      return true;
    }
    for (const auto& p : sp.points)
      for (double v : p)
        if (v <= 0.0) return false;
    return true;
  };
  return t;
}

ParamTransform ParamTransform::custom(std::string name,
                                      std::function<Vec(const Vec&)> fwd,
                                      std::function<Vec(const Vec&)> inv,
                                      std::function<double(const Vec&)> jac) {
  require((bool)fwd && (bool)inv && (bool)jac, Errc::InvalidConfig,
          "custom transform needs fwd, inv and a Jacobian");
  ParamTransform t;
  t.kind = Kind::Custom;
  t.name = std::move(name);
  t.fwd = std::move(fwd);
  t.inv = std::move(inv);
  t.jac_det_fwd = std::move(jac);
  return t;
}

// ----------------------------------------------------------- ObsTransform

ObsTransform ObsTransform::affine(double a, double b) {
  require(a > 0.0, Errc::InvalidConfig, "affine slope must be positive");
  ObsTransform t;
  t.kind = Kind::AffineInvertible;
  t.name = "obs_affine";
  t.fwd = [a, b](const Vec& x) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] + b;
    return out;
  };
  t.inv = [a, b](const Vec& y) {
    Vec out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - b) / a;
    return out;
  };
  t.jac_det_inv = [a](const Vec& y) {
    return std::pow(1.0 / a, (double)y.size());
  };
  return t;
}

ObsTransform ObsTransform::power3() {
  ObsTransform t;
  t.kind = Kind::CoordinatewisePower3;
  t.name = "obs_power3";
  t.fwd = [](const Vec& x) {
    return map_each(x, [](double v) { return v * v * v; });
  };
  t.inv = [](const Vec& y) { return map_each(y, std::cbrt); };
  t.jac_det_inv = [](const Vec& y) {
    double j = 1.0;
    for (double v : y) j *= std::pow(std::fabs(v), -2.0 / 3.0) / 3.0;
    return j;
  };
  t.breakpoints_y = {0.0};
  return t;
}

ObsTransform ObsTransform::piecewise_affine() {
  ObsTransform t;
  t.kind = Kind::PiecewiseAffine;
  t.name = "obs_piecewise_affine";
  t.fwd = [](const Vec& x) {
    return map_each(x, [](double v) { return v < 0.0 ? v : 2.0 * v; });
  };
  t.inv = [](const Vec& y) {
    return map_each(y, [](double v) { return v < 0.0 ? v : 0.5 * v; });
  };
  t.jac_det_inv = [](const Vec& y) {
    double j = 1.0;
    for (double v : y) j *= v < 0.0 ? 1.0 : 0.5;
    return j;
  };
  t.breakpoints_y = {0.0};
  return t;
}

ObsTransform ObsTransform::cdf_map() {
  ObsTransform t;
  t.kind = Kind::CdfMap;
  t.name = "obs_cdf_map";
  t.continuous_only = true;
  t.fwd = [](const Vec& x) { return map_each(x, normal_cdf); };
  t.inv = [](const Vec& y) { return map_each(y, normal_quantile); };
  t.jac_det_inv = [](const Vec& y) {
    double j = 1.0;
    for (double v : y) {
      double z = normal_quantile(v);
      j /= kInvSqrt2PiLocal * std::exp(-0.5 * z * z);
    }
    return j;
  };
  return t;
}

// ------------------------------------------------------------- transforms

const char* noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::BernoulliHalf:
      return "bernoulli_half";
    case NoiseKind::Uniform01:
      return "uniform01";
    case NoiseKind::Gauss01:
      return "gauss01";
    case NoiseKind::Degenerate:
      return "degenerate";
  }
  return "?";
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

EstimationProblem transform_parameters(const EstimationProblem& p,
                                       const ParamTransform& t) {
  require(t.applicable(p.theta_space()), Errc::PreconditionViolated,
          "transform is not applicable to this parameter space");
  const ParameterSpace& sp = p.theta_space();
  ParameterSpace nsp;
  if (sp.kind == ParameterSpace::Kind::FiniteSet) {
    std::vector<Vec> pts;
    pts.reserve(sp.points.size());
    for (const auto& q : sp.points) pts.push_back(t.fwd(q));
    nsp = ParameterSpace::finite(std::move(pts));
  } else {
    // the catalog transforms are coordinatewise increasing, so boxes map to
    // boxes
    Vec lo = t.fwd(sp.lower), hi = t.fwd(sp.upper);
    for (std::size_t i = 0; i < lo.size(); ++i)
      require(lo[i] < hi[i], Errc::PreconditionViolated,
              "transform does not preserve the box orientation");
    nsp = ParameterSpace::box(std::move(lo), std::move(hi));
  }

  DataModel nmodel =
      p.model().with_parameter_map("@" + t.name, t.inv);

  bool finite_theta = sp.kind == ParameterSpace::Kind::FiniteSet;
  Prior old_prior = p.prior();
  ParameterSpace old_space = sp;
  ParamTransform tr = t;
  auto dens = [old_prior, old_space, tr, finite_theta](const Vec& eta) {
    Vec th = tr.inv(eta);
    double d = old_prior.density(old_space, th);
    if (finite_theta) return d;
    double j = tr.jac_det_fwd(th);
    require(j > 0.0 && std::isfinite(j), Errc::DomainError,
            "degenerate Jacobian in the parameter transform");
    return d / j;
  };
  std::function<Vec(Rng&)> sampler;
  if (old_prior.can_sample() && !finite_theta) {
    sampler = [old_prior, old_space, tr](Rng& rng) {
      return tr.fwd(old_prior.sample(old_space, rng));
    };
  }
  Prior nprior = Prior::custom(dens, old_prior.claims_normalised(), sampler,
                               old_prior.name() + "@" + t.name);
  return EstimationProblem(std::move(nsp), std::move(nmodel),
                           std::move(nprior), ValidationLevel::Light);
}

EstimationProblem transform_observations(const EstimationProblem& p,
                                         const ObsTransform& t) {
  const ObservationSpace& obs = p.model().obs_space();
  bool finite = obs.kind == ObservationSpace::Kind::FiniteSet;
  require(!(finite && t.continuous_only), Errc::PreconditionViolated,
          "transform needs a continuous observation space");
  if (!finite && t.kind != ObsTransform::Kind::AffineInvertible)
    require(obs.dim() == 1, Errc::UnsupportedClass,
            "nonlinear observation remaps are implemented for scalar "
            "observations");

  DataModel base = p.model();
  ObsTransform tr = t;
  ObservationSpace nobs;
  if (finite) {
    std::vector<Vec> pts;
    pts.reserve(obs.points.size());
    for (const auto& q : obs.points) pts.push_back(tr.fwd(q));
    nobs = ObservationSpace::finite(std::move(pts));
  } else {
    Vec lo(obs.box.dim()), hi(obs.box.dim());
    for (int i = 0; i < obs.box.dim(); ++i) {
      double a = obs.box.lo[i], b = obs.box.hi[i];
      if (tr.kind == ObsTransform::Kind::CdfMap) {
        lo[i] = std::isinf(a) ? 0.0 : tr.fwd(Vec{a})[0];
        hi[i] = std::isinf(b) ? 1.0 : tr.fwd(Vec{b})[0];
      } else {
        lo[i] = std::isinf(a) ? a : tr.fwd(Vec{a})[0];
        hi[i] = std::isinf(b) ? b : tr.fwd(Vec{b})[0];
      }
    }
    nobs = ObservationSpace::continuum(IntegBox{lo, hi});
  }

  auto dens = [base, tr, finite](const Vec& th, const Vec& y) {
    Vec x = tr.inv(y);
    double f = base.density(th, x);
    return finite ? f : f * tr.jac_det_inv(y);
  };
  auto ldens = [base, tr, finite](const Vec& th, const Vec& y) {
    Vec x = tr.inv(y);
    double l = base.log_density(th, x);
    return finite ? l : l + std::log(tr.jac_det_inv(y));
  };
  std::function<void(const Vec&, Rng&, Vec&)> sampler;
  if (base.can_sample()) {
    sampler = [base, tr](const Vec& th, Rng& rng, Vec& out) {
      Vec x;
      base.sample(th, rng, x);
      out = tr.fwd(x);
    };
  }
  auto check = [base](const Vec& th) { base.validate_theta(th); };
  // A relabelling never changes the law of the base model's sufficient
  // coordinates (u(y) = u(G^(-1)(y)) has the same distribution under every
  // theta), so theta-expectations keep the base route.  Without one, fall
  // back to an identity route over the new coordinates, seeding the
  // quadrature with the transform's kink images.
  Reduction red;
  if (base.has_reduction()) {
    red = base.reduction();
  } else {
    red.finite = finite;
    if (finite) {
      red.finite_points = nobs.points;
    } else {
      red.domain = nobs.box;
      red.breakpoints.assign((std::size_t)nobs.box.dim(), tr.breakpoints_y);
    }
    red.weight = dens;
    red.log_density = ldens;
  }
  DataModel nmodel = DataModel::custom_reduced(
      base.name() + "@" + t.name, base.theta_dim(), std::move(nobs), dens,
      ldens, std::move(red), sampler, check);
  return EstimationProblem(p.theta_space(), std::move(nmodel), p.prior(),
                           ValidationLevel::Light);
}

EstimationProblem augment_with_noise(const EstimationProblem& p, NoiseKind k) {
  DataModel base = p.model();
  const ObservationSpace& obs = base.obs_space();
  bool finite = obs.kind == ObservationSpace::Kind::FiniteSet;

  ObservationSpace nobs;
  std::function<double(double)> noise_dens;
  std::function<double(Rng&)> noise_draw;
  if (finite) {
    require(k == NoiseKind::BernoulliHalf || k == NoiseKind::Degenerate,
            Errc::UnsupportedClass,
            "finite observation spaces take finite side information");
    std::vector<Vec> pts;
    for (const auto& q : obs.points) {
      Vec a = q;
      a.push_back(0.0);
      pts.push_back(a);
      if (k == NoiseKind::BernoulliHalf) {
        Vec b = q;
        b.push_back(1.0);
        pts.push_back(b);
      }
    }
    nobs = ObservationSpace::finite(std::move(pts));
    if (k == NoiseKind::BernoulliHalf) {
      noise_dens = [](double) { return 0.5; };
      noise_draw = [](Rng& rng) { return rng.bernoulli(0.5) ? 1.0 : 0.0; };
    } else {
      noise_dens = [](double) { return 1.0; };
      noise_draw = [](Rng&) { return 0.0; };
    }
  } else {
    require(k == NoiseKind::Uniform01 || k == NoiseKind::Gauss01,
            Errc::UnsupportedClass,
            "continuous observation spaces take continuous side information");
    Vec lo = obs.box.lo, hi = obs.box.hi;
    if (k == NoiseKind::Uniform01) {
      lo.push_back(0.0);
      hi.push_back(1.0);
      noise_dens = [](double) { return 1.0; };
      noise_draw = [](Rng& rng) { return rng.uniform01(); };
    } else {
      lo.push_back(-kInf);
      hi.push_back(kInf);
      noise_dens = [](double y) {
        return kInvSqrt2PiLocal * std::exp(-0.5 * y * y);
      };
      noise_draw = [](Rng& rng) { return rng.normal(); };
    }
    nobs = ObservationSpace::continuum(IntegBox{lo, hi});
  }

  int bd = obs.dim();
  auto dens = [base, noise_dens, bd](const Vec& th, const Vec& xy) {
    Vec x(xy.begin(), xy.begin() + bd);
    return base.density(th, x) * noise_dens(xy[bd]);
  };
  auto ldens = [base, noise_dens, bd](const Vec& th, const Vec& xy) {
    Vec x(xy.begin(), xy.begin() + bd);
    double nd = noise_dens(xy[bd]);
    return base.log_density(th, x) + (nd > 0.0 ? std::log(nd) : -kInf);
  };
  std::function<void(const Vec&, Rng&, Vec&)> sampler;
  if (base.can_sample()) {
    sampler = [base, noise_draw](const Vec& th, Rng& rng, Vec& out) {
      base.sample(th, rng, out);
      out.push_back(noise_draw(rng));
    };
  }
  auto check = [base](const Vec& th) { base.validate_theta(th); };

  // the appended coordinate carries no information about theta, so every
  // theta-expectation can keep the base model's route
  DataModel nmodel =
      base.has_reduction()
          ? DataModel::custom_reduced(base.name() + "+" + noise_name(k),
                                      base.theta_dim(), std::move(nobs), dens,
                                      ldens, base.reduction(), sampler, check)
          : DataModel::custom(base.name() + "+" + noise_name(k),
                              base.theta_dim(), std::move(nobs), dens, sampler,
                              check);
  return EstimationProblem(p.theta_space(), std::move(nmodel), p.prior(),
                           ValidationLevel::Light);
}

// ----------------------------------------------------------------- checks

namespace {

CheckResult assemble(const std::vector<std::array<double, 2>>& per_pair,
                     const CheckThresholds& thr) {
  CheckResult out;
  out.per_pair = per_pair;
  bool first = true;
  for (const auto& pr : per_pair) {
    double v = pr[0], w = pr[1];
    double dev = std::fabs(w - v);
    double rel = dev / std::max(std::fabs(v), 1e-300);
    out.max_abs_dev = std::max(out.max_abs_dev, dev);
    out.max_rel_dev = std::max(out.max_rel_dev, rel);
    double ratio = w / v;
    if (first) {
      out.ratio_min = out.ratio_max = ratio;
      first = false;
    } else {
      out.ratio_min = std::min(out.ratio_min, ratio);
      out.ratio_max = std::max(out.ratio_max, ratio);
    }
  }
  if (out.max_rel_dev <= thr.pass_below)
    out.verdict = Verdict::Pass;
  else if (out.max_rel_dev >= thr.fail_above)
    out.verdict = Verdict::Fail;
  else
    out.verdict = Verdict::Inconclusive;
  return out;
}

// A pushforward problem can turn a finite loss value into a divergent one
// (singular change-of-variables factors make some density functionals blow
// up).  That is the strongest possible invariance failure, so the checks
// record it as an infinite transformed value instead of aborting the audit.
double transformed_value(const Loss& loss, const EstimationProblem& pt,
                         const Vec& t1, const Vec& t2) {
  try {
    return loss(pt, t1, t2);
  } catch (const Error& e) {
    switch (e.code()) {
      case Errc::IntegralNotConverged:
      case Errc::SingularDivergence:
      case Errc::NonFiniteLoss:
      case Errc::DivisionByZeroSupport:
      // adaptive refinement against a singular pushforward density can push
      // evaluation nodes onto the boundary of the remapped observation box
      case Errc::DomainError:
        return kInf;
      default:
        throw;
    }
  }
}

}  // namespace

CheckResult check_irp(const Loss& loss, const EstimationProblem& p,
                      const ParamTransform& t, const ThetaPairs& pairs,
                      const CheckThresholds& thr) {
  require(!pairs.empty(), Errc::InvalidConfig, "no pairs to check");
  EstimationProblem pt = transform_parameters(p, t);
  std::vector<std::array<double, 2>> per;
  for (const auto& pr : pairs) {
    double v = loss(p, pr.first, pr.second);
    double w = transformed_value(loss, pt, t.fwd(pr.first), t.fwd(pr.second));
    per.push_back({v, w});
  }
  return assemble(per, thr);
}

CheckResult check_iro(const Loss& loss, const EstimationProblem& p,
                      const ObsTransform& t, const ThetaPairs& pairs,
                      const CheckThresholds& thr) {
  require(!pairs.empty(), Errc::InvalidConfig, "no pairs to check");
  EstimationProblem pt = transform_observations(p, t);
  std::vector<std::array<double, 2>> per;
  for (const auto& pr : pairs) {
    double v = loss(p, pr.first, pr.second);
    double w = transformed_value(loss, pt, pr.first, pr.second);
    per.push_back({v, w});
  }
  return assemble(per, thr);
}

CheckResult check_iia(const Loss& loss, const EstimationProblem& a,
                      const EstimationProblem& b, const ThetaPairs& pairs,
                      const CheckThresholds& thr) {
  require(!pairs.empty(), Errc::InvalidConfig, "no pairs to check");
  for (const auto& pr : pairs) {
    for (const Vec* th : {&pr.first, &pr.second}) {
      double da = prior_density(a, *th);
      double db = prior_density(b, *th);
      require(std::fabs(da - db) <= 1e-9 * std::max({da, db, 1e-300}),
              Errc::PreconditionViolated,
              "problems must agree on the prior at the checked parameters");
      if (&a.model().impl() != &b.model().impl()) {
        std::vector<Vec> probes;
        if (a.model().obs_space().kind == ObservationSpace::Kind::FiniteSet) {
          probes = a.model().obs_space().points;
        } else if (a.model().can_sample()) {
          Rng rng(7);
          Vec x;
          for (int i = 0; i < 4; ++i) {
            a.model().sample(*th, rng, x);
            probes.push_back(x);
          }
        }
        for (const auto& x : probes) {
          double fa = a.model().density(*th, x);
          double fb = b.model().density(*th, x);
          require(std::fabs(fa - fb) <= 1e-9 * std::max({fa, fb, 1e-300}),
                  Errc::PreconditionViolated,
                  "problems must agree on the conditionals at the checked "
                  "parameters");
        }
      }
    }
  }
  std::vector<std::array<double, 2>> per;
  for (const auto& pr : pairs) {
    double v = loss(a, pr.first, pr.second);
    double w = transformed_value(loss, b, pr.first, pr.second);
    per.push_back({v, w});
  }
  return assemble(per, thr);
}

CheckResult check_isi(const Loss& loss, const EstimationProblem& p,
                      NoiseKind noise, const ThetaPairs& pairs,
                      const CheckThresholds& thr) {
  require(!pairs.empty(), Errc::InvalidConfig, "no pairs to check");
  EstimationProblem pt = augment_with_noise(p, noise);
  std::vector<std::array<double, 2>> per;
  for (const auto& pr : pairs) {
    double v = loss(p, pr.first, pr.second);
    double w = transformed_value(loss, pt, pr.first, pr.second);
    per.push_back({v, w});
  }
  return assemble(per, thr);
}

// -------------------------------------------------------------- CFunction

double CFunction::operator()(double t) const {
  require(t > 0.0 && t <= 1.0, Errc::DomainError,
          "quantile argument must lie in (0, 1]");
  if (discrete_) {
    for (const auto& s : steps_)
      if (s.first >= t - 1e-12) return s.second;
    return steps_.back().second;
  }
  std::size_t n = samples_.size();
  std::size_t idx = (std::size_t)std::ceil(t * (double)n);
  idx = std::min(std::max<std::size_t>(idx, 1), n);
  return samples_[idx - 1];
}

double CFunction::integral01() const {
  if (discrete_) {
    double acc = 0.0, prev = 0.0;
    for (const auto& s : steps_) {
      acc += (s.first - prev) * s.second;
      prev = s.first;
    }
    return acc;
  }
  double acc = 0.0;
  for (double r : samples_) acc += r;
  return acc / (double)samples_.size();
}

CFunction CFunction::from_steps(std::vector<std::pair<double, double>> steps) {
  require(!steps.empty(), Errc::InvalidConfig, "no steps");
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    require(steps[i].first < steps[i + 1].first, Errc::InvalidConfig,
            "cumulative masses must increase");
    require(steps[i].second <= steps[i + 1].second, Errc::InvalidConfig,
            "ratios must be sorted ascending");
  }
  require(std::fabs(steps.back().first - 1.0) <= 1e-9, Errc::InvalidConfig,
          "cumulative mass must reach one");
  steps.back().first = 1.0;
  CFunction c;
  c.discrete_ = true;
  c.steps_ = std::move(steps);
  return c;
}

CFunction CFunction::from_samples(std::vector<double> sorted_ratios) {
  require(!sorted_ratios.empty(), Errc::InvalidConfig, "no samples");
  require(std::is_sorted(sorted_ratios.begin(), sorted_ratios.end()),
          Errc::InvalidConfig, "samples must be sorted");
  CFunction c;
  c.discrete_ = false;
  c.samples_ = std::move(sorted_ratios);
  return c;
}

CFunction c_function(const EstimationProblem& p, const Vec& theta1,
                     const Vec& theta2, long n_samples, std::uint64_t seed) {
  const DataModel& m = p.model();
  m.validate_theta(theta1);
  m.validate_theta(theta2);
  if (m.obs_space().kind == ObservationSpace::Kind::FiniteSet) {
    std::vector<std::pair<double, double>> cells;  // (ratio, mass)
    for (const auto& x : m.obs_space().points) {
      double f2 = m.density(theta2, x);
      if (f2 <= 0.0) continue;
      cells.push_back({m.density(theta1, x) / f2, f2});
    }
    require(!cells.empty(), Errc::DomainError,
            "theta2 gives an empty distribution");
    std::sort(cells.begin(), cells.end());
    std::vector<std::pair<double, double>> steps;
    double cum = 0.0;
    for (const auto& c : cells) {
      cum += c.second;
      if (!steps.empty() && std::fabs(steps.back().second - c.first) < 1e-12)
        steps.back().first = cum;
      else
        steps.push_back({cum, c.first});
    }
    steps.back().first = 1.0;
    return CFunction::from_steps(std::move(steps));
  }
  require(m.can_sample(), Errc::UnsupportedClass,
          "empirical quantiles need a sampleable model");
  require(n_samples > 0, Errc::InvalidConfig, "n_samples must be positive");
  Rng rng(seed);
  std::vector<double> ratios;
  ratios.reserve((std::size_t)n_samples);
  Vec x;
  for (long i = 0; i < n_samples; ++i) {
    m.sample(theta2, rng, x);
    ratios.push_back(
        std::exp(m.log_density(theta1, x) - m.log_density(theta2, x)));
  }
  std::sort(ratios.begin(), ratios.end());
  return CFunction::from_samples(std::move(ratios));
}

// -------------------------------------------------------- rearrangement

namespace {

double model_quantile(const DataModel& m, const Vec& th, double q) {
  const IntegBox& box = m.obs_space().box;
  double lo = box.lo[0], hi = box.hi[0];
  if (std::isinf(lo)) {
    lo = std::isinf(hi) ? -1.0 : hi - 1.0;
    for (double step = 1.0; m.cdf(th, lo) > 0.25 * q; step *= 2.0) lo -= step;
  }
  if (std::isinf(hi)) {
    hi = lo + 1.0;
    for (double step = 1.0; m.cdf(th, hi) < q + 0.25 * (1.0 - q); step *= 2.0)
      hi += step;
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (m.cdf(th, mid) < q)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double Rearrangement1D::p_density(double t) const {
  require(t >= 0.0 && t <= 1.0, Errc::DomainError,
          "rearranged densities live on [0, 1]");
  std::size_t idx = (std::size_t)(t / delta);
  idx = std::min(idx, values.size() - 1);
  return values[idx];
}

Rearrangement1D canonical_rearrangement_1d(const EstimationProblem& p,
                                           const Vec& theta1,
                                           const Vec& theta2, int cells) {
  require(cells >= 2, Errc::InvalidConfig, "need at least 2 cells");
  const DataModel& m = p.model();
  require(m.obs_space().kind == ObservationSpace::Kind::Continuum &&
              m.obs_space().dim() == 1,
          Errc::UnsupportedClass,
          "rearrangement needs scalar continuous observations");
  require(m.has_cdf(), Errc::UnsupportedClass,
          "rearrangement needs the observation cdf");
  m.validate_theta(theta1);
  m.validate_theta(theta2);

  double delta = 1.0 / cells;
  // cell edges at the theta2-quantiles, then exact theta1-masses per cell
  std::vector<double> f1_at_edges(cells + 1);
  f1_at_edges[0] = 0.0;
  f1_at_edges[cells] = 1.0;
  for (int k = 1; k < cells; ++k) {
    double x = model_quantile(m, theta2, k * delta);
    f1_at_edges[k] = m.cdf(theta1, x);
  }
  Rearrangement1D out;
  out.delta = delta;
  out.values.resize(cells);
  for (int k = 0; k < cells; ++k)
    out.values[k] =
        std::max(0.0, (f1_at_edges[k + 1] - f1_at_edges[k]) / delta);
  std::sort(out.values.begin(), out.values.end());
  return out;
}

double f_divergence_of_rearrangement(const Generator& gen,
                                     const Rearrangement1D& r) {
  require(!r.values.empty(), Errc::InvalidConfig, "empty rearrangement");
  double acc = 0.0;
  for (double v : r.values) acc += gen.F(v);
  return acc * r.delta;
}

// ----------------------------------------------------------- the battery

ThetaPairs seeded_theta_pairs(const EstimationProblem& p, int n,
                              std::uint64_t seed) {
  require(n >= 1, Errc::InvalidConfig, "need at least one pair");
  const ParameterSpace& sp = p.theta_space();
  Rng rng(seed);
  ThetaPairs pairs;
  if (sp.kind == ParameterSpace::Kind::FiniteSet) {
    require(sp.points.size() >= 2, Errc::PreconditionViolated,
            "need at least two parameter points");
    while ((int)pairs.size() < n) {
      std::size_t i = (std::size_t)(rng.uniform01() * sp.points.size());
      std::size_t j = (std::size_t)(rng.uniform01() * sp.points.size());
      i = std::min(i, sp.points.size() - 1);
      j = std::min(j, sp.points.size() - 1);
      if (i == j) continue;
      pairs.push_back({sp.points[i], sp.points[j]});
    }
    return pairs;
  }
  int d = sp.dim();
  auto draw = [&]() {
    Vec t(d);
    for (int k = 0; k < d; ++k) {
      double w = sp.upper[k] - sp.lower[k];
      t[k] = sp.lower[k] + (0.1 + 0.8 * rng.uniform01()) * w;
    }
    return t;
  };
  while ((int)pairs.size() < n) {
    Vec a = draw(), b = draw();
    double dist = 0.0;
    for (int k = 0; k < d; ++k)
      dist = std::max(dist, std::fabs(a[k] - b[k]) /
                                (sp.upper[k] - sp.lower[k]));
    if (dist < 1e-3) continue;
    pairs.push_back({a, b});
  }
  return pairs;
}

EstimationProblem iia_partner_problem(const EstimationProblem& p,
                                      const Vec& theta1, const Vec& theta2) {
  const ParameterSpace& sp = p.theta_space();
  require(sp.kind == ParameterSpace::Kind::Box && sp.dim() == 1,
          Errc::UnsupportedClass,
          "partner construction works on scalar parameter boxes");
  double t1 = theta1.at(0), t2 = theta2.at(0);
  require(std::fabs(t1 - t2) > 1e-9, Errc::InvalidConfig,
          "need two distinct parameters");
  Prior base = p.prior();
  ParameterSpace space = sp;

  // pick m so that the cubic correction integrates to zero against the prior
  auto quad = [&](const std::function<double(double)>& g) {
    auto f = [&](double th) {
      return base.density(space, Vec{th}) * g(th);
    };
    IntegralResult r =
        integrate_1d(f, sp.lower[0], sp.upper[0], QuadSpec{1e-10, 1e-14});
    require(r.converged, Errc::IntegralNotConverged,
            "partner construction integral did not converge");
    return r.value;
  };
  double num = quad([&](double th) { return (th - t1) * (th - t2) * th; });
  double den = quad([&](double th) { return (th - t1) * (th - t2); });
  require(std::fabs(den) > 1e-12, Errc::PreconditionViolated,
          "degenerate pair for the partner construction");
  double m = num / den;

  double gmax = 0.0;
  for (int i = 0; i <= 256; ++i) {
    double th = sp.lower[0] + (sp.upper[0] - sp.lower[0]) * i / 256.0;
    gmax = std::max(gmax,
                    std::fabs((th - t1) * (th - t2) * (th - m)));
  }
  require(gmax > 0.0, Errc::PreconditionViolated,
          "cubic correction vanishes on the whole box");
  double c = 0.8 / gmax;

  auto dens = [base, space, t1, t2, m, c](const Vec& th) {
    double v = th[0];
    double factor = 1.0 + c * (v - t1) * (v - t2) * (v - m);
    return base.density(space, th) * factor;
  };
  Prior partner = Prior::custom(dens, base.claims_normalised(), {},
                                base.name() + "+cubic");
  return EstimationProblem(space, p.model(), std::move(partner),
                           ValidationLevel::Light);
}

std::vector<AxiomAuditRow> axiom_battery(const Loss& loss,
                                         const EstimationProblem& p,
                                         const EstimationProblem* iia_partner,
                                         const BatteryConfig& cfg) {
  ThetaPairs pairs = seeded_theta_pairs(p, cfg.n_pairs, cfg.seed);
  std::vector<AxiomAuditRow> rows;
  auto push = [&rows](const std::string& axiom, const std::string& item,
                      const CheckResult& r) {
    AxiomAuditRow row;
    row.axiom = axiom;
    row.item = item;
    row.max_rel_dev = r.max_rel_dev;
    row.ratio_min = r.ratio_min;
    row.ratio_max = r.ratio_max;
    row.verdict = r.verdict;
    rows.push_back(row);
  };

  int d = p.theta_dim();
  std::vector<ParamTransform> pts{
      ParamTransform::affine(Vec(d, 1.5), Vec(d, 0.25)),
      ParamTransform::cube_plus_linear(), ParamTransform::cube_root()};
  for (const auto& t : pts) {
    if (!t.applicable(p.theta_space())) continue;
    push("IRP", t.name, check_irp(loss, p, t, pairs, cfg.thresholds));
  }

  bool finite_obs =
      p.model().obs_space().kind == ObservationSpace::Kind::FiniteSet;
  std::vector<ObsTransform> ots;
  ots.push_back(ObsTransform::affine(2.0, 1.0));
  if (finite_obs || p.model().obs_space().dim() == 1) {
    ots.push_back(ObsTransform::power3());
    ots.push_back(ObsTransform::piecewise_affine());
    if (!finite_obs) ots.push_back(ObsTransform::cdf_map());
  }
  for (const auto& t : ots) {
    if (finite_obs && t.continuous_only) continue;
    push("IRO", t.name, check_iro(loss, p, t, pairs, cfg.thresholds));
  }

  if (iia_partner) {
    push("IIA", "prior_shift",
         check_iia(loss, p, *iia_partner, pairs, cfg.thresholds));
  } else if (p.theta_space().kind == ParameterSpace::Kind::Box &&
             p.theta_dim() == 1) {
    // partner priors are pair-specific, so run each pair against its own
    std::vector<std::array<double, 2>> per;
    for (const auto& pr : pairs) {
      EstimationProblem partner =
          iia_partner_problem(p, pr.first, pr.second);
      CheckResult r =
          check_iia(loss, p, partner, ThetaPairs{pr}, cfg.thresholds);
      per.push_back(r.per_pair[0]);
    }
    push("IIA", "prior_shift", assemble(per, cfg.thresholds));
  }

  std::vector<NoiseKind> noises =
      finite_obs
          ? std::vector<NoiseKind>{NoiseKind::BernoulliHalf,
                                   NoiseKind::Degenerate}
          : std::vector<NoiseKind>{NoiseKind::Uniform01};
  for (NoiseKind k : noises)
    push("ISI", noise_name(k), check_isi(loss, p, k, pairs, cfg.thresholds));

  return rows;
}

}  // namespace eic
