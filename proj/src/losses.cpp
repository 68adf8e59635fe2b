#include "eic/losses.hpp"

#include <cmath>

namespace eic {

Generator builtin_generator(BuiltinGenerator g) {
  Generator out;
  switch (g) {
    case BuiltinGenerator::Hellinger2:
      out.name = "hellinger2";
      out.F = [](double r) { return 1.0 - std::sqrt(r); };
      out.dF = [](double r) { return -0.5 / std::sqrt(r); };
      out.d2F = [](double r) { return 0.25 * std::pow(r, -1.5); };
      out.second_at_one = 0.25;
      out.problem_continuous = true;  // F(0)=1 and F'(r)->0 as r->inf
      break;
    case BuiltinGenerator::KL:
      out.name = "kl";
      out.F = [](double r) { return r > 0.0 ? r * std::log(r) : 0.0; };
      out.dF = [](double r) { return std::log(r) + 1.0; };
      out.d2F = [](double r) { return 1.0 / r; };
      out.second_at_one = 1.0;
      out.problem_continuous = false;  // F'(r) diverges as r->inf
      break;
    case BuiltinGenerator::ChiSquared:
      out.name = "chi_squared";
      out.F = [](double r) {
        double d = r - 1.0;
        return d * d;
      };
      out.dF = [](double r) { return 2.0 * (r - 1.0); };
      out.d2F = [](double) { return 2.0; };
      out.second_at_one = 2.0;
      out.problem_continuous = false;
      break;
  }
  return out;
}

// ------------------------------------------------------------------- Loss

const Generator* Loss::generator() const { return gen_ ? gen_.get() : nullptr; }

double Loss::operator()(const EstimationProblem& p, const Vec& theta1,
                        const Vec& theta2) const {
  return eval_(p, theta1, theta2);
}

Loss Loss::with_quad(const QuadSpec& q) const {
  Loss out = *this;
  out.quad_ = q;
  if (inner_) out.inner_ = std::make_shared<Loss>(inner_->with_quad(q));
  if (l1_) out.l1_ = std::make_shared<Loss>(l1_->with_quad(q));
  if (l2_) out.l2_ = std::make_shared<Loss>(l2_->with_quad(q));
  return out;
}

Loss Loss::mark_discriminative() const {
  Loss out = *this;
  out.flags_.discriminative_checked = true;
  return out;
}

namespace {

double sq_norm(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// integral (or sum) over observations of f2 * (f1 - f2)^2
double density_gap_expectation(const EstimationProblem& p, const Vec& t1,
                               const Vec& t2, const QuadSpec& spec) {
  const DataModel& m = p.model();
  m.validate_theta(t1);
  m.validate_theta(t2);
  const ObservationSpace& obs = m.obs_space();
  if (obs.kind == ObservationSpace::Kind::FiniteSet) {
    double s = 0.0;
    for (const auto& x : obs.points) {
      double f2 = m.density(t2, x);
      double d = m.density(t1, x) - f2;
      s += f2 * d * d;
    }
    return s;
  }
  require(obs.dim() <= 3, Errc::UnsupportedClass,
          "density-gap loss needs a low-dimensional observation space");
  auto f = [&](const Vec& x) {
    double f2 = m.density(t2, x);
    double d = m.density(t1, x) - f2;
    return f2 * d * d;
  };
  IntegralResult r = integrate_box(f, obs.box, spec);
  require(r.converged, Errc::IntegralNotConverged,
          "density-gap integral did not converge");
  return r.value;
}

}  // namespace

double Loss::eval_(const EstimationProblem& p, const Vec& t1,
                   const Vec& t2) const {
  switch (kind_) {
    case LossKind::Quadratic:
      return sq_norm(t1, t2);
    case LossKind::FDivergence:
      return f_divergence_expectation(*gen_, p, t1, t2, quad_);
    case LossKind::Bhattacharyya:
      return bhattacharyya_loss(p, t1, t2, quad_);
    case LossKind::PmleInduced: {
      double f = prior_density(p, t2);
      double g = penalty_(t2);
      require(g > 0.0 && std::isfinite(g), Errc::DomainError,
              "penalty must be positive");
      double m = (double)p.theta_dim();
      return std::pow(f / g, 2.0 / m) * sq_norm(t1, t2);
    }
    case LossKind::NoIRO:
    case LossKind::NoISI:
      return density_gap_expectation(p, t1, t2, quad_);
    case LossKind::NoIIA: {
      require(p.prior().can_sample(), Errc::UnsupportedClass,
              "this loss needs a sampleable prior");
      Rng rng(seed_);
      int hits = 0;
      for (int i = 0; i < mc_samples_; ++i) {
        Vec th = p.prior().sample(p.theta_space(), rng);
        if ((*l1_)(p, th, t2) <= threshold_) ++hits;
      }
      double weight = (double)hits / (double)mc_samples_;
      return weight * (*l2_)(p, t1, t2);
    }
    case LossKind::Custom:
      if (scale_) return scale_(p, t2) * (*inner_)(p, t1, t2);
      return fn_(p, t1, t2);
  }
  fail(Errc::DomainError, "unknown loss kind");
}

Loss Loss::quadratic() {
  Loss l;
  l.kind_ = LossKind::Quadratic;
  l.name_ = "quadratic";
  l.flags_ = {true, false, false};
  return l;
}

Loss Loss::f_divergence(BuiltinGenerator g) {
  return f_divergence(builtin_generator(g));
}

Loss Loss::f_divergence(Generator g) {
  require((bool)g.F, Errc::InvalidConfig, "generator needs F");
  Loss l;
  l.kind_ = LossKind::FDivergence;
  l.name_ = g.name;
  l.flags_ = {true, false, true};
  l.gen_ = std::make_shared<Generator>(std::move(g));
  return l;
}

Loss Loss::bhattacharyya() {
  Loss l;
  l.kind_ = LossKind::Bhattacharyya;
  l.name_ = "bhattacharyya";
  l.flags_ = {true, false, true};
  return l;
}

Loss Loss::pmle_induced(std::function<double(const Vec&)> g,
                        std::string g_name) {
  require((bool)g, Errc::InvalidConfig, "penalty function required");
  Loss l;
  l.kind_ = LossKind::PmleInduced;
  l.name_ = "pmle_induced(" + g_name + ")";
  l.flags_ = {true, false, false};
  l.penalty_ = std::move(g);
  return l;
}

Loss Loss::no_iro() {
  Loss l;
  l.kind_ = LossKind::NoIRO;
  l.name_ = "no_iro";
  l.flags_ = {true, false, true};
  return l;
}

Loss Loss::no_isi() {
  Loss l;
  l.kind_ = LossKind::NoISI;
  l.name_ = "no_isi";
  l.flags_ = {true, false, true};
  return l;
}

Loss Loss::no_iia(Loss l1, Loss l2, double threshold, int mc_samples,
                  std::uint64_t seed) {
  require(mc_samples > 0, Errc::InvalidConfig, "mc_samples must be positive");
  Loss l;
  l.kind_ = LossKind::NoIIA;
  l.name_ = "no_iia(" + l1.name() + "," + l2.name() + ")";
  l.flags_ = {false, false, false};
  l.l1_ = std::make_shared<Loss>(std::move(l1));
  l.l2_ = std::make_shared<Loss>(std::move(l2));
  l.threshold_ = threshold;
  l.mc_samples_ = mc_samples;
  l.seed_ = seed;
  return l;
}

Loss Loss::custom(
    std::string name, LossFlags flags,
    std::function<double(const EstimationProblem&, const Vec&, const Vec&)>
        fn) {
  require((bool)fn, Errc::InvalidConfig, "custom loss needs a function");
  Loss l;
  l.kind_ = LossKind::Custom;
  l.name_ = std::move(name);
  l.flags_ = flags;
  l.fn_ = std::move(fn);
  return l;
}

Loss Loss::scaled(
    std::function<double(const EstimationProblem&, const Vec&)> scale,
    Loss inner, std::string name, LossFlags flags) {
  require((bool)scale, Errc::InvalidConfig, "scale function required");
  Loss l;
  l.kind_ = LossKind::Custom;
  l.name_ = std::move(name);
  l.flags_ = flags;
  l.scale_ = std::move(scale);
  l.inner_ = std::make_shared<Loss>(std::move(inner));
  return l;
}

// --------------------------------------------------------- free functions

double eval_loss(const Loss& loss, const EstimationProblem& p, const Vec& t1,
                 const Vec& t2) {
  return loss(p, t1, t2);
}

double f_divergence_expectation(const Generator& gen,
                                const EstimationProblem& p, const Vec& t1,
                                const Vec& t2, const QuadSpec& spec) {
  return expect_ratio_functional(p, t1, t2, gen.F, spec);
}

double hellinger2(const EstimationProblem& p, const Vec& t1, const Vec& t2,
                  const QuadSpec& spec) {
  static const Generator gen = builtin_generator(BuiltinGenerator::Hellinger2);
  return f_divergence_expectation(gen, p, t1, t2, spec);
}

double bhattacharyya_loss(const EstimationProblem& p, const Vec& t1,
                          const Vec& t2, const QuadSpec& spec) {
  double h2 = hellinger2(p, t1, t2, spec);
  require(h2 < 1.0 - 1e-12, Errc::SingularDivergence,
          "distributions have (numerically) disjoint support");
  return -std::log1p(-h2);
}

bool check_discriminative(const Loss& loss, const EstimationProblem& p,
                          const Vec& theta, double delta, int grid_per_axis) {
  require(delta > 0.0, Errc::InvalidConfig, "delta must be positive");
  const ParameterSpace& sp = p.theta_space();
  std::vector<Vec> candidates;
  if (sp.kind == ParameterSpace::Kind::FiniteSet) {
    candidates = sp.points;
  } else {
    int n = sp.dim();
    long total = 1;
    for (int i = 0; i < n; ++i) total *= grid_per_axis;
    Vec t(n);
    for (long idx = 0; idx < total; ++idx) {
      long rem = idx;
      for (int k = 0; k < n; ++k) {
        long cell = rem % grid_per_axis;
        rem /= grid_per_axis;
        t[k] = sp.lower[k] + (sp.upper[k] - sp.lower[k]) *
                                 ((double)cell + 0.5) / grid_per_axis;
      }
      candidates.push_back(t);
    }
  }
  for (const auto& t : candidates) {
    if (sq_norm(t, theta) < delta * delta) continue;
    if (!(loss(p, t, theta) > 0.0)) return false;
  }
  return true;
}

Loss mle_via_quadratic() {
  Loss l = Loss::pmle_induced([](const Vec&) { return 1.0; }, "1");
  return l;
}

Loss mle_via_hellinger(const FisherConfig& fisher) {
  auto scale = [fisher](const EstimationProblem& p, const Vec& t2) {
    double f = prior_density(p, t2);
    SymMatrix info = fisher_information(p, t2, fisher);
    double det = info.det();
    require(det > 0.0, Errc::DomainError,
            "information determinant must be positive");
    double m = (double)p.theta_dim();
    return std::pow(f / std::sqrt(det), 2.0 / m);
  };
  LossFlags flags{true, false, false};
  return Loss::scaled(scale, Loss::f_divergence(BuiltinGenerator::Hellinger2),
                      "mle_via_hellinger", flags);
}

}  // namespace eic
