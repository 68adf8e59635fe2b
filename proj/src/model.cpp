#include "eic/model.hpp"

#include <algorithm>
#include <cmath>

namespace eic {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double x, double mu, double sigma) {
  double z = (x - mu) / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

double lchoose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

bool same_point(const Vec& a, const Vec& b, double tol = 1e-9) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::fabs(a[i] - b[i]) > tol) return false;
  return true;
}

}  // namespace

// ----------------------------------------------------------- spaces

ParameterSpace ParameterSpace::finite(std::vector<Vec> pts) {
  require(!pts.empty(), Errc::InvalidConfig, "empty parameter set");
  std::size_t d = pts[0].size();
  for (const auto& p : pts)
    require(p.size() == d, Errc::InvalidConfig,
            "parameter points of mixed dimension");
  ParameterSpace s;
  s.kind = Kind::FiniteSet;
  s.points = std::move(pts);
  return s;
}

ParameterSpace ParameterSpace::box(Vec lo, Vec hi) {
  require(!lo.empty() && lo.size() == hi.size(), Errc::InvalidConfig,
          "box bounds of mixed dimension");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    require(std::isfinite(lo[i]) && std::isfinite(hi[i]), Errc::InvalidConfig,
            "parameter boxes must be bounded");
    require(lo[i] < hi[i], Errc::InvalidConfig, "box bounds out of order");
  }
  ParameterSpace s;
  s.kind = Kind::Box;
  s.lower = std::move(lo);
  s.upper = std::move(hi);
  return s;
}

int ParameterSpace::dim() const {
  return kind == Kind::FiniteSet ? (int)points[0].size() : (int)lower.size();
}

bool ParameterSpace::contains(const Vec& theta, double pad) const {
  if ((int)theta.size() != dim()) return false;
  if (kind == Kind::FiniteSet) {
    for (const auto& p : points)
      if (same_point(p, theta)) return true;
    return false;
  }
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (theta[i] < lower[i] + pad || theta[i] > upper[i] - pad) return false;
  return true;
}

double ParameterSpace::boundary_distance(const Vec& theta) const {
  if (kind == Kind::FiniteSet) return kInf;
  double d = kInf;
  for (std::size_t i = 0; i < theta.size(); ++i)
    d = std::min(d, std::min(theta[i] - lower[i], upper[i] - theta[i]));
  return d;
}

ObservationSpace ObservationSpace::finite(std::vector<Vec> pts) {
  require(!pts.empty(), Errc::InvalidConfig, "empty observation set");
  std::size_t d = pts[0].size();
  for (const auto& p : pts)
    require(p.size() == d, Errc::InvalidConfig,
            "observation points of mixed dimension");
  ObservationSpace s;
  s.kind = Kind::FiniteSet;
  s.points = std::move(pts);
  return s;
}

ObservationSpace ObservationSpace::continuum(IntegBox b) {
  require(b.dim() >= 1 && b.lo.size() == b.hi.size(), Errc::InvalidConfig,
          "bad observation box");
  ObservationSpace s;
  s.kind = Kind::Continuum;
  s.box = std::move(b);
  return s;
}

int ObservationSpace::dim() const {
  return kind == Kind::FiniteSet ? (int)points[0].size() : box.dim();
}

bool ObservationSpace::contains(const Vec& x, double tol) const {
  if ((int)x.size() != dim()) return false;
  if (kind == Kind::FiniteSet) {
    for (const auto& p : points)
      if (same_point(p, x, tol)) return true;
    return false;
  }
  for (int i = 0; i < box.dim(); ++i)
    if (x[i] < box.lo[i] - tol || x[i] > box.hi[i] + tol) return false;
  return true;
}

// ----------------------------------------------------------- DataModel

struct DataModel::Impl {
  Family family = Family::Custom;
  std::string name;
  int theta_dim = 1;
  ObservationSpace obs;
  std::function<double(const Vec&, const Vec&)> density;
  std::function<double(const Vec&, const Vec&)> log_dens;
  std::optional<Reduction> reduction;
  std::function<SymMatrix(const Vec&)> fisher;
  std::function<void(const Vec&, Rng&, Vec&)> sampler;
  std::function<double(const Vec&, double)> cdf;
  std::function<void(const Vec&)> theta_check;
};

namespace {

std::function<double(const Vec&, const Vec&)> log_of(
    std::function<double(const Vec&, const Vec&)> dens) {
  return [dens = std::move(dens)](const Vec& t, const Vec& x) {
    double v = dens(t, x);
    return v > 0.0 ? std::log(v) : -kInf;
  };
}

// u = x when the observation space is already small enough to sum or
// integrate over directly
std::optional<Reduction> identity_reduction(
    const ObservationSpace& obs,
    std::function<double(const Vec&, const Vec&)> dens,
    std::function<double(const Vec&, const Vec&)> ldens) {
  Reduction r;
  if (obs.kind == ObservationSpace::Kind::FiniteSet) {
    r.finite = true;
    r.finite_points = obs.points;
  } else if (obs.box.dim() <= 3) {
    r.domain = obs.box;
    r.breakpoints.assign(obs.box.dim(), {});
  } else {
    return std::nullopt;
  }
  r.weight = std::move(dens);
  r.log_density = std::move(ldens);
  return r;
}

std::vector<Vec> integer_points(int lo, int hi) {
  std::vector<Vec> pts;
  for (int i = lo; i <= hi; ++i) pts.push_back(Vec{(double)i});
  return pts;
}

}  // namespace

const DataModel::Impl& DataModel::impl() const { return *impl_; }

Family DataModel::family() const { return impl_->family; }
const std::string& DataModel::name() const { return impl_->name; }
int DataModel::theta_dim() const { return impl_->theta_dim; }
const ObservationSpace& DataModel::obs_space() const { return impl_->obs; }

double DataModel::density(const Vec& theta, const Vec& x) const {
  return impl_->density(theta, x);
}

double DataModel::log_density(const Vec& theta, const Vec& x) const {
  if (impl_->log_dens) return impl_->log_dens(theta, x);
  double v = impl_->density(theta, x);
  return v > 0.0 ? std::log(v) : -kInf;
}

bool DataModel::has_reduction() const { return impl_->reduction.has_value(); }

const Reduction& DataModel::reduction() const {
  require(impl_->reduction.has_value(), Errc::UnsupportedClass,
          "model has no integration route over its observations");
  return *impl_->reduction;
}

bool DataModel::has_analytic_fisher() const { return (bool)impl_->fisher; }

SymMatrix DataModel::analytic_fisher(const Vec& theta) const {
  require((bool)impl_->fisher, Errc::NoAnalyticForm,
          "no closed-form information matrix for this model");
  validate_theta(theta);
  return impl_->fisher(theta);
}

bool DataModel::can_sample() const { return (bool)impl_->sampler; }

void DataModel::sample(const Vec& theta, Rng& rng, Vec& out) const {
  require((bool)impl_->sampler, Errc::UnsupportedClass,
          "model has no sampler");
  impl_->sampler(theta, rng, out);
}

bool DataModel::has_cdf() const { return (bool)impl_->cdf; }

double DataModel::cdf(const Vec& theta, double x) const {
  require((bool)impl_->cdf, Errc::UnsupportedClass,
          "model has no cumulative distribution function");
  return impl_->cdf(theta, x);
}

void DataModel::validate_theta(const Vec& theta) const {
  require((int)theta.size() == impl_->theta_dim, Errc::DomainError,
          "theta has the wrong dimension for " + impl_->name);
  for (double v : theta)
    require(std::isfinite(v), Errc::DomainError,
            "theta has a non-finite component");
  if (impl_->theta_check) impl_->theta_check(theta);
}

DataModel DataModel::bernoulli() {
  auto impl = std::make_shared<Impl>();
  impl->family = Family::Bernoulli;
  impl->name = "bernoulli";
  impl->theta_dim = 1;
  impl->obs = ObservationSpace::finite(integer_points(0, 1));
  auto dens = [](const Vec& t, const Vec& x) {
    return x[0] > 0.5 ? t[0] : 1.0 - t[0];
  };
  impl->density = dens;
  impl->log_dens = log_of(dens);
  impl->reduction = identity_reduction(impl->obs, dens, log_of(dens));
  impl->fisher = [](const Vec& t) {
    SymMatrix m(1);
    m.set(0, 0, 1.0 / (t[0] * (1.0 - t[0])));
    return m;
  };
  impl->sampler = [](const Vec& t, Rng& rng, Vec& out) {
    out.assign(1, rng.bernoulli(t[0]) ? 1.0 : 0.0);
  };
  impl->theta_check = [](const Vec& t) {
    require(t[0] > 0.0 && t[0] < 1.0, Errc::DomainError,
            "bernoulli parameter must lie strictly inside (0,1)");
  };
  return DataModel(std::move(impl));
}

DataModel DataModel::binomial(int n) {
  require(n >= 1, Errc::InvalidConfig, "binomial count must be positive");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::BinomialN;
  impl->name = "binomial" + std::to_string(n);
  impl->theta_dim = 1;
  impl->obs = ObservationSpace::finite(integer_points(0, n));
  auto ldens = [n](const Vec& t, const Vec& x) {
    int k = (int)std::lround(x[0]);
    return lchoose(n, k) + k * std::log(t[0]) +
           (n - k) * std::log1p(-t[0]);
  };
  impl->density = [ldens](const Vec& t, const Vec& x) {
    return std::exp(ldens(t, x));
  };
  impl->log_dens = ldens;
  impl->reduction = identity_reduction(impl->obs, impl->density, ldens);
  impl->fisher = [n](const Vec& t) {
    SymMatrix m(1);
    m.set(0, 0, n / (t[0] * (1.0 - t[0])));
    return m;
  };
  impl->sampler = [n](const Vec& t, Rng& rng, Vec& out) {
    int k = 0;
    for (int i = 0; i < n; ++i) k += rng.bernoulli(t[0]) ? 1 : 0;
    out.assign(1, (double)k);
  };
  impl->theta_check = [](const Vec& t) {
    require(t[0] > 0.0 && t[0] < 1.0, Errc::DomainError,
            "binomial parameter must lie strictly inside (0,1)");
  };
  return DataModel(std::move(impl));
}

DataModel DataModel::categorical(int k) {
  require(k >= 2, Errc::InvalidConfig, "categorical needs at least 2 cells");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::Categorical;
  impl->name = "categorical" + std::to_string(k);
  impl->theta_dim = k - 1;
  impl->obs = ObservationSpace::finite(integer_points(0, k - 1));
  auto cell_prob = [k](const Vec& t, int i) {
    if (i < k - 1) return t[i];
    double s = 0.0;
    for (double v : t) s += v;
    return 1.0 - s;
  };
  auto dens = [cell_prob](const Vec& t, const Vec& x) {
    return cell_prob(t, (int)std::lround(x[0]));
  };
  impl->density = dens;
  impl->log_dens = log_of(dens);
  impl->reduction = identity_reduction(impl->obs, dens, log_of(dens));
  impl->fisher = [k, cell_prob](const Vec& t) {
    SymMatrix m(k - 1);
    double last = cell_prob(t, k - 1);
    for (int i = 0; i < k - 1; ++i)
      for (int j = i; j < k - 1; ++j)
        m.set(i, j, (i == j ? 1.0 / t[i] : 0.0) + 1.0 / last);
    return m;
  };
  impl->sampler = [k, cell_prob](const Vec& t, Rng& rng, Vec& out) {
    std::vector<double> w(k);
    for (int i = 0; i < k; ++i) w[i] = cell_prob(t, i);
    out.assign(1, (double)rng.categorical(w));
  };
  impl->theta_check = [k, cell_prob](const Vec& t) {
    for (double v : t)
      require(v > 0.0, Errc::DomainError, "cell probability must be positive");
    require(cell_prob(t, k - 1) > 0.0, Errc::DomainError,
            "cell probabilities must sum below one");
  };
  return DataModel(std::move(impl));
}

DataModel DataModel::gaussian_known_sigma(double sigma) {
  require(sigma > 0.0 && std::isfinite(sigma), Errc::InvalidConfig,
          "sigma must be positive");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::GaussianKnownSigma;
  impl->name = "gaussian_sigma" + std::to_string(sigma);
  impl->theta_dim = 1;
  impl->obs = ObservationSpace::continuum(IntegBox{{-kInf}, {kInf}});
  auto ldens = [sigma](const Vec& t, const Vec& x) {
    double z = (x[0] - t[0]) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.9189385332046727;
  };
  auto dens = [sigma](const Vec& t, const Vec& x) {
    return normal_pdf(x[0], t[0], sigma);
  };
  impl->density = dens;
  impl->log_dens = ldens;
  impl->reduction = identity_reduction(impl->obs, dens, ldens);
  impl->fisher = [sigma](const Vec&) {
    SymMatrix m(1);
    m.set(0, 0, 1.0 / (sigma * sigma));
    return m;
  };
  impl->sampler = [sigma](const Vec& t, Rng& rng, Vec& out) {
    out.assign(1, t[0] + sigma * rng.normal());
  };
  impl->cdf = [sigma](const Vec& t, double x) {
    return normal_cdf((x - t[0]) / sigma);
  };
  return DataModel(std::move(impl));
}

DataModel DataModel::gaussian_mean_sigma(int n) {
  require(n >= 2, Errc::InvalidConfig,
          "mean-sigma estimation needs at least 2 draws");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::GaussianMeanSigma;
  impl->name = "gaussian_mean_sigma_n" + std::to_string(n);
  impl->theta_dim = 2;
  impl->obs = ObservationSpace::continuum(
      IntegBox{Vec(n, -kInf), Vec(n, kInf)});
  auto ldens = [n](const Vec& t, const Vec& x) {
    double mu = t[0], sigma = t[1];
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double z = (x[i] - mu) / sigma;
      s += z * z;
    }
    return -0.5 * s - n * (std::log(sigma) + 0.9189385332046727);
  };
  impl->density = [ldens](const Vec& t, const Vec& x) {
    return std::exp(ldens(t, x));
  };
  impl->log_dens = ldens;
  // Expectations run over u = (mean, centred sum of squares): the mean is
  // Gaussian with scale sigma/sqrt(n), the sum of squares is gamma with
  // shape (n-1)/2 and scale 2 sigma^2, and they are independent.
  Reduction red;
  red.domain = IntegBox{{-kInf, 0.0}, {kInf, kInf}};
  red.breakpoints = {{}, {}};
  // this weight sits in the innermost loop of nested quadrature, so the
  // theta-independent gamma normalisation is hoisted out of the closure
  const double shape = 0.5 * (n - 1);
  const double lgamma_shape = std::lgamma(shape);
  const double sqrt_n = std::sqrt((double)n);
  red.weight = [n, shape, lgamma_shape, sqrt_n](const Vec& t, const Vec& u) {
    if (!(u[1] > 0.0)) return 0.0;
    double mu = t[0], sigma = t[1];
    double scale = 2.0 * sigma * sigma;
    double lw = (shape - 1.0) * std::log(u[1]) - u[1] / scale -
                shape * std::log(scale) - lgamma_shape;
    return normal_pdf(u[0], mu, sigma / sqrt_n) * std::exp(lw);
  };
  red.log_density = [n](const Vec& t, const Vec& u) {
    double mu = t[0], sigma = t[1];
    double d = u[0] - mu;
    return -n * std::log(sigma) -
           (u[1] + n * d * d) / (2.0 * sigma * sigma);
  };
  impl->reduction = std::move(red);
  impl->fisher = [n](const Vec& t) {
    double s2 = t[1] * t[1];
    SymMatrix m(2);
    m.set(0, 0, n / s2);
    m.set(1, 1, 2.0 * n / s2);
    return m;
  };
  impl->sampler = [n](const Vec& t, Rng& rng, Vec& out) {
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = t[0] + t[1] * rng.normal();
  };
  impl->theta_check = [](const Vec& t) {
    require(t[1] > 0.0, Errc::DomainError, "sigma must be positive");
  };
  return DataModel(std::move(impl));
}

DataModel DataModel::exponential_rate() {
  auto impl = std::make_shared<Impl>();
  impl->family = Family::ExponentialRate;
  impl->name = "exponential_rate";
  impl->theta_dim = 1;
  impl->obs = ObservationSpace::continuum(IntegBox{{0.0}, {kInf}});
  auto dens = [](const Vec& t, const Vec& x) {
    return x[0] >= 0.0 ? t[0] * std::exp(-t[0] * x[0]) : 0.0;
  };
  auto ldens = [](const Vec& t, const Vec& x) {
    return x[0] >= 0.0 ? std::log(t[0]) - t[0] * x[0] : -kInf;
  };
  impl->density = dens;
  impl->log_dens = ldens;
  impl->reduction = identity_reduction(impl->obs, dens, ldens);
  impl->fisher = [](const Vec& t) {
    SymMatrix m(1);
    m.set(0, 0, 1.0 / (t[0] * t[0]));
    return m;
  };
  impl->sampler = [](const Vec& t, Rng& rng, Vec& out) {
    out.assign(1, rng.exponential(t[0]));
  };
  impl->cdf = [](const Vec& t, double x) {
    return x <= 0.0 ? 0.0 : -std::expm1(-t[0] * x);
  };
  impl->theta_check = [](const Vec& t) {
    require(t[0] > 0.0, Errc::DomainError, "rate must be positive");
  };
  return DataModel(std::move(impl));
}

DataModel DataModel::iid_product(DataModel base, int count) {
  require(count >= 1, Errc::InvalidConfig, "count must be positive");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::IIDProduct;
  impl->name = base.name() + "_iid" + std::to_string(count);
  impl->theta_dim = base.theta_dim();
  const ObservationSpace& bobs = base.obs_space();
  int bd = bobs.dim();
  if (bobs.kind == ObservationSpace::Kind::FiniteSet) {
    double total = std::pow((double)bobs.points.size(), count);
    require(total <= 65536.0, Errc::UnsupportedClass,
            "product observation set too large to enumerate");
    std::vector<Vec> pts{{}};
    for (int c = 0; c < count; ++c) {
      std::vector<Vec> next;
      next.reserve(pts.size() * bobs.points.size());
      for (const auto& head : pts)
        for (const auto& tail : bobs.points) {
          Vec v = head;
          v.insert(v.end(), tail.begin(), tail.end());
          next.push_back(std::move(v));
        }
      pts = std::move(next);
    }
    impl->obs = ObservationSpace::finite(std::move(pts));
  } else {
    Vec lo, hi;
    for (int c = 0; c < count; ++c) {
      lo.insert(lo.end(), bobs.box.lo.begin(), bobs.box.lo.end());
      hi.insert(hi.end(), bobs.box.hi.begin(), bobs.box.hi.end());
    }
    impl->obs = ObservationSpace::continuum(IntegBox{lo, hi});
  }
  auto ldens = [base, count, bd](const Vec& t, const Vec& x) {
    double s = 0.0;
    Vec slice(bd);
    for (int c = 0; c < count; ++c) {
      for (int i = 0; i < bd; ++i) slice[i] = x[(std::size_t)c * bd + i];
      s += base.log_density(t, slice);
    }
    return s;
  };
  impl->density = [ldens](const Vec& t, const Vec& x) {
    return std::exp(ldens(t, x));
  };
  impl->log_dens = ldens;
  impl->reduction = identity_reduction(impl->obs, impl->density, ldens);
  if (base.has_analytic_fisher()) {
    impl->fisher = [base, count](const Vec& t) {
      return base.analytic_fisher(t).scaled((double)count);
    };
  }
  if (base.can_sample()) {
    impl->sampler = [base, count, bd](const Vec& t, Rng& rng, Vec& out) {
      out.clear();
      out.reserve((std::size_t)count * bd);
      Vec slice;
      for (int c = 0; c < count; ++c) {
        base.sample(t, rng, slice);
        out.insert(out.end(), slice.begin(), slice.end());
      }
    };
  }
  impl->theta_check = [base](const Vec& t) { base.validate_theta(t); };
  return DataModel(std::move(impl));
}

DataModel DataModel::table(std::vector<Vec> theta_points,
                           std::vector<Vec> obs_points,
                           std::vector<std::vector<double>> pmf_rows) {
  require(!theta_points.empty() && pmf_rows.size() == theta_points.size(),
          Errc::InvalidConfig, "one pmf row per theta point required");
  require(!obs_points.empty(), Errc::InvalidConfig, "empty observation set");
  for (auto& row : pmf_rows) {
    require(row.size() == obs_points.size(), Errc::InvalidConfig,
            "pmf row length must match the observation set");
    double s = 0.0;
    for (double v : row) {
      require(v >= 0.0, Errc::InvalidConfig, "pmf entries must be >= 0");
      s += v;
    }
    require(std::fabs(s - 1.0) < 1e-9, Errc::InvalidConfig,
            "pmf row does not sum to one");
    for (double& v : row) v /= s;
  }
  auto impl = std::make_shared<Impl>();
  impl->family = Family::Custom;
  impl->name = "table";
  impl->theta_dim = (int)theta_points[0].size();
  impl->obs = ObservationSpace::finite(obs_points);
  auto thetas = std::make_shared<std::vector<Vec>>(std::move(theta_points));
  auto obs = std::make_shared<std::vector<Vec>>(std::move(obs_points));
  auto rows = std::make_shared<std::vector<std::vector<double>>>(
      std::move(pmf_rows));
  auto row_of = [thetas](const Vec& t) {
    for (std::size_t i = 0; i < thetas->size(); ++i)
      if (same_point((*thetas)[i], t)) return (int)i;
    fail(Errc::DomainError, "theta is not a row of the table model");
  };
  auto dens = [row_of, obs, rows](const Vec& t, const Vec& x) {
    int r = row_of(t);
    for (std::size_t j = 0; j < obs->size(); ++j)
      if (same_point((*obs)[j], x)) return (*rows)[r][j];
    return 0.0;
  };
  impl->density = dens;
  impl->log_dens = log_of(dens);
  impl->reduction = identity_reduction(impl->obs, dens, log_of(dens));
  impl->sampler = [row_of, obs, rows](const Vec& t, Rng& rng, Vec& out) {
    out = (*obs)[rng.categorical((*rows)[row_of(t)])];
  };
  impl->theta_check = [row_of](const Vec& t) { row_of(t); };
  return DataModel(std::move(impl));
}

DataModel DataModel::custom(
    std::string name, int theta_dim, ObservationSpace obs,
    std::function<double(const Vec&, const Vec&)> density,
    std::function<void(const Vec&, Rng&, Vec&)> sampler,
    std::function<void(const Vec&)> theta_check) {
  require((bool)density, Errc::InvalidConfig, "custom model needs a density");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::Custom;
  impl->name = std::move(name);
  impl->theta_dim = theta_dim;
  impl->obs = std::move(obs);
  impl->density = density;
  impl->log_dens = log_of(density);
  impl->reduction = identity_reduction(impl->obs, density, log_of(density));
  impl->sampler = std::move(sampler);
  impl->theta_check = std::move(theta_check);
  return DataModel(std::move(impl));
}

DataModel DataModel::custom_reduced(
    std::string name, int theta_dim, ObservationSpace obs,
    std::function<double(const Vec&, const Vec&)> density,
    std::function<double(const Vec&, const Vec&)> log_density,
    Reduction reduction,
    std::function<void(const Vec&, Rng&, Vec&)> sampler,
    std::function<void(const Vec&)> theta_check) {
  require((bool)density, Errc::InvalidConfig, "custom model needs a density");
  require((bool)reduction.weight && (bool)reduction.log_density,
          Errc::InvalidConfig, "reduction needs weight and log_density");
  auto impl = std::make_shared<Impl>();
  impl->family = Family::Custom;
  impl->name = std::move(name);
  impl->theta_dim = theta_dim;
  impl->obs = std::move(obs);
  impl->density = density;
  impl->log_dens = log_density ? log_density : log_of(density);
  impl->reduction = std::move(reduction);
  impl->sampler = std::move(sampler);
  impl->theta_check = std::move(theta_check);
  return DataModel(std::move(impl));
}

DataModel DataModel::with_parameter_map(
    std::string name_suffix, std::function<Vec(const Vec&)> to_base,
    std::function<void(const Vec&)> theta_check) const {
  require((bool)to_base, Errc::InvalidConfig, "parameter map required");
  DataModel base = *this;
  auto impl = std::make_shared<Impl>();
  impl->family = Family::Custom;
  impl->name = base.name() + name_suffix;
  impl->theta_dim = base.theta_dim();
  impl->obs = base.obs_space();
  impl->density = [base, to_base](const Vec& t, const Vec& x) {
    return base.density(to_base(t), x);
  };
  impl->log_dens = [base, to_base](const Vec& t, const Vec& x) {
    return base.log_density(to_base(t), x);
  };
  if (base.has_reduction()) {
    Reduction r = base.reduction();
    auto w = r.weight;
    auto ld = r.log_density;
    r.weight = [w, to_base](const Vec& t, const Vec& u) {
      return w(to_base(t), u);
    };
    r.log_density = [ld, to_base](const Vec& t, const Vec& u) {
      return ld(to_base(t), u);
    };
    impl->reduction = std::move(r);
  }
  if (base.can_sample()) {
    impl->sampler = [base, to_base](const Vec& t, Rng& rng, Vec& out) {
      base.sample(to_base(t), rng, out);
    };
  }
  if (base.has_cdf()) {
    impl->cdf = [base, to_base](const Vec& t, double x) {
      return base.cdf(to_base(t), x);
    };
  }
  impl->theta_check = [base, to_base,
                       theta_check = std::move(theta_check)](const Vec& t) {
    if (theta_check) theta_check(t);
    base.validate_theta(to_base(t));
  };
  return DataModel(std::move(impl));
}

// ----------------------------------------------------------- Prior

struct Prior::CdfCache {
  double lo = 0.0, hi = 0.0;
  Vec xs, cum;
};

double Prior::density(const ParameterSpace& space, const Vec& theta) const {
  switch (kind_) {
    case Kind::FinitePmf: {
      require(space.kind == ParameterSpace::Kind::FiniteSet,
              Errc::PreconditionViolated,
              "finite pmf prior needs a finite parameter set");
      require(weights_.size() == space.points.size(),
              Errc::PreconditionViolated,
              "pmf length must match the parameter set");
      for (std::size_t i = 0; i < space.points.size(); ++i)
        if (same_point(space.points[i], theta)) return weights_[i];
      return 0.0;
    }
    case Kind::UniformBox: {
      if (space.kind == ParameterSpace::Kind::FiniteSet)
        return 1.0 / (double)space.points.size();
      double vol = 1.0;
      for (std::size_t i = 0; i < space.lower.size(); ++i)
        vol *= space.upper[i] - space.lower[i];
      return space.contains(theta) ? 1.0 / vol : 0.0;
    }
    case Kind::BetaParams: {
      double t = theta.at(0);
      if (t <= 0.0 || t >= 1.0) return 0.0;
      double lb = std::lgamma(a_) + std::lgamma(b_) - std::lgamma(a_ + b_);
      return std::exp((a_ - 1.0) * std::log(t) + (b_ - 1.0) * std::log1p(-t) -
                      lb);
    }
    case Kind::GaussianParams: {
      require(theta.size() == mean_.size(), Errc::DomainError,
              "theta dimension does not match the prior");
      double v = 1.0;
      for (std::size_t i = 0; i < mean_.size(); ++i)
        v *= normal_pdf(theta[i], mean_[i], sigma_[i]);
      return v;
    }
    case Kind::PowerLawSigma: {
      double s = theta.at((std::size_t)axis_);
      return s > 0.0 ? 1.0 / s : 0.0;
    }
    case Kind::CustomDensity:
      return dens_(theta);
  }
  fail(Errc::DomainError, "unknown prior kind");
}

bool Prior::can_sample() const {
  return kind_ != Kind::PowerLawSigma;
}

Vec Prior::sample(const ParameterSpace& space, Rng& rng) const {
  require(can_sample(), Errc::UnsupportedClass,
          "improper priors cannot be sampled");
  if (space.kind == ParameterSpace::Kind::FiniteSet) {
    std::vector<double> w(space.points.size());
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = density(space, space.points[i]);
    return space.points[rng.categorical(w)];
  }
  switch (kind_) {
    case Kind::UniformBox: {
      Vec out(space.lower.size());
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = space.lower[i] +
                 rng.uniform01() * (space.upper[i] - space.lower[i]);
      return out;
    }
    case Kind::GaussianParams: {
      Vec out(mean_.size());
      for (std::size_t i = 0; i < out.size(); ++i) {
        double pa = normal_cdf((space.lower[i] - mean_[i]) / sigma_[i]);
        double pb = normal_cdf((space.upper[i] - mean_[i]) / sigma_[i]);
        double u = pa + rng.uniform01() * (pb - pa);
        out[i] = mean_[i] + sigma_[i] * normal_quantile(u);
      }
      return out;
    }
    case Kind::CustomDensity:
      if (sampler_) return sampler_(rng);
      return sample_grid_inverse_(space, rng);
    case Kind::BetaParams:
      return sample_grid_inverse_(space, rng);
    default:
      fail(Errc::UnsupportedClass, "prior kind cannot be sampled");
  }
}

Vec Prior::sample_grid_inverse_(const ParameterSpace& space, Rng& rng) const {
  require(space.kind == ParameterSpace::Kind::Box && space.dim() == 1,
          Errc::UnsupportedClass,
          "grid inversion sampling needs a one-dimensional box");
  double lo = space.lower[0], hi = space.upper[0];
  if (!cache_ || cache_->lo != lo || cache_->hi != hi) {
    auto c = std::make_shared<CdfCache>();
    c->lo = lo;
    c->hi = hi;
    const int n = 4096;
    c->xs.resize(n + 1);
    c->cum.assign(n + 1, 0.0);
    double prev = 0.0;
    for (int i = 0; i <= n; ++i) {
      double x = lo + (hi - lo) * i / n;
      c->xs[i] = x;
      double d = density(space, Vec{x});
      require(std::isfinite(d) && d >= 0.0, Errc::DomainError,
              "prior density must be finite and non-negative to sample");
      if (i > 0)
        c->cum[i] = c->cum[i - 1] + 0.5 * (prev + d) * (hi - lo) / n;
      prev = d;
    }
    require(c->cum[n] > 0.0, Errc::NonNormalisablePrior,
            "prior has no mass on the parameter box");
    cache_ = std::move(c);
  }
  double target = rng.uniform01() * cache_->cum.back();
  auto it = std::lower_bound(cache_->cum.begin(), cache_->cum.end(), target);
  std::size_t j = std::min((std::size_t)(it - cache_->cum.begin()),
                           cache_->cum.size() - 1);
  if (j == 0) return Vec{cache_->xs[0]};
  double c0 = cache_->cum[j - 1], c1 = cache_->cum[j];
  double frac = c1 > c0 ? (target - c0) / (c1 - c0) : 0.5;
  return Vec{cache_->xs[j - 1] + frac * (cache_->xs[j] - cache_->xs[j - 1])};
}

Prior Prior::finite_pmf(std::vector<double> weights) {
  require(!weights.empty(), Errc::InvalidConfig, "empty prior pmf");
  double s = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), Errc::InvalidConfig,
            "prior weights must be finite and >= 0");
    s += w;
  }
  require(s > 0.0, Errc::NonNormalisablePrior, "prior weights sum to zero");
  for (double& w : weights) w /= s;
  Prior p;
  p.kind_ = Kind::FinitePmf;
  p.name_ = "finite_pmf";
  p.weights_ = std::move(weights);
  return p;
}

Prior Prior::uniform_box() {
  Prior p;
  p.kind_ = Kind::UniformBox;
  p.name_ = "uniform";
  return p;
}

Prior Prior::beta(double a, double b) {
  require(a > 0.0 && b > 0.0, Errc::InvalidConfig,
          "beta parameters must be positive");
  Prior p;
  p.kind_ = Kind::BetaParams;
  p.name_ = "beta(" + std::to_string(a) + "," + std::to_string(b) + ")";
  p.a_ = a;
  p.b_ = b;
  return p;
}

Prior Prior::gaussian(Vec mean, Vec sigma) {
  require(!mean.empty() && mean.size() == sigma.size(), Errc::InvalidConfig,
          "prior mean and sigma must have equal dimension");
  for (double s : sigma)
    require(s > 0.0, Errc::InvalidConfig, "prior sigma must be positive");
  Prior p;
  p.kind_ = Kind::GaussianParams;
  p.name_ = "gaussian";
  p.mean_ = std::move(mean);
  p.sigma_ = std::move(sigma);
  return p;
}

Prior Prior::power_law_sigma(int axis) {
  require(axis >= 0, Errc::InvalidConfig, "bad axis");
  Prior p;
  p.kind_ = Kind::PowerLawSigma;
  p.name_ = "power_law_sigma";
  p.normalised_ = false;
  p.axis_ = axis;
  return p;
}

Prior Prior::custom(std::function<double(const Vec&)> dens, bool normalised,
                    std::function<Vec(Rng&)> sampler, std::string name) {
  require((bool)dens, Errc::InvalidConfig, "custom prior needs a density");
  Prior p;
  p.kind_ = Kind::CustomDensity;
  p.name_ = std::move(name);
  p.normalised_ = normalised;
  p.dens_ = std::move(dens);
  p.sampler_ = std::move(sampler);
  return p;
}

// ------------------------------------------------- EstimationProblem

EstimationProblem::EstimationProblem(ParameterSpace theta_space,
                                     DataModel model, Prior prior,
                                     ValidationLevel level)
    : theta_space_(std::move(theta_space)),
      model_(std::move(model)),
      prior_(std::move(prior)) {
  bool tf = theta_space_.kind == ParameterSpace::Kind::FiniteSet;
  bool of = model_.obs_space().kind == ObservationSpace::Kind::FiniteSet;
  class_ = tf && of ? ProblemClass::Discrete
                    : (!tf && !of ? ProblemClass::Continuous
                                  : ProblemClass::SemiContinuous);
  validate_(level);
}

int EstimationProblem::theta_dim() const { return theta_space_.dim(); }
int EstimationProblem::obs_dim() const { return model_.obs_space().dim(); }

void EstimationProblem::validate_(ValidationLevel level) const {
  require(theta_space_.dim() == model_.theta_dim(), Errc::PreconditionViolated,
          "parameter space dimension does not match the model");

  std::vector<Vec> probes;
  if (theta_space_.kind == ParameterSpace::Kind::FiniteSet) {
    for (const auto& p : theta_space_.points) model_.validate_theta(p);
    probes = theta_space_.points;
  } else {
    Vec center(theta_space_.dim());
    for (int i = 0; i < theta_space_.dim(); ++i)
      center[i] = 0.5 * (theta_space_.lower[i] + theta_space_.upper[i]);
    model_.validate_theta(center);
    probes.push_back(center);
    Vec shifted = center;
    shifted[0] += 0.05 * (theta_space_.upper[0] - theta_space_.lower[0]);
    model_.validate_theta(shifted);
    probes.push_back(shifted);
  }
  if (level == ValidationLevel::Light) return;

  // prior sanity at the probes
  bool positive = false;
  for (const auto& t : probes) {
    double d = prior_.density(theta_space_, t);
    require(std::isfinite(d) && d >= 0.0, Errc::DomainError,
            "prior density must be finite and non-negative");
    if (d > 0.0) positive = true;
  }
  require(positive, Errc::NonNormalisablePrior,
          "prior has no mass near the probe parameters");

  if (prior_.claims_normalised()) {
    double mass = -1.0;
    if (theta_space_.kind == ParameterSpace::Kind::FiniteSet) {
      mass = 0.0;
      for (const auto& t : theta_space_.points)
        mass += prior_.density(theta_space_, t);
    } else if (theta_space_.dim() <= 3) {
      IntegBox box{theta_space_.lower, theta_space_.upper};
      auto f = [&](const Vec& t) { return prior_.density(theta_space_, t); };
      IntegralResult r = integrate_box(f, box, QuadSpec{1e-6, 1e-9, 2000, 8});
      if (r.converged) mass = r.value;
    }
    require(mass < 0.0 || std::fabs(mass - 1.0) <= 1e-2,
            Errc::NonNormalisablePrior,
            "prior claims normalisation but its mass differs from one");
  }

  // the conditional density should integrate to one at a probe theta
  try {
    double m = normalisation_mass(*this, probes[0]);
    require(std::fabs(m - 1.0) <= 1e-2, Errc::PreconditionViolated,
            "conditional density mass differs from one at a probe theta");
  } catch (const Error& e) {
    if (e.code() != Errc::UnsupportedClass) throw;
  }

  // the two probe parameters must be statistically distinguishable
  if (probes.size() >= 2) {
    const Vec &ta = probes[0], &tb = probes[1];
    std::vector<Vec> xs;
    if (model_.obs_space().kind == ObservationSpace::Kind::FiniteSet) {
      xs = model_.obs_space().points;
    } else if (model_.can_sample()) {
      Rng rng(123);
      Vec x;
      for (int i = 0; i < 8; ++i) {
        model_.sample(ta, rng, x);
        xs.push_back(x);
      }
    }
    if (!xs.empty()) {
      double dev = 0.0, scale = 0.0;
      for (const auto& x : xs) {
        double fa = model_.density(ta, x), fb = model_.density(tb, x);
        dev = std::max(dev, std::fabs(fa - fb));
        scale = std::max({scale, std::fabs(fa), std::fabs(fb)});
      }
      require(dev > 1e-12 * std::max(scale, 1e-300),
              Errc::PreconditionViolated,
              "probe parameters are statistically indistinguishable");
    }
  }
}

// ------------------------------------------------------ free functions

double cond_density(const EstimationProblem& p, const Vec& theta,
                    const Vec& x) {
  p.model().validate_theta(theta);
  require(p.model().obs_space().contains(x), Errc::OutOfSupport,
          "observation lies outside the observation space");
  return p.model().density(theta, x);
}

double likelihood_ratio(const EstimationProblem& p, const Vec& theta1,
                        const Vec& theta2, const Vec& x) {
  double f1 = cond_density(p, theta1, x);
  double f2 = cond_density(p, theta2, x);
  require(f2 > 0.0, Errc::DivisionByZeroSupport,
          "likelihood ratio at a point with zero denominator density");
  return f1 / f2;
}

double prior_density(const EstimationProblem& p, const Vec& theta) {
  return p.prior().density(p.theta_space(), theta);
}

double posterior_unnorm(const EstimationProblem& p, const Vec& theta,
                        const Vec& x) {
  return cond_density(p, theta, x) * prior_density(p, theta);
}

double evidence(const EstimationProblem& p, const Vec& x,
                const QuadSpec& spec) {
  const ParameterSpace& sp = p.theta_space();
  if (sp.kind == ParameterSpace::Kind::FiniteSet) {
    double s = 0.0;
    for (const auto& t : sp.points) s += posterior_unnorm(p, t, x);
    return s;
  }
  require(sp.dim() <= 3, Errc::UnsupportedClass,
          "evidence integral supports at most 3 parameter dimensions");
  IntegBox box{sp.lower, sp.upper};
  auto f = [&](const Vec& t) { return posterior_unnorm(p, t, x); };
  IntegralResult r = integrate_box(f, box, spec);
  require(r.converged, Errc::IntegralNotConverged,
          "evidence integral did not converge");
  return r.value;
}

double posterior(const EstimationProblem& p, const Vec& theta, const Vec& x,
                 const QuadSpec& spec) {
  double z = evidence(p, x, spec);
  require(z > 0.0, Errc::DomainError,
          "evidence vanishes at this observation");
  return posterior_unnorm(p, theta, x) / z;
}

std::vector<double> posterior_pmf(const EstimationProblem& p, const Vec& x) {
  const ParameterSpace& sp = p.theta_space();
  require(sp.kind == ParameterSpace::Kind::FiniteSet, Errc::UnsupportedClass,
          "posterior pmf needs a finite parameter set");
  std::vector<double> w(sp.points.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = posterior_unnorm(p, sp.points[i], x);
    s += w[i];
  }
  require(s > 0.0, Errc::DomainError,
          "posterior has no mass at this observation");
  for (double& v : w) v /= s;
  return w;
}

double expect_ratio_functional(const EstimationProblem& p, const Vec& theta1,
                               const Vec& theta2,
                               const std::function<double(double)>& G,
                               const QuadSpec& spec) {
  p.model().validate_theta(theta1);
  p.model().validate_theta(theta2);
  const Reduction& red = p.model().reduction();
  auto term = [&](const Vec& u) {
    double w = red.weight(theta2, u);
    if (!(w > 0.0)) return 0.0;
    double r = std::exp(red.log_density(theta1, u) -
                        red.log_density(theta2, u));
    return w * G(r);
  };
  if (red.finite) {
    double s = 0.0;
    for (const auto& u : red.finite_points) s += term(u);
    return s;
  }
  IntegralResult r = integrate_box(term, red.domain, spec, red.breakpoints);
  require(r.converged, Errc::IntegralNotConverged,
          "ratio expectation did not converge");
  return r.value;
}

double normalisation_mass(const EstimationProblem& p, const Vec& theta,
                          const QuadSpec& spec) {
  p.model().validate_theta(theta);
  const Reduction& red = p.model().reduction();
  if (red.finite) {
    double s = 0.0;
    for (const auto& u : red.finite_points) s += red.weight(theta, u);
    return s;
  }
  auto f = [&](const Vec& u) { return red.weight(theta, u); };
  IntegralResult r = integrate_box(f, red.domain, spec, red.breakpoints);
  require(r.converged, Errc::IntegralNotConverged,
          "normalisation integral did not converge");
  return r.value;
}

}  // namespace eic
