#include "eic/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "eic/losses.hpp"
#include "eic/model.hpp"

namespace eic {

// ---------------------------------------------------------------- SymMatrix

SymMatrix::SymMatrix(int dim) : n_(dim), a_((std::size_t)dim * dim, 0.0) {
  require(dim >= 1, Errc::InvalidConfig, "matrix dimension must be >= 1");
}

SymMatrix SymMatrix::identity(int dim, double scale) {
  SymMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.set(i, i, scale);
  return m;
}

void SymMatrix::set(int i, int j, double v) {
  a_[(std::size_t)i * n_ + j] = v;
  a_[(std::size_t)j * n_ + i] = v;
  decomposed_ = false;
}

void SymMatrix::decompose() const {
  // LU with partial pivoting for the determinant; Cholesky for definiteness
  std::vector<double> lu(a_);
  double det = 1.0;
  for (int k = 0; k < n_; ++k) {
    int piv = k;
    for (int i = k + 1; i < n_; ++i)
      if (std::fabs(lu[(std::size_t)i * n_ + k]) >
          std::fabs(lu[(std::size_t)piv * n_ + k]))
        piv = i;
    if (piv != k) {
      for (int j = 0; j < n_; ++j)
        std::swap(lu[(std::size_t)piv * n_ + j], lu[(std::size_t)k * n_ + j]);
      det = -det;
    }
    double p = lu[(std::size_t)k * n_ + k];
    det *= p;
    if (p == 0.0) break;
    for (int i = k + 1; i < n_; ++i) {
      double f = lu[(std::size_t)i * n_ + k] / p;
      lu[(std::size_t)i * n_ + k] = f;
      for (int j = k + 1; j < n_; ++j)
        lu[(std::size_t)i * n_ + j] -= f * lu[(std::size_t)k * n_ + j];
    }
  }
  det_ = det;

  std::vector<double> ch(a_);
  bool pd = true;
  for (int k = 0; k < n_ && pd; ++k) {
    double s = ch[(std::size_t)k * n_ + k];
    for (int j = 0; j < k; ++j) {
      double v = ch[(std::size_t)k * n_ + j];
      s -= v * v;
    }
    if (!(s > 0.0)) {
      pd = false;
      break;
    }
    double r = std::sqrt(s);
    ch[(std::size_t)k * n_ + k] = r;
    for (int i = k + 1; i < n_; ++i) {
      double v = ch[(std::size_t)i * n_ + k];
      for (int j = 0; j < k; ++j)
        v -= ch[(std::size_t)i * n_ + j] * ch[(std::size_t)k * n_ + j];
      ch[(std::size_t)i * n_ + k] = v / r;
    }
  }
  pd_ = pd;
  decomposed_ = true;
}

double SymMatrix::det() const {
  if (!decomposed_) decompose();
  return det_;
}

bool SymMatrix::positive_definite() const {
  if (!decomposed_) decompose();
  return pd_;
}

SymMatrix SymMatrix::scaled(double c) const {
  SymMatrix m(n_);
  for (int i = 0; i < n_; ++i)
    for (int j = i; j < n_; ++j) m.set(i, j, c * at(i, j));
  return m;
}

SymMatrix SymMatrix::inverse() const {
  // Gauss-Jordan; matrices here are tiny
  int n = n_;
  std::vector<double> aug((std::size_t)n * 2 * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aug[(std::size_t)i * 2 * n + j] = at(i, j);
    aug[(std::size_t)i * 2 * n + n + i] = 1.0;
  }
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(aug[(std::size_t)i * 2 * n + k]) >
          std::fabs(aug[(std::size_t)piv * 2 * n + k]))
        piv = i;
    require(aug[(std::size_t)piv * 2 * n + k] != 0.0, Errc::DomainError,
            "singular matrix has no inverse");
    if (piv != k)
      for (int j = 0; j < 2 * n; ++j)
        std::swap(aug[(std::size_t)piv * 2 * n + j],
                  aug[(std::size_t)k * 2 * n + j]);
    double p = aug[(std::size_t)k * 2 * n + k];
    for (int j = 0; j < 2 * n; ++j) aug[(std::size_t)k * 2 * n + j] /= p;
    for (int i = 0; i < n; ++i) {
      if (i == k) continue;
      double f = aug[(std::size_t)i * 2 * n + k];
      if (f == 0.0) continue;
      for (int j = 0; j < 2 * n; ++j)
        aug[(std::size_t)i * 2 * n + j] -= f * aug[(std::size_t)k * 2 * n + j];
    }
  }
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      m.set(i, j, 0.5 * (aug[(std::size_t)i * 2 * n + n + j] +
                         aug[(std::size_t)j * 2 * n + n + i]));
  return m;
}

double SymMatrix::inf_norm() const {
  double best = 0.0;
  for (int i = 0; i < n_; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_; ++j) row += std::fabs(at(i, j));
    best = std::max(best, row);
  }
  return best;
}

double rel_deviation(const SymMatrix& a, const SymMatrix& ref) {
  require(a.dim() == ref.dim(), Errc::DomainError, "dimension mismatch");
  SymMatrix diff(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = i; j < a.dim(); ++j) diff.set(i, j, a.at(i, j) - ref.at(i, j));
  double denom = ref.inf_norm();
  require(denom > 0.0, Errc::DomainError, "zero reference matrix");
  return diff.inf_norm() / denom;
}

// --------------------------------------------------------------- quadrature

namespace {

// Gauss 7 / Kronrod 15 nodes and weights on [-1, 1] (QUADPACK values).
const double kXgk[8] = {0.991455371120813, 0.949107912342759,
                        0.864864423359769, 0.741531185599394,
                        0.586087235467691, 0.405845151377397,
                        0.207784955007898, 0.000000000000000};
const double kWgk[8] = {0.022935322010529, 0.063092092629979,
                        0.104790010322250, 0.140653259715525,
                        0.169004726639267, 0.190350578064785,
                        0.204432940075298, 0.209482141084728};
const double kWg[4] = {0.129484966168870, 0.279705391489277,
                       0.381830050505119, 0.417959183673469};

struct Panel {
  double a, b;
  double value, error;
  double abs_value;  // integral of |f|, for the roundoff floor
};

// Achievable accuracy saturates near 100 ulp of the integral of |f|.
constexpr double kRoundoffFloor = 100.0 * 2.220446049250313e-16;

struct PanelWorse {
  bool operator()(const Panel& x, const Panel& y) const {
    return x.error < y.error;
  }
};

// One G7/K15 evaluation over [a, b].
Panel gk15(const std::function<double(double)>& f, double a, double b,
           long& evals, bool& nonfinite) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double resk = 0.0, resg = 0.0, resabs = 0.0;
  for (int i = 0; i < 8; ++i) {
    double x1 = c - h * kXgk[i];
    double v1 = f(x1);
    ++evals;
    if (!std::isfinite(v1)) nonfinite = true;
    if (i == 7) {
      resk += kWgk[7] * v1;
      resg += kWg[3] * v1;
      resabs += kWgk[7] * std::fabs(v1);
      break;
    }
    double x2 = c + h * kXgk[i];
    double v2 = f(x2);
    ++evals;
    if (!std::isfinite(v2)) nonfinite = true;
    resk += kWgk[i] * (v1 + v2);
    resabs += kWgk[i] * (std::fabs(v1) + std::fabs(v2));
    if (i % 2 == 1) resg += kWg[i / 2] * (v1 + v2);
  }
  double value = resk * h;
  double err = std::fabs((resk - resg) * h);
  // sharpen the raw difference the way QUADPACK does
  err = std::min(err, std::pow(200.0 * err / std::max(1e-300, std::fabs(value) + err), 1.5) *
                           (std::fabs(value) + err));
  return Panel{a, b, value, err, resabs * h};
}

struct AxisMap {
  // maps t in (lo_t, hi_t) to x, with weight dx/dt
  double lo_t, hi_t;
  std::function<double(double)> to_x;
  std::function<double(double)> weight;
  std::function<double(double)> to_t;  // inverse, for breakpoints
};

AxisMap make_axis_map(double a, double b) {
  const double half_pi = 1.5707963267948966;
  AxisMap m;
  bool ainf = std::isinf(a), binf = std::isinf(b);
  if (!ainf && !binf) {
    m.lo_t = a;
    m.hi_t = b;
    m.to_x = [](double t) { return t; };
    m.weight = [](double) { return 1.0; };
    m.to_t = [](double x) { return x; };
  } else if (ainf && binf) {
    m.lo_t = -half_pi;
    m.hi_t = half_pi;
    m.to_x = [](double t) { return std::tan(t); };
    m.weight = [](double t) {
      double c = std::tan(t);
      return 1.0 + c * c;
    };
    m.to_t = [](double x) { return std::atan(x); };
  } else if (!ainf && binf) {
    m.lo_t = 0.0;
    m.hi_t = half_pi;
    m.to_x = [a](double t) { return a + std::tan(t); };
    m.weight = [](double t) {
      double c = std::tan(t);
      return 1.0 + c * c;
    };
    m.to_t = [a](double x) { return std::atan(x - a); };
  } else {
    m.lo_t = 0.0;
    m.hi_t = half_pi;
    m.to_x = [b](double t) { return b - std::tan(t); };
    m.weight = [](double t) {
      double c = std::tan(t);
      return 1.0 + c * c;
    };
    m.to_t = [b](double x) { return std::atan(b - x); };
  }
  return m;
}

}  // namespace

IntegralResult integrate_1d(const std::function<double(double)>& f, double a,
                            double b, const QuadSpec& spec,
                            const std::vector<double>& breakpoints) {
  IntegralResult out;
  if (a == b) return out;
  require(a < b, Errc::DomainError, "integration bounds out of order");
  AxisMap map = make_axis_map(a, b);
  auto g = [&](double t) { return f(map.to_x(t)) * map.weight(t); };

  std::vector<double> cuts{map.lo_t, map.hi_t};
  for (double x : breakpoints) {
    if (!std::isfinite(x) || x <= a || x >= b) continue;
    cuts.push_back(map.to_t(x));
  }
  int splits = std::max(1, spec.initial_splits);
  for (int i = 1; i < splits; ++i)
    cuts.push_back(map.lo_t + (map.hi_t - map.lo_t) * i / splits);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  bool nonfinite = false;
  std::priority_queue<Panel, std::vector<Panel>, PanelWorse> heap;
  double total = 0.0, toterr = 0.0, totabs = 0.0;
  int n_panels = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Panel p = gk15(g, cuts[i], cuts[i + 1], out.evaluations, nonfinite);
    total += p.value;
    toterr += p.error;
    totabs += p.abs_value;
    heap.push(p);
    ++n_panels;
  }
  auto error_bound = [&]() {
    double bound = std::max(spec.abs_tol, spec.rel_tol * std::fabs(total));
    bound = std::max(bound, 2e-16 * std::fabs(total));
    // a signed integrand assembled from cancelling regions cannot be summed
    // more accurately than the rounding noise of its absolute mass, so a
    // request below that floor counts as met once the floor is reached
    return std::max(bound, kRoundoffFloor * totabs);
  };
  auto good_enough = [&]() { return toterr <= error_bound(); };
  // when the error estimate no longer halves while the panel count doubles,
  // the decomposition has hit the floor set by evaluation noise; further
  // subdivision only burns the budget without buying accuracy
  bool stagnated = false;
  int check_at = 2 * n_panels;
  double check_err = toterr;
  while (!good_enough() && n_panels < spec.max_intervals && !nonfinite) {
    Panel worst = heap.top();
    heap.pop();
    total -= worst.value;
    toterr -= worst.error;
    totabs -= worst.abs_value;
    double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {  // interval exhausted by rounding
      total += worst.value;
      toterr += worst.error;
      totabs += worst.abs_value;
      break;
    }
    Panel l = gk15(g, worst.a, mid, out.evaluations, nonfinite);
    Panel r = gk15(g, mid, worst.b, out.evaluations, nonfinite);
    total += l.value + r.value;
    toterr += l.error + r.error;
    totabs += l.abs_value + r.abs_value;
    heap.push(l);
    heap.push(r);
    ++n_panels;
    if (n_panels >= check_at) {
      if (toterr > 0.5 * check_err) {
        stagnated = true;
        break;
      }
      check_err = toterr;
      check_at = 2 * n_panels;
    }
  }
  out.value = total;
  out.error = toterr;
  // at a saturated plateau the estimate is known to be conservative by
  // orders of magnitude, so a near miss there is still a trustworthy result
  out.converged =
      !nonfinite &&
      (good_enough() || (stagnated && toterr <= 100.0 * error_bound()));
  return out;
}

IntegralResult integrate_box(
    const std::function<double(const Vec&)>& f, const IntegBox& box,
    const QuadSpec& spec, const std::vector<std::vector<double>>& breakpoints) {
  int d = box.dim();
  require(d >= 1, Errc::DomainError, "empty integration box");
  require(d <= 3, Errc::UnsupportedClass,
          "nested quadrature supports at most 3 dimensions");
  if (d == 1) {
    auto g = [&](double x) { return f(Vec{x}); };
    return integrate_1d(g, box.lo[0], box.hi[0], spec,
                        breakpoints.empty() ? std::vector<double>{}
                                            : breakpoints[0]);
  }
  QuadSpec inner = spec;
  inner.rel_tol = spec.rel_tol * 0.5;
  inner.abs_tol = spec.abs_tol * 0.1;
  IntegBox rest{Vec(box.lo.begin() + 1, box.lo.end()),
                Vec(box.hi.begin() + 1, box.hi.end())};
  std::vector<std::vector<double>> rest_bp;
  if (!breakpoints.empty())
    rest_bp.assign(breakpoints.begin() + 1, breakpoints.end());

  long inner_evals = 0;
  double worst_inner_rel = 0.0;
  double worst_failed_slice = 0.0;
  auto g = [&](double x0) {
    Vec full(d);
    full[0] = x0;
    auto h = [&](const Vec& tail) {
      for (int i = 1; i < d; ++i) full[i] = tail[i - 1];
      return f(full);
    };
    IntegralResult r = integrate_box(h, rest, inner, rest_bp);
    inner_evals += r.evaluations;
    if (!r.converged)
      worst_failed_slice =
          std::max(worst_failed_slice, std::fabs(r.value) + r.error);
    if (std::fabs(r.value) > 0)
      worst_inner_rel = std::max(worst_inner_rel, r.error / std::fabs(r.value));
    return r.value;
  };
  IntegralResult out = integrate_1d(
      g, box.lo[0], box.hi[0], spec,
      breakpoints.empty() ? std::vector<double>{} : breakpoints[0]);
  out.evaluations += inner_evals;
  out.error += std::fabs(out.value) * worst_inner_rel;
  // a slice that missed its own tolerance only matters if what it carries
  // could move the result: deep-tail slices of subnormal mass cannot
  out.converged =
      out.converged &&
      worst_failed_slice <=
          std::max(spec.abs_tol, spec.rel_tol * std::fabs(out.value));
  return out;
}

McResult integrate_mc(const std::function<double(const Vec&)>& f,
                      const std::function<void(Rng&, Vec&)>& sampler, long n,
                      std::uint64_t seed) {
  require(n > 1, Errc::DomainError, "need at least two samples");
  Rng rng(seed);
  Vec x;
  double sum = 0.0, sumsq = 0.0;
  for (long i = 0; i < n; ++i) {
    sampler(rng, x);
    double v = f(x);
    sum += v;
    sumsq += v * v;
  }
  McResult out;
  out.n = n;
  out.mean = sum / (double)n;
  double var = std::max(0.0, sumsq / (double)n - out.mean * out.mean);
  out.std_error = std::sqrt(var / (double)n);
  return out;
}

// ------------------------------------------------------------------- argmax

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct GuardedMetric {
  const std::function<double(const Vec&)>& raw;
  ArgmaxDiagnostics& diag;
  double operator()(const Vec& p) const {
    ++diag.metric_evaluations;
    double v;
    try {
      v = raw(p);
    } catch (const Error& e) {
      if (e.code() == Errc::BoundaryTooClose ||
          e.code() == Errc::IllDefinedEstimator) {
        ++diag.excluded_points;
        return kNegInf;
      }
      throw;
    }
    if (std::isnan(v)) {
      ++diag.excluded_points;
      return kNegInf;
    }
    return v;
  }
};

struct ScoredPoint {
  Vec x;
  double v;
};

// Nelder-Mead maximisation with projection onto the box.
ScoredPoint nelder_mead(const GuardedMetric& f, const Vec& start,
                        const Vec& lo, const Vec& hi, const ArgmaxConfig& cfg) {
  int n = (int)start.size();
  auto clamp = [&](Vec& p) {
    for (int i = 0; i < n; ++i) p[i] = std::min(hi[i], std::max(lo[i], p[i]));
  };
  std::vector<ScoredPoint> s;
  s.reserve(n + 1);
  s.push_back({start, f(start)});
  for (int i = 0; i < n; ++i) {
    Vec p = start;
    double w = hi[i] - lo[i];
    double step = 0.05 * w;
    p[i] = (p[i] + step <= hi[i]) ? p[i] + step : p[i] - step;
    clamp(p);
    s.push_back({p, f(p)});
  }
  auto by_value = [](const ScoredPoint& a, const ScoredPoint& b) {
    return a.v > b.v;
  };
  std::sort(s.begin(), s.end(), by_value);
  for (int it = 0; it < cfg.nm_max_iter; ++it) {
    // convergence: simplex extent relative to axis widths
    double extent = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int k = 0; k < n; ++k)
        extent = std::max(extent, std::fabs(s[i].x[k] - s[0].x[k]) /
                                      std::max(1e-300, hi[k] - lo[k]));
    if (extent < cfg.nm_rel_tol) break;

    Vec centroid(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) centroid[k] += s[i].x[k] / n;
    auto blend = [&](double t) {
      Vec p(n);
      for (int k = 0; k < n; ++k)
        p[k] = centroid[k] + t * (s[n].x[k] - centroid[k]);
      clamp(p);
      return p;
    };
    Vec xr = blend(-1.0);
    double fr = f(xr);
    if (fr > s[0].v) {
      Vec xe = blend(-2.0);
      double fe = f(xe);
      if (fe > fr)
        s[n] = {xe, fe};
      else
        s[n] = {xr, fr};
    } else if (fr > s[n - 1].v) {
      s[n] = {xr, fr};
    } else {
      Vec xc = blend(0.5);
      double fc = f(xc);
      if (fc > s[n].v) {
        s[n] = {xc, fc};
      } else {
        for (int i = 1; i <= n; ++i) {
          for (int k = 0; k < n; ++k)
            s[i].x[k] = s[0].x[k] + 0.5 * (s[i].x[k] - s[0].x[k]);
          s[i].v = f(s[i].x);
        }
      }
    }
    std::sort(s.begin(), s.end(), by_value);
  }
  return s[0];
}

// One round of per-axis parabolic refinement around the current best.
ScoredPoint polish(const GuardedMetric& f, ScoredPoint best, const Vec& lo,
                   const Vec& hi, const ArgmaxConfig& cfg) {
  int n = (int)best.x.size();
  for (int round = 0; round < cfg.polish_rounds; ++round) {
    double d_scale = 1e-4 * std::pow(0.25, round);
    for (int k = 0; k < n; ++k) {
      double w = hi[k] - lo[k];
      double d = d_scale * w;
      Vec p = best.x, q = best.x;
      p[k] = std::min(hi[k], best.x[k] + d);
      q[k] = std::max(lo[k], best.x[k] - d);
      if (p[k] - best.x[k] < 0.5 * d || best.x[k] - q[k] < 0.5 * d) continue;
      double fp = f(p), fq = f(q);
      double denom = 2.0 * best.v - fp - fq;
      if (!(denom > 0.0) || !std::isfinite(fp) || !std::isfinite(fq)) continue;
      double shift = 0.5 * d * (fp - fq) / denom;
      if (std::fabs(shift) > d) shift = (shift > 0 ? d : -d);
      Vec cand = best.x;
      cand[k] = std::min(hi[k], std::max(lo[k], best.x[k] + shift));
      double fc = f(cand);
      if (fc > best.v) best = {cand, fc};
    }
  }
  return best;
}

}  // namespace

EstimateSet argmax(const std::function<double(const Vec&)>& metric,
                   const ParameterSpace& space, const ArgmaxConfig& cfg) {
  EstimateSet out;
  out.tie_tolerance = cfg.tie_rel_tol;
  GuardedMetric f{metric, out.diagnostics};

  if (space.kind == ParameterSpace::Kind::FiniteSet) {
    double best = kNegInf;
    std::vector<double> vals(space.points.size(), kNegInf);
    for (std::size_t i = 0; i < space.points.size(); ++i) {
      vals[i] = f(space.points[i]);
      best = std::max(best, vals[i]);
    }
    require(std::isfinite(best), Errc::NoFiniteValue,
            "metric has no finite value on the parameter set");
    double cut = best - cfg.tie_rel_tol * std::max(std::fabs(best), 1e-300);
    for (std::size_t i = 0; i < space.points.size(); ++i) {
      if (vals[i] >= cut) {
        out.points.push_back(space.points[i]);
        out.values.push_back(vals[i]);
      }
    }
    out.value = best;
    return out;
  }

  const Vec& lo = space.lower;
  const Vec& hi = space.upper;
  int n = space.dim();

  long per_axis = cfg.grid_per_axis;
  while (n > 0 && std::pow((double)per_axis, n) > (double)cfg.grid_total_cap &&
         per_axis > 2)
    --per_axis;
  long total = 1;
  for (int i = 0; i < n; ++i) total *= per_axis;
  out.diagnostics.grid_points = total;

  std::vector<ScoredPoint> tops;
  Vec p(n);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int k = 0; k < n; ++k) {
      long cell = rem % per_axis;
      rem /= per_axis;
      p[k] = lo[k] + (hi[k] - lo[k]) * ((double)cell + 0.5) / (double)per_axis;
    }
    double v = f(p);
    if (!std::isfinite(v)) continue;
    tops.push_back({p, v});
    std::push_heap(tops.begin(), tops.end(),
                   [](const ScoredPoint& a, const ScoredPoint& b) {
                     return a.v > b.v;
                   });
    if ((int)tops.size() > cfg.refine_top_k) {
      std::pop_heap(tops.begin(), tops.end(),
                    [](const ScoredPoint& a, const ScoredPoint& b) {
                      return a.v > b.v;
                    });
      tops.pop_back();
    }
  }
  require(!tops.empty(), Errc::NoFiniteValue,
          "metric has no finite value on the search grid");

  std::vector<ScoredPoint> refined;
  for (const auto& t : tops) {
    ScoredPoint r = nelder_mead(f, t.x, lo, hi, cfg);
    r = polish(f, r, lo, hi, cfg);
    refined.push_back(r);
    ++out.diagnostics.refinements;
  }
  std::sort(refined.begin(), refined.end(),
            [](const ScoredPoint& a, const ScoredPoint& b) { return a.v > b.v; });
  double best = refined[0].v;
  double cut = best - cfg.tie_rel_tol * std::max(std::fabs(best), 1e-300);
  for (const auto& r : refined) {
    if (r.v < cut) continue;
    bool dup = false;
    for (const auto& kept : out.points) {
      bool close = true;
      for (int k = 0; k < n; ++k)
        if (std::fabs(kept[k] - r.x[k]) >
            cfg.merge_radius * std::max(1e-300, hi[k] - lo[k])) {
          close = false;
          break;
        }
      if (close) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      out.points.push_back(r.x);
      out.values.push_back(r.v);
    }
  }
  out.value = best;
  for (const auto& pt : out.points)
    for (int k = 0; k < n; ++k) {
      double w = hi[k] - lo[k];
      if (pt[k] - lo[k] < 0.01 * w || hi[k] - pt[k] < 0.01 * w)
        out.diagnostics.boundary_maximum = true;
    }
  return out;
}

// ------------------------------------------------------- hessian and fisher

namespace {

double checked_loss(const Loss& loss, const EstimationProblem& prob,
                    const Vec& t1, const Vec& t2) {
  double v = loss(prob, t1, t2);
  require(std::isfinite(v), Errc::NonFiniteLoss,
          "loss evaluated to a non-finite value");
  return v;
}

SymMatrix hessian_once(const Loss& loss, const EstimationProblem& prob,
                       const Vec& theta, const Vec& h) {
  int n = (int)theta.size();
  SymMatrix out(n);
  double l0 = checked_loss(loss, prob, theta, theta);
  for (int i = 0; i < n; ++i) {
    Vec p = theta, q = theta;
    p[i] += h[i];
    q[i] -= h[i];
    double lp = checked_loss(loss, prob, p, theta);
    double lq = checked_loss(loss, prob, q, theta);
    out.set(i, i, (lp - 2.0 * l0 + lq) / (h[i] * h[i]));
    for (int j = i + 1; j < n; ++j) {
      Vec pp = theta, pm = theta, mp = theta, mm = theta;
      pp[i] += h[i];
      pp[j] += h[j];
      pm[i] += h[i];
      pm[j] -= h[j];
      mp[i] -= h[i];
      mp[j] += h[j];
      mm[i] -= h[i];
      mm[j] -= h[j];
      double v = (checked_loss(loss, prob, pp, theta) -
                  checked_loss(loss, prob, pm, theta) -
                  checked_loss(loss, prob, mp, theta) +
                  checked_loss(loss, prob, mm, theta)) /
                 (4.0 * h[i] * h[j]);
      out.set(i, j, v);
    }
  }
  return out;
}

}  // namespace

SymMatrix hessian_at_diagonal(const Loss& loss, const EstimationProblem& prob,
                              const Vec& theta, const HessianConfig& cfg) {
  require(loss.flags().smooth, Errc::PreconditionViolated,
          "hessian_at_diagonal needs a loss flagged smooth");
  require((int)theta.size() == prob.theta_dim(), Errc::DomainError,
          "theta dimension mismatch");
  int n = (int)theta.size();
  Vec h(n);
  for (int i = 0; i < n; ++i)
    h[i] = std::max(cfg.step_scale, cfg.step_scale * std::fabs(theta[i]));
  const ParameterSpace& sp = prob.theta_space();
  if (sp.kind == ParameterSpace::Kind::Box) {
    for (int i = 0; i < n; ++i) {
      double margin = std::min(theta[i] - sp.lower[i], sp.upper[i] - theta[i]);
      require(margin > 2.0 * h[i], Errc::BoundaryTooClose,
              "theta too close to the parameter boundary for the stencil");
    }
  }
  Loss tight = loss.with_quad(cfg.quad);
  SymMatrix coarse = hessian_once(tight, prob, theta, h);
  Vec h2(n);
  for (int i = 0; i < n; ++i) h2[i] = 0.5 * h[i];
  SymMatrix fine = hessian_once(tight, prob, theta, h2);
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      out.set(i, j, (4.0 * fine.at(i, j) - coarse.at(i, j)) / 3.0);
  return out;
}

namespace {

SymMatrix fisher_brute(const EstimationProblem& prob, const Vec& theta,
                       const FisherConfig& cfg) {
  const DataModel& m = prob.model();
  require(m.has_reduction(), Errc::UnsupportedClass,
          "no integration route for this observation space");
  const Reduction& red = m.reduction();
  int n = (int)theta.size();
  Vec h(n);
  for (int i = 0; i < n; ++i)
    h[i] = std::max(cfg.fd_step, cfg.fd_step * std::fabs(theta[i]));
  auto score = [&](int i, const Vec& u) {
    Vec p = theta, q = theta;
    p[i] += h[i];
    q[i] -= h[i];
    return (red.log_density(p, u) - red.log_density(q, u)) / (2.0 * h[i]);
  };
  SymMatrix out(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      auto integrand = [&](const Vec& u) {
        double w = red.weight(theta, u);
        if (w <= 0.0) return 0.0;
        return w * score(i, u) * score(j, u);
      };
      double v;
      if (red.finite) {
        v = 0.0;
        for (const auto& u : red.finite_points) v += integrand(u);
      } else {
        IntegralResult r =
            integrate_box(integrand, red.domain, cfg.quad, red.breakpoints);
        require(r.converged, Errc::IntegralNotConverged,
                "score-product integral did not converge");
        v = r.value;
      }
      out.set(i, j, v);
    }
  }
  return out;
}

SymMatrix fisher_mc(const EstimationProblem& prob, const Vec& theta,
                    const FisherConfig& cfg) {
  const DataModel& m = prob.model();
  require(m.can_sample(), Errc::UnsupportedClass,
          "model cannot be sampled for Monte Carlo information");
  int n = (int)theta.size();
  Vec h(n);
  for (int i = 0; i < n; ++i)
    h[i] = std::max(cfg.fd_step, cfg.fd_step * std::fabs(theta[i]));
  Rng rng(cfg.seed);
  std::vector<double> acc((std::size_t)n * n, 0.0);
  Vec x, s(n);
  for (long k = 0; k < cfg.mc_samples; ++k) {
    m.sample(theta, rng, x);
    for (int i = 0; i < n; ++i) {
      Vec p = theta, q = theta;
      p[i] += h[i];
      q[i] -= h[i];
      s[i] = (m.log_density(p, x) - m.log_density(q, x)) / (2.0 * h[i]);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) acc[(std::size_t)i * n + j] += s[i] * s[j];
  }
  SymMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      out.set(i, j, acc[(std::size_t)i * n + j] / (double)cfg.mc_samples);
  return out;
}

}  // namespace

SymMatrix fisher_information(const EstimationProblem& prob, const Vec& theta,
                             const FisherConfig& cfg) {
  require((int)theta.size() == prob.theta_dim(), Errc::DomainError,
          "theta dimension mismatch");
  prob.model().validate_theta(theta);
  switch (cfg.method) {
    case FisherMethod::Analytic:
      if (prob.model().has_analytic_fisher())
        return prob.model().analytic_fisher(theta);
      if (cfg.fallback_to_brute) return fisher_brute(prob, theta, cfg);
      fail(Errc::NoAnalyticForm,
           "no closed-form information matrix for this model");
    case FisherMethod::BruteForce:
      return fisher_brute(prob, theta, cfg);
    case FisherMethod::MonteCarlo:
      return fisher_mc(prob, theta, cfg);
  }
  fail(Errc::DomainError, "unknown information method");
}

}  // namespace eic
