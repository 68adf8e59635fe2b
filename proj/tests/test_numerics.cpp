#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "eic/losses.hpp"
#include "eic/model.hpp"
#include "eic/numerics.hpp"
#include "fixtures.hpp"

using namespace eic;

namespace {
constexpr double kPi = 3.14159265358979323846;
double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
}  // namespace

TEST_CASE("adaptive quadrature on finite intervals") {
  auto r = integrate_1d([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // kink at zero, seeded as a breakpoint
  r = integrate_1d([](double x) { return std::fabs(x); }, -1.0, 1.0, {}, {0.0});
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));

  // narrow spike, seeded so the refinement starts at its center
  const double s = 0.02;
  r = integrate_1d([&](double x) { return phi((x - 3.0) / s) / s; }, -10.0,
                   10.0, {}, {3.0});
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("quadrature over infinite and half-infinite axes") {
  auto r = integrate_1d([](double x) { return phi(x); }, -kInf, kInf);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));

  r = integrate_1d([](double x) { return std::exp(-x); }, 0.0, kInf);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-10));

  r = integrate_1d([](double x) { return x * x * phi(x); }, -kInf, kInf);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("quadrature reports non-convergence instead of lying") {
  QuadSpec tight{1e-16, 0.0, 9, 8};  // one refinement available, absurd target
  auto r = integrate_1d([](double x) { return std::sqrt(std::fabs(x - 0.3)); },
                        0.0, 1.0, tight);
  CHECK_FALSE(r.converged);
}

TEST_CASE("box quadrature in up to three dimensions") {
  IntegBox unit{{0.0, 0.0}, {1.0, 1.0}};
  auto r = integrate_box([](const Vec& v) { return v[0] * v[1]; }, unit);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(0.25).epsilon(1e-10));

  IntegBox plane{{-kInf, -kInf}, {kInf, kInf}};
  r = integrate_box([](const Vec& v) { return phi(v[0]) * phi(v[1]); }, plane);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-8));

  IntegBox cube{{0.0, 0.0, 0.0}, {2.0, 2.0, 2.0}};
  r = integrate_box([](const Vec&) { return 1.0; }, cube);
  CHECK(r.value == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("seeded monte carlo is reproducible") {
  auto sampler = [](Rng& rng, Vec& out) { out.assign(1, rng.uniform01()); };
  auto f = [](const Vec& v) { return v[0]; };
  McResult a = integrate_mc(f, sampler, 20000, 7);
  McResult b = integrate_mc(f, sampler, 20000, 7);
  CHECK(a.mean == b.mean);  // bitwise
  CHECK(a.mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(a.std_error > 0.0);
  McResult c = integrate_mc(f, sampler, 20000, 8);
  CHECK(a.mean != c.mean);
}

TEST_CASE("symmetric matrix determinant, definiteness, inverse") {
  SymMatrix m(2);
  m.set(0, 0, 2.0);
  m.set(0, 1, 1.0);
  m.set(1, 1, 2.0);
  CHECK(m.det() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(m.positive_definite());
  SymMatrix inv = m.inverse();
  CHECK(inv.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  CHECK(inv.at(0, 1) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
  CHECK(m.scaled(2.0).det() == doctest::Approx(12.0).epsilon(1e-13));
  CHECK(m.inf_norm() == doctest::Approx(3.0));

  SymMatrix ind(2);
  ind.set(0, 0, 1.0);
  ind.set(0, 1, 2.0);
  ind.set(1, 1, 1.0);
  CHECK(ind.det() == doctest::Approx(-3.0).epsilon(1e-14));
  CHECK_FALSE(ind.positive_definite());

  CHECK(SymMatrix::identity(3, 5.0).det() == doctest::Approx(125.0));
  CHECK(rel_deviation(SymMatrix::identity(2, 1.01), SymMatrix::identity(2)) ==
        doctest::Approx(0.01).epsilon(1e-10));
}

TEST_CASE("argmax on finite parameter sets") {
  ParameterSpace pts = ParameterSpace::finite({{0.0}, {1.0}, {2.0}, {3.0}});
  auto metric = [](const Vec& t) { return -(t[0] - 2.0) * (t[0] - 2.0); };
  EstimateSet e = argmax(metric, pts);
  REQUIRE(e.points.size() == 1);
  CHECK(e.points[0][0] == 2.0);
  CHECK(e.value == 0.0);

  // symmetric pair: both maximisers are reported
  ParameterSpace two = ParameterSpace::finite({{1.0}, {3.0}});
  e = argmax(metric, two);
  CHECK(e.points.size() == 2);
  CHECK(e.values[0] == e.values[1]);
}

TEST_CASE("argmax on boxes refines to the interior peak") {
  ParameterSpace box = ParameterSpace::box({0.0}, {1.0});
  auto metric = [](const Vec& t) { return -(t[0] - 0.3) * (t[0] - 0.3); };
  EstimateSet e = argmax(metric, box);
  REQUIRE(e.points.size() == 1);
  CHECK(e.points[0][0] == doctest::Approx(0.3).epsilon(1e-8));
  CHECK_FALSE(e.diagnostics.boundary_maximum);

  ParameterSpace sq = ParameterSpace::box({-1.0, -1.0}, {1.0, 1.0});
  auto metric2 = [](const Vec& t) {
    double a = t[0] - 0.2, b = t[1] + 0.7;
    return -(a * a + 2.0 * b * b);
  };
  e = argmax(metric2, sq);
  REQUIRE(e.points.size() == 1);
  CHECK(e.points[0][0] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(e.points[0][1] == doctest::Approx(-0.7).epsilon(1e-6));
}

TEST_CASE("argmax flags boundary maxima and excluded points") {
  ParameterSpace box = ParameterSpace::box({0.0}, {1.0});
  EstimateSet e = argmax([](const Vec& t) { return t[0]; }, box);
  CHECK(e.diagnostics.boundary_maximum);
  CHECK(e.points[0][0] == doctest::Approx(1.0).epsilon(1e-9));

  auto holey = [](const Vec& t) {
    if (t[0] < 0.5) return std::nan("");
    return -(t[0] - 0.7) * (t[0] - 0.7);
  };
  e = argmax(holey, box);
  CHECK(e.points[0][0] == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(e.diagnostics.excluded_points > 0);

  auto allnan = [](const Vec&) { return std::nan(""); };
  CHECK_THROWS_AS(argmax(allnan, box), Error);
  try {
    argmax(allnan, box);
  } catch (const Error& err) {
    CHECK(err.code() == Errc::NoFiniteValue);
  }
}

TEST_CASE("hessian at the diagonal recovers closed-form curvature") {
  LossFlags fl;
  fl.smooth = true;

  Loss l1 = Loss::custom("3sq", fl, [](const EstimationProblem&, const Vec& a,
                                       const Vec& b) {
    double d = a[0] - b[0];
    return 3.0 * d * d;
  });
  EstimationProblem gp = fx::gauss();
  SymMatrix h = hessian_at_diagonal(l1, gp, {0.4});
  CHECK(h.at(0, 0) == doctest::Approx(6.0).epsilon(1e-7));

  Loss l2 = Loss::custom("aniso", fl, [](const EstimationProblem&, const Vec& a,
                                         const Vec& b) {
    double u = a[0] - b[0], v = a[1] - b[1];
    return 2.0 * u * u + 0.5 * v * v + 0.6 * u * v;
  });
  EstimationProblem mp = fx::gms();
  SymMatrix h2 = hessian_at_diagonal(l2, mp, {0.5, 1.2});
  CHECK(h2.at(0, 0) == doctest::Approx(4.0).epsilon(1e-7));
  CHECK(h2.at(1, 1) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(h2.at(0, 1) == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("hessian refuses stencils that cross the boundary") {
  EstimationProblem bp = fx::bern();
  try {
    hessian_at_diagonal(Loss::f_divergence(BuiltinGenerator::Hellinger2), bp,
                        {0.9499});
    FAIL("expected a boundary error");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::BoundaryTooClose);
  }
}

TEST_CASE("information matrix closed forms") {
  EstimationProblem bp = fx::bern();
  SymMatrix i = fisher_information(bp, {0.3});
  CHECK(i.at(0, 0) == doctest::Approx(1.0 / (0.3 * 0.7)).epsilon(1e-12));

  EstimationProblem gp = fx::gauss(2.0);
  CHECK(fisher_information(gp, {0.5}).at(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-12));

  EstimationProblem ep = fx::expo();
  CHECK(fisher_information(ep, {0.5}).at(0, 0) ==
        doctest::Approx(4.0).epsilon(1e-12));

  EstimationProblem nb = fx::binom(10);
  CHECK(fisher_information(nb, {0.25}).at(0, 0) ==
        doctest::Approx(10.0 / (0.25 * 0.75)).epsilon(1e-12));

  EstimationProblem mp = fx::gms(5);
  SymMatrix im = fisher_information(mp, {0.7, 1.3});
  CHECK(im.at(0, 0) == doctest::Approx(5.0 / (1.3 * 1.3)).epsilon(1e-12));
  CHECK(im.at(1, 1) == doctest::Approx(10.0 / (1.3 * 1.3)).epsilon(1e-12));
  CHECK(im.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("brute-force and sampled information agree with the closed form") {
  FisherConfig brute;
  brute.method = FisherMethod::BruteForce;
  EstimationProblem bp = fx::bern();
  CHECK(fisher_information(bp, {0.3}, brute).at(0, 0) ==
        doctest::Approx(1.0 / 0.21).epsilon(1e-6));

  EstimationProblem gp = fx::gauss();
  CHECK(fisher_information(gp, {0.2}, brute).at(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-6));

  FisherConfig mc;
  mc.method = FisherMethod::MonteCarlo;
  mc.mc_samples = 200000;
  mc.seed = 11;
  CHECK(fisher_information(gp, {0.2}, mc).at(0, 0) ==
        doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("random source determinism and distribution sanity") {
  Rng a(123), b(123);
  for (int i = 0; i < 16; ++i) {
    double u = a.uniform01();
    CHECK(u == b.uniform01());
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }

  for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));

  Rng r(5);
  std::vector<double> w{1.0, 2.0, 7.0};
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 20000; ++i) ++counts[r.categorical(w)];
  CHECK(counts[0] / 20000.0 == doctest::Approx(0.1).epsilon(0.15));
  CHECK(counts[2] / 20000.0 == doctest::Approx(0.7).epsilon(0.05));

  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) sum += r.exponential(2.0);
  CHECK(sum / 20000.0 == doctest::Approx(0.5).epsilon(0.05));

  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double z = r.normal();
    m1 += z;
    m2 += z * z;
  }
  CHECK(m1 / 20000.0 == doctest::Approx(0.0).epsilon(0.05));
  CHECK(std::fabs(m1) / 20000.0 < 0.03);
  CHECK(m2 / 20000.0 == doctest::Approx(1.0).epsilon(0.05));
}
