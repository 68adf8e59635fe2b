#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "eic/risk.hpp"
#include "fixtures.hpp"

using namespace eic;

namespace {
constexpr double kPi = 3.14159265358979323846;
double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
}  // namespace

TEST_CASE("polynomial saturating curve") {
  RiskSpectrum s = RiskSpectrum::smooth_step();
  CHECK(s.T(0.0, 1.0) == 0.0);
  CHECK(s.T(0.5, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.T(1.0, 1.0) == 1.0);
  CHECK(s.T(7.0, 1.0) == 1.0);
  CHECK(s.attenuation(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(s.attenuation(0.25, 1.0) == doctest::Approx(0.84375).epsilon(1e-15));
  CHECK(s.attenuation(2.0, 1.0) == 0.0);
  // the limit parameter rescales the ramp
  CHECK(s.attenuation(0.5, 2.0) == doctest::Approx(0.84375).epsilon(1e-15));

  RiskSpectrum tall = RiskSpectrum::smooth_step(2.0);
  CHECK(tall.T(1.5, 1.0) == 2.0);
  CHECK(tall.attenuation(0.25, 1.0) == doctest::Approx(0.84375).epsilon(1e-15));
}

TEST_CASE("exponential saturating curve") {
  RiskSpectrum s = RiskSpectrum::exp_saturate();
  CHECK(s.T(0.0, 1.0) == 0.0);
  CHECK(s.T(1.0, 1.0) == 1.0);
  CHECK(s.T(0.5, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0 / 3.0)).epsilon(1e-14));
  CHECK(s.attenuation(0.5, 1.0) ==
        doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-14));
  double prev = 1.0;
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    double a = s.attenuation(t, 1.0);
    CHECK(a < prev);
    CHECK(a > 0.0);
    prev = a;
  }
}

TEST_CASE("custom curves are probed for shape") {
  RiskSpectrum lin = RiskSpectrum::custom(
      [](double t, double eps) { return std::min(1.0, t / eps); }, 1.0);
  CHECK(lin.attenuation(0.3, 1.0) == doctest::Approx(0.7).epsilon(1e-14));

  auto decreasing = [](double t, double eps) {
    return t >= eps ? 1.0 : 1.0 - t / eps;
  };
  CHECK_THROWS_AS(RiskSpectrum::custom(decreasing, 1.0), Error);

  auto flat_at_ceiling = [](double, double) { return 1.0; };
  try {
    RiskSpectrum::custom(flat_at_ceiling, 1.0);
    FAIL("expected a spectrum error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidSpectrum);
  }
}

TEST_CASE("expected utility on the two-point device is an exact sum") {
  EstimationProblem tp = fx::table_two_point();
  Loss q = Loss::quadratic();
  RiskSpectrum s = RiskSpectrum::smooth_step();

  UtilityResult u = expected_utility(tp, q, s, 0.5, {1.0}, {1.0});
  CHECK(u.value == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(u.quad_error == 0.0);
  CHECK(u.stable);
  CHECK(expected_utility(tp, q, s, 0.5, {2.0}, {1.0}).value ==
        doctest::Approx(0.1).epsilon(1e-14));

  // at eps = 2 the wrong parameter is only half-attenuated
  CHECK(expected_utility(tp, q, s, 2.0, {1.0}, {1.0}).value ==
        doctest::Approx(0.95).epsilon(1e-14));
  CHECK(expected_utility(tp, q, s, 2.0, {2.0}, {1.0}).value ==
        doctest::Approx(0.55).epsilon(1e-14));
}

TEST_CASE("expected utility on a box matches direct quadrature") {
  EstimationProblem gp = fx::gauss();
  Loss q = Loss::quadratic();
  RiskSpectrum s = RiskSpectrum::smooth_step();
  const double x = 0.3, eps = 0.25, hat = 0.5;

  UtilityResult u = expected_utility(gp, q, s, eps, {hat}, {x});
  CHECK(u.stable);

  // independent route: truncated-normal posterior in closed form
  double z = normal_cdf(2.0 - x) - normal_cdf(-2.0 - x);
  auto f = [&](double th) {
    double d = (th - hat) * (th - hat);
    return phi(th - x) / z * s.attenuation(d, eps);
  };
  double r = std::sqrt(eps);
  IntegralResult direct = integrate_1d(
      f, std::max(-2.0, hat - r), std::min(2.0, hat + r),
      QuadSpec{1e-12, 0.0, 4000, 8}, {hat});
  CHECK(u.value == doctest::Approx(direct.value).epsilon(1e-6));
}

TEST_CASE("utility ratios approach the posterior-over-curvature ratio") {
  EstimationProblem gp = fx::gauss();
  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  RiskSpectrum s = RiskSpectrum::smooth_step();
  RatioCurve c = utility_ratio_curve(gp, h2, s, {0.3}, {0.7}, {0.0});

  CHECK(c.predicted_limit == doctest::Approx(std::exp(0.2)).epsilon(1e-4));
  REQUIRE(c.points.size() == 5);
  CHECK(c.points.front().eps == 1.0);
  CHECK(c.points.back().eps == 1e-4);
  for (std::size_t i = 1; i < c.points.size(); ++i)
    CHECK(c.points[i].eps < c.points[i - 1].eps);
  CHECK(c.eps_min_stable > 0.0);
  CHECK(c.ratio_at_min_stable ==
        doctest::Approx(std::exp(0.2)).epsilon(0.02));

  // the gap shrinks along the tail of the curve
  std::vector<double> gaps;
  for (const auto& pt : c.points)
    if (pt.stable) gaps.push_back(std::fabs(pt.ratio - c.predicted_limit));
  REQUIRE(gaps.size() >= 3);
  for (std::size_t i = gaps.size() - 2; i < gaps.size(); ++i)
    CHECK(gaps[i] < gaps[i - 1]);
}

TEST_CASE("tail comparison separates dominated candidates") {
  EstimationProblem gp = fx::gauss();
  Loss q = Loss::quadratic();
  RiskSpectrum s = RiskSpectrum::smooth_step();
  std::vector<Vec> cands{{0.2}, {0.9}, {1.6}};
  InferiorityReport rep = ei_inferiority_report(gp, q, s, cands, {0.2});

  REQUIRE(rep.inferior.size() == 3);
  CHECK_FALSE(rep.inferior[0]);
  CHECK(rep.inferior[1]);
  CHECK(rep.inferior[2]);
  CHECK(rep.maximal[0]);
  CHECK_FALSE(rep.maximal[1]);
  CHECK_FALSE(rep.maximal[2]);
  REQUIRE(rep.utilities.size() == rep.eps_grid.size());
  CHECK(rep.utilities[0][0] > rep.utilities[0][1]);
  CHECK(rep.utilities[0][1] > rep.utilities[0][2]);

  CHECK_THROWS_AS(ei_inferiority_report(gp, q, s, {{0.2}}, {0.2}), Error);
}

TEST_CASE("grid of error limits") {
  std::vector<double> g = default_eps_grid();
  REQUIRE(g.size() == 5);
  CHECK(g[0] == 1.0);
  CHECK(g[4] == 1e-4);
}
