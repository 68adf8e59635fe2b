#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>

#include "eic/axioms.hpp"
#include "fixtures.hpp"

using namespace eic;

namespace {

// per-axiom verdict summary of a battery run
struct AxiomSummary {
  bool any_fail = false;
  bool all_pass = true;
};

std::map<std::string, AxiomSummary> summarise(
    const std::vector<AxiomAuditRow>& rows) {
  std::map<std::string, AxiomSummary> out;
  for (const auto& r : rows) {
    AxiomSummary& s = out[r.axiom];
    if (r.verdict == Verdict::Fail) s.any_fail = true;
    if (r.verdict != Verdict::Pass) s.all_pass = false;
  }
  return out;
}

}  // namespace

TEST_CASE("parameter transform algebra") {
  ParamTransform a = ParamTransform::affine({2.0}, {1.0});
  CHECK(a.fwd({0.5})[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(a.inv({2.0})[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a.jac_det_fwd({0.5}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(a.applicable(ParameterSpace::box({-1.0}, {1.0})));

  ParamTransform c = ParamTransform::cube_plus_linear();
  for (double t : {-1.8, -0.3, 0.0, 0.7, 1.9}) {
    Vec y = c.fwd({t});
    CHECK(y[0] == doctest::Approx(t * t * t + t).epsilon(1e-15));
    CHECK(c.inv(y)[0] == doctest::Approx(t).epsilon(1e-12));
    CHECK(c.jac_det_fwd({t}) == doctest::Approx(3.0 * t * t + 1.0).epsilon(1e-14));
  }

  ParamTransform r = ParamTransform::cube_root();
  CHECK(r.applicable(ParameterSpace::box({0.1}, {1.0})));
  CHECK_FALSE(r.applicable(ParameterSpace::box({-1.0}, {1.0})));
  CHECK(r.fwd({8.0})[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("observation transform algebra") {
  ObsTransform a = ObsTransform::affine(2.0, 1.0);
  CHECK(a.fwd({0.5})[0] == doctest::Approx(2.0));
  CHECK(a.inv({2.0})[0] == doctest::Approx(0.5));
  CHECK(a.jac_det_inv({2.0}) == doctest::Approx(0.5));

  ObsTransform p3 = ObsTransform::power3();
  CHECK(p3.fwd({2.0})[0] == doctest::Approx(8.0));
  CHECK(p3.inv({8.0})[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p3.inv({-8.0})[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(p3.jac_det_inv({8.0}) ==
        doctest::Approx(std::pow(8.0, -2.0 / 3.0) / 3.0).epsilon(1e-13));
  REQUIRE(p3.breakpoints_y.size() == 1);
  CHECK(p3.breakpoints_y[0] == 0.0);

  ObsTransform pw = ObsTransform::piecewise_affine();
  CHECK(pw.fwd({-1.0})[0] == doctest::Approx(-1.0));
  CHECK(pw.fwd({1.0})[0] == doctest::Approx(2.0));
  CHECK(pw.inv({2.0})[0] == doctest::Approx(1.0));
  CHECK(pw.inv({-1.0})[0] == doctest::Approx(-1.0));

  ObsTransform cm = ObsTransform::cdf_map();
  CHECK(cm.continuous_only);
  CHECK(cm.fwd({0.0})[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(cm.inv({0.5})[0] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("remapped parameter spaces carry the jacobian into the prior") {
  EstimationProblem gp = fx::gauss();
  ParamTransform t = ParamTransform::affine({2.0}, {1.0});
  EstimationProblem pt = transform_parameters(gp, t);

  CHECK(pt.theta_space().lower[0] == doctest::Approx(-3.0));
  CHECK(pt.theta_space().upper[0] == doctest::Approx(5.0));
  // uniform 1/4 on the source box becomes 1/8 on the doubled box
  CHECK(prior_density(pt, {1.0}) == doctest::Approx(0.125).epsilon(1e-12));

  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  double orig = h2(gp, {0.3}, {0.7});
  double moved = h2(pt, t.fwd({0.3}), t.fwd({0.7}));
  CHECK(moved == doctest::Approx(orig).epsilon(1e-12));
}

TEST_CASE("relabelled observations keep distribution-based losses fixed") {
  EstimationProblem gp = fx::gauss();
  ObsTransform t = ObsTransform::affine(2.0, 1.0);
  EstimationProblem pt = transform_observations(gp, t);

  // density transforms by change of variables and still has unit mass
  double fy = pt.model().density({0.3}, {1.5});
  double fx = gp.model().density({0.3}, {0.25});
  CHECK(fy == doctest::Approx(0.5 * fx).epsilon(1e-13));
  auto dens = [&](double y) { return pt.model().density({0.3}, {y}); };
  IntegralResult mass = integrate_1d(dens, -kInf, kInf);
  CHECK(mass.value == doctest::Approx(1.0).epsilon(1e-8));

  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  CHECK(h2(pt, {0.3}, {0.7}) ==
        doctest::Approx(h2(gp, {0.3}, {0.7})).epsilon(1e-14));

  // the density-gap pseudo-loss picks up the squared jacobian instead
  Loss gap = Loss::no_iro();
  double ratio = gap(pt, {0.3}, {0.7}) / gap(gp, {0.3}, {0.7});
  CHECK(ratio == doctest::Approx(0.25).epsilon(1e-7));
}

TEST_CASE("appended noise coordinates") {
  EstimationProblem bp = fx::bern();
  EstimationProblem ph = augment_with_noise(bp, NoiseKind::BernoulliHalf);
  CHECK(ph.model().obs_space().points.size() == 4);
  CHECK(ph.model().density({0.8}, {1.0, 0.0}) == doctest::Approx(0.4));
  CHECK(ph.model().density({0.8}, {1.0, 1.0}) == doctest::Approx(0.4));

  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  CHECK(h2(ph, {0.8}, {0.5}) == doctest::Approx(fx::kBernH2).epsilon(1e-12));
  Loss gap = Loss::no_isi();
  CHECK(gap(ph, {0.8}, {0.5}) ==
        doctest::Approx(0.25 * fx::kBernGap).epsilon(1e-12));

  EstimationProblem pd = augment_with_noise(bp, NoiseKind::Degenerate);
  CHECK(gap(pd, {0.8}, {0.5}) == doctest::Approx(fx::kBernGap).epsilon(1e-12));

  EstimationProblem gp = fx::gauss();
  EstimationProblem pu = augment_with_noise(gp, NoiseKind::Uniform01);
  CHECK(pu.model().density({0.3}, {0.25, 0.5}) ==
        doctest::Approx(gp.model().density({0.3}, {0.25})).epsilon(1e-13));
  CHECK(h2(pu, {0.3}, {0.7}) ==
        doctest::Approx(h2(gp, {0.3}, {0.7})).epsilon(1e-13));
}

TEST_CASE("single checks report deviations and ratios") {
  EstimationProblem bp = fx::bern();
  ThetaPairs pairs{{{0.8}, {0.5}}, {{0.3}, {0.6}}};

  // scaling the parameter axis scales a squared distance by 2.25
  CheckResult r = check_irp(Loss::quadratic(), bp,
                            ParamTransform::affine({1.5}, {0.25}), pairs);
  CHECK(r.verdict == Verdict::Fail);
  REQUIRE(r.per_pair.size() == 2);
  CHECK(r.ratio_min == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(r.ratio_max == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(r.max_rel_dev == doctest::Approx(1.25).epsilon(1e-12));

  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  r = check_irp(h2, bp, ParamTransform::cube_plus_linear(), pairs);
  CHECK(r.verdict == Verdict::Pass);

  r = check_iro(h2, bp, ObsTransform::power3(), pairs);
  CHECK(r.verdict == Verdict::Pass);

  r = check_isi(Loss::no_isi(), bp, NoiseKind::BernoulliHalf, pairs);
  CHECK(r.verdict == Verdict::Fail);
  CHECK(r.ratio_min == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.ratio_max == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("prior-change check needs an honest partner") {
  EstimationProblem bp = fx::bern();
  ThetaPairs pairs{{{0.3}, {0.7}}};
  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);

  EstimationProblem partner = iia_partner_problem(bp, {0.3}, {0.7});
  CHECK(prior_density(partner, {0.3}) ==
        doctest::Approx(prior_density(bp, {0.3})).epsilon(1e-9));
  CHECK(prior_density(partner, {0.7}) ==
        doctest::Approx(prior_density(bp, {0.7})).epsilon(1e-9));
  // 0.5 is the tilt's third root on this symmetric box, so probe off-centre
  CHECK(prior_density(partner, {0.4}) !=
        doctest::Approx(prior_density(bp, {0.4})).epsilon(1e-3));

  CheckResult r = check_iia(h2, bp, partner, pairs);
  CHECK(r.verdict == Verdict::Pass);  // divergences never see the prior

  // a partner that disagrees at the checked parameters is rejected
  EstimationProblem bad(ParameterSpace::box({0.05}, {0.95}),
                        DataModel::bernoulli(), Prior::beta(2.0, 2.0),
                        ValidationLevel::Light);
  try {
    check_iia(h2, bp, bad, pairs);
    FAIL("expected a precondition error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::PreconditionViolated);
  }
}

TEST_CASE("seeded parameter pairs are reproducible and interior") {
  EstimationProblem mp = fx::gms(5);
  ThetaPairs a = seeded_theta_pairs(mp, 6, 41);
  ThetaPairs b = seeded_theta_pairs(mp, 6, 41);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second == b[i].second);
    CHECK(mp.theta_space().contains(a[i].first));
    CHECK(mp.theta_space().contains(a[i].second));
    CHECK(a[i].first != a[i].second);
  }
  ThetaPairs c = seeded_theta_pairs(mp, 6, 42);
  CHECK(c[0].first != a[0].first);
}

TEST_CASE("ratio quantiles on finite observation spaces are exact") {
  EstimationProblem nb(ParameterSpace::box({0.05}, {0.95}),
                       DataModel::binomial(3), Prior::uniform_box());
  CFunction c = c_function(nb, {0.7}, {0.4});
  CHECK(c.discrete());
  REQUIRE(c.steps().size() == 4);
  CHECK(c.steps()[0].first == doctest::Approx(0.216).epsilon(1e-12));
  CHECK(c.steps()[0].second == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(c(0.125) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(c(0.5) == doctest::Approx(0.4375).epsilon(1e-12));
  CHECK(c(0.8) == doctest::Approx(1.53125).epsilon(1e-12));
  CHECK(c(1.0) == doctest::Approx(5.359375).epsilon(1e-12));
  CHECK(c.integral01() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ratio quantiles on a continuum via seeded samples") {
  EstimationProblem gp = fx::gauss();
  CFunction c = c_function(gp, {0.3}, {0.0}, 100000, 7);
  CHECK_FALSE(c.discrete());
  // r(x) = exp(0.3 x - 0.045); its t-quantile under N(0,1) in closed form
  for (double t : {0.2, 0.5, 0.8}) {
    double want = std::exp(0.3 * normal_quantile(t) - 0.045);
    CHECK(c(t) == doctest::Approx(want).epsilon(0.01));
  }
  CHECK(c.integral01() == doctest::Approx(1.0).epsilon(0.02));
  CFunction c2 = c_function(gp, {0.3}, {0.0}, 100000, 7);
  CHECK(c(0.3) == c2(0.3));
}

TEST_CASE("monotone rearrangement carries the same divergences") {
  struct Case {
    double dmu, sigma, h2;
  };
  // closed form: 1 - exp(-dmu^2 / (8 sigma^2))
  Case cases[] = {{0.8, 1.0, 0.07688365361336424},
                  {1.3, 1.5, 0.08961608961085765},
                  {0.5, 0.7, 0.06178440428089227}};
  Generator gh2 = builtin_generator(BuiltinGenerator::Hellinger2);
  Generator gkl = builtin_generator(BuiltinGenerator::KL);
  for (const Case& cs : cases) {
    EstimationProblem gp = fx::gauss(cs.sigma, -8.0, 8.0);
    Rearrangement1D r = canonical_rearrangement_1d(gp, {cs.dmu}, {0.0});
    REQUIRE(r.values.size() > 0);
    for (std::size_t i = 1; i < r.values.size(); ++i)
      CHECK(r.values[i] >= r.values[i - 1]);
    double mass = 0.0;
    for (double v : r.values) mass += v * r.delta;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

    CHECK(f_divergence_of_rearrangement(gh2, r) ==
          doctest::Approx(cs.h2).epsilon(1e-3));
    double kl_closed = cs.dmu * cs.dmu / (2.0 * cs.sigma * cs.sigma);
    CHECK(f_divergence_of_rearrangement(gkl, r) ==
          doctest::Approx(kl_closed).epsilon(1e-3));
  }

  EstimationProblem gp = fx::gauss();
  Rearrangement1D r = canonical_rearrangement_1d(gp, {0.8}, {0.0}, 64);
  CHECK(r.p_density(0.5) == r.values[32]);
}

TEST_CASE("battery flags each designed violation and nothing else") {
  BatteryConfig cfg;
  EstimationProblem bp = fx::bern();
  EstimationProblem gp = fx::gauss();

  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  auto s = summarise(axiom_battery(h2, bp, nullptr, cfg));
  for (const char* ax : {"IRP", "IRO", "IIA", "ISI"}) {
    CHECK(s.count(ax) == 1);
    CHECK(s[ax].all_pass);
  }
  s = summarise(axiom_battery(h2, gp, nullptr, cfg));
  for (const char* ax : {"IRP", "IRO", "IIA", "ISI"}) CHECK(s[ax].all_pass);

  s = summarise(axiom_battery(Loss::quadratic(), bp, nullptr, cfg));
  CHECK(s["IRP"].any_fail);
  CHECK(s["IRO"].all_pass);
  CHECK(s["IIA"].all_pass);
  CHECK(s["ISI"].all_pass);

  s = summarise(axiom_battery(Loss::no_iro(), gp, nullptr, cfg));
  CHECK(s["IRO"].any_fail);
  CHECK(s["IRP"].all_pass);
  CHECK(s["IIA"].all_pass);
  CHECK(s["ISI"].all_pass);

  auto rows = axiom_battery(Loss::no_isi(), bp, nullptr, cfg);
  s = summarise(rows);
  CHECK(s["ISI"].any_fail);
  CHECK(s["IRP"].all_pass);
  CHECK(s["IRO"].all_pass);
  CHECK(s["IIA"].all_pass);
  bool saw_half = false;
  for (const auto& r : rows) {
    if (r.axiom == "ISI" && r.item == "bernoulli_half") {
      saw_half = true;
      CHECK(r.verdict == Verdict::Fail);
      CHECK(r.ratio_min == doctest::Approx(0.25).epsilon(1e-9));
      CHECK(r.ratio_max == doctest::Approx(0.25).epsilon(1e-9));
    }
    if (r.axiom == "ISI" && r.item == "degenerate")
      CHECK(r.verdict == Verdict::Pass);
  }
  CHECK(saw_half);

  Loss niia = Loss::no_iia(h2, h2, 0.05, 512, 17);
  s = summarise(axiom_battery(niia, bp, nullptr, cfg));
  CHECK(s["IIA"].any_fail);
  CHECK(s["IRP"].all_pass);
  CHECK(s["IRO"].all_pass);
  CHECK(s["ISI"].all_pass);
}

TEST_CASE("battery adapts its rows to the problem shape") {
  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  EstimationProblem mp = fx::gms(5);
  auto rows = axiom_battery(h2, mp, nullptr);

  std::set<std::string> axioms;
  int iro_rows = 0;
  for (const auto& r : rows) {
    axioms.insert(r.axiom);
    if (r.axiom == "IRO") ++iro_rows;
    CHECK(r.verdict == Verdict::Pass);
  }
  // no scalar-box partner construction in two dimensions
  CHECK(axioms.count("IIA") == 0);
  CHECK(axioms.count("IRP") == 1);
  CHECK(axioms.count("ISI") == 1);
  // multi-dimensional observations only admit the affine relabelling
  CHECK(iro_rows == 1);

  EstimationProblem bp = fx::bern();
  rows = axiom_battery(h2, bp, nullptr);
  int irp_rows = 0;
  bool saw_cdf = false;
  for (const auto& r : rows) {
    if (r.axiom == "IRP") ++irp_rows;
    if (r.item == "obs_cdf_map") saw_cdf = true;
  }
  // positive scalar box: affine, cube_plus_linear and cube_root all apply
  CHECK(irp_rows == 3);
  CHECK_FALSE(saw_cdf);  // cdf relabelling is for continuous observations

  EstimationProblem gp = fx::gauss();
  rows = axiom_battery(h2, gp, nullptr);
  saw_cdf = false;
  for (const auto& r : rows)
    if (r.item == "obs_cdf_map") saw_cdf = true;
  CHECK(saw_cdf);
}
