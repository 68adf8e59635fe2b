#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "eic/losses.hpp"
#include "fixtures.hpp"

using namespace eic;

// Closed forms behind the frozen constants, for the record:
//   Bernoulli sums are exact two-term expressions.
//   Equal-sigma gaussians:  H^2 = 1 - exp(-d^2/(8 s^2)),  KL = d^2/(2 s^2),
//   chi^2 = exp(d^2/s^2) - 1.
//   Exponentials: H^2 = 1 - 2 sqrt(l1 l2)/(l1+l2), KL = ln(l1/l2) + l2/l1 - 1,
//   chi^2 = l1^2/(l2 (2 l1 - l2)) - 1 when 2 l1 > l2, divergent otherwise.

TEST_CASE("generator metadata") {
  Generator h2 = builtin_generator(BuiltinGenerator::Hellinger2);
  Generator kl = builtin_generator(BuiltinGenerator::KL);
  Generator ch = builtin_generator(BuiltinGenerator::ChiSquared);
  CHECK(h2.second_at_one == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(kl.second_at_one == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ch.second_at_one == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(h2.problem_continuous);
  CHECK_FALSE(kl.problem_continuous);
  CHECK_FALSE(ch.problem_continuous);
  CHECK(h2.F(1.0) == doctest::Approx(0.0));
  CHECK(h2.d2F(1.0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("divergences on exact finite sums") {
  EstimationProblem bp = fx::bern();
  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  Loss kl = Loss::f_divergence(BuiltinGenerator::KL);
  Loss ch = Loss::f_divergence(BuiltinGenerator::ChiSquared);
  Vec a{0.8}, b{0.5};
  CHECK(h2(bp, a, b) == doctest::Approx(fx::kBernH2).epsilon(1e-12));
  CHECK(kl(bp, a, b) == doctest::Approx(fx::kBernKL).epsilon(1e-12));
  CHECK(ch(bp, a, b) == doctest::Approx(fx::kBernChi2).epsilon(1e-12));
  CHECK(Loss::bhattacharyya()(bp, a, b) ==
        doctest::Approx(fx::kBernBhat).epsilon(1e-12));

  EstimationProblem nb = fx::binom(10);
  Vec c{0.7}, d{0.4};
  CHECK(h2(nb, c, d) == doctest::Approx(fx::kBin10H2).epsilon(1e-12));
  CHECK(kl(nb, c, d) == doctest::Approx(fx::kBin10KL).epsilon(1e-12));
  CHECK(ch(nb, c, d) == doctest::Approx(fx::kBin10Chi2).epsilon(1e-12));

  EstimationProblem tp = fx::table_two_point();
  CHECK(h2(tp, {1.0}, {2.0}) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(kl(tp, {1.0}, {2.0}) ==
        doctest::Approx(0.8 * std::log(9.0)).epsilon(1e-14));
}

TEST_CASE("divergences through scalar quadrature") {
  EstimationProblem gp = fx::gauss();
  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  Loss kl = Loss::f_divergence(BuiltinGenerator::KL);
  Loss ch = Loss::f_divergence(BuiltinGenerator::ChiSquared);
  CHECK(h2(gp, {1.0}, {0.0}) == doctest::Approx(fx::kGaussH2_d1s1).epsilon(1e-8));
  CHECK(kl(gp, {1.0}, {0.0}) == doctest::Approx(fx::kGaussKL_d1s1).epsilon(1e-8));
  CHECK(ch(gp, {1.0}, {0.0}) == doctest::Approx(fx::kGaussChi2_d1s1).epsilon(1e-7));
  CHECK(Loss::bhattacharyya()(gp, {1.0}, {0.0}) ==
        doctest::Approx(fx::kGaussBhat_d1s1).epsilon(1e-8));

  EstimationProblem gp15 = fx::gauss(1.5);
  CHECK(h2(gp15, {0.3}, {-0.4}) ==
        doctest::Approx(fx::kGaussH2_d07s15).epsilon(1e-8));
  CHECK(kl(gp15, {0.3}, {-0.4}) ==
        doctest::Approx(fx::kGaussKL_d07s15).epsilon(1e-8));

  EstimationProblem ep = fx::expo();
  CHECK(h2(ep, {1.0}, {2.5}) == doctest::Approx(fx::kExpoH2).epsilon(1e-8));
  CHECK(kl(ep, {1.0}, {2.5}) == doctest::Approx(fx::kExpoKL).epsilon(1e-8));
  CHECK(ch(ep, {1.0}, {1.5}) == doctest::Approx(fx::kExpoChi2).epsilon(1e-7));
}

TEST_CASE("divergences through the joint-sample reduction") {
  EstimationProblem mp = fx::gms(5);
  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  Loss kl = Loss::f_divergence(BuiltinGenerator::KL);
  Vec a{0.0, 1.0}, b{0.5, 1.5};
  CHECK(h2(mp, a, b) == doctest::Approx(fx::kGms5H2).epsilon(1e-6));
  CHECK(kl(mp, a, b) == doctest::Approx(fx::kGms5KL).epsilon(1e-6));
}

TEST_CASE("a divergent integral refuses to pretend it converged") {
  EstimationProblem ep = fx::expo();
  Loss ch = Loss::f_divergence(BuiltinGenerator::ChiSquared);
  // E[r^2] under rate 2.5 needs 2*1.0 > 2.5, which fails
  CHECK_THROWS_AS(ch(ep, {1.0}, {2.5}), Error);
}

TEST_CASE("bhattacharyya blows up on essentially disjoint densities") {
  EstimationProblem far = fx::gauss(0.5, -20.0, 20.0);
  try {
    bhattacharyya_loss(far, {-8.0}, {8.0});
    FAIL("expected a singularity error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SingularDivergence);
  }
}

TEST_CASE("quadratic loss and quadrature overrides") {
  Loss q = Loss::quadratic();
  EstimationProblem mp = fx::gms(5);
  CHECK(q(mp, {0.5, 1.0}, {0.1, 2.0}) ==
        doctest::Approx(0.16 + 1.0).epsilon(1e-14));
  CHECK(q.flags().smooth);
  CHECK_FALSE(q.flags().conditional_distribution_based);

  Loss h2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  CHECK(h2.flags().conditional_distribution_based);
  EstimationProblem gp = fx::gauss();
  QuadSpec loose{1e-5, 1e-5, 400, 8};
  double vloose = h2.with_quad(loose)(gp, {1.0}, {0.0});
  CHECK(vloose == doctest::Approx(fx::kGaussH2_d1s1).epsilon(1e-4));
}

TEST_CASE("density-gap construction and its finite value") {
  EstimationProblem bp = fx::bern();
  Loss ni = Loss::no_iro();
  Loss ns = Loss::no_isi();
  CHECK(ni(bp, {0.8}, {0.5}) == doctest::Approx(fx::kBernGap).epsilon(1e-12));
  CHECK(ns(bp, {0.8}, {0.5}) == doctest::Approx(fx::kBernGap).epsilon(1e-12));
  EstimationProblem gp = fx::gauss();
  // integral of f2 (f1-f2)^2 for unit gaussians one sigma apart
  CHECK(ni(gp, {1.0}, {0.0}) == doctest::Approx(0.026047413238).epsilon(1e-6));
}

TEST_CASE("prior-weighted loss mixes weight and base value") {
  EstimationProblem bp = fx::bern();
  Loss l2 = Loss::f_divergence(BuiltinGenerator::Hellinger2);
  double base = l2(bp, {0.8}, {0.5});

  // threshold so large that every prior draw is within it: weight = 1
  Loss all = Loss::no_iia(l2, l2, 10.0, 256, 17);
  CHECK(all(bp, {0.8}, {0.5}) == doctest::Approx(base).epsilon(1e-12));

  // threshold so small that no draw qualifies: weight = 0
  Loss none = Loss::no_iia(l2, l2, 1e-12, 256, 17);
  CHECK(none(bp, {0.8}, {0.5}) == 0.0);

  Loss mid = Loss::no_iia(l2, l2, 0.05, 256, 17);
  double v1 = mid(bp, {0.8}, {0.5});
  double v2 = mid(bp, {0.8}, {0.5});
  CHECK(v1 == v2);  // seeded weight, bitwise reproducible
  CHECK(v1 > 0.0);
  CHECK(v1 < base);
  CHECK_FALSE(mid.flags().smooth);
}

TEST_CASE("penalty-induced loss formula") {
  EstimationProblem gp = fx::gauss();  // uniform prior 1/4 on [-2,2]
  auto g = [](const Vec& t) { return std::exp(-t[0]); };
  Loss pl = Loss::pmle_induced(g, "exp_decay");
  double want = std::pow(0.25 / std::exp(-0.5), 2.0) * 0.09;
  CHECK(pl(gp, {0.8}, {0.5}) == doctest::Approx(want).epsilon(1e-12));
  CHECK(pl.flags().smooth);
}

TEST_CASE("likelihood-chasing rescales") {
  EstimationProblem gp = fx::gauss();
  Loss mq = mle_via_quadratic();
  // uniform prior 1/4, one scalar coordinate: scale = (1/4)^2
  CHECK(mq(gp, {0.3}, {0.5}) == doctest::Approx(0.0625 * 0.04).epsilon(1e-12));

  Loss mh = mle_via_hellinger();
  EstimationProblem ep = fx::expo();
  // scale carries prior^2 / fisher, fisher = 1/lambda^2
  double scale = std::pow(1.0 / 4.8, 2.0) * (2.5 * 2.5);
  CHECK(mh(ep, {1.0}, {2.5}) ==
        doctest::Approx(scale * fx::kExpoH2).epsilon(1e-7));
}

TEST_CASE("custom generators agree with builtins") {
  Generator pearson;
  pearson.name = "pearson";
  pearson.F = [](double t) { return (t - 1.0) * (t - 1.0); };
  pearson.dF = [](double t) { return 2.0 * (t - 1.0); };
  pearson.d2F = [](double) { return 2.0; };
  pearson.second_at_one = 2.0;
  EstimationProblem bp = fx::bern();
  QuadSpec spec{1e-10, 0.0, 4000, 8};
  CHECK(f_divergence_expectation(pearson, bp, {0.8}, {0.5}, spec) ==
        doctest::Approx(fx::kBernChi2).epsilon(1e-12));
  CHECK(hellinger2(bp, {0.8}, {0.5}) ==
        doctest::Approx(fx::kBernH2).epsilon(1e-12));
}

TEST_CASE("discrimination probe") {
  EstimationProblem bp = fx::bern();
  CHECK(check_discriminative(Loss::f_divergence(BuiltinGenerator::Hellinger2),
                             bp, {0.5}, 0.05));
  CHECK(check_discriminative(Loss::quadratic(), bp, {0.5}, 0.05));
  LossFlags fl;
  Loss zero = Loss::custom("zero", fl,
                           [](const EstimationProblem&, const Vec&, const Vec&) {
                             return 0.0;
                           });
  CHECK_FALSE(check_discriminative(zero, bp, {0.5}, 0.05));
}

TEST_CASE("free helper matches the call operator") {
  EstimationProblem bp = fx::bern();
  Loss kl = Loss::f_divergence(BuiltinGenerator::KL);
  CHECK(eval_loss(kl, bp, {0.8}, {0.5}) == kl(bp, {0.8}, {0.5}));
}
