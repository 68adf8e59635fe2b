#include "eic/config.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "eic/axioms.hpp"
#include "eic/errors.hpp"
#include "eic/risk.hpp"

namespace eic {

namespace {

const Json* find_key(const Json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void expect_keys(const Json& j, const std::string& ctx,
                 std::initializer_list<const char*> allowed) {
  require(j.is_object(), Errc::InvalidConfig, ctx + " must be a json object");
  for (const auto& el : j.items()) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return el.key() == k; });
    require(known, Errc::InvalidConfig,
            "unknown key '" + el.key() + "' in " + ctx);
  }
}

std::string get_str(const Json& j, const std::string& ctx,
                    const std::string& key) {
  const Json* v = find_key(j, key);
  require(v != nullptr, Errc::InvalidConfig,
          "missing key '" + key + "' in " + ctx);
  require(v->is_string(), Errc::InvalidConfig,
          "'" + key + "' in " + ctx + " must be a string");
  return v->get<std::string>();
}

std::string get_str_or(const Json& j, const std::string& ctx,
                       const std::string& key, const std::string& def) {
  return find_key(j, key) ? get_str(j, ctx, key) : def;
}

double get_num(const Json& j, const std::string& ctx, const std::string& key) {
  const Json* v = find_key(j, key);
  require(v != nullptr, Errc::InvalidConfig,
          "missing key '" + key + "' in " + ctx);
  require(v->is_number(), Errc::InvalidConfig,
          "'" + key + "' in " + ctx + " must be a number");
  return v->get<double>();
}

double get_num_or(const Json& j, const std::string& ctx,
                  const std::string& key, double def) {
  return find_key(j, key) ? get_num(j, ctx, key) : def;
}

long long get_int(const Json& j, const std::string& ctx,
                  const std::string& key) {
  const Json* v = find_key(j, key);
  require(v != nullptr, Errc::InvalidConfig,
          "missing key '" + key + "' in " + ctx);
  require(v->is_number_integer(), Errc::InvalidConfig,
          "'" + key + "' in " + ctx + " must be an integer");
  return v->get<long long>();
}

long long get_int_or(const Json& j, const std::string& ctx,
                     const std::string& key, long long def) {
  return find_key(j, key) ? get_int(j, ctx, key) : def;
}

bool get_bool_or(const Json& j, const std::string& ctx, const std::string& key,
                 bool def) {
  const Json* v = find_key(j, key);
  if (!v) return def;
  require(v->is_boolean(), Errc::InvalidConfig,
          "'" + key + "' in " + ctx + " must be a boolean");
  return v->get<bool>();
}

Vec get_vec(const Json& j, const std::string& ctx, const std::string& key) {
  const Json* v = find_key(j, key);
  require(v != nullptr, Errc::InvalidConfig,
          "missing key '" + key + "' in " + ctx);
  require(v->is_array(), Errc::InvalidConfig,
          "'" + key + "' in " + ctx + " must be an array of numbers");
  Vec out;
  for (const auto& e : *v) {
    require(e.is_number(), Errc::InvalidConfig,
            "'" + key + "' in " + ctx + " must contain numbers only");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<Vec> get_vec_list(const Json& j, const std::string& ctx,
                              const std::string& key) {
  const Json* v = find_key(j, key);
  require(v != nullptr, Errc::InvalidConfig,
          "missing key '" + key + "' in " + ctx);
  require(v->is_array(), Errc::InvalidConfig,
          "'" + key + "' in " + ctx + " must be an array of arrays");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const Json& row = (*v)[i];
    require(row.is_array(), Errc::InvalidConfig,
            "'" + key + "[" + std::to_string(i) + "]' in " + ctx +
                " must be an array of numbers");
    Vec r;
    for (const auto& e : row) {
      require(e.is_number(), Errc::InvalidConfig,
              "'" + key + "[" + std::to_string(i) + "]' in " + ctx +
                  " must contain numbers only");
      r.push_back(e.get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

DataModel parse_model(const Json& j) {
  const std::string ctx = "model";
  require(j.is_object(), Errc::InvalidConfig, ctx + " must be a json object");
  std::string family = get_str(j, ctx, "family");
  if (family == "bernoulli") {
    expect_keys(j, ctx, {"family"});
    return DataModel::bernoulli();
  }
  if (family == "binomial") {
    expect_keys(j, ctx, {"family", "n"});
    long long n = get_int(j, ctx, "n");
    require(n >= 1 && n <= 100000, Errc::InvalidConfig,
            "binomial 'n' must be in [1, 100000]");
    return DataModel::binomial((int)n);
  }
  if (family == "categorical") {
    expect_keys(j, ctx, {"family", "k"});
    long long k = get_int(j, ctx, "k");
    require(k >= 2 && k <= 1000, Errc::InvalidConfig,
            "categorical 'k' must be in [2, 1000]");
    return DataModel::categorical((int)k);
  }
  if (family == "gaussian_known_sigma") {
    expect_keys(j, ctx, {"family", "sigma"});
    double sigma = get_num(j, ctx, "sigma");
    require(sigma > 0.0, Errc::InvalidConfig, "'sigma' must be positive");
    return DataModel::gaussian_known_sigma(sigma);
  }
  if (family == "gaussian_mean_sigma") {
    expect_keys(j, ctx, {"family", "n"});
    long long n = get_int(j, ctx, "n");
    require(n >= 2 && n <= 100000, Errc::InvalidConfig,
            "gaussian_mean_sigma 'n' must be in [2, 100000]");
    return DataModel::gaussian_mean_sigma((int)n);
  }
  if (family == "exponential_rate") {
    expect_keys(j, ctx, {"family"});
    return DataModel::exponential_rate();
  }
  if (family == "iid_product") {
    expect_keys(j, ctx, {"family", "base", "count"});
    const Json* base = find_key(j, "base");
    require(base != nullptr, Errc::InvalidConfig,
            "missing key 'base' in " + ctx);
    long long count = get_int(j, ctx, "count");
    require(count >= 1 && count <= 64, Errc::InvalidConfig,
            "iid_product 'count' must be in [1, 64]");
    return DataModel::iid_product(parse_model(*base), (int)count);
  }
  if (family == "table") {
    expect_keys(j, ctx, {"family", "theta_points", "obs_points", "pmf_rows"});
    return DataModel::table(get_vec_list(j, ctx, "theta_points"),
                            get_vec_list(j, ctx, "obs_points"),
                            get_vec_list(j, ctx, "pmf_rows"));
  }
  fail(Errc::InvalidConfig, "unknown model family '" + family + "'");
}

ParameterSpace parse_space(const Json& j) {
  const std::string ctx = "theta_space";
  require(j.is_object(), Errc::InvalidConfig, ctx + " must be a json object");
  std::string kind = get_str(j, ctx, "kind");
  if (kind == "box") {
    expect_keys(j, ctx, {"kind", "lower", "upper"});
    return ParameterSpace::box(get_vec(j, ctx, "lower"),
                               get_vec(j, ctx, "upper"));
  }
  if (kind == "finite") {
    expect_keys(j, ctx, {"kind", "points"});
    return ParameterSpace::finite(get_vec_list(j, ctx, "points"));
  }
  fail(Errc::InvalidConfig, "unknown theta_space kind '" + kind + "'");
}

Prior parse_prior(const Json& j) {
  const std::string ctx = "prior";
  require(j.is_object(), Errc::InvalidConfig, ctx + " must be a json object");
  std::string kind = get_str(j, ctx, "kind");
  if (kind == "uniform") {
    expect_keys(j, ctx, {"kind"});
    return Prior::uniform_box();
  }
  if (kind == "beta") {
    expect_keys(j, ctx, {"kind", "a", "b"});
    double a = get_num(j, ctx, "a"), b = get_num(j, ctx, "b");
    require(a > 0.0 && b > 0.0, Errc::InvalidConfig,
            "beta prior needs positive 'a' and 'b'");
    return Prior::beta(a, b);
  }
  if (kind == "gaussian") {
    expect_keys(j, ctx, {"kind", "mean", "sigma"});
    Vec mean = get_vec(j, ctx, "mean"), sigma = get_vec(j, ctx, "sigma");
    require(mean.size() == sigma.size(), Errc::InvalidConfig,
            "gaussian prior 'mean' and 'sigma' must have the same length");
    for (double s : sigma)
      require(s > 0.0, Errc::InvalidConfig,
              "gaussian prior 'sigma' entries must be positive");
    return Prior::gaussian(std::move(mean), std::move(sigma));
  }
  if (kind == "power_law_sigma") {
    expect_keys(j, ctx, {"kind", "axis"});
    long long axis = get_int_or(j, ctx, "axis", 0);
    require(axis >= 0, Errc::InvalidConfig, "'axis' must be non-negative");
    return Prior::power_law_sigma((int)axis);
  }
  if (kind == "finite_pmf") {
    expect_keys(j, ctx, {"kind", "weights"});
    return Prior::finite_pmf(get_vec(j, ctx, "weights"));
  }
  fail(Errc::InvalidConfig, "unknown prior kind '" + kind + "'");
}

EstimationProblem parse_problem(const Json& j) {
  const std::string ctx = "problem";
  expect_keys(j, ctx, {"model", "theta_space", "prior", "validation"});
  const Json* mj = find_key(j, "model");
  require(mj != nullptr, Errc::InvalidConfig, "missing key 'model' in " + ctx);
  const Json* sj = find_key(j, "theta_space");
  require(sj != nullptr, Errc::InvalidConfig,
          "missing key 'theta_space' in " + ctx);
  const Json* pj = find_key(j, "prior");
  require(pj != nullptr, Errc::InvalidConfig, "missing key 'prior' in " + ctx);
  std::string level = get_str_or(j, ctx, "validation", "standard");
  require(level == "standard" || level == "light", Errc::InvalidConfig,
          "'validation' must be \"standard\" or \"light\"");
  return EstimationProblem(parse_space(*sj), parse_model(*mj),
                           parse_prior(*pj),
                           level == "light" ? ValidationLevel::Light
                                            : ValidationLevel::Standard);
}

Loss parse_loss(const Json& j) {
  const std::string ctx = "loss";
  require(j.is_object(), Errc::InvalidConfig, ctx + " must be a json object");
  std::string kind = get_str(j, ctx, "kind");
  if (kind == "no_iia") {
    expect_keys(j, ctx, {"kind", "threshold", "mc_samples", "seed"});
    double threshold = get_num(j, ctx, "threshold");
    require(threshold > 0.0, Errc::InvalidConfig, "'threshold' must be positive");
    long long mc = get_int_or(j, ctx, "mc_samples", 2048);
    require(mc >= 16, Errc::InvalidConfig, "'mc_samples' must be at least 16");
    long long seed = get_int_or(j, ctx, "seed", 17);
    require(seed >= 0, Errc::InvalidConfig, "'seed' must be non-negative");
    return Loss::no_iia(Loss::f_divergence(BuiltinGenerator::Hellinger2),
                        Loss::f_divergence(BuiltinGenerator::Hellinger2),
                        threshold, (int)mc, (std::uint64_t)seed);
  }
  expect_keys(j, ctx, {"kind"});
  if (kind == "quadratic") return Loss::quadratic();
  if (kind == "hellinger2")
    return Loss::f_divergence(BuiltinGenerator::Hellinger2);
  if (kind == "kl") return Loss::f_divergence(BuiltinGenerator::KL);
  if (kind == "chi_squared")
    return Loss::f_divergence(BuiltinGenerator::ChiSquared);
  if (kind == "bhattacharyya") return Loss::bhattacharyya();
  if (kind == "no_iro") return Loss::no_iro();
  if (kind == "no_isi") return Loss::no_isi();
  if (kind == "mle_via_quadratic") return mle_via_quadratic();
  if (kind == "mle_via_hellinger") return mle_via_hellinger();
  fail(Errc::InvalidConfig, "unknown loss kind '" + kind + "'");
}

std::function<double(const Vec&)> parse_penalty(const Json& j,
                                                std::string& name_out) {
  const std::string ctx = "penalty";
  require(j.is_object(), Errc::InvalidConfig, ctx + " must be a json object");
  std::string type = get_str(j, ctx, "type");
  if (type == "unit") {
    expect_keys(j, ctx, {"type"});
    name_out = "1";
    return [](const Vec&) { return 1.0; };
  }
  if (type == "exp_quadratic") {
    expect_keys(j, ctx, {"type", "center", "scale"});
    Vec center = get_vec(j, ctx, "center");
    double scale = get_num(j, ctx, "scale");
    require(scale > 0.0, Errc::InvalidConfig, "'scale' must be positive");
    name_out = "exp_quadratic";
    return [center, scale](const Vec& t) {
      double q = 0.0;
      for (std::size_t k = 0; k < center.size() && k < t.size(); ++k) {
        double d = t[k] - center[k];
        q += d * d;
      }
      return std::exp(-q / (2.0 * scale * scale));
    };
  }
  fail(Errc::InvalidConfig, "unknown penalty type '" + type + "'");
}

EstimatorSpec parse_estimator(const Json& j, const RunConfig& cfg,
                              std::size_t idx) {
  const std::string ctx = "estimators[" + std::to_string(idx) + "]";
  expect_keys(j, ctx, {"kind", "loss", "penalty", "extend_to_box"});
  std::string kind = get_str(j, ctx, "kind");
  EstimatorSpec spec;
  spec.hessian = cfg.hessian;
  spec.argmax = cfg.argmax;
  spec.posterior_quad = cfg.posterior_quad;
  if (kind == "dmap") {
    spec.kind = EstimatorKind::DMAP;
  } else if (kind == "cmap") {
    spec.kind = EstimatorKind::CMAP;
  } else if (kind == "wf") {
    spec.kind = EstimatorKind::WF;
  } else if (kind == "pmle") {
    spec.kind = EstimatorKind::PMLE;
    const Json* pj = find_key(j, "penalty");
    require(pj != nullptr, Errc::InvalidConfig,
            ctx + " with kind 'pmle' needs a 'penalty'");
    spec.penalty = parse_penalty(*pj, spec.penalty_name);
  } else if (kind == "bayes" || kind == "eic") {
    spec.kind = kind == "bayes" ? EstimatorKind::Bayes : EstimatorKind::EIC;
    const Json* lj = find_key(j, "loss");
    if (lj) {
      spec.loss = parse_loss(*lj).with_quad(cfg.loss_quad);
    } else if (cfg.loss) {
      spec.loss = cfg.loss;
    } else {
      fail(Errc::InvalidConfig,
           ctx + " with kind '" + kind +
               "' needs a 'loss' (inline or top-level)");
    }
    if (kind == "bayes")
      spec.extend_to_box = get_bool_or(j, ctx, "extend_to_box", false);
  } else {
    fail(Errc::InvalidConfig, "unknown estimator kind '" + kind + "'");
  }
  if (kind != "bayes" && kind != "eic")
    require(find_key(j, "loss") == nullptr, Errc::InvalidConfig,
            ctx + ": only 'bayes' and 'eic' take a 'loss'");
  if (kind != "pmle")
    require(find_key(j, "penalty") == nullptr, Errc::InvalidConfig,
            ctx + ": only 'pmle' takes a 'penalty'");
  if (kind != "bayes")
    require(find_key(j, "extend_to_box") == nullptr, Errc::InvalidConfig,
            ctx + ": only 'bayes' takes 'extend_to_box'");
  return spec;
}

void overlay_quad(const Json& j, const std::string& ctx, QuadSpec& q) {
  expect_keys(j, ctx, {"rel_tol", "abs_tol", "max_intervals", "initial_splits"});
  q.rel_tol = get_num_or(j, ctx, "rel_tol", q.rel_tol);
  q.abs_tol = get_num_or(j, ctx, "abs_tol", q.abs_tol);
  q.max_intervals = (int)get_int_or(j, ctx, "max_intervals", q.max_intervals);
  q.initial_splits =
      (int)get_int_or(j, ctx, "initial_splits", q.initial_splits);
  require(q.rel_tol >= 0.0 && q.abs_tol >= 0.0, Errc::InvalidConfig,
          ctx + " tolerances must be non-negative");
  require(q.max_intervals >= 8, Errc::InvalidConfig,
          ctx + " 'max_intervals' must be at least 8");
  require(q.initial_splits >= 1, Errc::InvalidConfig,
          ctx + " 'initial_splits' must be at least 1");
}

std::string vec_str(const Vec& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += fmt_double(v[i]);
  }
  return s;
}

Json diag_json(const ArgmaxDiagnostics& d) {
  Json j;
  j["grid_points"] = d.grid_points;
  j["metric_evaluations"] = d.metric_evaluations;
  j["refinements"] = d.refinements;
  j["boundary_maximum"] = d.boundary_maximum;
  j["excluded_points"] = d.excluded_points;
  return j;
}

void require_bounded_box(const ParameterSpace& sp, const std::string& cmd) {
  require(sp.kind == ParameterSpace::Kind::Box, Errc::InvalidConfig,
          "command '" + cmd + "' needs a box parameter space");
  for (int k = 0; k < sp.dim(); ++k)
    require(std::isfinite(sp.lower[k]) && std::isfinite(sp.upper[k]),
            Errc::InvalidConfig,
            "command '" + cmd + "' needs a bounded parameter box");
}

const EstimationProblem& need_problem(const RunConfig& cfg) {
  require(cfg.problem.has_value(), Errc::InvalidConfig,
          "command '" + cfg.command + "' needs a 'problem'");
  return *cfg.problem;
}

const Loss& need_loss(const RunConfig& cfg) {
  require(cfg.loss.has_value(), Errc::InvalidConfig,
          "command '" + cfg.command + "' needs a 'loss'");
  return *cfg.loss;
}

int cmd_estimate(RunConfig& cfg, Report& rep, bool compare) {
  const EstimationProblem& p = need_problem(cfg);
  require(!cfg.estimators.empty(), Errc::InvalidConfig,
          "command '" + cfg.command + "' needs 'estimators'");
  require(!cfg.observations.empty(), Errc::InvalidConfig,
          "command '" + cfg.command + "' needs 'observations'");
  if (compare)
    require(cfg.estimators.size() >= 2, Errc::InvalidConfig,
            "command 'compare' needs at least two estimators");
  rep.table.header = {"observation", "estimator", "point", "value"};
  if (compare) rep.table.header.push_back("deviation");
  Json results = Json::array();
  double worst = 0.0;
  for (const Vec& x : cfg.observations) {
    Json jx;
    jx["x"] = x;
    Json ests = Json::array();
    Vec reference;
    double obs_worst = 0.0;
    for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
      EstimateSet es = estimate(cfg.estimators[e], p, x);
      Json je;
      je["estimator"] = cfg.estimator_names[e];
      je["points"] = es.points;
      je["values"] = es.values;
      je["value"] = es.value;
      je["tie_tolerance"] = es.tie_tolerance;
      je["diagnostics"] = diag_json(es.diagnostics);
      std::vector<std::string> row = {vec_str(x), cfg.estimator_names[e],
                                      vec_str(es.points[0]),
                                      fmt_double(es.value)};
      if (compare) {
        if (e == 0) {
          reference = es.points[0];
          row.push_back("0");
        } else {
          double dev = 0.0;
          for (std::size_t k = 0; k < reference.size(); ++k)
            dev = std::max(dev, std::abs(es.points[0][k] - reference[k]));
          je["deviation_from_first"] = dev;
          obs_worst = std::max(obs_worst, dev);
          row.push_back(fmt_double(dev));
        }
      }
      ests.push_back(je);
      rep.table.rows.push_back(std::move(row));
    }
    jx["estimates"] = ests;
    if (compare) jx["max_deviation"] = obs_worst;
    worst = std::max(worst, obs_worst);
    results.push_back(jx);
  }
  rep.body["results"] = results;
  if (!compare) return 0;
  bool pass = worst <= cfg.compare_tol;
  rep.body["max_deviation"] = worst;
  rep.body["tolerance"] = cfg.compare_tol;
  rep.body["verdict"] = pass ? "pass" : "fail";
  return pass ? 0 : 1;
}

int cmd_verify_fisher(RunConfig& cfg, Report& rep) {
  const EstimationProblem& p = need_problem(cfg);
  const Loss& loss = need_loss(cfg);
  require(loss.generator() != nullptr, Errc::InvalidConfig,
          "command 'verify-fisher' needs an f-divergence loss");
  require_bounded_box(p.theta_space(), cfg.command);
  require(cfg.fisher_n_thetas >= 1, Errc::InvalidConfig,
          "'fisher_n_thetas' must be at least 1");
  double gamma = loss.generator()->second_at_one;
  const auto& sp = p.theta_space();
  Rng rng(cfg.seed);
  rep.table.header = {"theta", "rel_deviation"};
  Json rows = Json::array();
  double worst = 0.0;
  for (int i = 0; i < cfg.fisher_n_thetas; ++i) {
    Vec th(sp.dim());
    for (int k = 0; k < sp.dim(); ++k)
      th[k] = sp.lower[k] +
              (0.15 + 0.70 * rng.uniform01()) * (sp.upper[k] - sp.lower[k]);
    SymMatrix hess = hessian_at_diagonal(loss, p, th, cfg.hessian);
    SymMatrix info = fisher_information(p, th);
    double dev = rel_deviation(hess.scaled(1.0 / gamma), info);
    worst = std::max(worst, dev);
    Json r;
    r["theta"] = th;
    r["rel_deviation"] = dev;
    rows.push_back(r);
    rep.table.rows.push_back({vec_str(th), fmt_double(dev)});
  }
  bool pass = worst <= cfg.fisher_tol;
  rep.body["curvature_factor"] = gamma;
  rep.body["rows"] = rows;
  rep.body["max_rel_deviation"] = worst;
  rep.body["tolerance"] = cfg.fisher_tol;
  rep.body["verdict"] = pass ? "pass" : "fail";
  return pass ? 0 : 1;
}

int cmd_verify_limit(RunConfig& cfg, Report& rep) {
  const EstimationProblem& p = need_problem(cfg);
  const Loss& loss = need_loss(cfg);
  require(!cfg.limit_theta1.empty() && !cfg.limit_theta2.empty(),
          Errc::InvalidConfig,
          "command 'verify-limit' needs 'limit_theta1' and 'limit_theta2'");
  require(!cfg.observations.empty(), Errc::InvalidConfig,
          "command 'verify-limit' needs one observation");
  RatioCurve curve = utility_ratio_curve(
      p, loss, RiskSpectrum::smooth_step(), cfg.limit_theta1, cfg.limit_theta2,
      cfg.observations[0], cfg.limit_eps, cfg.hessian);
  rep.table.header = {"eps", "u1", "u2", "ratio", "stable"};
  Json pts = Json::array();
  int n_stable = 0;
  for (const RatioPoint& pt : curve.points) {
    Json r;
    r["eps"] = pt.eps;
    r["u1"] = pt.u1;
    r["u2"] = pt.u2;
    r["ratio"] = pt.ratio;
    r["stable"] = pt.stable;
    pts.push_back(r);
    n_stable += pt.stable ? 1 : 0;
    rep.table.rows.push_back({fmt_double(pt.eps), fmt_double(pt.u1),
                              fmt_double(pt.u2), fmt_double(pt.ratio),
                              pt.stable ? "1" : "0"});
  }
  double scale = std::max(std::abs(curve.predicted_limit), 1e-300);
  double gap =
      std::abs(curve.ratio_at_min_stable - curve.predicted_limit) / scale;
  bool pass = n_stable > 0 && std::isfinite(gap) && gap <= cfg.limit_tol;
  rep.body["points"] = pts;
  rep.body["stable_points"] = n_stable;
  rep.body["predicted_limit"] = curve.predicted_limit;
  rep.body["eps_min_stable"] = curve.eps_min_stable;
  rep.body["ratio_at_min_stable"] = curve.ratio_at_min_stable;
  rep.body["rel_gap"] = gap;
  rep.body["tolerance"] = cfg.limit_tol;
  rep.body["verdict"] = pass ? "pass" : "fail";
  return pass ? 0 : 1;
}

int cmd_verify_pmle(RunConfig& cfg, Report& rep) {
  const EstimationProblem& p = need_problem(cfg);
  require_bounded_box(p.theta_space(), cfg.command);
  require(!cfg.observations.empty(), Errc::InvalidConfig,
          "command 'verify-pmle' needs 'observations'");
  require(cfg.pmle_n_penalties >= 1, Errc::InvalidConfig,
          "'pmle_n_penalties' must be at least 1");
  const auto& sp = p.theta_space();
  double wmax = 0.0;
  for (int k = 0; k < sp.dim(); ++k)
    wmax = std::max(wmax, sp.upper[k] - sp.lower[k]);
  Rng rng(cfg.seed);
  rep.table.header = {"penalty", "observation", "pmle_point", "eic_point",
                      "scaled_deviation"};
  Json rows = Json::array();
  double worst = 0.0;
  for (int i = 0; i < cfg.pmle_n_penalties; ++i) {
    Vec center(sp.dim());
    for (int k = 0; k < sp.dim(); ++k)
      center[k] = sp.lower[k] +
                  (0.25 + 0.50 * rng.uniform01()) * (sp.upper[k] - sp.lower[k]);
    // narrow wells keep the penalised argmax away from the box faces, where
    // the curvature-based estimator cannot place its difference stencil
    double scale = (0.10 + 0.15 * rng.uniform01()) * wmax;
    std::string gname = "g" + std::to_string(i);
    auto g = [center, scale](const Vec& t) {
      double q = 0.0;
      for (std::size_t k = 0; k < center.size(); ++k) {
        double d = t[k] - center[k];
        q += d * d;
      }
      return std::exp(-q / (2.0 * scale * scale));
    };
    EstimatorSpec pm;
    pm.kind = EstimatorKind::PMLE;
    pm.penalty = g;
    pm.penalty_name = gname;
    pm.argmax = cfg.argmax;
    EstimatorSpec ec;
    ec.kind = EstimatorKind::EIC;
    ec.loss = pmle_to_loss(g, gname);
    ec.hessian = cfg.hessian;
    ec.argmax = cfg.argmax;
    for (const Vec& x : cfg.observations) {
      Vec a = estimate(pm, p, x).points[0];
      Vec b = estimate(ec, p, x).points[0];
      double dev = 0.0;
      for (int k = 0; k < sp.dim(); ++k)
        dev = std::max(dev,
                       std::abs(a[k] - b[k]) / (sp.upper[k] - sp.lower[k]));
      worst = std::max(worst, dev);
      Json r;
      r["penalty"] = gname;
      r["center"] = center;
      r["scale"] = scale;
      r["x"] = x;
      r["pmle_point"] = a;
      r["eic_point"] = b;
      r["scaled_deviation"] = dev;
      rows.push_back(r);
      rep.table.rows.push_back({gname, vec_str(x), vec_str(a), vec_str(b),
                                fmt_double(dev)});
    }
  }
  bool pass = worst <= cfg.pmle_tol;
  rep.body["rows"] = rows;
  rep.body["max_scaled_deviation"] = worst;
  rep.body["tolerance"] = cfg.pmle_tol;
  rep.body["verdict"] = pass ? "pass" : "fail";
  return pass ? 0 : 1;
}

int cmd_audit_axioms(RunConfig& cfg, Report& rep) {
  const EstimationProblem& p = need_problem(cfg);
  const Loss& loss = need_loss(cfg);
  require(cfg.audit_pairs >= 1, Errc::InvalidConfig,
          "'audit_pairs' must be at least 1");
  BatteryConfig bc;
  bc.n_pairs = cfg.audit_pairs;
  bc.seed = cfg.seed;
  std::vector<AxiomAuditRow> rows = axiom_battery(loss, p, nullptr, bc);
  rep.table.header = {"axiom", "item", "max_rel_dev", "ratio_min", "ratio_max",
                      "verdict"};
  Json jr = Json::array();
  for (const AxiomAuditRow& row : rows) {
    Json r;
    r["axiom"] = row.axiom;
    r["item"] = row.item;
    r["max_rel_dev"] = row.max_rel_dev;
    r["ratio_min"] = row.ratio_min;
    r["ratio_max"] = row.ratio_max;
    r["verdict"] = verdict_name(row.verdict);
    jr.push_back(r);
    rep.table.rows.push_back({row.axiom, row.item, fmt_double(row.max_rel_dev),
                              fmt_double(row.ratio_min),
                              fmt_double(row.ratio_max),
                              verdict_name(row.verdict)});
  }
  rep.body["loss"] = loss.name();
  rep.body["rows"] = jr;
  return 0;
}

int cmd_c_function(RunConfig& cfg, Report& rep) {
  const EstimationProblem& p = need_problem(cfg);
  require(!cfg.c_theta1.empty() && !cfg.c_theta2.empty(), Errc::InvalidConfig,
          "command 'c-function' needs 'c_theta1' and 'c_theta2'");
  require(cfg.c_grid >= 1, Errc::InvalidConfig, "'c_grid' must be at least 1");
  require(cfg.c_samples >= 100, Errc::InvalidConfig,
          "'c_samples' must be at least 100");
  CFunction cf = c_function(p, cfg.c_theta1, cfg.c_theta2, cfg.c_samples,
                            cfg.seed);
  rep.table.header = {"t", "c"};
  Json pts = Json::array();
  for (int i = 1; i <= cfg.c_grid; ++i) {
    double t = (double)i / cfg.c_grid;
    double c = cf(t);
    Json r;
    r["t"] = t;
    r["c"] = c;
    pts.push_back(r);
    rep.table.rows.push_back({fmt_double(t), fmt_double(c)});
  }
  rep.body["discrete"] = cf.discrete();
  rep.body["integral01"] = cf.integral01();
  rep.body["points"] = pts;
  if (cf.discrete()) {
    Json steps = Json::array();
    for (const auto& [cum, ratio] : cf.steps()) {
      Json s;
      s["cumulative"] = cum;
      s["ratio"] = ratio;
      steps.push_back(s);
    }
    rep.body["steps"] = steps;
  }
  return 0;
}

}  // namespace

RunConfig parse_config(const Json& j) {
  require(j.is_object(), Errc::InvalidConfig, "config must be a json object");
  expect_keys(j, "config",
              {"spec_version", "command", "seed", "out", "format", "problem",
               "loss", "estimators", "observations", "compare_tol",
               "fisher_n_thetas", "fisher_tol", "limit_theta1", "limit_theta2",
               "limit_eps", "limit_tol", "pmle_n_penalties", "pmle_tol",
               "audit_pairs", "c_theta1", "c_theta2", "c_samples", "c_grid",
               "quad", "posterior_quad", "hessian", "argmax"});
  RunConfig cfg;
  cfg.resolved = j;
  long long sv = get_int(j, "config", "spec_version");
  require(sv == kSpecVersion, Errc::InvalidConfig,
          "unsupported spec_version " + std::to_string(sv) + " (expected " +
              std::to_string(kSpecVersion) + ")");
  cfg.command = get_str(j, "config", "command");
  static const char* kCommands[] = {"estimate",    "compare",      "verify-fisher",
                                    "verify-limit", "verify-pmle", "audit-axioms",
                                    "c-function"};
  require(std::any_of(std::begin(kCommands), std::end(kCommands),
                      [&](const char* c) { return cfg.command == c; }),
          Errc::InvalidConfig, "unknown command '" + cfg.command + "'");
  if (find_key(j, "seed")) {
    long long seed = get_int(j, "config", "seed");
    require(seed >= 0, Errc::InvalidConfig, "'seed' must be non-negative");
    cfg.seed = (std::uint64_t)seed;
  }
  cfg.out_path = get_str_or(j, "config", "out", "");
  cfg.format = get_str_or(j, "config", "format", "json");
  require(cfg.format == "json" || cfg.format == "csv", Errc::InvalidConfig,
          "'format' must be \"json\" or \"csv\"");
  if (const Json* q = find_key(j, "quad"))
    overlay_quad(*q, "quad", cfg.loss_quad);
  if (const Json* q = find_key(j, "posterior_quad"))
    overlay_quad(*q, "posterior_quad", cfg.posterior_quad);
  if (const Json* h = find_key(j, "hessian")) {
    expect_keys(*h, "hessian", {"step_scale", "rel_tol"});
    cfg.hessian.step_scale =
        get_num_or(*h, "hessian", "step_scale", cfg.hessian.step_scale);
    cfg.hessian.quad.rel_tol =
        get_num_or(*h, "hessian", "rel_tol", cfg.hessian.quad.rel_tol);
    require(cfg.hessian.step_scale > 0.0, Errc::InvalidConfig,
            "'step_scale' must be positive");
  }
  if (const Json* a = find_key(j, "argmax")) {
    expect_keys(*a, "argmax",
                {"grid_per_axis", "refine_top_k", "polish_rounds",
                 "nm_max_iter", "nm_rel_tol"});
    cfg.argmax.grid_per_axis = (int)get_int_or(*a, "argmax", "grid_per_axis",
                                               cfg.argmax.grid_per_axis);
    cfg.argmax.refine_top_k =
        (int)get_int_or(*a, "argmax", "refine_top_k", cfg.argmax.refine_top_k);
    cfg.argmax.polish_rounds = (int)get_int_or(*a, "argmax", "polish_rounds",
                                               cfg.argmax.polish_rounds);
    cfg.argmax.nm_max_iter =
        (int)get_int_or(*a, "argmax", "nm_max_iter", cfg.argmax.nm_max_iter);
    cfg.argmax.nm_rel_tol =
        get_num_or(*a, "argmax", "nm_rel_tol", cfg.argmax.nm_rel_tol);
    require(cfg.argmax.grid_per_axis >= 2, Errc::InvalidConfig,
            "'grid_per_axis' must be at least 2");
  }
  if (const Json* pj = find_key(j, "problem")) cfg.problem = parse_problem(*pj);
  if (const Json* lj = find_key(j, "loss"))
    cfg.loss = parse_loss(*lj).with_quad(cfg.loss_quad);
  if (const Json* ej = find_key(j, "estimators")) {
    require(ej->is_array(), Errc::InvalidConfig,
            "'estimators' must be an array");
    for (std::size_t i = 0; i < ej->size(); ++i) {
      EstimatorSpec spec = parse_estimator((*ej)[i], cfg, i);
      std::string name = spec.name();
      int same = 0;
      for (const std::string& prev : cfg.estimator_names)
        if (prev == name || prev.rfind(name + "#", 0) == 0) ++same;
      if (same) name += "#" + std::to_string(same + 1);
      cfg.estimators.push_back(std::move(spec));
      cfg.estimator_names.push_back(std::move(name));
    }
  }
  if (find_key(j, "observations"))
    cfg.observations = get_vec_list(j, "config", "observations");
  cfg.compare_tol = get_num_or(j, "config", "compare_tol", cfg.compare_tol);
  cfg.fisher_n_thetas =
      (int)get_int_or(j, "config", "fisher_n_thetas", cfg.fisher_n_thetas);
  cfg.fisher_tol = get_num_or(j, "config", "fisher_tol", cfg.fisher_tol);
  if (find_key(j, "limit_theta1"))
    cfg.limit_theta1 = get_vec(j, "config", "limit_theta1");
  if (find_key(j, "limit_theta2"))
    cfg.limit_theta2 = get_vec(j, "config", "limit_theta2");
  if (find_key(j, "limit_eps")) {
    cfg.limit_eps = get_vec(j, "config", "limit_eps");
    for (double e : cfg.limit_eps)
      require(e > 0.0, Errc::InvalidConfig,
              "'limit_eps' entries must be positive");
  }
  cfg.limit_tol = get_num_or(j, "config", "limit_tol", cfg.limit_tol);
  cfg.pmle_n_penalties =
      (int)get_int_or(j, "config", "pmle_n_penalties", cfg.pmle_n_penalties);
  cfg.pmle_tol = get_num_or(j, "config", "pmle_tol", cfg.pmle_tol);
  cfg.audit_pairs = (int)get_int_or(j, "config", "audit_pairs", cfg.audit_pairs);
  if (find_key(j, "c_theta1")) cfg.c_theta1 = get_vec(j, "config", "c_theta1");
  if (find_key(j, "c_theta2")) cfg.c_theta2 = get_vec(j, "config", "c_theta2");
  cfg.c_samples = get_int_or(j, "config", "c_samples", cfg.c_samples);
  cfg.c_grid = (int)get_int_or(j, "config", "c_grid", cfg.c_grid);
  return cfg;
}

void apply_tol_override(RunConfig& cfg, const std::string& kv) {
  auto eq = kv.find('=');
  require(eq != std::string::npos && eq > 0 && eq + 1 < kv.size(),
          Errc::InvalidConfig, "override must look like key=value: " + kv);
  std::string key = kv.substr(0, eq);
  std::string val = kv.substr(eq + 1);
  double v = 0.0;
  auto res = std::from_chars(val.data(), val.data() + val.size(), v);
  require(res.ec == std::errc() && res.ptr == val.data() + val.size(),
          Errc::InvalidConfig, "override value is not a number: " + kv);
  if (key == "quad_rel") {
    cfg.loss_quad.rel_tol = v;
  } else if (key == "quad_abs") {
    cfg.loss_quad.abs_tol = v;
  } else if (key == "posterior_quad_rel") {
    cfg.posterior_quad.rel_tol = v;
  } else if (key == "hessian_step") {
    require(v > 0.0, Errc::InvalidConfig, "hessian_step must be positive");
    cfg.hessian.step_scale = v;
  } else if (key == "argmax_grid") {
    require(v >= 2.0, Errc::InvalidConfig, "argmax_grid must be at least 2");
    cfg.argmax.grid_per_axis = (int)v;
  } else if (key == "compare_tol") {
    cfg.compare_tol = v;
  } else if (key == "fisher_tol") {
    cfg.fisher_tol = v;
  } else if (key == "limit_tol") {
    cfg.limit_tol = v;
  } else if (key == "pmle_tol") {
    cfg.pmle_tol = v;
  } else {
    fail(Errc::InvalidConfig, "unknown override key '" + key + "'");
  }
  if (cfg.loss) cfg.loss = cfg.loss->with_quad(cfg.loss_quad);
  for (EstimatorSpec& spec : cfg.estimators) {
    if (spec.loss) spec.loss = spec.loss->with_quad(cfg.loss_quad);
    spec.hessian = cfg.hessian;
    spec.argmax = cfg.argmax;
    spec.posterior_quad = cfg.posterior_quad;
  }
  if (!cfg.resolved.contains("tol_overrides"))
    cfg.resolved["tol_overrides"] = Json::array();
  cfg.resolved["tol_overrides"].push_back(kv);
}

int run(RunConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Report rep;
  rep.body["spec_version"] = kSpecVersion;
  rep.body["command"] = cfg.command;
  rep.body["seed"] = cfg.seed;
  rep.body["config"] = cfg.resolved;
  int rc = 0;
  if (cfg.command == "estimate") {
    rc = cmd_estimate(cfg, rep, false);
  } else if (cfg.command == "compare") {
    rc = cmd_estimate(cfg, rep, true);
  } else if (cfg.command == "verify-fisher") {
    rc = cmd_verify_fisher(cfg, rep);
  } else if (cfg.command == "verify-limit") {
    rc = cmd_verify_limit(cfg, rep);
  } else if (cfg.command == "verify-pmle") {
    rc = cmd_verify_pmle(cfg, rep);
  } else if (cfg.command == "audit-axioms") {
    rc = cmd_audit_axioms(cfg, rep);
  } else if (cfg.command == "c-function") {
    rc = cmd_c_function(cfg, rep);
  } else {
    fail(Errc::InvalidConfig, "unknown command '" + cfg.command + "'");
  }
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (!cfg.out_path.empty()) {
    rep.write(cfg.out_path, cfg.format, elapsed);
  } else if (cfg.format == "csv") {
    std::cout << rep.table.to_csv();
  } else {
    std::cout << rep.body.dump(2) << "\n";
  }
  return rc;
}

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"numerical toolkit for error-intolerant point estimation"};
  std::string config_path, out, format;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  app.add_option("config", config_path, "path to a json run configuration")
      ->required();
  app.add_option("--out", out, "report path (overrides the config)");
  app.add_option("--format", format, "report format (overrides the config)")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--seed", seed, "seed (overrides the config)");
  app.add_option("--tol", overrides,
                 "numeric override key=value; may be repeated (keys: "
                 "quad_rel, quad_abs, posterior_quad_rel, hessian_step, "
                 "argmax_grid, compare_tol, fisher_tol, limit_tol, pmle_tol)");
  std::vector<std::string> argv_store;
  argv_store.push_back("eickit");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse((int)argv.size(), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    std::ifstream in(config_path);
    require(in.good(), Errc::InvalidConfig,
            "cannot read config file '" + config_path + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const std::exception& e) {
      fail(Errc::InvalidConfig,
           std::string("config is not valid json: ") + e.what());
    }
    RunConfig cfg = parse_config(j);
    if (app.count("--seed")) {
      cfg.seed = seed;
      cfg.resolved["seed"] = seed;
    }
    if (app.count("--out")) cfg.out_path = out;
    if (app.count("--format")) cfg.format = format;
    for (const std::string& kv : overrides) apply_tol_override(cfg, kv);
    return run(cfg);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return e.code() == Errc::InvalidConfig ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace eic
