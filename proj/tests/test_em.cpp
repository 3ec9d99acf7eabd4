#include "helpers.hpp"

#include "hybridfilt/em.hpp"
#include "hybridfilt/partial_likelihood.hpp"

#include <doctest.h>

using namespace hybridfilt;
using test::vec;
using nlohmann::json;

namespace {

json affine(double c, double a) {
  return {{"family", "affine"}, {"c", {c}}, {"A", {{a}}}, {"clip", {-100.0, 100.0}}};
}

// Two-state model, d=1, rates fixed at 1, one free drift coefficient per basis element.
ModelSpec two_state_basis(const std::vector<std::pair<json, json>>& basis, double eps) {
  json m = scenario("wonham").model;
  const int L = static_cast<int>(basis.size());
  m["epsilon"] = eps;
  m["dims"]["L"] = L;
  m["dims"]["p"] = L;
  m["rate_params"] = json::array({{{"from", 0}, {"to", 1}, {"fixed", 1.0}},
                                  {{"from", 1}, {"to", 0}, {"fixed", 1.0}}});
  m["drift_basis"] = json::array();
  m["drift_params"] = json::array();
  for (int l = 0; l < L; ++l) {
    m["drift_basis"].push_back({{"states", {basis[l].first, basis[l].second}}});
    m["drift_params"].push_back({{"coord", l}});
  }
  m["theta_box"] = {{"lower", std::vector<double>(L, -10.0)}, {"upper", std::vector<double>(L, 10.0)}};
  return model_from_json(m).spec;
}

}  // namespace

TEST_CASE("driftless counts follow the forward equation") {
  const ModelSpec spec = test::scenario_spec("ode");
  const Vector theta = vec({1.0, 1.0});
  const double T = 2.0;
  const HybridPath p = simulate_path(spec, theta, T, 1e-3, 2);
  const FilteredStats s = e_step(p, spec, theta);
  // p_0(t) = (1 + exp(-2t)) / 2, p_1 = 1 - p_0.
  const double n10 = T / 2 + (1 - std::exp(-2 * T)) / 4;
  const double n01 = T - n10;
  CHECK(std::abs(s.n_count(1, 0) - n10) < 5e-3);
  CHECK(std::abs(s.n_count(0, 1) - n01) < 5e-3);
  CHECK(std::abs(s.occupation(1, 0) - n10) < 5e-3);
  CHECK(s.n_count(0, 0) == 0.0);
}

TEST_CASE("single state gram equals the path integral") {
  json m = {{"format_version", 1},
            {"dims", {{"k", 1}, {"d", 1}, {"L", 2}, {"p", 2}}},
            {"epsilon", 0.6},
            {"init_dist", {1.0}},
            {"y0", {0.0}},
            {"theta_box", {{"lower", {-5.0, -5.0}}, {"upper", {5.0, 5.0}}}},
            {"base_rates", json::array()},
            {"drift_basis", {{{"states", {affine(0.5, -1.0)}}}, {{"states", {affine(1.0, 0.3)}}}}},
            {"rate_params", json::array()},
            {"drift_params", {{{"coord", 0}}, {{"coord", 1}}}}};
  const ModelSpec spec = model_from_json(m).spec;
  const Vector theta = vec({0.8, -0.2});
  const HybridPath p = simulate_path(spec, theta, 3.0, 1e-3, 4);
  const FilteredStats s = e_step(p, spec, theta);
  Matrix direct = Matrix::Zero(2, 2);
  for (std::size_t t = 0; t + 1 < p.size(); ++t) {
    const double y = p.y(t, 0), h = p.times[t + 1] - p.times[t];
    const double a = 0.5 - y, b = 1.0 + 0.3 * y;
    direct(0, 0) += a * a * h;
    direct(0, 1) += a * b * h;
    direct(1, 1) += b * b * h;
  }
  direct(1, 0) = direct(0, 1);
  CHECK(test::max_abs(s.gram - direct) < 1e-10 * direct.cwiseAbs().maxCoeff());
  CHECK(s.gram == s.gram.transpose());
}

TEST_CASE("q_function and m_step") {
  SUBCASE("zero at the reference") {
    const ModelSpec spec = test::scenario_spec("wonham");
    const HybridPath p = simulate_path(spec, vec({1, 1, 1}), 2.0, 1e-3, 1);
    const FilteredStats s = e_step(p, spec, vec({1.2, 0.9, 0.7}));
    CHECK(q_function(s, spec, vec({1.2, 0.9, 0.7})) == 0.0);
  }

  SUBCASE("ratio form") {
    const ModelSpec spec = test::scenario_spec("ode");
    FilteredStats s;
    static_cast<SufficientStats&>(s) = SufficientStats::zeros(2, 0);
    s.theta_ref = vec({1.0, 1.0});
    s.n_count(1, 0) = 5.0;
    s.occupation(1, 0) = 2.5;
    s.n_count(0, 1) = 1.0;
    s.occupation(0, 1) = 1.0;
    CHECK(m_step(s, spec)[0] == doctest::Approx(2.0).epsilon(1e-15));
  }

  SUBCASE("scalar drift solve") {
    const ModelSpec spec = test::wonham_drift_only();
    FilteredStats s;
    static_cast<SufficientStats&>(s) = SufficientStats::zeros(2, 1);
    s.theta_ref = vec({0.0});
    s.gram(0, 0) = 4.0;
    s.drift_lin[0] = 3.0;
    CHECK(m_step(s, spec)[0] == doctest::Approx(0.75).epsilon(1e-15));
  }

  SUBCASE("one free rate: analytic maximizer") {
    json m = scenario("ode").model;
    m["dims"]["p"] = 1;
    m["rate_params"][1] = {{"from", 1}, {"to", 0}, {"fixed", 1.0}};
    m["theta_box"] = {{"lower", {0.05}}, {"upper", {20.0}}};
    const ModelSpec spec = model_from_json(m).spec;
    const HybridPath p = simulate_path(spec, vec({1.5}), 5.0, 1e-3, 3);
    const FilteredStats s = e_step(p, spec, vec({0.7}));
    const double analytic = 0.7 * s.n_count(1, 0) / s.occupation(1, 0);
    CHECK(std::abs(m_step(s, spec)[0] - analytic) < 1e-12);
  }

  SUBCASE("grid oracle") {
    const ModelSpec spec = test::wonham_drift_only();
    const HybridPath p = simulate_path(spec, vec({1.0}), 5.0, 1e-3, 9);
    const FilteredStats s = e_step(p, spec, vec({0.6}));
    double best = -1e300, arg = 0.0;
    for (int g = 0; g <= 200; ++g) {
      const double x = 3.0 * g / 200.0;
      const double v = q_function(s, spec, vec({x}));
      if (v > best) best = v, arg = x;
    }
    CHECK(std::abs(m_step(s, spec)[0] - arg) <= 3.0 / 200.0);
  }
}

TEST_CASE("filtered drift statistics are linear in the basis") {
  const json a0 = affine(1.0, -0.5), a1 = affine(-1.0, 0.2);
  const json b0 = affine(0.3, 0.4), b1 = affine(0.1, -0.6);
  const json s0 = affine(1.3, -0.1), s1 = affine(-0.9, -0.4);
  const ModelSpec two = two_state_basis({{a0, a1}, {b0, b1}}, 0.4);
  const ModelSpec three = two_state_basis({{a0, a1}, {b0, b1}, {s0, s1}}, 0.4);
  const HybridPath p = simulate_path(two, vec({1.0, 0.5}), 3.0, 1e-3, 7);
  const FilteredStats s2 = e_step(p, two, vec({1.0, 0.5}));
  const FilteredStats s3 = e_step(p, three, vec({1.0, 0.5, 0.0}));
  CHECK(std::abs(s3.drift_lin[2] - (s3.drift_lin[0] + s3.drift_lin[1])) < 1e-10);
  CHECK(std::abs(s3.drift_lin[0] - s2.drift_lin[0]) < 1e-10);
  CHECK(s3.gram == s3.gram.transpose());
}

TEST_CASE("near-complete observation reproduces the complete statistics") {
  ModelSpec spec = test::scenario_spec("wonham");
  spec.epsilon = 0.01;
  const Vector theta = vec({1.0, 1.0, 1.0});
  const HybridPath p = simulate_path(spec, theta, 20.0, 1e-3, 5);
  const CompleteStats c = complete_stats(p, spec, theta);
  const FilteredStats f = e_step(p, spec, theta);
  CHECK(test::max_abs(f.n_count - c.n_count) < 5e-3 * c.n_count.maxCoeff());
  CHECK(test::max_abs(f.occupation - c.occupation) < 5e-3 * c.occupation.maxCoeff());
  CHECK(std::abs(f.gram(0, 0) - c.gram(0, 0)) < 5e-3 * c.gram(0, 0));
}

TEST_CASE("em_run") {
  const ModelSpec spec = test::scenario_spec("wonham");
  const Vector truth = vec({1.0, 1.0, 1.0});

  SUBCASE("likelihood never decreases") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const HybridPath p = simulate_path(spec, truth, 20.0, 1e-3, 40 + seed);
      const EMTrace tr = em_run(p, spec, vec({2.0, 0.5, 0.4}));
      CHECK(tr.iterates.front().loglik == 0.0);
      for (std::size_t n = 1; n < tr.iterates.size(); ++n)
        CHECK(tr.iterates[n].loglik >= tr.iterates[n - 1].loglik - 1e-9);
      CHECK(tr.stop_reason != StopReason::kNonIncrease);
    }
  }

  const HybridPath p = simulate_path(spec, truth, 20.0, 1e-3, 50);
  const PathBasis basis(p, spec);

  SUBCASE("fixed point converges in one iteration") {
    EMOptions tight;
    tight.tol = 1e-11;
    tight.max_iter = 2000;
    const EMTrace first = em_run(basis, vec({1.5, 1.5, 0.5}), tight);
    REQUIRE(first.converged);
    const Vector fixed = first.iterates.back().theta;
    const EMTrace again = em_run(basis, fixed);
    CHECK(again.converged);
    CHECK(again.stop_reason == StopReason::kTol);
    CHECK(again.iterates.size() == 2);
    CHECK((again.iterates.back().theta - fixed).cwiseAbs().maxCoeff() < 1e-6);

    // A stationary point of the partial likelihood: the optimizer cannot improve it.
    MLEOptions mo;
    mo.restarts = 0;
    mo.optimizer.initial_step = 0.01;
    const MLEResult r = mle_partial(basis, fixed, mo);
    CHECK(r.log_mass_at_hat - filter_log_mass(basis, fixed) < 1e-6);
    CHECK((r.theta_hat - fixed).cwiseAbs().maxCoeff() < 5e-3);
  }

  SUBCASE("iteration cap") {
    EMOptions o;
    o.max_iter = 2;
    const EMTrace tr = em_run(basis, vec({2.0, 0.5, 0.4}), o);
    CHECK(tr.stop_reason == StopReason::kMaxIter);
    CHECK_FALSE(tr.converged);
    CHECK(tr.iterates.size() == 3);
    CHECK(to_string(tr.stop_reason) == "max_iter");
  }
}
