#include "helpers.hpp"

#include "hybridfilt/em.hpp"
#include "hybridfilt/error.hpp"
#include "hybridfilt/partial_likelihood.hpp"

#include <doctest.h>

#include <random>

using namespace hybridfilt;
using test::vec;

TEST_CASE("partial likelihood at theta0 is exactly zero") {
  const ModelSpec spec = test::scenario_spec("state_dependent");
  const Vector theta = vec({1.4, 0.6, 0.8});
  const HybridPath p = simulate_path(spec, theta, 2.0, 1e-3, 5);
  CHECK(log_lik_partial(p, spec, theta, theta).value == 0.0);
  CHECK(innovations_loglik(p, spec, theta, theta) == 0.0);
}

TEST_CASE("single state partial likelihood is the Girsanov exponent") {
  const ModelSpec spec = test::constant_chain(1, 0.0, {{1.0}}, 1.0, vec({1.0}));
  const HybridPath p = simulate_path(spec, vec({0.5}), 3.0, 1e-3, 1);
  const double c = 1.2;
  const double expected = c * (p.y(p.size() - 1, 0) - p.y(0, 0)) - c * c * 3.0 / 2.0;
  CHECK(log_lik_partial(p, spec, vec({c}), vec({0.0})).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(innovations_loglik(p, spec, vec({c}), vec({0.0})) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("driftless innovations likelihood vanishes") {
  const ModelSpec spec = test::scenario_spec("ode");
  const HybridPath p = simulate_path(spec, vec({1.0, 1.0}), 2.0, 1e-3, 1);
  CHECK(innovations_loglik(p, spec, vec({2.0, 0.5}), vec({1.0, 1.0})) == 0.0);
}

TEST_CASE("reference independence and the three-point identity") {
  const ModelSpec spec = test::scenario_spec("recovery");
  const Vector truth = scenario("recovery").theta_true;
  const HybridPath p = simulate_path(spec, truth, 5.0, 1e-3, 14);
  const PathBasis basis(p, spec);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.3, 2.5);
  for (int r = 0; r < 5; ++r) {
    const Vector a = vec({u(gen), u(gen), u(gen) - 1.0});
    const Vector b = vec({u(gen), u(gen), u(gen) - 1.0});
    const Vector c = vec({u(gen), u(gen), u(gen) - 1.0});
    const double ab = log_lik_partial(basis, a, b).value;
    const double ac = log_lik_partial(basis, a, c).value;
    const double bc = log_lik_partial(basis, b, c).value;
    CHECK(std::abs(ab - (ac - bc)) < 1e-12);
  }
}

TEST_CASE("likelihood routes agree at fine resolution") {
  for (const char* name : {"wonham", "state_dependent"}) {
    CAPTURE(name);
    const ModelSpec spec = test::scenario_spec(name);
    const Vector truth = scenario(name).theta_true;
    const HybridPath p = simulate_path(spec, truth, 5.0, 1e-4, 21);
    const PathBasis basis(p, spec);
    const Vector theta = vec({1.6, 0.7, 0.8});
    const double direct = log_lik_partial(basis, theta, truth).value;
    const double innov = innovations_loglik(basis, theta, truth);
    MESSAGE(std::string(name), ": mass route ", direct, ", innovations route ", innov);
    CHECK(std::abs(direct - innov) < 5e-2);
  }
}

TEST_CASE("mle_partial") {
  const ModelSpec spec = test::wonham_drift_only();
  const HybridPath p = simulate_path(spec, vec({1.0}), 5.0, 1e-3, 6);
  const PathBasis basis(p, spec);

  SUBCASE("improves on the start and matches a grid search") {
    const Vector init = vec({0.4});
    const MLEResult r = mle_partial(basis, init);
    CHECK(r.log_mass_at_hat >= filter_log_mass(basis, init));
    CHECK(r.converged);
    double best = -1e300, arg = 0.0;
    for (int g = 0; g <= 100; ++g) {
      const double x = 3.0 * g / 100.0;
      const double v = filter_log_mass(basis, vec({x}));
      if (v > best) best = v, arg = x;
    }
    CHECK(std::abs(r.theta_hat[0] - arg) <= 0.03);
    CHECK(r.log_mass_at_hat >= best - 1e-9);
    for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].objective >= r.trace[t - 1].objective);
  }

  SUBCASE("deterministic") {
    const MLEResult a = mle_partial(basis, vec({2.0}));
    const MLEResult b = mle_partial(basis, vec({2.0}));
    CHECK(a.theta_hat == b.theta_hat);
    CHECK(a.trace.size() == b.trace.size());
  }

  SUBCASE("inadmissible start") {
    CHECK_THROWS_AS(mle_partial(basis, vec({-1.0})), ConfigError);
  }
}

TEST_CASE("filtered Q-function is dominated by the partial likelihood") {
  const ModelSpec spec = test::scenario_spec("state_dependent");
  const Vector theta0 = scenario("state_dependent").theta_true;
  const HybridPath p = simulate_path(spec, theta0, 5.0, 1e-3, 10);
  const PathBasis basis(p, spec);
  const FilteredStats s = e_step(basis, theta0);
  CHECK(q_function(s, spec, theta0) == 0.0);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int r = 0; r < 10; ++r) {
    const Vector theta = vec({u(gen), u(gen), u(gen) - 1.5});
    CHECK(q_function(s, spec, theta) <= log_lik_partial(basis, theta, theta0).value + 5e-3);
  }
}
