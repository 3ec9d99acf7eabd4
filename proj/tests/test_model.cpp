#include "helpers.hpp"

#include "hybridfilt/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace hybridfilt;
using nlohmann::json;
using test::vec;

namespace {

// Two states, q0_{0->1}(y) = 1 + y^2, q0_{1->0}(y) = 1, phi = (theta_0, theta_1).
json rate_model_json() {
  return {{"dims", {{"k", 2}, {"d", 1}, {"L", 0}, {"p", 2}}},
          {"epsilon", 1.0},
          {"init_dist", {0.5, 0.5}},
          {"theta_box", {{"lower", {0.0, 0.0}}, {"upper", {10.0, 10.0}}}},
          {"base_rates",
           {{{"from", 0}, {"to", 1}, {"family", "quadratic"}, {"c", 1.0}, {"A", {{1.0}}},
             {"bound", 100.0}},
            {{"from", 1}, {"to", 0}, {"family", "constant"}, {"value", 1.0}}}},
          {"rate_params",
           {{{"from", 0}, {"to", 1}, {"coord", 0}}, {{"from", 1}, {"to", 0}, {"coord", 1}}}}};
}

// d=2, k=2, L=2 with distinct constant basis vectors.
json drift_model_json() {
  auto cv = [](double a, double b) { return json{{"family", "constant"}, {"value", {a, b}}}; };
  return {{"dims", {{"k", 2}, {"d", 2}, {"L", 2}, {"p", 2}}},
          {"epsilon", 1.0},
          {"init_dist", {1.0, 0.0}},
          {"theta_box", {{"lower", {-5.0, -5.0}}, {"upper", {5.0, 5.0}}}},
          {"drift_basis",
           {{{"states", {cv(1.0, 2.0), cv(-3.0, 0.5)}}}, {{"states", {cv(0.25, -1.0), cv(4.0, 2.0)}}}}},
          {"drift_params", {{{"coord", 0}}, {{"coord", 1}}}}};
}

}  // namespace

TEST_CASE("build_q_matrix: constant symmetric rates") {
  const ModelSpec spec = test::scenario_spec("wonham");
  const Matrix q = build_q_matrix(spec, vec({1, 1, 1}), as_point(vec({0.3})));
  Matrix expected(2, 2);
  expected << -1, 1, 1, -1;
  CHECK(q == expected);
}

TEST_CASE("build_q_matrix: single state is the zero matrix") {
  auto spec = test::constant_chain(1, 1.0, {}, 1.0, vec({1.0}));
  const Matrix q = build_q_matrix(spec, vec({0.0}), as_point(vec({2.0})));
  CHECK(q.rows() == 1);
  CHECK(q(0, 0) == 0.0);
}

TEST_CASE("build_q_matrix: product form with state-dependent base rate") {
  const ModelSpec spec = model_from_json(rate_model_json()).spec;
  const Matrix q = build_q_matrix(spec, vec({2, 3}), as_point(vec({1.0})));
  Matrix expected(2, 2);
  expected << -4, 3, 4, -3;
  CHECK(q == expected);
}

TEST_CASE("build_q_matrix: columns sum to zero exactly") {
  const ModelSpec spec = model_from_json(rate_model_json()).spec;
  for (double y : {-3.7, -0.1, 0.0, 0.123456789, 2.5}) {
    const Matrix q = build_q_matrix(spec, vec({1.7, 0.3}), as_point(vec({y})));
    for (int i = 0; i < 2; ++i) {
      CHECK(q.col(i).sum() == 0.0);
      for (int j = 0; j < 2; ++j)
        if (i != j) CHECK(q(j, i) >= 0.0);
    }
  }
  auto chain = test::constant_chain(4, 0.37, {}, 1.0, Vector::Constant(4, 0.25));
  Vector theta(12);
  for (int c = 0; c < 12; ++c) theta[c] = 0.1 + 0.713 * c;
  const Matrix q = build_q_matrix(chain, theta, as_point(vec({0.0})));
  for (int i = 0; i < 4; ++i) CHECK(q.col(i).sum() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("build_q_matrix: non-finite rate names the transition") {
  json j = rate_model_json();
  j["base_rates"][0] = {{"from", 0}, {"to", 1}, {"family", "constant"}, {"value", 1.0}};
  const ModelSpec spec = model_from_json(j).spec;
  const double inf = std::numeric_limits<double>::infinity();
  try {
    build_q_matrix(spec, vec({inf, 1.0}), as_point(vec({0.5})));
    FAIL("expected ModelEvaluationError");
  } catch (const ModelEvaluationError& e) {
    CHECK(std::string(e.what()).find("0 -> 1") != std::string::npos);
    CHECK(std::string(e.what()).find("0.5") != std::string::npos);
  }
}

TEST_CASE("rates depend on theta only through phi") {
  json j = rate_model_json();
  j["dims"]["p"] = 3;
  j["theta_box"] = {{"lower", {0, 0, -9}}, {"upper", {9, 9, 9}}};
  const ModelSpec spec = model_from_json(j).spec;
  const Point y = as_point(vec({0.7}));
  CHECK(build_q_matrix(spec, vec({1.5, 2.0, -3.0}), y) ==
        build_q_matrix(spec, vec({1.5, 2.0, 8.0}), y));
}

TEST_CASE("build_c_matrix: zero basis") {
  const ModelSpec spec = model_from_json(rate_model_json()).spec;
  const Matrix c = build_c_matrix(spec, vec({1, 1}), as_point(vec({0.0})));
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 2);
  CHECK(c.isZero(0.0));
}

TEST_CASE("build_c_matrix: linear in psi") {
  const ModelSpec wonham = test::scenario_spec("wonham");
  const Matrix c = build_c_matrix(wonham, vec({1, 1, 0.5}), as_point(vec({0.0})));
  CHECK(c(0, 0) == 0.5);
  CHECK(c(0, 1) == -0.5);

  const ModelSpec spec = model_from_json(drift_model_json()).spec;
  const Point y = as_point(vec({0.1, 0.2}));
  const double a = 0.7, b = -1.3;
  const Matrix cab = build_c_matrix(spec, vec({a, b}), y);
  // Independent summation over l.
  const double mu[2][2][2] = {{{1.0, 2.0}, {-3.0, 0.5}}, {{0.25, -1.0}, {4.0, 2.0}}};
  for (int j = 0; j < 2; ++j)
    for (int r = 0; r < 2; ++r)
      CHECK(cab(r, j) == doctest::Approx(a * mu[0][j][r] + b * mu[1][j][r]).epsilon(1e-15));

  const Vector p1 = vec({0.3, 1.1}), p2 = vec({-2.0, 0.4});
  const double s = 1.7, t = -0.6;
  const Matrix lhs = build_c_matrix(spec, s * p1 + t * p2, y);
  const Matrix rhs = s * build_c_matrix(spec, p1, y) + t * build_c_matrix(spec, p2, y);
  CHECK(test::max_abs(lhs - rhs) <= 1e-12 * test::max_abs(rhs));
}

TEST_CASE("validate_model") {
  const ModelSpec wonham = test::scenario_spec("wonham");
  std::vector<Vector> grid;
  for (int i = 0; i < 100; ++i) grid.push_back(vec({-5.0 + 0.1 * i}));
  CHECK(validate_model(wonham, grid, {vec({1, 1, 1})}).passed());

  json j = rate_model_json();
  j["base_rates"][0] = {{"from", 0}, {"to", 1}, {"family", "affine"}, {"c", 0.0}, {"b", {1.0}},
                        {"bound", 10.0}};
  const ModelSpec signed_rate = model_from_json(j).spec;
  const auto report = validate_model(signed_rate, {vec({-1.0}), vec({1.0})}, {vec({1, 1})});
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].kind == Violation::Kind::kNegativeRate);
  CHECK(report.violations[0].detail.find("-1") != std::string::npos);

  const ModelSpec spec = model_from_json(rate_model_json()).spec;
  const auto phi_report = validate_model(spec, {vec({0.0})}, {vec({0.0, 1.0})});
  REQUIRE(phi_report.violations.size() == 1);
  CHECK(phi_report.violations[0].kind == Violation::Kind::kPhiNonPositive);

  const auto bound_report = validate_model(spec, {vec({20.0})}, {vec({1.0, 1.0})});
  REQUIRE(bound_report.violations.size() == 1);
  CHECK(bound_report.violations[0].kind == Violation::Kind::kRateBound);

  CHECK_THROWS_AS(validate_model(spec, {}, {vec({1, 1})}), ConfigError);
}

TEST_CASE("model spec preconditions") {
  json j = rate_model_json();
  j["init_dist"] = {0.5, 0.5 + 1e-9};
  CHECK_THROWS_AS(model_from_json(j), ConfigError);
  j = rate_model_json();
  j["epsilon"] = 0.0;
  CHECK_THROWS_AS(model_from_json(j), ConfigError);
  j = rate_model_json();
  j["theta_box"]["lower"] = {11.0, 0.0};
  CHECK_THROWS_AS(model_from_json(j), ConfigError);
  j = rate_model_json();
  j["base_rates"][0].erase("bound");
  CHECK_THROWS_AS(model_from_json(j), ConfigError);  // unbounded quadratic
  j = rate_model_json();
  j["base_rates"][1]["version"] = 2;
  CHECK_THROWS_AS(model_from_json(j), ConfigError);
  j = rate_model_json();
  j["base_rates"][1]["family"] = "spline";
  CHECK_THROWS_AS(model_from_json(j), ConfigError);

  const ModelSpec spec = model_from_json(rate_model_json()).spec;
  CHECK_THROWS_AS(require_admissible(spec, vec({1.0})), ConfigError);
  CHECK_THROWS_AS(require_admissible(spec, vec({1.0, 11.0})), ConfigError);
  CHECK_NOTHROW(require_admissible(spec, vec({1.0, 10.0})));
}

TEST_CASE("field families") {
  json j = rate_model_json();
  j["base_rates"][0] = {{"from", 0},
                        {"to", 1},
                        {"family", "tabulated"},
                        {"grid", {-1.0, 0.0, 2.0}},
                        {"values", {0.0, 1.0, 5.0}}};
  j["base_rates"][1] = {{"from", 1}, {"to", 0}, {"family", "affine"}, {"c", 1.0}, {"b", {2.0}},
                        {"clip", {0.5, 3.0}}};
  const ModelSpec spec = model_from_json(j).spec;
  const auto& q0 = spec.family.q0;
  CHECK(q0.bound == 5.0);
  CHECK(q0.evaluate(0, 1, as_point(vec({-2.0}))) == 0.0);
  CHECK(q0.evaluate(0, 1, as_point(vec({-0.5}))) == doctest::Approx(0.5));
  CHECK(q0.evaluate(0, 1, as_point(vec({1.0}))) == doctest::Approx(3.0));
  CHECK(q0.evaluate(0, 1, as_point(vec({9.0}))) == 5.0);
  CHECK(q0.evaluate(1, 0, as_point(vec({-4.0}))) == 0.5);
  CHECK(q0.evaluate(1, 0, as_point(vec({0.25}))) == doctest::Approx(1.5));
  CHECK(q0.evaluate(1, 0, as_point(vec({4.0}))) == 3.0);

  // Vector affine with clip and per-component fields.
  const ModelSpec rec = test::scenario_spec("recovery");
  double out = 0.0;
  rec.family.mu_basis[0].evaluate(0, as_point(vec({0.25})), {&out, 1});
  CHECK(out == doctest::Approx(0.75));
  rec.family.mu_basis[0].evaluate(1, as_point(vec({-10.0})), {&out, 1});
  CHECK(out == 3.0);
  CHECK(rec.family.canonical);
  CHECK(rec.family.q0.evaluate(0, 1, as_point(vec({2.0}))) == doctest::Approx(2.5));
  CHECK(rec.family.q0.evaluate(0, 1, as_point(vec({5.0}))) == 3.0);
}

TEST_CASE("canonical flag") {
  json j = drift_model_json();
  CHECK(model_from_json(j).spec.family.canonical);
  j["drift_params"][1]["link"] = "exp";
  CHECK_FALSE(model_from_json(j).spec.family.canonical);
  j = rate_model_json();
  j["dims"]["L"] = 1;
  j["drift_basis"] = {{{"states", {{{"family", "constant"}, {"value", {1.0}}},
                                   {{"family", "constant"}, {"value", {-1.0}}}}}}};
  j["drift_params"] = {{{"coord", 0}}};  // shared with a rate coordinate
  CHECK_FALSE(model_from_json(j).spec.family.canonical);
}

TEST_CASE("theta files and hashing") {
  CHECK(theta_from_json(json::parse("[1, 2.5]")) == vec({1, 2.5}));
  CHECK(theta_from_json(json::parse(R"({"theta": [3]})")) == vec({3}));
  CHECK_THROWS_AS(theta_from_json(json::parse(R"({"x": 1})")), ConfigError);
  CHECK(hash_bytes("") == 0xcbf29ce484222325ull);
  CHECK(hash_bytes("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hash_json(json::parse(R"({"b":1,"a":2})")) == hash_json(json::parse(R"({"a":2,"b":1})")));
  CHECK(hex64(255) == "00000000000000ff");
}

TEST_CASE("shipped configuration files match the built-in scenarios") {
  const std::filesystem::path dir = std::filesystem::path(HYBRIDFILT_SOURCE_DIR) / "configs";
  for (const auto& name : scenario_names()) {
    const Scenario sc = scenario(name);
    const json file = read_json_file(dir / (name + ".json"));
    CHECK_MESSAGE(file == sc.model, name);
    CHECK(load_theta(dir / (name + "_theta.json")) == sc.theta_true);
  }
}
