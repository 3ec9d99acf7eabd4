#pragma once

#include "hybridfilt/model_io.hpp"
#include "hybridfilt/scenarios.hpp"
#include "hybridfilt/simulator.hpp"

#include <cmath>

namespace test {

using namespace hybridfilt;

inline ModelSpec scenario_spec(const std::string& name) {
  return model_from_json(scenario(name).model).spec;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Constant-rate k-state chain with d=1; theta holds one multiplier per
// ordered pair (i != j) in row-major order of (from, to), then one drift
// coefficient per basis function.
inline ModelSpec constant_chain(int k, double rate, std::vector<std::vector<double>> drifts,
                                double eps, Vector init) {
  const int L = static_cast<int>(drifts.size());
  const int P = k * (k - 1);
  RateField q0;
  q0.bound = rate;
  q0.evaluate = [rate](int, int, Point) { return rate; };
  std::vector<DriftField> basis;
  for (const auto& per_state : drifts) {
    DriftField f;
    f.bound = 0.0;
    for (double v : per_state) f.bound = std::max(f.bound, std::abs(v));
    f.evaluate = [per_state](int i, Point, std::span<double> out) { out[0] = per_state[i]; };
    basis.push_back(std::move(f));
  }
  ParamMap map;
  map.rate.assign(static_cast<std::size_t>(k) * k, CoordinateMap{});
  int coord = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) map.rate[j + k * i] = CoordinateMap{coord++, Link::kIdentity, 1.0};
  for (int l = 0; l < L; ++l) map.drift.push_back(CoordinateMap{coord++, Link::kIdentity, 1.0});

  ModelSpec spec;
  spec.dims = {k, 1, L, std::max(1, P + L)};
  spec.family = make_family(k, std::move(q0), std::move(basis), std::move(map));
  spec.epsilon = eps;
  spec.init_dist = std::move(init);
  spec.y0 = Vector::Zero(1);
  spec.box.lower = Vector::Constant(spec.dims.p, -50.0);
  spec.box.upper = Vector::Constant(spec.dims.p, 50.0);
  for (int c = 0; c < P; ++c) spec.box.lower[c] = 1e-3;
  spec.validate();
  return spec;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

// Wonham model with both rates fixed at 1; theta = (drift amplitude).
inline ModelSpec wonham_drift_only() {
  nlohmann::json m = scenario("wonham").model;
  m["dims"]["p"] = 1;
  m["rate_params"] = nlohmann::json::array({{{"from", 0}, {"to", 1}, {"fixed", 1.0}},
                                            {{"from", 1}, {"to", 0}, {"fixed", 1.0}}});
  m["drift_params"] = nlohmann::json::array({{{"coord", 0}, {"link", "identity"}}});
  m["theta_box"] = {{"lower", {0.0}}, {"upper", {3.0}}};
  return model_from_json(m).spec;
}

// Wonham model with the 0->1 rate as the only parameter and the 1->0 rate and
// drift amplitude fixed at 1.
inline ModelSpec wonham_rate_only() {
  nlohmann::json m = scenario("wonham").model;
  m["dims"]["p"] = 1;
  m["rate_params"] = nlohmann::json::array({{{"from", 0}, {"to", 1}, {"coord", 0}},
                                            {{"from", 1}, {"to", 0}, {"fixed", 1.0}}});
  m["drift_params"] = nlohmann::json::array({{{"fixed", 1.0}}});
  m["theta_box"] = {{"lower", {0.05}}, {"upper", {5.0}}};
  return model_from_json(m).spec;
}

}  // namespace test
