#include "hybridfilt/scenarios.hpp"

#include "hybridfilt/error.hpp"

namespace hybridfilt {

using nlohmann::json;

namespace {

json two_state(double eps, json rate01, json rate10, json drift0, json drift1, json init) {
  json rates = json::array({rate01, rate10});
  rates[0]["from"] = 0;
  rates[0]["to"] = 1;
  rates[1]["from"] = 1;
  rates[1]["to"] = 0;
  json m = {{"format_version", 1},
            {"dims", {{"k", 2}, {"d", 1}, {"L", 1}, {"p", 3}}},
            {"epsilon", eps},
            {"init_dist", init},
            {"y0", {0.0}},
            {"theta_box", {{"lower", {0.05, 0.05, -5.0}}, {"upper", {20.0, 20.0, 5.0}}}},
            {"base_rates", rates},
            {"drift_basis", json::array({{{"states", {drift0, drift1}}}})},
            {"rate_params",
             json::array({{{"from", 0}, {"to", 1}, {"coord", 0}, {"link", "identity"}},
                          {{"from", 1}, {"to", 0}, {"coord", 1}, {"link", "identity"}}})},
            {"drift_params", json::array({{{"coord", 2}, {"link", "identity"}}})}};
  return m;
}

json constant(double v) { return {{"family", "constant"}, {"value", v}}; }
json constant_vec(double v) { return {{"family", "constant"}, {"value", {v}}}; }

}  // namespace

std::vector<std::string> scenario_names() { return {"wonham", "state_dependent", "ode", "recovery"}; }

Scenario scenario(const std::string& name) {
  Scenario s;
  s.name = name;
  if (name == "wonham") {
    s.model = two_state(0.3, constant(1.0), constant(1.0), constant_vec(1.0), constant_vec(-1.0),
                        {0.5, 0.5});
    s.theta_true = Vector::Ones(3);
  } else if (name == "state_dependent") {
    const json quad = {{"family", "quadratic"}, {"c", 1.0}, {"b", {0.0}}, {"A", {{1.0}}},
                       {"clip", {0.0, 10.0}}};
    s.model = two_state(0.5, quad, constant(1.0), constant_vec(1.0), constant_vec(-1.0),
                        {0.5, 0.5});
    s.theta_true = Vector::Ones(3);
  } else if (name == "ode") {
    s.model = two_state(1.0, constant(1.0), constant(1.0), constant_vec(0.0), constant_vec(0.0),
                        {1.0, 0.0});
    s.model["dims"]["L"] = 0;
    s.model["dims"]["p"] = 2;
    s.model["drift_basis"] = json::array();
    s.model["drift_params"] = json::array();
    s.model["theta_box"] = {{"lower", {0.05, 0.05}}, {"upper", {20.0, 20.0}}};
    s.theta_true = Vector::Ones(2);
  } else if (name == "recovery") {
    const json quad = {{"family", "quadratic"}, {"c", 0.5}, {"b", {0.0}}, {"A", {{0.5}}},
                       {"clip", {0.0, 3.0}}};
    const json up = {{"family", "affine"}, {"c", {1.0}}, {"A", {{-1.0}}}, {"clip", {-3.0, 3.0}}};
    const json down = {{"family", "affine"}, {"c", {-1.0}}, {"A", {{-1.0}}}, {"clip", {-3.0, 3.0}}};
    s.model = two_state(0.5, quad, constant(1.0), up, down, {0.5, 0.5});
    s.theta_true = Vector(3);
    s.theta_true << 1.5, 0.8, 1.0;
    s.horizon = 200.0;
    s.dt = 1e-3;
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return s;
}

}  // namespace hybridfilt
