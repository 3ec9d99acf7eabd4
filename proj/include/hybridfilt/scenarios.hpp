#pragma once

#include "hybridfilt/model_io.hpp"

#include <string>
#include <vector>

namespace hybridfilt {

// A named reference model with its true parameter and default resolution.
struct Scenario {
  std::string name;
  nlohmann::json model;
  Vector theta_true;
  double horizon = 5.0;
  double dt = 1e-4;
};

/*!
 * wonham:          k=2, d=1, constant unit rates, drifts +1/-1, eps=0.3.
 * state_dependent: rate 0->1 equal to 1+y^2 (clipped at 10), rate 1->0 equal
 *                  to 1, drifts +1/-1, eps=0.5.
 * ode:             k=2, no drift, unit rates, X_0 = 0.
 * recovery:        mean-reverting drifts clip(+1-y), clip(-1-y); rate 0->1
 *                  clip(0.5+0.5y^2, 0, 3), rate 1->0 equal to 1; eps=0.5;
 *                  theta* = (1.5, 0.8, 1.0).
 * Theta is (rate 0->1 multiplier, rate 1->0 multiplier[, drift coefficient]).
 */
Scenario scenario(const std::string& name);
std::vector<std::string> scenario_names();

}  // namespace hybridfilt
