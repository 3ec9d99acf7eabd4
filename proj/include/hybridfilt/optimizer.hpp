#pragma once

#include "hybridfilt/model.hpp"

#include <functional>
#include <vector>

namespace hybridfilt {

struct NelderMeadOptions {
  double tol = 1e-8;          // stop when max - min objective over the simplex < tol
  int max_iter = 500;
  double initial_step = 0.1;  // relative to |x0_i| (absolute when x0_i == 0)
};

struct TracePoint {
  Vector theta;
  double objective;
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;  // incumbent after each iteration
};

/*!
 * Maximizes f over a box with the Nelder-Mead simplex method (reflection 1,
 * expansion 2, contraction 0.5, shrink 0.5). Every trial point is projected
 * into the box; non-finite objective values rank below all finite ones.
 */
NelderMeadResult nelder_mead_maximize(const std::function<double(const Vector&)>& f,
                                      const Vector& x0, const ParamBox& box,
                                      const NelderMeadOptions& options = {});

}  // namespace hybridfilt
