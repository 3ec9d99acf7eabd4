#include "hybridfilt/optimizer.hpp"

#include "hybridfilt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hybridfilt {

namespace {

double finite_or_lowest(double v) {
  return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
}

}  // namespace

NelderMeadResult nelder_mead_maximize(const std::function<double(const Vector&)>& f,
                                      const Vector& x0, const ParamBox& box,
                                      const NelderMeadOptions& options) {
  const int n = static_cast<int>(x0.size());
  if (box.lower.size() != n || box.upper.size() != n)
    throw ConfigError("optimizer box has the wrong dimension");
  for (int i = 0; i < n; ++i)
    if (!(box.lower[i] <= box.upper[i])) throw ConfigError("optimizer box is empty");

  NelderMeadResult res;
  auto eval = [&](const Vector& x) {
    ++res.evaluations;
    return finite_or_lowest(f(x));
  };

  std::vector<Vector> simplex(n + 1);
  std::vector<double> value(n + 1);
  simplex[0] = box.project(x0);
  for (int i = 0; i < n; ++i) {
    Vector v = simplex[0];
    double step = options.initial_step * (v[i] != 0.0 ? std::abs(v[i]) : 1.0);
    if (v[i] + step > box.upper[i]) step = -step;
    v[i] += step;
    simplex[i + 1] = box.project(v);
  }
  for (int i = 0; i <= n; ++i) value[i] = eval(simplex[i]);
  if (std::none_of(value.begin(), value.end(), [](double v) { return std::isfinite(v); }))
    throw NumericalError("objective is not finite at any initial simplex vertex");

  std::vector<int> order(n + 1);
  auto sort_vertices = [&] {
    std::iota(order.begin(), order.end(), 0);
    // Best first; ties keep the earlier vertex first.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return value[a] > value[b]; });
    std::vector<Vector> s(n + 1);
    std::vector<double> v(n + 1);
    for (int i = 0; i <= n; ++i) {
      s[i] = std::move(simplex[order[i]]);
      v[i] = value[order[i]];
    }
    simplex.swap(s);
    value.swap(v);
  };

  sort_vertices();
  while (true) {
    const double spread = value[0] - value[n];
    if (std::isfinite(spread) && spread < options.tol) {
      res.converged = true;
      break;
    }
    if (res.iterations >= options.max_iter) break;
    ++res.iterations;

    Vector centroid = Vector::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i];
    centroid /= n;

    const Vector xr = box.project(centroid + (centroid - simplex[n]));
    const double fr = eval(xr);
    if (fr > value[0]) {
      const Vector xe = box.project(centroid + 2.0 * (centroid - simplex[n]));
      const double fe = eval(xe);
      if (fe > fr) {
        simplex[n] = xe;
        value[n] = fe;
      } else {
        simplex[n] = xr;
        value[n] = fr;
      }
    } else if (fr > value[n - 1]) {
      simplex[n] = xr;
      value[n] = fr;
    } else {
      const bool outside = fr > value[n];
      const Vector xc = outside ? box.project(centroid + 0.5 * (xr - centroid))
                                : box.project(centroid + 0.5 * (simplex[n] - centroid));
      const double fc = eval(xc);
      if (fc > (outside ? fr : value[n])) {
        simplex[n] = xc;
        value[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          simplex[i] = box.project(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
          value[i] = eval(simplex[i]);
        }
      }
    }
    sort_vertices();
    res.trace.push_back({simplex[0], value[0]});
  }

  res.x = simplex[0];
  res.value = value[0];
  return res;
}

}  // namespace hybridfilt
