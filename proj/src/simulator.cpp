#include "hybridfilt/simulator.hpp"

#include "hybridfilt/clocks.hpp"
#include "hybridfilt/error.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace hybridfilt {

std::size_t grid_steps(double horizon, double dt) {
  const double ratio = horizon / dt;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio))
    return static_cast<std::size_t>(std::max(1.0, nearest));
  return static_cast<std::size_t>(std::ceil(ratio));
}

HybridPath simulate_path(const ModelSpec& spec, const Vector& theta, double horizon, double dt,
                         std::uint64_t seed) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(horizon >= dt)) throw ConfigError("horizon must be at least dt");
  require_admissible(spec, theta);

  const ThetaModel model(spec, theta);
  const int k = spec.dims.k;
  const int d = spec.dims.d;
  const double eps = spec.epsilon;
  const std::size_t n = grid_steps(horizon, dt);

  RandomStream init_rng(seed, StreamId::kInitialState);
  RandomStream clock_rng(seed, StreamId::kClocks);
  RandomStream noise_rng(seed, StreamId::kNoise);

  HybridPath path;
  path.seed = seed;
  path.dt = dt;
  path.times.reserve(n + 1);
  path.x_idx.reserve(n + 1);
  std::vector<double> ys;
  ys.reserve((n + 1) * d);

  int x = sample_categorical(as_point(spec.init_dist), init_rng.uniform());
  Vector y = spec.y0;
  Vector y_end(d), y_mid(d), mu(d);
  std::vector<double> r0(k, 0.0), r1(k, 0.0);
  ClockSet clocks(k);
  clocks.restart(x, clock_rng);

  auto push = [&](double t, int state, const Vector& v) {
    path.times.push_back(t);
    path.x_idx.push_back(state);
    ys.insert(ys.end(), v.data(), v.data() + d);
  };
  auto rates_at = [&](int state, const Vector& v, std::vector<double>& out) {
    for (int j = 0; j < k; ++j) out[j] = j == state ? 0.0 : model.rate(state, j, as_point(v));
  };

  push(0.0, x, y);
  double t = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double t_next = m + 1 == n ? horizon : static_cast<double>(m + 1) * dt;
    const double h = t_next - t;
    model.drift(x, as_point(y), {mu.data(), static_cast<std::size_t>(d)});
    const double scale = eps * std::sqrt(h);
    for (int c = 0; c < d; ++c) y_end[c] = y[c] + mu[c] * h + scale * noise_rng.normal();

    // Switching inside [t, t_next]; Y moves along the straight segment.
    double seg_start = t;
    Vector y_start = y;
    while (true) {
      const double seg = t_next - seg_start;
      rates_at(x, y_start, r0);
      rates_at(x, y_end, r1);
      const auto fire = clocks.advance(r0, r1, seg);
      if (!fire) break;
      double tau = seg_start + fire->fraction * seg;
      if (tau <= seg_start) tau = std::nextafter(seg_start, t_next);
      if (tau >= t_next) {
        path.jumps.push_back({t_next, x, fire->target});
        x = fire->target;
        clocks.restart(x, clock_rng);
        break;
      }
      const double w = (tau - t) / h;
      y_mid = y + w * (y_end - y);
      path.jumps.push_back({tau, x, fire->target});
      x = fire->target;
      push(tau, x, y_mid);
      clocks.restart(x, clock_rng);
      seg_start = tau;
      y_start = y_mid;
    }
    push(t_next, x, y_end);
    t = t_next;
    y = y_end;
  }

  path.y = Eigen::Map<RowMatrix>(ys.data(), static_cast<Eigen::Index>(path.times.size()), d);
  return path;
}

std::vector<HybridPath> simulate_batch(const ModelSpec& spec, const Vector& theta,
                                       double horizon, double dt,
                                       const std::vector<std::uint64_t>& seeds, int jobs) {
  std::vector<HybridPath> out(seeds.size());
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
  if (workers == 1) {
    for (std::size_t s = 0; s < seeds.size(); ++s)
      out[s] = simulate_path(spec, theta, horizon, dt, seeds[s]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t s = next++; s < seeds.size(); s = next++) {
        try {
          out[s] = simulate_path(spec, theta, horizon, dt, seeds[s]);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

Matrix extract_counting(const HybridPath& path, int k) {
  Matrix n = Matrix::Zero(k, k);
  for (const auto& j : path.jumps) n(j.to, j.from) += 1.0;
  return n;
}

CompleteStats complete_stats(const HybridPath& path, const ModelSpec& spec, const Vector& theta0) {
  require_admissible(spec, theta0, "theta0");
  const int k = spec.dims.k;
  const int d = spec.dims.d;
  const int L = spec.dims.L;
  const ThetaModel model(spec, theta0);

  CompleteStats s = CompleteStats::zeros(k, L);
  s.theta_ref = theta0;
  s.n_count = extract_counting(path, k);

  Matrix basis(d, L);
  Vector mu0(d), dy(d);
  for (std::size_t m = 0; m + 1 < path.size(); ++m) {
    const double h = path.times[m + 1] - path.times[m];
    const int x = path.x_idx[m];
    const Point y = path.y_at(m);
    for (int j = 0; j < k; ++j)
      if (j != x) s.occupation(j, x) += model.rate(x, j, y) * h;
    if (L == 0) continue;
    model.drift(x, y, {mu0.data(), static_cast<std::size_t>(d)});
    for (int l = 0; l < L; ++l)
      spec.family.mu_basis[l].evaluate(x, y, {basis.col(l).data(), static_cast<std::size_t>(d)});
    dy = (path.y.row(static_cast<Eigen::Index>(m + 1)) - path.y.row(static_cast<Eigen::Index>(m)))
             .transpose();
    s.drift_lin += basis.transpose() * (dy - mu0 * h);
    for (int l = 0; l < L; ++l)
      for (int q = l; q < L; ++q) {
        const double g = basis.col(l).dot(basis.col(q)) * h;
        s.gram(l, q) += g;
        if (q != l) s.gram(q, l) += g;
      }
  }
  return s;
}

double estimate_epsilon(const YPath& path) {
  if (path.size() < 2) throw ConfigError("estimate_epsilon needs at least two grid points");
  const double horizon = path.horizon();
  if (!(horizon > 0.0)) throw ConfigError("estimate_epsilon needs a positive horizon");
  double qv = 0.0;
  for (std::size_t m = 0; m + 1 < path.size(); ++m)
    qv += (path.y.row(static_cast<Eigen::Index>(m + 1)) - path.y.row(static_cast<Eigen::Index>(m)))
              .squaredNorm();
  return std::sqrt(qv / (path.dim() * horizon));
}

}  // namespace hybridfilt
