#include "hybridfilt/complete_likelihood.hpp"

#include "hybridfilt/error.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <map>

namespace hybridfilt {

CompleteLogLik log_lik_complete(const HybridPath& path, const ModelSpec& spec, const Vector& theta,
                                const Vector& theta0) {
  require_admissible(spec, theta, "theta");
  require_admissible(spec, theta0, "theta0");
  if (path.dim() != spec.dims.d) throw ConfigError("path dimension does not match the model");
  const int k = spec.dims.k;
  const int d = spec.dims.d;
  const ThetaModel m1(spec, theta);
  const ThetaModel m0(spec, theta0);
  const double inv_eps2 = 1.0 / (spec.epsilon * spec.epsilon);

  CompleteLogLik ll;
  Vector mu1(d), mu0(d), dy(d);
  std::size_t next_jump = 0;
  for (std::size_t m = 0; m + 1 < path.size(); ++m) {
    const double h = path.times[m + 1] - path.times[m];
    const int x = path.x_idx[m];
    const Point y = path.y_at(m);
    for (int j = 0; j < k; ++j) {
      if (j == x) continue;
      ll.jump_part -= (m1.rate(x, j, y) - m0.rate(x, j, y)) * h;
    }
    m1.drift(x, y, {mu1.data(), static_cast<std::size_t>(d)});
    m0.drift(x, y, {mu0.data(), static_cast<std::size_t>(d)});
    dy = (path.y.row(static_cast<Eigen::Index>(m + 1)) - path.y.row(static_cast<Eigen::Index>(m)))
             .transpose();
    ll.drift_part += (mu1 - mu0).dot(dy) * inv_eps2 -
                     0.5 * (mu1.squaredNorm() - mu0.squaredNorm()) * h * inv_eps2;

    // Jumps land on grid points; the log-ratio is taken at the jump time.
    while (next_jump < path.jumps.size() && path.jumps[next_jump].time == path.times[m + 1]) {
      const auto& jr = path.jumps[next_jump++];
      const Point yj = path.y_at(m + 1);
      const double q1 = m1.rate(jr.from, jr.to, yj);
      const double q0 = m0.rate(jr.from, jr.to, yj);
      if (q0 == 0.0 && q1 == 0.0) continue;
      if (q0 == 0.0)
        throw SingularLikelihoodError("reference rate " + std::to_string(jr.from) + "->" +
                                      std::to_string(jr.to) + " vanishes at observed jump t=" +
                                      format_double(jr.time));
      ll.jump_part += q1 == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(q1 / q0);
    }
  }
  if (next_jump != path.jumps.size()) throw ConfigError("jump records are not on the path grid");
  ll.value = ll.jump_part + ll.drift_part;
  return ll;
}

double stats_log_lik(const SufficientStats& stats, const ModelSpec& spec, const Vector& theta) {
  const int k = spec.dims.k;
  const Matrix phi = spec.family.phi(theta);
  const Matrix phi0 = spec.family.phi(stats.theta_ref);
  double jump = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const double n = stats.n_count(j, i);
      const double occ = stats.occupation(j, i);
      if (n == 0.0 && occ == 0.0) continue;
      if (phi0(j, i) == 0.0) {
        if (phi(j, i) == 0.0) continue;
        throw SingularLikelihoodError("reference multiplier vanishes for an active transition");
      }
      const double ratio = phi(j, i) / phi0(j, i);
      if (n > 0.0)
        jump += ratio > 0.0 ? n * std::log(ratio) : -std::numeric_limits<double>::infinity();
      jump -= (ratio - 1.0) * occ;
    }
  double drift = 0.0;
  if (spec.dims.L > 0) {
    const Vector delta = spec.family.psi(theta) - spec.family.psi(stats.theta_ref);
    drift = (delta.dot(stats.drift_lin) - 0.5 * delta.dot(stats.gram * delta)) /
            (spec.epsilon * spec.epsilon);
  }
  return jump + drift;
}

Vector mle_complete(const SufficientStats& stats, const ModelSpec& spec, MStepInfo* info,
                    const MStepOptions& options) {
  require_admissible(spec, stats.theta_ref, "theta_ref");
  const int k = spec.dims.k;
  MStepInfo local;
  MStepInfo& out = info ? *info : local;
  out = MStepInfo{};

  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j && stats.occupation(j, i) <= 0.0 && stats.n_count(j, i) > 0.0)
        throw SingularStatisticsError("transition " + std::to_string(i) + "->" +
                                      std::to_string(j) + " observed with zero occupation");

  if (!spec.family.canonical || !spec.family.map) {
    out.closed_form = false;
    auto res = nelder_mead_maximize(
        [&](const Vector& th) { return stats_log_lik(stats, spec, th); }, stats.theta_ref,
        spec.box, options.optimizer);
    out.optimizer_iterations = res.iterations;
    return res.x;
  }

  const ParamMap& map = *spec.family.map;
  Vector theta = stats.theta_ref;
  const Matrix phi_ref = spec.family.phi(stats.theta_ref);

  // Rate coordinates: pooled ratio over every transition sharing the coordinate.
  std::map<int, std::pair<double, double>> pooled;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const auto& cm = map.rate[j + k * i];
      if (cm.coord < 0) continue;
      auto& [num, den] = pooled[cm.coord];
      num += stats.n_count(j, i);
      den += stats.occupation(j, i) / phi_ref(j, i);
    }
  for (const auto& [coord, nd] : pooled) {
    if (nd.second > 0.0) theta[coord] = nd.first / nd.second;
    else if (nd.first > 0.0) throw SingularStatisticsError("rate coordinate without occupation");
  }

  // Drift coordinates: normal equations in the free coordinates.
  std::vector<int> coords;
  for (const auto& cm : map.drift)
    if (cm.coord >= 0 && std::find(coords.begin(), coords.end(), cm.coord) == coords.end())
      coords.push_back(cm.coord);
  if (!coords.empty()) {
    const int L = spec.dims.L;
    const int s = static_cast<int>(coords.size());
    Matrix P = Matrix::Zero(L, s);
    for (int l = 0; l < L; ++l)
      for (int c = 0; c < s; ++c)
        if (map.drift[l].coord == coords[c]) P(l, c) = 1.0;
    const Matrix G = P.transpose() * stats.gram * P;
    const Vector rhs = P.transpose() * stats.drift_lin;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(G);
    cod.setThreshold(options.rank_tol);
    const Vector delta = cod.solve(rhs);
    if (cod.rank() < s) {
      out.rank_deficient = true;
      spdlog::warn("drift Gram matrix has rank {} < {}; using the minimum-norm solution",
                   cod.rank(), s);
    }
    for (int c = 0; c < s; ++c) theta[coords[c]] = stats.theta_ref[coords[c]] + delta[c];
  }
  return spec.box.project(theta);
}

}  // namespace hybridfilt
