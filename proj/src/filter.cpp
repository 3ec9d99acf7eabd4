#include "hybridfilt/filter.hpp"

#include "hybridfilt/error.hpp"
#include "step_kernel.hpp"

#include <cmath>
#include <numeric>

namespace hybridfilt {

using detail::StepKernel;

PathBasis::PathBasis(const YPath& path, const ModelSpec& spec)
    : spec_(&spec),
      k_(spec.dims.k),
      d_(spec.dims.d),
      L_(spec.dims.L),
      n_pairs_(L_ * (L_ + 1) / 2),
      times_(path.times) {
  path.validate();
  if (path.dim() != d_)
    throw ConfigError("path dimension " + std::to_string(path.dim()) + " does not match model d=" +
                      std::to_string(d_));
  const std::size_t n = path.size() - 1;
  h_.resize(n);
  dy_.resize(n * d_);
  q0_.assign(n * k_ * k_, 0.0);
  mu_.assign(n * L_ * k_ * d_, 0.0);
  lin_.assign(n * L_ * k_, 0.0);
  gram_.assign(n * n_pairs_ * k_, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    h_[m] = path.times[m + 1] - path.times[m];
    for (int c = 0; c < d_; ++c)
      dy_[m * d_ + c] = path.y(static_cast<Eigen::Index>(m + 1), c) -
                        path.y(static_cast<Eigen::Index>(m), c);
    const Point y = path.y_at(m);
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < k_; ++j) {
        if (i == j) continue;
        const double q = spec.family.q0.evaluate(i, j, y);
        if (!std::isfinite(q))
          throw ModelEvaluationError("non-finite base rate " + std::to_string(i) + "->" +
                                     std::to_string(j) + " at t=" + format_double(path.times[m]));
        q0_[m * k_ * k_ + j + k_ * i] = q;
      }
    for (int l = 0; l < L_; ++l)
      for (int i = 0; i < k_; ++i) {
        double* out = mu_.data() + ((m * L_ + l) * k_ + i) * d_;
        spec.family.mu_basis[l].evaluate(i, y, {out, static_cast<std::size_t>(d_)});
        for (int c = 0; c < d_; ++c)
          if (!std::isfinite(out[c]))
            throw ModelEvaluationError("non-finite drift basis " + std::to_string(l) +
                                       " in state " + std::to_string(i) + " at t=" +
                                       format_double(path.times[m]));
      }
    const double* dy = dy_.data() + m * d_;
    for (int i = 0; i < k_; ++i) {
      int g = 0;
      for (int l = 0; l < L_; ++l) {
        const double* a = mu(m, l, i);
        double v = 0.0;
        for (int c = 0; c < d_; ++c) v += a[c] * dy[c];
        lin_[(m * L_ + l) * k_ + i] = v;
        for (int r = l; r < L_; ++r, ++g) {
          const double* b = mu(m, r, i);
          double w = 0.0;
          for (int c = 0; c < d_; ++c) w += a[c] * b[c];
          gram_[(m * n_pairs_ + g) * k_ + i] = w;
        }
      }
    }
  }
}

namespace {

double normalize_step(std::vector<double>& v, double shift, double& log_mass) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("filter mass is not positive");
  for (double& x : v) x /= s;
  log_mass += shift + std::log(s);
  return s;
}

}  // namespace

FilterTrajectory run_filter(const YPath& path, const ModelSpec& spec, const Vector& theta,
                            const FilterOptions& options) {
  return run_filter(PathBasis(path, spec), theta, options);
}

FilterTrajectory run_filter(const PathBasis& basis, const Vector& theta,
                            const FilterOptions& options) {
  const ModelSpec& spec = basis.spec();
  require_admissible(spec, theta);
  const int k = basis.k();
  const std::size_t n = basis.steps();

  FilterTrajectory traj;
  traj.times = basis.times();
  traj.theta = theta;
  traj.scheme = options.scheme;
  traj.sigma_hat.resize(static_cast<Eigen::Index>(n + 1), k);
  traj.log_mass.resize(n + 1);

  std::vector<double> sigma(spec.init_dist.data(), spec.init_dist.data() + k);
  std::vector<double> next(k);
  double log_mass = 0.0;
  for (int i = 0; i < k; ++i) traj.sigma_hat(0, i) = sigma[i];
  traj.log_mass[0] = 0.0;

  StepKernel kernel(basis, theta, options.scheme);
  for (std::size_t m = 0; m < n; ++m) {
    kernel.build(m);
    kernel.apply(sigma.data(), next.data());
    if (options.scheme == Scheme::kItoEuler) traj.clamp_events += StepKernel::clamp(next.data(), k);
    normalize_step(next, kernel.shift, log_mass);
    sigma.swap(next);
    for (int i = 0; i < k; ++i) traj.sigma_hat(static_cast<Eigen::Index>(m + 1), i) = sigma[i];
    traj.log_mass[m + 1] = log_mass;
  }
  return traj;
}

double filter_log_mass(const PathBasis& basis, const Vector& theta, const FilterOptions& options) {
  require_admissible(basis.spec(), theta);
  const int k = basis.k();
  std::vector<double> sigma(basis.spec().init_dist.data(), basis.spec().init_dist.data() + k);
  std::vector<double> next(k);
  double log_mass = 0.0;
  StepKernel kernel(basis, theta, options.scheme);
  for (std::size_t m = 0; m < basis.steps(); ++m) {
    kernel.build(m);
    kernel.apply(sigma.data(), next.data());
    if (options.scheme == Scheme::kItoEuler) StepKernel::clamp(next.data(), k);
    normalize_step(next, kernel.shift, log_mass);
    sigma.swap(next);
  }
  return log_mass;
}

double log_total_mass(const FilterTrajectory& traj) { return traj.log_mass.back(); }

double scalar_mass_log(const FilterTrajectory& traj, const PathBasis& basis) {
  const int k = basis.k();
  StepKernel kernel(basis, traj.theta, Scheme::kItoEuler);
  double log_mass = 0.0;
  for (std::size_t m = 0; m < basis.steps(); ++m) {
    kernel.build(m);
    // logw holds <mu_i, dY>/eps^2 under the Ito scheme.
    double growth = 1.0;
    for (int i = 0; i < k; ++i)
      growth += traj.sigma_hat(static_cast<Eigen::Index>(m), i) * kernel.logw[i];
    log_mass += std::log(growth);
  }
  return log_mass;
}

namespace {

std::size_t snap_index(const std::vector<double>& times, double tau, bool& snapped) {
  const double T = times.back();
  if (!(tau >= times.front() && tau <= T))
    throw ConfigError("smoothing time " + format_double(tau) + " outside [" +
                      format_double(times.front()) + ", " + format_double(T) + "]");
  const auto it = std::lower_bound(times.begin(), times.end(), tau);
  std::size_t idx = static_cast<std::size_t>(it - times.begin());
  if (idx == times.size()) idx = times.size() - 1;
  if (idx > 0 && std::abs(times[idx - 1] - tau) <= std::abs(times[idx] - tau)) --idx;
  snapped = times[idx] != tau;
  return idx;
}

}  // namespace

std::vector<SmootherResult> run_smoother(const PathBasis& basis, const FilterTrajectory& traj,
                                         const std::vector<double>& taus, SmootherMethod method) {
  const int k = basis.k();
  const std::size_t n = basis.steps();
  std::vector<SmootherResult> out(taus.size());
  std::vector<std::size_t> idx(taus.size());
  for (std::size_t q = 0; q < taus.size(); ++q) {
    idx[q] = snap_index(traj.times, taus[q], out[q].snapped);
    out[q].tau = traj.times[idx[q]];
  }

  auto finish = [&](std::size_t q, const std::vector<double>& weights) {
    const std::size_t m = idx[q];
    Vector p(k);
    if (m == n) {
      p = traj.normalized(n);
    } else {
      for (int i = 0; i < k; ++i) p[i] = traj.sigma_hat(static_cast<Eigen::Index>(m), i) * weights[i];
      const double s = p.sum();
      if (!(s > 0.0)) throw NumericalError("smoother mass is not positive");
      p /= s;
    }
    out[q].probs = std::move(p);
  };

  StepKernel kernel(basis, traj.theta, traj.scheme);
  if (method == SmootherMethod::kForwardBackward) {
    // beta_m = A_m^T beta_{m+1}; P(X_m | Y) is proportional to sigma_m * beta_m.
    std::vector<std::vector<std::size_t>> at(n + 1);
    for (std::size_t q = 0; q < taus.size(); ++q) at[idx[q]].push_back(q);
    std::vector<double> beta(k, 1.0), prev(k);
    for (std::size_t q : at[n]) finish(q, beta);
    for (std::size_t m = n; m-- > 0;) {
      kernel.build(m);
      kernel.apply_transpose(beta.data(), prev.data());
      if (traj.scheme == Scheme::kItoEuler) StepKernel::clamp(prev.data(), k);
      const double mx = *std::max_element(prev.begin(), prev.end());
      if (!(mx > 0.0)) throw NumericalError("smoother backward pass vanished");
      for (int i = 0; i < k; ++i) beta[i] = prev[i] / mx;
      for (std::size_t q : at[m]) finish(q, beta);
    }
    return out;
  }

  // Emission-only propagation from each tau to T.
  for (std::size_t q = 0; q < taus.size(); ++q) {
    std::vector<double> g(k);
    for (int i = 0; i < k; ++i) g[i] = traj.sigma_hat(static_cast<Eigen::Index>(idx[q]), i);
    for (std::size_t m = idx[q]; m < n; ++m) {
      kernel.build(m);
      for (int i = 0; i < k; ++i)
        g[i] *= traj.scheme == Scheme::kLattice ? std::exp(kernel.logw[i] - kernel.shift)
                                                 : std::max(1.0 + kernel.logw[i], kPositivityFloor);
      const double s = std::accumulate(g.begin(), g.end(), 0.0);
      if (!(s > 0.0)) throw NumericalError("smoother mass is not positive");
      for (double& v : g) v /= s;
    }
    if (idx[q] == n) {
      out[q].probs = traj.normalized(n);
    } else {
      out[q].probs = Eigen::Map<Vector>(g.data(), k);
    }
  }
  return out;
}

SmootherResult run_smoother(const YPath& path, const ModelSpec& spec, const Vector& theta,
                            double tau, SmootherMethod method, const FilterOptions& options) {
  const PathBasis basis(path, spec);
  const FilterTrajectory traj = run_filter(basis, theta, options);
  return run_smoother(basis, traj, {tau}, method).front();
}

}  // namespace hybridfilt
