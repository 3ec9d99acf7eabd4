#include "hybridfilt/partial_likelihood.hpp"

#include "hybridfilt/error.hpp"
#include "hybridfilt/rng.hpp"
#include "step_kernel.hpp"

#include <spdlog/spdlog.h>

namespace hybridfilt {

PartialLogLik log_lik_partial(const YPath& path, const ModelSpec& spec, const Vector& theta,
                              const Vector& theta0, const FilterOptions& options) {
  return log_lik_partial(PathBasis(path, spec), theta, theta0, options);
}

PartialLogLik log_lik_partial(const PathBasis& basis, const Vector& theta, const Vector& theta0,
                              const FilterOptions& options) {
  PartialLogLik ll;
  ll.log_mass_theta = filter_log_mass(basis, theta, options);
  ll.log_mass_theta0 =
      theta0 == theta ? ll.log_mass_theta : filter_log_mass(basis, theta0, options);
  ll.value = ll.log_mass_theta - ll.log_mass_theta0;
  return ll;
}

double innovations_loglik(const YPath& path, const ModelSpec& spec, const Vector& theta,
                          const Vector& theta0, const FilterOptions& options) {
  return innovations_loglik(PathBasis(path, spec), theta, theta0, options);
}

double innovations_loglik(const PathBasis& basis, const Vector& theta, const Vector& theta0,
                          const FilterOptions& options) {
  if (theta == theta0) {
    require_admissible(basis.spec(), theta);
    return 0.0;
  }
  const FilterTrajectory f1 = run_filter(basis, theta, options);
  const FilterTrajectory f0 = run_filter(basis, theta0, options);
  const int k = basis.k();
  const int d = basis.d();
  const detail::StepKernel k1(basis, theta, options.scheme);
  const detail::StepKernel k0(basis, theta0, options.scheme);
  std::vector<double> mh1(d), mh0(d), mu(d);
  double lin = 0.0, quad = 0.0;
  for (std::size_t m = 0; m < basis.steps(); ++m) {
    std::fill(mh1.begin(), mh1.end(), 0.0);
    std::fill(mh0.begin(), mh0.end(), 0.0);
    for (int i = 0; i < k; ++i) {
      const double p1 = f1.sigma_hat(static_cast<Eigen::Index>(m), i);
      const double p0 = f0.sigma_hat(static_cast<Eigen::Index>(m), i);
      k1.drift(m, i, mu.data());
      for (int c = 0; c < d; ++c) mh1[c] += mu[c] * p1;
      k0.drift(m, i, mu.data());
      for (int c = 0; c < d; ++c) mh0[c] += mu[c] * p0;
    }
    const double* dy = basis.dy(m);
    double n1 = 0.0, n0 = 0.0;
    for (int c = 0; c < d; ++c) {
      lin += (mh1[c] - mh0[c]) * dy[c];
      n1 += mh1[c] * mh1[c];
      n0 += mh0[c] * mh0[c];
    }
    quad += (n1 - n0) * basis.h(m);
  }
  const double inv_eps2 = 1.0 / (basis.spec().epsilon * basis.spec().epsilon);
  return lin * inv_eps2 - 0.5 * quad * inv_eps2;
}

MLEResult mle_partial(const YPath& path, const ModelSpec& spec, const Vector& theta_init,
                      const MLEOptions& options) {
  return mle_partial(PathBasis(path, spec), theta_init, options);
}

MLEResult mle_partial(const PathBasis& basis, const Vector& theta_init, const MLEOptions& options) {
  const ModelSpec& spec = basis.spec();
  require_admissible(spec, theta_init, "theta_init");
  auto objective = [&](const Vector& th) { return filter_log_mass(basis, th, options.filter); };

  MLEResult best;
  bool have = false;
  RandomStream rng(options.seed, StreamId::kRestarts);
  for (int run = 0; run <= options.restarts; ++run) {
    Vector start = theta_init;
    if (run > 0)
      for (Eigen::Index c = 0; c < start.size(); ++c) {
        const double scale = start[c] != 0.0 ? std::abs(start[c]) : 1.0;
        start[c] += options.jitter * scale * (2.0 * rng.uniform() - 1.0);
      }
    start = spec.box.project(start);
    const NelderMeadResult res = nelder_mead_maximize(objective, start, spec.box, options.optimizer);
    spdlog::debug("mle run {}: objective {:.10g} after {} iterations", run, res.value,
                  res.iterations);
    best.iterations += res.iterations;
    for (const auto& tp : res.trace)
      if (!have || tp.objective > best.trace.back().objective) {
        best.trace.push_back(tp);
        have = true;
      }
    if (run == 0 || res.value > best.log_mass_at_hat) {
      best.theta_hat = res.x;
      best.log_mass_at_hat = res.value;
      best.converged = res.converged;
    }
  }
  return best;
}

}  // namespace hybridfilt
