#pragma once

#include "hybridfilt/filter.hpp"
#include "hybridfilt/optimizer.hpp"

#include <cstdint>

namespace hybridfilt {

struct PartialLogLik {
  double value = 0.0;
  double log_mass_theta = 0.0;
  double log_mass_theta0 = 0.0;
};

// L^Y(theta, theta0) as the difference of two filter log masses.
PartialLogLik log_lik_partial(const YPath& path, const ModelSpec& spec, const Vector& theta,
                              const Vector& theta0, const FilterOptions& options = {});
PartialLogLik log_lik_partial(const PathBasis& basis, const Vector& theta, const Vector& theta0,
                              const FilterOptions& options = {});

/*!
 * L^Y(theta, theta0) through the filtered drifts:
 * eps^-2 sum <mh - mh0, dY> - (2 eps^2)^-1 sum (|mh|^2 - |mh0|^2) dt with
 * mh = C^theta(Y_m) times the normalized filter at the left point.
 */
double innovations_loglik(const YPath& path, const ModelSpec& spec, const Vector& theta,
                          const Vector& theta0, const FilterOptions& options = {});
double innovations_loglik(const PathBasis& basis, const Vector& theta, const Vector& theta0,
                          const FilterOptions& options = {});

struct MLEOptions {
  NelderMeadOptions optimizer;  // tol 1e-8, max_iter 500
  int restarts = 3;             // jittered restarts after the run from theta_init
  double jitter = 0.1;          // relative half-width of the restart jitter
  std::uint64_t seed = 0;
  FilterOptions filter;
};

struct MLEResult {
  Vector theta_hat;
  double log_mass_at_hat = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;  // incumbent over all runs, nondecreasing
};

// Maximizes theta -> log total filter mass over the parameter box.
MLEResult mle_partial(const YPath& path, const ModelSpec& spec, const Vector& theta_init,
                      const MLEOptions& options = {});
MLEResult mle_partial(const PathBasis& basis, const Vector& theta_init,
                      const MLEOptions& options = {});

}  // namespace hybridfilt
