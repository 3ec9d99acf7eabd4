#pragma once

#include "hybridfilt/complete_likelihood.hpp"
#include "hybridfilt/filter.hpp"
#include "hybridfilt/stats.hpp"

#include <string>
#include <vector>

namespace hybridfilt {

/*!
 * Conditional expectations of the sufficient statistics given the observed
 * path under theta0, from one forward pass of the augmented recursions:
 *
 *   F_{m+1} = A_m F_m + source_m
 *
 * where A_m is the filter step operator. All vectors share the filter's
 * per-step rescaling; each statistic is the total mass of its vector at T.
 */
FilteredStats e_step(const YPath& path, const ModelSpec& spec, const Vector& theta0,
                     const FilterOptions& options = {});
FilteredStats e_step(const PathBasis& basis, const Vector& theta0,
                     const FilterOptions& options = {});

// Surrogate Q(theta, theta_ref) assembled from filtered statistics.
double q_function(const FilteredStats& stats, const ModelSpec& spec, const Vector& theta);

Vector m_step(const FilteredStats& stats, const ModelSpec& spec, MStepInfo* info = nullptr,
              const MStepOptions& options = {});

enum class StopReason { kTol, kMaxIter, kNonIncrease };
std::string to_string(StopReason reason);

struct EMIterate {
  Vector theta;
  double loglik = 0.0;  // L^Y(theta_n, theta_0)
  FilteredStats stats;
};

struct EMTrace {
  std::vector<EMIterate> iterates;
  bool converged = false;
  StopReason stop_reason = StopReason::kMaxIter;
};

struct EMOptions {
  int max_iter = 100;
  double tol = 1e-6;
  double decrease_slack = 1e-9;
  FilterOptions filter;
  MStepOptions m_step;
};

/*!
 * theta_{n+1} = m_step(e_step(theta_n)), starting from theta_init, which also
 * serves as the likelihood reference theta_0. Stops on |dtheta|_inf < tol, on
 * max_iter, or when the recorded likelihood drops by more than the slack.
 */
EMTrace em_run(const YPath& path, const ModelSpec& spec, const Vector& theta_init,
               const EMOptions& options = {});
EMTrace em_run(const PathBasis& basis, const Vector& theta_init, const EMOptions& options = {});

}  // namespace hybridfilt
