#pragma once

#include "hybridfilt/optimizer.hpp"
#include "hybridfilt/path.hpp"
#include "hybridfilt/stats.hpp"

namespace hybridfilt {

struct CompleteLogLik {
  double value = 0.0;
  double jump_part = 0.0;
  double drift_part = 0.0;
};

/*!
 * log dP^theta/dP^theta0 on a fully observed path, as left-point sums on the
 * path grid. Jump log-ratios use Y at the stored jump time; pairs whose rates
 * both vanish contribute nothing.
 */
CompleteLogLik log_lik_complete(const HybridPath& path, const ModelSpec& spec, const Vector& theta,
                                const Vector& theta0);

// The same log-ratio assembled from statistics taken at stats.theta_ref.
double stats_log_lik(const SufficientStats& stats, const ModelSpec& spec, const Vector& theta);

struct MStepInfo {
  bool closed_form = true;
  bool rank_deficient = false;  // minimum-norm drift solution returned
  int optimizer_iterations = 0;
};

struct MStepOptions {
  NelderMeadOptions optimizer{1e-12, 2000, 0.1};
  double rank_tol = 1e-10;  // relative pivot threshold for the drift system
};

/*!
 * Maximizer of stats_log_lik over the parameter box. Canonical families use
 * the closed form (pooled count/occupation ratios, normal equations for the
 * drift coordinates); other families fall back to Nelder-Mead.
 */
Vector mle_complete(const SufficientStats& stats, const ModelSpec& spec,
                    MStepInfo* info = nullptr, const MStepOptions& options = {});

}  // namespace hybridfilt
