#pragma once

#include "hybridfilt/model.hpp"

namespace hybridfilt {

/*!
 * The four exponential-family statistics.
 *
 * n_count(j, i): number of i -> j transitions.
 * occupation(j, i): integral of q^{theta_ref}_ji(Y) while X = i.
 * drift_lin(l): integral of <mu^l, dY - mu^{theta_ref} dt>.
 * gram(l, m): integral of <mu^l, mu^m> dt.
 */
struct SufficientStats {
  Matrix n_count;
  Matrix occupation;
  Vector drift_lin;
  Matrix gram;
  Vector theta_ref;

  static SufficientStats zeros(int k, int L) {
    return {Matrix::Zero(k, k), Matrix::Zero(k, k), Vector::Zero(L), Matrix::Zero(L, L), Vector{}};
  }
};

using CompleteStats = SufficientStats;

// Conditional expectations of the statistics given the observed path.
struct FilteredStats : SufficientStats {
  double log_mass = 0.0;  // log total mass of the theta_ref filter
};

}  // namespace hybridfilt
