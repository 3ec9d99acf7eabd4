#pragma once

#include "hybridfilt/path.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hybridfilt {

struct HmmForwardResult {
  RowMatrix probs;  // row m: P(X_m | Y_0..Y_m)
  double log_evidence = 0.0;  // relative to the driftless Brownian base measure
  std::size_t clipped = 0;    // transition entries clipped into [0, 1]
};

/*!
 * Forward algorithm for the discrete HMM on the observation grid: emission
 * dY_m ~ N(mu(i, Y_m) dt, eps^2 dt I) for the state at t_m, then transition
 * I + Q(Y_m) dt (clipped, columns renormalized). Throws StepTooLargeError when
 * dt * max exit rate >= 1.
 */
HmmForwardResult hmm_forward_oracle(const YPath& path, const ModelSpec& spec, const Vector& theta);

// Posterior marginals P(X_m | all Y) of the same HMM; row m per grid point.
RowMatrix hmm_smoother_oracle(const YPath& path, const ModelSpec& spec, const Vector& theta);

//---------------------------------------------------------------------------//
// Functionals of a hidden path for the weighted Monte-Carlo oracle.
struct Functional {
  enum class Kind { kFilterAt, kCount, kOccupation, kDriftLin, kGram, kLambdaMass };
  Kind kind = Kind::kLambdaMass;
  int a = 0;        // state i / target j / basis l, per kind
  int b = 0;        // from-state i for counts and occupations, basis m for gram
  double t = 0.0;   // time for kFilterAt (state at the grid point nearest t)

  static Functional filter_at(double t, int state) { return {Kind::kFilterAt, state, 0, t}; }
  static Functional count(int to, int from) { return {Kind::kCount, to, from, 0.0}; }
  static Functional occupation(int to, int from) { return {Kind::kOccupation, to, from, 0.0}; }
  static Functional drift_lin(int l) { return {Kind::kDriftLin, l, 0, 0.0}; }
  static Functional gram(int l, int m) { return {Kind::kGram, l, m, 0.0}; }
  static Functional lambda_mass() { return {}; }

  std::string name() const;
};

struct OracleEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_particles = 0;
};

struct OracleOptions {
  std::size_t n_particles = 100000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/*!
 * Weighted conditional Monte Carlo: hidden paths are simulated given the
 * frozen observation with the simulator's exponential clocks, weighted by
 * Lambda_T, and functionals are self-normalized weighted means with
 * delta-method standard errors. kLambdaMass is the plain mean of Lambda_T.
 * Occupation and the drift functionals use theta as the reference parameter.
 */
OracleEstimate mc_conditional_oracle(const YPath& path, const ModelSpec& spec, const Vector& theta,
                                     const Functional& functional, const OracleOptions& options);

// All functionals from one set of particles.
std::vector<OracleEstimate> mc_conditional_oracle(const YPath& path, const ModelSpec& spec,
                                                  const Vector& theta,
                                                  const std::vector<Functional>& functionals,
                                                  const OracleOptions& options);

// Self-normalized weighted mean of values with weights exp(log_w); delta-method
// standard error. Invariant to adding a constant to every log weight.
OracleEstimate self_normalized_mean(const std::vector<double>& log_w,
                                    const std::vector<double>& values);

// Sum with pairwise (cascade) summation.
double pairwise_sum(const double* v, std::size_t n);

}  // namespace hybridfilt
