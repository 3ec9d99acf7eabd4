#pragma once

#include "hybridfilt/path.hpp"

#include <utility>
#include <vector>

namespace hybridfilt {

/*!
 * Discretizations of the unnormalized filter recursion.
 *
 * kLattice: per step, multiply by the Gaussian emission weight
 *   exp(<mu_i, dY>/eps^2 - |mu_i|^2 dt/(2 eps^2)) and then by the
 *   positivity-preserving kernel K(j,i) = q_ji dt exp(q_ii dt),
 *   K(i,i) = exp(q_ii dt). Nonnegative by construction.
 * kItoEuler: sigma += diag(sigma) C^T dY / eps^2 + Q sigma dt, with negative
 *   entries clamped to a 1e-300 floor and counted.
 */
enum class Scheme { kLattice, kItoEuler };

enum class SmootherMethod {
  kForwardBackward,  // exact backward pass of the step operator
  kFrozenAfterTau,   // emission-only propagation after tau (no Q term)
};

struct FilterOptions {
  Scheme scheme = Scheme::kLattice;
};

inline constexpr double kPositivityFloor = 1e-300;

//---------------------------------------------------------------------------//
/*!
 * Theta-independent quantities along an observed path, evaluated once:
 * step lengths, increments, base rates q0_ji(Y_m) and basis drifts
 * mu^l(i, Y_m) at the left point of every step.
 */
class PathBasis {
 public:
  PathBasis(const YPath& path, const ModelSpec& spec);

  std::size_t steps() const { return h_.size(); }
  int k() const { return k_; }
  int d() const { return d_; }
  int L() const { return L_; }
  double h(std::size_t m) const { return h_[m]; }
  const double* dy(std::size_t m) const { return dy_.data() + m * d_; }
  // i -> j base rate at step m.
  double q0(std::size_t m, int from, int to) const { return q0_[m * k_ * k_ + to + k_ * from]; }
  // All base rates at step m, column-major k x k with entry (to, from).
  const double* q0_block(std::size_t m) const { return q0_.data() + m * k_ * k_; }
  // mu^l(i, Y_m), d components.
  const double* mu(std::size_t m, int l, int i) const {
    return mu_.data() + ((m * L_ + l) * k_ + i) * d_;
  }
  // <mu^l(i, Y_m), dY_m>
  double lin(std::size_t m, int l, int i) const { return lin_[(m * L_ + l) * k_ + i]; }
  // <mu^l(i, Y_m), mu^r(i, Y_m)>, stored once per unordered pair.
  double gram(std::size_t m, int l, int r, int i) const {
    if (l > r) std::swap(l, r);
    const int g = l * L_ - l * (l - 1) / 2 + (r - l);
    return gram_[(m * n_pairs_ + g) * k_ + i];
  }
  // Step-m blocks: lin as [l][i], gram as [pair][i] with pairs (l <= r) in row order.
  const double* lin_block(std::size_t m) const { return lin_.data() + m * L_ * k_; }
  const double* gram_block(std::size_t m) const { return gram_.data() + m * n_pairs_ * k_; }
  int n_pairs() const { return n_pairs_; }
  const std::vector<double>& times() const { return times_; }
  const ModelSpec& spec() const { return *spec_; }

 private:
  const ModelSpec* spec_;
  int k_, d_, L_, n_pairs_;
  std::vector<double> times_;
  std::vector<double> h_;
  std::vector<double> dy_;
  std::vector<double> q0_;
  std::vector<double> mu_;
  std::vector<double> lin_;
  std::vector<double> gram_;
};

struct FilterTrajectory {
  std::vector<double> times;
  RowMatrix sigma_hat;  // row m: unit-sum filter direction at t_m
  std::vector<double> log_mass;
  Vector theta;
  Scheme scheme = Scheme::kLattice;
  std::size_t clamp_events = 0;

  Vector normalized(std::size_t m) const { return sigma_hat.row(static_cast<Eigen::Index>(m)).transpose(); }
};

FilterTrajectory run_filter(const YPath& path, const ModelSpec& spec, const Vector& theta,
                            const FilterOptions& options = {});
FilterTrajectory run_filter(const PathBasis& basis, const Vector& theta,
                            const FilterOptions& options = {});

// Terminal log mass without storing the trajectory.
double filter_log_mass(const PathBasis& basis, const Vector& theta,
                       const FilterOptions& options = {});

double log_total_mass(const FilterTrajectory& traj);

/*!
 * Log mass from the scalar recursion d(mass) = eps^-2 <C sigma, dY> driven by
 * the trajectory's filter. Matches the summed vector recursion of the
 * Ito-Euler scheme to rounding.
 */
double scalar_mass_log(const FilterTrajectory& traj, const PathBasis& basis);

struct SmootherResult {
  double tau = 0.0;  // grid time actually used
  Vector probs;
  bool snapped = false;  // requested tau was off the grid
};

SmootherResult run_smoother(const YPath& path, const ModelSpec& spec, const Vector& theta,
                            double tau, SmootherMethod method = SmootherMethod::kForwardBackward,
                            const FilterOptions& options = {});

// Several query times sharing one stored filter trajectory.
std::vector<SmootherResult> run_smoother(const PathBasis& basis, const FilterTrajectory& traj,
                                         const std::vector<double>& taus,
                                         SmootherMethod method = SmootherMethod::kForwardBackward);

}  // namespace hybridfilt
