#pragma once

#include "hybridfilt/filter.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hybridfilt::detail {

// One-step operator sigma_{m+1} = exp(shift) * A_m sigma_m at a fixed theta.
class StepKernel {
 public:
  StepKernel(const PathBasis& basis, const Vector& theta, Scheme scheme)
      : basis_(basis),
        scheme_(scheme),
        k_(basis.k()),
        d_(basis.d()),
        L_(basis.L()),
        inv_eps2_(1.0 / (basis.spec().epsilon * basis.spec().epsilon)),
        psi_(basis.spec().family.psi(theta)),
        A(k_ * k_, 0.0),
        rate(k_ * k_, 0.0),
        lin(k_, 0.0),
        norm2(k_, 0.0),
        logw(k_, 0.0) {
    const Matrix phi = basis.spec().family.phi(theta);
    phi_.assign(phi.data(), phi.data() + phi.size());
    for (int l = 0; l < L_; ++l)
      for (int r = l; r < L_; ++r) pair_coef_.push_back((l == r ? 1.0 : 2.0) * psi_[l] * psi_[r]);
  }

  void build(std::size_t m) {
    const double h = basis_.h(m);
    const double* q0 = basis_.q0_block(m);
    for (int i = 0; i < k_; ++i) {
      double out = 0.0;
      for (int j = 0; j < k_; ++j) {
        if (j == i) continue;
        const double q = phi_[j + k_ * i] * q0[j + k_ * i];
        rate[j + k_ * i] = q;
        out += q;
      }
      rate[i + k_ * i] = -out;
    }
    const double* lb = basis_.lin_block(m);
    const double* gb = basis_.gram_block(m);
    for (int i = 0; i < k_; ++i) {
      double l1 = 0.0, sq = 0.0;
      for (int l = 0; l < L_; ++l) l1 += psi_[l] * lb[l * k_ + i];
      for (std::size_t g = 0; g < pair_coef_.size(); ++g) sq += pair_coef_[g] * gb[g * k_ + i];
      lin[i] = l1;
      norm2[i] = sq;
      logw[i] = scheme_ == Scheme::kLattice ? (l1 - 0.5 * sq * h) * inv_eps2_ : l1 * inv_eps2_;
    }

    if (scheme_ == Scheme::kLattice) {
      shift = *std::max_element(logw.begin(), logw.end());
      for (int i = 0; i < k_; ++i) {
        const double stay_w = std::exp(logw[i] - shift + rate[i + k_ * i] * h);
        for (int j = 0; j < k_; ++j)
          A[j + k_ * i] = j == i ? stay_w : rate[j + k_ * i] * h * stay_w;
      }
    } else {
      shift = 0.0;
      for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j)
          A[j + k_ * i] = rate[j + k_ * i] * h + (j == i ? 1.0 + logw[i] : 0.0);
    }
  }

  // mu^theta(i, Y_m) into out (d entries).
  void drift(std::size_t m, int i, double* out) const {
    std::fill(out, out + d_, 0.0);
    for (int l = 0; l < L_; ++l) {
      const double* b = basis_.mu(m, l, i);
      for (int c = 0; c < d_; ++c) out[c] += psi_[l] * b[c];
    }
  }

  // out = A * in
  void apply(const double* in, double* out) const {
    for (int j = 0; j < k_; ++j) out[j] = 0.0;
    for (int i = 0; i < k_; ++i) {
      const double v = in[i];
      if (v == 0.0) continue;
      const double* col = A.data() + k_ * i;
      for (int j = 0; j < k_; ++j) out[j] += col[j] * v;
    }
  }

  // out = A^T * in
  void apply_transpose(const double* in, double* out) const {
    for (int i = 0; i < k_; ++i) {
      const double* col = A.data() + k_ * i;
      double s = 0.0;
      for (int j = 0; j < k_; ++j) s += col[j] * in[j];
      out[i] = s;
    }
  }

  // Clamps negative entries to the positivity floor; returns the count.
  static std::size_t clamp(double* v, int k) {
    std::size_t events = 0;
    for (int i = 0; i < k; ++i)
      if (v[i] < 0.0) {
        v[i] = kPositivityFloor;
        ++events;
      }
    return events;
  }

  Scheme scheme() const { return scheme_; }
  int k() const { return k_; }
  int d() const { return d_; }
  double inv_eps2() const { return inv_eps2_; }

 private:
  const PathBasis& basis_;
  Scheme scheme_;
  int k_, d_, L_;
  double inv_eps2_;
  std::vector<double> phi_;  // column-major k x k
  Vector psi_;
  std::vector<double> pair_coef_;  // psi_l psi_r, doubled off the diagonal

 public:
  std::vector<double> A;      // column-major k x k
  std::vector<double> rate;   // q_ji at theta, diagonal included
  std::vector<double> lin;    // <mu^theta(i), dY>
  std::vector<double> norm2;  // |mu^theta(i)|^2
  std::vector<double> logw;
  double shift = 0.0;
};

}  // namespace hybridfilt::detail
