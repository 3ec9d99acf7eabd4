#pragma once

#include "hybridfilt/rng.hpp"

#include <optional>
#include <span>
#include <vector>

namespace hybridfilt {

//---------------------------------------------------------------------------//
/*!
 * Competing exponential clocks for the transitions out of the current state.
 *
 * Each target j != state carries a unit-exponential threshold E_j and an
 * accumulated hazard; the first clock whose hazard reaches its threshold
 * fires. Hazards are integrated with the trapezoid rule over a step, so the
 * firing time inside a step is found by linear interpolation.
 */
class ClockSet {
 public:
  struct Firing {
    int target = -1;
    double fraction = 1.0;  // position inside the step, in (0, 1]
  };

  explicit ClockSet(int k) : threshold_(k, 0.0), hazard_(k, 0.0) {}

  // Fresh thresholds for every target other than `state`, in index order.
  void restart(int state, RandomStream& rng) {
    state_ = state;
    for (int j = 0; j < static_cast<int>(threshold_.size()); ++j) {
      hazard_[j] = 0.0;
      threshold_[j] = j == state ? 0.0 : rng.exponential();
    }
  }

  /*!
   * Advance all clocks over a step of length h with rates r0 at the start and
   * r1 at the end (indexed by target). Returns the earliest firing, ties to
   * the smallest target; hazards are left unchanged after a firing since the
   * caller restarts the clocks.
   */
  std::optional<Firing> advance(std::span<const double> r0, std::span<const double> r1,
                                double h) {
    std::optional<Firing> best;
    const int k = static_cast<int>(threshold_.size());
    for (int j = 0; j < k; ++j) {
      if (j == state_) continue;
      const double inc = 0.5 * (r0[j] + r1[j]) * h;
      const double remaining = threshold_[j] - hazard_[j];
      if (inc > 0.0 && inc >= remaining) {
        const double s = remaining / inc;
        if (!best || s < best->fraction) best = Firing{j, s};
      }
    }
    if (best) return best;
    for (int j = 0; j < k; ++j)
      if (j != state_) hazard_[j] += 0.5 * (r0[j] + r1[j]) * h;
    return std::nullopt;
  }

  int state() const { return state_; }

 private:
  int state_ = 0;
  std::vector<double> threshold_;
  std::vector<double> hazard_;
};

// Inverse-CDF draw from a probability vector; u in [0, 1).
inline int sample_categorical(std::span<const double> probs, double u) {
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last;
}

}  // namespace hybridfilt
