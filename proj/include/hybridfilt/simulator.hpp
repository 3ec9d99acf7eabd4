#pragma once

#include "hybridfilt/path.hpp"
#include "hybridfilt/stats.hpp"

#include <cstdint>
#include <vector>

namespace hybridfilt {

/*!
 * Simulates (X, Y) under P^theta on the uniform grid m*dt (last point at T).
 *
 * Y follows Euler-Maruyama with the drift of the state at the start of each
 * step; switching uses competing exponential clocks with trapezoid hazards.
 * A clock firing inside a step inserts a grid point at the firing time with
 * linearly interpolated Y; the clocks restart after every jump.
 */
HybridPath simulate_path(const ModelSpec& spec, const Vector& theta, double horizon, double dt,
                         std::uint64_t seed);

// One path per seed; `jobs` worker threads, results independent of jobs.
std::vector<HybridPath> simulate_batch(const ModelSpec& spec, const Vector& theta,
                                       double horizon, double dt,
                                       const std::vector<std::uint64_t>& seeds, int jobs = 1);

// Number of uniform steps used for horizon/dt.
std::size_t grid_steps(double horizon, double dt);

// Entry (j, i) counts i -> j jumps.
Matrix extract_counting(const HybridPath& path, int k);

// Left-point sums on the path grid at the reference parameter theta0.
CompleteStats complete_stats(const HybridPath& path, const ModelSpec& spec, const Vector& theta0);

// sqrt(sum |dY|^2 / (d T)).
double estimate_epsilon(const YPath& path);

}  // namespace hybridfilt
