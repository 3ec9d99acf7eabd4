#pragma once

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace hybridfilt {

struct VerifyCheck {
  std::string name;
  double distance = 0.0;
  double tolerance = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();  // MC checks only
  bool pass = false;
};

struct VerifyReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<VerifyCheck> checks;
  bool pass = false;

  nlohmann::json to_json() const;
};

struct VerifyOptions {
  double dt = 1e-4;          // filter-vs-HMM resolution
  double horizon = 5.0;
  double mc_dt = 1e-3;       // Monte-Carlo oracle resolution
  double mc_horizon = 2.0;
  std::size_t particles = 20000;
  int jobs = 1;
};

// Cross-checks the filter, smoother and E-step of a built-in scenario
// against the discrete-HMM and weighted Monte-Carlo oracles.
VerifyReport run_verification(const std::string& scenario, std::uint64_t seed,
                              const VerifyOptions& options = {});

}  // namespace hybridfilt
