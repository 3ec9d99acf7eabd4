#pragma once

#include "hybridfilt/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hybridfilt {

// Observed continuous component on a time grid; row m of `y` is Y(t_m).
struct YPath {
  std::vector<double> times;
  RowMatrix y;

  std::size_t size() const { return times.size(); }
  int dim() const { return static_cast<int>(y.cols()); }
  double horizon() const { return times.empty() ? 0.0 : times.back() - times.front(); }
  Point y_at(std::size_t m) const {
    return {y.data() + m * static_cast<std::size_t>(y.cols()), static_cast<std::size_t>(y.cols())};
  }

  // Throws ConfigError unless times are strictly increasing and Y is finite.
  void validate() const;
};

struct JumpRecord {
  double time = 0.0;
  int from = 0;
  int to = 0;
};

// Simulated path: Y plus the hidden chain, right-continuous on the grid.
struct HybridPath : YPath {
  std::vector<int> x_idx;
  std::vector<JumpRecord> jumps;
  std::uint64_t seed = 0;
  double dt = 0.0;

  // Checks the jump/grid consistency invariant; throws ConfigError.
  void validate() const;
};

// Metadata stored next to the CSV.
struct PathMeta {
  std::uint64_t seed = 0;
  double dt = 0.0;
  std::string spec_hash;
};

// `t,x_idx,y_1..y_d` at 17 significant digits plus `<stem>.json` with jumps
// and metadata.
void write_path(const std::filesystem::path& csv, const HybridPath& path,
                const std::string& spec_hash = {});
HybridPath read_path(const std::filesystem::path& csv);

// Reads `t,[x_idx,]y_1..y_d`; the x_idx column is ignored when present.
YPath read_y_csv(const std::filesystem::path& csv);

std::filesystem::path sidecar_for(const std::filesystem::path& csv);

std::string format_double(double v);

}  // namespace hybridfilt
