#include "hybridfilt/path.hpp"

#include "hybridfilt/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hybridfilt {

using nlohmann::json;

void YPath::validate() const {
  if (times.size() < 2) throw ConfigError("path needs at least two grid points");
  if (static_cast<std::size_t>(y.rows()) != times.size())
    throw ConfigError("path has mismatched time and value counts");
  for (std::size_t m = 1; m < times.size(); ++m)
    if (!(times[m] > times[m - 1]))
      throw ConfigError("path times must be strictly increasing (index " + std::to_string(m) +
                        ")");
  if (!y.allFinite()) throw ConfigError("path contains non-finite values");
}

void HybridPath::validate() const {
  YPath::validate();
  if (x_idx.size() != times.size()) throw ConfigError("path x_idx has the wrong length");
  std::size_t next = 0;
  for (std::size_t m = 1; m < times.size(); ++m) {
    if (x_idx[m] == x_idx[m - 1]) continue;
    if (next >= jumps.size() || jumps[next].time != times[m] ||
        jumps[next].from != x_idx[m - 1] || jumps[next].to != x_idx[m])
      throw ConfigError("state change at t=" + format_double(times[m]) +
                        " does not match a jump record");
    ++next;
  }
  if (next != jumps.size()) throw ConfigError("jump records without a state change");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path sidecar_for(const std::filesystem::path& csv) {
  auto side = csv;
  side.replace_extension(".json");
  return side;
}

void write_path(const std::filesystem::path& csv, const HybridPath& path,
                const std::string& spec_hash) {
  std::ofstream out(csv);
  if (!out) throw ConfigError("cannot write " + csv.string());
  out << "t,x_idx";
  for (int c = 0; c < path.dim(); ++c) out << ",y_" << (c + 1);
  out << '\n';
  for (std::size_t m = 0; m < path.size(); ++m) {
    out << format_double(path.times[m]) << ',' << path.x_idx[m];
    for (int c = 0; c < path.dim(); ++c) out << ',' << format_double(path.y(m, c));
    out << '\n';
  }

  json jumps = json::array();
  for (const auto& j : path.jumps) jumps.push_back({{"t", j.time}, {"from", j.from}, {"to", j.to}});
  json side = {{"jumps", jumps},
               {"seed", path.seed},
               {"dt", path.dt},
               {"T", path.times.back()},
               {"d", path.dim()},
               {"spec_hash", spec_hash}};
  std::ofstream sout(sidecar_for(csv));
  if (!sout) throw ConfigError("cannot write sidecar for " + csv.string());
  sout << side.dump(2) << '\n';
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

Table read_table(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(file.string() + " is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(trim(cell));
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trim(cell);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": bad number '" +
                          cell + "'");
      row.push_back(v);
    }
    if (row.size() != t.header.size())
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": wrong column count");
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Fills times and y from a table whose first column is t; returns the
// column index of x_idx or -1.
int fill_y(const Table& t, YPath& out) {
  if (t.header.empty() || t.header[0] != "t") throw ConfigError("first CSV column must be 't'");
  const int x_col = t.header.size() > 1 && t.header[1] == "x_idx" ? 1 : -1;
  const int first_y = x_col < 0 ? 1 : 2;
  const int d = static_cast<int>(t.header.size()) - first_y;
  if (d < 1) throw ConfigError("CSV has no y columns");
  out.times.resize(t.rows.size());
  out.y.resize(static_cast<Eigen::Index>(t.rows.size()), d);
  for (std::size_t m = 0; m < t.rows.size(); ++m) {
    out.times[m] = t.rows[m][0];
    for (int c = 0; c < d; ++c) out.y(static_cast<Eigen::Index>(m), c) = t.rows[m][first_y + c];
  }
  return x_col;
}

}  // namespace

YPath read_y_csv(const std::filesystem::path& csv) {
  YPath p;
  fill_y(read_table(csv), p);
  p.validate();
  return p;
}

HybridPath read_path(const std::filesystem::path& csv) {
  const Table t = read_table(csv);
  HybridPath p;
  const int x_col = fill_y(t, p);
  if (x_col < 0) throw ConfigError(csv.string() + " has no x_idx column");
  p.x_idx.resize(t.rows.size());
  for (std::size_t m = 0; m < t.rows.size(); ++m)
    p.x_idx[m] = static_cast<int>(t.rows[m][x_col]);

  const auto side_file = sidecar_for(csv);
  std::ifstream in(side_file);
  if (!in) throw ConfigError("missing sidecar " + side_file.string());
  try {
    const json side = json::parse(in);
    for (const auto& j : side.at("jumps"))
      p.jumps.push_back({j.at("t").get<double>(), j.at("from").get<int>(), j.at("to").get<int>()});
    p.seed = side.value("seed", std::uint64_t{0});
    p.dt = side.value("dt", 0.0);
  } catch (const json::exception& e) {
    throw ConfigError(side_file.string() + ": " + e.what());
  }
  p.validate();
  return p;
}

}  // namespace hybridfilt
