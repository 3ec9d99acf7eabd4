#include "hybridfilt/model_io.hpp"

#include "hybridfilt/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace hybridfilt {

using nlohmann::json;

namespace {

struct ScalarField {
  std::function<double(Point)> eval;
  double bound = std::numeric_limits<double>::infinity();
};

struct VectorField {
  std::function<void(Point, std::span<double>)> eval;
  double bound = std::numeric_limits<double>::infinity();
};

std::vector<double> doubles(const json& j, const char* key, std::size_t expected) {
  if (!j.contains(key)) throw ConfigError(std::string("field is missing '") + key + "'");
  auto v = j.at(key).get<std::vector<double>>();
  if (expected && v.size() != expected)
    throw ConfigError(std::string("'") + key + "' must have " + std::to_string(expected) +
                      " entries");
  return v;
}

std::vector<std::vector<double>> square(const json& j, const char* key, int d) {
  auto m = j.at(key).get<std::vector<std::vector<double>>>();
  if (m.size() != static_cast<std::size_t>(d))
    throw ConfigError(std::string("'") + key + "' must be " + std::to_string(d) + "x" +
                      std::to_string(d));
  for (const auto& row : m)
    if (row.size() != static_cast<std::size_t>(d))
      throw ConfigError(std::string("'") + key + "' must be square");
  return m;
}

void check_version(const json& j) {
  const int version = j.value("version", kFieldFamilyVersion);
  if (version != kFieldFamilyVersion)
    throw ConfigError("unsupported field family version " + std::to_string(version));
}

ScalarField make_scalar(const json& j, int d) {
  check_version(j);
  const std::string family = j.at("family").get<std::string>();
  ScalarField f;
  if (family == "zero") {
    f.eval = [](Point) { return 0.0; };
    f.bound = 0.0;
  } else if (family == "constant") {
    const double c = j.at("value").get<double>();
    f.eval = [c](Point) { return c; };
    f.bound = std::abs(c);
  } else if (family == "affine" || family == "quadratic") {
    const double c = j.at("c").get<double>();
    std::vector<double> b = j.contains("b") ? doubles(j, "b", d) : std::vector<double>(d, 0.0);
    std::vector<double> a;  // row-major d x d
    if (family == "quadratic") {
      for (const auto& row : square(j, "A", d)) a.insert(a.end(), row.begin(), row.end());
    }
    f.eval = [c, b, a, d](Point y) {
      double v = c;
      for (int r = 0; r < d; ++r) v += b[r] * y[r];
      if (!a.empty())
        for (int r = 0; r < d; ++r)
          for (int s = 0; s < d; ++s) v += y[r] * a[r * d + s] * y[s];
      return v;
    };
  } else if (family == "tabulated") {
    const int coord = j.value("coord", 0);
    if (coord < 0 || coord >= d) throw ConfigError("tabulated 'coord' out of range");
    auto grid = doubles(j, "grid", 0);
    auto values = doubles(j, "values", grid.size());
    if (grid.size() < 2) throw ConfigError("tabulated field needs at least two grid points");
    if (!std::is_sorted(grid.begin(), grid.end()) ||
        std::adjacent_find(grid.begin(), grid.end()) != grid.end())
      throw ConfigError("tabulated grid must be strictly increasing");
    f.bound = 0.0;
    for (double v : values) f.bound = std::max(f.bound, std::abs(v));
    f.eval = [coord, grid, values](Point y) {
      const double x = y[coord];
      if (x <= grid.front()) return values.front();
      if (x >= grid.back()) return values.back();
      const auto it = std::upper_bound(grid.begin(), grid.end(), x);
      const std::size_t hi = static_cast<std::size_t>(it - grid.begin());
      const double w = (x - grid[hi - 1]) / (grid[hi] - grid[hi - 1]);
      return (1.0 - w) * values[hi - 1] + w * values[hi];
    };
  } else {
    throw ConfigError("unknown scalar field family '" + family + "'");
  }

  if (j.contains("clip")) {
    const auto clip = doubles(j, "clip", 2);
    if (clip[0] > clip[1]) throw ConfigError("clip bounds are reversed");
    f.eval = [inner = std::move(f.eval), lo = clip[0], hi = clip[1]](Point y) {
      return std::clamp(inner(y), lo, hi);
    };
    f.bound = std::min(f.bound, std::max(std::abs(clip[0]), std::abs(clip[1])));
  }
  if (j.contains("bound")) f.bound = j.at("bound").get<double>();
  if (!std::isfinite(f.bound))
    throw ConfigError("field family '" + family + "' needs a 'clip' or a declared 'bound'");
  return f;
}

VectorField make_vector(const json& j, int d) {
  check_version(j);
  const std::string family = j.at("family").get<std::string>();
  VectorField f;
  if (family == "zero") {
    f.eval = [](Point, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); };
    f.bound = 0.0;
  } else if (family == "constant") {
    const auto value = doubles(j, "value", d);
    double n2 = 0.0;
    for (double v : value) n2 += v * v;
    f.bound = std::sqrt(n2);
    f.eval = [value](Point, std::span<double> out) {
      std::copy(value.begin(), value.end(), out.begin());
    };
  } else if (family == "affine") {
    const auto c = doubles(j, "c", d);
    std::vector<double> a;
    for (const auto& row : square(j, "A", d)) a.insert(a.end(), row.begin(), row.end());
    f.eval = [c, a, d](Point y, std::span<double> out) {
      for (int r = 0; r < d; ++r) {
        double v = c[r];
        for (int s = 0; s < d; ++s) v += a[r * d + s] * y[s];
        out[r] = v;
      }
    };
  } else if (family == "components") {
    const auto& comps = j.at("components");
    if (comps.size() != static_cast<std::size_t>(d))
      throw ConfigError("'components' must have d entries");
    std::vector<ScalarField> parts;
    double n2 = 0.0;
    for (const auto& c : comps) {
      parts.push_back(make_scalar(c, d));
      n2 += parts.back().bound * parts.back().bound;
    }
    f.bound = std::sqrt(n2);
    f.eval = [parts](Point y, std::span<double> out) {
      for (std::size_t r = 0; r < parts.size(); ++r) out[r] = parts[r].eval(y);
    };
  } else {
    throw ConfigError("unknown vector field family '" + family + "'");
  }

  if (j.contains("clip")) {
    const auto clip = doubles(j, "clip", 2);
    if (clip[0] > clip[1]) throw ConfigError("clip bounds are reversed");
    f.eval = [inner = std::move(f.eval), lo = clip[0], hi = clip[1]](Point y,
                                                                      std::span<double> out) {
      inner(y, out);
      for (double& v : out) v = std::clamp(v, lo, hi);
    };
    const double m = std::max(std::abs(clip[0]), std::abs(clip[1]));
    f.bound = std::min(f.bound, std::sqrt(static_cast<double>(d)) * m);
  }
  if (j.contains("bound")) f.bound = j.at("bound").get<double>();
  if (!std::isfinite(f.bound))
    throw ConfigError("field family '" + family + "' needs a 'clip' or a declared 'bound'");
  return f;
}

CoordinateMap coordinate_map(const json& j, int p) {
  CoordinateMap m;
  if (j.contains("coord")) {
    m.coord = j.at("coord").get<int>();
    if (m.coord < 0 || m.coord >= p) throw ConfigError("parameter coord out of range");
    const std::string link = j.value("link", "identity");
    if (link == "identity") m.link = Link::kIdentity;
    else if (link == "exp") m.link = Link::kExp;
    else throw ConfigError("unknown link '" + link + "'");
  } else {
    m.fixed = j.value("fixed", 1.0);
  }
  return m;
}

}  // namespace

ModelConfig model_from_json(const json& j) {
  try {
    const int format = j.value("format_version", kModelFormatVersion);
    if (format != kModelFormatVersion)
      throw ConfigError("unsupported model format_version " + std::to_string(format));

    ModelSpec spec;
    const auto& dims = j.at("dims");
    spec.dims.k = dims.at("k").get<int>();
    spec.dims.d = dims.at("d").get<int>();
    spec.dims.L = dims.value("L", 0);
    spec.dims.p = dims.at("p").get<int>();
    spec.dims.validate();
    const int k = spec.dims.k, d = spec.dims.d, L = spec.dims.L, p = spec.dims.p;

    spec.epsilon = j.at("epsilon").get<double>();
    auto init = doubles(j, "init_dist", k);
    spec.init_dist = Eigen::Map<Vector>(init.data(), k);
    auto y0 = j.contains("y0") ? doubles(j, "y0", d) : std::vector<double>(d, 0.0);
    spec.y0 = Eigen::Map<Vector>(y0.data(), d);
    const auto& box = j.at("theta_box");
    auto lo = doubles(box, "lower", p);
    auto hi = doubles(box, "upper", p);
    spec.box.lower = Eigen::Map<Vector>(lo.data(), p);
    spec.box.upper = Eigen::Map<Vector>(hi.data(), p);

    // Base rates: unlisted transitions have rate zero.
    std::vector<ScalarField> rates(static_cast<std::size_t>(k) * k);
    double rate_bound = 0.0;
    for (auto& r : rates) r = ScalarField{[](Point) { return 0.0; }, 0.0};
    for (const auto& entry : j.value("base_rates", json::array())) {
      const int from = entry.at("from").get<int>();
      const int to = entry.at("to").get<int>();
      if (from < 0 || from >= k || to < 0 || to >= k || from == to)
        throw ConfigError("base rate transition out of range");
      rates[to + k * from] = make_scalar(entry, d);
    }
    for (const auto& r : rates) rate_bound = std::max(rate_bound, r.bound);
    RateField q0;
    q0.bound = rate_bound;
    q0.evaluate = [rates, k](int from, int to, Point y) { return rates[to + k * from].eval(y); };

    std::vector<DriftField> basis;
    const json drift = j.value("drift_basis", json::array());
    if (drift.size() != static_cast<std::size_t>(L))
      throw ConfigError("drift_basis must have L entries");
    for (const auto& entry : drift) {
      const auto& states = entry.at("states");
      if (states.size() != static_cast<std::size_t>(k))
        throw ConfigError("each drift basis function needs one field per state");
      std::vector<VectorField> per_state;
      double bound = 0.0;
      for (const auto& s : states) {
        per_state.push_back(make_vector(s, d));
        bound = std::max(bound, per_state.back().bound);
      }
      DriftField f;
      f.bound = bound;
      f.evaluate = [per_state](int state, Point y, std::span<double> out) {
        per_state[state].eval(y, out);
      };
      basis.push_back(std::move(f));
    }

    ParamMap map;
    map.rate.assign(static_cast<std::size_t>(k) * k, CoordinateMap{});
    for (const auto& entry : j.value("rate_params", json::array())) {
      const int from = entry.at("from").get<int>();
      const int to = entry.at("to").get<int>();
      if (from < 0 || from >= k || to < 0 || to >= k || from == to)
        throw ConfigError("rate parameter transition out of range");
      map.rate[to + k * from] = coordinate_map(entry, p);
    }
    const json drift_params = j.value("drift_params", json::array());
    if (drift_params.size() != static_cast<std::size_t>(L))
      throw ConfigError("drift_params must have L entries");
    for (const auto& entry : drift_params) map.drift.push_back(coordinate_map(entry, p));

    spec.family = make_family(k, std::move(q0), std::move(basis), std::move(map));
    spec.validate();
    return ModelConfig{std::move(spec), j, hash_json(j)};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model configuration: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

ModelConfig load_model(const std::filesystem::path& file) {
  return model_from_json(read_json_file(file));
}

Vector theta_from_json(const json& j) {
  try {
    const json& arr = j.is_object() ? j.at("theta") : j;
    auto v = arr.get<std::vector<double>>();
    return Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("theta: ") + e.what());
  }
}

Vector load_theta(const std::filesystem::path& file) { return theta_from_json(read_json_file(file)); }

json theta_to_json(const Vector& theta) {
  return std::vector<double>(theta.data(), theta.data() + theta.size());
}

std::uint64_t hash_bytes(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_json(const json& j) { return hash_bytes(j.dump()); }

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace hybridfilt
