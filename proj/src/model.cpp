#include "hybridfilt/model.hpp"

#include "hybridfilt/error.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace hybridfilt {

namespace {

std::string point_str(Point y) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t c = 0; c < y.size(); ++c) os << (c ? ", " : "") << y[c];
  os << ')';
  return os.str();
}

std::string vec_str(const Vector& v) { return point_str(as_point(v)); }

}  // namespace

void ModelDims::validate() const {
  if (k < 1) throw ConfigError("dims.k must be >= 1");
  if (d < 1) throw ConfigError("dims.d must be >= 1");
  if (L < 0) throw ConfigError("dims.L must be >= 0");
  if (p < 1) throw ConfigError("dims.p must be >= 1");
}

double CoordinateMap::apply(const Vector& theta) const {
  if (coord < 0) return fixed;
  const double x = theta[coord];
  return link == Link::kExp ? std::exp(x) : x;
}

ExponentialFamily make_family(int k, RateField q0, std::vector<DriftField> mu_basis,
                              ParamMap map) {
  if (map.rate.size() != static_cast<std::size_t>(k) * k)
    throw ConfigError("rate parameter map must have k*k entries");
  if (map.drift.size() != mu_basis.size())
    throw ConfigError("drift parameter map must have one entry per basis function");

  ExponentialFamily fam;
  fam.q0 = std::move(q0);
  fam.mu_basis = std::move(mu_basis);

  bool identity_links = true;
  std::set<int> rate_coords, drift_coords;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const auto& m = map.rate[j + k * i];
      if (m.coord >= 0) {
        rate_coords.insert(m.coord);
        identity_links = identity_links && m.link == Link::kIdentity;
      }
    }
  for (const auto& m : map.drift)
    if (m.coord >= 0) {
      drift_coords.insert(m.coord);
      identity_links = identity_links && m.link == Link::kIdentity;
    }
  bool disjoint = true;
  for (int c : rate_coords) disjoint = disjoint && !drift_coords.count(c);
  fam.canonical = identity_links && disjoint;

  fam.phi = [k, rate = map.rate](const Vector& theta) {
    Matrix phi = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        if (i != j) phi(j, i) = rate[j + k * i].apply(theta);
    return phi;
  };
  fam.psi = [drift = map.drift](const Vector& theta) {
    Vector psi(static_cast<Eigen::Index>(drift.size()));
    for (std::size_t l = 0; l < drift.size(); ++l) psi[l] = drift[l].apply(theta);
    return psi;
  };
  fam.map = std::move(map);
  return fam;
}

bool ParamBox::contains(const Vector& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index c = 0; c < theta.size(); ++c)
    if (!(theta[c] >= lower[c] && theta[c] <= upper[c])) return false;
  return true;
}

Vector ParamBox::project(const Vector& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

void ModelSpec::validate() const {
  dims.validate();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
  if (init_dist.size() != dims.k) throw ConfigError("init_dist must have k entries");
  if ((init_dist.array() < 0.0).any()) throw ConfigError("init_dist entries must be >= 0");
  if (std::abs(init_dist.sum() - 1.0) > 1e-12) throw ConfigError("init_dist must sum to 1");
  if (y0.size() != dims.d) throw ConfigError("y0 must have d entries");
  if (box.lower.size() != dims.p || box.upper.size() != dims.p)
    throw ConfigError("parameter box must have p lower and p upper bounds");
  if ((box.lower.array() > box.upper.array()).any())
    throw ConfigError("parameter box is empty (lower > upper)");
  if (static_cast<int>(family.mu_basis.size()) != dims.L)
    throw ConfigError("drift basis must have L entries");
  if (!family.q0.evaluate) throw ConfigError("base rate field is not set");
  if (!family.phi || !family.psi) throw ConfigError("phi/psi are not set");
  if (!(family.q0.bound >= 0.0) || !std::isfinite(family.q0.bound))
    throw ConfigError("base rate bound must be finite");
  for (const auto& mu : family.mu_basis) {
    if (!mu.evaluate) throw ConfigError("drift basis function is not set");
    if (!(mu.bound >= 0.0) || !std::isfinite(mu.bound))
      throw ConfigError("drift bound must be finite");
  }
}

void require_admissible(const ModelSpec& spec, const Vector& theta, const char* what) {
  if (theta.size() != spec.dims.p)
    throw ConfigError(std::string(what) + " has " + std::to_string(theta.size()) +
                      " entries, expected " + std::to_string(spec.dims.p));
  if (!spec.box.contains(theta))
    throw ConfigError(std::string(what) + " " + vec_str(theta) + " is outside the parameter box");
}

ThetaModel::ThetaModel(const ModelSpec& spec, const Vector& theta)
    : spec_(&spec),
      phi_(spec.family.phi(theta)),
      psi_(spec.family.psi(theta)) {}

double ThetaModel::rate(int from, int to, Point y) const {
  return phi_(to, from) * spec_->family.q0.evaluate(from, to, y);
}

void ThetaModel::drift(int state, Point y, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  thread_local std::vector<double> scratch;
  scratch.resize(out.size());
  const auto& basis = spec_->family.mu_basis;
  for (std::size_t l = 0; l < basis.size(); ++l) {
    basis[l].evaluate(state, y, scratch);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += psi_[l] * scratch[c];
  }
}

Matrix build_q_matrix(const ModelSpec& spec, const Vector& theta, Point y) {
  const int k = spec.dims.k;
  const Matrix phi = spec.family.phi(theta);
  Matrix q = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    double out = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      const double base = spec.family.q0.evaluate(i, j, y);
      const double rate = phi(j, i) * base;
      if (!std::isfinite(rate))
        throw ModelEvaluationError("non-finite rate for transition " + std::to_string(i) +
                                   " -> " + std::to_string(j) + " at y = " + point_str(y));
      q(j, i) = rate;
      out += rate;
    }
    q(i, i) = -out;
  }
  return q;
}

Matrix build_c_matrix(const ModelSpec& spec, const Vector& theta, Point y) {
  const int k = spec.dims.k;
  const int d = spec.dims.d;
  const Vector psi = spec.family.psi(theta);
  Matrix c = Matrix::Zero(d, k);
  std::vector<double> buf(static_cast<std::size_t>(d));
  for (int l = 0; l < spec.dims.L; ++l) {
    for (int j = 0; j < k; ++j) {
      spec.family.mu_basis[l].evaluate(j, y, buf);
      for (int r = 0; r < d; ++r) c(r, j) += psi[l] * buf[r];
    }
  }
  if (!c.allFinite())
    throw ModelEvaluationError("non-finite drift at y = " + point_str(y));
  return c;
}

std::string to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kNegativeRate: return "negative_rate";
    case Violation::Kind::kRateBound: return "rate_bound";
    case Violation::Kind::kDriftBound: return "drift_bound";
    case Violation::Kind::kNonFinite: return "non_finite";
    case Violation::Kind::kPhiNonPositive: return "phi_non_positive";
  }
  return "unknown";
}

ValidationReport validate_model(const ModelSpec& spec, const std::vector<Vector>& sample_grid,
                                const std::vector<Vector>& theta_probe) {
  if (sample_grid.empty() || theta_probe.empty())
    throw ConfigError("validate_model needs nonempty sample and parameter grids");
  ValidationReport report;
  auto add = [&](Violation::Kind kind, std::string detail) {
    report.violations.push_back({kind, std::move(detail)});
  };
  const int k = spec.dims.k;
  const auto& fam = spec.family;
  std::vector<double> buf(static_cast<std::size_t>(spec.dims.d));

  for (const Vector& y : sample_grid) {
    const Point pt = as_point(y);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        const double r = fam.q0.evaluate(i, j, pt);
        const std::string where = "q0 " + std::to_string(i) + "->" + std::to_string(j) +
                                  " at y = " + point_str(pt);
        if (!std::isfinite(r)) add(Violation::Kind::kNonFinite, where);
        else if (r < 0.0) add(Violation::Kind::kNegativeRate, where + " is " + std::to_string(r));
        else if (r > fam.q0.bound)
          add(Violation::Kind::kRateBound, where + " exceeds bound " + std::to_string(fam.q0.bound));
      }
    for (int l = 0; l < spec.dims.L; ++l)
      for (int i = 0; i < k; ++i) {
        fam.mu_basis[l].evaluate(i, pt, buf);
        double norm2 = 0.0;
        for (double v : buf) norm2 += v * v;
        const std::string where = "mu^" + std::to_string(l) + " state " + std::to_string(i) +
                                  " at y = " + point_str(pt);
        if (!std::isfinite(norm2)) add(Violation::Kind::kNonFinite, where);
        else if (std::sqrt(norm2) > fam.mu_basis[l].bound)
          add(Violation::Kind::kDriftBound,
              where + " exceeds bound " + std::to_string(fam.mu_basis[l].bound));
      }
  }

  for (const Vector& theta : theta_probe) {
    const Matrix phi = fam.phi(theta);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        const double v = phi(j, i);
        const std::string where = "phi " + std::to_string(i) + "->" + std::to_string(j) +
                                  " at theta = " + vec_str(theta);
        if (!std::isfinite(v)) add(Violation::Kind::kNonFinite, where);
        else if (!(v > 0.0)) add(Violation::Kind::kPhiNonPositive, where);
      }
    const Vector psi = fam.psi(theta);
    if (!psi.allFinite()) add(Violation::Kind::kNonFinite, "psi at theta = " + vec_str(theta));
  }
  return report;
}

}  // namespace hybridfilt
