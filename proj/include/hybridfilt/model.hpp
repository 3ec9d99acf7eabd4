#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hybridfilt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = std::span<const double>;

inline Point as_point(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

struct ModelDims {
  int k = 1;  // discrete states
  int d = 1;  // continuous dimension
  int L = 0;  // drift basis functions
  int p = 1;  // parameter dimension

  void validate() const;
};

// Off-diagonal base rates: evaluate(i, j, y) is the i -> j rate at y.
// Diagonal entries are never evaluated; they are derived from the columns.
struct RateField {
  std::function<double(int from, int to, Point y)> evaluate;
  double bound = 0.0;
};

// A drift vector per discrete state; writes d components into `out`.
struct DriftField {
  std::function<void(int state, Point y, std::span<double> out)> evaluate;
  double bound = 0.0;
};

enum class Link { kIdentity, kExp };

// One entry of phi or psi: either a (linked) coordinate of theta or a fixed value.
struct CoordinateMap {
  int coord = -1;
  Link link = Link::kIdentity;
  double fixed = 1.0;

  double apply(const Vector& theta) const;
};

// Data form of phi and psi. `rate` has k*k entries indexed (to + k*from);
// diagonal entries are ignored.
struct ParamMap {
  std::vector<CoordinateMap> rate;
  std::vector<CoordinateMap> drift;
};

//---------------------------------------------------------------------------//
/*!
 * Rates q^theta_ji(y) = phi_ji(theta) q0_ji(y) and drift
 * mu^theta(i, y) = sum_l psi_l(theta) mu^l(i, y).
 *
 * `canonical` is set when every phi_ji and psi_l is an identity-linked
 * coordinate of theta (or fixed) and no coordinate feeds both a rate and a
 * drift; the M-step then has a closed form.
 */
struct ExponentialFamily {
  RateField q0;
  std::vector<DriftField> mu_basis;
  std::function<Matrix(const Vector&)> phi;
  std::function<Vector(const Vector&)> psi;
  bool canonical = false;
  std::optional<ParamMap> map;
};

// Builds phi/psi from a ParamMap and derives the canonical flag.
ExponentialFamily make_family(int k, RateField q0, std::vector<DriftField> mu_basis,
                              ParamMap map);

struct ParamBox {
  Vector lower;
  Vector upper;

  bool contains(const Vector& theta) const;
  Vector project(const Vector& theta) const;
};

struct ModelSpec {
  ModelDims dims;
  ExponentialFamily family;
  double epsilon = 1.0;
  Vector init_dist;
  Vector y0;
  ParamBox box;

  // Throws ConfigError when a structural precondition fails.
  void validate() const;
};

// Throws ConfigError when theta has the wrong size or leaves the box.
void require_admissible(const ModelSpec& spec, const Vector& theta, const char* what = "theta");

//---------------------------------------------------------------------------//
/*!
 * The model at a fixed theta: phi and psi evaluated once, rates and drifts
 * evaluated on demand. Used on the hot paths of the simulator and oracles.
 */
class ThetaModel {
 public:
  ThetaModel(const ModelSpec& spec, const Vector& theta);

  // i -> j rate at y (i != j).
  double rate(int from, int to, Point y) const;
  // mu^theta(i, y) written into out (size d).
  void drift(int state, Point y, std::span<double> out) const;

  const Matrix& phi() const { return phi_; }
  const Vector& psi() const { return psi_; }
  const ModelSpec& spec() const { return *spec_; }

 private:
  const ModelSpec* spec_;
  Matrix phi_;
  Vector psi_;
};

// Q^theta(y): entry (j, i) is the i -> j rate, columns sum to zero.
Matrix build_q_matrix(const ModelSpec& spec, const Vector& theta, Point y);

// C^theta(y): d x k, column j is mu^theta(j, y).
Matrix build_c_matrix(const ModelSpec& spec, const Vector& theta, Point y);

struct Violation {
  enum class Kind { kNegativeRate, kRateBound, kDriftBound, kNonFinite, kPhiNonPositive };
  Kind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool passed() const { return violations.empty(); }
};

// Samples the boundedness and positivity hypotheses; violations are data.
ValidationReport validate_model(const ModelSpec& spec, const std::vector<Vector>& sample_grid,
                                const std::vector<Vector>& theta_probe);

std::string to_string(Violation::Kind kind);

}  // namespace hybridfilt
