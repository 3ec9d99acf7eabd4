#include "hybridfilt/verify.hpp"

#include "hybridfilt/em.hpp"
#include "hybridfilt/error.hpp"
#include "hybridfilt/filter.hpp"
#include "hybridfilt/oracle.hpp"
#include "hybridfilt/scenarios.hpp"
#include "hybridfilt/simulator.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace hybridfilt {

using nlohmann::json;

json VerifyReport::to_json() const {
  json checks_json = json::array();
  for (const auto& c : checks) {
    json j = {{"name", c.name}, {"distance", c.distance}, {"tolerance", c.tolerance},
              {"pass", c.pass}};
    if (!std::isnan(c.std_error)) j["std_error"] = c.std_error;
    checks_json.push_back(j);
  }
  return {{"scenario", scenario}, {"seed", seed}, {"pass", pass}, {"checks", checks_json}};
}

namespace {

void add(VerifyReport& r, std::string name, double distance, double tolerance) {
  r.checks.push_back({std::move(name), distance, tolerance,
                      std::numeric_limits<double>::quiet_NaN(), distance < tolerance});
}

void add_mc(VerifyReport& r, std::string name, double value, const OracleEstimate& est) {
  // Rounding floor for functionals that do not vary across particles.
  const double distance = std::abs(value - est.value);
  const double tolerance = 3.0 * est.std_error + 1e-10 * (1.0 + std::abs(est.value));
  r.checks.push_back({std::move(name), distance, tolerance, est.std_error, distance <= tolerance});
}

void mc_checks(VerifyReport& r, const ModelSpec& spec, const Vector& theta, std::uint64_t seed,
               const VerifyOptions& options) {
  const HybridPath path = simulate_path(spec, theta, options.mc_horizon, options.mc_dt, seed + 1);
  const PathBasis basis(path, spec);
  const FilterTrajectory traj = run_filter(basis, theta);
  const FilteredStats stats = e_step(basis, theta);
  const int k = spec.dims.k, L = spec.dims.L;
  std::vector<Functional> fs;
  for (int i = 0; i < k; ++i) fs.push_back(Functional::filter_at(path.times.back(), i));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) {
        fs.push_back(Functional::count(j, i));
        fs.push_back(Functional::occupation(j, i));
      }
  for (int l = 0; l < L; ++l) fs.push_back(Functional::drift_lin(l));
  for (int l = 0; l < L; ++l)
    for (int m = l; m < L; ++m) fs.push_back(Functional::gram(l, m));
  const auto est =
      mc_conditional_oracle(path, spec, theta, fs, {options.particles, seed + 2, options.jobs});
  const std::size_t last = traj.times.size() - 1;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    const auto& fn = fs[f];
    double value = 0.0;
    switch (fn.kind) {
      case Functional::Kind::kFilterAt:
        value = traj.sigma_hat(static_cast<Eigen::Index>(last), fn.a);
        break;
      case Functional::Kind::kCount: value = stats.n_count(fn.a, fn.b); break;
      case Functional::Kind::kOccupation: value = stats.occupation(fn.a, fn.b); break;
      case Functional::Kind::kDriftLin: value = stats.drift_lin[fn.a]; break;
      case Functional::Kind::kGram: value = stats.gram(fn.a, fn.b); break;
      case Functional::Kind::kLambdaMass: break;
    }
    add_mc(r, "mc:" + fn.name(), value, est[f]);
  }
}

}  // namespace

VerifyReport run_verification(const std::string& name, std::uint64_t seed,
                              const VerifyOptions& options) {
  const Scenario sc = scenario(name);
  const ModelConfig cfg = model_from_json(sc.model);
  const ModelSpec& spec = cfg.spec;
  const Vector& theta = sc.theta_true;

  VerifyReport r;
  r.scenario = name;
  r.seed = seed;

  const HybridPath path = simulate_path(spec, theta, options.horizon, options.dt, seed);
  const PathBasis basis(path, spec);
  const FilterTrajectory traj = run_filter(basis, theta);

  if (name == "ode") {
    const Matrix q = build_q_matrix(spec, theta, path.y_at(0));
    double linf = 0.0;
    for (std::size_t m = 0; m < traj.times.size(); ++m) {
      const Vector p = (q * traj.times[m]).exp() * spec.init_dist;
      linf = std::max(linf, (traj.normalized(m) - p).cwiseAbs().maxCoeff());
    }
    add(r, "filter_vs_matrix_exponential_linf", linf, 1e-3);
    FilterOptions ito;
    ito.scheme = Scheme::kItoEuler;
    add(r, "ito_log_mass_zero", std::abs(log_total_mass(run_filter(basis, theta, ito))), 1e-300);
    // Expected jump counts from the forward equation, trapezoid in time.
    const FilteredStats stats = e_step(basis, theta);
    double expected01 = 0.0;
    for (std::size_t m = 0; m + 1 < traj.times.size(); ++m) {
      const double t0 = traj.times[m], t1 = traj.times[m + 1];
      const double p0 = ((q * t0).exp() * spec.init_dist)[0];
      const double p1 = ((q * t1).exp() * spec.init_dist)[0];
      expected01 += q(1, 0) * 0.5 * (p0 + p1) * (t1 - t0);
    }
    add(r, "e_step_count_vs_forward_equation", std::abs(stats.n_count(1, 0) - expected01), 5e-3);
  } else {
    const HmmForwardResult hmm = hmm_forward_oracle(path, spec, theta);
    double linf = 0.0;
    for (std::size_t m = 0; m < traj.times.size(); ++m)
      linf = std::max(
          linf, (traj.normalized(m) - hmm.probs.row(static_cast<Eigen::Index>(m)).transpose())
                    .cwiseAbs()
                    .maxCoeff());
    add(r, "filter_vs_hmm_linf", linf, 5e-3);
    add(r, "log_mass_vs_hmm_evidence", std::abs(log_total_mass(traj) - hmm.log_evidence), 5e-3);
    const RowMatrix smooth = hmm_smoother_oracle(path, spec, theta);
    const double tau = 0.5 * path.times.back();
    const SmootherResult sm = run_smoother(basis, traj, {tau}).front();
    const auto it = std::find(path.times.begin(), path.times.end(), sm.tau);
    const auto idx = static_cast<Eigen::Index>(it - path.times.begin());
    add(r, "smoother_vs_hmm_smoother",
        (sm.probs - smooth.row(idx).transpose()).cwiseAbs().maxCoeff(), 5e-3);
    mc_checks(r, spec, theta, seed, options);
  }

  r.pass = std::all_of(r.checks.begin(), r.checks.end(), [](const auto& c) { return c.pass; });
  return r;
}

}  // namespace hybridfilt
