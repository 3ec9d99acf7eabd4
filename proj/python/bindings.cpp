#include "hybridfilt/em.hpp"
#include "hybridfilt/error.hpp"
#include "hybridfilt/model_io.hpp"
#include "hybridfilt/oracle.hpp"
#include "hybridfilt/partial_likelihood.hpp"
#include "hybridfilt/scenarios.hpp"
#include "hybridfilt/simulator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace hybridfilt;

namespace {

// Shared ownership keeps the spec alive for PathBasis objects built from it.
struct Model {
  std::shared_ptr<ModelConfig> cfg;
  const ModelSpec& spec() const { return cfg->spec; }
};

Model model_from_string(const std::string& text) {
  return {std::make_shared<ModelConfig>(model_from_json(nlohmann::json::parse(text)))};
}

YPath make_path(const std::vector<double>& times, const RowMatrix& y) {
  YPath p;
  p.times = times;
  p.y = y;
  p.validate();
  return p;
}

Scheme scheme_of(const std::string& s) {
  if (s == "lattice") return Scheme::kLattice;
  if (s == "ito") return Scheme::kItoEuler;
  throw ConfigError("unknown scheme '" + s + "'");
}

py::dict stats_dict(const SufficientStats& s) {
  py::dict d;
  d["n_count"] = s.n_count;
  d["occupation"] = s.occupation;
  d["drift_lin"] = s.drift_lin;
  d["gram"] = s.gram;
  d["theta_ref"] = s.theta_ref;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Filtering and estimation for diffusions with Markov switching";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Model>(m, "Model")
      .def_property_readonly("k", [](const Model& s) { return s.spec().dims.k; })
      .def_property_readonly("d", [](const Model& s) { return s.spec().dims.d; })
      .def_property_readonly("L", [](const Model& s) { return s.spec().dims.L; })
      .def_property_readonly("p", [](const Model& s) { return s.spec().dims.p; })
      .def_property_readonly("epsilon", [](const Model& s) { return s.spec().epsilon; })
      .def_property_readonly("canonical", [](const Model& s) { return s.spec().family.canonical; })
      .def_property_readonly("hash", [](const Model& s) { return hex64(s.cfg->hash); })
      .def("to_json", [](const Model& s) { return s.cfg->source.dump(); })
      .def("q_matrix",
           [](const Model& s, const Vector& theta, const Vector& y) {
             return build_q_matrix(s.spec(), theta, as_point(y));
           })
      .def("__repr__", [](const Model& s) {
        const auto& d = s.spec().dims;
        return "<Model k=" + std::to_string(d.k) + " d=" + std::to_string(d.d) +
               " L=" + std::to_string(d.L) + " p=" + std::to_string(d.p) + ">";
      });

  m.def("load_model", [](const std::string& file) {
    return Model{std::make_shared<ModelConfig>(load_model(file))};
  });
  m.def("model_from_json", &model_from_string, py::arg("text"));
  m.def("scenario_names", &scenario_names);
  m.def("scenario", [](const std::string& name) {
    const Scenario s = scenario(name);
    return py::make_tuple(model_from_string(s.model.dump()), s.theta_true, s.horizon, s.dt);
  });

  m.def(
      "simulate",
      [](const Model& model, const Vector& theta, double horizon, double dt, std::uint64_t seed) {
        const HybridPath p = simulate_path(model.spec(), theta, horizon, dt, seed);
        py::list jumps;
        for (const auto& j : p.jumps) jumps.append(py::make_tuple(j.time, j.from, j.to));
        py::dict out;
        out["times"] = p.times;
        out["x_idx"] = p.x_idx;
        out["y"] = p.y;
        out["jumps"] = jumps;
        out["epsilon_hat"] = estimate_epsilon(p);
        return out;
      },
      py::arg("model"), py::arg("theta"), py::arg("T"), py::arg("dt"), py::arg("seed"));

  m.def(
      "run_filter",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta, const std::string& scheme) {
        const FilterTrajectory f =
            run_filter(make_path(times, y), model.spec(), theta, {scheme_of(scheme)});
        py::dict out;
        out["times"] = f.times;
        out["probs"] = f.sigma_hat;
        out["log_mass"] = f.log_mass;
        out["clamp_events"] = f.clamp_events;
        return out;
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta"),
      py::arg("scheme") = "lattice");

  m.def(
      "smooth",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta, const std::vector<double>& taus) {
        const PathBasis basis(make_path(times, y), model.spec());
        const FilterTrajectory f = run_filter(basis, theta);
        py::list out;
        for (const auto& r : run_smoother(basis, f, taus)) out.append(py::make_tuple(r.tau, r.probs));
        return out;
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta"), py::arg("taus"));

  m.def(
      "log_lik_partial",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta, const Vector& theta0) {
        return log_lik_partial(make_path(times, y), model.spec(), theta, theta0).value;
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta"), py::arg("theta0"));

  m.def(
      "innovations_loglik",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta, const Vector& theta0) {
        return innovations_loglik(make_path(times, y), model.spec(), theta, theta0);
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta"), py::arg("theta0"));

  m.def(
      "e_step",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta0) {
        const FilteredStats s = e_step(make_path(times, y), model.spec(), theta0);
        py::dict d = stats_dict(s);
        d["log_mass"] = s.log_mass;
        return d;
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta0"));

  m.def(
      "em_run",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta_init, int max_iter, double tol) {
        EMOptions o;
        o.max_iter = max_iter;
        o.tol = tol;
        const EMTrace tr = em_run(make_path(times, y), model.spec(), theta_init, o);
        std::vector<Vector> thetas;
        std::vector<double> logliks;
        for (const auto& it : tr.iterates) {
          thetas.push_back(it.theta);
          logliks.push_back(it.loglik);
        }
        py::dict out;
        out["thetas"] = thetas;
        out["loglik"] = logliks;
        out["converged"] = tr.converged;
        out["stop_reason"] = to_string(tr.stop_reason);
        return out;
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta_init"),
      py::arg("max_iter") = 100, py::arg("tol") = 1e-6);

  m.def(
      "mle_partial",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta_init, double tol, int max_iter, int restarts, std::uint64_t seed) {
        MLEOptions o;
        o.optimizer.tol = tol;
        o.optimizer.max_iter = max_iter;
        o.restarts = restarts;
        o.seed = seed;
        const MLEResult r = mle_partial(make_path(times, y), model.spec(), theta_init, o);
        py::dict out;
        out["theta_hat"] = r.theta_hat;
        out["log_mass"] = r.log_mass_at_hat;
        out["iterations"] = r.iterations;
        out["converged"] = r.converged;
        return out;
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta_init"),
      py::arg("tol") = 1e-8, py::arg("max_iter") = 500, py::arg("restarts") = 3,
      py::arg("seed") = 0);

  m.def(
      "hmm_forward",
      [](const Model& model, const std::vector<double>& times, const RowMatrix& y,
         const Vector& theta) {
        const HmmForwardResult r = hmm_forward_oracle(make_path(times, y), model.spec(), theta);
        return py::make_tuple(r.probs, r.log_evidence);
      },
      py::arg("model"), py::arg("times"), py::arg("y"), py::arg("theta"));
}
