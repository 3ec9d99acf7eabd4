#include "cli.hpp"

#include "hybridfilt/complete_likelihood.hpp"
#include "hybridfilt/em.hpp"
#include "hybridfilt/error.hpp"
#include "hybridfilt/filter.hpp"
#include "hybridfilt/model_io.hpp"
#include "hybridfilt/partial_likelihood.hpp"
#include "hybridfilt/simulator.hpp"
#include "hybridfilt/verify.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#ifndef HYBRIDFILT_VERSION
#define HYBRIDFILT_VERSION "0.0.0"
#endif

namespace hybridfilt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void configure_logging() {
  auto logger = spdlog::stderr_logger_st("hybridfilt");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("HYBRIDFILT_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring HYBRIDFILT_LOG='{}'", level);
  }
}

namespace {

const std::vector<std::string> kFileFlags = {"--model", "--theta",  "--theta0", "--theta-init",
                                             "--y",     "--path",   "--manifest"};

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json stats_json(const SufficientStats& s) {
  return {{"n_count", matrix_json(s.n_count)},
          {"occupation", matrix_json(s.occupation)},
          {"drift_lin", theta_to_json(s.drift_lin)},
          {"gram", matrix_json(s.gram)},
          {"theta_ref", theta_to_json(s.theta_ref)}};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + cell + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

Scheme parse_scheme(const std::string& s) {
  if (s == "lattice") return Scheme::kLattice;
  if (s == "ito") return Scheme::kItoEuler;
  throw ConfigError("unknown scheme '" + s + "' (lattice|ito)");
}

SmootherMethod parse_smoother(const std::string& s) {
  if (s == "fb") return SmootherMethod::kForwardBackward;
  if (s == "frozen") return SmootherMethod::kFrozenAfterTau;
  throw ConfigError("unknown smoother '" + s + "' (fb|frozen)");
}

std::string read_bytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + file.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
}

// Bookkeeping for one invocation: inputs, outputs and the manifest.
class Run {
 public:
  Run(std::string command, const std::vector<std::string>& args)
      : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    for (std::size_t a = 0; a < args.size(); ++a) {
      std::string tok = args[a];
      if (a == 0) continue;  // subcommand name
      if (tok == "--out" && a + 1 < args.size()) {
        out_dir_ = args[++a];
        continue;
      }
      if (tok.rfind("--out=", 0) == 0) {
        out_dir_ = tok.substr(6);
        continue;
      }
      const auto eq = tok.find('=');
      const std::string flag = tok.substr(0, eq);
      const bool is_file = std::find(kFileFlags.begin(), kFileFlags.end(), flag) != kFileFlags.end();
      if (is_file && eq != std::string::npos) {
        recorded_.push_back(flag + "=" + fs::absolute(tok.substr(eq + 1)).string());
      } else if (is_file && a + 1 < args.size()) {
        recorded_.push_back(tok);
        recorded_.push_back(fs::absolute(args[++a]).string());
      } else {
        recorded_.push_back(tok);
      }
    }
  }

  fs::path out_dir() const { return out_dir_; }
  void prepare() {
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir_.string());
  }
  void input(const fs::path& file) { inputs_[fs::absolute(file).string()] = hex64(hash_bytes(read_bytes(file))); }
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return out_dir_ / name;
  }
  void seed(std::uint64_t s) { seed_ = s; }

  void write_manifest(int exit_code) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json hashed = {{"command", command_}, {"args", recorded_}, {"inputs", inputs_}};
    json m = {{"command", command_},
              {"args", recorded_},
              {"inputs", inputs_},
              {"config_hash", hex64(hash_json(hashed))},
              {"version", HYBRIDFILT_VERSION},
              {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
              {"outputs", outputs_},
              {"exit_code", exit_code},
              {"wall_time_s", wall}};
    m["seed"] = seed_ ? json(*seed_) : json(nullptr);
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    std::ofstream out(out_dir_ / "manifest.json");
    if (out) out << m.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> recorded_;
  fs::path out_dir_ = ".";
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
  std::optional<std::uint64_t> seed_;
  std::chrono::steady_clock::time_point start_;
};

struct Options {
  std::string model, theta, theta0, theta_init, y, path, scenario, manifest, out = ".";
  std::string smooth_at, tau, scheme = "lattice", smoother = "fb";
  double horizon = 0.0, dt = 0.0, tol = 1e-8, em_tol = 1e-6, mc_dt = 1e-3, mc_horizon = 2.0;
  std::uint64_t seed = 0;
  int max_iter = 500, em_max_iter = 100, jobs = 1, replicates = 1, restarts = 3;
  std::size_t particles = 20000;
  bool partial = false;
};

ModelConfig load_model_input(Run& run, const std::string& file) {
  run.input(file);
  return load_model(file);
}

Vector load_theta_input(Run& run, const std::string& file) {
  run.input(file);
  return load_theta(file);
}

void emit_json(std::ostream& out, Run& run, const std::string& name, const json& j) {
  const std::string text = j.dump(2) + "\n";
  write_text(run.output(name), text);
  out << text;
}

int cmd_simulate(const Options& o, Run& run, std::ostream& out) {
  const ModelConfig cfg = load_model_input(run, o.model);
  const Vector theta = load_theta_input(run, o.theta);
  run.seed(o.seed);
  if (o.replicates < 1) throw ConfigError("--replicates must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < o.replicates; ++r) seeds.push_back(o.seed + static_cast<std::uint64_t>(r));
  const auto paths = simulate_batch(cfg.spec, theta, o.horizon, o.dt, seeds, o.jobs);
  json summary = json::array();
  for (std::size_t r = 0; r < paths.size(); ++r) {
    char name[32];
    if (paths.size() == 1) std::snprintf(name, sizeof name, "path.csv");
    else std::snprintf(name, sizeof name, "path_%03zu.csv", r);
    const fs::path csv = run.output(name);
    run.output(sidecar_for(name).string());
    write_path(csv, paths[r], hex64(cfg.hash));
    summary.push_back({{"path", name},
                       {"seed", paths[r].seed},
                       {"grid_points", paths[r].size()},
                       {"jumps", paths[r].jumps.size()},
                       {"epsilon_hat", estimate_epsilon(paths[r])}});
    spdlog::info("{}: {} grid points, {} jumps", name, paths[r].size(), paths[r].jumps.size());
  }
  out << json(paths.size() == 1 ? summary[0] : summary).dump(2) << '\n';
  return kOk;
}

int cmd_filter(const Options& o, Run& run, std::ostream& out) {
  const ModelConfig cfg = load_model_input(run, o.model);
  const Vector theta = load_theta_input(run, o.theta);
  run.input(o.y);
  const YPath y = read_y_csv(o.y);
  FilterOptions fo;
  fo.scheme = parse_scheme(o.scheme);
  const PathBasis basis(y, cfg.spec);
  const FilterTrajectory traj = run_filter(basis, theta, fo);

  std::ostringstream csv;
  csv << "t,log_mass";
  for (int i = 0; i < cfg.spec.dims.k; ++i) csv << ",p_" << (i + 1);
  csv << '\n';
  for (std::size_t m = 0; m < traj.times.size(); ++m) {
    csv << format_double(traj.times[m]) << ',' << format_double(traj.log_mass[m]);
    for (int i = 0; i < cfg.spec.dims.k; ++i)
      csv << ',' << format_double(traj.sigma_hat(static_cast<Eigen::Index>(m), i));
    csv << '\n';
  }
  write_text(run.output("filter.csv"), csv.str());
  out << csv.str();

  if (!o.smooth_at.empty()) {
    const auto res = run_smoother(basis, traj, parse_list(o.smooth_at), parse_smoother(o.smoother));
    json arr = json::array();
    for (const auto& r : res)
      arr.push_back({{"tau", r.tau}, {"probs", theta_to_json(r.probs)}, {"snapped", r.snapped}});
    write_text(run.output("smooth.json"), json{{"smoother", arr}}.dump(2) + "\n");
  }
  spdlog::info("filter: log_mass {:.10g}, clamp events {}", log_total_mass(traj),
               traj.clamp_events);
  if (traj.clamp_events > 0)
    spdlog::warn("{} positivity-floor events; consider a smaller dt", traj.clamp_events);
  return kOk;
}

int cmd_smooth(const Options& o, Run& run, std::ostream& out) {
  const ModelConfig cfg = load_model_input(run, o.model);
  const Vector theta = load_theta_input(run, o.theta);
  run.input(o.y);
  const YPath y = read_y_csv(o.y);
  FilterOptions fo;
  fo.scheme = parse_scheme(o.scheme);
  const PathBasis basis(y, cfg.spec);
  const FilterTrajectory traj = run_filter(basis, theta, fo);
  const auto res = run_smoother(basis, traj, parse_list(o.tau), parse_smoother(o.smoother));
  json arr = json::array();
  for (const auto& r : res) {
    if (r.snapped) spdlog::info("tau snapped to grid time {}", r.tau);
    arr.push_back({{"tau", r.tau}, {"probs", theta_to_json(r.probs)}, {"snapped", r.snapped}});
  }
  emit_json(out, run, "smooth.json", {{"smoother", arr}});
  return kOk;
}

int cmd_loglik(const Options& o, Run& run, std::ostream& out) {
  const ModelConfig cfg = load_model_input(run, o.model);
  const Vector theta = load_theta_input(run, o.theta);
  const Vector theta0 = load_theta_input(run, o.theta0);
  run.input(o.path);
  run.input(sidecar_for(o.path));
  const HybridPath path = read_path(o.path);
  const CompleteLogLik ll = log_lik_complete(path, cfg.spec, theta, theta0);
  json j = {{"value", ll.value}, {"jump_part", ll.jump_part}, {"drift_part", ll.drift_part}};
  if (o.partial) {
    const PathBasis basis(path, cfg.spec);
    const PartialLogLik pl = log_lik_partial(basis, theta, theta0);
    j["partial"] = {{"value", pl.value},
                    {"log_mass_theta", pl.log_mass_theta},
                    {"log_mass_theta0", pl.log_mass_theta0},
                    {"innovations", innovations_loglik(basis, theta, theta0)}};
  }
  emit_json(out, run, "loglik.json", j);
  return kOk;
}

int cmd_mle(const Options& o, Run& run, std::ostream& out) {
  const ModelConfig cfg = load_model_input(run, o.model);
  const Vector init = load_theta_input(run, o.theta_init);
  run.input(o.y);
  const YPath y = read_y_csv(o.y);
  MLEOptions mo;
  mo.optimizer.tol = o.tol;
  mo.optimizer.max_iter = o.max_iter;
  mo.restarts = o.restarts;
  mo.seed = o.seed;
  mo.filter.scheme = parse_scheme(o.scheme);
  run.seed(o.seed);
  const MLEResult r = mle_partial(PathBasis(y, cfg.spec), init, mo);
  json trace = json::array();
  for (const auto& tp : r.trace)
    trace.push_back({{"theta", theta_to_json(tp.theta)}, {"objective", tp.objective}});
  emit_json(out, run, "mle.json",
            {{"theta_hat", theta_to_json(r.theta_hat)},
             {"log_mass_at_hat", r.log_mass_at_hat},
             {"iterations", r.iterations},
             {"converged", r.converged},
             {"trace", trace}});
  spdlog::info("mle: objective {:.10g} after {} iterations", r.log_mass_at_hat, r.iterations);
  return kOk;
}

int cmd_em(const Options& o, Run& run, std::ostream& out) {
  const ModelConfig cfg = load_model_input(run, o.model);
  const Vector init = load_theta_input(run, o.theta_init);
  run.input(o.y);
  const YPath y = read_y_csv(o.y);
  EMOptions eo;
  eo.max_iter = o.em_max_iter;
  eo.tol = o.em_tol;
  eo.filter.scheme = parse_scheme(o.scheme);
  const EMTrace tr = em_run(PathBasis(y, cfg.spec), init, eo);

  json iterates = json::array();
  std::ostringstream csv;
  csv << "n";
  for (int c = 0; c < cfg.spec.dims.p; ++c) csv << ",theta_" << (c + 1);
  csv << ",loglik\n";
  for (std::size_t n = 0; n < tr.iterates.size(); ++n) {
    const auto& it = tr.iterates[n];
    json s = stats_json(it.stats);
    s["log_mass"] = it.stats.log_mass;
    iterates.push_back(
        {{"n", n}, {"theta", theta_to_json(it.theta)}, {"loglik", it.loglik}, {"stats", s}});
    csv << n;
    for (Eigen::Index c = 0; c < it.theta.size(); ++c) csv << ',' << format_double(it.theta[c]);
    csv << ',' << format_double(it.loglik) << '\n';
  }
  write_text(run.output("em_iterations.csv"), csv.str());
  emit_json(out, run, "em.json",
            {{"iterates", iterates},
             {"converged", tr.converged},
             {"stop_reason", to_string(tr.stop_reason)}});
  spdlog::info("em: {} iterations, stop reason {}", tr.iterates.size() - 1,
               to_string(tr.stop_reason));
  return kOk;
}

int cmd_verify(const Options& o, Run& run, std::ostream& out, std::ostream& err) {
  run.seed(o.seed);
  VerifyOptions vo;
  vo.particles = o.particles;
  vo.jobs = o.jobs;
  if (o.dt > 0.0) vo.dt = o.dt;
  if (o.horizon > 0.0) vo.horizon = o.horizon;
  vo.mc_dt = o.mc_dt;
  vo.mc_horizon = o.mc_horizon;
  const VerifyReport rep = run_verification(o.scenario, o.seed, vo);
  emit_json(out, run, "verify.json", rep.to_json());
  std::size_t passed = 0;
  for (const auto& c : rep.checks) passed += c.pass;
  err << "verify " << o.scenario << ": " << passed << "/" << rep.checks.size() << " checks passed\n";
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation, filtering and estimation for switching diffusions", "hybridfilt"};
  app.require_subcommand(1);
  Options o;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
  };
  auto add_jobs = [&](CLI::App* sub) {
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Simulate a hybrid path");
  add_model(sim);
  sim->add_option("--theta", o.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--T", o.horizon, "Horizon")->required();
  sim->add_option("--dt", o.dt, "Time step")->required();
  sim->add_option("--seed", o.seed, "RNG seed")->required();
  sim->add_option("--replicates", o.replicates, "Number of paths (seeds seed, seed+1, ...)");
  add_jobs(sim);
  add_out(sim);

  auto* filt = app.add_subcommand("filter", "Run the filter along an observed path");
  filt->add_option("--y", o.y, "Observation CSV")->required()->check(CLI::ExistingFile);
  add_model(filt);
  filt->add_option("--theta", o.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
  filt->add_option("--smooth-at", o.smooth_at, "Comma-separated smoothing times");
  filt->add_option("--scheme", o.scheme, "lattice|ito")->capture_default_str();
  filt->add_option("--smoother", o.smoother, "fb|frozen")->capture_default_str();
  add_out(filt);

  auto* smooth = app.add_subcommand("smooth", "Smoothing probabilities at given times");
  smooth->add_option("--y", o.y, "Observation CSV")->required()->check(CLI::ExistingFile);
  add_model(smooth);
  smooth->add_option("--theta", o.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
  smooth->add_option("--tau", o.tau, "Comma-separated times")->required();
  smooth->add_option("--scheme", o.scheme, "lattice|ito")->capture_default_str();
  smooth->add_option("--smoother", o.smoother, "fb|frozen")->capture_default_str();
  add_out(smooth);

  auto* ll = app.add_subcommand("loglik", "Complete-observation log-likelihood ratio");
  ll->add_option("--path", o.path, "Path CSV with sidecar")->required()->check(CLI::ExistingFile);
  add_model(ll);
  ll->add_option("--theta", o.theta, "Parameter JSON")->required()->check(CLI::ExistingFile);
  ll->add_option("--theta0", o.theta0, "Reference JSON")->required()->check(CLI::ExistingFile);
  ll->add_flag("--partial", o.partial, "Also report the partial-observation likelihood");
  add_out(ll);

  auto* mle = app.add_subcommand("mle", "Partial-observation maximum likelihood");
  mle->add_option("--y", o.y, "Observation CSV")->required()->check(CLI::ExistingFile);
  add_model(mle);
  mle->add_option("--theta-init", o.theta_init, "Initial parameter JSON")
      ->required()
      ->check(CLI::ExistingFile);
  mle->add_option("--tol", o.tol, "Simplex objective spread")->capture_default_str();
  mle->add_option("--max-iter", o.max_iter, "Iterations per run")->capture_default_str();
  mle->add_option("--restarts", o.restarts, "Jittered restarts")->capture_default_str();
  mle->add_option("--seed", o.seed, "Restart seed")->capture_default_str();
  mle->add_option("--scheme", o.scheme, "lattice|ito")->capture_default_str();
  add_out(mle);

  auto* em = app.add_subcommand("em", "EM estimation");
  em->add_option("--y", o.y, "Observation CSV")->required()->check(CLI::ExistingFile);
  add_model(em);
  em->add_option("--theta-init", o.theta_init, "Initial parameter JSON")
      ->required()
      ->check(CLI::ExistingFile);
  em->add_option("--max-iter", o.em_max_iter, "Maximum iterations")->capture_default_str();
  em->add_option("--tol", o.em_tol, "Parameter change tolerance")->capture_default_str();
  em->add_option("--scheme", o.scheme, "lattice|ito")->capture_default_str();
  add_out(em);

  auto* ver = app.add_subcommand("verify", "Oracle cross-checks on a built-in scenario");
  ver->add_option("--scenario", o.scenario, "wonham|state_dependent|ode")
      ->required()
      ->check(CLI::IsMember({"wonham", "state_dependent", "ode"}));
  ver->add_option("--seed", o.seed, "RNG seed")->required();
  ver->add_option("--particles", o.particles, "Monte-Carlo particles")->capture_default_str();
  ver->add_option("--dt", o.dt, "Filter step (default 1e-4)");
  ver->add_option("--T", o.horizon, "Filter horizon (default 5)");
  ver->add_option("--mc-dt", o.mc_dt, "Monte-Carlo step")->capture_default_str();
  ver->add_option("--mc-T", o.mc_horizon, "Monte-Carlo horizon")->capture_default_str();
  add_jobs(ver);
  add_out(ver);

  auto* rep = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rep->add_option("--manifest", o.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  add_out(rep);

  std::vector<std::string> argv_store = {"hybridfilt"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kConfigFailure;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  if (command == "replay") {
    const json m = read_json_file(o.manifest);
    std::vector<std::string> again = {m.at("command").get<std::string>()};
    for (const auto& a : m.at("args")) again.push_back(a.get<std::string>());
    again.push_back("--out");
    again.push_back(o.out);
    return dispatch(again, out, err);
  }

  Run run(command, args);
  int code = kOk;
  try {
    run.prepare();
    if (command == "simulate") code = cmd_simulate(o, run, out);
    else if (command == "filter") code = cmd_filter(o, run, out);
    else if (command == "smooth") code = cmd_smooth(o, run, out);
    else if (command == "loglik") code = cmd_loglik(o, run, out);
    else if (command == "mle") code = cmd_mle(o, run, out);
    else if (command == "em") code = cmd_em(o, run, out);
    else if (command == "verify") code = cmd_verify(o, run, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    code = kConfigFailure;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    code = kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kConfigFailure;
  }
  run.write_manifest(code);
  return code;
}

}  // namespace hybridfilt::cli
