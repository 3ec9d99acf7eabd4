#include "cli.hpp"

#include "hybridfilt/model_io.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path configs() {
  const char* env = std::getenv("HYBRIDFILT_CONFIGS");
  return env ? fs::path(env) : fs::path(HYBRIDFILT_SOURCE_DIR) / "configs";
}

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = hybridfilt::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& s) const { return (path_ / s).string(); }

 private:
  fs::path path_;
};

}  // namespace

TEST_CASE("simulate, filter, estimate and verify") {
  TempDir tmp("hybridfilt_cli_pipeline");
  const std::string model = (configs() / "wonham.json").string();
  const std::string theta = (configs() / "wonham_theta.json").string();

  const Result sim = run({"simulate", "--model", model, "--theta", theta, "--T", "10", "--dt",
                          "1e-3", "--seed", "42", "--out", tmp / "run1"});
  REQUIRE(sim.code == 0);
  CHECK(fs::exists(tmp / "run1/path.csv"));
  CHECK(fs::exists(tmp / "run1/path.json"));
  const json manifest = read_json(tmp / "run1/manifest.json");
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["seed"] == 42);
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest.contains("version"));
  CHECK(manifest.contains("wall_time_s"));

  const std::string y = tmp / "run1/path.csv";
  const Result filt = run({"filter", "--y", y, "--model", model, "--theta", theta, "--smooth-at",
                           "2.5,5", "--out", tmp / "filter"});
  REQUIRE(filt.code == 0);
  CHECK(filt.out.rfind("t,log_mass,p_1,p_2\n", 0) == 0);
  CHECK(read_json(tmp / "filter/smooth.json")["smoother"].size() == 2);

  const Result em = run({"em", "--y", y, "--model", model, "--theta-init", theta, "--max-iter",
                         "20", "--out", tmp / "em"});
  REQUIRE(em.code == 0);
  const json emj = read_json(tmp / "em/em.json");
  CHECK(emj["iterates"].size() >= 2);
  CHECK(slurp(tmp / "em/em_iterations.csv").rfind("n,theta_1,theta_2,theta_3,loglik\n", 0) == 0);

  const Result ll = run({"loglik", "--path", y, "--model", model, "--theta", theta, "--theta0",
                         theta, "--partial", "--out", tmp / "ll"});
  REQUIRE(ll.code == 0);
  const json llj = read_json(tmp / "ll/loglik.json");
  CHECK(llj["value"] == 0.0);
  CHECK(llj["partial"]["value"] == 0.0);

  const Result mle = run({"mle", "--y", y, "--model", model, "--theta-init", theta, "--restarts",
                          "0", "--tol", "1e-6", "--out", tmp / "mle"});
  REQUIRE(mle.code == 0);
  CHECK(read_json(tmp / "mle/mle.json")["theta_hat"].size() == 3);

  const Result ver = run({"verify", "--scenario", "wonham", "--seed", "3", "--dt", "1e-3",
                          "--particles", "4000", "--mc-T", "1", "--out", tmp / "verify"});
  REQUIRE(ver.code == 0);
  const json vj = read_json(tmp / "verify/verify.json");
  CHECK(vj["pass"] == true);
  CHECK(ver.err.find("checks passed") != std::string::npos);
}

TEST_CASE("manifest replay reproduces outputs byte for byte") {
  TempDir tmp("hybridfilt_cli_replay");
  const std::string model = (configs() / "state_dependent.json").string();
  const std::string theta = (configs() / "state_dependent_theta.json").string();
  REQUIRE(run({"simulate", "--model", model, "--theta", theta, "--T", "3", "--dt", "1e-3",
               "--seed", "5", "--out", tmp / "a"})
              .code == 0);
  REQUIRE(run({"replay", "--manifest", tmp / "a/manifest.json", "--out", tmp / "b"}).code == 0);
  CHECK(slurp(tmp / "a/path.csv") == slurp(tmp / "b/path.csv"));
  CHECK(slurp(tmp / "a/path.json") == slurp(tmp / "b/path.json"));

  REQUIRE(run({"em", "--y", tmp / "a/path.csv", "--model", model, "--theta-init", theta,
               "--max-iter", "5", "--out", tmp / "em1"})
              .code == 0);
  REQUIRE(run({"replay", "--manifest", tmp / "em1/manifest.json", "--out", tmp / "em2"}).code == 0);
  CHECK(slurp(tmp / "em1/em.json") == slurp(tmp / "em2/em.json"));
  CHECK(slurp(tmp / "em1/em_iterations.csv") == slurp(tmp / "em2/em_iterations.csv"));
  const json m1 = read_json(tmp / "em1/manifest.json");
  const json m2 = read_json(tmp / "em2/manifest.json");
  CHECK(m1["config_hash"] == m2["config_hash"]);
  CHECK(m1["inputs"] == m2["inputs"]);
}

TEST_CASE("exit codes") {
  TempDir tmp("hybridfilt_cli_codes");
  const std::string model = (configs() / "ode.json").string();
  const std::string theta = (configs() / "ode_theta.json").string();

  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"simulate", "--model", model, "--theta", theta, "--T", "1", "--dt", "1e-3"}).code == 1);
  CHECK(run({"simulate", "--model", tmp / "missing.json", "--theta", theta, "--T", "1", "--dt",
             "1e-3", "--seed", "1"})
            .code == 1);

  {
    std::ofstream bad(tmp / "bad.json");
    bad << "{\"dims\": {\"k\": 2";
  }
  CHECK(run({"simulate", "--model", tmp / "bad.json", "--theta", theta, "--T", "1", "--dt", "1e-3",
             "--seed", "1", "--out", tmp / "x"})
            .code == 1);

  // A reference parameter with a vanishing rate cannot explain an observed jump.
  json m = hybridfilt::read_json_file(model);
  m["theta_box"]["lower"] = {0.0, 0.0};
  {
    std::ofstream f(tmp / "open.json");
    f << m.dump();
    std::ofstream t0(tmp / "zero.json");
    t0 << "[0.0, 1.0]";
  }
  REQUIRE(run({"simulate", "--model", tmp / "open.json", "--theta", theta, "--T", "5", "--dt",
               "1e-3", "--seed", "2", "--out", tmp / "p"})
              .code == 0);
  REQUIRE(read_json(tmp / "p/path.json")["jumps"].size() > 0);
  const Result r = run({"loglik", "--path", tmp / "p/path.csv", "--model", tmp / "open.json",
                        "--theta", theta, "--theta0", tmp / "zero.json", "--out", tmp / "ll"});
  CHECK(r.code == 2);
  CHECK(read_json(tmp / "ll/manifest.json")["exit_code"] == 2);
}
