#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "splinegp/cli.hpp"
#include "splinegp/config.hpp"
#include "splinegp/data.hpp"
#include "splinegp/errors.hpp"

using namespace splinegp;
namespace fs = std::filesystem;

namespace {

const fs::path kData = fs::path(SPLINEGP_SOURCE_DIR) / "data";

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("splinegp_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "splinegp");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string smoke_config(const fs::path& dir) {
  const std::string text = "[mcmc]\nchains = 2\niters = 200\nwarmup = 100\n"
                           "[prior]\nknots_age = 6\nknots_week = 4\n"
                           "[fit]\ncdc = \"" + (kData / "smoke_cdc.csv").string() + "\"\n"
                           "calibration = \"" + (kData / "smoke_calibration.csv").string() + "\"\n"
                           "draws_per_chain = 50\n";
  const fs::path p = dir / "smoke.toml";
  write_file(p, text);
  return p.string();
}

}  // namespace

TEST_CASE("config files resolve paths and reject unknown keys") {
  const auto cfg = config::parse_config("[fit]\ncdc = \"in/cdc.csv\"\nstates = [\"S1\"]\n[run]\nseed = 4\n", "/base");
  CHECK(cfg.cdc_path == "/base/in/cdc.csv");
  CHECK(cfg.states == std::vector<std::string>{"S1"});
  CHECK(cfg.seed == 4);
  CHECK_THROWS_AS(config::parse_config("[run]\nbogus = 1\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[nowhere]\nseed = 1\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[run]\nseed = \"one\"\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[run\nseed = 1\n"), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[prior]\nkind = \"wavelets\"\n"), ValidationError);
  CHECK(config::parse_config("[mcmc]\nseed = 8\niters = 50\n").seed == 8);
  CHECK(config::parse_config("[mcmc]\niters = 50\n").mcmc.iterations == 50);
  CHECK_THROWS_AS(config::parse_config("[run]\nseed = 1\n[mcmc]\nseed = 2\n"), ValidationError);
}

TEST_CASE("config hash tracks results but not where they are written") {
  auto a = config::parse_config("[run]\nseed = 3\nout = \"x\"\nthreads = 1\n");
  auto b = config::parse_config("[run]\nseed = 3\nout = \"y\"\nthreads = 4\n");
  auto c = config::parse_config("[run]\nseed = 4\n");
  a.command = "fit";
  b.command = "meta";
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash().size() == 16);
  CHECK(config::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(config::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(cli::provenance_line(a) == "# config_hash=" + a.hash() + " seed=3");
}

TEST_CASE("range checks reject settings before any work") {
  auto cfg = config::parse_config("[simulate]\ntrain_fraction = 1.5\n");
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[prior]\nknots_age = 1\n").validate(), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[mcmc]\nwarmup = 2000\n").validate(), ValidationError);
  CHECK_THROWS_AS(config::parse_config("[meta]\nscenario_rate = 1.5\n").validate(), ValidationError);
}

TEST_CASE("fit and predict stamp every output and rerun byte for byte") {
  const auto dir = fresh_dir("fit");
  const auto conf = smoke_config(dir);
  auto r1 = run({"fit", "--config", conf, "--out", (dir / "a").string(), "--seed", "9"});
  REQUIRE(r1.code == cli::kExitOk);
  auto r2 = run({"fit", "--config", conf, "--out", (dir / "b").string(), "--seed", "9", "--threads", "2"});
  REQUIRE(r2.code == cli::kExitOk);
  auto cfg = config::load_config(conf);
  cfg.seed = 9;
  const std::string stamp = cli::provenance_line(cfg);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    ++files;
    CHECK(first_line(e.path()) == stamp);
    CHECK(read_file(e.path()) == read_file(dir / "b" / e.path().filename()));
  }
  CHECK(files == 5);

  auto p = run({"predict", "--config", conf, "--out", (dir / "a").string(), "--seed", "9"});
  REQUIRE(p.code == cli::kExitOk);
  CHECK(first_line(dir / "a" / "predict_SM.csv") == stamp);
  CHECK(first_line(dir / "a" / "ppc_SM.csv") == stamp);

  // Draws from seed 9 do not belong to a seed 10 run.
  auto stale = run({"predict", "--config", conf, "--out", (dir / "a").string(), "--seed", "10"});
  CHECK(stale.code == cli::kExitInput);
  CHECK(stale.err.find("different configuration") != std::string::npos);
}

TEST_CASE("command-line flags win over the config file") {
  const auto dir = fresh_dir("flags");
  const auto conf = smoke_config(dir);
  write_file(dir / "over.toml", read_file(conf) + "[run]\nseed = 2\n");
  auto r = run({"fit", "--config", (dir / "over.toml").string(), "--seed", "5", "--out", (dir / "o").string(),
                "--knots-age", "5"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(first_line(dir / "o" / "fit_SM.csv").find("seed=5") != std::string::npos);
  // 5 x 4 surface coefficients after the count and smoothing parameters.
  CHECK(r.err.find("3 bands, 8 weeks") != std::string::npos);
  auto cfg = config::load_config((dir / "over.toml").string());
  cfg.seed = 5;
  cfg.knots_age = 5;
  CHECK(first_line(dir / "o" / "fit_SM.csv") == cli::provenance_line(cfg));
}

TEST_CASE("input problems exit with code 2") {
  const auto dir = fresh_dir("errors");
  write_file(dir / "frac.toml", "[simulate]\ntrain_fraction = 1.5\n");
  auto r = run({"simulate", "--config", (dir / "frac.toml").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find("train fraction") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "o"));

  write_file(dir / "key.toml", "[fit]\ncsv = \"x\"\n");
  CHECK(run({"fit", "--config", (dir / "key.toml").string()}).code == cli::kExitInput);
  CHECK(run({"fit", "--config", (dir / "absent.toml").string()}).code == cli::kExitInput);
  CHECK(run({"frobnicate"}).code == cli::kExitInput);
  CHECK(run({"fit", "--prior", "wavelets"}).code == cli::kExitInput);

  const auto conf = smoke_config(dir);
  auto missing = run({"predict", "--config", conf, "--out", (dir / "nofit").string()});
  CHECK(missing.code == cli::kExitInput);
  CHECK(missing.err.find("missing upstream fit") != std::string::npos);
  auto unknown_state = run({"fit", "--config", conf, "--state", "ZZ", "--out", (dir / "o").string()});
  CHECK(unknown_state.code == cli::kExitInput);
}

TEST_CASE("meta without upstream fits exits with code 2") {
  const auto dir = fresh_dir("meta_missing");
  write_file(dir / "vacc.csv", "state,week_start_date,age_class,rate\nS1,2021-06-05,18-64,0.3\nS1,2021-06-05,65+,0.8\n");
  write_file(dir / "m.toml", "[meta]\nvaccination = \"vacc.csv\"\n");
  auto r = run({"meta", "--config", (dir / "m.toml").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kExitInput);
  CHECK(r.err.find("mustar_S1.csv") != std::string::npos);
}

TEST_CASE("sampler failures exit with code 3") {
  const auto dir = fresh_dir("numerical");
  std::ofstream pts(dir / "huge.csv");
  pts << "x,y,value\n";
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (int k = 0; k < 60; ++k) pts << u(rng) << "," << u(rng) << ",1e200\n";
  pts.close();
  write_file(dir / "h.toml", "[benchmark]\ndata = \"huge.csv\"\ntrain_size = 40\ntest_size = 20\n"
                             "methods = [\"bsplines:4\"]\n[mcmc]\nchains = 2\niters = 100\nwarmup = 50\n");
  auto r = run({"benchmark", "--config", (dir / "h.toml").string(), "--out", (dir / "o").string()});
  CHECK(r.code == cli::kExitNumerical);
  CHECK(r.err.find("numerical error") != std::string::npos);
}

TEST_CASE("simulate and benchmark outputs carry the seed") {
  const auto dir = fresh_dir("sim");
  write_file(dir / "s.toml",
             "[run]\nseed = 12\n[mcmc]\nchains = 2\niters = 120\nwarmup = 60\n"
             "[simulate]\ngrid_size = 8\nreplicates = 2\nmethods = [\"projected-gp:4\", \"bsplines:4\"]\n"
             "[benchmark]\ndata = \"" + (kData / "benchmark_points.csv").string() + "\"\n"
             "train_size = 150\ntest_size = 50\nmethods = [\"psplines:5\"]\n");
  auto s = run({"simulate", "--config", (dir / "s.toml").string(), "--out", (dir / "o").string()});
  REQUIRE(s.code == cli::kExitOk);
  auto b = run({"benchmark", "--config", (dir / "s.toml").string(), "--out", (dir / "o").string()});
  REQUIRE(b.code == cli::kExitOk);
  for (const char* f : {"simulation.csv", "surfaces.csv", "timing.csv", "benchmark.csv", "benchmark_timing.csv"}) {
    CHECK(first_line(dir / "o" / f).find("seed=12") != std::string::npos);
  }
  // Replicate r runs on seed + r - 1; 2 replicates x 2 methods.
  std::ifstream in(dir / "o" / "simulation.csv");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  int rows = 0, seed13 = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("2,13,", 0) == 0) ++seed13;
  }
  CHECK(rows == 4);
  CHECK(seed13 == 2);
}

TEST_CASE("meta reads upstream trajectories and reports every effect") {
  // Six states share one trajectory apart from a level and small noise.
  const auto dir = fresh_dir("meta_null");
  const std::string toml = "[mcmc]\nchains = 2\niters = 300\nwarmup = 150\n"
                           "[meta]\nvaccination = \"vacc.csv\"\nresurgence_from = \"2021-07-01\"\n";
  write_file(dir / "m.toml", toml);
  auto cfg = config::load_config((dir / "m.toml").string());
  const std::string stamp = cli::provenance_line(cfg);
  std::ofstream vacc(dir / "vacc.csv");
  vacc << "state,week_start_date,age_class,rate\n";
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.08);
  const data::Date first = data::parse_date("2021-05-01");
  for (int s = 0; s < 6; ++s) {
    const std::string code = "N" + std::to_string(s + 1);
    vacc << code << ",2021-05-01,18-64," << 0.2 + 0.05 * s << "\n";
    vacc << code << ",2021-05-01,65+," << 0.7 + 0.04 * s << "\n";
    std::ofstream mu(dir / ("mustar_" + code + ".csv"));
    mu << stamp << "\nage,week,date,mean\n";
    for (int a = 0; a < 106; ++a) {
      for (int w = 1; w <= 16; ++w) {
        const double level = w <= 9 ? 1.0 - 0.05 * w : 0.55 + 0.35 * (w - 9);
        const double v = (1.0 + 0.1 * s) * level * std::exp(noise(rng)) * (0.2 + a / 106.0);
        mu << a << "," << w << "," << data::format_date(first + std::chrono::days{7 * (w - 1)}) << "," << v
           << "\n";
      }
    }
  }
  vacc.close();
  auto r = run({"meta", "--config", (dir / "m.toml").string(), "--out", dir.string()});
  REQUIRE(r.code == cli::kExitOk);
  std::ifstream eff(dir / "effects.csv");
  std::string line;
  std::set<std::string> seen;
  while (std::getline(eff, line)) {
    std::stringstream row(line);
    std::vector<std::string> f;
    for (std::string c; std::getline(row, c, ',');) f.push_back(c);
    if (f.size() != 8) continue;
    seen.insert(f[0]);
    if (f[0] != "name") CHECK(std::stod(f[3]) <= std::stod(f[5]));
  }
  CHECK(seen.count("chi_vacc") == 1);
  CHECK(seen.count("psi_vacc") == 1);
  CHECK(seen.count("chi_vacc_cross[65+]") == 1);
  CHECK(seen.count("kappa[N6]") == 1);
  CHECK(r.err.find("N3: resurgence from week 10 (2021-07-03)") != std::string::npos);
  CHECK(fs::exists(dir / "counterfactual.csv"));
  CHECK(fs::exists(dir / "meta_ppc.csv"));
}
