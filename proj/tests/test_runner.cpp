#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "qsdnoise/runner.hpp"

using namespace qsdnoise;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("qsdnoise_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig parse(const std::string& text) {
  const ParseResult r = parse_config(text);
  REQUIRE(r.ok());
  return r.config;
}

RunReport run_quiet(const ExperimentConfig& c, const fs::path& out, std::optional<std::size_t> threads = {}) {
  std::ostringstream log;
  RunOptions opts;
  opts.out_dir = out;
  opts.threads = threads;
  return run(c, opts, log);
}

std::map<std::string, std::string> data_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") out[e.path().filename().string()] = slurp(e.path());
  return out;
}

const char* kSimulate =
    "mode = simulate\ngamma = 0.2\nJ = 15\nW = 200\ng = 0.4\nhorizon = 4\nn_trains = 20\n"
    "n_traj = 40\ndensity = true\noutput_stride = 500\n";

}  // namespace

TEST_CASE("simulate is byte-reproducible across reruns and thread counts") {
  TempDir a("run_a"), b("run_b"), c("run_c");
  const ExperimentConfig cfg = parse(kSimulate);
  const RunReport ra = run_quiet(cfg, a.path, 1);
  REQUIRE(ra.code == ExitCode::ok);
  REQUIRE(run_quiet(cfg, b.path, 1).code == ExitCode::ok);
  REQUIRE(run_quiet(cfg, c.path, 4).code == ExitCode::ok);

  const auto fa = data_files(a.path);
  CHECK(fa.size() == 3);
  CHECK(fa.count("fidelity_free_gamma0.2.csv") == 1);
  CHECK(fa.count("fidelity_gamma0.2_J15_W200perT.csv") == 1);
  CHECK(fa.count("density_gamma0.2_J15_W200perT.csv") == 1);
  CHECK(fa == data_files(b.path));
  CHECK(fa == data_files(c.path));
  CHECK(ra.files.back() == "manifest.json");

  const auto manifest = nlohmann::json::parse(slurp(a.path / "manifest.json"));
  CHECK(manifest["master_seed"] == 20130901);
  CHECK(manifest["files"].size() == 3);
  for (const auto& f : manifest["files"]) {
    const std::string content = fa.at(f["name"].get<std::string>());
    CHECK(f["bytes"] == content.size());
  }
  CHECK(manifest["execution"].contains("wall_clock_seconds"));
  for (const auto& [name, content] : fa) {
    CHECK(content.rfind("#", 0) == 0);
    CHECK(content.find("master_seed") != std::string::npos);
  }
}

TEST_CASE("seed override changes the data") {
  TempDir a("seed_a"), b("seed_b");
  const ExperimentConfig cfg = parse(kSimulate);
  REQUIRE(run_quiet(cfg, a.path).code == ExitCode::ok);
  RunOptions opts;
  opts.out_dir = b.path;
  opts.seed = 99;
  std::ostringstream log;
  REQUIRE(run(cfg, opts, log).code == ExitCode::ok);
  const auto fa = data_files(a.path), fb = data_files(b.path);
  CHECK(fa.at("fidelity_free_gamma0.2.csv") != fb.at("fidelity_free_gamma0.2.csv"));  // seed in header
  CHECK(fa.at("fidelity_gamma0.2_J15_W200perT.csv") != fb.at("fidelity_gamma0.2_J15_W200perT.csv"));
}

TEST_CASE("sweep writes one grid per probe time") {
  TempDir d("sweep");
  const ExperimentConfig cfg =
      parse("mode = sweep\nJ_values = 0, 15\nW_values = 200, 1000\nn_traj = 2\n");
  REQUIRE(run_quiet(cfg, d.path).code == ExitCode::ok);
  const auto files = data_files(d.path);
  CHECK(files.count("sweep_t50T.csv") == 1);
  CHECK(files.count("sweep_t100T.csv") == 1);
  CHECK(files.count("plateau.csv") == 1);
}

TEST_CASE("noise-test reports pass flags") {
  TempDir d("noise");
  const ExperimentConfig cfg = parse(
      "mode = noise-test\nJ = 3\nW = 200\nhorizon = 10\nn_paths = 2000\nou_length = 30\n");
  REQUIRE(run_quiet(cfg, d.path).code == ExitCode::ok);
  const auto j = nlohmann::json::parse(slurp(d.path / "moments.json"));
  CHECK(j.contains("pass"));
  CHECK(j["shot_noise"]["checks"].contains("mean_c_within_3sigma"));
  CHECK(j["environment_noise"]["checks"].contains("autocorrelation_rms_below_5pct"));
  CHECK(j["shot_noise"]["mean_c"]["target"].get<double>() == doctest::Approx(3.0 * 40.0));
}

TEST_CASE("washout, markov-scan and crosscheck modes") {
  TempDir d("modes");
  REQUIRE(run_quiet(parse("mode = washout\nW = 200\nhorizon = 2\noutput_stride = 100\n"), d.path / "w").code ==
          ExitCode::ok);
  CHECK(fs::exists(d.path / "w" / "washout_J3.csv"));
  CHECK(fs::exists(d.path / "w" / "washout_summary.csv"));
  REQUIRE(run_quiet(parse("mode = markov-scan\nJ = 15\nW = 200\nt_probe = 1\nn_trains = 4\n"
                          "gamma_values = 0.2, 2\n"),
                    d.path / "m")
              .code == ExitCode::ok);
  CHECK(fs::exists(d.path / "m" / "markov_scan.csv"));
  REQUIRE(run_quiet(parse("mode = crosscheck\nhorizon = 2\n"), d.path / "c").code == ExitCode::ok);
  const auto j = nlohmann::json::parse(slurp(d.path / "c" / "convention.json"));
  CHECK(j["ratio_equals_g"] == true);
}

TEST_CASE("failures map to exit codes and publish nothing") {
  TempDir d("fail");
  SUBCASE("validation") {
    ExperimentConfig cfg = parse(kSimulate);
    cfg.W = -1.0;
    const RunReport r = run_quiet(cfg, d.path);
    CHECK(r.code == ExitCode::validation);
    CHECK(r.message.find("W") != std::string::npos);
    CHECK_FALSE(fs::exists(d.path));
  }
  SUBCASE("output cannot be published") {
    fs::create_directories(d.path / "manifest.json" / "occupied");
    const RunReport r = run_quiet(parse(kSimulate), d.path);
    CHECK(r.code == ExitCode::io);
    for (const auto& e : fs::directory_iterator(d.path))
      CHECK(e.path().filename() == "manifest.json");
  }
  SUBCASE("output directory is a file") {
    fs::create_directories(d.path);
    std::ofstream(d.path / "file") << "x";
    CHECK(run_quiet(parse(kSimulate), d.path / "file" / "out").code == ExitCode::io);
  }
}

TEST_CASE("command-line front end") {
  const char* cli = std::getenv("QSDNOISE_CLI");
  if (!cli) return;
  TempDir d("cli");
  fs::create_directories(d.path);
  std::ofstream(d.path / "bad.cfg") << "J = 3\nW = -1\n";
  std::ofstream(d.path / "good.cfg") << "horizon = 1\noutput_stride = 100\n";
  auto sh = [&](const std::string& args) {
    const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(sh("simulate --config " + (d.path / "bad.cfg").string()) == 2);
  CHECK(sh("crosscheck --config " + (d.path / "missing.cfg").string()) == 4);
  CHECK(sh("bogus") == 2);
  CHECK(sh("crosscheck --config " + (d.path / "good.cfg").string() + " --print-config") == 0);
  CHECK(sh("crosscheck --config " + (d.path / "good.cfg").string() + " --seed 5 --threads 2 --out " +
           (d.path / "out").string()) == 0);
  CHECK(fs::exists(d.path / "out" / "convention.csv"));
  const auto m = nlohmann::json::parse(slurp(d.path / "out" / "manifest.json"));
  CHECK(m["master_seed"] == 5);
}
