#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli = CENNFORGE_CLI_PATH;

int run(const std::string& args) {
  std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>/dev/null";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / "cennforge_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path only_run_dir(const fs::path& out) {
  for (const auto& e : fs::directory_iterator(out)) return e.path();
  return {};
}

}  // namespace

TEST_CASE("run subcommand smoke: preset, random weights, random images") {
  fs::path out = fresh_dir("smoke");
  int rc = run("run --network preset:mnist_design1 --random-images 3 --mode ideal --seed 2 --out " +
               out.string());
  CHECK(rc == 0);
  fs::path rd = only_run_dir(out);
  CHECK(fs::exists(rd / "report.txt"));
  CHECK(fs::exists(rd / "costs.csv"));
  CHECK(fs::exists(rd / "predictions.csv"));
  std::string pred = slurp(rd / "predictions.csv");
  CHECK(std::count(pred.begin(), pred.end(), '\n') == 4);  // header + 3 rows
}

TEST_CASE("cost-only run emits the per-layer table") {
  fs::path out = fresh_dir("costonly");
  int rc = run("run --network preset:mnist_design2 --mode ideal --out " + out.string());
  CHECK(rc == 0);
  std::string csv = slurp(only_run_dir(out) / "costs.csv");
  CHECK(csv.find("conv4") != std::string::npos);
  CHECK(csv.find("total,,") != std::string::npos);
}

TEST_CASE("missing weights file fails with nonzero exit") {
  fs::path out = fresh_dir("badweights");
  int rc = run("run --network preset:mnist_design1 --weights /nope/missing.w --out " +
               out.string());
  CHECK(rc != 0);
}

TEST_CASE("identical seeds produce byte-identical reports") {
  fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  std::string common =
      "run --network preset:mnist_design2 --random-images 4 --mode quantized --seed 77 --out ";
  REQUIRE(run(common + a.string()) == 0);
  REQUIRE(run(common + b.string()) == 0);
  for (const char* f : {"report.txt", "costs.csv", "analytic.csv", "predictions.csv"}) {
    CAPTURE(f);
    std::string fa = slurp(only_run_dir(a) / f), fb = slurp(only_run_dir(b) / f);
    CHECK(!fa.empty());
    CHECK(fa == fb);
  }
}

TEST_CASE("reruns append new run directories") {
  fs::path out = fresh_dir("append");
  std::string cmd = "run --network preset:mnist_design1 --seed 1 --out " + out.string();
  REQUIRE(run(cmd) == 0);
  fs::path first = only_run_dir(out);
  std::string before = slurp(first / "costs.csv");
  REQUIRE(run(cmd) == 0);
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    (void)e;
    ++dirs;
  }
  CHECK(dirs == 2);
  CHECK(slurp(first / "costs.csv") == before);  // prior outputs untouched
}

TEST_CASE("sweep over pool_kind") {
  fs::path out = fresh_dir("sweep_pool");
  int rc = run(
      "sweep --network preset:mnist_design2 --axis pool_kind --values max_linear,avg,nonlinear "
      "--out " +
      out.string());
  CHECK(rc == 0);
  std::string csv = slurp(only_run_dir(out) / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  // avg pooling needs 1 step per pooling layer vs 16: delay must drop
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);  // header
  double delays[3];
  for (double& d : delays) {
    std::getline(ss, line);
    size_t p1 = line.find(',', line.find(',') + 1);
    d = std::stod(line.substr(p1 + 1));
  }
  CHECK(delays[1] < delays[0]);  // avg < max_linear
  CHECK(delays[2] < delays[0]);  // nonlinear < max_linear
}

TEST_CASE("sweep over n_arrays shows non-increasing delay") {
  fs::path out = fresh_dir("sweep_n");
  int rc = run("sweep --network preset:mnist_design1 --axis n_arrays --values 2,4,8 --out " +
               out.string());
  CHECK(rc == 0);
  std::string csv = slurp(only_run_dir(out) / "sweep.csv");
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  double prev = 1e99;
  while (std::getline(ss, line)) {
    size_t p1 = line.find(',', line.find(',') + 1);
    double d = std::stod(line.substr(p1 + 1));
    CHECK(d <= prev);
    prev = d;
  }
}

TEST_CASE("sweep with an empty axis errors out") {
  fs::path out = fresh_dir("sweep_bad");
  CHECK(run("sweep --network preset:mnist_design1 --axis pool_kind --values '' --out " +
            out.string()) != 0);
  CHECK(run("sweep --network preset:mnist_design1 --axis nonsense --values 1 --out " +
            out.string()) != 0);
}

TEST_CASE("precision sweep") {
  fs::path out = fresh_dir("sweep_bits");
  int rc = run("sweep --network preset:mnist_design1 --axis precision --values 4,8 --out " +
               out.string());
  CHECK(rc == 0);
  std::string csv = slurp(only_run_dir(out) / "sweep.csv");
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::getline(ss, line);
  size_t p = line.find(',', line.find(',') + 1);
  double d4 = std::stod(line.substr(p + 1));
  std::getline(ss, line);
  p = line.find(',', line.find(',') + 1);
  double d8 = std::stod(line.substr(p + 1));
  CHECK(d8 > d4 * 2.0);  // the 8-bit analog path is 4.3x slower
}
