// Command-line front end. Talks to the core exclusively through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "cennforge.h"

namespace {

struct CommonFlags {
  std::string network;
  std::string weights;
  std::string images, labels;
  long random_images = 0;
  long limit = -1;
  std::string hw;
  int n_arrays = 4;
  int mem_slots = 0;
  std::string mode = "ideal";
  int bits = 4;
  std::string cost_preset = "paper-4bit-32nm";
  std::string curve;
  std::string out = "out";
  unsigned long long seed = 1;
  int threads = 0;
  bool trace = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--network", f.network, "network file or preset:<name>")->required();
  cmd->add_option("--weights", f.weights, "weights blob (seeded random weights when absent)");
  cmd->add_option("--images", f.images, "IDX image file");
  cmd->add_option("--labels", f.labels, "IDX label file");
  cmd->add_option("--random-images", f.random_images, "synthesize N inputs instead of a dataset");
  cmd->add_option("--limit", f.limit, "cap on images processed");
  cmd->add_option("--hw", f.hw, "hardware preset (paper-mnist, paper-cifar)");
  cmd->add_option("--n-arrays", f.n_arrays, "number of CeNN arrays")->default_val(4);
  cmd->add_option("--mem-slots", f.mem_slots, "analog memory slots per cell (0 = derived)");
  cmd->add_option("--mode", f.mode, "ideal | quantized | nonideal")->default_val("ideal");
  cmd->add_option("--bits", f.bits, "hardware precision Nb")->default_val(4);
  cmd->add_option("--cost-preset", f.cost_preset, "cost parameter preset")
      ->default_val("paper-4bit-32nm");
  cmd->add_option("--curve", f.curve, "OTA curve file (nonideal mode)");
  cmd->add_option("--out", f.out, "output directory")->default_val("out");
  cmd->add_option("--seed", f.seed, "RNG seed")->default_val(1);
  cmd->add_option("--threads", f.threads, "worker threads (0 = auto, CENN_FORGE_THREADS caps)");
  cmd->add_flag("--trace", f.trace, "write the event trace log");
}

cnf_run_config to_config(const CommonFlags& f) {
  cnf_run_config cfg{};
  cfg.network = f.network.c_str();
  cfg.weights = f.weights.empty() ? nullptr : f.weights.c_str();
  cfg.images = f.images.empty() ? nullptr : f.images.c_str();
  cfg.labels = f.labels.empty() ? nullptr : f.labels.c_str();
  cfg.random_images = f.random_images;
  cfg.limit = f.limit;
  cfg.hw_preset = f.hw.empty() ? nullptr : f.hw.c_str();
  cfg.n_arrays = f.n_arrays;
  cfg.mem_slots = f.mem_slots;
  cfg.bits = f.bits;
  cfg.mode = f.mode.c_str();
  cfg.curve = f.curve.empty() ? nullptr : f.curve.c_str();
  cfg.cost_preset = f.cost_preset.c_str();
  cfg.out_dir = f.out.c_str();
  cfg.seed = f.seed;
  cfg.threads = f.threads;
  cfg.write_trace = f.trace ? 1 : 0;
  return cfg;
}

int fail(cnf_status s) {
  std::fprintf(stderr, "error: %s: %s\n", cnf_status_name(s), cnf_last_error());
  return 1;
}

void print_outcome(const cnf_run_result& r) {
  std::printf("run dir: %s\n", r.run_dir);
  std::printf("images: %ld\n", r.images_run);
  if (r.accuracy >= 0) std::printf("accuracy: %.4f\n", r.accuracy);
  std::printf("delay: %.4f ns\n", r.total_delay_s * 1e9);
  std::printf("energy: %.4f pJ\n", r.total_energy_j * 1e12);
  std::printf("EDP: %.6e nJ*ns\n", r.edp * 1e21);
  if (r.images_run > 0) std::printf("clip rate: %.6f\n", r.clip_rate);
}

void verify_printer(const char* id, const char* name, int pass, const char* detail, void*) {
  std::printf("[%s] criterion %-3s %-52s %s\n", pass ? "PASS" : "FAIL", id, name, detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cennforge: CoNN-on-CeNN simulator, compiler and cost model"};
  app.require_subcommand(1);

  CommonFlags runf, sweepf;
  CLI::App* run = app.add_subcommand("run", "compile, cost and (optionally) run inference");
  add_common(run, runf);

  CLI::App* sweep = app.add_subcommand("sweep", "cost one row per axis value");
  add_common(sweep, sweepf);
  std::string axis, values;
  sweep->add_option("--axis", axis, "precision | n_arrays | pool_kind")->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();

  CLI::App* verify = app.add_subcommand("verify", "run the built-in verification suites");
  std::string filter;
  verify->add_option("--filter", filter, "criterion id prefix to run (default: all)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    cnf_run_config cfg = to_config(runf);
    cnf_run_result res{};
    cnf_status s = cnf_run(&cfg, &res);
    if (s != CNF_OK) return fail(s);
    print_outcome(res);
    return 0;
  }

  if (sweep->parsed()) {
    cnf_run_config cfg = to_config(sweepf);
    cfg.sweep_axis = axis.c_str();
    cfg.sweep_values = values.c_str();
    cnf_run_result res{};
    cnf_status s = cnf_sweep(&cfg, &res);
    if (s != CNF_OK) return fail(s);
    std::printf("sweep dir: %s\n", res.run_dir);
    return 0;
  }

  if (verify->parsed()) {
    int failed = 0;
    cnf_status s = cnf_verify(filter.empty() ? nullptr : filter.c_str(), verify_printer, nullptr,
                              &failed);
    if (s != CNF_OK) return fail(s);
    std::printf("%s: %d check(s) failed\n", failed == 0 ? "OK" : "FAILED", failed);
    return failed == 0 ? 0 : 1;
  }

  return 0;
}
