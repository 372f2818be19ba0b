#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cennforge.h"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / "cennforge_capi_test";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("network lifecycle through the C API") {
  cnf_network* net = nullptr;
  REQUIRE(cnf_network_from_preset("mnist_design1", &net) == CNF_OK);
  CHECK(cnf_network_layer_count(net) == 7);
  CHECK(cnf_network_class_count(net) == 10);
  int rows = 0, cols = 0, maps = 0;
  CHECK(cnf_network_input_shape(net, &rows, &cols, &maps) == CNF_OK);
  CHECK(rows == 28);
  CHECK(maps == 1);
  char buf[256];
  CHECK(cnf_network_describe(net, buf, sizeof buf) > 0);
  CHECK(std::string(buf).find("mnist_design1") != std::string::npos);
  cnf_network_free(net);

  cnf_network* bad = nullptr;
  CHECK(cnf_network_from_preset("unknown", &bad) == CNF_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(cnf_last_error()) > 0);
  CHECK(cnf_network_load("/definitely/not/there.json", &bad) == CNF_ERR_IO);
}

TEST_CASE("compile, execute and cost through the C API") {
  cnf_network* net = nullptr;
  REQUIRE(cnf_network_from_preset("mnist_design1", &net) == CNF_OK);
  REQUIRE(cnf_network_randomize_weights(net, 42) == CNF_OK);

  cnf_hardware* hw = nullptr;
  REQUIRE(cnf_hardware_from_preset("paper-mnist", &hw) == CNF_OK);
  CHECK(cnf_required_mem_slots(net, 4) == 5);

  cnf_program* prog = nullptr;
  REQUIRE(cnf_compile(net, hw, &prog) == CNF_OK);
  CHECK(cnf_program_event_count(prog) > 0);
  CHECK(cnf_program_rounds(prog) > 0);

  std::vector<double> image(28 * 28, 0.1);
  std::vector<double> scores(10, 0.0);
  int predicted = -1;
  cnf_exec_stats stats{};
  REQUIRE(cnf_execute(prog, net, hw, image.data(), image.size(), "ideal", nullptr, scores.data(),
                      scores.size(), &predicted, &stats) == CNF_OK);
  CHECK(predicted >= 0);
  CHECK(predicted < 10);
  CHECK(stats.template_applies > 0);
  CHECK(stats.adc_samples == 3136);

  // wrong-size input and bad mode surface as status codes
  CHECK(cnf_execute(prog, net, hw, image.data(), 100, "ideal", nullptr, nullptr, 0, nullptr,
                    nullptr) == CNF_ERR_SHAPE);
  CHECK(cnf_execute(prog, net, hw, image.data(), image.size(), "turbo", nullptr, nullptr, 0,
                    nullptr, nullptr) == CNF_ERR_INVALID_ARGUMENT);

  cnf_cost_params* params = nullptr;
  REQUIRE(cnf_cost_params_from_preset("paper-4bit-32nm", &params) == CNF_OK);
  cnf_cost_report* rep = nullptr;
  REQUIRE(cnf_trace_cost(prog, params, &rep) == CNF_OK);
  double delay = 0, energy = 0, edp = 0;
  CHECK(cnf_cost_report_totals(rep, &delay, &energy, &edp) == CNF_OK);
  CHECK(delay * 1e9 == doctest::Approx(531.6).epsilon(0.03));
  CHECK(energy * 1e12 == doctest::Approx(19841).epsilon(0.03));
  CHECK(cnf_cost_report_row_count(rep) == 7);
  char name[64];
  double ld = 0, le = 0;
  CHECK(cnf_cost_report_row(rep, 0, name, sizeof name, &ld, &le) == CNF_OK);
  CHECK(std::string(name) == "conv1");

  cnf_cost_params* p8 = nullptr;
  REQUIRE(cnf_cost_params_precision_scale(params, -1, -1, 1, &p8) == CNF_OK);
  cnf_cost_report* rep8 = nullptr;
  REQUIRE(cnf_trace_cost(prog, p8, &rep8) == CNF_OK);
  double delay8 = 0, energy8 = 0;
  cnf_cost_report_totals(rep8, &delay8, &energy8, nullptr);
  CHECK(delay8 > delay);
  CHECK(energy8 > energy);

  double total_analytic = 0;
  CHECK(cnf_analytic_delay(net, hw, params, nullptr, 0, &total_analytic) == CNF_OK);
  CHECK(total_analytic > 0);

  cnf_cost_report_free(rep8);
  cnf_cost_params_free(p8);
  cnf_cost_report_free(rep);
  cnf_cost_params_free(params);
  cnf_program_free(prog);
  cnf_hardware_free(hw);
  cnf_network_free(net);
}

TEST_CASE("ota curves through the C API") {
  cnf_ota_curve* ident = nullptr;
  REQUIRE(cnf_ota_curve_identity(&ident) == CNF_OK);
  CHECK(cnf_ota_curve_eval(ident, 0.37) == 0.37);
  cnf_ota_curve* dflt = nullptr;
  REQUIRE(cnf_ota_curve_default(&dflt) == CNF_OK);
  CHECK(cnf_ota_curve_eval(dflt, 0.9) < 0.9);
  fs::path p = temp_dir() / "curve.txt";
  CHECK(cnf_ota_curve_save(dflt, p.string().c_str()) == CNF_OK);
  cnf_ota_curve* loaded = nullptr;
  CHECK(cnf_ota_curve_load(p.string().c_str(), &loaded) == CNF_OK);
  CHECK(cnf_ota_curve_eval(loaded, 0.9) == cnf_ota_curve_eval(dflt, 0.9));
  cnf_ota_curve_free(loaded);
  cnf_ota_curve_free(dflt);
  cnf_ota_curve_free(ident);
}

TEST_CASE("run job through the C API") {
  fs::path out = temp_dir() / "runjob";
  fs::remove_all(out);
  cnf_run_config cfg{};
  cfg.network = "preset:mnist_design1";
  cfg.random_images = 2;
  cfg.mode = "ideal";
  cfg.bits = 4;
  cfg.seed = 5;
  std::string out_s = out.string();
  cfg.out_dir = out_s.c_str();
  cnf_run_result res{};
  REQUIRE(cnf_run(&cfg, &res) == CNF_OK);
  CHECK(res.images_run == 2);
  CHECK(res.total_delay_s > 0);
  CHECK(fs::exists(fs::path(res.run_dir) / "costs.csv"));
  CHECK(fs::exists(fs::path(res.run_dir) / "report.txt"));

  // missing weights file: error names the path
  cfg.weights = "/no/such/weights.blob";
  cnf_status s = cnf_run(&cfg, &res);
  CHECK(s == CNF_ERR_IO);
  CHECK(std::string(cnf_last_error()).find("/no/such/weights.blob") != std::string::npos);
}

TEST_CASE("dataset via the C API") {
  // create a tiny IDX pair through the byte-level format
  fs::path dir = temp_dir();
  fs::path imgs = dir / "im.idx", lbls = dir / "lb.idx";
  {
    std::ofstream io(imgs, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2};
    io.write(reinterpret_cast<const char*>(header), sizeof header);
    const unsigned char px[] = {0, 64, 128, 255};
    io.write(reinterpret_cast<const char*>(px), sizeof px);
    std::ofstream lo(lbls, std::ios::binary);
    const unsigned char lheader[] = {0, 0, 8, 1, 0, 0, 0, 1};
    lo.write(reinterpret_cast<const char*>(lheader), sizeof lheader);
    unsigned char lb = 4;
    lo.write(reinterpret_cast<const char*>(&lb), 1);
  }
  cnf_dataset* ds = nullptr;
  REQUIRE(cnf_dataset_load_idx(imgs.string().c_str(), lbls.string().c_str(), &ds) == CNF_OK);
  CHECK(cnf_dataset_size(ds) == 1);
  CHECK(cnf_dataset_label(ds, 0) == 4);
  double buf[4];
  CHECK(cnf_dataset_image(ds, 0, buf, 4) == 4);
  CHECK(buf[0] == doctest::Approx(-1.0));
  CHECK(buf[3] == doctest::Approx(1.0));
  cnf_dataset_free(ds);
}
