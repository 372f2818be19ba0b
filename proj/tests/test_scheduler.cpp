#include <doctest.h>

#include <random>
#include <sstream>

#include "errors.hpp"
#include "fc_digital.hpp"
#include "scheduler.hpp"
#include "verify.hpp"

using namespace cennforge;

namespace {

NetworkSpec conv_only_net(int in_maps, int out_maps, int rows = 6, int cols = 6) {
  NetworkSpec net;
  net.name = "conv_only";
  net.input_shape = {rows, cols};
  net.input_maps = in_maps;
  net.class_count = out_maps;
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = "conv";
  l.out_maps = out_maps;
  net.layers.push_back(l);
  net.validate();
  randomize_weights(net, 99);
  return net;
}

std::vector<Grid> random_input(const NetworkSpec& net, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pix(0, 255);
  std::vector<Grid> planes;
  for (int p = 0; p < net.input_maps; ++p) {
    Grid g(net.input_shape.rows, net.input_shape.cols);
    for (size_t i = 0; i < g.size(); ++i)
      g.data()[i] = idx_normalize(static_cast<uint8_t>(pix(rng)));
    planes.push_back(std::move(g));
  }
  return planes;
}

}  // namespace

TEST_CASE("event-count formulas hold across fuzzed layer sizes and array counts") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> maps(1, 9);
  for (int n_arrays : {1, 2, 4, 8}) {
    for (int trial = 0; trial < 8; ++trial) {
      int c0 = maps(rng), c1 = maps(rng);
      NetworkSpec net = conv_only_net(c0, c1);
      HardwareConfig hw{n_arrays, {6, 6}, 32, 4};
      CeNNProgram prog = compile(net, hw);
      CHECK(prog.count_layer(0, EventKind::TemplateApply) == c1 * c0);
      CHECK(prog.accumulate_count(0) == static_cast<long>(c1) * (c0 - 1));
      CHECK(prog.sram_kernel_count(0) == c1 * c0);
      CHECK_NOTHROW(prog.check_validity());
    }
  }
}

TEST_CASE("relu and pool layers read one SRAM word per template programming") {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 1);
  CeNNProgram prog = compile(net, hardware_preset("paper-mnist"));
  CHECK(prog.count_layer(1, EventKind::SramRead) == 2);    // relu1: two shifts
  CHECK(prog.count_layer(2, EventKind::SramRead) == 16);   // pool1: 4 compares x 4 ops
  CHECK(prog.count_layer(4, EventKind::SramRead) == 2);
  CHECK(prog.count_layer(5, EventKind::SramRead) == 16);
}

TEST_CASE("settle-round counts match the published step accounting") {
  HardwareConfig hw = hardware_preset("paper-mnist");
  NetworkSpec d1 = network_preset("mnist_design1");
  randomize_weights(d1, 1);
  CeNNProgram p1 = compile(d1, hw);
  std::vector<int> rounds1;
  for (const LayerPlan& p : p1.layers) rounds1.push_back(p.settle_rounds);
  CHECK(rounds1 == std::vector<int>{1, 2, 16, 8, 2, 16, 0});

  NetworkSpec d2 = network_preset("mnist_design2");
  randomize_weights(d2, 1);
  CeNNProgram p2 = compile(d2, hw);
  std::vector<int> rounds2;
  for (const LayerPlan& p : p2.layers) rounds2.push_back(p.settle_rounds);
  // conv4 partial-sum combines fold into the readout stage
  CHECK(rounds2 == std::vector<int>{1, 2, 16, 8, 2, 16, 8, 2, 16, 10, 0});
  CHECK(p2.layers[9].readout_folded_rounds == 10);
}

TEST_CASE("design2 emits no conversions before the final 10-value readout") {
  NetworkSpec d2 = network_preset("mnist_design2");
  randomize_weights(d2, 1);
  CeNNProgram prog = compile(d2, hardware_preset("paper-mnist"));
  long adc_events = prog.count(EventKind::AdcConvert);
  CHECK(adc_events == 1);
  for (const Event& e : prog.events)
    if (e.kind == EventKind::AdcConvert) CHECK(e.count == 10);
  CHECK(prog.count(EventKind::DigitalFc) == 0);
}

TEST_CASE("identity-kernel single-conv network passes pixels through") {
  NetworkSpec net = conv_only_net(1, 1, 4, 4);
  net.layers[0].kernels[0] = center_only(1.0);
  net.layers[0].biases[0] = 0.0;
  HardwareConfig hw{4, {4, 4}, 8, 4};
  CeNNProgram prog = compile(net, hw);
  std::vector<Grid> in = random_input(net, 3);
  ExecResult r = execute(prog, net, hw, in, ExecMode::Ideal);
  // readout is the center pixel of the single class map
  CHECK(r.scores.size() == 1);
  CHECK(r.scores[0] == doctest::Approx(in[0].at(2, 2)));
}

TEST_CASE("ideal execution equals the dense oracle") {
  HardwareConfig hw = hardware_preset("paper-mnist");
  for (const char* preset : {"mnist_design1", "mnist_design2"}) {
    NetworkSpec net = network_preset(preset);
    for (int t = 0; t < 25; ++t) {
      randomize_weights(net, 500 + t);
      CeNNProgram prog = compile(net, hw);
      std::vector<Grid> in = random_input(net, 40 + t);
      ExecResult got = execute(prog, net, hw, in, ExecMode::Ideal);
      std::vector<double> want = oracle::dense_forward(net, in);
      REQUIRE(got.scores.size() == want.size());
      CHECK(got.predicted == argmax(want));
      for (size_t k = 0; k < want.size(); ++k)
        CHECK(got.scores[k] == doctest::Approx(want[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("results are independent of the array count") {
  NetworkSpec net = network_preset("mnist_design2");
  randomize_weights(net, 321);
  std::vector<Grid> in = random_input(net, 9);
  std::vector<double> base;
  for (int n_arrays : {1, 2, 4, 8}) {
    HardwareConfig hw{n_arrays, {28, 28}, 16, 4};
    CeNNProgram prog = compile(net, hw);
    ExecResult r = execute(prog, net, hw, in, ExecMode::Ideal);
    if (base.empty())
      base = r.scores;
    else
      for (size_t k = 0; k < base.size(); ++k)
        CHECK(r.scores[k] == doctest::Approx(base[k]).epsilon(1e-12));
  }
}

TEST_CASE("quantized mode lands activations on the grid and weights quantize once") {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 17);
  HardwareConfig hw = hardware_preset("paper-mnist");
  CeNNProgram prog = compile(net, hw);
  std::vector<Grid> in = random_input(net, 23);
  ExecResult q = execute(prog, net, hw, in, ExecMode::Quantized);
  ExecResult i = execute(prog, net, hw, in, ExecMode::Ideal);
  CHECK(q.scores.size() == i.scores.size());
  // quantized scores are integer multiples of the squared LSB
  double lsb2 = (1.0 / 8) * (1.0 / 8);
  for (double s : q.scores) {
    double m = s / lsb2;
    CHECK(std::fabs(m - std::round(m)) < 1e-9);
  }
}

TEST_CASE("memory capacity is checked at compile with counts in the message") {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 1);
  HardwareConfig hw{4, {28, 28}, 2, 4};
  CHECK_THROWS_WITH_AS(compile(net, hw), doctest::Contains("analog memory slots"), Error);
  CHECK(required_mem_slots(net, 4) == 5);
}

TEST_CASE("trace log round-trips through the golden format") {
  NetworkSpec net = conv_only_net(2, 2, 4, 4);
  HardwareConfig hw{2, {4, 4}, 8, 4};
  CeNNProgram prog = compile(net, hw);
  std::ostringstream ss;
  prog.write_trace(ss);
  std::string trace = ss.str();
  CHECK(trace.find("TPL") != std::string::npos);
  CHECK(trace.find("SRD") != std::string::npos);
  CHECK(trace.find("MWR") != std::string::npos);
  CHECK(trace.find("acc_out") != std::string::npos);
  // stable: two compilations emit identical traces
  std::ostringstream ss2;
  compile(net, hw).write_trace(ss2);
  CHECK(ss2.str() == trace);
}

TEST_CASE("tiling engages when maps exceed the array") {
  NetworkSpec net = conv_only_net(1, 1, 8, 8);
  HardwareConfig hw{2, {4, 4}, 8, 4};
  CeNNProgram prog = compile(net, hw);
  CHECK(prog.layers[0].tiles == 4);
  CHECK(prog.layers[0].settle_rounds == 4);  // one logical round, four tiles
  // functional result is unaffected by tiling
  std::vector<Grid> in = random_input(net, 77);
  ExecResult r = execute(prog, net, hw, in, ExecMode::Ideal);
  std::vector<double> want = oracle::dense_forward(net, in);
  CHECK(r.scores[0] == doctest::Approx(want[0]).epsilon(1e-12));

  // nonlinear pooling cannot be tiled
  NetworkSpec pooled = conv_only_net(1, 1, 8, 8);
  LayerSpec pool;
  pool.kind = LayerKind::Pool;
  pool.name = "gpool";
  pool.pool_kind = PoolKind::Nonlinear;
  pooled.layers.insert(pooled.layers.begin(), pool);
  pooled.validate();
  CHECK_THROWS_AS(compile(pooled, hw), Error);
}

TEST_CASE("execution statistics") {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 55);
  HardwareConfig hw = hardware_preset("paper-mnist");
  CeNNProgram prog = compile(net, hw);
  std::vector<Grid> in = random_input(net, 1);
  ExecResult r = execute(prog, net, hw, in, ExecMode::Ideal);
  CHECK(r.stats.template_applies == prog.count(EventKind::TemplateApply));
  CHECK(r.stats.mem_writes == prog.count(EventKind::MemWrite));
  CHECK(r.stats.adc_samples == 3136);
  CHECK(r.stats.fc_mults == 31360);
  CHECK(r.stats.clip_rate >= 0.0);
  CHECK(r.stats.clip_rate <= 1.0);
}

TEST_CASE("execute validates its inputs") {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 1);
  HardwareConfig hw = hardware_preset("paper-mnist");
  CeNNProgram prog = compile(net, hw);
  std::vector<Grid> wrong_count;
  CHECK_THROWS_AS(execute(prog, net, hw, wrong_count, ExecMode::Ideal), Error);
  std::vector<Grid> wrong_shape(1, Grid(4, 4));
  CHECK_THROWS_AS(execute(prog, net, hw, wrong_shape, ExecMode::Ideal), Error);
  std::vector<Grid> out_of_range(1, Grid(28, 28, 2.0));
  CHECK_THROWS_AS(execute(prog, net, hw, out_of_range, ExecMode::Ideal), Error);
  std::vector<Grid> ok(1, Grid(28, 28, 0.1));
  CHECK_THROWS_AS(execute(prog, net, hw, ok, ExecMode::Nonideal, nullptr), Error);
}
