#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cost_model.hpp"
#include "errors.hpp"

using namespace cennforge;

namespace {

CostReport report_for(const char* preset, const CostParams& params) {
  NetworkSpec net = network_preset(preset);
  randomize_weights(net, 7);
  return trace_cost(compile(net, hardware_preset("paper-mnist")), params);
}

}  // namespace

TEST_CASE("preset calibration reproduces the published table") {
  CostParams p = cost_preset("paper-4bit-32nm");
  CHECK(p.step_time() == doctest::Approx(5.34e-9));

  CostReport d1 = report_for("mnist_design1", p);
  struct Row {
    const char* name;
    double delay_ns, energy_pj;
  };
  for (const Row& row : std::initializer_list<Row>{{"conv1", 5.3, 626},
                                                   {"relu1", 10.7, 536},
                                                   {"pool1", 85.5, 4290},
                                                   {"conv2", 42.8, 2827},
                                                   {"relu2", 10.7, 410},
                                                   {"pool2", 85.5, 3277},
                                                   {"fc", 291.1, 7875}}) {
    const LayerCost* lc = d1.find(row.name);
    REQUIRE(lc != nullptr);
    CHECK(lc->delay * 1e9 == doctest::Approx(row.delay_ns).epsilon(0.05));
    CHECK(lc->energy * 1e12 == doctest::Approx(row.energy_pj).epsilon(0.05));
  }
  CHECK(d1.total_delay * 1e9 == doctest::Approx(531.6).epsilon(0.03));
  CHECK(d1.total_energy * 1e12 == doctest::Approx(19841).epsilon(0.03));

  CostReport d2 = report_for("mnist_design2", p);
  CHECK(d2.find("conv4") != nullptr);
  CHECK(d2.find("conv4")->delay * 1e9 == doctest::Approx(53.4).epsilon(0.05));
  CHECK(d2.find("conv4")->energy * 1e12 == doctest::Approx(582).epsilon(0.05));
  CHECK(d2.total_delay * 1e9 == doctest::Approx(432.9).epsilon(0.03));
  CHECK(d2.total_energy * 1e12 == doctest::Approx(9353).epsilon(0.03));
}

TEST_CASE("report internal consistency") {
  CostParams p = cost_preset("paper-4bit-32nm");
  CostReport rep = report_for("mnist_design2", p);
  double dsum = 0, esum = 0;
  for (const LayerCost& lc : rep.layers) {
    CHECK(lc.delay == doctest::Approx(lc.delay_parts.total()).epsilon(1e-12));
    CHECK(lc.energy == doctest::Approx(lc.energy_parts.total()).epsilon(1e-12));
    dsum += lc.delay;
    esum += lc.energy;
  }
  CHECK(rep.total_delay == doctest::Approx(dsum).epsilon(1e-12));
  CHECK(rep.total_energy == doctest::Approx(esum).epsilon(1e-12));
  CHECK(rep.edp == rep.total_delay * rep.total_energy);
}

TEST_CASE("monotonicity: raising any parameter never lowers a total") {
  CostParams base = cost_preset("paper-4bit-32nm");
  CostReport ref = report_for("mnist_design1", base);
  auto bump = [&](auto mutate) {
    CostParams p = base;
    mutate(p);
    CostReport rep = report_for("mnist_design1", p);
    CHECK(rep.total_delay >= ref.total_delay - 1e-18);
    CHECK(rep.total_energy >= ref.total_energy - 1e-21);
  };
  bump([](CostParams& p) { p.t_cenn *= 1.5; });
  bump([](CostParams& p) { p.t_prog *= 1.5; });
  bump([](CostParams& p) { p.sram_read_delay = 1e-10; });
  bump([](CostParams& p) { p.e_mem_read *= 2; });
  bump([](CostParams& p) { p.e_mem_write *= 2; });
  bump([](CostParams& p) { p.e_sram_word *= 2; });
  bump([](CostParams& p) { p.adc_delay *= 2; });
  bump([](CostParams& p) { p.adc_energy *= 2; });
  bump([](CostParams& p) { p.fc_mul_energy *= 2; });
  bump([](CostParams& p) {
    for (auto& [k, v] : p.layer_e_cell) v *= 2;
  });
}

TEST_CASE("downsampling lowers energy, never delay") {
  // identical topologies except for the downsample flag; the custom name
  // bypasses the per-layer calibration so both use the same kind defaults
  auto make = [](bool ds) {
    NetworkSpec net = network_preset("mnist_design2");
    net.name = ds ? "custom_ds" : "custom_full";
    for (LayerSpec& l : net.layers)
      if (l.kind == LayerKind::Pool) l.downsample = ds;
    net.validate();
    randomize_weights(net, 3);
    return net;
  };
  CostParams p = cost_preset("paper-4bit-32nm");
  HardwareConfig hw = hardware_preset("paper-mnist");
  CostReport full = trace_cost(compile(make(false), hw), p);
  CostReport down = trace_cost(compile(make(true), hw), p);
  REQUIRE(full.layers.size() == down.layers.size());
  for (size_t i = 0; i + 1 < full.layers.size(); ++i) {  // skip the readout row
    CHECK(down.layers[i].energy <= full.layers[i].energy + 1e-18);
    CHECK(down.layers[i].delay == doctest::Approx(full.layers[i].delay).epsilon(1e-12));
  }
  CHECK(down.total_energy < full.total_energy);
}

TEST_CASE("analytic delay: literal formula and N=1 domain error") {
  CostParams p = cost_preset("paper-4bit-32nm");
  NetworkSpec net;
  net.name = "single_conv";
  net.input_shape = {8, 8};
  net.input_maps = 4;
  net.class_count = 4;
  LayerSpec conv;
  conv.kind = LayerKind::Conv;
  conv.name = "conv";
  conv.out_maps = 4;
  net.layers.push_back(conv);
  net.validate();

  AnalyticDelay ad = analytic_delay(net, HardwareConfig{4, {8, 8}, 16, 4}, p);
  double cc = 16.0;
  double want = (cc / 3.0 + cc / 4.0) * p.step_time() + cc / 6.0 * (p.t_mem_read + p.t_mem_write);
  CHECK(ad.per_layer[0].second == doctest::Approx(want).epsilon(1e-15));
  CHECK(ad.total == doctest::Approx(want + ad.per_layer[1].second).epsilon(1e-12));

  try {
    analytic_delay(net, HardwareConfig{1, {8, 8}, 16, 4}, p);
    FAIL("expected model-domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModelDomain);
  }
}

TEST_CASE("analytic relu/pool step counts") {
  CostParams p = cost_preset("paper-4bit-32nm");
  NetworkSpec net = network_preset("mnist_design1");
  AnalyticDelay ad = analytic_delay(net, hardware_preset("paper-mnist"), p);
  CHECK(ad.per_layer[1].second == doctest::Approx(2 * p.step_time()));
  CHECK(ad.per_layer[2].second == doctest::Approx(16 * p.step_time()));
}

TEST_CASE("analytic delay decreases with more arrays") {
  CostParams p = cost_preset("paper-4bit-32nm");
  NetworkSpec net = network_preset("mnist_design2");
  double prev = 1e9;
  for (int n : {2, 4, 8}) {
    AnalyticDelay ad = analytic_delay(net, HardwareConfig{n, {28, 28}, 16, 4}, p);
    CHECK(ad.total < prev);
    prev = ad.total;
  }
}

TEST_CASE("precision scaling") {
  CostParams p4 = cost_preset("paper-4bit-32nm");
  SUBCASE("field scaling") {
    CostParams p8 = precision_scale(p4);
    CHECK(p8.t_cenn == doctest::Approx(4.3 * p4.t_cenn));
    CHECK(p8.t_prog == doctest::Approx(4.3 * p4.t_prog));
    CHECK(p8.e_mem_read == doctest::Approx(7.5 * p4.e_mem_read));
    CHECK(p8.precision_bits == 8);
  }
  SUBCASE("identity factors are a no-op") {
    PrecisionScaleOptions id;
    id.delay_factor = 1.0;
    id.power_factor = 1.0;
    id.sram_factor = 1.0;
    id.rederive_digital = false;
    CostParams same = precision_scale(p4, id);
    CHECK(same.t_cenn == p4.t_cenn);
    CHECK(same.adc_delay == p4.adc_delay);
    CHECK(same.layer_e_cell == p4.layer_e_cell);
  }
  SUBCASE("shipped 8-bit preset equals scaling the 4-bit preset") {
    CostParams p8 = cost_preset("paper-8bit-32nm");
    CostParams scaled = precision_scale(p4);
    CHECK(p8.t_cenn == scaled.t_cenn);
    CHECK(p8.adc_delay == scaled.adc_delay);
    CHECK(p8.fc_mul_energy == scaled.fc_mul_energy);
    CHECK(p8.layer_e_cell == scaled.layer_e_cell);
  }
  SUBCASE("published 8-bit design-1 totals within tolerance") {
    CostReport rep = report_for("mnist_design1", cost_preset("paper-8bit-32nm"));
    CHECK(rep.total_delay * 1e9 == doctest::Approx(1442.0).epsilon(0.10));
    CHECK(rep.total_energy * 1e9 == doctest::Approx(104.9).epsilon(0.10));
  }
}

TEST_CASE("csv serialization is stable and carries the breakdown") {
  CostParams p = cost_preset("paper-4bit-32nm");
  CostReport rep = report_for("mnist_design1", p);
  std::ostringstream a, b;
  rep.write_csv(a);
  rep.write_csv(b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("layer,kind,delay_ns,energy_pJ,", 0) == 0);
  CHECK(a.str().find("\ntotal,,") != std::string::npos);
  CHECK(a.str().find("edp_nJ_ns") != std::string::npos);
  std::ostringstream t;
  rep.write_text(t);
  CHECK(t.str().find("EDP") != std::string::npos);
}

TEST_CASE("missing activity data is an error") {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 1);
  CeNNProgram prog = compile(net, hardware_preset("paper-mnist"));
  prog.events[0].cells = 0;  // strip the activity annotation
  bool threw = false;
  try {
    trace_cost(prog, cost_preset("paper-4bit-32nm"));
  } catch (const Error&) {
    threw = true;
  }
  CHECK(threw);
}

TEST_CASE("unknown presets are rejected") {
  CHECK_THROWS_AS(cost_preset("paper-2bit"), Error);
  CHECK_THROWS_AS(hardware_preset("tiny"), Error);
}
