#include "cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "errors.hpp"

namespace cennforge {

double CostParams::e_cell_for(const std::string& net, const std::string& layer, LayerKind kind,
                              PoolKind) const {
  auto it = layer_e_cell.find(net + "/" + layer);
  if (it != layer_e_cell.end()) return it->second;
  switch (kind) {
    case LayerKind::Conv: return e_cell_conv;
    case LayerKind::Relu: return e_cell_relu;
    case LayerKind::Pool: return e_cell_pool;
    default: return 0.0;
  }
}

namespace {

// Published per-layer energy aggregates (pJ) the 4-bit preset is calibrated
// against: layer-level energies for the two MNIST networks.
const std::vector<std::pair<std::string, double>> kEnergyTargets4b = {
    {"mnist_design1/conv1", 626e-12}, {"mnist_design1/relu1", 536e-12},
    {"mnist_design1/pool1", 4290e-12}, {"mnist_design1/conv2", 2827e-12},
    {"mnist_design1/relu2", 410e-12}, {"mnist_design1/pool2", 3277e-12},
    {"mnist_design2/conv1", 626e-12}, {"mnist_design2/relu1", 536e-12},
    {"mnist_design2/pool1", 3398e-12}, {"mnist_design2/conv2", 981e-12},
    {"mnist_design2/relu2", 186e-12}, {"mnist_design2/pool2", 1489e-12},
    {"mnist_design2/conv3", 519e-12}, {"mnist_design2/relu3", 115e-12},
    {"mnist_design2/pool3", 921e-12}, {"mnist_design2/conv4", 582e-12},
};

struct LayerActivity {
  long cellsteps = 0;   // template applies + accumulates, weighted by cells
  long read_cells = 0;  // loads + accumulate fetches
  long write_cells = 0;
  long sram_words = 0;
};

std::map<int, LayerActivity> activity_by_layer(const CeNNProgram& prog) {
  std::map<int, LayerActivity> acts;
  for (const Event& e : prog.events) {
    LayerActivity& a = acts[e.layer];
    switch (e.kind) {
      case EventKind::TemplateApply:
        if (e.cells <= 0) throw invalid_argument_error("trace_cost: event lacks activity data");
        a.cellsteps += e.cells;
        break;
      case EventKind::MemRead:
        if (e.cells <= 0) throw invalid_argument_error("trace_cost: event lacks activity data");
        a.read_cells += e.cells;
        if (e.mode != MemReadMode::Load) a.cellsteps += e.cells;
        break;
      case EventKind::MemWrite:
        if (e.cells <= 0) throw invalid_argument_error("trace_cost: event lacks activity data");
        a.write_cells += e.cells;
        break;
      case EventKind::SramRead:
        a.sram_words += e.words;
        break;
      default:
        break;
    }
  }
  return acts;
}

// Back-solve the per-layer cell-step energies from the published aggregates:
// e = (target - memory - sram) / cellsteps for each layer of the two MNIST
// networks compiled onto the default four-array configuration.
void calibrate_mnist_layers(CostParams& p) {
  HardwareConfig hw = hardware_preset("paper-mnist");
  std::map<std::string, double> targets(kEnergyTargets4b.begin(), kEnergyTargets4b.end());
  std::vector<double> conv_es, relu_es, pool_es;
  for (const char* preset : {"mnist_design1", "mnist_design2"}) {
    NetworkSpec net = network_preset(preset);
    randomize_weights(net, 1);  // values irrelevant, the trace structure is not
    CeNNProgram prog = compile(net, hw);
    auto acts = activity_by_layer(prog);
    for (size_t li = 0; li < prog.layers.size(); ++li) {
      const LayerPlan& plan = prog.layers[li];
      auto t = targets.find(std::string(preset) + "/" + plan.name);
      if (t == targets.end()) continue;
      const LayerActivity& a = acts[static_cast<int>(li)];
      double fixed = a.read_cells * p.e_mem_read + a.write_cells * p.e_mem_write +
                     a.sram_words * p.e_sram_word;
      double e = (t->second - fixed) / static_cast<double>(a.cellsteps);
      if (e <= 0.0)
        throw Error(ErrorCode::Internal,
                    "calibration produced non-positive cell energy for " + t->first);
      p.layer_e_cell[t->first] = e;
      if (std::string(preset) == "mnist_design1") {
        if (plan.kind == LayerKind::Conv) conv_es.push_back(e);
        if (plan.kind == LayerKind::Relu) relu_es.push_back(e);
        if (plan.kind == LayerKind::Pool) pool_es.push_back(e);
      }
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
  };
  p.e_cell_conv = mean(conv_es);
  p.e_cell_relu = mean(relu_es);
  p.e_cell_pool = mean(pool_es);
}

CostParams make_paper_4bit() {
  CostParams p;
  p.name = "paper-4bit-32nm";
  p.precision_bits = 4;
  // t_cenn + t_prog = 5.34 ns, back-solved from the published ReLU (10.7 ns
  // / 2 steps) and pooling (85.5 ns / 16 steps) layer delays. The split
  // between settle and reprogram is not separately observable; SRAM and
  // analog-memory transfer latency overlap the reprogramming window, so the
  // trace model charges them no standalone delay.
  p.t_cenn = 4.30e-9;
  p.t_prog = 1.04e-9;
  p.t_mem_read = 253e-12;
  p.t_mem_write = 124e-12;
  p.sram_read_delay = 0.0;
  p.e_mem_read = 0.04e-12;
  p.e_mem_write = 0.02e-12;
  p.e_sram_word = 1.0e-12;
  // ADC: 3136 conversions over 4 ADCs in 166.7 ns, 3834 pJ total.
  p.adc_delay = 166.7e-9 / 784.0;
  p.adc_energy = 3834e-12 / 3136.0;
  // FC: 31360 multiplies + 31350 adds in 124.4 ns, 4041 pJ (effective
  // pipelined per-op figures).
  p.fc_mul_delay = 124.4e-9 / 62710.0;
  p.fc_add_delay = 124.4e-9 / 62710.0;
  p.fc_mul_energy = 4041e-12 / 62710.0;
  p.fc_add_energy = 4041e-12 / 62710.0;
  p.calibration_note =
      "cell-step energies back-solved per layer from the published per-layer "
      "aggregates (MNIST designs, 4 arrays); kind-level defaults are design-1 "
      "averages; ADC/FC constants from the published stage totals";
  calibrate_mnist_layers(p);
  return p;
}

// 8-bit digital-path constants, back-solved from the published 8-bit design-1
// total (1442 ns, 104.9 nJ) after scaling the analog terms.
constexpr double kAdc8Delay = 2.985306e-10;
constexpr double kAdc8Energy = 2.403884e-12;
constexpr double kFc8Delay = 2.785238e-12;
constexpr double kFc8Energy = 1.267106e-13;

}  // namespace

CostParams precision_scale(const CostParams& base, const PrecisionScaleOptions& opts) {
  CostParams p = base;
  p.t_cenn *= opts.delay_factor;
  p.t_prog *= opts.delay_factor;
  p.t_mem_read *= opts.delay_factor;
  p.t_mem_write *= opts.delay_factor;
  p.e_cell_conv *= opts.power_factor;
  p.e_cell_relu *= opts.power_factor;
  p.e_cell_pool *= opts.power_factor;
  for (auto& [k, v] : p.layer_e_cell) v *= opts.power_factor;
  p.e_mem_read *= opts.power_factor;
  p.e_mem_write *= opts.power_factor;
  p.e_sram_word *= opts.sram_factor;
  if (opts.rederive_digital) {
    p.precision_bits = opts.target_bits;
    p.adc_delay = kAdc8Delay;
    p.adc_energy = kAdc8Energy;
    p.fc_mul_delay = p.fc_add_delay = kFc8Delay;
    p.fc_mul_energy = p.fc_add_energy = kFc8Energy;
    p.name = base.name + "-scaled";
  }
  return p;
}

CostParams cost_preset(const std::string& name) {
  if (name == "paper-4bit-32nm") return make_paper_4bit();
  if (name == "paper-8bit-32nm") {
    CostParams p = precision_scale(make_paper_4bit(), PrecisionScaleOptions{});
    p.name = "paper-8bit-32nm";
    p.calibration_note =
        "4-bit preset with analog delay x4.3 and analog energy x7.5 (the "
        "published 8-bit aggregates scale power, not the delay-power "
        "product); ADC/FC constants back-solved from the published 8-bit "
        "design-1 total";
    return p;
  }
  throw invalid_argument_error("unknown cost preset: " + name);
}

std::vector<std::string> cost_preset_names() { return {"paper-4bit-32nm", "paper-8bit-32nm"}; }

CostReport trace_cost(const CeNNProgram& prog, const CostParams& params) {
  CostReport rep;
  rep.network = prog.network_name;
  rep.params_name = params.name;
  rep.layers.resize(prog.layers.size());
  for (size_t i = 0; i < prog.layers.size(); ++i) {
    const LayerPlan& plan = prog.layers[i];
    LayerCost& lc = rep.layers[i];
    lc.name = plan.name;
    if (plan.is_readout) {
      lc.kind = "readout";
    } else {
      switch (plan.kind) {
        case LayerKind::Conv: lc.kind = "conv"; break;
        case LayerKind::Relu: lc.kind = "relu"; break;
        case LayerKind::Pool: lc.kind = "pool"; break;
        case LayerKind::Fc: lc.kind = "fc"; break;
      }
    }
    lc.settle_rounds = plan.settle_rounds;
    lc.delay_parts.cenn = plan.settle_rounds * params.t_cenn;
    lc.delay_parts.prog_sram = plan.settle_rounds * params.t_prog;
  }

  for (const Event& e : prog.events) {
    if (e.layer < 0 || e.layer >= static_cast<int>(rep.layers.size()))
      throw Error(ErrorCode::Internal, "trace_cost: event with out-of-range layer");
    LayerCost& lc = rep.layers[e.layer];
    const LayerPlan& plan = prog.layers[e.layer];
    switch (e.kind) {
      case EventKind::TemplateApply: {
        if (e.cells <= 0) throw invalid_argument_error("trace_cost: event lacks activity data");
        double ec = params.e_cell_for(prog.network_name, plan.name, plan.kind, plan.pool_kind);
        lc.energy_parts.cenn += e.cells * ec;
        break;
      }
      case EventKind::MemRead: {
        if (e.cells <= 0) throw invalid_argument_error("trace_cost: event lacks activity data");
        lc.energy_parts.mem += e.cells * params.e_mem_read;
        if (e.mode != MemReadMode::Load) {
          double ec = params.e_cell_for(prog.network_name, plan.name, plan.kind, plan.pool_kind);
          lc.energy_parts.cenn += e.cells * ec;
        }
        break;
      }
      case EventKind::MemWrite:
        if (e.cells <= 0) throw invalid_argument_error("trace_cost: event lacks activity data");
        lc.energy_parts.mem += e.cells * params.e_mem_write;
        break;
      case EventKind::SramRead:
        lc.energy_parts.prog_sram += e.words * params.e_sram_word;
        lc.delay_parts.prog_sram += e.words * params.sram_read_delay;
        break;
      case EventKind::AdcConvert: {
        long serial = (e.count + prog.hw.n_arrays - 1) / prog.hw.n_arrays;
        lc.delay_parts.adc += serial * params.adc_delay;
        lc.energy_parts.adc += e.count * params.adc_energy;
        break;
      }
      case EventKind::DigitalFc:
        lc.delay_parts.fc += e.fc_mults * params.fc_mul_delay + e.fc_adds * params.fc_add_delay;
        lc.energy_parts.fc += e.fc_mults * params.fc_mul_energy + e.fc_adds * params.fc_add_energy;
        break;
    }
  }

  for (LayerCost& lc : rep.layers) {
    lc.delay = lc.delay_parts.total();
    lc.energy = lc.energy_parts.total();
    rep.total_delay += lc.delay;
    rep.total_energy += lc.energy;
  }
  rep.edp = rep.total_delay * rep.total_energy;
  return rep;
}

AnalyticDelay analytic_delay(const NetworkSpec& net, const HardwareConfig& hw,
                             const CostParams& params) {
  NetworkSpec checked = net;
  checked.validate();
  const int N = hw.n_arrays;
  AnalyticDelay out;
  const double step = params.step_time();
  for (const LayerSpec& l : checked.layers) {
    double d = 0;
    switch (l.kind) {
      case LayerKind::Conv: {
        if (N < 2)
          throw model_domain_error(
              "analytic_delay: the formula divides by N-1 and has no N=1 value; "
              "use trace-based costing for single-array configurations");
        double cc = static_cast<double>(l.out_maps) * l.in_maps;
        d = (cc / (N - 1) + cc / N) * step +
            cc / (2.0 * (N - 1)) * params.t_mem_read +
            cc / (2.0 * (N - 1)) * params.t_mem_write;
        break;
      }
      case LayerKind::Relu: {
        int groups = (l.in_maps + N - 1) / N;
        int steps = l.relu_nonlinear ? 1 : 2;
        d = static_cast<double>(steps) * groups * step;
        break;
      }
      case LayerKind::Pool: {
        int groups = (l.in_maps + N - 1) / N;
        int steps = (l.pool_kind == PoolKind::MaxLinear) ? 16 : 1;
        d = static_cast<double>(steps) * groups * step;
        break;
      }
      case LayerKind::Fc: {
        long in_features = static_cast<long>(l.in_maps) * l.in_shape.rows * l.in_shape.cols;
        long serial = (in_features + N - 1) / N;
        d = serial * params.adc_delay +
            in_features * l.out_maps * params.fc_mul_delay +
            (in_features - 1) * l.out_maps * params.fc_add_delay;
        break;
      }
    }
    out.per_layer.push_back({l.name, d});
    out.total += d;
  }
  if (!checked.has_fc()) {
    long serial = (checked.class_count + N - 1) / N;
    double d = serial * params.adc_delay;
    out.per_layer.push_back({"readout", d});
    out.total += d;
  }
  return out;
}

namespace {

std::string fmt_ns(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", seconds * 1e9);
  return buf;
}

std::string fmt_pj(double joules) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", joules * 1e12);
  return buf;
}

}  // namespace

void CostReport::write_csv(std::ostream& out) const {
  out << "layer,kind,delay_ns,energy_pJ,delay_cenn_ns,delay_prog_ns,delay_mem_ns,"
         "delay_adc_ns,delay_fc_ns,energy_cenn_pJ,energy_sram_pJ,energy_mem_pJ,"
         "energy_adc_pJ,energy_fc_pJ\n";
  for (const LayerCost& lc : layers) {
    out << lc.name << ',' << lc.kind << ',' << fmt_ns(lc.delay) << ',' << fmt_pj(lc.energy) << ','
        << fmt_ns(lc.delay_parts.cenn) << ',' << fmt_ns(lc.delay_parts.prog_sram) << ','
        << fmt_ns(lc.delay_parts.mem) << ',' << fmt_ns(lc.delay_parts.adc) << ','
        << fmt_ns(lc.delay_parts.fc) << ',' << fmt_pj(lc.energy_parts.cenn) << ','
        << fmt_pj(lc.energy_parts.prog_sram) << ',' << fmt_pj(lc.energy_parts.mem) << ','
        << fmt_pj(lc.energy_parts.adc) << ',' << fmt_pj(lc.energy_parts.fc) << "\n";
  }
  out << "total,," << fmt_ns(total_delay) << ',' << fmt_pj(total_energy)
      << ",,,,,,,,,,\n";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6e", edp * 1e21);  // nJ * ns
  out << "edp_nJ_ns,," << buf << ",,,,,,,,,,,\n";
}

void CostReport::write_text(std::ostream& out) const {
  out << "cost report: network=" << network << " params=" << params_name << "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-8s %14s %14s %8s\n", "layer", "kind", "delay_ns",
                "energy_pJ", "rounds");
  out << line;
  for (const LayerCost& lc : layers) {
    std::snprintf(line, sizeof line, "%-10s %-8s %14s %14s %8ld\n", lc.name.c_str(),
                  lc.kind.c_str(), fmt_ns(lc.delay).c_str(), fmt_pj(lc.energy).c_str(),
                  lc.settle_rounds);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-10s %-8s %14s %14s\n", "total", "", fmt_ns(total_delay).c_str(),
                fmt_pj(total_energy).c_str());
  out << line;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6e", edp * 1e21);
  out << "EDP (nJ*ns): " << buf << "\n";
}

void CostReport::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write cost report: " + path);
  write_csv(out);
}

const LayerCost* CostReport::find(const std::string& layer_name) const {
  for (const LayerCost& lc : layers)
    if (lc.name == layer_name) return &lc;
  return nullptr;
}

}  // namespace cennforge
