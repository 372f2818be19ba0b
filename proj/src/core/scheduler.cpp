#include "scheduler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "fc_digital.hpp"

namespace cennforge {

void HardwareConfig::validate() const {
  if (n_arrays <= 0) throw invalid_argument_error("hardware: n_arrays must be positive");
  if (array_shape.rows <= 0 || array_shape.cols <= 0)
    throw invalid_argument_error("hardware: array shape must be positive");
  if (mem_slots_per_cell <= 0)
    throw invalid_argument_error("hardware: mem_slots_per_cell must be positive");
  if (precision != 32 && (precision < 2 || precision > 16))
    throw invalid_argument_error("hardware: precision must be 32 or in [2, 16]");
}

HardwareConfig hardware_preset(const std::string& name) {
  if (name == "paper-mnist") return HardwareConfig{4, {28, 28}, 16, 4};
  if (name == "paper-cifar") return HardwareConfig{4, {32, 32}, 160, 4};
  throw invalid_argument_error("unknown hardware preset: " + name);
}

long CeNNProgram::count(EventKind k) const {
  long n = 0;
  for (const Event& e : events)
    if (e.kind == k) ++n;
  return n;
}

long CeNNProgram::count_layer(int layer, EventKind k) const {
  long n = 0;
  for (const Event& e : events)
    if (e.layer == layer && e.kind == k) ++n;
  return n;
}

long CeNNProgram::accumulate_count(int layer) const {
  long n = 0;
  for (const Event& e : events)
    if (e.layer == layer && e.kind == EventKind::MemRead && e.mode != MemReadMode::Load) ++n;
  return n;
}

long CeNNProgram::sram_kernel_count(int layer) const {
  long n = 0;
  for (const Event& e : events)
    if (e.layer == layer && e.kind == EventKind::SramRead && e.sram == SramPurpose::Kernel) ++n;
  return n;
}

namespace {

const char* kind_tag(EventKind k) {
  switch (k) {
    case EventKind::TemplateApply: return "TPL";
    case EventKind::SramRead: return "SRD";
    case EventKind::MemWrite: return "MWR";
    case EventKind::MemRead: return "MRD";
    case EventKind::AdcConvert: return "ADC";
    case EventKind::DigitalFc: return "FC";
  }
  return "?";
}

}  // namespace

void CeNNProgram::write_trace(std::ostream& out) const {
  for (const Event& e : events) {
    out << kind_tag(e.kind) << " r=" << e.round << " l=" << e.layer;
    switch (e.kind) {
      case EventKind::TemplateApply:
        out << " a=" << e.array << " t=" << templates[e.template_id].label
            << " cells=" << e.cells;
        break;
      case EventKind::SramRead:
        out << " w=" << e.words << " p=" << (e.sram == SramPurpose::Kernel ? "kernel" : "fixed");
        break;
      case EventKind::MemWrite:
        out << " a=" << e.array << " s=" << e.slot;
        if (e.src_array >= 0 && e.src_array != e.array) out << " from=" << e.src_array;
        if (e.downsample) out << " ds";
        out << " cells=" << e.cells;
        break;
      case EventKind::MemRead:
        out << " a=" << e.array << " s=" << e.slot;
        if (e.src_array >= 0 && e.src_array != e.array) out << " from=" << e.src_array;
        out << " m="
            << (e.mode == MemReadMode::Load
                    ? "load"
                    : (e.mode == MemReadMode::AccumulateState ? "acc_st" : "acc_out"))
            << " cells=" << e.cells;
        if (e.in_readout) out << " fold";
        break;
      case EventKind::AdcConvert:
        out << " n=" << e.count;
        break;
      case EventKind::DigitalFc:
        out << " mul=" << e.fc_mults << " add=" << e.fc_adds;
        break;
    }
    out << "\n";
  }
}

void CeNNProgram::write_trace_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write trace file: " + path);
  write_trace(out);
}

void CeNNProgram::check_validity() const {
  std::set<std::pair<int, int>> written;  // (array, slot)
  for (const Event& e : events) {
    if (e.kind == EventKind::MemWrite) written.insert({e.array, e.slot});
    if (e.kind == EventKind::MemRead) {
      int holder = e.src_array >= 0 ? e.src_array : e.array;
      if (!written.count({holder, e.slot}))
        throw invalid_argument_error("trace reads slot " + std::to_string(e.slot) + " of array " +
                                     std::to_string(holder) + " before any write");
    }
    if (e.kind == EventKind::TemplateApply &&
        (e.template_id < 0 || e.template_id >= static_cast<int>(templates.size())))
      throw invalid_argument_error("trace references unknown template id " +
                                   std::to_string(e.template_id));
  }
}

// --- compile -----------------------------------------------------------------

namespace {

struct Lowering {
  const NetworkSpec& net;
  const HardwareConfig& hw;
  CeNNProgram prog;
  int round = 0;
  int slot_stride = 0;  // H: slots reserved per io bank

  int scratch_pool() const { return 2 * slot_stride; }
  int psum_scratch() const { return 2 * slot_stride + 1; }
  int psum_running() const { return 2 * slot_stride + 2; }
  int in_base(int layer) const { return (layer % 2 == 0) ? 0 : slot_stride; }
  int out_base(int layer) const { return (layer % 2 == 0) ? slot_stride : 0; }

  int add_template(const Template& t, const std::string& label, bool custom = false,
                   SettleOptions so = {}, bool is_weight = false) {
    prog.templates.push_back({t, so, custom, is_weight, label});
    return static_cast<int>(prog.templates.size()) - 1;
  }

  int tiles_for(Shape2 map) const {
    int tr = (map.rows + hw.array_shape.rows - 1) / hw.array_shape.rows;
    int tc = (map.cols + hw.array_shape.cols - 1) / hw.array_shape.cols;
    return tr * tc;
  }

  Event base_event(EventKind k, int layer) {
    Event e;
    e.kind = k;
    e.layer = layer;
    e.round = round;
    return e;
  }

  void emit(Event e) { prog.events.push_back(e); }

  void sram(int layer, SramPurpose p) {
    Event e = base_event(EventKind::SramRead, layer);
    e.words = 1;
    e.sram = p;
    emit(e);
  }

  void mem_read(int layer, int array, int src, int slot, MemReadMode mode, long cells,
                bool in_readout = false) {
    Event e = base_event(EventKind::MemRead, layer);
    e.array = array;
    e.src_array = src;
    e.slot = slot;
    e.mode = mode;
    e.cells = cells;
    e.in_readout = in_readout;
    emit(e);
  }

  void mem_write(int layer, int array, int src, int slot, long cells, bool ds = false) {
    Event e = base_event(EventKind::MemWrite, layer);
    e.array = array;
    e.src_array = src;
    e.slot = slot;
    e.cells = cells;
    e.downsample = ds;
    emit(e);
  }

  void apply(int layer, int array, int tpl, long cells) {
    Event e = base_event(EventKind::TemplateApply, layer);
    e.array = array;
    e.template_id = tpl;
    e.cells = cells;
    emit(e);
  }

  void lower_conv(int li, const LayerSpec& l, LayerPlan& plan, bool last_cenn_layer);
  void lower_relu(int li, const LayerSpec& l, LayerPlan& plan);
  void lower_pool(int li, const LayerSpec& l, LayerPlan& plan);
  void lower_fc(int li, const LayerSpec& l, LayerPlan& plan);
};

void Lowering::lower_conv(int li, const LayerSpec& l, LayerPlan& plan, bool last_cenn_layer) {
  const int N = hw.n_arrays;
  const long cells = static_cast<long>(l.in_shape.rows) * l.in_shape.cols;
  const int tiles = tiles_for(l.in_shape);
  plan.tiles = tiles;
  const int C0 = l.in_maps, C1 = l.out_maps;
  const int M = (C0 + N - 1) / N;

  // template ids for every kernel; bias rides on the first input's template
  std::vector<int> tpl_ids(static_cast<size_t>(C0) * C1);
  for (int o = 0; o < C1; ++o)
    for (int j = 0; j < C0; ++j) {
      double z = (j == 0) ? l.biases[o] : 0.0;
      Template t = Template::feedforward(l.kernel(o, j), z);
      tpl_ids[static_cast<size_t>(o) * C0 + j] = add_template(
          t, l.name + ".k" + std::to_string(o) + "." + std::to_string(j), false, {}, true);
    }

  if (C0 == 1) {
    // single input map: fill the arrays with output iterations instead
    int P = std::min(N, C1);
    for (int blk = 0; blk < (C1 + P - 1) / P; ++blk) {
      ++round;
      int lo = blk * P, hi = std::min(C1, lo + P);
      for (int o = lo; o < hi; ++o) {
        int a = o - lo;
        mem_read(li, a, 0, in_base(li), MemReadMode::Load, cells);
      }
      for (int o = lo; o < hi; ++o) {
        sram(li, SramPurpose::Kernel);
        apply(li, o - lo, tpl_ids[static_cast<size_t>(o) * C0], cells);
      }
      plan.settle_rounds += tiles;
      ++round;
      for (int o = lo; o < hi; ++o)
        mem_write(li, o % N, o - lo, out_base(li) + o / N, cells);
    }
    return;
  }

  for (int o = 0; o < C1; ++o) {
    const int target = o % N;
    for (int q = 0; q < M; ++q) {
      const int g = std::min(N, C0 - q * N);
      ++round;
      for (int a = 0; a < g; ++a)
        mem_read(li, a, a, in_base(li) + q, MemReadMode::Load, cells);
      ++round;
      for (int a = 0; a < g; ++a) {
        sram(li, SramPurpose::Kernel);
        apply(li, a, tpl_ids[static_cast<size_t>(o) * C0 + q * N + a], cells);
      }
      plan.settle_rounds += tiles;
      if (g > 1 || q > 0) {
        ++round;
        for (int a = 1; a < g; ++a) mem_write(li, a, a, psum_scratch(), cells);
        ++round;
        sram(li, SramPurpose::FixedOp);
        for (int a = 1; a < g; ++a)
          mem_read(li, 0, a, psum_scratch(), MemReadMode::AccumulateOutput, cells,
                   last_cenn_layer);
        if (q > 0)
          mem_read(li, 0, 0, psum_running(), MemReadMode::AccumulateOutput, cells,
                   last_cenn_layer);
        if (last_cenn_layer)
          plan.readout_folded_rounds += tiles;
        else
          plan.settle_rounds += tiles;
      }
      if (q + 1 < M) {
        ++round;
        mem_write(li, 0, 0, psum_running(), cells);
      }
    }
    ++round;
    mem_write(li, target, 0, out_base(li) + o / N, cells);
  }
}

void Lowering::lower_relu(int li, const LayerSpec& l, LayerPlan& plan) {
  const int N = hw.n_arrays;
  const long cells = static_cast<long>(l.in_shape.rows) * l.in_shape.cols;
  const int tiles = tiles_for(l.in_shape);
  plan.tiles = tiles;
  const int C = l.in_maps;
  const int M = (C + N - 1) / N;

  if (l.relu_nonlinear) {
    Template t(kZeros3, center_only(1.0), 0.0, CellFn::ReluLike);
    int tid = add_template(t, l.name + ".nl_relu", true, SettleOptions{});
    for (int q = 0; q < M; ++q) {
      const int g = std::min(N, C - q * N);
      ++round;
      for (int a = 0; a < g; ++a) mem_read(li, a, a, in_base(li) + q, MemReadMode::Load, cells);
      ++round;
      sram(li, SramPurpose::FixedOp);
      for (int a = 0; a < g; ++a) apply(li, a, tid, cells);
      plan.settle_rounds += tiles;
      ++round;
      for (int a = 0; a < g; ++a) mem_write(li, a, a, out_base(li) + q, cells);
    }
    return;
  }

  int shift_down = add_template(Template::feedforward(center_only(1.0), -1.0),
                                l.name + ".shift_down");
  int shift_up = add_template(Template::feedforward(center_only(1.0), 1.0),
                              l.name + ".shift_up");
  for (int q = 0; q < M; ++q) {
    const int g = std::min(N, C - q * N);
    ++round;
    for (int a = 0; a < g; ++a) mem_read(li, a, a, in_base(li) + q, MemReadMode::Load, cells);
    for (int step : {shift_down, shift_up}) {
      ++round;
      sram(li, SramPurpose::FixedOp);
      for (int a = 0; a < g; ++a) apply(li, a, step, cells);
      plan.settle_rounds += tiles;
    }
    ++round;
    for (int a = 0; a < g; ++a) mem_write(li, a, a, out_base(li) + q, cells);
  }
}

void Lowering::lower_pool(int li, const LayerSpec& l, LayerPlan& plan) {
  const int N = hw.n_arrays;
  const long cells = static_cast<long>(l.in_shape.rows) * l.in_shape.cols;
  const long out_cells = static_cast<long>(l.out_shape.rows) * l.out_shape.cols;
  const int tiles = tiles_for(l.in_shape);
  plan.tiles = tiles;
  const int C = l.in_maps;
  const int M = (C + N - 1) / N;

  if (l.pool_kind == PoolKind::Avg) {
    TemplateProgram p = avgpool_program(l.pool_window == 2 ? PoolWindow::W2x2 : PoolWindow::W3x3,
                                        false);
    int tid = add_template(p.steps[0].tpl, l.name + ".avg");
    for (int q = 0; q < M; ++q) {
      const int g = std::min(N, C - q * N);
      ++round;
      for (int a = 0; a < g; ++a) mem_read(li, a, a, in_base(li) + q, MemReadMode::Load, cells);
      ++round;
      sram(li, SramPurpose::FixedOp);
      for (int a = 0; a < g; ++a) apply(li, a, tid, cells);
      plan.settle_rounds += tiles;
      ++round;
      for (int a = 0; a < g; ++a)
        mem_write(li, a, a, out_base(li) + q, l.downsample ? out_cells : cells, l.downsample);
    }
    return;
  }

  if (l.pool_kind == PoolKind::Nonlinear) {
    if (tiles > 1)
      throw capacity_error("layer '" + l.name +
                           "': nonlinear pooling cannot be tiled across arrays (map " +
                           std::to_string(l.in_shape.rows) + "x" + std::to_string(l.in_shape.cols) +
                           " exceeds the array)");
    Template t(center_only(1.0), kZeros3, 0.0, CellFn::GlobmaxLike);
    SettleOptions so;
    so.t_max = l.nonlinear_t_max;
    int tid = add_template(t, l.name + ".globmax", true, so);
    for (int q = 0; q < M; ++q) {
      const int g = std::min(N, C - q * N);
      ++round;
      for (int a = 0; a < g; ++a) mem_read(li, a, a, in_base(li) + q, MemReadMode::Load, cells);
      ++round;
      sram(li, SramPurpose::FixedOp);
      for (int a = 0; a < g; ++a) apply(li, a, tid, cells);
      plan.settle_rounds += tiles;
      ++round;
      for (int a = 0; a < g; ++a)
        mem_write(li, a, a, out_base(li) + q, l.downsample ? out_cells : cells, l.downsample);
    }
    return;
  }

  // linear max pooling: DIFF/INC/MULT/ADD per cardinal neighbor
  std::vector<Direction> dirs{Direction::N, Direction::S, Direction::E, Direction::W};
  int inc = add_template(inc_template(), l.name + ".inc");
  int mult = add_template(mult_template(), l.name + ".mult");
  std::map<Direction, int> diff_ids;
  for (Direction d : dirs) {
    static const char* names[] = {"N", "S", "E", "W"};
    diff_ids[d] = add_template(diff_template(d),
                               l.name + ".diff_" + names[static_cast<int>(d)]);
  }

  for (int q = 0; q < M; ++q) {
    const int g = std::min(N, C - q * N);
    ++round;
    for (int a = 0; a < g; ++a) mem_read(li, a, a, in_base(li) + q, MemReadMode::Load, cells);
    for (Direction d : dirs) {
      ++round;
      for (int a = 0; a < g; ++a) mem_write(li, a, a, scratch_pool(), cells);
      for (int step : {diff_ids[d], inc, mult}) {
        ++round;
        sram(li, SramPurpose::FixedOp);
        for (int a = 0; a < g; ++a) apply(li, a, step, cells);
        plan.settle_rounds += tiles;
      }
      ++round;
      sram(li, SramPurpose::FixedOp);
      for (int a = 0; a < g; ++a)
        mem_read(li, a, a, scratch_pool(), MemReadMode::AccumulateState, cells);
      plan.settle_rounds += tiles;
    }
    ++round;
    for (int a = 0; a < g; ++a)
      mem_write(li, a, a, out_base(li) + q, l.downsample ? out_cells : cells, l.downsample);
  }
}

void Lowering::lower_fc(int li, const LayerSpec& l, LayerPlan& plan) {
  const long in_features = static_cast<long>(l.in_maps) * l.in_shape.rows * l.in_shape.cols;
  ++round;
  Event adc = base_event(EventKind::AdcConvert, li);
  adc.count = in_features;
  emit(adc);
  ++round;
  Event fc = base_event(EventKind::DigitalFc, li);
  fc.fc_mults = in_features * l.out_maps;
  fc.fc_adds = (in_features - 1) * l.out_maps;
  emit(fc);
  plan.settle_rounds = 0;
  prog.readout.fc = true;
  prog.readout.fc_layer = li;
}

}  // namespace

int required_mem_slots(const NetworkSpec& net, int n_arrays) {
  NetworkSpec checked = net;
  checked.validate();
  int max_held = (checked.input_maps + n_arrays - 1) / n_arrays;
  for (const LayerSpec& l : checked.layers)
    if (l.kind != LayerKind::Fc)
      max_held = std::max(max_held, (l.out_maps + n_arrays - 1) / n_arrays);
  return 2 * max_held + 3;
}

CeNNProgram compile(const NetworkSpec& net, const HardwareConfig& hw) {
  hw.validate();
  NetworkSpec checked = net;
  checked.validate();
  for (const LayerSpec& l : checked.layers)
    if ((l.kind == LayerKind::Conv || l.kind == LayerKind::Fc) && !l.has_weights())
      throw invalid_argument_error("compile: layer '" + l.name +
                                   "' has no weights loaded (load a blob or randomize)");

  Lowering lw{checked, hw, {}, 0, 0};
  lw.prog.network_name = checked.name;
  lw.prog.hw = hw;

  int max_held = 1;  // network input occupies ceil(input_maps/N)
  {
    int maps = checked.input_maps;
    max_held = std::max(max_held, (maps + hw.n_arrays - 1) / hw.n_arrays);
    for (const LayerSpec& l : checked.layers)
      if (l.kind != LayerKind::Fc)
        max_held = std::max(max_held, (l.out_maps + hw.n_arrays - 1) / hw.n_arrays);
  }
  lw.slot_stride = max_held;
  lw.prog.slots_required = 2 * max_held + 3;
  if (lw.prog.slots_required > hw.mem_slots_per_cell)
    throw capacity_error("network '" + checked.name + "' needs " +
                         std::to_string(lw.prog.slots_required) +
                         " analog memory slots per cell, hardware provides " +
                         std::to_string(hw.mem_slots_per_cell));

  int last_cenn = -1;
  for (size_t i = 0; i < checked.layers.size(); ++i)
    if (checked.layers[i].kind != LayerKind::Fc) last_cenn = static_cast<int>(i);

  for (size_t i = 0; i < checked.layers.size(); ++i) {
    const LayerSpec& l = checked.layers[i];
    LayerPlan plan;
    plan.name = l.name;
    plan.kind = l.kind;
    plan.pool_kind = l.pool_kind;
    plan.in_maps = l.in_maps;
    plan.out_maps = l.out_maps;
    plan.in_shape = l.in_shape;
    plan.out_shape = l.out_shape;
    int li = static_cast<int>(i);
    switch (l.kind) {
      case LayerKind::Conv:
        lw.lower_conv(li, l, plan, li == last_cenn);
        break;
      case LayerKind::Relu:
        lw.lower_relu(li, l, plan);
        break;
      case LayerKind::Pool:
        lw.lower_pool(li, l, plan);
        break;
      case LayerKind::Fc:
        lw.lower_fc(li, l, plan);
        break;
    }
    lw.prog.layers.push_back(plan);
  }

  if (!checked.has_fc()) {
    // final readout: one value per class map through the ADCs, reported as
    // its own row
    const LayerSpec& last = checked.layers.back();
    ++lw.round;
    Event adc = lw.base_event(EventKind::AdcConvert, static_cast<int>(lw.prog.layers.size()));
    adc.count = last.out_maps;
    lw.emit(adc);
    LayerPlan ro;
    ro.name = "readout";
    ro.kind = LayerKind::Fc;
    ro.is_readout = true;
    ro.in_maps = last.out_maps;
    ro.out_maps = last.out_maps;
    ro.in_shape = last.out_shape;
    ro.out_shape = {1, 1};
    lw.prog.layers.push_back(ro);
    for (int o = 0; o < last.out_maps; ++o)
      lw.prog.readout.map_slots.push_back(
          {o % hw.n_arrays,
           lw.out_base(static_cast<int>(checked.layers.size()) - 1) + o / hw.n_arrays});
  }

  lw.prog.rounds = lw.round;
  lw.prog.check_validity();
  return lw.prog;
}

// --- execute -----------------------------------------------------------------

ExecMode exec_mode_from(const std::string& name) {
  if (name == "ideal") return ExecMode::Ideal;
  if (name == "quantized") return ExecMode::Quantized;
  if (name == "nonideal") return ExecMode::Nonideal;
  throw invalid_argument_error("unknown execution mode: " + name);
}

std::string exec_mode_name(ExecMode m) {
  switch (m) {
    case ExecMode::Ideal: return "ideal";
    case ExecMode::Quantized: return "quantized";
    case ExecMode::Nonideal: return "nonideal";
  }
  return "?";
}

ExecResult execute(const CeNNProgram& prog, const NetworkSpec& net, const HardwareConfig& hw,
                   const std::vector<Grid>& input, ExecMode mode, const OtaCurve* curve) {
  if (static_cast<int>(input.size()) != net.input_maps)
    throw shape_error("execute: expected " + std::to_string(net.input_maps) +
                      " input planes, got " + std::to_string(input.size()));
  for (const Grid& g : input) {
    if (g.rows() != net.input_shape.rows || g.cols() != net.input_shape.cols)
      throw shape_error("execute: input plane shape mismatch");
    for (size_t k = 0; k < g.size(); ++k) {
      double v = g.data()[k];
      if (!std::isfinite(v) || v < -1.0 || v > 1.0)
        throw invalid_argument_error("execute: input pixels must lie in [-1, 1]");
    }
  }
  if (mode == ExecMode::Nonideal && curve == nullptr)
    throw invalid_argument_error("execute: nonideal mode requires an OTA curve");
  if (mode == ExecMode::Quantized && hw.precision == 32)
    throw invalid_argument_error("execute: quantized mode needs a finite hardware precision");

  QuantSpec qspec(hw.precision == 32 ? 8 : hw.precision);
  const bool quantized = (mode == ExecMode::Quantized);
  const OtaCurve* used_curve = (mode == ExecMode::Nonideal) ? curve : nullptr;

  // weights are quantized once, at load
  // fixed control templates (shift, DIFF, MULT) keep exact values; only
  // trained kernels pass through the weight grid
  std::vector<TemplateStoreEntry> templates = prog.templates;
  if (quantized) {
    for (TemplateStoreEntry& t : templates) {
      if (!t.is_weight) continue;
      for (auto& row : t.tpl.b)
        for (double& v : row) v = quantize(v, qspec);
      t.tpl.z = quantize(t.tpl.z, qspec);
    }
  }

  std::vector<StepEngine> engines(hw.n_arrays);
  for (auto& e : engines) {
    e.reset(Grid(1, 1));
    if (quantized) e.set_quantization(&qspec);
    if (used_curve) e.set_curve(used_curve);
  }

  // preload the input planes (sensor side, no trace events)
  for (int j = 0; j < net.input_maps; ++j) {
    Grid plane = input[j];
    if (quantized) quantize_grid(plane, qspec);
    engines[j % hw.n_arrays].put_slot(j / hw.n_arrays, plane);
  }

  ExecResult res;
  ExecutionStats& st = res.stats;
  st.rounds = prog.rounds;

  auto slot_value = [&](int array, int slot) -> const Grid& { return engines[array].slot(slot); };

  std::vector<double> fc_scores;

  for (const Event& e : prog.events) {
    switch (e.kind) {
      case EventKind::TemplateApply: {
        const TemplateStoreEntry& t = templates[e.template_id];
        Step s = t.custom_settle ? Step::apply_nonlinear(t.tpl, t.settle) : Step::apply(t.tpl);
        engines[e.array].apply(s);
        ++st.template_applies;
        break;
      }
      case EventKind::SramRead:
        ++st.sram_reads;
        break;
      case EventKind::MemWrite: {
        const Grid& src =
            (e.src_array >= 0 && e.src_array != e.array) ? engines[e.src_array].map()
                                                         : engines[e.array].map();
        Grid v = e.downsample ? downsample2x2(src) : src;
        engines[e.array].put_slot(e.slot, std::move(v));
        ++st.mem_writes;
        break;
      }
      case EventKind::MemRead: {
        int holder = e.src_array >= 0 ? e.src_array : e.array;
        const Grid& v = slot_value(holder, e.slot);
        if (e.mode == MemReadMode::Load) {
          engines[e.array].set_map(v);
        } else {
          engines[e.array].put_slot(kEngineTempSlot, v);
          engines[e.array].apply(Step::add_from(kEngineTempSlot,
                                                e.mode == MemReadMode::AccumulateState
                                                    ? AddDomain::State
                                                    : AddDomain::Output));
          ++st.accumulates;
        }
        ++st.mem_reads;
        break;
      }
      case EventKind::AdcConvert:
        st.adc_samples += e.count;
        break;
      case EventKind::DigitalFc: {
        const LayerSpec& fc = net.layers[e.layer];
        std::vector<double> gathered;
        gathered.reserve(static_cast<size_t>(fc.in_maps) * fc.in_shape.rows * fc.in_shape.cols);
        // fc inputs are the previous layer's outputs: map j sits at array
        // j % N in the fc layer's input bank
        int stride = (prog.slots_required - 3) / 2;
        int in_base = (e.layer % 2 == 0) ? 0 : stride;
        for (int j = 0; j < fc.in_maps; ++j) {
          const Grid& m = slot_value(j % hw.n_arrays, in_base + j / hw.n_arrays);
          for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) gathered.push_back(m.at(r, c));
        }
        st.fc_mults += e.fc_mults;
        st.fc_adds += e.fc_adds;
        if (quantized) {
          FixedPointFormat fmt(qspec.bits);
          std::vector<int64_t> codes(gathered.size());
          for (size_t k = 0; k < gathered.size(); ++k) codes[k] = adc_sample(gathered[k], qspec);
          std::vector<int64_t> wcodes(fc.fc_weights.size());
          for (size_t k = 0; k < fc.fc_weights.size(); ++k)
            wcodes[k] = quantize_code(fc.fc_weights[k], qspec);
          FcResult r = fc_eval(codes, wcodes, fc.out_maps, fmt);
          st.fc_saturations += r.saturations;
          double lsb = 1.0 / static_cast<double>(1L << (qspec.bits - 1));
          fc_scores.resize(r.scores.size());
          for (size_t k = 0; k < r.scores.size(); ++k)
            fc_scores[k] = static_cast<double>(r.scores[k]) * lsb * lsb;
        } else {
          fc_scores.assign(fc.out_maps, 0.0);
          for (int o = 0; o < fc.out_maps; ++o) {
            const double* row = fc.fc_weights.data() + static_cast<size_t>(o) * gathered.size();
            double acc = 0.0;
            for (size_t k = 0; k < gathered.size(); ++k) acc += row[k] * gathered[k];
            fc_scores[o] = acc;
          }
        }
        break;
      }
    }
  }

  if (prog.readout.fc) {
    res.scores = fc_scores;
  } else {
    for (auto [array, slot] : prog.readout.map_slots) {
      const Grid& m = slot_value(array, slot);
      double v = m.at(m.rows() / 2, m.cols() / 2);
      if (quantized) v = quantize(v, qspec);
      res.scores.push_back(v);
    }
  }
  if (res.scores.empty()) throw Error(ErrorCode::Internal, "execute: no readout produced");
  res.predicted = argmax(res.scores);

  for (const auto& e : engines) {
    st.sat_samples += e.sat_samples();
    st.clipped_samples += e.clipped_samples();
  }
  st.clip_rate = st.sat_samples ? static_cast<double>(st.clipped_samples) / st.sat_samples : 0.0;
  return res;
}

}  // namespace cennforge
