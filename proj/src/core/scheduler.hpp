#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "netspec.hpp"
#include "nonideal.hpp"
#include "template_ops.hpp"

namespace cennforge {

struct HardwareConfig {
  int n_arrays = 4;
  Shape2 array_shape{28, 28};
  int mem_slots_per_cell = 16;
  int precision = 4;  // Nb

  void validate() const;
};

HardwareConfig hardware_preset(const std::string& name);  // "paper-mnist", "paper-cifar"

enum class EventKind : uint8_t {
  TemplateApply,
  SramRead,
  MemWrite,
  MemRead,
  AdcConvert,
  DigitalFc,
};

enum class MemReadMode : uint8_t { Load, AccumulateState, AccumulateOutput };
enum class SramPurpose : uint8_t { Kernel, FixedOp };

struct Event {
  EventKind kind;
  int round = -1;       // events sharing a round run in parallel
  int layer = -1;       // owning layer index
  int array = -1;
  int template_id = -1; // TemplateApply
  int slot = -1;        // MemWrite / MemRead
  int src_array = -1;   // MemRead: array whose memory is read (cross-array adds)
  MemReadMode mode = MemReadMode::Load;
  SramPurpose sram = SramPurpose::FixedOp;
  bool downsample = false;       // MemWrite: keep one pixel per 2x2 group
  bool in_readout = false;       // accumulate folded into the readout stage
  long cells = 0;                // active cells touched (activity for costing)
  long words = 0;                // SramRead
  long count = 0;                // AdcConvert samples
  long fc_mults = 0, fc_adds = 0;
};

struct TemplateStoreEntry {
  Template tpl;
  SettleOptions settle;
  bool custom_settle = false;
  bool is_weight = false;  // trained kernel (quantized in quantized mode)
  std::string label;
};

// Per-layer lowering summary (shapes and structure; costing reads these
// instead of re-deriving them from the event list).
struct LayerPlan {
  std::string name;
  LayerKind kind;
  PoolKind pool_kind = PoolKind::MaxLinear;
  int in_maps = 0, out_maps = 0;
  Shape2 in_shape{}, out_shape{};
  int settle_rounds = 0;      // rounds charged t_cenn + t_prog
  int readout_folded_rounds = 0;
  int tiles = 1;
  bool is_readout = false;    // synthetic row for the final no-fc readout
};

struct ReadoutPlan {
  bool fc = false;
  // no-fc networks: one value per class map, taken at the map center (for a
  // 3x3 final map this is the valid-convolution value)
  std::vector<std::pair<int, int>> map_slots;  // (array, slot) of final maps
  int fc_layer = -1;
};

struct CeNNProgram {
  std::string network_name;
  HardwareConfig hw;
  std::vector<Event> events;
  std::vector<TemplateStoreEntry> templates;
  std::vector<LayerPlan> layers;
  ReadoutPlan readout;
  int rounds = 0;
  int slots_required = 0;

  long count(EventKind k) const;
  long count_layer(int layer, EventKind k) const;
  long accumulate_count(int layer) const;
  long sram_kernel_count(int layer) const;

  // One event per line, stable field order; golden-trace friendly.
  void write_trace(std::ostream& out) const;
  void write_trace_file(const std::string& path) const;

  // Structural replay: every read must hit a written (array, slot).
  void check_validity() const;
};

// Analog-memory slots per cell the lowering will ask for (two map banks
// plus scratch).
int required_mem_slots(const NetworkSpec& net, int n_arrays);

// Lowers the network onto the array set following the grouped dataflow:
// outputs computed one at a time, input maps convolved in parallel across
// arrays, partial sums accumulated pairwise through the inter-array
// connections, template loads emitted per programming round.
CeNNProgram compile(const NetworkSpec& net, const HardwareConfig& hw);

enum class ExecMode : uint8_t { Ideal, Quantized, Nonideal };

struct ExecutionStats {
  long template_applies = 0;
  long sram_reads = 0;
  long mem_writes = 0;
  long mem_reads = 0;
  long accumulates = 0;
  long adc_samples = 0;
  long fc_mults = 0, fc_adds = 0;
  long fc_saturations = 0;
  long sat_samples = 0;
  long clipped_samples = 0;
  double clip_rate = 0.0;
  int rounds = 0;
};

struct ExecResult {
  std::vector<double> scores;
  int predicted = -1;
  ExecutionStats stats;
};

// Replays the event trace against the cell dynamics. `input` carries one
// plane per network input map. In Quantized mode weights are quantized once
// up front and every step output is re-quantized post-saturation; Nonideal
// routes every template coefficient through the OTA curve.
ExecResult execute(const CeNNProgram& prog, const NetworkSpec& net, const HardwareConfig& hw,
                   const std::vector<Grid>& input, ExecMode mode,
                   const OtaCurve* curve = nullptr);

ExecMode exec_mode_from(const std::string& name);
std::string exec_mode_name(ExecMode m);

}  // namespace cennforge
