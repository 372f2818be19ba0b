#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "scheduler.hpp"

namespace cennforge {

// All times in seconds, energies in joules.
struct CostParams {
  std::string name;
  int precision_bits = 4;

  double t_cenn = 4.30e-9;   // settle time of one template step
  double t_prog = 1.04e-9;   // reprogramming (SRAM-read dominated)
  double t_mem_read = 253e-12;
  double t_mem_write = 124e-12;
  double sram_read_delay = 0.0;  // hidden under t_prog in the trace model

  // energy per active cell per template/accumulate step; per-layer entries
  // (key "network/layer") take precedence over the kind defaults
  double e_cell_conv = 0.0;
  double e_cell_relu = 0.0;
  double e_cell_pool = 0.0;
  std::map<std::string, double> layer_e_cell;

  double e_mem_read = 0.04e-12;   // per cell
  double e_mem_write = 0.02e-12;  // per cell
  double e_sram_word = 1.0e-12;   // per 10*Nb-bit word

  double adc_delay = 0.0;   // per sample (one ADC per array, samples serialized)
  double adc_energy = 0.0;  // per sample
  double fc_mul_delay = 0.0, fc_add_delay = 0.0;    // per op
  double fc_mul_energy = 0.0, fc_add_energy = 0.0;  // per op

  std::string calibration_note;

  double step_time() const { return t_cenn + t_prog; }
  double e_cell_for(const std::string& net, const std::string& layer, LayerKind kind,
                    PoolKind pool) const;
};

// "paper-4bit-32nm" and "paper-8bit-32nm"
CostParams cost_preset(const std::string& name);
std::vector<std::string> cost_preset_names();

struct PrecisionScaleOptions {
  double delay_factor = 4.3;   // analog settle + memory latency
  double power_factor = 7.5;   // analog energy terms
  double sram_factor = 2.0;    // word width doubles 4b -> 8b
  bool rederive_digital = true;  // swap in the 8-bit ADC / FC constants
  int target_bits = 8;
};

// Analog delay x4.3, analog energy x7.5; the digital ADC/FC path uses its
// own 8-bit constants. Factors of 1.0 with rederive_digital=false is a no-op.
CostParams precision_scale(const CostParams& base, const PrecisionScaleOptions& opts = {});

struct CostBreakdown {
  double cenn = 0, prog_sram = 0, mem = 0, adc = 0, fc = 0;
  double total() const { return cenn + prog_sram + mem + adc + fc; }
};

struct LayerCost {
  std::string name;
  std::string kind;
  double delay = 0;   // seconds
  double energy = 0;  // joules
  CostBreakdown delay_parts;
  CostBreakdown energy_parts;
  long settle_rounds = 0;
};

struct CostReport {
  std::string network;
  std::string params_name;
  std::vector<LayerCost> layers;
  double total_delay = 0;
  double total_energy = 0;
  double edp = 0;  // total_delay * total_energy

  void write_csv(std::ostream& out) const;
  void write_text(std::ostream& out) const;
  void save_csv(const std::string& path) const;
  const LayerCost* find(const std::string& layer_name) const;
};

// Event-driven accounting over the compiled trace. Delay counts settle
// rounds (memory and SRAM latency ride inside t_prog) plus the ADC / FC
// stages; energy sums per-event terms.
CostReport trace_cost(const CeNNProgram& prog, const CostParams& params);

// Literal per-layer evaluation of the processing-time expression
//   (Cl*Cl-1/(N-1) + Cl*Cl-1/N)(t_cenn+t_prog)
//     + Cl*Cl-1/(2(N-1)) * (t_mem_read + t_mem_write)
// for convolution layers; ReLU / pooling layers charge their step counts.
// N = 1 is outside the formula's domain and raises a model-domain error.
struct AnalyticDelay {
  std::vector<std::pair<std::string, double>> per_layer;  // seconds
  double total = 0;
};
AnalyticDelay analytic_delay(const NetworkSpec& net, const HardwareConfig& hw,
                             const CostParams& params);

}  // namespace cennforge
