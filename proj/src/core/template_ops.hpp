#pragma once

#include <map>
#include <string>
#include <vector>

#include "cenn.hpp"
#include "grid.hpp"
#include "nonideal.hpp"

namespace cennforge {

// Elementwise sat(a + b); partial-sum accumulation primitive.
Grid add_maps(const Grid& a, const Grid& b);

// Keep the top-left cell of each complete 2x2 group. Output is
// floor(rows/2) x floor(cols/2); a trailing odd row/column is dropped.
Grid downsample2x2(const Grid& g);

enum class StepKind : uint8_t {
  ApplyTemplate,
  StoreToMem,
  LoadToInput,
  AddFromMem,
  Downsample2x2,
  WriteBack,
};

// How an AddFromMem combines with the running map. The state flavor sums the
// memory value with the pre-saturation state of the last template step (the
// stored charge is injected at the state node before the output stage); the
// output flavor sums two saturated values. Both re-saturate once.
enum class AddDomain : uint8_t { State, Output };

struct Step {
  StepKind kind;
  Template tpl;                    // ApplyTemplate
  SettleOptions settle;            // ApplyTemplate (nonlinear steps override t_max)
  bool use_custom_settle = false;  // force ODE path with `settle`
  int slot = -1;                   // memory steps
  AddDomain add_domain = AddDomain::State;

  static Step apply(const Template& t);
  static Step apply_nonlinear(const Template& t, const SettleOptions& s);
  static Step store(int slot);
  static Step load(int slot);
  static Step add_from(int slot, AddDomain domain = AddDomain::State);
  static Step downsample();
  static Step write_back();
};

// An ordered list of steps realizing one CoNN-layer operation on one map.
struct TemplateProgram {
  std::vector<Step> steps;
  // slots a caller must pre-populate before running (none for the shipped
  // programs; every load/add below is preceded by a store)
  std::vector<int> external_inputs;

  void validate() const;  // slot discipline + non-empty
  int template_step_count() const;
};

enum class Direction : uint8_t { N, S, E, W, NE, NW, SE, SW };

// Fixed template pieces used by the pooling sequence.
Template diff_template(Direction d);  // 0.5 at the chosen neighbor, -0.5 center, Z = -1
Template inc_template();              // center 1, Z = +1
Template mult_template();             // center 2, Z = 0
Template add_identity_template();     // center 1, Z = 0 (accumulate rounds)

// Single kernel application. B holds the kernel so that the neighbor sum
// equals zero-padded cross-correlation with it, matching how trained
// frameworks emit weights; Z carries the bias.
TemplateProgram conv_program(const Mat3& kernel, double bias);

// Shift down by one, then back up: exact max(0, x) for inputs in [-1, 1].
TemplateProgram relu_program();

// One neighbor comparison: store, DIFF toward `d`, INC, MULT, add the stored
// map back. Net effect: every pixel becomes max(self, neighbor-in-d).
TemplateProgram maxpool_compare_step(Direction d);

enum class MaxPoolNeighbors : uint8_t { Four, Eight };

// Comparisons against the four cardinal neighbors in succession (16 template
// steps). Because later comparisons see already-updated values, the sequence
// covers the full 3x3 receptive field. The Eight variant appends the four
// diagonal comparisons (32 steps); it computes the same map and exists for
// cost exploration.
TemplateProgram maxpool_program(bool downsample,
                                MaxPoolNeighbors neighbors = MaxPoolNeighbors::Four);

enum class PoolWindow : uint8_t { W2x2, W3x3 };

// One averaging template. The 2x2 window covers {self, E, S, SE} so the group
// mean lands on the cell the downsample step keeps.
TemplateProgram avgpool_program(PoolWindow window, bool downsample);

// Single-step alternatives built on the nonlinear cell functions.
TemplateProgram nonlinear_relu_program();
TemplateProgram nonlinear_pool_program(double t_max, bool downsample = false);

// Runs programs on a map with a bank of memory slots. Tracks the pre-sat
// value of the running map so state-domain accumulates are exact.
class StepEngine {
 public:
  StepEngine() = default;
  explicit StepEngine(Grid initial, BoundaryPolicy boundary = {});

  void reset(Grid map);
  void set_boundary(BoundaryPolicy b) { boundary_ = b; }
  void set_quantization(const QuantSpec* q) { quant_ = q; }  // post-sat map quantization
  void set_curve(const OtaCurve* c) { curve_ = c; }
  void set_settle_options(const SettleOptions& o) { settle_ = o; }
  // Force the integrator even for feed-forward templates (cross-check path).
  void set_force_ode(bool f) { force_ode_ = f; }
  void set_active_mask(std::vector<uint8_t> mask);  // power-gated cells

  void run(const TemplateProgram& p);
  void apply(const Step& s);

  // Replace the running map (a load from another array's memory); slots and
  // clip counters are preserved.
  void set_map(const Grid& g) {
    map_ = g;
    raw_ = g;
  }

  const Grid& map() const { return map_; }
  const Grid& raw() const { return raw_; }
  const Grid& slot(int id) const;
  void put_slot(int id, Grid g) { slots_[id] = std::move(g); }

  long sat_samples() const { return sat_samples_; }
  long clipped_samples() const { return clipped_samples_; }

 private:
  void saturate_from_raw();

  Grid map_, raw_;
  std::map<int, Grid> slots_;
  BoundaryPolicy boundary_{};
  SettleOptions settle_{};
  const QuantSpec* quant_ = nullptr;
  const OtaCurve* curve_ = nullptr;
  bool force_ode_ = false;
  std::vector<uint8_t> mask_;  // empty = all active
  long sat_samples_ = 0;
  long clipped_samples_ = 0;
};

// Scratch slot id reserved for cross-array transfers staged by the executor.
constexpr int kEngineTempSlot = 1000000;

// Convenience: run a program over a map with default settings.
Grid run_program(const TemplateProgram& p, const Grid& input,
                 BoundaryPolicy boundary = {});

}  // namespace cennforge
