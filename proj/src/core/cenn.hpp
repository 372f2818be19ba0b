#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "grid.hpp"
#include "nonideal.hpp"

namespace cennforge {

// Saturating output stage: 0.5|x+1| - 0.5|x-1|. Identity on [-1, 1],
// clamps outside. Throws on non-finite input.
double sat(double x);

using Mat3 = std::array<std::array<double, 3>, 3>;

constexpr Mat3 kZeros3{{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};

inline Mat3 center_only(double gain) {
  Mat3 m = kZeros3;
  m[1][1] = gain;
  return m;
}

// Optional nonlinear cell interaction attached to a template.
enum class CellFn : uint8_t {
  None,
  ReluLike,     // output stage reads max(0, sat(x))
  GlobmaxLike,  // neighbor state differences feed -v/8 for v <= 0 into the cell
};

// One CeNN operation: feedback matrix A over neighbor outputs, feed-forward
// matrix B over neighbor inputs, bias Z, optional cell function. Neighborhood
// radius is fixed at 1; B[0][1] couples to the cell one row up, and so on.
struct Template {
  Mat3 a = kZeros3;
  Mat3 b = kZeros3;
  double z = 0.0;
  CellFn d = CellFn::None;

  Template() = default;
  Template(const Mat3& a_, const Mat3& b_, double z_, CellFn d_ = CellFn::None);

  static Template feedforward(const Mat3& b, double z) { return Template(kZeros3, b, z); }

  bool feedback_free() const;
};

enum class BoundaryKind : uint8_t { Zero, Replicate };

struct BoundaryPolicy {
  BoundaryKind kind = BoundaryKind::Zero;
};

// Fixed-step integration controls. Time is measured in cell time constants
// (R_cell = C_cell = 1).
struct SettleOptions {
  double dt = 0.01;
  double t_max = 20.0;
  double eps = 1e-6;
  double blowup = 1e3;
};

// Array snapshot: input, state and output planes plus the power-gating mask.
// Inactive cells hold x = y = 0 and contribute no neighbor current.
struct CeNNArrayState {
  int rows = 0;
  int cols = 0;
  Grid u, x, y;
  std::vector<uint8_t> active;

  CeNNArrayState() = default;
  CeNNArrayState(int r, int c);

  bool is_active(int r, int c) const { return active[static_cast<size_t>(r) * cols + c] != 0; }
  void set_active(int r, int c, bool v) { active[static_cast<size_t>(r) * cols + c] = v ? 1 : 0; }
  void check_shapes() const;
};

// Algebraic steady state for feed-forward templates (A = 0, no cell
// function): x = sum(b * u_neighbors) + z, then y = sat(x).
// An optional OTA curve replaces each product b * u with b * f(u).
void settle_feedforward(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
                        const OtaCurve* curve = nullptr);

// Explicit-Euler integration of dx/dt = -x + sum(a*y) + sum(b*u) + z until
// the per-step state change drops below eps*dt everywhere or t_max elapses.
// y is refreshed through sat after every step. Throws InstabilityError
// (with the offending step index) if any |x| exceeds opts.blowup.
void settle_ode(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
                const SettleOptions& opts, const OtaCurve* curve = nullptr);

// Integration with the cell-function current included. The map is loaded
// into the state (x := u) before integrating, matching how a stored map is
// transferred onto the array. For GlobmaxLike, each neighbor contributes
// D(x_self - x_neighbor), D(v) = -v/8 for v <= 0, which floods local maxima
// outward for as long as the template runs.
void settle_nonlinear_d(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
                        const SettleOptions& opts, const OtaCurve* curve = nullptr);

}  // namespace cennforge
