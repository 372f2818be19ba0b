#include "cenn.hpp"

#include <cmath>
#include <string>

#include "errors.hpp"

namespace cennforge {

double sat(double x) {
  if (!std::isfinite(x)) throw invalid_argument_error("sat: non-finite input");
  return 0.5 * std::fabs(x + 1.0) - 0.5 * std::fabs(x - 1.0);
}

Template::Template(const Mat3& a_, const Mat3& b_, double z_, CellFn d_)
    : a(a_), b(b_), z(z_), d(d_) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (!std::isfinite(a[i][j]) || !std::isfinite(b[i][j]))
        throw invalid_argument_error("Template: non-finite coefficient");
  if (!std::isfinite(z)) throw invalid_argument_error("Template: non-finite bias");
}

bool Template::feedback_free() const {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (a[i][j] != 0.0) return false;
  return true;
}

CeNNArrayState::CeNNArrayState(int r, int c)
    : rows(r), cols(c), u(r, c), x(r, c), y(r, c),
      active(static_cast<size_t>(r) * c, 1) {}

void CeNNArrayState::check_shapes() const {
  if (rows <= 0 || cols <= 0) throw shape_error("CeNNArrayState: empty grid");
  if (u.rows() != rows || u.cols() != cols || !u.same_shape(x) || !u.same_shape(y) ||
      active.size() != static_cast<size_t>(rows) * cols)
    throw shape_error("CeNNArrayState: inconsistent plane shapes");
}

namespace {

// Neighbor accessor honoring the power-gating mask and boundary policy.
// Masked cells and zero-boundary virtual cells read as 0.
struct Neighborhood {
  const CeNNArrayState& s;
  BoundaryKind kind;

  double value(const Grid& plane, int r, int c) const {
    if (r < 0 || r >= s.rows || c < 0 || c >= s.cols) {
      if (kind == BoundaryKind::Zero) return 0.0;
      r = std::min(std::max(r, 0), s.rows - 1);
      c = std::min(std::max(c, 0), s.cols - 1);
    }
    if (!s.is_active(r, c)) return 0.0;
    return plane.at(r, c);
  }
};

double coupled_sum(const Mat3& m, const Neighborhood& nb, const Grid& plane, int r, int c,
                   const OtaCurve* curve) {
  double acc = 0.0;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      double g = m[dr + 1][dc + 1];
      if (g == 0.0) continue;
      double v = nb.value(plane, r + dr, c + dc);
      acc += curve ? apply_ota_curve(g, v, *curve) : g * v;
    }
  return acc;
}

double globmax_current(const Neighborhood& nb, const Grid& x, int r, int c, double x_self) {
  // D(v) = -v/8 for v <= 0 over all eight radius-1 neighbors
  double acc = 0.0;
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      int rr = r + dr, cc = c + dc;
      if (rr < 0 || rr >= nb.s.rows || cc < 0 || cc >= nb.s.cols) continue;  // no virtual pull
      if (!nb.s.is_active(rr, cc)) continue;
      double v = x_self - x.at(rr, cc);
      if (v <= 0.0) acc += -v / 8.0;
    }
  return acc;
}

void refresh_output(CeNNArrayState& s, CellFn d) {
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) {
      if (!s.is_active(r, c)) {
        s.y.at(r, c) = 0.0;
        continue;
      }
      double v = sat(s.x.at(r, c));
      if (d == CellFn::ReluLike) v = std::max(0.0, v);
      s.y.at(r, c) = v;
    }
}

void integrate(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
               const SettleOptions& opts, const OtaCurve* curve) {
  if (opts.dt <= 0.0) throw invalid_argument_error("settle: dt must be positive");
  if (opts.t_max < opts.dt) throw invalid_argument_error("settle: t_max must be >= dt");
  if (opts.eps <= 0.0) throw invalid_argument_error("settle: eps must be positive");
  state.check_shapes();
  if (!state.u.all_finite()) throw invalid_argument_error("settle: non-finite input plane");

  Neighborhood nb{state, boundary.kind};
  Grid dx(state.rows, state.cols);
  refresh_output(state, t.d);

  const long max_steps = static_cast<long>(std::ceil(opts.t_max / opts.dt));
  for (long step = 0; step < max_steps; ++step) {
    double max_change = 0.0;
    for (int r = 0; r < state.rows; ++r)
      for (int c = 0; c < state.cols; ++c) {
        if (!state.is_active(r, c)) {
          dx.at(r, c) = 0.0;
          continue;
        }
        double cur = -state.x.at(r, c) + t.z;
        cur += coupled_sum(t.a, nb, state.y, r, c, curve);
        cur += coupled_sum(t.b, nb, state.u, r, c, curve);
        if (t.d == CellFn::GlobmaxLike)
          cur += globmax_current(nb, state.x, r, c, state.x.at(r, c));
        dx.at(r, c) = cur * opts.dt;
      }
    for (int r = 0; r < state.rows; ++r)
      for (int c = 0; c < state.cols; ++c) {
        if (!state.is_active(r, c)) continue;
        double nx = state.x.at(r, c) + dx.at(r, c);
        if (!std::isfinite(nx) || std::fabs(nx) > opts.blowup)
          throw InstabilityError("settle: state exceeded blow-up bound at step " +
                                     std::to_string(step),
                                 step);
        state.x.at(r, c) = nx;
        max_change = std::max(max_change, std::fabs(dx.at(r, c)));
      }
    refresh_output(state, t.d);
    if (max_change < opts.eps * opts.dt) break;
  }
}

}  // namespace

void settle_feedforward(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
                        const OtaCurve* curve) {
  if (!t.feedback_free())
    throw invalid_argument_error("settle_feedforward: template has nonzero feedback entries");
  if (t.d != CellFn::None)
    throw invalid_argument_error("settle_feedforward: template carries a cell function");
  state.check_shapes();
  if (!state.u.all_finite()) throw invalid_argument_error("settle: non-finite input plane");

  Neighborhood nb{state, boundary.kind};
  for (int r = 0; r < state.rows; ++r)
    for (int c = 0; c < state.cols; ++c) {
      if (!state.is_active(r, c)) {
        state.x.at(r, c) = 0.0;
        state.y.at(r, c) = 0.0;
        continue;
      }
      double xs = coupled_sum(t.b, nb, state.u, r, c, curve) + t.z;
      state.x.at(r, c) = xs;
      state.y.at(r, c) = sat(xs);
    }
}

void settle_ode(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
                const SettleOptions& opts, const OtaCurve* curve) {
  if (t.d != CellFn::None)
    throw invalid_argument_error("settle_ode: use settle_nonlinear_d for cell functions");
  integrate(state, t, boundary, opts, curve);
}

void settle_nonlinear_d(CeNNArrayState& state, const Template& t, const BoundaryPolicy& boundary,
                        const SettleOptions& opts, const OtaCurve* curve) {
  if (t.d == CellFn::None)
    throw invalid_argument_error("settle_nonlinear_d: template has no cell function");
  // load the map into the state nodes
  for (int r = 0; r < state.rows; ++r)
    for (int c = 0; c < state.cols; ++c)
      state.x.at(r, c) = state.is_active(r, c) ? state.u.at(r, c) : 0.0;
  integrate(state, t, boundary, opts, curve);
}

}  // namespace cennforge
