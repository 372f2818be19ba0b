#include "template_ops.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "errors.hpp"

namespace cennforge {

Grid add_maps(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw shape_error("add_maps: shape mismatch");
  Grid out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      out.at(r, c) = sat(a.at(r, c) + b.at(r, c));
  return out;
}

Grid downsample2x2(const Grid& g) {
  int orows = g.rows() / 2, ocols = g.cols() / 2;
  if (orows < 1 || ocols < 1)
    throw shape_error("downsample2x2: grid too small to form a 2x2 group");
  Grid out(orows, ocols);
  for (int r = 0; r < orows; ++r)
    for (int c = 0; c < ocols; ++c)
      out.at(r, c) = g.at(2 * r, 2 * c);
  return out;
}

Step Step::apply(const Template& t) {
  Step s;
  s.kind = StepKind::ApplyTemplate;
  s.tpl = t;
  return s;
}

Step Step::apply_nonlinear(const Template& t, const SettleOptions& so) {
  Step s;
  s.kind = StepKind::ApplyTemplate;
  s.tpl = t;
  s.settle = so;
  s.use_custom_settle = true;
  return s;
}

Step Step::store(int slot) {
  Step s;
  s.kind = StepKind::StoreToMem;
  s.slot = slot;
  return s;
}

Step Step::load(int slot) {
  Step s;
  s.kind = StepKind::LoadToInput;
  s.slot = slot;
  return s;
}

Step Step::add_from(int slot, AddDomain domain) {
  Step s;
  s.kind = StepKind::AddFromMem;
  s.slot = slot;
  s.add_domain = domain;
  return s;
}

Step Step::downsample() {
  Step s;
  s.kind = StepKind::Downsample2x2;
  return s;
}

Step Step::write_back() {
  Step s;
  s.kind = StepKind::WriteBack;
  return s;
}

void TemplateProgram::validate() const {
  if (steps.empty()) throw invalid_argument_error("TemplateProgram: empty step list");
  std::set<int> written(external_inputs.begin(), external_inputs.end());
  for (size_t i = 0; i < steps.size(); ++i) {
    const Step& s = steps[i];
    switch (s.kind) {
      case StepKind::StoreToMem:
        written.insert(s.slot);
        break;
      case StepKind::LoadToInput:
      case StepKind::AddFromMem:
        if (!written.count(s.slot))
          throw invalid_argument_error("TemplateProgram: step " + std::to_string(i) +
                                       " reads slot " + std::to_string(s.slot) +
                                       " before any store");
        break;
      default:
        break;
    }
  }
}

int TemplateProgram::template_step_count() const {
  int n = 0;
  for (const Step& s : steps)
    if (s.kind == StepKind::ApplyTemplate || s.kind == StepKind::AddFromMem) ++n;
  return n;
}

namespace {

std::pair<int, int> direction_offset(Direction d) {
  switch (d) {
    case Direction::N: return {-1, 0};
    case Direction::S: return {1, 0};
    case Direction::E: return {0, 1};
    case Direction::W: return {0, -1};
    case Direction::NE: return {-1, 1};
    case Direction::NW: return {-1, -1};
    case Direction::SE: return {1, 1};
    case Direction::SW: return {1, -1};
  }
  throw invalid_argument_error("unknown direction");
}

}  // namespace

Template diff_template(Direction d) {
  Mat3 b = kZeros3;
  b[1][1] = -0.5;
  auto [dr, dc] = direction_offset(d);
  b[dr + 1][dc + 1] = 0.5;
  return Template::feedforward(b, -1.0);
}

Template inc_template() { return Template::feedforward(center_only(1.0), 1.0); }
Template mult_template() { return Template::feedforward(center_only(2.0), 0.0); }
Template add_identity_template() { return Template::feedforward(center_only(1.0), 0.0); }

TemplateProgram conv_program(const Mat3& kernel, double bias) {
  TemplateProgram p;
  p.steps.push_back(Step::apply(Template::feedforward(kernel, bias)));
  return p;
}

TemplateProgram relu_program() {
  TemplateProgram p;
  p.steps.push_back(Step::apply(Template::feedforward(center_only(1.0), -1.0)));
  p.steps.push_back(Step::apply(Template::feedforward(center_only(1.0), 1.0)));
  return p;
}

TemplateProgram maxpool_compare_step(Direction d) {
  TemplateProgram p;
  p.steps.push_back(Step::store(0));
  p.steps.push_back(Step::apply(diff_template(d)));
  p.steps.push_back(Step::apply(inc_template()));
  p.steps.push_back(Step::apply(mult_template()));
  p.steps.push_back(Step::add_from(0, AddDomain::State));
  return p;
}

TemplateProgram maxpool_program(bool downsample, MaxPoolNeighbors neighbors) {
  TemplateProgram p;
  std::vector<Direction> dirs{Direction::N, Direction::S, Direction::E, Direction::W};
  if (neighbors == MaxPoolNeighbors::Eight)
    dirs.insert(dirs.end(),
                {Direction::NE, Direction::NW, Direction::SE, Direction::SW});
  for (Direction d : dirs) {
    TemplateProgram cmp = maxpool_compare_step(d);
    p.steps.insert(p.steps.end(), cmp.steps.begin(), cmp.steps.end());
  }
  if (downsample) p.steps.push_back(Step::downsample());
  p.steps.push_back(Step::write_back());
  return p;
}

TemplateProgram avgpool_program(PoolWindow window, bool downsample) {
  Mat3 b = kZeros3;
  if (window == PoolWindow::W2x2) {
    b[1][1] = b[1][2] = b[2][1] = b[2][2] = 0.25;
  } else {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) b[i][j] = 1.0 / 9.0;
  }
  TemplateProgram p;
  p.steps.push_back(Step::apply(Template::feedforward(b, 0.0)));
  if (downsample) p.steps.push_back(Step::downsample());
  p.steps.push_back(Step::write_back());
  return p;
}

TemplateProgram nonlinear_relu_program() {
  TemplateProgram p;
  Template t(kZeros3, center_only(1.0), 0.0, CellFn::ReluLike);
  SettleOptions so;  // feed-forward dynamics, default horizon is plenty
  p.steps.push_back(Step::apply_nonlinear(t, so));
  return p;
}

TemplateProgram nonlinear_pool_program(double t_max, bool downsample) {
  if (t_max <= 0.0) throw invalid_argument_error("nonlinear_pool_program: t_max must be positive");
  TemplateProgram p;
  Template t(center_only(1.0), kZeros3, 0.0, CellFn::GlobmaxLike);
  SettleOptions so;
  so.t_max = t_max;
  p.steps.push_back(Step::apply_nonlinear(t, so));
  if (downsample) p.steps.push_back(Step::downsample());
  p.steps.push_back(Step::write_back());
  return p;
}

StepEngine::StepEngine(Grid initial, BoundaryPolicy boundary)
    : map_(std::move(initial)), raw_(map_), boundary_(boundary) {}

void StepEngine::reset(Grid map) {
  map_ = std::move(map);
  raw_ = map_;
  slots_.clear();
  sat_samples_ = 0;
  clipped_samples_ = 0;
}

void StepEngine::set_active_mask(std::vector<uint8_t> mask) {
  if (!mask.empty() && mask.size() != map_.size())
    throw shape_error("StepEngine: mask size does not match map");
  mask_ = std::move(mask);
}

const Grid& StepEngine::slot(int id) const {
  auto it = slots_.find(id);
  if (it == slots_.end())
    throw invalid_argument_error("StepEngine: read of unwritten slot " + std::to_string(id));
  return it->second;
}

void StepEngine::saturate_from_raw() {
  for (int r = 0; r < raw_.rows(); ++r)
    for (int c = 0; c < raw_.cols(); ++c) {
      double v = raw_.at(r, c);
      ++sat_samples_;
      if (std::fabs(v) > 1.0) ++clipped_samples_;
      map_.at(r, c) = sat(v);
    }
  if (quant_) quantize_grid(map_, *quant_);
}

void StepEngine::apply(const Step& s) {
  switch (s.kind) {
    case StepKind::ApplyTemplate: {
      CeNNArrayState st(map_.rows(), map_.cols());
      st.u = map_;
      if (!mask_.empty()) st.active = mask_;
      const SettleOptions& so = s.use_custom_settle ? s.settle : settle_;
      if (s.tpl.d != CellFn::None) {
        settle_nonlinear_d(st, s.tpl, boundary_, so, curve_);
      } else if (s.tpl.feedback_free() && !force_ode_) {
        settle_feedforward(st, s.tpl, boundary_, curve_);
      } else {
        for (int r = 0; r < st.rows; ++r)
          for (int c = 0; c < st.cols; ++c)
            st.x.at(r, c) = st.is_active(r, c) ? st.u.at(r, c) : 0.0;
        settle_ode(st, s.tpl, boundary_, so, curve_);
      }
      raw_ = st.x;
      // the settle already produced y = sat(x) (plus the cell function);
      // route through the engine for clip accounting and quantization
      for (int r = 0; r < raw_.rows(); ++r)
        for (int c = 0; c < raw_.cols(); ++c) {
          ++sat_samples_;
          if (std::fabs(raw_.at(r, c)) > 1.0) ++clipped_samples_;
        }
      map_ = st.y;
      if (quant_) quantize_grid(map_, *quant_);
      break;
    }
    case StepKind::StoreToMem:
      slots_[s.slot] = map_;
      break;
    case StepKind::LoadToInput:
      map_ = slot(s.slot);
      raw_ = map_;
      break;
    case StepKind::AddFromMem: {
      const Grid& m = slot(s.slot);
      if (!m.same_shape(map_)) throw shape_error("AddFromMem: slot shape mismatch");
      const Grid& base = (s.add_domain == AddDomain::State) ? raw_ : map_;
      Grid sum(map_.rows(), map_.cols());
      for (int r = 0; r < sum.rows(); ++r)
        for (int c = 0; c < sum.cols(); ++c)
          sum.at(r, c) = base.at(r, c) + m.at(r, c);
      raw_ = std::move(sum);
      saturate_from_raw();
      break;
    }
    case StepKind::Downsample2x2:
      map_ = downsample2x2(map_);
      raw_ = downsample2x2(raw_);
      if (!mask_.empty()) mask_.clear();  // mask no longer matches; caller re-applies
      break;
    case StepKind::WriteBack:
      break;  // marker for the lowering; the engine result is already live
  }
}

void StepEngine::run(const TemplateProgram& p) {
  p.validate();
  for (const Step& s : p.steps) apply(s);
}

Grid run_program(const TemplateProgram& p, const Grid& input, BoundaryPolicy boundary) {
  StepEngine eng(input, boundary);
  eng.run(p);
  return eng.map();
}

}  // namespace cennforge
