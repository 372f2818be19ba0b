#include "nonideal.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace cennforge {

QuantSpec::QuantSpec(int nb) : bits(nb) {
  if (nb < 2 || nb > 16)
    throw invalid_argument_error("quantization bits must be in [2, 16]");
}

double QuantSpec::step() const { return 2.0 / static_cast<double>(1L << bits); }
long QuantSpec::min_code() const { return -(1L << (bits - 1)); }
long QuantSpec::max_code() const { return (1L << (bits - 1)) - 1; }

long quantize_code(double x, const QuantSpec& q) {
  if (!std::isfinite(x)) throw invalid_argument_error("quantize: non-finite input");
  double scale = static_cast<double>(1L << (q.bits - 1));
  // nearbyint under FE_TONEAREST rounds half to even
  double r = std::nearbyint(x * scale);
  long code = static_cast<long>(r);
  return std::clamp(code, q.min_code(), q.max_code());
}

double code_value(long code, const QuantSpec& q) {
  return static_cast<double>(code) / static_cast<double>(1L << (q.bits - 1));
}

double quantize(double x, const QuantSpec& q) { return code_value(quantize_code(x, q), q); }

void quantize_grid(Grid& g, const QuantSpec& q) {
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c)
      g.at(r, c) = quantize(g.at(r, c), q);
}

OtaCurve OtaCurve::default_curve() {
  // L*tanh(v/L): unit slope at v = 0, within 1% of ideal through |v| <= 0.2,
  // visibly compressive past that. Sampled symmetrically so v = 0 is a node.
  const double L = 0.75;
  std::vector<double> v, i;
  const int half = 150;  // 301 samples over [-1.5, 1.5]
  for (int k = -half; k <= half; ++k) {
    double x = k / 100.0;
    v.push_back(x);
    i.push_back(L * std::tanh(x / L));
  }
  return from_samples(std::move(v), std::move(i));
}

OtaCurve OtaCurve::identity_curve() {
  return from_samples({-1.5, 0.0, 1.5}, {-1.5, 0.0, 1.5});
}

OtaCurve OtaCurve::from_samples(std::vector<double> v, std::vector<double> i) {
  OtaCurve c;
  c.v_ = std::move(v);
  c.i_ = std::move(i);
  c.validate();
  c.identity_ = true;
  for (size_t k = 0; k < c.v_.size(); ++k)
    if (c.v_[k] != c.i_[k]) { c.identity_ = false; break; }
  return c;
}

void OtaCurve::validate() const {
  if (v_.size() != i_.size() || v_.size() < 2)
    throw parse_error("OTA curve: need at least two (v, i) samples");
  for (size_t k = 0; k < v_.size(); ++k)
    if (!std::isfinite(v_[k]) || !std::isfinite(i_[k]))
      throw parse_error("OTA curve: non-finite sample at row " + std::to_string(k));
  for (size_t k = 1; k < v_.size(); ++k) {
    if (v_[k] <= v_[k - 1])
      throw parse_error("OTA curve: v samples not strictly increasing at row " + std::to_string(k));
    if (i_[k] < i_[k - 1])
      throw parse_error("OTA curve: output not monotone non-decreasing at row " + std::to_string(k));
  }
  // odd symmetry within 1e-3 over the sampled domain
  const double tol = 1e-3;
  for (size_t k = 0; k < v_.size(); ++k) {
    double mirrored = -v_[k];
    if (mirrored < v_.front() || mirrored > v_.back()) continue;
    // interpolate at -v without going through eval() (object is mid-construction)
    auto it = std::lower_bound(v_.begin(), v_.end(), mirrored);
    size_t j = static_cast<size_t>(std::distance(v_.begin(), it));
    double fm;
    if (j == 0) fm = i_.front();
    else {
      double t = (mirrored - v_[j - 1]) / (v_[j] - v_[j - 1]);
      fm = i_[j - 1] + t * (i_[j] - i_[j - 1]);
    }
    if (std::fabs(fm + i_[k]) > tol)
      throw parse_error("OTA curve: odd-symmetry violated beyond tolerance at row " + std::to_string(k));
  }
  // unit slope at the origin within 1%
  auto it = std::lower_bound(v_.begin(), v_.end(), 0.0);
  size_t j = static_cast<size_t>(std::distance(v_.begin(), it));
  size_t lo = (j == 0) ? 0 : j - 1;
  size_t hi = std::min(j + 1, v_.size() - 1);
  if (lo == hi) { lo = 0; hi = 1; }
  double slope = (i_[hi] - i_[lo]) / (v_[hi] - v_[lo]);
  if (std::fabs(slope - 1.0) > 0.01)
    throw parse_error("OTA curve: slope at v = 0 deviates from unity by more than 1%");
}

double OtaCurve::eval(double v) const {
  if (identity_) return v;
  if (v <= v_.front()) return i_.front();
  if (v >= v_.back()) return i_.back();
  auto it = std::upper_bound(v_.begin(), v_.end(), v);
  size_t j = static_cast<size_t>(std::distance(v_.begin(), it));
  double t = (v - v_[j - 1]) / (v_[j] - v_[j - 1]);
  return i_[j - 1] + t * (i_[j] - i_[j - 1]);
}

OtaCurve OtaCurve::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open OTA curve file: " + path);
  std::vector<double> v, i;
  std::string line;
  size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double a, b;
    if (!(ls >> a >> b))
      throw parse_error("OTA curve: expected two numeric columns at line " + std::to_string(row) +
                        " of " + path);
    v.push_back(a);
    i.push_back(b);
  }
  return from_samples(std::move(v), std::move(i));
}

void OtaCurve::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write OTA curve file: " + path);
  out << "# v_in_diff  i_out_normalized\n";
  char buf[64];
  for (size_t k = 0; k < v_.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v_[k], i_[k]);
    out << buf;
  }
}

}  // namespace cennforge
