#pragma once

#include <string>
#include <vector>

#include "grid.hpp"

namespace cennforge {

// Uniform fixed-point grid over [-1, 1 - 2/2^bits] (two's-complement style:
// 2^bits levels, the top positive level is one step short of +1).
struct QuantSpec {
  int bits = 4;

  explicit QuantSpec(int nb = 4);

  double step() const;      // distance between adjacent levels
  long min_code() const;    // -2^(bits-1)
  long max_code() const;    // 2^(bits-1) - 1
};

// Nearest representable level after clamping to the grid range.
// Rounding is half-to-even on the level index.
double quantize(double x, const QuantSpec& q);

// Integer level index for x (the ADC output code).
long quantize_code(double x, const QuantSpec& q);

// Level value for a code.
double code_value(long code, const QuantSpec& q);

void quantize_grid(Grid& g, const QuantSpec& q);

// Measured (or synthesized) OTA transfer curve: output current, normalized so
// that the ideal device is the identity line. Sampled on a strictly
// increasing v grid; evaluation is linear interpolation, clamped to the end
// samples outside the table domain.
class OtaCurve {
 public:
  // Parameterized stand-in for the measured curve: linear near zero,
  // saturating smoothly beyond ~0.2 V (L*tanh(v/L), L = 0.75).
  static OtaCurve default_curve();

  // Exact straight line. Evaluation short-circuits to the analytic product,
  // so runs through this curve reproduce the ideal path bit for bit.
  static OtaCurve identity_curve();

  static OtaCurve from_samples(std::vector<double> v, std::vector<double> i);
  static OtaCurve load(const std::string& path);
  void save(const std::string& path) const;

  double eval(double v) const;
  bool is_identity() const { return identity_; }

  const std::vector<double>& v_samples() const { return v_; }
  const std::vector<double>& i_samples() const { return i_; }

 private:
  OtaCurve() = default;
  void validate() const;

  std::vector<double> v_, i_;
  bool identity_ = false;
};

// Current contribution of one template coefficient through the curve.
// Replaces the ideal product gain * v_diff.
inline double apply_ota_curve(double gain, double v_diff, const OtaCurve& curve) {
  return gain * curve.eval(v_diff);
}

}  // namespace cennforge
