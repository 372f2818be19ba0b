#pragma once

#include <cstdint>
#include <vector>

#include "nonideal.hpp"

namespace cennforge {

// Operand/product/accumulator widths of the digital dot-product datapath.
// Products take 2*Nb bits, accumulators 3*Nb: overflow-free for up to 2^Nb
// terms; beyond that the accumulator saturates and the event is counted.
struct FixedPointFormat {
  int operand_bits = 4;

  explicit FixedPointFormat(int nb = 4);
  int product_bits() const { return 2 * operand_bits; }
  int accumulator_bits() const { return 3 * operand_bits; }
  int64_t acc_max() const { return (int64_t{1} << (accumulator_bits() - 1)) - 1; }
  int64_t acc_min() const { return -(int64_t{1} << (accumulator_bits() - 1)); }
  int64_t operand_max() const { return (int64_t{1} << (operand_bits - 1)) - 1; }
  int64_t operand_min() const { return -(int64_t{1} << (operand_bits - 1)); }
};

struct FcResult {
  std::vector<int64_t> scores;  // 3*Nb-bit accumulator values
  long multiplies = 0;
  long adds = 0;
  long saturations = 0;  // accumulator clamps (reported, never silent)
};

// Exact integer dot products: scores[o] = sum_i weights[o][i] * inputs[i].
// Inputs and weights are Nb-bit codes; weights are row-major [outputs][inputs].
FcResult fc_eval(const std::vector<int64_t>& inputs, const std::vector<int64_t>& weights,
                 int outputs, const FixedPointFormat& fmt);

// Lowest index among ties.
template <typename T>
int argmax(const std::vector<T>& scores) {
  if (scores.empty()) throw invalid_argument_error("argmax: empty score vector");
  int best = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  return best;
}

// ADC front end: map an analog value in [-1, 1] onto the shared Nb-bit code
// grid used everywhere else.
inline int64_t adc_sample(double v, const QuantSpec& q) { return quantize_code(v, q); }

}  // namespace cennforge
