#include "fc_digital.hpp"

#include <string>

#include "errors.hpp"

namespace cennforge {

FixedPointFormat::FixedPointFormat(int nb) : operand_bits(nb) {
  if (nb < 2 || nb > 16)
    throw invalid_argument_error("FixedPointFormat: operand bits must be in [2, 16]");
}

FcResult fc_eval(const std::vector<int64_t>& inputs, const std::vector<int64_t>& weights,
                 int outputs, const FixedPointFormat& fmt) {
  if (outputs <= 0) throw invalid_argument_error("fc_eval: outputs must be positive");
  if (inputs.empty()) throw invalid_argument_error("fc_eval: empty input vector");
  if (weights.size() != inputs.size() * static_cast<size_t>(outputs))
    throw shape_error("fc_eval: weight matrix is " + std::to_string(weights.size()) +
                      " entries, expected " + std::to_string(inputs.size() * outputs));
  for (int64_t v : inputs)
    if (v < fmt.operand_min() || v > fmt.operand_max())
      throw invalid_argument_error("fc_eval: input code outside operand range");
  for (int64_t w : weights)
    if (w < fmt.operand_min() || w > fmt.operand_max())
      throw invalid_argument_error("fc_eval: weight code outside operand range");

  FcResult res;
  res.scores.resize(outputs);
  const int64_t lo = fmt.acc_min(), hi = fmt.acc_max();
  for (int o = 0; o < outputs; ++o) {
    const int64_t* row = weights.data() + static_cast<size_t>(o) * inputs.size();
    int64_t acc = 0;
    for (size_t i = 0; i < inputs.size(); ++i) {
      int64_t prod = row[i] * inputs[i];  // fits 2*Nb bits by construction
      ++res.multiplies;
      if (i > 0) ++res.adds;
      acc += prod;
      if (acc > hi) {
        acc = hi;
        ++res.saturations;
      } else if (acc < lo) {
        acc = lo;
        ++res.saturations;
      }
    }
    res.scores[o] = acc;
  }
  return res;
}

}  // namespace cennforge
