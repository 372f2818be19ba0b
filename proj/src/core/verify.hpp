#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cost_model.hpp"
#include "netspec.hpp"
#include "scheduler.hpp"

namespace cennforge {
namespace oracle {

// Brute-force references. These never call into the template/scheduler
// machinery; they are the independent side of every equivalence check.

// Zero-padded cross-correlation with a 3x3 kernel plus bias, saturated.
Grid correlate3x3(const Grid& image, const Mat3& kernel, double bias, bool saturate = true);

// Max over the full 3x3 window (self + 8 neighbors), positions outside the
// grid reading as zero. The 16-step comparison sequence computes exactly
// this: vertical comparisons fill column triples and the later horizontal
// ones merge whole columns, so the diagonals are covered through the
// intermediate maps.
Grid max_filter_3x3(const Grid& g);

Grid subsample_top_left(const Grid& g);  // floor(n/2) per axis

// Average over the window used by avgpool_program, zero padded.
Grid avg_filter(const Grid& g, int window);

// Layer-by-layer dense forward pass in doubles with saturation inserted at
// every point a CeNN step saturates, mirroring the scheduler's partial-sum
// order. Supports conv / relu / linear max pool / avg pool / fc.
std::vector<double> dense_forward(const NetworkSpec& net, const std::vector<Grid>& input);

}  // namespace oracle

namespace verify {

struct CheckResult {
  std::string id;      // acceptance criterion tag, e.g. "4b"
  std::string name;
  bool pass = false;
  std::string detail;  // one line: measured vs expected
};

// Runs every built-in suite (cost reproduction, calibration consistency,
// precision scaling, template-program oracles, dynamics cross-check,
// scheduler structure, analytic model, non-ideality sanity, determinism).
// `filter` restricts to checks whose id starts with it ("" = all).
std::vector<CheckResult> run_checks(const std::string& filter = "");

}  // namespace verify
}  // namespace cennforge
