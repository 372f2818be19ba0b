#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cost_model.hpp"
#include "scheduler.hpp"

namespace cennforge {

// Shared configuration for the run / sweep entry points. Paths may be empty
// where optional. `network` is a file path or "preset:<name>".
struct RunConfig {
  std::string network;
  std::string weights;        // blob path; absent -> seeded random weights
  std::string images;         // IDX images
  std::string labels;         // IDX labels
  long random_images = 0;     // synthesize this many inputs when no dataset
  long limit = -1;            // cap on images processed
  std::string hw_preset;      // optional named hardware preset
  int n_arrays = 4;
  int array_rows = 0, array_cols = 0;  // 0 -> network input shape
  int mem_slots = 0;                   // 0 -> exactly what the program needs
  int bits = 4;
  std::string mode = "ideal";  // ideal | quantized | nonideal
  std::string curve;           // OTA curve path; default curve when empty
  std::string cost_preset_name = "paper-4bit-32nm";
  std::string out_dir = "out";
  uint64_t seed = 1;
  int threads = 0;  // 0 -> hardware concurrency; CENN_FORGE_THREADS caps
  bool write_trace = false;

  // sweep only
  std::string sweep_axis;              // precision | n_arrays | pool_kind
  std::vector<std::string> sweep_values;
};

struct RunOutcome {
  std::string run_dir;     // freshly created directory holding the reports
  long images_run = 0;
  double accuracy = -1.0;  // -1 when no labels
  double total_delay = 0, total_energy = 0, edp = 0;
  double clip_rate = 0.0;
};

// Compiles, costs, optionally runs inference over a dataset (or synthesized
// inputs) and writes report.txt / costs.csv / analytic.csv /
// predictions.csv (+ trace.log) into a new run-NNN directory under
// cfg.out_dir. Reruns create fresh directories; nothing is overwritten.
RunOutcome run_job(const RunConfig& cfg);

// One cost (and optional accuracy) row per axis value, written to sweep.csv.
RunOutcome sweep_job(const RunConfig& cfg);

int worker_thread_count(int requested);  // applies the CENN_FORGE_THREADS cap

}  // namespace cennforge
