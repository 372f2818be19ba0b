#include "cennforge.h"

#include <cstring>
#include <sstream>
#include <string>

#include "cost_model.hpp"
#include "errors.hpp"
#include "jobs.hpp"
#include "netspec.hpp"
#include "nonideal.hpp"
#include "scheduler.hpp"
#include "verify.hpp"

using namespace cennforge;

struct cnf_network {
  NetworkSpec net;
};
struct cnf_dataset {
  Dataset ds;
};
struct cnf_hardware {
  HardwareConfig hw;
};
struct cnf_program {
  CeNNProgram prog;
};
struct cnf_cost_params {
  CostParams p;
};
struct cnf_cost_report {
  CostReport rep;
};
struct cnf_ota_curve {
  OtaCurve curve;
};

namespace {

thread_local std::string g_last_error;

cnf_status status_of(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidArgument: return CNF_ERR_INVALID_ARGUMENT;
    case ErrorCode::Parse: return CNF_ERR_PARSE;
    case ErrorCode::Shape: return CNF_ERR_SHAPE;
    case ErrorCode::Io: return CNF_ERR_IO;
    case ErrorCode::Instability: return CNF_ERR_INSTABILITY;
    case ErrorCode::ModelDomain: return CNF_ERR_MODEL_DOMAIN;
    case ErrorCode::Capacity: return CNF_ERR_CAPACITY;
    case ErrorCode::Internal: return CNF_ERR_INTERNAL;
  }
  return CNF_ERR_INTERNAL;
}

template <typename F>
cnf_status guarded(F&& f) {
  try {
    f();
    return CNF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CNF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CNF_ERR_INTERNAL;
  }
}

cnf_status require(bool cond, const char* msg) {
  if (cond) return CNF_OK;
  g_last_error = msg;
  return CNF_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* cnf_status_name(cnf_status s) {
  switch (s) {
    case CNF_OK: return "ok";
    case CNF_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CNF_ERR_PARSE: return "parse_error";
    case CNF_ERR_SHAPE: return "shape_error";
    case CNF_ERR_IO: return "io_error";
    case CNF_ERR_INSTABILITY: return "instability";
    case CNF_ERR_MODEL_DOMAIN: return "model_domain";
    case CNF_ERR_CAPACITY: return "capacity";
    case CNF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* cnf_last_error(void) { return g_last_error.c_str(); }

const char* cnf_version(void) { return "1.0.0"; }

/* --- networks --- */

cnf_status cnf_network_from_preset(const char* name, cnf_network** out) {
  if (cnf_status s = require(name && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_network{network_preset(name)}; });
}

cnf_status cnf_network_load(const char* json_path, cnf_network** out) {
  if (cnf_status s = require(json_path && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_network{load_network(json_path)}; });
}

cnf_status cnf_network_save(const cnf_network* net, const char* json_path,
                            const char* blob_path) {
  if (cnf_status s = require(net && json_path, "null argument"); s != CNF_OK) return s;
  return guarded([&] { save_network(net->net, json_path, blob_path ? blob_path : ""); });
}

cnf_status cnf_network_load_weights(cnf_network* net, const char* blob_path) {
  if (cnf_status s = require(net && blob_path, "null argument"); s != CNF_OK) return s;
  return guarded([&] { load_weights(blob_path, net->net); });
}

cnf_status cnf_network_save_weights(const cnf_network* net, const char* blob_path) {
  if (cnf_status s = require(net && blob_path, "null argument"); s != CNF_OK) return s;
  return guarded([&] { save_weights(net->net, blob_path); });
}

cnf_status cnf_network_randomize_weights(cnf_network* net, uint64_t seed) {
  if (cnf_status s = require(net != nullptr, "null network"); s != CNF_OK) return s;
  return guarded([&] { randomize_weights(net->net, seed); });
}

void cnf_network_free(cnf_network* net) { delete net; }

int cnf_network_layer_count(const cnf_network* net) {
  return net ? static_cast<int>(net->net.layers.size()) : 0;
}

int cnf_network_class_count(const cnf_network* net) { return net ? net->net.class_count : 0; }

cnf_status cnf_network_input_shape(const cnf_network* net, int* rows, int* cols, int* maps) {
  if (cnf_status s = require(net != nullptr, "null network"); s != CNF_OK) return s;
  if (rows) *rows = net->net.input_shape.rows;
  if (cols) *cols = net->net.input_shape.cols;
  if (maps) *maps = net->net.input_maps;
  return CNF_OK;
}

int cnf_network_describe(const cnf_network* net, char* buf, size_t cap) {
  if (!net) return 0;
  std::ostringstream ss;
  ss << net->net.name << ": " << net->net.input_maps << "x" << net->net.input_shape.rows << "x"
     << net->net.input_shape.cols << " -> " << net->net.class_count << " classes, "
     << net->net.layers.size() << " layers [";
  for (size_t i = 0; i < net->net.layers.size(); ++i) {
    if (i) ss << " ";
    ss << net->net.layers[i].name;
  }
  ss << "]";
  std::string s = ss.str();
  if (buf && cap > 0) {
    size_t n = std::min(cap - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return static_cast<int>(s.size() + 1);
}

/* --- datasets --- */

cnf_status cnf_dataset_load_idx(const char* images_path, const char* labels_path,
                                cnf_dataset** out) {
  if (cnf_status s = require(images_path && labels_path && out, "null argument"); s != CNF_OK)
    return s;
  return guarded([&] { *out = new cnf_dataset{load_idx_dataset(images_path, labels_path)}; });
}

void cnf_dataset_free(cnf_dataset* ds) { delete ds; }

long cnf_dataset_size(const cnf_dataset* ds) {
  return ds ? static_cast<long>(ds->ds.images.size()) : 0;
}

int cnf_dataset_label(const cnf_dataset* ds, long index) {
  if (!ds || index < 0 || index >= static_cast<long>(ds->ds.labels.size())) return -1;
  return ds->ds.labels[index];
}

long cnf_dataset_image(const cnf_dataset* ds, long index, double* buf, size_t cap) {
  if (!ds || index < 0 || index >= static_cast<long>(ds->ds.images.size())) return 0;
  const Grid& g = ds->ds.images[index];
  if (buf) {
    size_t n = std::min(cap, g.size());
    std::memcpy(buf, g.data(), n * sizeof(double));
  }
  return static_cast<long>(g.size());
}

/* --- hardware --- */

cnf_status cnf_hardware_create(int n_arrays, int rows, int cols, int mem_slots_per_cell,
                               int precision_bits, cnf_hardware** out) {
  if (cnf_status s = require(out != nullptr, "null out"); s != CNF_OK) return s;
  return guarded([&] {
    HardwareConfig hw{n_arrays, {rows, cols}, mem_slots_per_cell, precision_bits};
    hw.validate();
    *out = new cnf_hardware{hw};
  });
}

cnf_status cnf_hardware_from_preset(const char* name, cnf_hardware** out) {
  if (cnf_status s = require(name && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_hardware{hardware_preset(name)}; });
}

void cnf_hardware_free(cnf_hardware* hw) { delete hw; }

int cnf_required_mem_slots(const cnf_network* net, int n_arrays) {
  if (!net || n_arrays <= 0) return -1;
  try {
    return required_mem_slots(net->net, n_arrays);
  } catch (...) {
    return -1;
  }
}

/* --- OTA curves --- */

cnf_status cnf_ota_curve_default(cnf_ota_curve** out) {
  if (cnf_status s = require(out != nullptr, "null out"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_ota_curve{OtaCurve::default_curve()}; });
}

cnf_status cnf_ota_curve_identity(cnf_ota_curve** out) {
  if (cnf_status s = require(out != nullptr, "null out"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_ota_curve{OtaCurve::identity_curve()}; });
}

cnf_status cnf_ota_curve_load(const char* path, cnf_ota_curve** out) {
  if (cnf_status s = require(path && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_ota_curve{OtaCurve::load(path)}; });
}

cnf_status cnf_ota_curve_save(const cnf_ota_curve* curve, const char* path) {
  if (cnf_status s = require(curve && path, "null argument"); s != CNF_OK) return s;
  return guarded([&] { curve->curve.save(path); });
}

double cnf_ota_curve_eval(const cnf_ota_curve* curve, double v) {
  return curve ? curve->curve.eval(v) : 0.0;
}

void cnf_ota_curve_free(cnf_ota_curve* curve) { delete curve; }

/* --- compile & execute --- */

cnf_status cnf_compile(const cnf_network* net, const cnf_hardware* hw, cnf_program** out) {
  if (cnf_status s = require(net && hw && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_program{compile(net->net, hw->hw)}; });
}

void cnf_program_free(cnf_program* prog) { delete prog; }

long cnf_program_event_count(const cnf_program* prog) {
  return prog ? static_cast<long>(prog->prog.events.size()) : 0;
}

int cnf_program_rounds(const cnf_program* prog) { return prog ? prog->prog.rounds : 0; }

cnf_status cnf_program_write_trace(const cnf_program* prog, const char* path) {
  if (cnf_status s = require(prog && path, "null argument"); s != CNF_OK) return s;
  return guarded([&] { prog->prog.write_trace_file(path); });
}

cnf_status cnf_execute(const cnf_program* prog, const cnf_network* net, const cnf_hardware* hw,
                       const double* input, size_t input_len, const char* mode,
                       const cnf_ota_curve* curve, double* scores_out, size_t scores_cap,
                       int* predicted_out, cnf_exec_stats* stats_out) {
  if (cnf_status s = require(prog && net && hw && input && mode, "null argument"); s != CNF_OK)
    return s;
  return guarded([&] {
    const NetworkSpec& n = net->net;
    size_t plane = static_cast<size_t>(n.input_shape.rows) * n.input_shape.cols;
    if (input_len != plane * n.input_maps)
      throw shape_error("cnf_execute: input length " + std::to_string(input_len) +
                        ", expected " + std::to_string(plane * n.input_maps));
    std::vector<Grid> planes;
    for (int p = 0; p < n.input_maps; ++p) {
      Grid g(n.input_shape.rows, n.input_shape.cols);
      std::memcpy(g.data(), input + p * plane, plane * sizeof(double));
      planes.push_back(std::move(g));
    }
    ExecResult r = execute(prog->prog, n, hw->hw, planes, exec_mode_from(mode),
                           curve ? &curve->curve : nullptr);
    if (scores_out) {
      size_t cnt = std::min(scores_cap, r.scores.size());
      std::memcpy(scores_out, r.scores.data(), cnt * sizeof(double));
    }
    if (predicted_out) *predicted_out = r.predicted;
    if (stats_out) {
      stats_out->template_applies = r.stats.template_applies;
      stats_out->sram_reads = r.stats.sram_reads;
      stats_out->mem_writes = r.stats.mem_writes;
      stats_out->mem_reads = r.stats.mem_reads;
      stats_out->accumulates = r.stats.accumulates;
      stats_out->adc_samples = r.stats.adc_samples;
      stats_out->fc_mults = r.stats.fc_mults;
      stats_out->fc_adds = r.stats.fc_adds;
      stats_out->fc_saturations = r.stats.fc_saturations;
      stats_out->clip_rate = r.stats.clip_rate;
    }
  });
}

/* --- cost model --- */

cnf_status cnf_cost_params_from_preset(const char* name, cnf_cost_params** out) {
  if (cnf_status s = require(name && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_cost_params{cost_preset(name)}; });
}

cnf_status cnf_cost_params_precision_scale(const cnf_cost_params* base, double delay_factor,
                                           double power_factor, int rederive_digital,
                                           cnf_cost_params** out) {
  if (cnf_status s = require(base && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] {
    PrecisionScaleOptions opts;
    if (delay_factor > 0) opts.delay_factor = delay_factor;
    if (power_factor > 0) opts.power_factor = power_factor;
    opts.rederive_digital = rederive_digital != 0;
    *out = new cnf_cost_params{precision_scale(base->p, opts)};
  });
}

void cnf_cost_params_free(cnf_cost_params* p) { delete p; }

cnf_status cnf_trace_cost(const cnf_program* prog, const cnf_cost_params* params,
                          cnf_cost_report** out) {
  if (cnf_status s = require(prog && params && out, "null argument"); s != CNF_OK) return s;
  return guarded([&] { *out = new cnf_cost_report{trace_cost(prog->prog, params->p)}; });
}

void cnf_cost_report_free(cnf_cost_report* rep) { delete rep; }

cnf_status cnf_cost_report_totals(const cnf_cost_report* rep, double* delay_s, double* energy_j,
                                  double* edp) {
  if (cnf_status s = require(rep != nullptr, "null report"); s != CNF_OK) return s;
  if (delay_s) *delay_s = rep->rep.total_delay;
  if (energy_j) *energy_j = rep->rep.total_energy;
  if (edp) *edp = rep->rep.edp;
  return CNF_OK;
}

int cnf_cost_report_row_count(const cnf_cost_report* rep) {
  return rep ? static_cast<int>(rep->rep.layers.size()) : 0;
}

cnf_status cnf_cost_report_row(const cnf_cost_report* rep, int index, char* name_buf,
                               size_t name_cap, double* delay_s, double* energy_j) {
  if (cnf_status s = require(rep != nullptr, "null report"); s != CNF_OK) return s;
  if (index < 0 || index >= static_cast<int>(rep->rep.layers.size()))
    return require(false, "row index out of range");
  const LayerCost& lc = rep->rep.layers[index];
  if (name_buf && name_cap > 0) {
    size_t n = std::min(name_cap - 1, lc.name.size());
    std::memcpy(name_buf, lc.name.data(), n);
    name_buf[n] = '\0';
  }
  if (delay_s) *delay_s = lc.delay;
  if (energy_j) *energy_j = lc.energy;
  return CNF_OK;
}

cnf_status cnf_cost_report_save_csv(const cnf_cost_report* rep, const char* path) {
  if (cnf_status s = require(rep && path, "null argument"); s != CNF_OK) return s;
  return guarded([&] { rep->rep.save_csv(path); });
}

cnf_status cnf_analytic_delay(const cnf_network* net, const cnf_hardware* hw,
                              const cnf_cost_params* params, double* per_layer, size_t cap,
                              double* total_s) {
  if (cnf_status s = require(net && hw && params, "null argument"); s != CNF_OK) return s;
  return guarded([&] {
    AnalyticDelay ad = analytic_delay(net->net, hw->hw, params->p);
    if (per_layer)
      for (size_t i = 0; i < std::min(cap, ad.per_layer.size()); ++i)
        per_layer[i] = ad.per_layer[i].second;
    if (total_s) *total_s = ad.total;
  });
}

/* --- jobs --- */

namespace {

RunConfig to_run_config(const cnf_run_config* cfg) {
  RunConfig rc;
  if (cfg->network) rc.network = cfg->network;
  if (cfg->weights) rc.weights = cfg->weights;
  if (cfg->images) rc.images = cfg->images;
  if (cfg->labels) rc.labels = cfg->labels;
  rc.random_images = cfg->random_images;
  rc.limit = cfg->limit;
  if (cfg->hw_preset) rc.hw_preset = cfg->hw_preset;
  if (cfg->n_arrays > 0) rc.n_arrays = cfg->n_arrays;
  rc.array_rows = cfg->array_rows;
  rc.array_cols = cfg->array_cols;
  rc.mem_slots = cfg->mem_slots;
  if (cfg->bits > 0) rc.bits = cfg->bits;
  if (cfg->mode) rc.mode = cfg->mode;
  if (cfg->curve) rc.curve = cfg->curve;
  if (cfg->cost_preset) rc.cost_preset_name = cfg->cost_preset;
  if (cfg->out_dir) rc.out_dir = cfg->out_dir;
  rc.seed = cfg->seed;
  rc.threads = cfg->threads;
  rc.write_trace = cfg->write_trace != 0;
  if (cfg->sweep_axis) rc.sweep_axis = cfg->sweep_axis;
  if (cfg->sweep_values) {
    std::stringstream ss(cfg->sweep_values);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) rc.sweep_values.push_back(item);
  }
  return rc;
}

void fill_result(const RunOutcome& o, cnf_run_result* out) {
  if (!out) return;
  std::snprintf(out->run_dir, sizeof out->run_dir, "%s", o.run_dir.c_str());
  out->images_run = o.images_run;
  out->accuracy = o.accuracy;
  out->total_delay_s = o.total_delay;
  out->total_energy_j = o.total_energy;
  out->edp = o.edp;
  out->clip_rate = o.clip_rate;
}

}  // namespace

cnf_status cnf_run(const cnf_run_config* cfg, cnf_run_result* out) {
  if (cnf_status s = require(cfg != nullptr, "null config"); s != CNF_OK) return s;
  return guarded([&] { fill_result(run_job(to_run_config(cfg)), out); });
}

cnf_status cnf_sweep(const cnf_run_config* cfg, cnf_run_result* out) {
  if (cnf_status s = require(cfg != nullptr, "null config"); s != CNF_OK) return s;
  return guarded([&] { fill_result(sweep_job(to_run_config(cfg)), out); });
}

/* --- verification --- */

cnf_status cnf_verify(const char* filter, cnf_check_callback cb, void* user, int* failed) {
  return guarded([&] {
    auto results = verify::run_checks(filter ? filter : "");
    int bad = 0;
    for (const auto& r : results) {
      if (!r.pass) ++bad;
      if (cb) cb(r.id.c_str(), r.name.c_str(), r.pass ? 1 : 0, r.detail.c_str(), user);
    }
    if (failed) *failed = bad;
  });
}

} /* extern "C" */
