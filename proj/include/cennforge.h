/* cennforge: simulator, compiler and cost model for convolutional networks
 * mapped onto mixed-signal cellular neural network arrays.
 *
 * C API over the C++ core. Objects are opaque handles created and destroyed
 * through these functions; every call returns a cnf_status and the last
 * error message is kept per thread.
 */
#ifndef CENNFORGE_H
#define CENNFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cnf_status {
  CNF_OK = 0,
  CNF_ERR_INVALID_ARGUMENT = 1,
  CNF_ERR_PARSE = 2,
  CNF_ERR_SHAPE = 3,
  CNF_ERR_IO = 4,
  CNF_ERR_INSTABILITY = 5,
  CNF_ERR_MODEL_DOMAIN = 6,
  CNF_ERR_CAPACITY = 7,
  CNF_ERR_INTERNAL = 8
} cnf_status;

const char* cnf_status_name(cnf_status s);

/* Message describing the most recent failure on this thread. */
const char* cnf_last_error(void);

const char* cnf_version(void);

typedef struct cnf_network cnf_network;
typedef struct cnf_dataset cnf_dataset;
typedef struct cnf_hardware cnf_hardware;
typedef struct cnf_program cnf_program;
typedef struct cnf_cost_params cnf_cost_params;
typedef struct cnf_cost_report cnf_cost_report;
typedef struct cnf_ota_curve cnf_ota_curve;

/* --- networks ------------------------------------------------------------ */

cnf_status cnf_network_from_preset(const char* name, cnf_network** out);
cnf_status cnf_network_load(const char* json_path, cnf_network** out);
cnf_status cnf_network_save(const cnf_network* net, const char* json_path,
                            const char* blob_path /* nullable */);
cnf_status cnf_network_load_weights(cnf_network* net, const char* blob_path);
cnf_status cnf_network_save_weights(const cnf_network* net, const char* blob_path);
cnf_status cnf_network_randomize_weights(cnf_network* net, uint64_t seed);
void cnf_network_free(cnf_network* net);

int cnf_network_layer_count(const cnf_network* net);
int cnf_network_class_count(const cnf_network* net);
cnf_status cnf_network_input_shape(const cnf_network* net, int* rows, int* cols, int* maps);
/* Writes a short human-readable summary; returns required buffer size. */
int cnf_network_describe(const cnf_network* net, char* buf, size_t cap);

/* --- datasets ------------------------------------------------------------ */

cnf_status cnf_dataset_load_idx(const char* images_path, const char* labels_path,
                                cnf_dataset** out);
void cnf_dataset_free(cnf_dataset* ds);
long cnf_dataset_size(const cnf_dataset* ds);
int cnf_dataset_label(const cnf_dataset* ds, long index);
/* Copies image `index` (row-major, values in [-1, 1]); returns cell count. */
long cnf_dataset_image(const cnf_dataset* ds, long index, double* buf, size_t cap);

/* --- hardware ------------------------------------------------------------ */

cnf_status cnf_hardware_create(int n_arrays, int rows, int cols, int mem_slots_per_cell,
                               int precision_bits, cnf_hardware** out);
cnf_status cnf_hardware_from_preset(const char* name, cnf_hardware** out);
void cnf_hardware_free(cnf_hardware* hw);
int cnf_required_mem_slots(const cnf_network* net, int n_arrays);

/* --- OTA curves ----------------------------------------------------------- */

cnf_status cnf_ota_curve_default(cnf_ota_curve** out);
cnf_status cnf_ota_curve_identity(cnf_ota_curve** out);
cnf_status cnf_ota_curve_load(const char* path, cnf_ota_curve** out);
cnf_status cnf_ota_curve_save(const cnf_ota_curve* curve, const char* path);
double cnf_ota_curve_eval(const cnf_ota_curve* curve, double v);
void cnf_ota_curve_free(cnf_ota_curve* curve);

/* --- compile & execute ---------------------------------------------------- */

cnf_status cnf_compile(const cnf_network* net, const cnf_hardware* hw, cnf_program** out);
void cnf_program_free(cnf_program* prog);
long cnf_program_event_count(const cnf_program* prog);
int cnf_program_rounds(const cnf_program* prog);
cnf_status cnf_program_write_trace(const cnf_program* prog, const char* path);

typedef struct cnf_exec_stats {
  long template_applies;
  long sram_reads;
  long mem_writes;
  long mem_reads;
  long accumulates;
  long adc_samples;
  long fc_mults, fc_adds, fc_saturations;
  double clip_rate;
} cnf_exec_stats;

/* mode: "ideal" | "quantized" | "nonideal" (the latter requires a curve).
 * `input` holds in_maps planes of rows*cols doubles, plane-major. */
cnf_status cnf_execute(const cnf_program* prog, const cnf_network* net, const cnf_hardware* hw,
                       const double* input, size_t input_len, const char* mode,
                       const cnf_ota_curve* curve /* nullable */, double* scores_out,
                       size_t scores_cap, int* predicted_out,
                       cnf_exec_stats* stats_out /* nullable */);

/* --- cost model ----------------------------------------------------------- */

cnf_status cnf_cost_params_from_preset(const char* name, cnf_cost_params** out);
/* delay_factor/power_factor <= 0 pick the published defaults (4.3 / 7.5). */
cnf_status cnf_cost_params_precision_scale(const cnf_cost_params* base, double delay_factor,
                                           double power_factor, int rederive_digital,
                                           cnf_cost_params** out);
void cnf_cost_params_free(cnf_cost_params* p);

cnf_status cnf_trace_cost(const cnf_program* prog, const cnf_cost_params* params,
                          cnf_cost_report** out);
void cnf_cost_report_free(cnf_cost_report* rep);
cnf_status cnf_cost_report_totals(const cnf_cost_report* rep, double* delay_s, double* energy_j,
                                  double* edp);
int cnf_cost_report_row_count(const cnf_cost_report* rep);
cnf_status cnf_cost_report_row(const cnf_cost_report* rep, int index, char* name_buf,
                               size_t name_cap, double* delay_s, double* energy_j);
cnf_status cnf_cost_report_save_csv(const cnf_cost_report* rep, const char* path);

/* Per-layer analytic delays; returns total in *total_s. per_layer may be
 * NULL to query only the total. */
cnf_status cnf_analytic_delay(const cnf_network* net, const cnf_hardware* hw,
                              const cnf_cost_params* params, double* per_layer, size_t cap,
                              double* total_s);

/* --- whole jobs ----------------------------------------------------------- */

typedef struct cnf_run_config {
  const char* network;      /* path or "preset:<name>" */
  const char* weights;      /* nullable */
  const char* images;       /* nullable (IDX) */
  const char* labels;       /* nullable (IDX) */
  long random_images;       /* synthesize inputs when no dataset */
  long limit;               /* -1: no cap */
  const char* hw_preset;    /* nullable */
  int n_arrays;
  int array_rows, array_cols; /* 0: network input shape */
  int mem_slots;              /* 0: derived */
  int bits;
  const char* mode;
  const char* curve;        /* nullable */
  const char* cost_preset;  /* nullable: paper-4bit-32nm */
  const char* out_dir;
  uint64_t seed;
  int threads;              /* 0: auto; CENN_FORGE_THREADS caps */
  int write_trace;
  const char* sweep_axis;   /* sweep only */
  const char* sweep_values; /* comma separated */
} cnf_run_config;

typedef struct cnf_run_result {
  char run_dir[512];
  long images_run;
  double accuracy; /* < 0 when no labels */
  double total_delay_s, total_energy_j, edp;
  double clip_rate;
} cnf_run_result;

cnf_status cnf_run(const cnf_run_config* cfg, cnf_run_result* out);
cnf_status cnf_sweep(const cnf_run_config* cfg, cnf_run_result* out);

/* --- verification --------------------------------------------------------- */

/* Runs the built-in acceptance suites. For every check the callback receives
 * (criterion id, name, pass, one-line detail). Returns the number of failed
 * checks into *failed. `filter` restricts by criterion id prefix; NULL runs
 * everything. */
typedef void (*cnf_check_callback)(const char* id, const char* name, int pass, const char* detail,
                                   void* user);
cnf_status cnf_verify(const char* filter, cnf_check_callback cb, void* user, int* failed);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CENNFORGE_H */
