#include "jobs.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "verify.hpp"

namespace cennforge {

namespace fs = std::filesystem;

int worker_thread_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("CENN_FORGE_THREADS")) {
    int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

namespace {

NetworkSpec resolve_network(const RunConfig& cfg) {
  if (cfg.network.empty()) throw invalid_argument_error("no network given");
  NetworkSpec net;
  if (cfg.network.rfind("preset:", 0) == 0)
    net = network_preset(cfg.network.substr(7));
  else
    net = load_network(cfg.network);
  if (!cfg.weights.empty()) load_weights(cfg.weights, net);
  bool missing = false;
  for (const LayerSpec& l : net.layers)
    if ((l.kind == LayerKind::Conv || l.kind == LayerKind::Fc) && !l.has_weights()) missing = true;
  if (missing) randomize_weights(net, cfg.seed);
  return net;
}

HardwareConfig resolve_hw(const RunConfig& cfg, const NetworkSpec& net, int n_arrays_override) {
  HardwareConfig hw;
  if (!cfg.hw_preset.empty()) {
    hw = hardware_preset(cfg.hw_preset);
  } else {
    hw.n_arrays = cfg.n_arrays;
    hw.array_shape = (cfg.array_rows > 0 && cfg.array_cols > 0)
                         ? Shape2{cfg.array_rows, cfg.array_cols}
                         : net.input_shape;
    hw.precision = cfg.bits;
    hw.mem_slots_per_cell = cfg.mem_slots;
  }
  if (n_arrays_override > 0) hw.n_arrays = n_arrays_override;
  if (hw.mem_slots_per_cell <= 0)
    hw.mem_slots_per_cell = required_mem_slots(net, hw.n_arrays);
  return hw;
}

std::string make_run_dir(const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (int i = 1; i < 100000; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run-%03d", i);
    fs::path p = fs::path(out_dir) / name;
    if (!fs::exists(p)) {
      fs::create_directory(p);
      return p.string();
    }
  }
  throw io_error("run directory space exhausted under " + out_dir);
}

std::vector<std::vector<Grid>> gather_inputs(const RunConfig& cfg, const NetworkSpec& net,
                                             std::vector<int>& labels) {
  std::vector<std::vector<Grid>> inputs;
  if (!cfg.images.empty()) {
    if (cfg.labels.empty())
      throw invalid_argument_error("images given without labels (pass --labels)");
    Dataset ds = load_idx_dataset(cfg.images, cfg.labels);
    if (net.input_maps != 1)
      throw invalid_argument_error("IDX datasets carry one plane; network '" + net.name +
                                   "' expects " + std::to_string(net.input_maps));
    for (size_t i = 0; i < ds.images.size(); ++i) {
      if (ds.labels[i] >= net.class_count)
        throw parse_error("dataset label " + std::to_string(ds.labels[i]) +
                          " exceeds class_count " + std::to_string(net.class_count));
      if (ds.images[i].rows() != net.input_shape.rows ||
          ds.images[i].cols() != net.input_shape.cols)
        throw shape_error("dataset image shape does not match the network input");
      inputs.push_back({ds.images[i]});
      labels.push_back(ds.labels[i]);
    }
  } else {
    long n = cfg.random_images;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pix(0, 255);
    for (long i = 0; i < n; ++i) {
      std::vector<Grid> planes;
      for (int p = 0; p < net.input_maps; ++p) {
        Grid g(net.input_shape.rows, net.input_shape.cols);
        for (size_t k = 0; k < g.size(); ++k)
          g.data()[k] = idx_normalize(static_cast<uint8_t>(pix(rng)));
        planes.push_back(std::move(g));
      }
      inputs.push_back(std::move(planes));
    }
  }
  if (cfg.limit >= 0 && static_cast<long>(inputs.size()) > cfg.limit) {
    inputs.resize(cfg.limit);
    if (!labels.empty()) labels.resize(cfg.limit);
  }
  return inputs;
}

CostParams resolve_cost_params(const std::string& preset, int bits) {
  CostParams p = cost_preset(preset);
  if (bits == 8 && p.precision_bits == 4) p = cost_preset("paper-8bit-32nm");
  return p;
}

void write_analytic_csv(const std::string& path, const NetworkSpec& net, const HardwareConfig& hw,
                        const CostParams& params) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "layer,analytic_delay_ns\n";
  try {
    AnalyticDelay ad = analytic_delay(net, hw, params);
    char buf[48];
    for (auto& [name, d] : ad.per_layer) {
      std::snprintf(buf, sizeof buf, "%.4f", d * 1e9);
      out << name << ',' << buf << "\n";
    }
    std::snprintf(buf, sizeof buf, "%.4f", ad.total * 1e9);
    out << "total," << buf << "\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ModelDomain) throw;
    out << "unavailable," << e.what() << "\n";
  }
}

struct InferenceResults {
  std::vector<int> predictions;
  std::vector<std::vector<double>> scores;
  std::vector<double> clip_rates;
};

InferenceResults run_inference(const CeNNProgram& prog, const NetworkSpec& net,
                               const HardwareConfig& hw,
                               const std::vector<std::vector<Grid>>& inputs, ExecMode mode,
                               const OtaCurve* curve, int threads) {
  InferenceResults res;
  res.predictions.assign(inputs.size(), -1);
  res.scores.assign(inputs.size(), {});
  res.clip_rates.assign(inputs.size(), 0.0);
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string error_msg;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= inputs.size() || failed.load()) return;
      try {
        ExecResult r = execute(prog, net, hw, inputs[i], mode, curve);
        res.predictions[i] = r.predicted;
        res.scores[i] = r.scores;
        res.clip_rates[i] = r.stats.clip_rate;
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        failed = true;
        try {
          throw;
        } catch (const std::exception& e) {
          error_msg = e.what();
        }
      }
    }
  };
  int n = worker_thread_count(threads);
  n = std::min<long>(n, static_cast<long>(inputs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failed) throw Error(ErrorCode::Internal, "inference failed: " + error_msg);
  return res;
}

}  // namespace

RunOutcome run_job(const RunConfig& cfg) {
  NetworkSpec net = resolve_network(cfg);
  HardwareConfig hw = resolve_hw(cfg, net, 0);
  CostParams params = resolve_cost_params(cfg.cost_preset_name, hw.precision);
  CeNNProgram prog = compile(net, hw);
  CostReport cost = trace_cost(prog, params);

  ExecMode mode = exec_mode_from(cfg.mode);
  OtaCurve curve = OtaCurve::identity_curve();
  if (mode == ExecMode::Nonideal)
    curve = cfg.curve.empty() ? OtaCurve::default_curve() : OtaCurve::load(cfg.curve);

  std::vector<int> labels;
  std::vector<std::vector<Grid>> inputs = gather_inputs(cfg, net, labels);

  RunOutcome out;
  out.run_dir = make_run_dir(cfg.out_dir);
  cost.save_csv(out.run_dir + "/costs.csv");
  write_analytic_csv(out.run_dir + "/analytic.csv", net, hw, params);
  if (cfg.write_trace) prog.write_trace_file(out.run_dir + "/trace.log");

  InferenceResults inf;
  if (!inputs.empty())
    inf = run_inference(prog, net, hw, inputs, mode,
                        mode == ExecMode::Nonideal ? &curve : nullptr, cfg.threads);

  long correct = 0;
  double clip_sum = 0;
  {
    std::ofstream pred(out.run_dir + "/predictions.csv");
    if (!pred) throw io_error("cannot write predictions.csv");
    pred << "index,label,predicted,top_score\n";
    char buf[48];
    for (size_t i = 0; i < inputs.size(); ++i) {
      int lbl = labels.empty() ? -1 : labels[i];
      if (lbl >= 0 && lbl == inf.predictions[i]) ++correct;
      clip_sum += inf.clip_rates[i];
      std::snprintf(buf, sizeof buf, "%.9g", inf.scores[i].empty()
                                                 ? 0.0
                                                 : inf.scores[i][inf.predictions[i]]);
      pred << i << ',' << lbl << ',' << inf.predictions[i] << ',' << buf << "\n";
    }
  }

  out.images_run = static_cast<long>(inputs.size());
  out.accuracy = labels.empty() || inputs.empty()
                     ? -1.0
                     : static_cast<double>(correct) / static_cast<double>(inputs.size());
  out.total_delay = cost.total_delay;
  out.total_energy = cost.total_energy;
  out.edp = cost.edp;
  out.clip_rate = inputs.empty() ? 0.0 : clip_sum / static_cast<double>(inputs.size());

  std::ofstream rep(out.run_dir + "/report.txt");
  if (!rep) throw io_error("cannot write report.txt");
  rep << "network: " << net.name << "\n";
  rep << "mode: " << exec_mode_name(mode) << "\n";
  rep << "hardware: n_arrays=" << hw.n_arrays << " array=" << hw.array_shape.rows << "x"
      << hw.array_shape.cols << " mem_slots=" << hw.mem_slots_per_cell
      << " bits=" << hw.precision << "\n";
  rep << "cost_preset: " << params.name << "\n";
  rep << "seed: " << cfg.seed << "\n";
  rep << "images: " << out.images_run << "\n";
  char buf[64];
  if (out.accuracy >= 0) {
    std::snprintf(buf, sizeof buf, "%.6f", out.accuracy);
    rep << "accuracy: " << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "%.6f", out.clip_rate);
  rep << "clip_rate: " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.4f", out.total_delay * 1e9);
  rep << "trace_delay_ns: " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.4f", out.total_energy * 1e12);
  rep << "trace_energy_pJ: " << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.6e", out.edp * 1e21);
  rep << "edp_nJ_ns: " << buf << "\n";
  rep << "events: applies=" << prog.count(EventKind::TemplateApply)
      << " sram=" << prog.count(EventKind::SramRead)
      << " mem_writes=" << prog.count(EventKind::MemWrite)
      << " mem_reads=" << prog.count(EventKind::MemRead) << " rounds=" << prog.rounds << "\n";
  rep << "calibration: " << params.calibration_note << "\n";
  rep << "\n";
  cost.write_text(rep);
  return out;
}

RunOutcome sweep_job(const RunConfig& cfg) {
  if (cfg.sweep_axis.empty()) throw invalid_argument_error("sweep: no axis given");
  if (cfg.sweep_values.empty()) throw invalid_argument_error("sweep: empty axis value list");

  RunOutcome out;
  out.run_dir = make_run_dir(cfg.out_dir);
  std::ofstream csv(out.run_dir + "/sweep.csv");
  if (!csv) throw io_error("cannot write sweep.csv");
  csv << "axis,value,delay_ns,energy_pJ,edp_nJ_ns,settle_rounds,accuracy\n";

  for (const std::string& value : cfg.sweep_values) {
    RunConfig rc = cfg;
    rc.sweep_axis.clear();
    rc.sweep_values.clear();
    NetworkSpec net = resolve_network(rc);
    int n_arrays_override = 0;
    if (cfg.sweep_axis == "precision") {
      int b = std::stoi(value);
      if (b != 4 && b != 8) throw invalid_argument_error("sweep precision: values must be 4 or 8");
      rc.bits = b;
    } else if (cfg.sweep_axis == "n_arrays") {
      n_arrays_override = std::stoi(value);
      if (n_arrays_override < 2)
        throw invalid_argument_error("sweep n_arrays: need at least 2 arrays");
    } else if (cfg.sweep_axis == "pool_kind") {
      PoolKind pk;
      bool nonlinear = false;
      if (value == "max_linear") pk = PoolKind::MaxLinear;
      else if (value == "avg") pk = PoolKind::Avg;
      else if (value == "nonlinear") { pk = PoolKind::Nonlinear; nonlinear = true; }
      else throw invalid_argument_error("sweep pool_kind: unknown value '" + value + "'");
      for (LayerSpec& l : net.layers) {
        if (l.kind == LayerKind::Pool) {
          l.pool_kind = pk;
          if (pk == PoolKind::Avg && l.pool_window != 2 && l.pool_window != 3)
            l.pool_window = l.downsample ? 2 : 3;
        }
        if (l.kind == LayerKind::Relu) l.relu_nonlinear = nonlinear;
      }
      net.validate();
    } else {
      throw invalid_argument_error("sweep: unknown axis '" + cfg.sweep_axis + "'");
    }

    HardwareConfig hw = resolve_hw(rc, net, n_arrays_override);
    CostParams params = resolve_cost_params(rc.cost_preset_name, hw.precision);
    CeNNProgram prog = compile(net, hw);
    CostReport cost = trace_cost(prog, params);

    double accuracy = -1.0;
    if (!cfg.images.empty() || cfg.random_images > 0) {
      std::vector<int> labels;
      std::vector<std::vector<Grid>> inputs = gather_inputs(rc, net, labels);
      if (!inputs.empty()) {
        ExecMode mode = exec_mode_from(rc.mode);
        OtaCurve curve = OtaCurve::default_curve();
        InferenceResults inf =
            run_inference(prog, net, hw, inputs, mode,
                          mode == ExecMode::Nonideal ? &curve : nullptr, rc.threads);
        if (!labels.empty()) {
          long correct = 0;
          for (size_t i = 0; i < inputs.size(); ++i)
            if (labels[i] == inf.predictions[i]) ++correct;
          accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
        }
      }
    }

    long rounds = 0;
    for (const LayerPlan& p : prog.layers) rounds += p.settle_rounds;
    char d[48], e[48], ed[48], acc[48];
    std::snprintf(d, sizeof d, "%.4f", cost.total_delay * 1e9);
    std::snprintf(e, sizeof e, "%.4f", cost.total_energy * 1e12);
    std::snprintf(ed, sizeof ed, "%.6e", cost.edp * 1e21);
    if (accuracy >= 0)
      std::snprintf(acc, sizeof acc, "%.6f", accuracy);
    else
      acc[0] = '\0';
    csv << cfg.sweep_axis << ',' << value << ',' << d << ',' << e << ',' << ed << ',' << rounds
        << ',' << acc << "\n";
  }
  return out;
}

}  // namespace cennforge
