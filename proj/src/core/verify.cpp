#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "errors.hpp"
#include "fc_digital.hpp"
#include "jobs.hpp"
#include "template_ops.hpp"

namespace cennforge {
namespace oracle {

Grid correlate3x3(const Grid& image, const Mat3& kernel, double bias, bool saturate) {
  Grid out(image.rows(), image.cols());
  for (int r = 0; r < image.rows(); ++r)
    for (int c = 0; c < image.cols(); ++c) {
      double acc = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          double g = kernel[dr + 1][dc + 1];
          if (g == 0.0) continue;
          int rr = r + dr, cc = c + dc;
          double v = (rr < 0 || rr >= image.rows() || cc < 0 || cc >= image.cols())
                         ? 0.0
                         : image.at(rr, cc);
          acc += g * v;
        }
      acc += bias;
      out.at(r, c) = saturate ? sat(acc) : acc;
    }
  return out;
}

Grid max_filter_3x3(const Grid& g) {
  Grid out(g.rows(), g.cols());
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) {
      double m = -2.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          int rr = r + dr, cc = c + dc;
          double v = (rr < 0 || rr >= g.rows() || cc < 0 || cc >= g.cols()) ? 0.0 : g.at(rr, cc);
          m = std::max(m, v);
        }
      out.at(r, c) = m;
    }
  return out;
}

Grid subsample_top_left(const Grid& g) {
  int orows = g.rows() / 2, ocols = g.cols() / 2;
  Grid out(orows, ocols);
  for (int r = 0; r < orows; ++r)
    for (int c = 0; c < ocols; ++c) out.at(r, c) = g.at(2 * r, 2 * c);
  return out;
}

Grid avg_filter(const Grid& g, int window) {
  Mat3 b = kZeros3;
  if (window == 2) {
    b[1][1] = b[1][2] = b[2][1] = b[2][2] = 0.25;
  } else {
    for (auto& row : b)
      for (double& v : row) v = 1.0 / 9.0;
  }
  return correlate3x3(g, b, 0.0);
}

std::vector<double> dense_forward(const NetworkSpec& net, const std::vector<Grid>& input) {
  std::vector<Grid> maps = input;
  const int N = 4;  // partial-sum grouping of the reference dataflow
  for (const LayerSpec& l : net.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        std::vector<Grid> out;
        for (int o = 0; o < l.out_maps; ++o) {
          // each kernel application saturates on its own (one settle), then
          // partials accumulate pairwise: group members first, the running
          // sum joins after
          std::vector<Grid> partials;
          for (int j = 0; j < l.in_maps; ++j)
            partials.push_back(
                correlate3x3(maps[j], l.kernel(o, j), j == 0 ? l.biases[o] : 0.0));
          int groups = (l.in_maps + N - 1) / N;
          Grid acc = partials[0];
          for (int q = 0; q < groups; ++q) {
            int lo = q * N, hi = std::min(l.in_maps, lo + N);
            Grid gsum = partials[lo];
            for (int j = lo + 1; j < hi; ++j) gsum = add_maps(gsum, partials[j]);
            acc = (q == 0) ? gsum : add_maps(gsum, acc);
          }
          out.push_back(acc);
        }
        maps = std::move(out);
        break;
      }
      case LayerKind::Relu:
        for (Grid& m : maps)
          for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) m.at(r, c) = std::max(0.0, m.at(r, c));
        break;
      case LayerKind::Pool: {
        for (Grid& m : maps) {
          if (l.pool_kind == PoolKind::MaxLinear)
            m = max_filter_3x3(m);
          else if (l.pool_kind == PoolKind::Avg)
            m = avg_filter(m, l.pool_window);
          else
            throw invalid_argument_error("dense_forward: nonlinear pooling has no dense oracle");
          if (l.downsample) m = subsample_top_left(m);
        }
        break;
      }
      case LayerKind::Fc: {
        std::vector<double> flat;
        for (const Grid& m : maps)
          for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) flat.push_back(m.at(r, c));
        std::vector<double> scores(l.out_maps, 0.0);
        for (int o = 0; o < l.out_maps; ++o) {
          const double* row = l.fc_weights.data() + static_cast<size_t>(o) * flat.size();
          double acc = 0.0;
          for (size_t k = 0; k < flat.size(); ++k) acc += row[k] * flat[k];
          scores[o] = acc;
        }
        return scores;
      }
    }
  }
  std::vector<double> scores;
  for (const Grid& m : maps) scores.push_back(m.at(m.rows() / 2, m.cols() / 2));
  return scores;
}

}  // namespace oracle

namespace verify {

namespace {

struct Suite {
  std::vector<CheckResult> results;

  void add(const std::string& id, const std::string& name, bool pass,
           const std::string& detail) {
    results.push_back({id, name, pass, detail});
  }
};

bool within(double got, double want, double rel_tol) {
  return std::fabs(got - want) <= rel_tol * std::fabs(want);
}

// Published per-layer delay/energy rows (ns / pJ) for the two MNIST designs.
struct RowTarget {
  const char* layer;
  double delay_ns;
  double energy_pj;
};
const std::vector<RowTarget> kDesign1Rows = {
    {"conv1", 5.3, 626},   {"relu1", 10.7, 536}, {"pool1", 85.5, 4290},
    {"conv2", 42.8, 2827}, {"relu2", 10.7, 410}, {"pool2", 85.5, 3277},
    {"fc", 291.1, 7875},
};
const std::vector<RowTarget> kDesign2Rows = {
    {"conv1", 5.3, 626},  {"relu1", 10.7, 536}, {"pool1", 85.5, 3398},
    {"conv2", 42.8, 981}, {"relu2", 10.7, 186}, {"pool2", 85.5, 1489},
    {"conv3", 42.8, 519}, {"relu3", 10.7, 115}, {"pool3", 85.5, 921},
    {"conv4", 53.4, 582},
};

CostReport cost_for(const std::string& preset_name, const CostParams& params) {
  NetworkSpec net = network_preset(preset_name);
  randomize_weights(net, 7);
  CeNNProgram prog = compile(net, hardware_preset("paper-mnist"));
  return trace_cost(prog, params);
}

void check_cost_reproduction(Suite& s) {
  CostParams params = cost_preset("paper-4bit-32nm");
  struct NetCase {
    const char* name;
    const std::vector<RowTarget>* rows;
    double total_delay_ns, total_energy_pj;
  };
  for (const NetCase& nc : {NetCase{"mnist_design1", &kDesign1Rows, 531.6, 19841},
                            NetCase{"mnist_design2", &kDesign2Rows, 432.9, 9353}}) {
    CostReport rep = cost_for(nc.name, params);
    bool rows_ok = true;
    std::string worst = "none";
    double worst_rel = 0;
    for (const RowTarget& rt : *nc.rows) {
      const LayerCost* lc = rep.find(rt.layer);
      if (!lc) {
        rows_ok = false;
        worst = std::string("missing row ") + rt.layer;
        break;
      }
      for (auto [got, want] : {std::pair{lc->delay * 1e9, rt.delay_ns},
                               std::pair{lc->energy * 1e12, rt.energy_pj}}) {
        double rel = std::fabs(got - want) / want;
        if (rel > worst_rel) {
          worst_rel = rel;
          char buf[128];
          std::snprintf(buf, sizeof buf, "%s %.4g vs %.4g (%+.2f%%)", rt.layer, got, want,
                        (got - want) / want * 100.0);
          worst = buf;
        }
        if (rel > 0.05) rows_ok = false;
      }
    }
    bool totals_ok = within(rep.total_delay * 1e9, nc.total_delay_ns, 0.03) &&
                     within(rep.total_energy * 1e12, nc.total_energy_pj, 0.03);
    char buf[256];
    std::snprintf(buf, sizeof buf, "total %.1f ns / %.0f pJ vs %.1f / %.0f; worst row %s",
                  rep.total_delay * 1e9, rep.total_energy * 1e12, nc.total_delay_ns,
                  nc.total_energy_pj, worst.c_str());
    s.add("1", std::string("cost reproduction ") + nc.name, rows_ok && totals_ok, buf);
  }
}

void check_step_calibration(Suite& s) {
  CostParams params = cost_preset("paper-4bit-32nm");
  CostReport rep = cost_for("mnist_design1", params);
  const LayerCost* relu = rep.find("relu1");
  const LayerCost* pool = rep.find("pool1");
  double step = params.step_time();
  bool ok = relu && pool && within(relu->delay, 2 * step, 0.01) &&
            within(pool->delay, 16 * step, 0.01) && within(relu->delay * 1e9, 10.7, 0.01) &&
            within(pool->delay * 1e9, 85.5, 0.01);
  char buf[192];
  std::snprintf(buf, sizeof buf,
                "relu %.3f ns (2 x %.3f, table 10.7); pool %.3f ns (16 x %.3f, table 85.5)",
                relu ? relu->delay * 1e9 : -1, step * 1e9, pool ? pool->delay * 1e9 : -1,
                step * 1e9);
  s.add("2", "per-step calibration consistency", ok, buf);
}

void check_precision_scaling(Suite& s) {
  CostParams p8 = precision_scale(cost_preset("paper-4bit-32nm"));
  CostReport rep = cost_for("mnist_design1", p8);
  bool ok = within(rep.total_delay * 1e9, 1442.0, 0.10) &&
            within(rep.total_energy * 1e9, 104.9, 0.10);
  char buf[128];
  std::snprintf(buf, sizeof buf, "8-bit design1: %.1f ns / %.1f nJ vs 1442 / 104.9",
                rep.total_delay * 1e9, rep.total_energy * 1e9);
  s.add("3", "precision scaling to the published 8-bit totals", ok, buf);
}

void check_relu_oracle(Suite& s) {
  TemplateProgram relu = relu_program();
  // decimal grid, 2001 values: the +/-1 shifts round in the last bit for
  // values below 0.5, so assert a 1e-12 envelope here
  bool grid_ok = true;
  double worst = 0;
  for (int k = -1000; k <= 1000; ++k) {
    double x = k / 1000.0;
    Grid in(1, 1, x);
    double got = run_program(relu, in).at(0, 0);
    double want = std::max(0.0, x);
    worst = std::max(worst, std::fabs(got - want));
    if (std::fabs(got - want) > 1e-12) grid_ok = false;
  }
  // dyadic grid: every intermediate is exactly representable; bit-for-bit
  bool exact_ok = true;
  for (int k = -1024; k <= 1024; ++k) {
    double x = k / 1024.0;
    Grid in(1, 1, x);
    if (run_program(relu, in).at(0, 0) != std::max(0.0, x)) exact_ok = false;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "2001-value grid worst |err| = %.3g; dyadic grid bitwise %s",
                worst, exact_ok ? "exact" : "MISMATCH");
  s.add("4a", "relu program == max(0, x)", grid_ok && exact_ok, buf);
}

void check_maxpool_oracle(Suite& s) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(2, 8);
  std::uniform_int_distribution<int> level(-256, 256);  // dyadic alphabet k/256
  long bad = 0;
  const long trials = 10000;
  for (long t = 0; t < trials; ++t) {
    int rows = dim(rng), cols = dim(rng);
    Grid g(rows, cols);
    for (size_t i = 0; i < g.size(); ++i) g.data()[i] = level(rng) / 256.0;
    bool ds = (t % 2 == 0) && rows >= 2 && cols >= 2;
    Grid got = run_program(maxpool_program(ds), g);
    Grid want = oracle::max_filter_3x3(g);
    if (ds) want = oracle::subsample_top_left(want);
    if (!(got == want)) ++bad;
  }
  // exhaustive 3x3 grids over the 5-level alphabet
  const double alphabet[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  long bad_ex = 0;
  long total = 1;
  for (int i = 0; i < 9; ++i) total *= 5;
  TemplateProgram pool = maxpool_program(false);
  StepEngine eng(Grid(3, 3));
  for (long code = 0; code < total; ++code) {
    Grid g(3, 3);
    long cc = code;
    for (int i = 0; i < 9; ++i) {
      g.data()[i] = alphabet[cc % 5];
      cc /= 5;
    }
    eng.reset(g);
    eng.run(pool);
    if (!(eng.map() == oracle::max_filter_3x3(g))) ++bad_ex;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "%ld/%ld random dyadic grids mismatched; %ld/%ld exhaustive 5-level 3x3 grids "
                "mismatched",
                bad, trials, bad_ex, total);
  s.add("4b", "max pooling == 3x3-window max filter (+subsample), exact", bad == 0 && bad_ex == 0,
        buf);
}

void check_conv_oracle(Suite& s) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> wdist(-1.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mat3 k;
    for (auto& row : k)
      for (double& v : row) v = wdist(rng);
    double bias = wdist(rng) * 0.5;
    Grid img(6, 6);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = wdist(rng);
    Grid got = run_program(conv_program(k, bias), img);
    Grid want = oracle::correlate3x3(img, k, bias);
    for (size_t i = 0; i < img.size(); ++i)
      worst = std::max(worst, std::fabs(got.data()[i] - want.data()[i]));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 random kernel/image pairs, worst |err| = %.3g", worst);
  s.add("4c", "conv program == zero-padded correlation + sat", worst <= 1e-6, buf);
}

void check_end_to_end(Suite& s) {
  HardwareConfig hw = hardware_preset("paper-mnist");
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pix(0, 255);
  long argmax_mismatch = 0;
  double worst_dev = 0;
  const int trials_per_design = 250;
  for (const char* preset : {"mnist_design1", "mnist_design2"}) {
    NetworkSpec net = network_preset(preset);
    for (int t = 0; t < trials_per_design; ++t) {
      randomize_weights(net, 1000 + t);
      CeNNProgram prog = compile(net, hw);
      std::vector<Grid> input(1, Grid(28, 28));
      for (size_t i = 0; i < input[0].size(); ++i)
        input[0].data()[i] = idx_normalize(static_cast<uint8_t>(pix(rng)));
      ExecResult got = execute(prog, net, hw, input, ExecMode::Ideal);
      std::vector<double> want = oracle::dense_forward(net, input);
      if (got.predicted != argmax(want)) ++argmax_mismatch;
      for (size_t k = 0; k < want.size(); ++k)
        worst_dev = std::max(worst_dev, std::fabs(got.scores[k] - want[k]));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "500 random-weight trials: %ld argmax mismatches, worst score deviation %.3g",
                argmax_mismatch, worst_dev);
  s.add("4d", "end-to-end ideal execution == dense oracle", argmax_mismatch == 0 && worst_dev <= 1e-5,
        buf);
}

void check_dynamics(Suite& s) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> bdist(-0.4, 0.4);
  std::uniform_real_distribution<double> udist(-1.0, 1.0);
  BoundaryPolicy bc;
  double worst_ff = 0, worst_halving = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mat3 b;
    for (auto& row : b)
      for (double& v : row) v = bdist(rng);
    Template t = Template::feedforward(b, bdist(rng));
    CeNNArrayState st(5, 5);
    for (size_t i = 0; i < st.u.size(); ++i) st.u.data()[i] = udist(rng);

    CeNNArrayState ff = st;
    settle_feedforward(ff, t, bc);

    SettleOptions so;
    so.eps = 1e-9;
    CeNNArrayState ode = st;
    settle_ode(ode, t, bc, so);
    for (size_t i = 0; i < st.u.size(); ++i)
      worst_ff = std::max(worst_ff, std::fabs(ode.y.data()[i] - ff.y.data()[i]));

    if (trial < 100) {  // step-halving convergence on a subset
      SettleOptions half = so;
      half.dt = so.dt / 2;
      CeNNArrayState ode2 = st;
      settle_ode(ode2, t, bc, half);
      for (size_t i = 0; i < st.u.size(); ++i)
        worst_halving =
            std::max(worst_halving, std::fabs(ode.y.data()[i] - ode2.y.data()[i]));
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "ode vs closed form worst %.3g; dt halving worst %.3g", worst_ff,
                worst_halving);
  s.add("5", "integrator matches the feed-forward steady state", worst_ff <= 1e-6 && worst_halving <= 1e-6,
        buf);
}

void check_scheduler_structure(Suite& s) {
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 23);
  CeNNProgram prog = compile(net, hardware_preset("paper-mnist"));
  // conv2 = layer index 3: 4 inputs, 4 outputs
  bool ok = true;
  std::ostringstream detail;
  long conv2_applies = prog.count_layer(3, EventKind::TemplateApply);
  long conv2_accs = prog.accumulate_count(3);
  long conv2_kernels = prog.sram_kernel_count(3);
  ok &= conv2_applies == 16 && conv2_accs == 12 && conv2_kernels == 16;
  detail << "conv2 applies=" << conv2_applies << "/16 accumulates=" << conv2_accs
         << "/12 kernel-reads=" << conv2_kernels << "/16";
  long conv1_applies = prog.count_layer(0, EventKind::TemplateApply);
  long conv1_accs = prog.accumulate_count(0);
  ok &= conv1_applies == 4 && conv1_accs == 0;
  long relu_srams = prog.count_layer(1, EventKind::SramRead);
  long pool_srams = prog.count_layer(2, EventKind::SramRead);
  ok &= relu_srams == 2 && pool_srams == 16;
  detail << "; relu1 sram=" << relu_srams << "/2 pool1 sram=" << pool_srams << "/16";
  try {
    prog.check_validity();
  } catch (const Error& e) {
    ok = false;
    detail << "; validity: " << e.what();
  }
  s.add("6", "scheduler trace structure", ok, detail.str());
}

void check_analytic(Suite& s) {
  CostParams p = cost_preset("paper-4bit-32nm");
  NetworkSpec net;
  net.name = "one_conv";
  net.input_shape = {8, 8};
  net.input_maps = 4;
  net.class_count = 4;
  LayerSpec conv;
  conv.name = "conv";
  conv.kind = LayerKind::Conv;
  conv.in_maps = 4;
  conv.out_maps = 4;
  net.layers.push_back(conv);
  net.validate();
  HardwareConfig hw{4, {8, 8}, 16, 4};
  AnalyticDelay ad = analytic_delay(net, hw, p);
  double cc = 16.0;
  double want = (cc / 3.0 + cc / 4.0) * p.step_time() +
                cc / 6.0 * p.t_mem_read + cc / 6.0 * p.t_mem_write;
  bool pin_ok = std::fabs(ad.per_layer[0].second - want) <= 1e-18;
  bool domain_ok = false;
  try {
    analytic_delay(net, HardwareConfig{1, {8, 8}, 16, 4}, p);
  } catch (const Error& e) {
    domain_ok = e.code() == ErrorCode::ModelDomain;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "closed form %.4f ns (want %.4f); N=1 raises domain error: %s",
                ad.per_layer[0].second * 1e9, want * 1e9, domain_ok ? "yes" : "no");
  s.add("7", "analytic delay formula, literal", pin_ok && domain_ok, buf);
}

void check_nonideal(Suite& s) {
  HardwareConfig hw = hardware_preset("paper-mnist");
  NetworkSpec net = network_preset("mnist_design1");
  randomize_weights(net, 29);
  CeNNProgram prog = compile(net, hw);
  OtaCurve ident = OtaCurve::identity_curve();
  OtaCurve deflt = OtaCurve::default_curve();
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> pix(0, 255);
  bool ident_ok = true;
  int agree = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    std::vector<Grid> input(1, Grid(28, 28));
    for (size_t i = 0; i < input[0].size(); ++i)
      input[0].data()[i] = idx_normalize(static_cast<uint8_t>(pix(rng)));
    ExecResult ideal = execute(prog, net, hw, input, ExecMode::Ideal);
    ExecResult viaident = execute(prog, net, hw, input, ExecMode::Nonideal, &ident);
    for (size_t k = 0; k < ideal.scores.size(); ++k)
      if (ideal.scores[k] != viaident.scores[k]) ident_ok = false;
    ExecResult curved = execute(prog, net, hw, input, ExecMode::Nonideal, &deflt);
    if (curved.predicted == ideal.predicted) ++agree;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "identity curve bit-identical: %s; default curve argmax agreement %d/%d (reported, "
                "not gated)",
                ident_ok ? "yes" : "NO", agree, trials);
  s.add("8", "non-ideality sanity", ident_ok, buf);
}

void check_determinism(Suite& s) {
  namespace fs = std::filesystem;
  fs::path base = fs::temp_directory_path() / "cennforge_verify_det";
  std::error_code ec;
  fs::remove_all(base, ec);
  RunConfig cfg;
  cfg.network = "preset:mnist_design1";
  cfg.random_images = 3;
  cfg.seed = 99;
  cfg.mode = "ideal";
  cfg.out_dir = (base / "a").string();
  RunOutcome a = run_job(cfg);
  cfg.out_dir = (base / "b").string();
  RunOutcome b = run_job(cfg);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  bool ok = true;
  for (const char* f : {"report.txt", "costs.csv", "analytic.csv", "predictions.csv"})
    ok &= slurp(a.run_dir + "/" + f) == slurp(b.run_dir + "/" + f) &&
          !slurp(a.run_dir + "/" + f).empty();
  fs::remove_all(base, ec);
  s.add("9", "identical seed, byte-identical reports", ok,
        ok ? "report.txt, costs.csv, analytic.csv, predictions.csv match" : "files differ");
}

}  // namespace

std::vector<CheckResult> run_checks(const std::string& filter) {
  Suite s;
  check_cost_reproduction(s);
  check_step_calibration(s);
  check_precision_scaling(s);
  check_relu_oracle(s);
  check_maxpool_oracle(s);
  check_conv_oracle(s);
  check_end_to_end(s);
  check_dynamics(s);
  check_scheduler_structure(s);
  check_analytic(s);
  check_nonideal(s);
  check_determinism(s);
  std::vector<CheckResult> out;
  for (CheckResult& r : s.results)
    if (filter.empty() || r.id.rfind(filter, 0) == 0) out.push_back(std::move(r));
  return out;
}

}  // namespace verify
}  // namespace cennforge
