#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "tide/checkpoint.hpp"
#include "tide/config.hpp"
#include "tide/data.hpp"
#include "tide/errors.hpp"
#include "tide/eval.hpp"
#include "tide/gradcheck.hpp"
#include "tide/lds.hpp"
#include "tide/model.hpp"
#include "tide/optim.hpp"
#include "tide/rng.hpp"
#include "tide/tape.hpp"
#include "tide/tensor.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tide;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc{} ? std::string(buf, p) : std::string("nan");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct AffineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};

AffineFit fit_affine(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  AffineFit fit;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0.0, ss_tot = 0.0;
  const double mean_y = sy / n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss_res += e * e;
    ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

json metrics_json(const MetricsReport& m) {
  json out;
  out["mse"] = m.mse;
  out["mae"] = m.mae;
  out["window_count"] = m.window_count;
  std::vector<double> per_step(m.per_step.data(), m.per_step.data() + m.per_step.numel());
  out["per_step_mse"] = per_step;
  return out;
}

Segment parse_segment(const std::string& name) {
  if (name == "train") return Segment::train;
  if (name == "val") return Segment::val;
  if (name == "test") return Segment::test;
  throw ConfigError("unknown segment '" + name + "' (use train, val, or test)");
}

// ---------------------------------------------------------------------------
// Shared run-configuration plumbing (train / ablate).

struct RunArgs {
  std::string config_file;
  std::string preset;
  std::string dataset;
  std::string outdir;
  std::vector<std::string> sets;
  std::int64_t horizon = 0;    // 0 = not set
  std::int64_t seed = -1;      // -1 = not set
  bool preset_used = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config_file, "key = value configuration file");
  cmd->add_option("--preset", a.preset,
                  "benchmark preset (traffic, electricity, ettm1, ettm2, etth1, "
                  "etth2, weather)");
  cmd->add_option("--dataset", a.dataset, "panel CSV path");
  cmd->add_option("--outdir", a.outdir, "output directory (default 'out')");
  cmd->add_option("--horizon", a.horizon, "forecast horizon override");
  cmd->add_option("--seed", a.seed, "training seed override");
  cmd->add_option("--set", a.sets, "extra key=value overrides")->delimiter(0);
}

RunConfig resolve_config(RunArgs& a) {
  RunConfig cfg;
  if (!a.preset.empty()) {
    cfg = preset_config(a.preset);
    a.preset_used = true;
  }
  if (!a.config_file.empty()) cfg = parse_config_file(a.config_file, cfg);
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    std::string key = kv.substr(0, eq);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    while (!key.empty() && (key.front() == ' ' || key.front() == '\t')) {
      key.erase(key.begin());
    }
    apply_key(cfg, key, kv.substr(eq + 1));
  }
  if (a.horizon != 0) apply_key(cfg, "horizon", std::to_string(a.horizon));
  if (a.seed >= 0) apply_key(cfg, "seed", std::to_string(a.seed));
  if (!a.dataset.empty()) cfg.dataset_path = a.dataset;
  if (!a.outdir.empty()) cfg.outdir = a.outdir;
  if (a.preset_used) validate_preset_ranges(cfg);
  return cfg;
}

struct PanelBundle {
  TimeSeriesDataset ds;
  SplitSpec spec;
};

/// Loads the panel and applies the configured preprocessing: calendar
/// covariates appended, then per-series standardization on training-period
/// statistics. All reported metrics are in the resulting units.
PanelBundle load_panel(const RunConfig& cfg) {
  PanelBundle p;
  p.ds = load_csv(cfg.dataset_path);
  if (cfg.time_features) p.ds = with_time_features(p.ds);
  p.spec = split(p.ds);
  if (cfg.normalized) {
    const Scaler scaler = fit_scaler(p.ds, p.spec);
    p.ds = apply_scaler(p.ds, scaler);
  }
  return p;
}

/// Fits the architecture to the loaded panel: covariate and static arities
/// come from the data; a covariate-free panel forces the projection off.
void adapt_model_to_panel(ModelConfig& m, const TimeSeriesDataset& ds) {
  m.covariate_dim = ds.covariate_dim();
  m.static_dim = ds.static_dim();
  if (m.covariate_dim == 0) m.temporal_width = 0;
  m.validate();
}

// ---------------------------------------------------------------------------
// train

int cmd_train(RunArgs& args) {
  RunConfig cfg = resolve_config(args);
  if (cfg.dataset_path.empty()) {
    throw ConfigError("train requires a dataset (--dataset or 'dataset = path')");
  }
  const auto t0 = std::chrono::steady_clock::now();
  PanelBundle panel = load_panel(cfg);
  adapt_model_to_panel(cfg.model, panel.ds);
  cfg.train.validate();

  const TrainResult run = train_loop(cfg.model, cfg.train, panel.ds, panel.spec);
  const MetricsReport test =
      rolling_evaluate(run.params, panel.ds, panel.spec, Segment::test,
                       EvalOptions{cfg.train.batch_size, nullptr});
  const double wall = seconds_since(t0);

  fs::create_directories(cfg.outdir);
  save_checkpoint(run.params, (fs::path(cfg.outdir) / "checkpoint.bin").string());

  std::string csv = "epoch,train_mse,val_mse,lr\n";
  for (const EpochRecord& r : run.history) {
    csv += std::to_string(r.epoch) + "," + fmt(r.train_mse) + "," + fmt(r.val_mse) +
           "," + fmt(r.lr) + "\n";
  }
  write_file(fs::path(cfg.outdir) / "history.csv", csv);

  json manifest;
  manifest["command"] = "train";
  manifest["seed"] = cfg.train.seed;
  manifest["config_hash"] = config_hash(cfg);
  manifest["wall_clock_s"] = wall;
  manifest["epochs_run"] = run.history.size();
  manifest["best_epoch"] = run.best_epoch;
  manifest["best_val_mse"] = run.best_val_mse;
  manifest["test_mse"] = test.mse;
  manifest["test_mae"] = test.mae;
  manifest["dataset"] = cfg.dataset_path;
  manifest["config"] = serialize(cfg);
  write_file(fs::path(cfg.outdir) / "manifest.json", manifest.dump(2) + "\n");

  std::printf("trained %zu epochs (best %lld), val mse %s\n", run.history.size(),
              static_cast<long long>(run.best_epoch), fmt(run.best_val_mse).c_str());
  std::printf("test mse %s, test mae %s over %lld windows\n", fmt(test.mse).c_str(),
              fmt(test.mae).c_str(), static_cast<long long>(test.window_count));
  std::printf("artifacts in %s: checkpoint.bin history.csv manifest.json\n",
              cfg.outdir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string checkpoint;
  std::string dataset;
  std::string segment = "test";
  std::string outdir = "out";
  bool time_features = true;
  bool normalized = true;
  std::int64_t batch_size = 512;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const TiDEParams params = load_checkpoint(a.checkpoint);
  RunConfig rc;
  rc.dataset_path = a.dataset;
  rc.time_features = a.time_features;
  rc.normalized = a.normalized;
  if (rc.dataset_path.empty()) throw ConfigError("evaluate requires --dataset");
  const PanelBundle panel = load_panel(rc);
  const Segment segment = parse_segment(a.segment);

  const MetricsReport m = rolling_evaluate(params, panel.ds, panel.spec, segment,
                                           EvalOptions{a.batch_size, nullptr});
  const Index closed = rolling_window_count(panel.ds, panel.spec, segment,
                                            params.cfg.lookback, params.cfg.horizon);

  json out = metrics_json(m);
  out["segment"] = a.segment;
  out["window_count_closed_form"] = closed;
  fs::create_directories(a.outdir);
  write_file(fs::path(a.outdir) / "metrics.json", out.dump(2) + "\n");
  std::printf("%s\n", out.dump(2).c_str());

  if (closed != m.window_count) {
    std::printf("window count mismatch: evaluated %lld, closed form %lld\n",
                static_cast<long long>(m.window_count), static_cast<long long>(closed));
    return kExitCheckFailed;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::vector<std::int64_t> lookbacks = {192, 336, 720, 1440, 2880};
  std::int64_t batch = 8;
  std::int64_t series = 1;
  std::int64_t repeats = 20;
  std::int64_t warmup = 3;
  std::int64_t horizon = 96;
  std::int64_t hidden = 256;
  std::string dataset;
  std::string outdir = "out";
  std::uint64_t seed = 0;
};

WindowBatch synthetic_batch(const ModelConfig& cfg, Index rows, Index num_series,
                            Rng& rng) {
  WindowBatch b;
  b.lookback = Tensor({rows, cfg.lookback});
  b.target = Tensor({rows, cfg.horizon});
  b.covariates = Tensor({rows, cfg.lookback + cfg.horizon, cfg.covariate_dim});
  for (Index i = 0; i < b.lookback.numel(); ++i) b.lookback[i] = rng.normal();
  for (Index i = 0; i < b.target.numel(); ++i) b.target[i] = rng.normal();
  for (Index i = 0; i < b.covariates.numel(); ++i) b.covariates[i] = rng.normal();
  for (Index r = 0; r < rows; ++r) {
    b.series_index.push_back(static_cast<int>(r % num_series));
    b.anchor_t.push_back(cfg.lookback + r);
  }
  return b;
}

int cmd_bench(const BenchArgs& a) {
  if (a.repeats < 1 || a.warmup < 0 || a.batch < 1 || a.series < 1) {
    throw ConfigError("bench: repeats/batch/series must be positive");
  }
  ModelConfig m;
  m.horizon = a.horizon;
  m.covariate_dim = 8;
  m.temporal_width = 4;
  m.hidden_size = a.hidden;
  m.num_encoder_layers = 2;
  m.num_decoder_layers = 2;
  m.decoder_output_dim = 8;
  m.temporal_decoder_hidden = 128;
  m.dropout_level = 0.1;
  m.layer_norm = true;
  m.rev_in = true;

  // With a panel the batch is real windows and train_s covers one epoch of
  // it; without one the batch is synthetic noise and train_s is one step.
  PanelBundle panel;
  bool have_panel = false;
  if (!a.dataset.empty()) {
    RunConfig rc;
    rc.dataset_path = a.dataset;
    panel = load_panel(rc);
    have_panel = true;
  }

  std::string csv = "L,infer_us,train_s\n";
  std::vector<double> xs, infer_list;
  double sink = 0.0;

  for (const std::int64_t L : a.lookbacks) {
    m.lookback = L;
    const Index num_series = have_panel ? panel.ds.num_series() : a.series;
    const Index rows = a.batch * num_series;
    m.validate();

    WindowBatch batch;
    Index steps_per_epoch = 1;
    if (have_panel) {
      adapt_model_to_panel(m, panel.ds);
      const auto anchors = admissible_anchors(panel.spec, panel.ds.num_steps(),
                                              Segment::train, m.lookback, m.horizon);
      if (anchors.empty()) {
        throw ConfigError("bench: training segment admits no window at L = " +
                          std::to_string(L));
      }
      std::vector<int> series;
      std::vector<Index> anchor_ts;
      for (Index r = 0; r < rows; ++r) {
        series.push_back(static_cast<int>(r % panel.ds.num_series()));
        anchor_ts.push_back(anchors[static_cast<std::size_t>(r) % anchors.size()]);
      }
      batch = gather_windows(panel.ds, series, anchor_ts, m.lookback, m.horizon);
      const Index windows =
          panel.ds.num_series() * static_cast<Index>(anchors.size());
      steps_per_epoch = (windows + rows - 1) / rows;
    } else {
      Rng rng(derive_seed(a.seed, static_cast<std::uint64_t>(L)));
      batch = synthetic_batch(m, rows, num_series, rng);
    }

    TiDEParams params = TiDEParams::init(m, num_series, derive_seed(a.seed, 0xbe));

    for (Index i = 0; i < a.warmup; ++i) sink += predict(params, batch)[0];
    std::vector<double> infer_us;
    for (Index i = 0; i < a.repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor out = predict(params, batch);
      infer_us.push_back(seconds_since(t0) * 1e6);
      sink += out[0];
    }

    std::size_t tensor_count = 0;
    params.for_each_param([&](const std::string&, Tensor&) { ++tensor_count; });
    std::vector<AdamState> states(tensor_count);
    Rng drop_rng(derive_seed(a.seed, 0xd0));
    auto train_step = [&]() {
      Tape tape;
      std::vector<Var> leaves;
      params.for_each_param(
          [&](const std::string&, Tensor& t) { leaves.push_back(tape.leaf(t, true)); });
      const ModelVars vars = bind_param_vars(params, leaves);
      const Var pred = forward(tape, params, vars, batch, Mode::train, &drop_rng);
      const Var loss = mse_loss(tape, pred, batch.target);
      const Gradients grads = tape.backward(loss);
      std::size_t k = 0;
      params.for_each_param([&](const std::string&, Tensor& t) {
        adam_update(t, grads.get(leaves[k]), states[k], 1e-9, {});
        ++k;
      });
    };
    for (Index i = 0; i < a.warmup; ++i) train_step();
    std::vector<double> step_s;
    for (Index i = 0; i < a.repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      train_step();
      step_s.push_back(seconds_since(t0));
    }

    const double infer_med = median(infer_us);
    const double train_epoch =
        median(step_s) * static_cast<double>(steps_per_epoch);
    csv += std::to_string(L) + "," + fmt(infer_med) + "," + fmt(train_epoch) + "\n";
    xs.push_back(static_cast<double>(L));
    infer_list.push_back(infer_med);
    std::printf("L %5lld  infer %12s us  train %10s s\n", static_cast<long long>(L),
                fmt(infer_med).c_str(), fmt(train_epoch).c_str());
  }

  fs::create_directories(a.outdir);
  write_file(fs::path(a.outdir) / "timings.csv", csv);
  if (xs.size() >= 3) {
    const AffineFit fit = fit_affine(xs, infer_list);
    std::printf("inference vs L: intercept %s us, slope %s us/step, R^2 %s\n",
                fmt(fit.intercept).c_str(), fmt(fit.slope).c_str(),
                fmt(fit.r2).c_str());
  }
  if (sink == 42.0) std::printf("\n");  // keep the timed results observable
  return kExitOk;
}

// ---------------------------------------------------------------------------
// lds

struct LdsArgs {
  bool verify_decay = false;
  bool make_dataset = false;
  bool fit_linear = false;
  std::uint64_t seed = 0;
  std::string outdir = "out";
};

/// MSE over the fixed simulated example set (fully contained windows,
/// half-open anchors), matching the documented train/val/test counts.
double lds_examples_mse(const TiDEParams& params, const TimeSeriesDataset& ds,
                        const SplitSpec& spec, Segment segment) {
  const std::vector<Index> anchors =
      lds::lds_anchors(spec, ds.num_steps(), segment);
  double se = 0.0;
  Index counted = 0;
  std::vector<int> series;
  std::vector<Index> anchor_ts;
  auto flush = [&]() {
    if (series.empty()) return;
    const WindowBatch batch = gather_windows(ds, series, anchor_ts,
                                             params.cfg.lookback, params.cfg.horizon);
    const Tensor pred = predict(params, batch);
    for (Index i = 0; i < pred.numel(); ++i) {
      const double e = pred[i] - batch.target[i];
      se += e * e;
    }
    counted += pred.numel();
    series.clear();
    anchor_ts.clear();
  };
  for (Index i = 0; i < ds.num_series(); ++i) {
    for (const Index t : anchors) {
      series.push_back(static_cast<int>(i));
      anchor_ts.push_back(t);
      if (static_cast<Index>(series.size()) == 512) flush();
    }
  }
  flush();
  return se / static_cast<double>(counted);
}

int cmd_lds(const LdsArgs& a) {
  if (!a.verify_decay && !a.make_dataset && !a.fit_linear) {
    throw ConfigError("lds: pick at least one of --verify-decay, --make-dataset, "
                      "--fit-linear");
  }
  fs::create_directories(a.outdir);
  int rc = kExitOk;

  if (a.verify_decay) {
    const lds::LdsParams p = lds::sample_lds(derive_seed(a.seed, 0x5d));
    const lds::Rollout r = lds::rollout(p, 1200, derive_seed(a.seed, 0x11), false);
    std::vector<Index> ks;
    for (Index k = 10; k <= 150; k += 10) ks.push_back(k);
    const std::vector<double> devs = lds::decay_curve(p, r, ks);

    double xmax = 0.0;
    for (Index t = 0; t < r.steps(); ++t) {
      xmax = std::max(xmax, r.x.mat().row(t).norm());
    }
    const double scale =
        p.C.flat().norm() * p.B.flat().norm() * xmax / (1.0 - p.gamma);

    std::string csv = "k,deviation,bound\n";
    bool bound_ok = true;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double bound = scale * std::pow(p.gamma, static_cast<double>(ks[i]));
      if (devs[i] > bound + 1e-12) bound_ok = false;
      csv += std::to_string(ks[i]) + "," + fmt(devs[i]) + "," + fmt(bound) + "\n";
    }
    write_file(fs::path(a.outdir) / "decay.csv", csv);

    const lds::DecayFit fit = lds::fit_log_slope(ks, devs);
    const double expected = std::log(p.gamma);
    const bool slope_ok = std::abs(fit.slope - expected) < 0.1;

    json out;
    out["slope"] = fit.slope;
    out["intercept"] = fit.intercept;
    out["expected_slope"] = expected;
    out["slope_within_band"] = slope_ok;
    out["bound_satisfied"] = bound_ok;
    write_file(fs::path(a.outdir) / "decay.json", out.dump(2) + "\n");
    std::printf("decay slope %s (expected %s +- 0.1): %s; envelope: %s\n",
                fmt(fit.slope).c_str(), fmt(expected).c_str(),
                slope_ok ? "ok" : "OUT OF BAND", bound_ok ? "ok" : "VIOLATED");
    if (!slope_ok || !bound_ok) rc = kExitCheckFailed;
  }

  if (a.make_dataset) {
    const lds::LdsDataset d = lds::make_lds_dataset(a.seed);
    save_csv(d.dataset, (fs::path(a.outdir) / "lds_values.csv").string());
    save_covariates_csv(d.dataset,
                        (fs::path(a.outdir) / "lds_covariates.csv").string());
    json out;
    out["train_examples"] = d.train_examples;
    out["val_examples"] = d.val_examples;
    out["test_examples"] = d.test_examples;
    out["num_series"] = d.dataset.num_series();
    out["num_steps"] = d.dataset.num_steps();
    write_file(fs::path(a.outdir) / "lds_counts.json", out.dump(2) + "\n");
    std::printf("simulated panel: %lld series x %lld steps; examples "
                "train/val/test = %lld/%lld/%lld\n",
                static_cast<long long>(d.dataset.num_series()),
                static_cast<long long>(d.dataset.num_steps()),
                static_cast<long long>(d.train_examples),
                static_cast<long long>(d.val_examples),
                static_cast<long long>(d.test_examples));
  }

  if (a.fit_linear) {
    lds::LdsDataset d = lds::make_lds_dataset(a.seed);
    // The linear subclass ignores covariates; drop them so the model and the
    // panel agree, and standardize on training-period statistics.
    d.dataset.covariates = Tensor();
    const Scaler scaler = fit_scaler(d.dataset, d.spec);
    const TimeSeriesDataset panel = apply_scaler(d.dataset, scaler);

    ModelConfig m;
    m.variant = Variant::linear_only;
    m.lookback = lds::kLdsLookback;
    m.horizon = lds::kLdsHorizon;
    m.covariate_dim = 0;
    m.temporal_width = 0;
    m.dropout_level = 0.0;
    m.layer_norm = false;
    m.rev_in = false;

    TrainConfig t;
    t.max_epochs = 300;
    t.patience = 30;
    t.batch_size = 512;
    t.max_lr = 1e-4;
    t.seed = a.seed;

    // Fit the affine map from the zero map, the natural starting point for a
    // linear regression: validation-snapshot early stopping then selects a
    // small-norm solution, which generalizes far better here than descending
    // from a random dense map.
    TiDEParams start = TiDEParams::init(m, panel.num_series(),
                                        derive_seed(t.seed, 0x171d));
    start.global_W.set_zero();
    start.global_b.set_zero();

    const TrainResult run = train_loop(m, t, panel, d.spec, &start);
    const double test_mse = lds_examples_mse(run.params, panel, d.spec, Segment::test);
    const bool in_band = test_mse >= 0.36 && test_mse <= 0.66;

    json out;
    out["test_mse"] = test_mse;
    out["band_low"] = 0.36;
    out["band_high"] = 0.66;
    out["in_band"] = in_band;
    out["epochs_run"] = run.history.size();
    out["best_val_mse"] = run.best_val_mse;
    write_file(fs::path(a.outdir) / "fit_linear.json", out.dump(2) + "\n");
    std::printf("linear fit on the simulated panel: test mse %s (band [0.36, "
                "0.66]): %s\n",
                fmt(test_mse).c_str(), in_band ? "ok" : "OUT OF BAND");
    if (!in_band) rc = kExitCheckFailed;
  }
  return rc;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  double tolerance = 1e-4;
  bool corrupt = false;
};

ModelConfig gradcheck_config() {
  ModelConfig cfg;
  cfg.lookback = 6;
  cfg.horizon = 3;
  cfg.covariate_dim = 2;
  cfg.temporal_width = 1;
  cfg.hidden_size = 5;
  cfg.num_encoder_layers = 1;
  cfg.num_decoder_layers = 1;
  cfg.decoder_output_dim = 2;
  cfg.temporal_decoder_hidden = 4;
  cfg.dropout_level = 0.25;
  cfg.layer_norm = false;
  cfg.rev_in = true;
  return cfg;
}

WindowBatch gradcheck_batch(const ModelConfig& cfg) {
  Rng rng(13);
  return synthetic_batch(cfg, 2, 2, rng);
}

/// Parameters jittered until every ReLU pre-activation sits at least 1e-3
/// from its kink, so the finite-difference probes cannot flip activations.
TiDEParams gradcheck_params(const ModelConfig& cfg, const WindowBatch& batch) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    TiDEParams cand = TiDEParams::init(cfg, 2, seed);
    Rng jitter(derive_seed(seed, 0x71));
    cand.for_each_param([&](const std::string&, Tensor& t) {
      for (Index i = 0; i < t.numel(); ++i) t[i] += jitter.uniform(-0.3, 0.3);
    });
    Tape probe;
    const ModelVars vars = register_params(probe, cand, false);
    Rng drop(777);
    forward(probe, cand, vars, batch, Mode::train, &drop);
    if (probe.min_abs_relu_input() >= 1e-3) return cand;
  }
  throw DivergenceError("gradcheck: no jitter seed kept ReLU inputs off their kinks");
}

/// Finite-difference check of the full-model loss restricted to the
/// parameters whose names start with `prefix` (empty = all parameters).
GradcheckReport check_param_group(const ModelConfig& cfg, const std::string& prefix) {
  const WindowBatch batch = gradcheck_batch(cfg);
  const TiDEParams params = gradcheck_params(cfg, batch);

  std::vector<std::string> names;
  params.for_each_param(
      [&](const std::string& name, const Tensor&) { names.push_back(name); });

  std::vector<Tensor> inputs;
  std::vector<bool> in_group;
  params.for_each_param([&](const std::string& name, const Tensor& t) {
    const bool pick = prefix.empty() || name.rfind(prefix, 0) == 0;
    in_group.push_back(pick);
    if (pick) inputs.push_back(t);
  });
  if (inputs.empty()) {
    throw ConfigError("gradcheck: no parameters match '" + prefix + "'");
  }

  const GradcheckFn fn = [&](Tape& t, const std::vector<Var>& in) {
    std::vector<Var> leaves;
    std::size_t next = 0;
    std::size_t idx = 0;
    params.for_each_param([&](const std::string&, const Tensor& tensor) {
      if (in_group[idx]) {
        leaves.push_back(in[next++]);
      } else {
        leaves.push_back(t.leaf(tensor, false));
      }
      ++idx;
    });
    const ModelVars vars = bind_param_vars(params, leaves);
    Rng drop(777);  // rebuilt per call: identical dropout masks for every probe
    const Var pred = forward(t, params, vars, batch, Mode::train, &drop);
    return mse_loss(t, pred, batch.target);
  };
  return finite_diff_gradcheck(fn, inputs);
}

int cmd_gradcheck(const GradcheckArgs& a) {
  if (!(a.tolerance > 0.0)) throw ConfigError("gradcheck: tolerance must be positive");
  struct Row {
    std::string name;
    GradcheckReport report;
  };
  std::vector<Row> rows;

  const ModelConfig base = gradcheck_config();
  for (const char* prefix : {"feature_projection.", "encoder.", "decoder.",
                             "temporal_decoder.", "global_residual.", "revin."}) {
    std::string name(prefix);
    name.pop_back();
    rows.push_back({name, check_param_group(base, prefix)});
  }
  rows.push_back({"full_model", check_param_group(base, "")});

  ModelConfig with_ln = base;
  with_ln.layer_norm = true;
  with_ln.dropout_level = 0.0;
  rows.push_back({"full_model_layer_norm", check_param_group(with_ln, "")});

  if (a.corrupt) {
    // Negative control: a loss that reads a detached copy of its input has
    // analytic gradient zero while the numeric probe sees the real slope.
    Rng rng(5);
    Tensor x({2, 3});
    for (Index i = 0; i < x.numel(); ++i) x[i] = 1.0 + rng.uniform();
    const GradcheckFn broken = [&](Tape& t, const std::vector<Var>& in) {
      const Var detached = t.leaf(t.value(in[0]), false);
      return mse_loss(t, detached, Tensor({2, 3}));
    };
    rows.push_back({"corrupt_probe", finite_diff_gradcheck(broken, {x})});
  }

  bool all_ok = true;
  for (const Row& row : rows) {
    const bool ok = row.report.max_rel_err < a.tolerance;
    all_ok = all_ok && ok;
    std::printf("%-24s max_rel_err %.3e  (%s)  %s\n", row.name.c_str(),
                row.report.max_rel_err,
                row.report.worst_input.empty() ? "-" : row.report.worst_input.c_str(),
                ok ? "PASS" : "FAIL");
  }
  return all_ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// ablate

int cmd_ablate(RunArgs& args, const std::string& variant_name_str) {
  RunConfig cfg = resolve_config(args);
  if (cfg.dataset_path.empty()) {
    throw ConfigError("ablate requires a dataset (--dataset or 'dataset = path')");
  }
  const Variant variant = variant_from_name(variant_name_str);
  PanelBundle panel = load_panel(cfg);
  adapt_model_to_panel(cfg.model, panel.ds);
  cfg.train.validate();

  const AblationReport report =
      ablate(variant, cfg.model, cfg.train, panel.ds, panel.spec, Segment::test,
             EvalOptions{cfg.train.batch_size, nullptr});

  json out;
  out["variant"] = variant_name(report.variant);
  out["full"] = metrics_json(report.full);
  out["ablated"] = metrics_json(report.ablated);
  out["mse_gap"] = report.ablated.mse - report.full.mse;
  fs::create_directories(cfg.outdir);
  write_file(fs::path(cfg.outdir) / "ablation.json", out.dump(2) + "\n");
  std::printf("full mse %s vs %s mse %s (gap %s)\n", fmt(report.full.mse).c_str(),
              variant_name(report.variant).c_str(), fmt(report.ablated.mse).c_str(),
              fmt(report.ablated.mse - report.full.mse).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tide: dense encoder-decoder forecasting toolkit"};
  app.require_subcommand(1);

  RunArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "fit a model and write its artifacts");
  add_run_options(train_cmd, train_args);

  EvaluateArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "rolling metrics for a saved checkpoint");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.bin path")
      ->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "panel CSV path")->required();
  eval_cmd->add_option("--segment", eval_args.segment, "train, val, or test");
  eval_cmd->add_option("--outdir", eval_args.outdir, "output directory");
  eval_cmd->add_option("--batch-size", eval_args.batch_size, "evaluation batch rows");
  eval_cmd->add_option("--time-features", eval_args.time_features,
                       "append calendar covariates (default true)");
  eval_cmd->add_option("--normalized", eval_args.normalized,
                       "standardize on training-period stats (default true)");

  BenchArgs bench_args;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "inference and training-step timings across "
                                  "look-back lengths");
  bench_cmd->add_option("--lookbacks", bench_args.lookbacks, "look-back sweep")
      ->delimiter(',');
  bench_cmd->add_option("--batch", bench_args.batch, "windows per series in a batch");
  bench_cmd->add_option("--series", bench_args.series,
                        "synthetic series count (a real panel overrides it)");
  bench_cmd->add_option("--repeats", bench_args.repeats, "timed repetitions");
  bench_cmd->add_option("--warmup", bench_args.warmup, "untimed warmup batches");
  bench_cmd->add_option("--horizon", bench_args.horizon, "forecast horizon");
  bench_cmd->add_option("--hidden", bench_args.hidden, "encoder/decoder width");
  bench_cmd->add_option("--dataset", bench_args.dataset, "optional panel CSV");
  bench_cmd->add_option("--outdir", bench_args.outdir, "output directory");
  bench_cmd->add_option("--seed", bench_args.seed, "synthetic data seed");

  LdsArgs lds_args;
  CLI::App* lds_cmd =
      app.add_subcommand("lds", "linear-dynamical-system experiments");
  lds_cmd->add_flag("--verify-decay", lds_args.verify_decay,
                    "fit the truncation-deviation decay rate");
  lds_cmd->add_flag("--make-dataset", lds_args.make_dataset,
                    "write the simulated panel and its example counts");
  lds_cmd->add_flag("--fit-linear", lds_args.fit_linear,
                    "train the affine subclass on the simulated panel");
  lds_cmd->add_option("--seed", lds_args.seed, "system/noise seed");
  lds_cmd->add_option("--outdir", lds_args.outdir, "output directory");

  GradcheckArgs grad_args;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "finite-difference verification of every block");
  grad_cmd->add_option("--tolerance", grad_args.tolerance,
                       "max relative error allowed (default 1e-4)");
  grad_cmd->add_flag("--corrupt", grad_args.corrupt,
                     "add a dropped-gradient probe that must fail");

  RunArgs ablate_args;
  std::string ablate_variant;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "train the full model against one ablated variant");
  add_run_options(ablate_cmd, ablate_args);
  ablate_cmd
      ->add_option("--variant", ablate_variant,
                   "no_temporal_decoder, no_residuals, or linear_only")
      ->required();

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args);
    if (lds_cmd->parsed()) return cmd_lds(lds_args);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_args);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, ablate_variant);
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
