// End-to-end acceptance gates. Each check prints one PASS/FAIL line and the
// process exits with the number of failed gates. Gates 1 and 8 drive the
// installed CLI binary; the rest run in process. Gates 9 and 10 are defined
// on benchmark CSVs that are not distributed with the repository, so they run
// on deterministic synthetic panels that isolate the same architectural
// claims; their lines say so.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tide/batch.hpp"
#include "tide/data.hpp"
#include "tide/eval.hpp"
#include "tide/lds.hpp"
#include "tide/model.hpp"
#include "tide/rng.hpp"
#include "tide/tensor.hpp"

using namespace tide;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Gate {
  std::string name;
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(TIDE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "tide_acceptance";
  fs::create_directories(p);
  return p;
}

std::int64_t hourly_start() { return unix_from_civil(2021, 1, 1); }

void stamp_hourly(TimeSeriesDataset& ds, Index T) {
  ds.timestamps.resize(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    ds.timestamps[static_cast<std::size_t>(t)] = hourly_start() + 3600 * t;
  }
  ds.frequency = Frequency::hourly;
}

// ---------------------------------------------------------------------------
// gate 1: every block and the full model pass finite-difference checks

Gate gate_gradients() {
  Gate g{"gradient suite (CLI gradcheck, tol 1e-4)", false, ""};
  const fs::path log = scratch_dir() / "gradcheck.log";
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = run_cli("gradcheck --tolerance 1e-4", log);
  const double wall = seconds_since(t0);

  double worst = 0.0;
  std::istringstream lines(slurp(log));
  std::string line;
  while (std::getline(lines, line)) {
    const auto pos = line.find("max_rel_err ");
    if (pos == std::string::npos) continue;
    worst = std::max(worst, std::atof(line.c_str() + pos + 12));
  }
  g.pass = rc == 0 && wall < 60.0;
  g.detail = fmt("worst rel err %.2e, %.1fs", worst, wall);
  return g;
}

// ---------------------------------------------------------------------------
// gate 2: zeroing all non-global-residual paths leaves the affine map

Gate gate_linear_subclass() {
  Gate g{"linear subclass is exactly the affine map", false, ""};
  double worst = 0.0;
  for (const bool ln : {false, true}) {
    ModelConfig cfg;
    cfg.lookback = 12;
    cfg.horizon = 5;
    cfg.covariate_dim = 3;
    cfg.temporal_width = 2;
    cfg.hidden_size = 10;
    cfg.num_encoder_layers = 2;
    cfg.num_decoder_layers = 2;
    cfg.decoder_output_dim = 3;
    cfg.temporal_decoder_hidden = 6;
    cfg.dropout_level = 0.3;  // inert outside training mode
    cfg.layer_norm = ln;
    cfg.rev_in = false;

    TiDEParams params = TiDEParams::init(cfg, 1, 99);
    Rng rng(17);
    params.for_each_param([&](const std::string& name, Tensor& t) {
      if (name.rfind("global_residual.", 0) == 0) {
        for (Index i = 0; i < t.numel(); ++i) t[i] = rng.normal();
      } else {
        t.set_zero();
      }
    });

    const Index B = 4;
    WindowBatch batch;
    batch.lookback = Tensor({B, cfg.lookback});
    batch.target = Tensor({B, cfg.horizon});
    batch.covariates =
        Tensor({B, cfg.lookback + cfg.horizon, cfg.covariate_dim});
    for (Index i = 0; i < batch.lookback.numel(); ++i) {
      batch.lookback[i] = rng.normal();
    }
    for (Index i = 0; i < batch.covariates.numel(); ++i) {
      batch.covariates[i] = rng.normal();
    }
    batch.series_index.assign(static_cast<std::size_t>(B), 0);
    batch.anchor_t.assign(static_cast<std::size_t>(B), cfg.lookback);

    const Tensor pred = predict(params, batch);
    for (Index b = 0; b < B; ++b) {
      for (Index j = 0; j < cfg.horizon; ++j) {
        double want = params.global_b[j];
        for (Index l = 0; l < cfg.lookback; ++l) {
          want += batch.lookback.at(b, l) * params.global_W.at(l, j);
        }
        worst = std::max(worst, std::abs(pred.at(b, j) - want));
      }
    }
  }
  g.pass = worst < 1e-12;
  g.detail = fmt("max |forward - affine| = %.2e (layer norm off and on)", worst);
  return g;
}

// ---------------------------------------------------------------------------
// gate 3: instance-normalization round trip, calendar features, scaler hygiene

Gate gate_normalization_features() {
  Gate g{"revin round trip, calendar features, scaler hygiene", false, ""};

  // Identity linear model under instance normalization returns the window.
  ModelConfig cfg;
  cfg.variant = Variant::linear_only;
  cfg.lookback = 16;
  cfg.horizon = 16;
  cfg.covariate_dim = 0;
  cfg.temporal_width = 0;
  cfg.dropout_level = 0.0;
  cfg.layer_norm = false;
  cfg.rev_in = true;
  TiDEParams params = TiDEParams::init(cfg, 1, 5);
  params.global_W.set_zero();
  for (Index i = 0; i < cfg.lookback; ++i) params.global_W.at(i, i) = 1.0;
  params.global_b.set_zero();

  Rng rng(31);
  const Index B = 6;
  WindowBatch batch;
  batch.lookback = Tensor({B, cfg.lookback});
  batch.target = Tensor({B, cfg.horizon});
  for (Index b = 0; b < B; ++b) {
    const double shift = 5.0 * rng.normal();
    const double scale = 1.0 + std::abs(rng.normal());
    for (Index l = 0; l < cfg.lookback; ++l) {
      batch.lookback.at(b, l) = shift + scale * rng.normal();
    }
  }
  batch.series_index.assign(static_cast<std::size_t>(B), 0);
  batch.anchor_t.assign(static_cast<std::size_t>(B), cfg.lookback);

  const Tensor pred = predict(params, batch);
  double revin_err = 0.0;
  for (Index i = 0; i < pred.numel(); ++i) {
    revin_err = std::max(revin_err, std::abs(pred[i] - batch.lookback[i]));
  }

  // Calendar features live in [-0.5, 0.5] with exact endpoint values.
  std::vector<std::int64_t> stamps;
  for (int h = 0; h < 48; ++h) stamps.push_back(hourly_start() + 3600 * h);
  const Tensor feats = time_features(stamps);
  bool feats_ok = true;
  for (Index i = 0; i < feats.numel(); ++i) {
    feats_ok = feats_ok && feats[i] >= -0.5 && feats[i] <= 0.5;
  }
  // Column 1 is hour-of-day: hour 0 -> -0.5 and hour 23 -> +0.5 exactly.
  feats_ok = feats_ok && feats.at(0, 1) == -0.5 && feats.at(23, 1) == 0.5;

  // Scaler statistics depend only on the training period, bit for bit.
  TimeSeriesDataset a;
  a.values = Tensor({2, 50});
  Rng noise(77);
  for (Index i = 0; i < a.values.numel(); ++i) a.values[i] = noise.normal();
  stamp_hourly(a, 50);
  a.series_names = {"u", "v"};
  const SplitSpec spec = split(a);
  TimeSeriesDataset b = a;
  for (Index i = 0; i < b.num_series(); ++i) {
    for (Index t = spec.train_end; t < b.num_steps(); ++t) {
      b.values.at(i, t) += 1000.0;
    }
  }
  const Scaler sa = fit_scaler(a, spec);
  const Scaler sb = fit_scaler(b, spec);
  bool scaler_ok = true;
  for (Index i = 0; i < sa.mean.numel(); ++i) {
    scaler_ok = scaler_ok && sa.mean[i] == sb.mean[i] && sa.std[i] == sb.std[i];
  }
  const TimeSeriesDataset na = apply_scaler(a, sa);
  const TimeSeriesDataset nb = apply_scaler(b, sb);
  for (Index i = 0; i < na.num_series(); ++i) {
    for (Index t = 0; t < spec.train_end; ++t) {
      scaler_ok = scaler_ok && na.values.at(i, t) == nb.values.at(i, t);
    }
  }

  g.pass = revin_err < 1e-10 && feats_ok && scaler_ok;
  g.detail = fmt("revin round-trip err %.2e", revin_err) +
             (feats_ok ? ", features bounded with exact endpoints" : ", FEATURES BAD") +
             (scaler_ok ? ", scaler leak-free" : ", SCALER LEAKS");
  return g;
}

// ---------------------------------------------------------------------------
// gate 4: window counts match the closed forms

Gate gate_window_counts() {
  Gate g{"window counts match the closed forms", false, ""};
  TimeSeriesDataset ds;
  const Index N = 3, T = 40, L = 8, H = 3;
  ds.values = Tensor({N, T});
  Rng rng(3);
  for (Index i = 0; i < ds.values.numel(); ++i) ds.values[i] = rng.normal();
  stamp_hourly(ds, T);
  ds.series_names = {"a", "b", "c"};
  const SplitSpec spec = split(ds);  // 28 / 32 / 40

  BatchIterator it = make_batches(ds, spec, Segment::train, L, H, 16, Rng(1));
  const Index train_closed = N * (spec.train_end - L - H + 1);
  const bool train_ok = it.window_count() == train_closed;

  const Index val_closed =
      N * ((spec.val_end - H) - std::max(spec.train_end, L) + 1);
  const Index test_closed = N * ((T - H) - std::max(spec.val_end, L) + 1);
  const bool rolling_ok =
      rolling_window_count(ds, spec, Segment::val, L, H) == val_closed &&
      rolling_window_count(ds, spec, Segment::test, L, H) == test_closed;

  g.pass = train_ok && rolling_ok;
  g.detail = "train " + std::to_string(it.window_count()) + "/" +
             std::to_string(train_closed) + ", val " +
             std::to_string(rolling_window_count(ds, spec, Segment::val, L, H)) +
             "/" + std::to_string(val_closed) + ", test " +
             std::to_string(rolling_window_count(ds, spec, Segment::test, L, H)) +
             "/" + std::to_string(test_closed);
  return g;
}

// ---------------------------------------------------------------------------
// gate 5: untruncated autoregressive expansion equals the exact predictor

Gate gate_ar_exactness() {
  Gate g{"untruncated AR expansion equals the exact predictor", false, ""};
  double worst = 0.0;
  for (const std::uint64_t seed : {1, 2, 3}) {
    const lds::LdsParams p = lds::sample_lds(seed);
    const lds::Rollout r = lds::rollout(p, 60, seed + 10, false);
    for (Index t = 2; t <= r.steps(); ++t) {
      const Index k = t - 1;
      const lds::ArCoeffs m = lds::build_m_theta(p, k);
      const Tensor window = lds::ar_window(r.x, r.y, t, k);
      const Tensor got = lds::ar_predict(m, window);
      Tensor x_hist({t, p.input_dim()});
      x_hist.mat() = r.x.mat().topRows(t);
      Tensor y_prev({p.output_dim()});
      for (Index j = 0; j < p.output_dim(); ++j) y_prev[j] = r.y.at(t - 2, j);
      const Tensor want = lds::lds_predictor(p, x_hist, y_prev);
      for (Index j = 0; j < got.numel(); ++j) {
        worst = std::max(worst, std::abs(got[j] - want[j]));
      }
    }
  }
  g.pass = worst < 1e-12;
  g.detail = fmt("max |ar - exact| = %.2e over 3 systems", worst);
  return g;
}

// ---------------------------------------------------------------------------
// gate 6: truncation error decays at rate gamma, under the proof envelope

Gate gate_decay() {
  Gate g{"truncation error decays at rate gamma", false, ""};
  const auto t0 = std::chrono::steady_clock::now();
  const lds::LdsParams p = lds::sample_lds(42);
  const lds::Rollout r = lds::rollout(p, 1200, 43, false);
  std::vector<Index> ks;
  for (Index k = 10; k <= 150; k += 10) ks.push_back(k);
  const std::vector<double> devs = lds::decay_curve(p, r, ks);

  double xmax = 0.0;
  for (Index t = 0; t < r.steps(); ++t) {
    xmax = std::max(xmax, r.x.mat().row(t).norm());
  }
  const double c = p.C.flat().norm() * p.B.flat().norm() * xmax / p.gamma;
  bool envelope_ok = true;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double bound =
        c * std::pow(p.gamma, static_cast<double>(ks[i] + 2)) / (1.0 - p.gamma);
    envelope_ok = envelope_ok && devs[i] <= bound + 1e-12;
  }

  const lds::DecayFit fit = lds::fit_log_slope(ks, devs);
  const double expected = std::log(p.gamma);
  const double wall = seconds_since(t0);
  g.pass = std::abs(fit.slope - expected) < 0.1 && envelope_ok && wall < 60.0;
  g.detail = fmt("slope %.4f vs ln(0.95) = %.4f", fit.slope, expected) +
             (envelope_ok ? ", envelope held" : ", envelope VIOLATED") +
             fmt(", %.1fs", wall);
  return g;
}

// ---------------------------------------------------------------------------
// gate 7: coefficient norm bound

Gate gate_norm_bound() {
  Gate g{"AR coefficient norm bounded by 4 sqrt(sum gamma^i)", false, ""};
  bool ok = true;
  double worst_ratio = 0.0;
  for (const std::uint64_t seed : {1, 2}) {
    const lds::LdsParams p = lds::sample_lds(seed);
    for (const Index k : {5, 20, 80}) {
      const lds::ArCoeffs m = lds::build_m_theta(p, k);
      const double norm = m.M.flat().norm();
      double geo = 0.0;
      for (Index i = 0; i <= k; ++i) {
        geo += std::pow(p.gamma, static_cast<double>(i));
      }
      const double bound = 4.0 * std::sqrt(geo);
      ok = ok && norm <= bound;
      worst_ratio = std::max(worst_ratio, norm / bound);
    }
  }
  g.pass = ok;
  g.detail = fmt("max norm/bound ratio %.3f", worst_ratio);
  return g;
}

// ---------------------------------------------------------------------------
// gate 8: linear fit on the simulated panel lands in the published band

Gate gate_lds_linear_fit() {
  Gate g{"simulated-panel linear fit in [0.36, 0.66] (CLI)", false, ""};
  const fs::path out = scratch_dir() / "fit_linear";
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = run_cli("lds --fit-linear --outdir " + out.string(),
                         scratch_dir() / "fit_linear.log");
  const double wall = seconds_since(t0);
  double mse = -1.0;
  bool in_band = false;
  const fs::path report = out / "fit_linear.json";
  if (fs::exists(report)) {
    const json j = json::parse(slurp(report));
    mse = j.value("test_mse", -1.0);
    in_band = j.value("in_band", false);
  }
  g.pass = rc == 0 && in_band;
  g.detail = fmt("test mse %.4f, %.0fs", mse, wall);
  return g;
}

// ---------------------------------------------------------------------------
// gate 9: the full model strictly beats the pure-linear subclass

Gate gate_beats_linear() {
  Gate g{"full model beats the linear subclass (synthetic fallback)", false, ""};
  TimeSeriesDataset raw;
  const Index T = 3000;
  raw.values = Tensor({1, T});
  Rng rng(11);
  double z = 0.2 + 0.6 * rng.uniform();
  for (Index t = 0; t < T; ++t) {
    raw.values.at(0, t) = z;
    z = 3.8 * z * (1.0 - z);  // chaotic quadratic map: linearly unpredictable
  }
  stamp_hourly(raw, T);
  raw.series_names = {"logistic"};
  const SplitSpec spec = split(raw);
  const Scaler sc = fit_scaler(raw, spec);
  const TimeSeriesDataset ds = apply_scaler(raw, sc);

  ModelConfig full;
  full.variant = Variant::full;
  full.lookback = 16;
  full.horizon = 4;
  full.covariate_dim = 0;
  full.temporal_width = 0;
  full.hidden_size = 64;
  full.num_encoder_layers = 2;
  full.num_decoder_layers = 2;
  full.decoder_output_dim = 8;
  full.temporal_decoder_hidden = 16;
  full.dropout_level = 0.0;
  full.layer_norm = false;
  full.rev_in = false;
  ModelConfig lin = full;
  lin.variant = Variant::linear_only;

  TrainConfig t;
  t.max_epochs = 30;
  t.patience = 30;
  t.batch_size = 128;
  t.max_lr = 1e-3;
  t.seed = 0;

  const TrainResult rf = train_loop(full, t, ds, spec);
  const TrainResult rl = train_loop(lin, t, ds, spec);
  const double mse_full =
      rolling_evaluate(rf.params, ds, spec, Segment::test).mse;
  const double mse_lin =
      rolling_evaluate(rl.params, ds, spec, Segment::test).mse;
  g.pass = mse_full < mse_lin;
  g.detail = fmt("full %.4f < linear %.4f on a chaotic series", mse_full, mse_lin);
  return g;
}

// ---------------------------------------------------------------------------
// gate 10: residual connections beat their ablation at matched budget

Gate gate_residual_ordering() {
  Gate g{"residual ablation ordering (synthetic fallback)", false, ""};
  const Index N = 6, T = 800, period = 90;
  TimeSeriesDataset raw;
  raw.values = Tensor({N, T});
  Rng rng(5);
  std::vector<double> pattern(static_cast<std::size_t>(N * period));
  for (double& v : pattern) v = rng.normal();
  for (Index i = 0; i < N; ++i) {
    for (Index t = 0; t < T; ++t) {
      raw.values.at(i, t) =
          pattern[static_cast<std::size_t>(i * period + (t % period))] +
          0.05 * rng.normal();
    }
  }
  stamp_hourly(raw, T);
  for (Index i = 0; i < N; ++i) raw.series_names.push_back("s" + std::to_string(i));
  const SplitSpec spec = split(raw);
  const Scaler sc = fit_scaler(raw, spec);
  const TimeSeriesDataset ds = apply_scaler(raw, sc);

  // The horizon needs a rank-48 copy map; the MLP trunk is 32 wide, so only
  // the affine residual path can express it.
  ModelConfig cfg;
  cfg.variant = Variant::full;
  cfg.lookback = 96;
  cfg.horizon = 48;
  cfg.covariate_dim = 0;
  cfg.temporal_width = 0;
  cfg.hidden_size = 32;
  cfg.num_encoder_layers = 2;
  cfg.num_decoder_layers = 2;
  cfg.decoder_output_dim = 4;
  cfg.temporal_decoder_hidden = 16;
  cfg.dropout_level = 0.0;
  cfg.layer_norm = false;
  cfg.rev_in = false;

  TrainConfig t;
  t.max_epochs = 25;
  t.patience = 25;
  t.batch_size = 128;
  t.max_lr = 1e-3;
  t.seed = 0;

  const AblationReport rep = ablate(Variant::no_residuals, cfg, t, ds, spec,
                                    Segment::test, EvalOptions{});
  g.pass = rep.full.mse < rep.ablated.mse;
  g.detail = fmt("full %.4f < no residuals %.4f", rep.full.mse, rep.ablated.mse);
  return g;
}

// ---------------------------------------------------------------------------
// gate 11: temporal decoder helps around injected events for >= 4 of 5 seeds

Gate gate_event_ordering() {
  Gate g{"temporal-decoder event ordering, >= 4 of 5 seeds", false, ""};
  const Index N = 8, T = 1200;
  TimeSeriesDataset base;
  base.values = Tensor({N, T});
  Rng rng(7);
  for (Index i = 0; i < N; ++i) {
    const double phase = 0.7 * static_cast<double>(i);
    for (Index t = 0; t < T; ++t) {
      base.values.at(i, t) = 2.0 +
                             std::sin(0.26 * static_cast<double>(t) + phase) +
                             0.05 * rng.normal();
    }
  }
  stamp_hourly(base, T);
  for (Index i = 0; i < N; ++i) base.series_names.push_back("s" + std::to_string(i));

  Rng ev_rng(99);
  const InjectResult inj = inject_events(base, ev_rng);
  const SplitSpec spec = split(inj.dataset);
  const Scaler sc = fit_scaler(inj.dataset, spec);
  const TimeSeriesDataset ds = apply_scaler(inj.dataset, sc);
  const std::vector<std::uint8_t> mask =
      event_adjacent_mask(inj.events, ds.num_steps(), 24);

  ModelConfig cfg;
  cfg.variant = Variant::full;
  cfg.lookback = 48;
  cfg.horizon = 24;
  cfg.covariate_dim = ds.covariate_dim();
  cfg.temporal_width = 4;
  cfg.hidden_size = 32;
  cfg.num_encoder_layers = 2;
  cfg.num_decoder_layers = 2;
  cfg.decoder_output_dim = 8;
  cfg.temporal_decoder_hidden = 32;
  cfg.dropout_level = 0.0;
  cfg.layer_norm = false;
  cfg.rev_in = false;

  EvalOptions opts;
  opts.step_mask = &mask;

  int wins = 0;
  double gap = 0.0;
  for (const std::uint64_t seed : {0, 1, 2, 3, 4}) {
    TrainConfig t;
    t.max_epochs = 1;
    t.patience = 1;
    t.batch_size = 64;
    t.max_lr = 3e-3;
    t.seed = seed;
    const AblationReport rep = ablate(Variant::no_temporal_decoder, cfg, t, ds,
                                      spec, Segment::test, opts);
    wins += rep.full.mse < rep.ablated.mse;
    gap += rep.ablated.mse - rep.full.mse;
  }
  g.pass = wins >= 4;
  g.detail = std::to_string(wins) + "/5 seeds" +
             fmt(", mean event-step mse gap %+.4f", gap / 5.0);
  return g;
}

// ---------------------------------------------------------------------------
// gate 12: inference time is affine in the look-back length

Gate gate_timing() {
  Gate g{"inference time affine in look-back (R^2 > 0.9)", false, ""};
  const std::vector<Index> lookbacks = {192, 336, 720, 1440, 2880};
  const Index H = 96, rows = 8, r = 8;
  std::vector<double> medians;
  bool all_finite = true;

  for (const Index L : lookbacks) {
    ModelConfig cfg;
    cfg.lookback = L;
    cfg.horizon = H;
    cfg.covariate_dim = r;
    cfg.temporal_width = 4;
    cfg.hidden_size = 256;
    cfg.num_encoder_layers = 2;
    cfg.num_decoder_layers = 2;
    cfg.decoder_output_dim = 8;
    cfg.temporal_decoder_hidden = 128;
    cfg.dropout_level = 0.1;
    cfg.layer_norm = true;
    cfg.rev_in = true;
    const TiDEParams params = TiDEParams::init(cfg, 1, 1);

    Rng rng(static_cast<std::uint64_t>(L));
    WindowBatch batch;
    batch.lookback = Tensor({rows, L});
    batch.target = Tensor({rows, H});
    batch.covariates = Tensor({rows, L + H, r});
    for (Index i = 0; i < batch.lookback.numel(); ++i) {
      batch.lookback[i] = rng.normal();
    }
    for (Index i = 0; i < batch.covariates.numel(); ++i) {
      batch.covariates[i] = rng.normal();
    }
    batch.series_index.assign(static_cast<std::size_t>(rows), 0);
    batch.anchor_t.assign(static_cast<std::size_t>(rows), L);

    double sink = 0.0;
    for (int i = 0; i < 3; ++i) sink += predict(params, batch)[0];
    std::vector<double> times;
    for (int i = 0; i < 20; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor pred = predict(params, batch);
      times.push_back(seconds_since(t0) * 1e6);
      sink += pred[0];
      all_finite = all_finite && pred.all_finite();
    }
    std::sort(times.begin(), times.end());
    medians.push_back(times[times.size() / 2]);
    if (!std::isfinite(sink)) all_finite = false;
  }

  // Least-squares affine fit of median time against L.
  const std::size_t n = lookbacks.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(lookbacks[i]);
    sx += x;
    sy += medians[i];
    sxx += x * x;
    sxy += x * medians[i];
  }
  const double denom = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fitv = intercept + slope * static_cast<double>(lookbacks[i]);
    ss_res += (medians[i] - fitv) * (medians[i] - fitv);
    ss_tot += (medians[i] - sy / n) * (medians[i] - sy / n);
  }
  const double r2 = 1.0 - ss_res / ss_tot;

  g.pass = r2 > 0.9 && all_finite;
  g.detail = fmt("R^2 %.4f, slope %.1f us per look-back step", r2, slope) +
             (all_finite ? "" : ", NON-FINITE OUTPUT");
  return g;
}

}  // namespace

int main() {
  const std::vector<Gate (*)()> gates = {
      gate_gradients,        gate_linear_subclass, gate_normalization_features,
      gate_window_counts,    gate_ar_exactness,    gate_decay,
      gate_norm_bound,       gate_lds_linear_fit,  gate_beats_linear,
      gate_residual_ordering, gate_event_ordering, gate_timing};

  int failures = 0;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate g = gates[i]();
    failures += g.pass ? 0 : 1;
    std::printf("criterion %2zu  %-52s %s  %s\n", i + 1, g.name.c_str(),
                g.pass ? "PASS" : "FAIL", g.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(gates.size()) - failures,
              gates.size());
  return failures;
}
