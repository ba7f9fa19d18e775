#include "tide/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "tide/errors.hpp"
#include "tide/optim.hpp"
#include "tide/rng.hpp"
#include "tide/tape.hpp"

namespace tide {

namespace {

void check_model_dataset(const ModelConfig& cfg, const TimeSeriesDataset& ds) {
  if (cfg.covariate_dim != ds.covariate_dim()) {
    throw ConfigError("model expects " + std::to_string(cfg.covariate_dim) +
                      " covariates, dataset has " +
                      std::to_string(ds.covariate_dim()));
  }
  if (cfg.static_dim != ds.static_dim()) {
    throw ConfigError("model expects " + std::to_string(cfg.static_dim) +
                      " static attributes, dataset has " +
                      std::to_string(ds.static_dim()));
  }
  if (ds.num_steps() < cfg.lookback + cfg.horizon) {
    throw ConfigError("dataset too short: " + std::to_string(ds.num_steps()) +
                      " steps for L+H = " +
                      std::to_string(cfg.lookback + cfg.horizon));
  }
}

}  // namespace

double mae(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mae");
  if (pred.numel() == 0) throw ShapeError("mae: empty tensors");
  return (pred.flat() - target.flat()).cwiseAbs().mean();
}

double mse_value(const Tensor& pred, const Tensor& target) {
  check_same_shape(pred, target, "mse_value");
  if (pred.numel() == 0) throw ShapeError("mse_value: empty tensors");
  return (pred.flat() - target.flat()).squaredNorm() /
         static_cast<double>(pred.numel());
}

Index rolling_window_count(const TimeSeriesDataset& ds, const SplitSpec& spec,
                           Segment segment, Index lookback, Index horizon) {
  const std::vector<Index> anchors =
      admissible_anchors(spec, ds.num_steps(), segment, lookback, horizon);
  return ds.num_series() * static_cast<Index>(anchors.size());
}

MetricsReport rolling_evaluate(const TiDEParams& params, const TimeSeriesDataset& ds,
                               const SplitSpec& spec, Segment segment,
                               const EvalOptions& opts) {
  const ModelConfig& cfg = params.cfg;
  check_model_dataset(cfg, ds);
  if (opts.batch_size < 1) throw ConfigError("rolling_evaluate: batch_size must be >= 1");
  if (opts.step_mask != nullptr &&
      static_cast<Index>(opts.step_mask->size()) != ds.num_steps()) {
    throw ConfigError("rolling_evaluate: step mask length must equal num_steps");
  }

  const std::vector<Index> anchors =
      admissible_anchors(spec, ds.num_steps(), segment, cfg.lookback, cfg.horizon);
  if (anchors.empty()) {
    throw ConfigError("rolling_evaluate: segment admits no (L=" +
                      std::to_string(cfg.lookback) +
                      ", H=" + std::to_string(cfg.horizon) + ") window");
  }

  MetricsReport report;
  report.per_step = Tensor({cfg.horizon});
  Tensor step_count({cfg.horizon});
  double se = 0.0;
  double ae = 0.0;
  Index counted = 0;

  std::vector<int> series;
  std::vector<Index> batch_anchors;
  auto flush = [&]() {
    if (series.empty()) return;
    const WindowBatch batch =
        gather_windows(ds, series, batch_anchors, cfg.lookback, cfg.horizon);
    const Tensor pred = predict(params, batch);
    for (Index b = 0; b < batch.size(); ++b) {
      const Index t = batch.anchor_t[static_cast<std::size_t>(b)];
      for (Index j = 0; j < cfg.horizon; ++j) {
        if (opts.step_mask != nullptr &&
            !(*opts.step_mask)[static_cast<std::size_t>(t + j)]) {
          continue;
        }
        const double err = pred.at(b, j) - batch.target.at(b, j);
        se += err * err;
        ae += std::abs(err);
        report.per_step[j] += err * err;
        step_count[j] += 1.0;
        ++counted;
      }
    }
    report.window_count += batch.size();
    series.clear();
    batch_anchors.clear();
  };

  for (Index i = 0; i < ds.num_series(); ++i) {
    for (Index t : anchors) {
      series.push_back(static_cast<int>(i));
      batch_anchors.push_back(t);
      if (static_cast<Index>(series.size()) == opts.batch_size) flush();
    }
  }
  flush();

  if (counted == 0) {
    throw ConfigError("rolling_evaluate: the step mask excludes every horizon step");
  }
  report.mse = se / static_cast<double>(counted);
  report.mae = ae / static_cast<double>(counted);
  for (Index j = 0; j < cfg.horizon; ++j) {
    if (step_count[j] > 0.0) report.per_step[j] /= step_count[j];
  }
  return report;
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("maxEpochs must be >= 1");
  if (patience < 1 || patience > max_epochs) {
    throw ConfigError("patience must lie in [1, maxEpochs]");
  }
  if (batch_size < 1) throw ConfigError("batchSize must be >= 1");
  if (!(max_lr > 0.0) || !std::isfinite(max_lr)) {
    throw ConfigError("learningRate must be positive and finite");
  }
}

TrainResult train_loop(const ModelConfig& cfg, const TrainConfig& tcfg,
                       const TimeSeriesDataset& ds, const SplitSpec& spec,
                       const TiDEParams* warm_start) {
  cfg.validate();
  tcfg.validate();
  check_model_dataset(cfg, ds);
  if (warm_start != nullptr &&
      (!(warm_start->cfg == cfg) || warm_start->num_series != ds.num_series())) {
    throw ConfigError("train_loop: warm-start parameters were built for a "
                      "different model config or panel");
  }

  TiDEParams params = warm_start != nullptr
                          ? *warm_start
                          : TiDEParams::init(cfg, ds.num_series(),
                                             derive_seed(tcfg.seed, 0x171d));

  BatchIterator batches =
      make_batches(ds, spec, Segment::train, cfg.lookback, cfg.horizon,
                   tcfg.batch_size, Rng(derive_seed(tcfg.seed, 0x5e00)));
  const ScheduleConfig schedule{tcfg.max_lr, tcfg.max_epochs * batches.batch_count()};
  const AdamConfig adam_cfg;

  std::size_t tensor_count = 0;
  params.for_each_param([&](const std::string&, Tensor&) { ++tensor_count; });
  std::vector<AdamState> states(tensor_count);

  TrainResult result;
  result.params = params;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  Index epochs_since_best = 0;
  std::int64_t step = 0;

  for (Index epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    batches.reset(Rng(derive_seed(tcfg.seed, 0x5e00 + static_cast<std::uint64_t>(epoch))));
    Rng dropout_rng(derive_seed(tcfg.seed, 0xd000 + static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    Index rows = 0;
    double last_lr = cosine_lr(step, schedule);
    WindowBatch batch;
    while (batches.next(batch)) {
      Tape tape;
      std::vector<Var> leaves;
      params.for_each_param(
          [&](const std::string&, Tensor& t) { leaves.push_back(tape.leaf(t, true)); });
      const ModelVars vars = bind_param_vars(params, leaves);
      const Var pred = forward(tape, params, vars, batch, Mode::train, &dropout_rng);
      const Var loss = mse_loss(tape, pred, batch.target);

      const double loss_value = tape.value(loss)[0];
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("train_loop: non-finite loss at epoch " +
                              std::to_string(epoch) + ", step " +
                              std::to_string(step));
      }
      loss_sum += loss_value * static_cast<double>(batch.size());
      rows += batch.size();

      const Gradients grads = tape.backward(loss);
      last_lr = cosine_lr(step, schedule);
      std::size_t k = 0;
      params.for_each_param([&](const std::string&, Tensor& t) {
        adam_update(t, grads.get(leaves[k]), states[k], last_lr, adam_cfg);
        ++k;
      });
      ++step;
    }

    const MetricsReport val = rolling_evaluate(params, ds, spec, Segment::val,
                                               EvalOptions{tcfg.batch_size, nullptr});
    EpochRecord record;
    record.epoch = epoch;
    record.train_mse = loss_sum / static_cast<double>(rows);
    record.val_mse = val.mse;
    record.lr = last_lr;
    result.history.push_back(record);

    if (val.mse < result.best_val_mse) {
      result.best_val_mse = val.mse;
      result.best_epoch = epoch;
      result.params = params;  // snapshot
      epochs_since_best = 0;
    } else if (++epochs_since_best >= tcfg.patience) {
      break;
    }
  }
  return result;
}

AblationReport ablate(Variant variant, const ModelConfig& cfg,
                      const TrainConfig& tcfg, const TimeSeriesDataset& ds,
                      const SplitSpec& spec, Segment segment,
                      const EvalOptions& opts) {
  AblationReport report;
  report.variant = variant;

  ModelConfig full_cfg = cfg;
  full_cfg.variant = Variant::full;
  const TrainResult full_run = train_loop(full_cfg, tcfg, ds, spec);
  report.full = rolling_evaluate(full_run.params, ds, spec, segment, opts);

  if (variant == Variant::full) {
    report.ablated = report.full;
    return report;
  }
  ModelConfig alt_cfg = cfg;
  alt_cfg.variant = variant;
  const TrainResult alt_run = train_loop(alt_cfg, tcfg, ds, spec);
  report.ablated = rolling_evaluate(alt_run.params, ds, spec, segment, opts);
  return report;
}

std::vector<std::uint8_t> event_adjacent_mask(const std::vector<EventSpan>& events,
                                              Index num_steps, Index tail) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(num_steps), 0);
  for (const EventSpan& e : events) {
    const Index lo = e.start;
    const Index hi = std::min(num_steps, e.start + e.length + tail);
    for (Index t = lo; t < hi; ++t) mask[static_cast<std::size_t>(t)] = 1;
  }
  return mask;
}

}  // namespace tide
