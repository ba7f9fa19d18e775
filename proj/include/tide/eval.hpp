#ifndef TIDE_EVAL_HPP
#define TIDE_EVAL_HPP

#include <cstdint>
#include <vector>

#include "tide/data.hpp"
#include "tide/model.hpp"
#include "tide/tensor.hpp"

namespace tide {

/// Aggregated forecast quality over a set of evaluation windows.
struct MetricsReport {
  double mse = 0.0;
  double mae = 0.0;
  Index window_count = 0;
  Tensor per_step;  // [H] mean squared error per horizon position
};

/// Mean absolute deviation over all entries. Shapes must match.
double mae(const Tensor& pred, const Tensor& target);

/// Mean squared deviation over all entries. Shapes must match.
double mse_value(const Tensor& pred, const Tensor& target);

struct EvalOptions {
  Index batch_size = 512;
  /// Optional per-step mask over the panel timeline (length num_steps). When
  /// set, only horizon positions whose absolute step is marked contribute to
  /// the metrics; window_count still counts every evaluated window.
  const std::vector<std::uint8_t>* step_mask = nullptr;
};

/// Runs the model in eval mode over every stride-1 window of the segment
/// (look-backs may reach into the preceding segment) and aggregates MSE/MAE
/// across all windows and series. Metrics are in the units of `ds.values`,
/// so pass a standardized panel for normalized reporting.
MetricsReport rolling_evaluate(const TiDEParams& params, const TimeSeriesDataset& ds,
                               const SplitSpec& spec, Segment segment,
                               const EvalOptions& opts = {});

/// Number of rolling windows the segment admits, as a closed form:
/// num_series * (last admissible anchor - first admissible anchor + 1).
Index rolling_window_count(const TimeSeriesDataset& ds, const SplitSpec& spec,
                           Segment segment, Index lookback, Index horizon);

struct TrainConfig {
  Index max_epochs = 100;
  Index patience = 10;   // epochs without validation improvement
  Index batch_size = 512;
  std::uint64_t seed = 0;
  double max_lr = 1e-3;  // peak of the cosine schedule

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  Index epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;  // learning rate at the last step of the epoch
};

struct TrainResult {
  TiDEParams params;  // best-validation snapshot
  std::vector<EpochRecord> history;
  Index best_epoch = -1;
  double best_val_mse = 0.0;
};

/// Mini-batch training with Adam under a cosine schedule spanning
/// max_epochs * batches-per-epoch steps. After each epoch the model is
/// rolling-evaluated on the validation segment; the best snapshot is kept and
/// training stops early after `patience` epochs without improvement. A
/// non-finite training loss aborts with DivergenceError.
///
/// `warm_start`, when given, replaces the seeded initialization; its config
/// must match `cfg` exactly.
TrainResult train_loop(const ModelConfig& cfg, const TrainConfig& tcfg,
                       const TimeSeriesDataset& ds, const SplitSpec& spec,
                       const TiDEParams* warm_start = nullptr);

/// Side-by-side comparison of the full architecture against one ablated
/// variant, trained under identical seeds and budgets.
struct AblationReport {
  Variant variant = Variant::full;
  MetricsReport full;
  MetricsReport ablated;
};

AblationReport ablate(Variant variant, const ModelConfig& cfg,
                      const TrainConfig& tcfg, const TimeSeriesDataset& ds,
                      const SplitSpec& spec, Segment segment = Segment::test,
                      const EvalOptions& opts = {});

/// Marks every step inside an event span plus `tail` steps after it; the
/// window positions where covariate-driven models must prove themselves.
std::vector<std::uint8_t> event_adjacent_mask(const std::vector<EventSpan>& events,
                                              Index num_steps, Index tail = 24);

}  // namespace tide

#endif  // TIDE_EVAL_HPP
