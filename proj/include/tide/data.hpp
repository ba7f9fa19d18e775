#ifndef TIDE_DATA_HPP
#define TIDE_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tide/batch.hpp"
#include "tide/rng.hpp"
#include "tide/tensor.hpp"

namespace tide {

/// Sampling granularities of the supported benchmark files.
enum class Frequency { ten_minute, fifteen_minute, hourly };

std::int64_t frequency_stride_seconds(Frequency f);
const char* frequency_name(Frequency f);

/// Multivariate series panel: N series observed at T shared timestamps, plus
/// dynamic covariates known for every step and optional per-series static
/// attributes.
struct TimeSeriesDataset {
  Tensor values;                          // [N, T]
  std::vector<std::int64_t> timestamps;   // unix seconds, constant stride
  Tensor covariates;                      // [T, r]; empty tensor means r = 0
  Tensor static_attrs;                    // [N, s]; empty tensor means s = 0
  Frequency frequency = Frequency::hourly;
  std::vector<std::string> series_names;  // N entries

  Index num_series() const { return values.numel() > 0 ? values.rows() : 0; }
  Index num_steps() const { return values.numel() > 0 ? values.cols() : 0; }
  Index covariate_dim() const {
    return covariates.numel() > 0 ? covariates.cols() : 0;
  }
  Index static_dim() const {
    return static_attrs.numel() > 0 ? static_attrs.cols() : 0;
  }
};

/// Step indices of the chronological train/validation/test boundaries:
/// train = [0, train_end), val = [train_end, val_end), test = [val_end, T).
struct SplitSpec {
  Index train_end = 0;
  Index val_end = 0;
};

enum class Segment { train, val, test };

struct SegmentRange {
  Index begin = 0;
  Index end = 0;  // half-open
  Index length() const { return end - begin; }
};

SegmentRange segment_range(const SplitSpec& spec, Index num_steps, Segment seg);

/// Chronological split at floor(train_ratio * T) and
/// floor((train_ratio + val_ratio) * T). Ratios must be positive and sum to 1.
SplitSpec split(const TimeSeriesDataset& ds, double train_ratio = 0.7,
                double val_ratio = 0.1, double test_ratio = 0.2);

/// Per-series standardization statistics, fit on the training period only.
struct Scaler {
  Tensor mean;  // [N]
  Tensor std;   // [N], floored at 1e-8
};

Scaler fit_scaler(const TimeSeriesDataset& ds, const SplitSpec& spec);
TimeSeriesDataset apply_scaler(const TimeSeriesDataset& ds, const Scaler& s);
TimeSeriesDataset invert_scaler(const TimeSeriesDataset& ds, const Scaler& s);

/// Calendar decomposition of a unix timestamp (proleptic Gregorian, UTC).
struct CivilTime {
  int year = 1970;
  int month = 1;        // 1..12
  int day = 1;          // 1..31
  int hour = 0;         // 0..23
  int minute = 0;       // 0..59
  int second = 0;       // 0..59
  int day_of_week = 3;  // 0 = Monday .. 6 = Sunday
  int day_of_year = 1;  // 1..366
};

CivilTime civil_from_unix(std::int64_t seconds);
std::int64_t unix_from_civil(int year, int month, int day, int hour = 0,
                             int minute = 0, int second = 0);

/// Eight calendar covariates per step, each mapped to [-0.5, 0.5] by
/// value / (cardinality - 1) - 0.5 with zero-based values: minute-of-hour,
/// hour-of-day, day-of-week, day-of-month, day-of-year, month-of-year,
/// week-of-year, and the linear position within the panel.
Tensor time_features(const std::vector<std::int64_t>& timestamps);

/// Returns a copy of `ds` with the eight calendar features appended to its
/// covariate columns.
TimeSeriesDataset with_time_features(const TimeSeriesDataset& ds);

/// Loads a benchmark CSV: header row, first column timestamps
/// ("YYYY-MM-DD HH:MM[:SS]"), one series per remaining column. The stride
/// between the first two timestamps fixes the frequency and every later row
/// must honor it.
TimeSeriesDataset load_csv(const std::string& path);

/// Writes `ds.values` back in the same layout load_csv reads.
void save_csv(const TimeSeriesDataset& ds, const std::string& path);

/// Writes `ds.covariates` with a leading timestamp column (sidecar file).
void save_covariates_csv(const TimeSeriesDataset& ds, const std::string& path);

/// One epoch of shuffled training windows, materialized a batch at a time so
/// an epoch over a large panel never holds more than one batch of slices.
class BatchIterator {
 public:
  BatchIterator(const TimeSeriesDataset& ds, std::vector<Index> anchors,
                std::vector<int> series, Index lookback, Index horizon,
                Index batch_size, Rng rng);

  /// Fills `out` with the next batch; returns false once the epoch is done.
  bool next(WindowBatch& out);

  /// Restarts the epoch with a fresh shuffle order.
  void reset(Rng rng);

  Index window_count() const { return static_cast<Index>(order_.size()); }
  Index batch_count() const;

 private:
  const TimeSeriesDataset* ds_;
  std::vector<Index> anchors_;   // parallel to series_
  std::vector<int> series_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Index lookback_;
  Index horizon_;
  Index batch_size_;
};

/// Enumerates every admissible (series, anchor) pair in the segment and
/// serves them in rng-shuffled batches. Training windows stay fully inside
/// the training segment; validation and test anchors may reach their
/// look-back into the preceding segment (never before step 0).
BatchIterator make_batches(const TimeSeriesDataset& ds, const SplitSpec& spec,
                           Segment segment, Index lookback, Index horizon,
                           Index batch_size, Rng rng);

/// The admissible anchors for one series under the same rules; shared by
/// make_batches and the rolling evaluation.
std::vector<Index> admissible_anchors(const SplitSpec& spec, Index num_steps,
                                      Segment segment, Index lookback,
                                      Index horizon);

/// Materializes one batch directly (evaluation-sized slices, no shuffle).
WindowBatch gather_windows(const TimeSeriesDataset& ds,
                           const std::vector<int>& series,
                           const std::vector<Index>& anchors, Index lookback,
                           Index horizon);

/// Semi-synthetic event augmentation: multiplicative holiday-like events on a
/// random 80% of the series, announced through 8 appended covariate columns.
struct EventSpan {
  Index start = 0;   // first affected step
  Index length = 0;  // steps (24 hours at the panel frequency)
  bool type_a = true;
};

struct InjectConfig {
  double expected_events = 20.0;   // mean of the event-count draw
  double affected_fraction = 0.8;  // share of series that react to events
};

struct InjectResult {
  TimeSeriesDataset dataset;        // values modified, covariates + 8 columns
  std::vector<EventSpan> events;    // non-overlapping, sorted by start
  std::vector<Index> affected;      // indices of reacting series
};

/// Type-A events scale affected series by U[3, 3.2]; Type-B events divide by
/// U[2, 2.2]. Four covariate columns per type carry isotropic Gaussian noise
/// of variance 0.1 around mean 0 off-event, and around [1,2,2,1] (Type A) or
/// [2,1,1,2] (Type B) while an event of that type is active.
InjectResult inject_events(const TimeSeriesDataset& ds, Rng& rng,
                           const InjectConfig& cfg = {});

}  // namespace tide

#endif  // TIDE_DATA_HPP
