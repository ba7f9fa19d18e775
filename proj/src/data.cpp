#include "tide/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string_view>

#include "tide/errors.hpp"

namespace tide {

namespace {

// Howard Hinnant's civil-date algorithms (proleptic Gregorian calendar).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += (m <= 2);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

Tensor hcat(const Tensor& a, const Tensor& b) {
  if (a.numel() == 0) return b;
  if (b.numel() == 0) return a;
  if (a.rows() != b.rows()) {
    throw ShapeError("hcat: row mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  Tensor out({a.rows(), a.cols() + b.cols()});
  out.mat().leftCols(a.cols()) = a.mat();
  out.mat().rightCols(b.cols()) = b.mat();
  return out;
}

[[noreturn]] void ingest_fail(const std::string& path, std::size_t line,
                              const std::string& what) {
  throw IngestError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_cell(std::string_view cell, const std::string& path, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    ingest_fail(path, line, "unparseable numeric cell '" + std::string(cell) + "'");
  }
  return v;
}

std::int64_t parse_timestamp(std::string_view cell, const std::string& path,
                             std::size_t line) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const std::string text(cell);
  const int n = std::sscanf(text.c_str(), "%d-%d-%d %d:%d:%d", &y, &mo, &d, &h, &mi, &s);
  if (n < 5) ingest_fail(path, line, "unparseable timestamp '" + text + "'");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
      s < 0 || s > 59) {
    ingest_fail(path, line, "timestamp field out of range in '" + text + "'");
  }
  return unix_from_civil(y, mo, d, h, mi, s);
}

void split_line(const std::string& line, std::vector<std::string_view>& cells) {
  cells.clear();
  std::string_view rest = line;
  if (!rest.empty() && rest.back() == '\r') rest.remove_suffix(1);
  while (true) {
    const std::size_t comma = rest.find(',');
    if (comma == std::string_view::npos) {
      cells.push_back(rest);
      return;
    }
    cells.push_back(rest.substr(0, comma));
    rest.remove_prefix(comma + 1);
  }
}

void format_timestamp(std::int64_t t, char* buf, std::size_t n) {
  const CivilTime c = civil_from_unix(t);
  std::snprintf(buf, n, "%04d-%02d-%02d %02d:%02d:%02d", c.year, c.month, c.day,
                c.hour, c.minute, c.second);
}

Index poisson_count(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  double p = 1.0;
  Index k = 0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

}  // namespace

std::int64_t frequency_stride_seconds(Frequency f) {
  switch (f) {
    case Frequency::ten_minute: return 600;
    case Frequency::fifteen_minute: return 900;
    case Frequency::hourly: return 3600;
  }
  throw ConfigError("frequency_stride_seconds: unknown frequency");
}

const char* frequency_name(Frequency f) {
  switch (f) {
    case Frequency::ten_minute: return "10min";
    case Frequency::fifteen_minute: return "15min";
    case Frequency::hourly: return "hourly";
  }
  return "?";
}

SegmentRange segment_range(const SplitSpec& spec, Index num_steps, Segment seg) {
  switch (seg) {
    case Segment::train: return {0, spec.train_end};
    case Segment::val: return {spec.train_end, spec.val_end};
    case Segment::test: return {spec.val_end, num_steps};
  }
  throw ConfigError("segment_range: unknown segment");
}

SplitSpec split(const TimeSeriesDataset& ds, double train_ratio, double val_ratio,
                double test_ratio) {
  if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0) {
    throw ConfigError("split: ratios must be positive");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1");
  }
  const Index T = ds.num_steps();
  // The 1e-9 nudge keeps floor() stable when the exact product is an integer
  // but the double product lands a few ulps below it ((0.7+0.1)*10 < 8).
  auto floor_of = [T](double ratio) {
    return static_cast<Index>(std::floor(ratio * static_cast<double>(T) + 1e-9));
  };
  SplitSpec spec;
  spec.train_end = floor_of(train_ratio);
  spec.val_end = floor_of(train_ratio + val_ratio);
  if (!(0 < spec.train_end && spec.train_end < spec.val_end && spec.val_end < T)) {
    throw ConfigError("split: dataset too short for the requested ratios (T=" +
                      std::to_string(T) + ")");
  }
  return spec;
}

Scaler fit_scaler(const TimeSeriesDataset& ds, const SplitSpec& spec) {
  const Index N = ds.num_series();
  const Index Tn = spec.train_end;
  if (Tn <= 0 || Tn > ds.num_steps()) {
    throw ConfigError("fit_scaler: empty or out-of-range training segment");
  }
  Scaler s;
  s.mean = Tensor({N});
  s.std = Tensor({N});
  for (Index i = 0; i < N; ++i) {
    const auto seg = ds.values.mat().row(i).head(Tn);
    const double mu = seg.mean();
    const double var = (seg.array() - mu).square().sum() / static_cast<double>(Tn);
    s.mean[i] = mu;
    s.std[i] = std::max(std::sqrt(var), 1e-8);
  }
  return s;
}

TimeSeriesDataset apply_scaler(const TimeSeriesDataset& ds, const Scaler& s) {
  if (s.mean.numel() != ds.num_series()) {
    throw ShapeError("apply_scaler: scaler fit for " + std::to_string(s.mean.numel()) +
                     " series, dataset has " + std::to_string(ds.num_series()));
  }
  TimeSeriesDataset out = ds;
  for (Index i = 0; i < ds.num_series(); ++i) {
    out.values.mat().row(i) =
        ((ds.values.mat().row(i).array() - s.mean[i]) / s.std[i]).matrix();
  }
  return out;
}

TimeSeriesDataset invert_scaler(const TimeSeriesDataset& ds, const Scaler& s) {
  if (s.mean.numel() != ds.num_series()) {
    throw ShapeError("invert_scaler: scaler fit for " + std::to_string(s.mean.numel()) +
                     " series, dataset has " + std::to_string(ds.num_series()));
  }
  TimeSeriesDataset out = ds;
  for (Index i = 0; i < ds.num_series(); ++i) {
    out.values.mat().row(i) =
        (ds.values.mat().row(i).array() * s.std[i] + s.mean[i]).matrix();
  }
  return out;
}

CivilTime civil_from_unix(std::int64_t seconds) {
  const std::int64_t days = floor_div(seconds, 86400);
  std::int64_t rem = seconds - days * 86400;
  CivilTime c;
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<int>(rem / 3600);
  rem -= static_cast<std::int64_t>(c.hour) * 3600;
  c.minute = static_cast<int>(rem / 60);
  c.second = static_cast<int>(rem - c.minute * 60);
  const std::int64_t wd_sun0 = ((days + 4) % 7 + 7) % 7;  // 1970-01-01 = Thursday
  c.day_of_week = static_cast<int>((wd_sun0 + 6) % 7);    // 0 = Monday
  c.day_of_year =
      static_cast<int>(days - days_from_civil(c.year, 1, 1)) + 1;
  return c;
}

std::int64_t unix_from_civil(int year, int month, int day, int hour, int minute,
                             int second) {
  return days_from_civil(year, month, day) * 86400 +
         static_cast<std::int64_t>(hour) * 3600 + minute * 60 + second;
}

Tensor time_features(const std::vector<std::int64_t>& timestamps) {
  const Index T = static_cast<Index>(timestamps.size());
  Tensor out({T, 8});
  auto scale = [](double value, double cardinality) {
    return value / (cardinality - 1.0) - 0.5;
  };
  for (Index t = 0; t < T; ++t) {
    const CivilTime c = civil_from_unix(timestamps[static_cast<std::size_t>(t)]);
    const int week = (c.day_of_year - 1) / 7;  // 0..52
    out.at(t, 0) = scale(c.minute, 60);
    out.at(t, 1) = scale(c.hour, 24);
    out.at(t, 2) = scale(c.day_of_week, 7);
    out.at(t, 3) = scale(c.day - 1, 31);
    out.at(t, 4) = scale(c.day_of_year - 1, 366);
    out.at(t, 5) = scale(c.month - 1, 12);
    out.at(t, 6) = scale(week, 53);
    out.at(t, 7) = T > 1 ? scale(static_cast<double>(t), static_cast<double>(T)) : -0.5;
  }
  return out;
}

TimeSeriesDataset with_time_features(const TimeSeriesDataset& ds) {
  TimeSeriesDataset out = ds;
  out.covariates = hcat(ds.covariates, time_features(ds.timestamps));
  return out;
}

TimeSeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_csv: cannot open '" + path + "'");

  std::string line;
  std::vector<std::string_view> cells;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) ingest_fail(path, 1, "empty file");
  ++lineno;
  split_line(line, cells);
  if (cells.size() < 2) ingest_fail(path, lineno, "need a date column plus >= 1 series");
  const std::size_t num_cols = cells.size();

  TimeSeriesDataset ds;
  for (std::size_t j = 1; j < num_cols; ++j) ds.series_names.emplace_back(cells[j]);

  std::vector<double> flat;  // row-major [T, N] while streaming
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    split_line(line, cells);
    if (cells.size() != num_cols) {
      ingest_fail(path, lineno,
                  "ragged row: " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(num_cols));
    }
    ds.timestamps.push_back(parse_timestamp(cells[0], path, lineno));
    for (std::size_t j = 1; j < num_cols; ++j) {
      flat.push_back(parse_cell(cells[j], path, lineno));
    }
  }

  const Index T = static_cast<Index>(ds.timestamps.size());
  const Index N = static_cast<Index>(num_cols - 1);
  if (T < 2) ingest_fail(path, lineno, "need at least 2 data rows to infer frequency");

  const std::int64_t stride = ds.timestamps[1] - ds.timestamps[0];
  if (stride == 600) {
    ds.frequency = Frequency::ten_minute;
  } else if (stride == 900) {
    ds.frequency = Frequency::fifteen_minute;
  } else if (stride == 3600) {
    ds.frequency = Frequency::hourly;
  } else {
    ingest_fail(path, 3, "unsupported timestamp stride of " + std::to_string(stride) +
                             " seconds");
  }
  for (Index t = 1; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (ds.timestamps[i] - ds.timestamps[i - 1] != stride) {
      ingest_fail(path, static_cast<std::size_t>(t) + 2,
                  "non-constant timestamp stride");
    }
  }

  // Transpose the streamed [T, N] rows into the [N, T] panel.
  ds.values = Tensor({N, T});
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < N; ++i) {
      ds.values.at(i, t) = flat[static_cast<std::size_t>(t * N + i)];
    }
  }
  return ds;
}

void save_csv(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_csv: cannot open '" + path + "' for writing");
  out << "date";
  for (Index i = 0; i < ds.num_series(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out << ',' << (idx < ds.series_names.size() ? ds.series_names[idx]
                                                : "s" + std::to_string(i));
  }
  out << '\n';
  char ts[32];
  char cell[48];
  for (Index t = 0; t < ds.num_steps(); ++t) {
    format_timestamp(ds.timestamps[static_cast<std::size_t>(t)], ts, sizeof(ts));
    out << ts;
    for (Index i = 0; i < ds.num_series(); ++i) {
      std::snprintf(cell, sizeof(cell), "%.12g", ds.values.at(i, t));
      out << ',' << cell;
    }
    out << '\n';
  }
}

void save_covariates_csv(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("save_covariates_csv: cannot open '" + path + "' for writing");
  }
  out << "date";
  for (Index j = 0; j < ds.covariate_dim(); ++j) out << ",cov" << j;
  out << '\n';
  char ts[32];
  char cell[48];
  for (Index t = 0; t < ds.num_steps(); ++t) {
    format_timestamp(ds.timestamps[static_cast<std::size_t>(t)], ts, sizeof(ts));
    out << ts;
    for (Index j = 0; j < ds.covariate_dim(); ++j) {
      std::snprintf(cell, sizeof(cell), "%.12g", ds.covariates.at(t, j));
      out << ',' << cell;
    }
    out << '\n';
  }
}

std::vector<Index> admissible_anchors(const SplitSpec& spec, Index num_steps,
                                      Segment segment, Index lookback, Index horizon) {
  const SegmentRange range = segment_range(spec, num_steps, segment);
  const Index lo = segment == Segment::train ? range.begin + lookback
                                             : std::max(range.begin, lookback);
  const Index hi = range.end - horizon;  // inclusive
  std::vector<Index> anchors;
  for (Index t = lo; t <= hi; ++t) anchors.push_back(t);
  return anchors;
}

WindowBatch gather_windows(const TimeSeriesDataset& ds, const std::vector<int>& series,
                           const std::vector<Index>& anchors, Index lookback,
                           Index horizon) {
  if (series.size() != anchors.size()) {
    throw ShapeError("gather_windows: series/anchor count mismatch");
  }
  const Index B = static_cast<Index>(series.size());
  const Index span = lookback + horizon;
  const Index r = ds.covariate_dim();
  const Index s = ds.static_dim();

  WindowBatch batch;
  batch.lookback = Tensor({B, lookback});
  batch.target = Tensor({B, horizon});
  if (r > 0) batch.covariates = Tensor({B, span, r});
  if (s > 0) batch.static_attrs = Tensor({B, s});
  batch.series_index = series;
  batch.anchor_t = anchors;

  for (Index b = 0; b < B; ++b) {
    const int i = series[static_cast<std::size_t>(b)];
    const Index t = anchors[static_cast<std::size_t>(b)];
    if (i < 0 || i >= ds.num_series()) {
      throw ShapeError("gather_windows: series index " + std::to_string(i) +
                       " out of range");
    }
    if (t < lookback || t + horizon > ds.num_steps()) {
      throw ShapeError("gather_windows: anchor " + std::to_string(t) +
                       " does not fit L=" + std::to_string(lookback) +
                       ", H=" + std::to_string(horizon));
    }
    batch.lookback.mat().row(b) = ds.values.mat().row(i).segment(t - lookback, lookback);
    batch.target.mat().row(b) = ds.values.mat().row(i).segment(t, horizon);
    if (r > 0) {
      MatMap dst(batch.covariates.data() + b * span * r, span, r);
      dst = ds.covariates.mat().middleRows(t - lookback, span);
    }
    if (s > 0) batch.static_attrs.mat().row(b) = ds.static_attrs.mat().row(i);
  }
  return batch;
}

BatchIterator::BatchIterator(const TimeSeriesDataset& ds, std::vector<Index> anchors,
                             std::vector<int> series, Index lookback, Index horizon,
                             Index batch_size, Rng rng)
    : ds_(&ds),
      anchors_(std::move(anchors)),
      series_(std::move(series)),
      lookback_(lookback),
      horizon_(horizon),
      batch_size_(batch_size) {
  if (batch_size_ < 1) throw ConfigError("make_batches: batchSize must be >= 1");
  order_.resize(anchors_.size());
  for (std::size_t k = 0; k < order_.size(); ++k) order_[k] = k;
  reset(rng);
}

void BatchIterator::reset(Rng rng) {
  rng.shuffle(order_);
  cursor_ = 0;
}

Index BatchIterator::batch_count() const {
  return (window_count() + batch_size_ - 1) / batch_size_;
}

bool BatchIterator::next(WindowBatch& out) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t take =
      std::min(static_cast<std::size_t>(batch_size_), order_.size() - cursor_);
  std::vector<int> series(take);
  std::vector<Index> anchors(take);
  for (std::size_t k = 0; k < take; ++k) {
    const std::size_t pick = order_[cursor_ + k];
    series[k] = series_[pick];
    anchors[k] = anchors_[pick];
  }
  cursor_ += take;
  out = gather_windows(*ds_, series, anchors, lookback_, horizon_);
  return true;
}

BatchIterator make_batches(const TimeSeriesDataset& ds, const SplitSpec& spec,
                           Segment segment, Index lookback, Index horizon,
                           Index batch_size, Rng rng) {
  const std::vector<Index> per_series =
      admissible_anchors(spec, ds.num_steps(), segment, lookback, horizon);
  if (per_series.empty()) {
    throw ConfigError("make_batches: segment admits no (L=" + std::to_string(lookback) +
                      ", H=" + std::to_string(horizon) + ") window");
  }
  std::vector<Index> anchors;
  std::vector<int> series;
  anchors.reserve(static_cast<std::size_t>(ds.num_series()) * per_series.size());
  series.reserve(anchors.capacity());
  for (Index i = 0; i < ds.num_series(); ++i) {
    for (Index t : per_series) {
      series.push_back(static_cast<int>(i));
      anchors.push_back(t);
    }
  }
  return BatchIterator(ds, std::move(anchors), std::move(series), lookback, horizon,
                       batch_size, rng);
}

InjectResult inject_events(const TimeSeriesDataset& ds, Rng& rng,
                           const InjectConfig& cfg) {
  if (cfg.affected_fraction < 0.0 || cfg.affected_fraction > 1.0) {
    throw ConfigError("inject_events: affected_fraction must lie in [0, 1]");
  }
  const Index N = ds.num_series();
  const Index T = ds.num_steps();
  const Index event_len = static_cast<Index>(
      24 * 3600 / frequency_stride_seconds(ds.frequency));  // 24 hours of steps

  InjectResult res;
  res.dataset = ds;

  // Affected subset: an exact-count uniformly random selection.
  std::vector<Index> order(static_cast<std::size_t>(N));
  for (Index i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;
  rng.shuffle(order);
  const Index k = std::min<Index>(
      N, static_cast<Index>(std::llround(cfg.affected_fraction * static_cast<double>(N))));
  res.affected.assign(order.begin(), order.begin() + k);
  std::sort(res.affected.begin(), res.affected.end());

  // Global schedule: Poisson count, non-overlapping placement by rejection.
  if (event_len <= T) {
    const Index want = poisson_count(rng, cfg.expected_events);
    Index attempts = 200 * (want + 1);
    while (static_cast<Index>(res.events.size()) < want && attempts-- > 0) {
      const Index start = static_cast<Index>(
          rng.below(static_cast<std::uint64_t>(T - event_len + 1)));
      bool overlaps = false;
      for (const EventSpan& e : res.events) {
        if (start < e.start + e.length && e.start < start + event_len) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      EventSpan span;
      span.start = start;
      span.length = event_len;
      span.type_a = rng.uniform() < 0.5;
      res.events.push_back(span);
    }
    std::sort(res.events.begin(), res.events.end(),
              [](const EventSpan& a, const EventSpan& b) { return a.start < b.start; });
  }

  // Multiplicative effect on the affected series.
  for (EventSpan& e : res.events) {
    const double factor = e.type_a ? rng.uniform(3.0, 3.2)
                                   : 1.0 / rng.uniform(2.0, 2.2);
    for (Index i : res.affected) {
      res.dataset.values.mat().row(i).segment(e.start, e.length) *= factor;
    }
  }

  // Covariates: isotropic Gaussian (variance 0.1) around a type-specific mean
  // while an event is active, around zero otherwise.
  const double noise_std = std::sqrt(0.1);
  static const double mean_a[4] = {1.0, 2.0, 2.0, 1.0};
  static const double mean_b[4] = {2.0, 1.0, 1.0, 2.0};
  Tensor extra({T, 8});
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < 8; ++j) extra.at(t, j) = noise_std * rng.normal();
  }
  for (const EventSpan& e : res.events) {
    const double* mean = e.type_a ? mean_a : mean_b;
    const Index col0 = e.type_a ? 0 : 4;
    for (Index t = e.start; t < e.start + e.length; ++t) {
      for (Index j = 0; j < 4; ++j) extra.at(t, col0 + j) += mean[j];
    }
  }
  res.dataset.covariates = hcat(ds.covariates, extra);
  return res;
}

}  // namespace tide
