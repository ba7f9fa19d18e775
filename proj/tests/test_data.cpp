#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tide/data.hpp"
#include "tide/errors.hpp"

using namespace tide;

namespace {

TimeSeriesDataset toy_dataset(Index N, Index T, Frequency freq = Frequency::hourly,
                              std::uint64_t seed = 1) {
  TimeSeriesDataset ds;
  ds.frequency = freq;
  ds.values = Tensor({N, T});
  Rng rng(seed);
  for (Index i = 0; i < ds.values.numel(); ++i) ds.values[i] = rng.normal();
  const std::int64_t t0 = unix_from_civil(2016, 7, 1);
  const std::int64_t stride = frequency_stride_seconds(freq);
  for (Index t = 0; t < T; ++t) ds.timestamps.push_back(t0 + t * stride);
  for (Index i = 0; i < N; ++i) ds.series_names.push_back("s" + std::to_string(i));
  return ds;
}

std::string write_temp_csv(const std::string& name, const std::string& content) {
  std::ofstream out(name);
  out << content;
  return name;
}

}  // namespace

TEST_CASE("civil date math round-trips and knows its calendar") {
  // 1970-01-01 was a Thursday; 2016-07-01 a Friday.
  CHECK(unix_from_civil(1970, 1, 1) == 0);
  CHECK(civil_from_unix(0).day_of_week == 3);  // Thursday, Monday = 0
  const std::int64_t t = unix_from_civil(2016, 7, 1, 13, 45, 30);
  const CivilTime c = civil_from_unix(t);
  CHECK(c.year == 2016);
  CHECK(c.month == 7);
  CHECK(c.day == 1);
  CHECK(c.hour == 13);
  CHECK(c.minute == 45);
  CHECK(c.second == 30);
  CHECK(c.day_of_week == 4);   // Friday
  CHECK(c.day_of_year == 183); // 2016 is a leap year

  // Leap-year boundary: 2016-02-29 exists and is day 60.
  const CivilTime leap = civil_from_unix(unix_from_civil(2016, 2, 29));
  CHECK(leap.day == 29);
  CHECK(leap.day_of_year == 60);

  // Round trip across several decades.
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const auto secs = static_cast<std::int64_t>(rng.below(4102444800ull));  // < 2100
    const CivilTime cc = civil_from_unix(secs);
    CHECK(unix_from_civil(cc.year, cc.month, cc.day, cc.hour, cc.minute, cc.second) ==
          secs);
  }
}

TEST_CASE("load_csv parses the benchmark layout") {
  const std::string path = write_temp_csv(
      "test_load.csv",
      "date,a,b\n"
      "2016-07-01 00:00:00,1.5,2\n"
      "2016-07-01 01:00:00,-0.25,3e-1\n"
      "2016-07-01 02:00:00,4,5\n");
  TimeSeriesDataset ds = load_csv(path);
  CHECK(ds.num_series() == 2);
  CHECK(ds.num_steps() == 3);
  CHECK(ds.frequency == Frequency::hourly);
  CHECK(ds.series_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.values.at(0, 0) == 1.5);
  CHECK(ds.values.at(0, 1) == -0.25);
  CHECK(ds.values.at(1, 1) == 0.3);
  CHECK(ds.values.at(1, 2) == 5.0);
  std::remove(path.c_str());

  // Minute-level strides map to the other frequencies.
  const std::string p15 = write_temp_csv("test_load15.csv",
                                         "date,a\n"
                                         "2016-07-01 00:00:00,1\n"
                                         "2016-07-01 00:15:00,2\n");
  CHECK(load_csv(p15).frequency == Frequency::fifteen_minute);
  std::remove(p15.c_str());
}

TEST_CASE("load_csv reports malformed input with its line number") {
  auto expect_ingest = [](const std::string& name, const std::string& body,
                          const std::string& needle) {
    const std::string path = write_temp_csv(name, body);
    try {
      load_csv(path);
      FAIL_CHECK("expected IngestError for " << name);
    } catch (const IngestError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
    std::remove(path.c_str());
  };

  expect_ingest("test_ragged.csv",
                "date,a,b\n"
                "2016-07-01 00:00:00,1,2\n"
                "2016-07-01 01:00:00,1\n",
                ":3: ragged row");
  expect_ingest("test_cell.csv",
                "date,a\n"
                "2016-07-01 00:00:00,1\n"
                "2016-07-01 01:00:00,oops\n",
                "unparseable numeric cell 'oops'");
  expect_ingest("test_stride.csv",
                "date,a\n"
                "2016-07-01 00:00:00,1\n"
                "2016-07-01 01:00:00,2\n"
                "2016-07-01 03:00:00,3\n",
                "non-constant timestamp stride");
  expect_ingest("test_badstride.csv",
                "date,a\n"
                "2016-07-01 00:00:00,1\n"
                "2016-07-03 00:00:00,2\n",
                "unsupported timestamp stride");
  expect_ingest("test_badtime.csv",
                "date,a\n"
                "yesterday,1\n"
                "2016-07-01 01:00:00,2\n",
                "unparseable timestamp");
  CHECK_THROWS_AS(load_csv("does_not_exist.csv"), ConfigError);
}

TEST_CASE("csv save/load round trip") {
  TimeSeriesDataset ds = toy_dataset(3, 10, Frequency::fifteen_minute, 7);
  const std::string path = "test_roundtrip.csv";
  save_csv(ds, path);
  TimeSeriesDataset back = load_csv(path);
  CHECK(back.num_series() == 3);
  CHECK(back.num_steps() == 10);
  CHECK(back.frequency == Frequency::fifteen_minute);
  CHECK(back.timestamps == ds.timestamps);
  for (Index i = 0; i < ds.values.numel(); ++i) {
    CHECK(back.values[i] == doctest::Approx(ds.values[i]).epsilon(1e-11));
  }
  std::remove(path.c_str());
}

TEST_CASE("split boundaries use floor arithmetic") {
  TimeSeriesDataset ds = toy_dataset(1, 26304);
  const SplitSpec spec = split(ds);
  CHECK(spec.train_end == 18412);
  CHECK(spec.val_end == 21043);

  TimeSeriesDataset small = toy_dataset(1, 10);
  const SplitSpec s10 = split(small);
  CHECK(s10.train_end == 7);
  CHECK(s10.val_end == 8);

  CHECK_THROWS_AS(split(small, 0.3, 0.3, 0.3), ConfigError);  // sums to 0.9
  CHECK_THROWS_AS(split(small, 0.5, 0.5, -0.0), ConfigError);
  TimeSeriesDataset tiny = toy_dataset(1, 2);
  CHECK_THROWS_AS(split(tiny), ConfigError);
}

TEST_CASE("scaler: train-only statistics, round trip, no leakage") {
  TimeSeriesDataset ds = toy_dataset(4, 50, Frequency::hourly, 11);
  ds.values.mat().row(2).setConstant(5.0);  // degenerate series
  const SplitSpec spec = split(ds, 0.7, 0.1, 0.2);

  const Scaler sc = fit_scaler(ds, spec);
  TimeSeriesDataset norm = apply_scaler(ds, sc);

  // Normalized training segment: mean ~0, std ~1 (when not floored).
  for (Index i = 0; i < 4; ++i) {
    const auto seg = norm.values.mat().row(i).head(spec.train_end);
    if (i == 2) {
      for (Index t = 0; t < spec.train_end; ++t) CHECK(seg(t) == 0.0);
      continue;
    }
    CHECK(std::abs(seg.mean()) < 1e-10);
    const double var = (seg.array() - seg.mean()).square().sum() /
                       static_cast<double>(spec.train_end);
    CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-8));
  }

  // Round trip.
  TimeSeriesDataset back = invert_scaler(norm, sc);
  for (Index i = 0; i < ds.values.numel(); ++i) {
    CHECK(std::abs(back.values[i] - ds.values[i]) < 1e-10);
  }

  // No leakage: perturbing any test-segment value leaves the scaler
  // bit-identical.
  TimeSeriesDataset poked = ds;
  poked.values.at(0, spec.val_end + 3) += 1000.0;
  poked.values.at(3, ds.num_steps() - 1) = -999.0;
  const Scaler sc2 = fit_scaler(poked, spec);
  for (Index i = 0; i < 4; ++i) {
    CHECK(sc2.mean[i] == sc.mean[i]);
    CHECK(sc2.std[i] == sc.std[i]);
  }
}

TEST_CASE("time features: endpoints, bounds, periodicity, granularity") {
  // One year of hourly stamps starting 2015-01-01 00:00.
  std::vector<std::int64_t> stamps;
  const std::int64_t t0 = unix_from_civil(2015, 1, 1);
  for (int t = 0; t < 24 * 400; ++t) stamps.push_back(t0 + t * 3600);
  Tensor f = time_features(stamps);
  CHECK(f.rows() == static_cast<Index>(stamps.size()));
  CHECK(f.cols() == 8);

  // Bounds.
  for (Index i = 0; i < f.numel(); ++i) {
    CHECK(f[i] >= -0.5);
    CHECK(f[i] <= 0.5);
  }

  // Hour endpoints: hour 0 -> -0.5, hour 23 -> +0.5.
  CHECK(f.at(0, 1) == -0.5);
  CHECK(f.at(23, 1) == 0.5);

  // Hourly data: minute-of-hour column constant at -0.5.
  for (Index t = 0; t < 100; ++t) CHECK(f.at(t, 0) == -0.5);

  // Periodicity: hour-of-day repeats with period 24, day-of-week with 168.
  for (Index t = 0; t < 300; ++t) {
    CHECK(f.at(t, 1) == f.at(t + 24, 1));
    CHECK(f.at(t, 2) == f.at(t + 168, 2));
  }

  // Age column is affine in t and hits both endpoints.
  CHECK(f.at(0, 7) == -0.5);
  CHECK(f.at(f.rows() - 1, 7) == doctest::Approx(0.5).epsilon(1e-12));

  // 15-minute stamps: minute endpoints -0.5 and 45/59 - 0.5.
  std::vector<std::int64_t> q = {t0, t0 + 900, t0 + 1800, t0 + 2700};
  Tensor fq = time_features(q);
  CHECK(fq.at(0, 0) == -0.5);
  CHECK(fq.at(3, 0) == doctest::Approx(45.0 / 59.0 - 0.5));

  TimeSeriesDataset ds = toy_dataset(2, 30);
  TimeSeriesDataset with = with_time_features(ds);
  CHECK(with.covariate_dim() == 8);
  CHECK(with.covariates.rows() == 30);
}

TEST_CASE("window enumeration: counts, coverage, integrity") {
  TimeSeriesDataset ds = toy_dataset(3, 40, Frequency::hourly, 21);
  SplitSpec spec;
  spec.train_end = 10;  // train segment of length 10
  spec.val_end = 25;

  // One series' training anchors with L=3, H=2: exactly 10-3-2+1 = 6 windows.
  const std::vector<Index> anchors =
      admissible_anchors(spec, ds.num_steps(), Segment::train, 3, 2);
  CHECK(anchors.size() == 6);
  CHECK(anchors.front() == 3);
  CHECK(anchors.back() == 8);

  // Validation look-back may cross into the training segment.
  const std::vector<Index> va =
      admissible_anchors(spec, ds.num_steps(), Segment::val, 3, 2);
  CHECK(va.front() == 10);
  CHECK(va.back() == 23);

  // Epoch coverage: the (series, anchor) multiset is independent of batch
  // size, each admissible pair appearing exactly once.
  for (Index bs : {1, 4, 7, 100}) {
    BatchIterator it = make_batches(ds, spec, Segment::train, 3, 2, bs, Rng(5));
    CHECK(it.window_count() == 18);  // 3 series x 6 anchors
    std::map<std::pair<int, Index>, int> seen;
    WindowBatch b;
    Index rows = 0;
    while (it.next(b)) {
      CHECK(b.size() <= bs);
      rows += b.size();
      for (Index k = 0; k < b.size(); ++k) {
        seen[{b.series_index[static_cast<std::size_t>(k)],
              b.anchor_t[static_cast<std::size_t>(k)]}]++;
        // Window integrity: lookback||target is the contiguous source slice.
        const int i = b.series_index[static_cast<std::size_t>(k)];
        const Index t = b.anchor_t[static_cast<std::size_t>(k)];
        for (Index u = 0; u < 3; ++u) {
          CHECK(b.lookback.at(k, u) == ds.values.at(i, t - 3 + u));
        }
        for (Index u = 0; u < 2; ++u) {
          CHECK(b.target.at(k, u) == ds.values.at(i, t + u));
        }
      }
    }
    CHECK(rows == 18);
    CHECK(seen.size() == 18);
    for (const auto& [key, count] : seen) CHECK(count == 1);
  }

  // Fixed seed -> identical epoch order.
  BatchIterator a = make_batches(ds, spec, Segment::train, 3, 2, 4, Rng(9));
  BatchIterator c = make_batches(ds, spec, Segment::train, 3, 2, 4, Rng(9));
  WindowBatch wa, wc;
  while (a.next(wa)) {
    REQUIRE(c.next(wc));
    CHECK(wa.anchor_t == wc.anchor_t);
    CHECK(wa.series_index == wc.series_index);
  }
  CHECK_FALSE(c.next(wc));

  // No admissible window -> configuration error.
  CHECK_THROWS_AS(make_batches(ds, spec, Segment::train, 9, 2, 4, Rng(1)),
                  ConfigError);
}

TEST_CASE("window batches carry aligned covariate spans") {
  TimeSeriesDataset ds = with_time_features(toy_dataset(2, 60, Frequency::hourly, 31));
  SplitSpec spec = split(ds, 0.7, 0.1, 0.2);
  BatchIterator it = make_batches(ds, spec, Segment::train, 5, 3, 4, Rng(2));
  WindowBatch b;
  REQUIRE(it.next(b));
  CHECK(b.covariates.dim(0) == b.size());  // [B, L+H, r]
  CHECK(b.covariates.dim(1) == 8);
  CHECK(b.covariates.dim(2) == 8);
  for (Index k = 0; k < b.size(); ++k) {
    const Index t = b.anchor_t[static_cast<std::size_t>(k)];
    for (Index u = 0; u < 8; ++u) {    // span position
      for (Index j = 0; j < 8; ++j) {  // covariate column
        const Index flat = (k * 8 + u) * 8 + j;
        CHECK(b.covariates[flat] == ds.covariates.at(t - 5 + u, j));
      }
    }
  }
}

TEST_CASE("inject_events: spans, effects, and covariate encoding") {
  TimeSeriesDataset ds = toy_dataset(10, 2000, Frequency::hourly, 41);
  ds.values.flat().setConstant(1.0);  // unit panel makes factors observable
  Rng rng(17);
  InjectConfig cfg;
  cfg.expected_events = 8.0;
  InjectResult res = inject_events(ds, rng, cfg);

  CHECK(res.dataset.covariate_dim() == 8);
  CHECK(res.affected.size() == 8);  // exact 80% of 10
  REQUIRE(!res.events.empty());

  std::set<Index> affected(res.affected.begin(), res.affected.end());
  for (const EventSpan& e : res.events) {
    CHECK(e.length == 24);  // 24 contiguous hours at hourly steps
    CHECK(e.start + e.length <= 2000);
    for (Index i = 0; i < 10; ++i) {
      const double v = res.dataset.values.at(i, e.start);
      if (affected.count(i)) {
        if (e.type_a) {
          CHECK(v >= 3.0);
          CHECK(v <= 3.2);
        } else {
          CHECK(v >= 1.0 / 2.2);
          CHECK(v <= 1.0 / 2.0);
        }
        // Whole span gets the same factor.
        for (Index t = e.start; t < e.start + e.length; ++t) {
          CHECK(res.dataset.values.at(i, t) == v);
        }
      } else {
        CHECK(v == 1.0);
      }
    }
  }

  // Events do not overlap.
  for (std::size_t a = 1; a < res.events.size(); ++a) {
    CHECK(res.events[a - 1].start + res.events[a - 1].length <= res.events[a].start);
  }

  // Off-event steps keep all original values.
  std::vector<bool> in_event(2000, false);
  for (const EventSpan& e : res.events) {
    for (Index t = e.start; t < e.start + e.length; ++t) {
      in_event[static_cast<std::size_t>(t)] = true;
    }
  }
  for (Index t = 0; t < 2000; ++t) {
    if (!in_event[static_cast<std::size_t>(t)]) {
      for (Index i = 0; i < 10; ++i) CHECK(res.dataset.values.at(i, t) == 1.0);
    }
  }

  // Covariate columns: mean near the type vector during events of that type,
  // near zero elsewhere (noise std is sqrt(0.1), so averages concentrate).
  double off_sum = 0.0;
  Index off_count = 0;
  for (Index t = 0; t < 2000; ++t) {
    if (in_event[static_cast<std::size_t>(t)]) continue;
    for (Index j = 0; j < 8; ++j) off_sum += res.dataset.covariates.at(t, j);
    off_count += 8;
  }
  CHECK(std::abs(off_sum / static_cast<double>(off_count)) < 0.05);

  const double want_a[4] = {1.0, 2.0, 2.0, 1.0};
  const double want_b[4] = {2.0, 1.0, 1.0, 2.0};
  for (const EventSpan& e : res.events) {
    for (Index j = 0; j < 4; ++j) {
      double sum = 0.0;
      for (Index t = e.start; t < e.start + e.length; ++t) {
        sum += res.dataset.covariates.at(t, (e.type_a ? 0 : 4) + j);
      }
      const double mean = sum / static_cast<double>(e.length);
      const double want = e.type_a ? want_a[j] : want_b[j];
      CHECK(std::abs(mean - want) < 0.45);  // 24 draws of std 0.316 noise
    }
  }

  // Zero expected events: values untouched, covariates pure noise.
  Rng rng0(3);
  InjectConfig none;
  none.expected_events = 0.0;
  InjectResult quiet = inject_events(ds, rng0, none);
  CHECK(quiet.events.empty());
  for (Index i = 0; i < ds.values.numel(); ++i) {
    CHECK(quiet.dataset.values[i] == ds.values[i]);
  }
  double s2 = 0.0;
  for (Index i = 0; i < quiet.dataset.covariates.numel(); ++i) {
    s2 += quiet.dataset.covariates[i] * quiet.dataset.covariates[i];
  }
  CHECK(s2 / static_cast<double>(quiet.dataset.covariates.numel()) ==
        doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("inject_events affected fraction concentrates at 0.8") {
  TimeSeriesDataset ds = toy_dataset(25, 100, Frequency::hourly, 51);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    InjectConfig cfg;
    cfg.expected_events = 2.0;
    InjectResult res = inject_events(ds, rng, cfg);
    total += static_cast<double>(res.affected.size()) / 25.0;
  }
  CHECK(std::abs(total / 40.0 - 0.8) < 0.02);
}
