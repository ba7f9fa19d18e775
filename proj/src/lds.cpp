#include "tide/lds.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tide/errors.hpp"
#include "tide/rng.hpp"

namespace tide::lds {

namespace {

Tensor gaussian_tensor(std::vector<Index> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.numel(); ++i) t[i] = rng.normal();
  return t;
}

void clip_frobenius(Tensor& t) {
  const double norm = t.flat().norm();
  if (norm > 1.0) t.flat() /= norm;
}

void check_system(const LdsParams& p) {
  const Index d = p.A.rows();
  const Index n = p.B.cols();
  const Index m = p.C.rows();
  if (p.A.cols() != d || p.B.rows() != d || p.C.cols() != d || p.D.rows() != m ||
      p.D.cols() != n) {
    throw ShapeError("lds: inconsistent system shapes A" + p.A.shape_str() + " B" +
                     p.B.shape_str() + " C" + p.C.shape_str() + " D" + p.D.shape_str());
  }
}

}  // namespace

double power_iteration_norm(const Tensor& A, double tol, Index max_iters) {
  if (A.rows() != A.cols()) {
    throw ShapeError("power_iteration_norm: matrix must be square, shape is " +
                     A.shape_str());
  }
  const Index d = A.rows();
  Rng rng(0x9e1775);  // fixed probe start, deterministic across calls
  Eigen::VectorXd v(d);
  for (Index i = 0; i < d; ++i) v(i) = 1.0 + 0.01 * rng.normal();
  v.normalize();

  double lambda = 0.0;
  for (Index it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = A.mat() * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // A annihilates the probe: spectrum at 0
    v = w / norm;
    const double next = v.dot(A.mat() * v);
    if (std::abs(next - lambda) <= tol * std::max(std::abs(next), 1e-30)) {
      return next;
    }
    lambda = next;
  }
  return lambda;
}

LdsParams sample_lds(std::uint64_t seed, Index d, Index n, Index m, double gamma) {
  if (d < 1 || n < 1 || m < 1) {
    throw ConfigError("sample_lds: dimensions must be positive");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("sample_lds: gamma must lie in (0, 1)");
  }
  Rng rng(derive_seed(seed, 0x1d5a));
  LdsParams p;
  p.gamma = gamma;

  const Tensor G = gaussian_tensor({d, d}, rng);
  p.A = Tensor({d, d});
  p.A.mat() = G.mat() * G.mat().transpose();
  p.A.mat() = 0.5 * (p.A.mat() + p.A.mat().transpose()).eval();  // exact symmetry
  const double top = power_iteration_norm(p.A);
  if (top <= 0.0) throw ConfigError("sample_lds: degenerate Wishart draw");
  p.A.mat() *= gamma / top;

  p.B = gaussian_tensor({d, n}, rng);
  p.C = gaussian_tensor({m, d}, rng);
  p.D = gaussian_tensor({m, n}, rng);
  clip_frobenius(p.B);
  clip_frobenius(p.C);
  clip_frobenius(p.D);
  return p;
}

Tensor seasonal_input(Index num_steps, Index input_dim) {
  Tensor s({num_steps, input_dim});
  for (Index t = 0; t < num_steps; ++t) {
    double v = 0.0;
    for (Index period : kSeasonalPeriods) {
      v += std::cos(2.0 * std::numbers::pi * static_cast<double>(t) /
                    static_cast<double>(period));
    }
    s.mat().row(t).setConstant(v);
  }
  return s;
}

Rollout simulate(const LdsParams& p, const Tensor& x, const Tensor& seasonal,
                 std::uint64_t noise_seed) {
  check_system(p);
  const Index T = x.rows();
  const Index n = p.input_dim();
  const Index d = p.state_dim();
  const Index m = p.output_dim();
  if (x.cols() != n) {
    throw ShapeError("simulate: x has " + std::to_string(x.cols()) +
                     " columns, system expects " + std::to_string(n));
  }
  check_same_shape(x, seasonal, "simulate: x vs seasonal");

  Rollout r;
  r.x = x;
  r.seasonal = seasonal;
  r.h = Tensor({T + 1, d});
  r.y = Tensor({T, m});

  Rng rng(derive_seed(noise_seed, 0xe7a));
  r.eta = Tensor({T, d});
  r.xi = Tensor({T, m});
  for (Index i = 0; i < r.eta.numel(); ++i) r.eta[i] = p.eta_std * rng.normal();
  for (Index i = 0; i < r.xi.numel(); ++i) r.xi[i] = p.xi_std * rng.normal();

  for (Index t = 0; t < T; ++t) {
    const Eigen::VectorXd u = (x.mat().row(t) + seasonal.mat().row(t)).transpose();
    r.h.mat().row(t + 1).transpose() =
        p.A.mat() * r.h.mat().row(t).transpose() + p.B.mat() * u +
        r.eta.mat().row(t).transpose();
    r.y.mat().row(t).transpose() = p.C.mat() * r.h.mat().row(t + 1).transpose() +
                                   p.D.mat() * u + r.xi.mat().row(t).transpose();
  }
  return r;
}

Rollout rollout(const LdsParams& p, Index num_steps, std::uint64_t seed,
                bool seasonality) {
  if (num_steps < 1) throw ConfigError("rollout: need at least one step");
  Rng rng(derive_seed(seed, 0x1197));
  const Tensor x = gaussian_tensor({num_steps, p.input_dim()}, rng);
  const Tensor s = seasonality ? seasonal_input(num_steps, p.input_dim())
                               : Tensor({num_steps, p.input_dim()});
  return simulate(p, x, s, derive_seed(seed, 0x401e));
}

Tensor lds_predictor(const LdsParams& p, const Tensor& x_history,
                     const Tensor& y_prev) {
  check_system(p);
  const Index t = x_history.rows();
  if (t < 2) {
    throw std::invalid_argument("lds_predictor: needs at least two history steps");
  }
  if (x_history.cols() != p.input_dim() || y_prev.numel() != p.output_dim()) {
    throw ShapeError("lds_predictor: history/system shape mismatch");
  }
  const Index d = p.state_dim();

  Eigen::VectorXd yhat = y_prev.flat();
  yhat += (p.C.mat() * p.B.mat() + p.D.mat()) * x_history.mat().row(t - 1).transpose();
  yhat -= p.D.mat() * x_history.mat().row(t - 2).transpose();

  MatrixRM prev = MatrixRM::Identity(d, d);  // A^{i-1}
  MatrixRM cur(d, d);
  for (Index i = 1; i <= t - 1; ++i) {
    cur = p.A.mat() * prev;  // A^i
    // x_{t-i} is row t-i-1 in zero-based storage.
    yhat += p.C.mat() * ((cur - prev) * (p.B.mat() * x_history.mat()
                                                        .row(t - i - 1)
                                                        .transpose()));
    prev = cur;
  }
  Tensor out({p.output_dim()});
  out.flat() = yhat;
  return out;
}

Tensor exact_predictions(const LdsParams& p, const Tensor& x, const Tensor& y) {
  check_system(p);
  const Index T = x.rows();
  const Index n = p.input_dim();
  const Index m = p.output_dim();
  if (x.cols() != n || y.cols() != m || y.rows() != T) {
    throw ShapeError("exact_predictions: trajectory shape mismatch");
  }
  if (T < 2) throw std::invalid_argument("exact_predictions: need T >= 2");
  const Index d = p.state_dim();

  // W_i = C (A^i - A^{i-1}) B for i = 1..T-1.
  std::vector<MatrixRM> W;
  W.reserve(static_cast<std::size_t>(T - 1));
  MatrixRM prev = MatrixRM::Identity(d, d);
  MatrixRM cur(d, d);
  for (Index i = 1; i <= T - 1; ++i) {
    cur = p.A.mat() * prev;
    W.push_back(p.C.mat() * (cur - prev) * p.B.mat());
    prev = cur;
  }

  const MatrixRM CBD = p.C.mat() * p.B.mat() + p.D.mat();
  Tensor out({T - 1, m});
  for (Index t = 2; t <= T; ++t) {
    Eigen::VectorXd yhat = y.mat().row(t - 2).transpose();
    yhat += CBD * x.mat().row(t - 1).transpose();
    yhat -= p.D.mat() * x.mat().row(t - 2).transpose();
    for (Index i = 1; i <= t - 1; ++i) {
      yhat += W[static_cast<std::size_t>(i - 1)] * x.mat().row(t - i - 1).transpose();
    }
    out.mat().row(t - 2) = yhat.transpose();
  }
  return out;
}

ArCoeffs build_m_theta(const LdsParams& p, Index k) {
  check_system(p);
  if (k < 1) throw std::invalid_argument("build_m_theta: k must be >= 1");
  const Index d = p.state_dim();
  const Index n = p.input_dim();
  const Index m = p.output_dim();

  ArCoeffs coeffs;
  coeffs.k = k;
  coeffs.input_dim = n;
  coeffs.output_dim = m;
  coeffs.M = Tensor({m, (k + 1) * n + m});
  auto block_of = [&](Index i) {  // columns of the x_{t-i} block
    return coeffs.M.mat().block(0, (k - i) * n, m, n);
  };

  block_of(0) = p.C.mat() * p.B.mat() + p.D.mat();  // x_t

  MatrixRM prev = MatrixRM::Identity(d, d);
  MatrixRM cur(d, d);
  for (Index i = 1; i <= k; ++i) {
    cur = p.A.mat() * prev;
    block_of(i) = p.C.mat() * (cur - prev) * p.B.mat();
    prev = cur;
  }
  block_of(1) -= p.D.mat();  // x_{t-1} carries the -D correction

  coeffs.M.mat().block(0, (k + 1) * n, m, m) = MatrixRM::Identity(m, m);
  return coeffs;
}

Tensor ar_window(const Tensor& x, const Tensor& y, Index t, Index k) {
  const Index n = x.cols();
  const Index m = y.cols();
  if (t < 2 || t < k + 1 || t > x.rows() || y.rows() < t - 1) {
    throw std::invalid_argument("ar_window: need k+1 <= t <= T and t >= 2, got t=" +
                                std::to_string(t) + ", k=" + std::to_string(k));
  }
  Tensor w({(k + 1) * n + m});
  for (Index j = 0; j <= k; ++j) {
    // Leftmost block is x_{t-k}; storage row of x_s is s-1.
    w.flat().segment(j * n, n) = x.mat().row(t - k + j - 1).transpose();
  }
  w.flat().tail(m) = y.mat().row(t - 2).transpose();
  return w;
}

Tensor ar_predict(const ArCoeffs& coeffs, const Tensor& window) {
  if (window.numel() != coeffs.M.cols()) {
    throw ShapeError("ar_predict: window has " + std::to_string(window.numel()) +
                     " entries, coefficients expect " + std::to_string(coeffs.M.cols()));
  }
  Tensor out({coeffs.output_dim});
  out.flat() = coeffs.M.mat() * window.flat();
  return out;
}

std::vector<double> decay_curve(const LdsParams& p, const Rollout& r,
                                const std::vector<Index>& ks) {
  const Index T = r.steps();
  for (Index k : ks) {
    if (k < 1 || k > T - 1) {
      throw std::invalid_argument("decay_curve: k=" + std::to_string(k) +
                                  " outside [1, T-1] with T=" + std::to_string(T));
    }
  }
  const Tensor exact = exact_predictions(p, r.x, r.y);

  std::vector<double> out;
  out.reserve(ks.size());
  for (Index k : ks) {
    const ArCoeffs coeffs = build_m_theta(p, k);
    double worst = 0.0;
    for (Index t = std::max<Index>(k + 1, 2); t <= T; ++t) {
      const Tensor w = ar_window(r.x, r.y, t, k);
      const Tensor pred = ar_predict(coeffs, w);
      const double gap = (pred.flat() - exact.mat().row(t - 2).transpose()).norm();
      worst = std::max(worst, gap);
    }
    out.push_back(worst);
  }
  return out;
}

DecayFit fit_log_slope(const std::vector<Index>& ks,
                       const std::vector<double>& deviations) {
  if (ks.size() != deviations.size() || ks.size() < 2) {
    throw std::invalid_argument("fit_log_slope: need matching lists with >= 2 points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  Index count = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (deviations[i] <= 0.0) continue;  // below the floating-point floor
    const double xk = static_cast<double>(ks[i]);
    const double yv = std::log(deviations[i]);
    sx += xk;
    sy += yv;
    sxx += xk * xk;
    sxy += xk * yv;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("fit_log_slope: fewer than 2 usable points");
  const double denom = static_cast<double>(count) * sxx - sx * sx;
  DecayFit fit;
  fit.slope = (static_cast<double>(count) * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / static_cast<double>(count);
  return fit;
}

std::vector<Index> lds_anchors(const SplitSpec& spec, Index num_steps,
                               Segment segment) {
  const SegmentRange range = segment_range(spec, num_steps, segment);
  std::vector<Index> anchors;
  for (Index t = range.begin + kLdsLookback; t < range.end - kLdsHorizon; ++t) {
    anchors.push_back(t);
  }
  return anchors;
}

LdsDataset make_lds_dataset(std::uint64_t seed) {
  const Index T = kLdsTrainSteps + kLdsValSteps + kLdsTestSteps;
  LdsDataset out;
  out.params = sample_lds(derive_seed(seed, 0xa2), 30, 5, 1, 0.95);

  Rng xrng(derive_seed(seed, 0xa3));
  const Tensor x = gaussian_tensor({T, out.params.input_dim()}, xrng);
  out.seasonal = seasonal_input(T, out.params.input_dim());

  const Index num_series = 4;
  out.dataset.values = Tensor({num_series, T});
  for (Index s = 0; s < num_series; ++s) {
    const Rollout r = simulate(out.params, x, out.seasonal,
                               derive_seed(seed, 0xb0 + static_cast<std::uint64_t>(s)));
    out.dataset.values.mat().row(s) = r.y.mat().col(0).transpose();
    out.dataset.series_names.push_back("lds" + std::to_string(s));
  }
  out.dataset.covariates = x;
  out.dataset.frequency = Frequency::hourly;
  const std::int64_t t0 = unix_from_civil(2016, 1, 1);
  for (Index t = 0; t < T; ++t) out.dataset.timestamps.push_back(t0 + t * 3600);

  out.spec.train_end = kLdsTrainSteps;
  out.spec.val_end = kLdsTrainSteps + kLdsValSteps;

  const Index per_train =
      static_cast<Index>(lds_anchors(out.spec, T, Segment::train).size());
  const Index per_val = static_cast<Index>(lds_anchors(out.spec, T, Segment::val).size());
  const Index per_test =
      static_cast<Index>(lds_anchors(out.spec, T, Segment::test).size());
  out.train_examples = num_series * per_train;
  out.val_examples = num_series * per_val;
  out.test_examples = num_series * per_test;
  return out;
}

}  // namespace tide::lds
