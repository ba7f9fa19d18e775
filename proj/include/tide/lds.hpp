#ifndef TIDE_LDS_HPP
#define TIDE_LDS_HPP

#include <cstdint>
#include <vector>

#include "tide/data.hpp"
#include "tide/tensor.hpp"

namespace tide::lds {

/// Linear dynamical system h_{t+1} = A h_t + B u_t + eta, y_t = C h_{t+1} +
/// D u_t + xi with h_0 = 0 (state rows are stored one ahead of the inputs
/// that produced them; see Rollout).
struct LdsParams {
  Tensor A;  // [d, d], symmetric PSD, largest eigenvalue = gamma
  Tensor B;  // [d, n]
  Tensor C;  // [m, d]
  Tensor D;  // [m, n]
  double eta_std = 0.1;  // transition-noise scale
  double xi_std = 0.0;   // observation-noise scale
  double gamma = 0.95;   // spectral bound of A

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
  Index output_dim() const { return C.rows(); }
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_norm(const Tensor& A, double tol = 1e-13,
                            Index max_iters = 200000);

/// Draws a random system: A is a rescaled Wishart matrix (G Gᵀ with Gaussian
/// G, eigenvalues pushed to [0, gamma]); B, C, D are Gaussian, rescaled to
/// Frobenius norm 1 whenever they exceed it.
LdsParams sample_lds(std::uint64_t seed, Index d = 30, Index n = 5, Index m = 1,
                     double gamma = 0.95);

/// One simulated trajectory. Row i of x/seasonal/y/eta/xi belongs to step
/// i+1 in 1-based counting; h has T+1 rows with h.row(0) = 0 and
/// h.row(i+1) = A h.row(i) + B u.row(i) + eta.row(i), where u = x + seasonal.
struct Rollout {
  Tensor x;         // [T, n] observable inputs
  Tensor seasonal;  // [T, n] hidden cosine inputs (zeros when disabled)
  Tensor y;         // [T, m]
  Tensor h;         // [T+1, d]
  Tensor eta;       // [T, d]
  Tensor xi;        // [T, m]

  Index steps() const { return y.rows(); }
};

inline constexpr Index kSeasonalPeriods[6] = {10, 20, 40, 80, 160, 320};

/// Sum of six unit-amplitude cosines with the periods above, replicated to
/// all n input coordinates: the hidden seasonal drive.
Tensor seasonal_input(Index num_steps, Index input_dim);

/// Simulates the recurrences with the given inputs and fresh noise.
Rollout simulate(const LdsParams& p, const Tensor& x, const Tensor& seasonal,
                 std::uint64_t noise_seed);

/// Samples x ~ N(0, I) per step, optionally adds the seasonal drive, and
/// simulates.
Rollout rollout(const LdsParams& p, Index num_steps, std::uint64_t seed,
                bool seasonality);

/// Exact one-step predictor: with x_history = (x_1, ..., x_t) as rows and
/// y_prev = y_{t-1},
///   yhat_t = y_{t-1} + (CB+D) x_t - D x_{t-1}
///            + sum_{i=1}^{t-1} C (A^i - A^{i-1}) B x_{t-i}.
/// Requires t >= 2. On a noiseless trajectory this reproduces y_t exactly.
Tensor lds_predictor(const LdsParams& p, const Tensor& x_history,
                     const Tensor& y_prev);

/// The predictor above evaluated at every admissible step: row j of the
/// result is yhat for step j+2, i.e. the prediction of y.row(j+1). Shape
/// [T-1, m].
Tensor exact_predictions(const LdsParams& p, const Tensor& x, const Tensor& y);

/// Truncated autoregressive coefficients: yhat_t = M * window with the window
/// layout (x_{t-k}, ..., x_{t-1}, x_t, y_{t-1}).
struct ArCoeffs {
  Tensor M;  // [m, (k+1) n + m]
  Index k = 0;
  Index input_dim = 0;
  Index output_dim = 0;
};

/// Explicit construction of the truncated predictor from the system matrices:
/// the x_t block is CB + D, the x_{t-1} block is C(A - I)B - D, the x_{t-1-j}
/// blocks are C(A^{j+1} - A^j)B, and the y_{t-1} block is the identity.
ArCoeffs build_m_theta(const LdsParams& p, Index k);

/// Assembles the window vector for 1-based step t (requires k+1 <= t and
/// 2 <= t): rows t-k..t of x and row t-1 of y, concatenated.
Tensor ar_window(const Tensor& x, const Tensor& y, Index t, Index k);

Tensor ar_predict(const ArCoeffs& coeffs, const Tensor& window);

/// For each k: max over admissible t of the L2 gap between the truncated
/// predictor and the exact one on this trajectory. Decays like gamma^k.
std::vector<double> decay_curve(const LdsParams& p, const Rollout& r,
                                const std::vector<Index>& ks);

struct DecayFit {
  double slope = 0.0;      // d log(deviation) / dk
  double intercept = 0.0;
};

/// Least-squares fit of log(deviation) against k, ignoring non-positive
/// deviations (below the floating-point floor).
DecayFit fit_log_slope(const std::vector<Index>& ks,
                       const std::vector<double>& deviations);

inline constexpr Index kLdsLookback = 320;
inline constexpr Index kLdsHorizon = 320;
inline constexpr Index kLdsTrainSteps = 1640;
inline constexpr Index kLdsValSteps = 740;
inline constexpr Index kLdsTestSteps = 740;

/// The simulated supervised dataset: four trajectories sharing one system,
/// one input sequence, and one seasonal drive, differing only in their
/// transition noise. Exported in the panel format with x as observable
/// covariates; the seasonal drive stays hidden.
struct LdsDataset {
  TimeSeriesDataset dataset;  // values [4, 3120], covariates [3120, n]
  SplitSpec spec;             // 1640 / 2380
  LdsParams params;
  Tensor seasonal;            // [3120, n]
  Index train_examples = 0;   // 4000 with the 320/320 windows
  Index val_examples = 0;     // 400
  Index test_examples = 0;    // 400
};

LdsDataset make_lds_dataset(std::uint64_t seed);

/// Anchor enumeration used for the dataset above: windows lie fully inside
/// their segment and the anchor range is half-open, giving S - L - H windows
/// per series for a segment of S steps.
std::vector<Index> lds_anchors(const SplitSpec& spec, Index num_steps,
                               Segment segment);

}  // namespace tide::lds

#endif  // TIDE_LDS_HPP
