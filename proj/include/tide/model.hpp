#ifndef TIDE_MODEL_HPP
#define TIDE_MODEL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tide/batch.hpp"
#include "tide/tape.hpp"
#include "tide/tensor.hpp"

namespace tide {

/// Architecture variants used by the ablation studies.
///  - full: the complete network.
///  - no_temporal_decoder: the per-step temporal decoder is replaced by an
///    affine map of the decoded vector alone (no covariate highway).
///  - no_residuals: every skip connection inside the residual blocks and the
///    global linear residual are removed.
///  - linear_only: just the global residual path, i.e. the affine
///    look-back-to-horizon model the full network contains as a subclass.
enum class Variant { full, no_temporal_decoder, no_residuals, linear_only };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Hyperparameters of the network. Defaults are a mid-sized configuration;
/// benchmark presets override them.
struct ModelConfig {
  Index lookback = 720;              // L
  Index horizon = 96;                // H
  Index covariate_dim = 0;           // r, dynamic covariates per step
  Index temporal_width = 4;          // projected covariate width
  Index hidden_size = 256;           // encoder/decoder internal width
  int num_encoder_layers = 2;
  int num_decoder_layers = 2;
  Index decoder_output_dim = 8;      // p, per-step decoded vector width
  Index temporal_decoder_hidden = 128;
  double dropout_level = 0.3;
  bool layer_norm = true;
  bool rev_in = true;
  Index static_dim = 0;              // s, static attributes per series
  Variant variant = Variant::full;

  /// Throws ConfigError when any field is out of contract.
  void validate() const;

  /// Width of the flattened encoder input: L + (L+H) * temporal_width + s.
  Index encoder_input_width() const {
    return lookback + (lookback + horizon) * temporal_width + static_dim;
  }

  /// Hidden width of the feature-projection block: max(r, 2 * temporal_width).
  Index projection_hidden() const {
    return covariate_dim > 2 * temporal_width ? covariate_dim : 2 * temporal_width;
  }

  bool has_covariates() const { return covariate_dim > 0; }

  bool operator==(const ModelConfig&) const = default;
};

/// Weights of one residual block: a one-hidden-layer ReLU MLP, an affine
/// skip path, and optional output layer norm. Empty tensors mark paths that
/// the configuration removed (skip under no_residuals, layer norm when off).
struct ResidualBlockParams {
  Tensor W1, b1;          // in -> hidden
  Tensor W2, b2;          // hidden -> out
  Tensor W_skip, b_skip;  // in -> out, fully linear
  Tensor ln_gain, ln_bias;

  bool has_skip() const { return W_skip.numel() > 0; }
  bool has_layer_norm() const { return ln_gain.numel() > 0; }
  Index in_dim() const { return W1.rows(); }
  Index out_dim() const { return W2.cols(); }
};

/// Residual block nodes on a tape, for running forward passes.
struct ResidualBlockVars {
  Var W1, b1, W2, b2, W_skip, b_skip, ln_gain, ln_bias;
};

/// All learnable state of the model plus the configuration that shaped it.
struct TiDEParams {
  ModelConfig cfg;
  Index num_series = 0;  // per-series RevIN affine size

  ResidualBlockParams feature_projection;        // present when r > 0
  std::vector<ResidualBlockParams> encoder;
  std::vector<ResidualBlockParams> decoder;
  ResidualBlockParams temporal_decoder;
  Tensor temporal_affine_W, temporal_affine_b;   // no_temporal_decoder variant
  Tensor global_W, global_b;                     // affine L -> H
  Tensor revin_gain, revin_bias;                 // [num_series]

  /// Fresh parameters: uniform [-a, a] weights with a = sqrt(6/(fan_in+fan_out)),
  /// zero biases, unit layer-norm gain, unit RevIN gain.
  static TiDEParams init(const ModelConfig& cfg, Index num_series, std::uint64_t seed);

  /// Visits every parameter tensor in a fixed documented order with its
  /// stable name (e.g. "encoder.block0.W1"). The order defines the
  /// checkpoint layout and the optimizer slot assignment.
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& f);
  void for_each_param(
      const std::function<void(const std::string&, const Tensor&)>& f) const;

  /// Scalar count by traversal; must equal expected_parameter_count.
  Index parameter_count() const;

  /// Closed-form scalar count from the configuration alone.
  static Index expected_parameter_count(const ModelConfig& cfg, Index num_series);
};

/// RevIN statistics of one batch: per-window look-back mean and guarded
/// standard deviation (sigma + 1e-5).
struct RevinStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;  // already guarded
};

/// Per-window standardization of the look-back. Pure value function; the
/// forward pass applies the same arithmetic through tape ops.
std::pair<Tensor, RevinStats> revin_normalize(const Tensor& lookback);

/// Inverse of revin_normalize applied to horizon outputs: y * sigma + mean.
Tensor revin_denormalize(const Tensor& horizon, const RevinStats& stats);

/// Puts a parameter set on a tape. Gradients are requested for every tensor.
struct ModelVars {
  ResidualBlockVars feature_projection;
  std::vector<ResidualBlockVars> encoder;
  std::vector<ResidualBlockVars> decoder;
  ResidualBlockVars temporal_decoder;
  Var temporal_affine_W, temporal_affine_b;
  Var global_W, global_b;
  Var revin_gain, revin_bias;
};
ModelVars register_params(Tape& tape, const TiDEParams& params, bool requires_grad);

/// Arranges existing tape nodes (one per parameter, in for_each_param
/// order) into a ModelVars. Used by gradient-check fixtures that own leaf
/// creation. Throws when the count does not match the traversal.
ModelVars bind_param_vars(const TiDEParams& params, const std::vector<Var>& leaves);

/// One residual block: LN(dropout(W2 relu(W1 x + b1) + b2) + skip(x)).
/// The skip and the layer norm apply only when the block carries them.
Var residual_block(Tape& t, Var x, const ResidualBlockVars& block, double dropout_p,
                   Mode mode, Rng* rng);

/// Applies the shared feature-projection block to every row of a stacked
/// [rows, r] covariate tensor, giving [rows, temporal_width].
Var project_features(Tape& t, Var covariate_rows, const ModelVars& vars,
                     const ModelConfig& cfg, Mode mode, Rng* rng);

/// Dense encoder over the flattened (look-back; projected covariates;
/// static) concatenation: [B, encoder_input_width] -> [B, hidden_size].
Var encode(Tape& t, Var encoder_input, const ModelVars& vars, const ModelConfig& cfg,
           Mode mode, Rng* rng);

/// Dense decoder: [B, hidden_size] -> [B, p * H]. Row layout: the decoded
/// vector for horizon step t (1-based) is g[(t-1)*p : t*p].
Var decode(Tape& t, Var encoding, const ModelVars& vars, const ModelConfig& cfg,
           Mode mode, Rng* rng);

/// Temporal decoder applied per horizon step: rows of [B*H, p + r_proj]
/// (decoded vector next to that step's projected covariates) -> [B, H].
Var temporal_decode(Tape& t, Var decoded_rows, Var future_rows, const ModelVars& vars,
                    const ModelConfig& cfg, Mode mode, Rng* rng);

/// Affine look-back-to-horizon map: [B, L] -> [B, H].
Var global_residual(Tape& t, Var lookback, const ModelVars& vars);

/// Full forward pass over a batch, ending at [B, H] predictions.
/// rng supplies dropout masks and may be null when mode == eval or
/// dropout_level == 0.
Var forward(Tape& t, const TiDEParams& params, const ModelVars& vars,
            const WindowBatch& batch, Mode mode, Rng* rng);

/// Eval-mode forward on a private tape, returning plain values.
Tensor predict(const TiDEParams& params, const WindowBatch& batch);

}  // namespace tide

#endif  // TIDE_MODEL_HPP
