#include "tide/model.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "tide/errors.hpp"

namespace tide {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_temporal_decoder: return "no_temporal_decoder";
    case Variant::no_residuals: return "no_residuals";
    case Variant::linear_only: return "linear_only";
  }
  throw std::logic_error("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no_temporal_decoder") return Variant::no_temporal_decoder;
  if (name == "no_residuals") return Variant::no_residuals;
  if (name == "linear_only") return Variant::linear_only;
  throw ConfigError("unknown variant: " + name);
}

void ModelConfig::validate() const {
  if (lookback < 1) throw ConfigError("lookback must be at least 1");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (covariate_dim < 0) throw ConfigError("covariate_dim must be nonnegative");
  if (covariate_dim == 0 && temporal_width != 0) {
    throw ConfigError("temporal_width must be 0 when covariate_dim is 0");
  }
  if (covariate_dim > 0 && (temporal_width < 1 || temporal_width > covariate_dim)) {
    throw ConfigError("temporal_width must lie in [1, covariate_dim]");
  }
  if (dropout_level < 0.0 || dropout_level >= 1.0) {
    throw ConfigError("dropout_level must lie in [0, 1)");
  }
  if (static_dim < 0) throw ConfigError("static_dim must be nonnegative");
  if (variant == Variant::linear_only) return;  // only the affine path is built
  if (hidden_size < 1) throw ConfigError("hidden_size must be at least 1");
  if (num_encoder_layers < 1) throw ConfigError("num_encoder_layers must be at least 1");
  if (num_decoder_layers < 1) throw ConfigError("num_decoder_layers must be at least 1");
  if (decoder_output_dim < 1) throw ConfigError("decoder_output_dim must be at least 1");
  if (variant != Variant::no_temporal_decoder && temporal_decoder_hidden < 1) {
    throw ConfigError("temporal_decoder_hidden must be at least 1");
  }
}

// ---- initialization ---------------------------------------------------------

namespace {

Tensor glorot(Index in, Index out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  Tensor w({in, out});
  for (Index i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-a, a);
  return w;
}

ResidualBlockParams make_block(Index in, Index hidden, Index out, bool skip, bool ln,
                               Rng& rng) {
  ResidualBlockParams b;
  b.W1 = glorot(in, hidden, rng);
  b.b1 = Tensor({hidden});
  b.W2 = glorot(hidden, out, rng);
  b.b2 = Tensor({out});
  if (skip) {
    b.W_skip = glorot(in, out, rng);
    b.b_skip = Tensor({out});
  }
  if (ln) {
    b.ln_gain = Tensor::full({out}, 1.0);
    b.ln_bias = Tensor({out});
  }
  return b;
}

Index block_count(Index in, Index hidden, Index out, bool skip, bool ln) {
  Index n = in * hidden + hidden + hidden * out + out;
  if (skip) n += in * out + out;
  if (ln) n += 2 * out;
  return n;
}

Index projected_width(const ModelConfig& cfg) {
  return cfg.has_covariates() ? cfg.temporal_width : 0;
}

}  // namespace

TiDEParams TiDEParams::init(const ModelConfig& cfg, Index num_series,
                            std::uint64_t seed) {
  cfg.validate();
  if (num_series < 1) throw ConfigError("num_series must be at least 1");

  TiDEParams p;
  p.cfg = cfg;
  p.num_series = num_series;
  Rng rng(derive_seed(seed, 0x1d17));

  const bool skip = cfg.variant != Variant::no_residuals;
  const bool ln = cfg.layer_norm;

  if (cfg.variant != Variant::linear_only) {
    if (cfg.has_covariates()) {
      p.feature_projection = make_block(cfg.covariate_dim, cfg.projection_hidden(),
                                        cfg.temporal_width, skip, ln, rng);
    }
    const Index enc_in = cfg.encoder_input_width();
    for (int i = 0; i < cfg.num_encoder_layers; ++i) {
      p.encoder.push_back(make_block(i == 0 ? enc_in : cfg.hidden_size, cfg.hidden_size,
                                     cfg.hidden_size, skip, ln, rng));
    }
    for (int i = 0; i < cfg.num_decoder_layers; ++i) {
      const bool last = i == cfg.num_decoder_layers - 1;
      p.decoder.push_back(make_block(cfg.hidden_size, cfg.hidden_size,
                                     last ? cfg.decoder_output_dim * cfg.horizon
                                          : cfg.hidden_size,
                                     skip, ln, rng));
    }
    if (cfg.variant == Variant::no_temporal_decoder) {
      p.temporal_affine_W = glorot(cfg.decoder_output_dim, 1, rng);
      p.temporal_affine_b = Tensor({1});
    } else {
      p.temporal_decoder =
          make_block(cfg.decoder_output_dim + projected_width(cfg),
                     cfg.temporal_decoder_hidden, 1, skip, ln, rng);
    }
  }
  if (cfg.variant != Variant::no_residuals) {
    p.global_W = glorot(cfg.lookback, cfg.horizon, rng);
    p.global_b = Tensor({cfg.horizon});
  }
  if (cfg.rev_in) {
    p.revin_gain = Tensor::full({num_series}, 1.0);
    p.revin_bias = Tensor({num_series});
  }
  return p;
}

// ---- traversal --------------------------------------------------------------

namespace {

template <class F>
void visit_block(ResidualBlockParams& b, const std::string& prefix, F&& f) {
  f(prefix + ".W1", b.W1);
  f(prefix + ".b1", b.b1);
  f(prefix + ".W2", b.W2);
  f(prefix + ".b2", b.b2);
  if (b.has_skip()) {
    f(prefix + ".W_skip", b.W_skip);
    f(prefix + ".b_skip", b.b_skip);
  }
  if (b.has_layer_norm()) {
    f(prefix + ".ln_gain", b.ln_gain);
    f(prefix + ".ln_bias", b.ln_bias);
  }
}

template <class F>
void visit_params(TiDEParams& p, F&& f) {
  const ModelConfig& cfg = p.cfg;
  if (cfg.variant != Variant::linear_only) {
    if (cfg.has_covariates()) visit_block(p.feature_projection, "feature_projection", f);
    for (std::size_t i = 0; i < p.encoder.size(); ++i) {
      visit_block(p.encoder[i], "encoder.block" + std::to_string(i), f);
    }
    for (std::size_t i = 0; i < p.decoder.size(); ++i) {
      visit_block(p.decoder[i], "decoder.block" + std::to_string(i), f);
    }
    if (cfg.variant == Variant::no_temporal_decoder) {
      f("temporal_affine.W", p.temporal_affine_W);
      f("temporal_affine.b", p.temporal_affine_b);
    } else {
      visit_block(p.temporal_decoder, "temporal_decoder", f);
    }
  }
  if (cfg.variant != Variant::no_residuals) {
    f("global_residual.W", p.global_W);
    f("global_residual.b", p.global_b);
  }
  if (cfg.rev_in) {
    f("revin.gain", p.revin_gain);
    f("revin.bias", p.revin_bias);
  }
}

}  // namespace

void TiDEParams::for_each_param(
    const std::function<void(const std::string&, Tensor&)>& f) {
  visit_params(*this, f);
}

void TiDEParams::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& f) const {
  visit_params(const_cast<TiDEParams&>(*this),
               [&f](const std::string& name, Tensor& t) { f(name, t); });
}

Index TiDEParams::parameter_count() const {
  Index n = 0;
  for_each_param([&n](const std::string&, const Tensor& t) { n += t.numel(); });
  return n;
}

Index TiDEParams::expected_parameter_count(const ModelConfig& cfg, Index num_series) {
  const bool skip = cfg.variant != Variant::no_residuals;
  const bool ln = cfg.layer_norm;
  Index n = 0;
  if (cfg.variant != Variant::linear_only) {
    if (cfg.has_covariates()) {
      n += block_count(cfg.covariate_dim, cfg.projection_hidden(), cfg.temporal_width,
                       skip, ln);
    }
    for (int i = 0; i < cfg.num_encoder_layers; ++i) {
      n += block_count(i == 0 ? cfg.encoder_input_width() : cfg.hidden_size,
                       cfg.hidden_size, cfg.hidden_size, skip, ln);
    }
    for (int i = 0; i < cfg.num_decoder_layers; ++i) {
      const bool last = i == cfg.num_decoder_layers - 1;
      n += block_count(cfg.hidden_size, cfg.hidden_size,
                       last ? cfg.decoder_output_dim * cfg.horizon : cfg.hidden_size,
                       skip, ln);
    }
    if (cfg.variant == Variant::no_temporal_decoder) {
      n += cfg.decoder_output_dim + 1;
    } else {
      n += block_count(cfg.decoder_output_dim + projected_width(cfg),
                       cfg.temporal_decoder_hidden, 1, skip, ln);
    }
  }
  if (cfg.variant != Variant::no_residuals) {
    n += cfg.lookback * cfg.horizon + cfg.horizon;
  }
  if (cfg.rev_in) n += 2 * num_series;
  return n;
}

// ---- RevIN ------------------------------------------------------------------

std::pair<Tensor, RevinStats> revin_normalize(const Tensor& lookback) {
  if (lookback.rank() != 2) {
    throw ShapeError("revin_normalize: expected [B, L], shape is " + lookback.shape_str());
  }
  const Index b = lookback.rows();
  const Index l = lookback.cols();
  RevinStats stats;
  stats.mean.resize(b);
  stats.sigma.resize(b);
  Tensor out({b, l});
  ConstMatMap x = lookback.mat();
  for (Index i = 0; i < b; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double sigma = std::sqrt(var) + 1e-5;
    stats.mean(i) = mu;
    stats.sigma(i) = sigma;
    out.mat().row(i) = ((x.row(i).array() - mu) / sigma).matrix();
  }
  return {std::move(out), std::move(stats)};
}

Tensor revin_denormalize(const Tensor& horizon, const RevinStats& stats) {
  if (horizon.rank() != 2) {
    throw ShapeError("revin_denormalize: expected [B, H], shape is " + horizon.shape_str());
  }
  if (stats.mean.size() != horizon.rows()) {
    throw ShapeError("revin_denormalize: " + std::to_string(stats.mean.size()) +
                     " stats rows for input " + horizon.shape_str());
  }
  Tensor out({horizon.rows(), horizon.cols()});
  out.mat() = ((horizon.mat().array().colwise() * stats.sigma.array()).colwise() +
               stats.mean.array())
                  .matrix();
  return out;
}

// ---- tape assembly ----------------------------------------------------------

namespace {

// Shared assembly walk: register_params and bind_param_vars must hand out
// Vars in exactly the for_each_param traversal order.
template <class Next>
ResidualBlockVars block_vars(const ResidualBlockParams& b, Next&& next) {
  ResidualBlockVars v;
  v.W1 = next(b.W1);
  v.b1 = next(b.b1);
  v.W2 = next(b.W2);
  v.b2 = next(b.b2);
  if (b.has_skip()) {
    v.W_skip = next(b.W_skip);
    v.b_skip = next(b.b_skip);
  }
  if (b.has_layer_norm()) {
    v.ln_gain = next(b.ln_gain);
    v.ln_bias = next(b.ln_bias);
  }
  return v;
}

template <class Next>
ModelVars assemble_vars(const TiDEParams& p, Next&& next) {
  ModelVars v;
  const ModelConfig& cfg = p.cfg;
  if (cfg.variant != Variant::linear_only) {
    if (cfg.has_covariates()) {
      v.feature_projection = block_vars(p.feature_projection, next);
    }
    for (const ResidualBlockParams& b : p.encoder) {
      v.encoder.push_back(block_vars(b, next));
    }
    for (const ResidualBlockParams& b : p.decoder) {
      v.decoder.push_back(block_vars(b, next));
    }
    if (cfg.variant == Variant::no_temporal_decoder) {
      v.temporal_affine_W = next(p.temporal_affine_W);
      v.temporal_affine_b = next(p.temporal_affine_b);
    } else {
      v.temporal_decoder = block_vars(p.temporal_decoder, next);
    }
  }
  if (cfg.variant != Variant::no_residuals) {
    v.global_W = next(p.global_W);
    v.global_b = next(p.global_b);
  }
  if (cfg.rev_in) {
    v.revin_gain = next(p.revin_gain);
    v.revin_bias = next(p.revin_bias);
  }
  return v;
}

}  // namespace

ModelVars register_params(Tape& t, const TiDEParams& p, bool requires_grad) {
  return assemble_vars(
      p, [&t, requires_grad](const Tensor& value) { return t.leaf(value, requires_grad); });
}

ModelVars bind_param_vars(const TiDEParams& p, const std::vector<Var>& leaves) {
  std::size_t k = 0;
  ModelVars v = assemble_vars(p, [&leaves, &k](const Tensor&) {
    if (k >= leaves.size()) {
      throw std::invalid_argument("bind_param_vars: too few vars for the parameter set");
    }
    return leaves[k++];
  });
  if (k != leaves.size()) {
    throw std::invalid_argument("bind_param_vars: " + std::to_string(leaves.size()) +
                                " vars for " + std::to_string(k) + " parameters");
  }
  return v;
}

// ---- forward ----------------------------------------------------------------

Var residual_block(Tape& t, Var x, const ResidualBlockVars& block, double dropout_p,
                   Mode mode, Rng* rng) {
  Var h = relu(t, affine(t, x, block.W1, block.b1));
  Var o = affine(t, h, block.W2, block.b2);
  if (mode == Mode::train && dropout_p > 0.0) {
    if (rng == nullptr) {
      throw std::invalid_argument("residual_block: train-mode dropout needs an rng");
    }
    o = dropout(t, o, dropout_p, mode, *rng);
  }
  if (block.W_skip.valid()) {
    o = add(t, o, affine(t, x, block.W_skip, block.b_skip));
  }
  if (block.ln_gain.valid()) {
    o = layer_norm(t, o, block.ln_gain, block.ln_bias);
  }
  return o;
}

Var project_features(Tape& t, Var covariate_rows, const ModelVars& vars,
                     const ModelConfig& cfg, Mode mode, Rng* rng) {
  const Tensor& xv = t.value(covariate_rows);
  if (xv.rank() != 2 || xv.cols() != cfg.covariate_dim) {
    throw ShapeError("project_features: expected [rows, " +
                     std::to_string(cfg.covariate_dim) + "], shape is " + xv.shape_str());
  }
  return residual_block(t, covariate_rows, vars.feature_projection, cfg.dropout_level,
                        mode, rng);
}

Var encode(Tape& t, Var encoder_input, const ModelVars& vars, const ModelConfig& cfg,
           Mode mode, Rng* rng) {
  const Tensor& xv = t.value(encoder_input);
  if (xv.rank() != 2 || xv.cols() != cfg.encoder_input_width()) {
    throw ShapeError("encode: expected [B, " + std::to_string(cfg.encoder_input_width()) +
                     "], shape is " + xv.shape_str());
  }
  Var e = encoder_input;
  for (const ResidualBlockVars& b : vars.encoder) {
    e = residual_block(t, e, b, cfg.dropout_level, mode, rng);
  }
  return e;
}

Var decode(Tape& t, Var encoding, const ModelVars& vars, const ModelConfig& cfg,
           Mode mode, Rng* rng) {
  const Tensor& xv = t.value(encoding);
  if (xv.rank() != 2 || xv.cols() != cfg.hidden_size) {
    throw ShapeError("decode: expected [B, " + std::to_string(cfg.hidden_size) +
                     "], shape is " + xv.shape_str());
  }
  Var g = encoding;
  for (const ResidualBlockVars& b : vars.decoder) {
    g = residual_block(t, g, b, cfg.dropout_level, mode, rng);
  }
  return g;
}

Var temporal_decode(Tape& t, Var decoded_rows, Var future_rows, const ModelVars& vars,
                    const ModelConfig& cfg, Mode mode, Rng* rng) {
  const Tensor& dv = t.value(decoded_rows);
  if (dv.rank() != 2 || dv.cols() != cfg.decoder_output_dim ||
      dv.rows() % cfg.horizon != 0) {
    throw ShapeError("temporal_decode: expected [B*" + std::to_string(cfg.horizon) +
                     ", " + std::to_string(cfg.decoder_output_dim) + "], shape is " +
                     dv.shape_str());
  }
  const Index batch = dv.rows() / cfg.horizon;
  Var out_rows;
  if (cfg.variant == Variant::no_temporal_decoder) {
    out_rows = affine(t, decoded_rows, vars.temporal_affine_W, vars.temporal_affine_b);
  } else {
    Var in = decoded_rows;
    if (future_rows.valid()) {
      const Tensor& fv = t.value(future_rows);
      if (fv.rows() != dv.rows()) {
        throw ShapeError("temporal_decode: decoded rows " + dv.shape_str() +
                         " do not align with future covariate rows " + fv.shape_str());
      }
      in = concat_cols(t, {decoded_rows, future_rows});
    }
    out_rows = residual_block(t, in, vars.temporal_decoder, cfg.dropout_level, mode, rng);
  }
  return reshape(t, out_rows, {batch, cfg.horizon});
}

Var global_residual(Tape& t, Var lookback, const ModelVars& vars) {
  return affine(t, lookback, vars.global_W, vars.global_b);
}

namespace {

void check_batch(const WindowBatch& batch, const ModelConfig& cfg) {
  if (batch.lookback.rank() != 2 || batch.lookback.cols() != cfg.lookback) {
    throw ShapeError("forward: look-back shape " + batch.lookback.shape_str() +
                     " does not match [B, " + std::to_string(cfg.lookback) + "]");
  }
  const Index b = batch.lookback.rows();
  if (cfg.has_covariates()) {
    const std::vector<Index> want{b, cfg.lookback + cfg.horizon, cfg.covariate_dim};
    if (batch.covariates.shape() != want) {
      throw ShapeError("forward: covariate shape " + batch.covariates.shape_str() +
                       " does not match " + Tensor::shape_str(want));
    }
  }
  if (cfg.static_dim > 0) {
    const std::vector<Index> want{b, cfg.static_dim};
    if (batch.static_attrs.shape() != want) {
      throw ShapeError("forward: static shape " + batch.static_attrs.shape_str() +
                       " does not match " + Tensor::shape_str(want));
    }
  }
  if (cfg.rev_in && static_cast<Index>(batch.series_index.size()) != b) {
    throw ShapeError("forward: " + std::to_string(batch.series_index.size()) +
                     " series indices for batch of " + std::to_string(b));
  }
}

}  // namespace

Var forward(Tape& t, const TiDEParams& params, const ModelVars& vars,
            const WindowBatch& batch, Mode mode, Rng* rng) {
  const ModelConfig& cfg = params.cfg;
  check_batch(batch, cfg);
  const Index b = batch.lookback.rows();
  const Index span = cfg.lookback + cfg.horizon;

  Var y_in;
  RevinStats stats;
  if (cfg.rev_in) {
    auto [normalized, st] = revin_normalize(batch.lookback);
    stats = std::move(st);
    Var norm_leaf = t.leaf(std::move(normalized));
    y_in = series_affine(t, norm_leaf, vars.revin_gain, vars.revin_bias,
                         batch.series_index);
  } else {
    y_in = t.leaf(batch.lookback);
  }

  Var pred;
  if (cfg.variant == Variant::linear_only) {
    pred = global_residual(t, y_in, vars);
  } else {
    Var xproj_flat;
    if (cfg.has_covariates()) {
      Var cov_rows = reshape(t, t.leaf(batch.covariates),
                             {b * span, cfg.covariate_dim});
      Var projected = project_features(t, cov_rows, vars, cfg, mode, rng);
      xproj_flat = reshape(t, projected, {b, span * cfg.temporal_width});
    }

    std::vector<Var> parts{y_in};
    if (xproj_flat.valid()) parts.push_back(xproj_flat);
    if (cfg.static_dim > 0) parts.push_back(t.leaf(batch.static_attrs));
    Var enc_in = parts.size() == 1 ? parts[0] : concat_cols(t, parts);

    Var e = encode(t, enc_in, vars, cfg, mode, rng);
    Var g = decode(t, e, vars, cfg, mode, rng);
    Var d_rows = reshape(t, g, {b * cfg.horizon, cfg.decoder_output_dim});

    Var fut_rows;
    if (xproj_flat.valid()) {
      Var fut = slice_cols(t, xproj_flat, cfg.lookback * cfg.temporal_width,
                           cfg.horizon * cfg.temporal_width);
      fut_rows = reshape(t, fut, {b * cfg.horizon, cfg.temporal_width});
    }
    pred = temporal_decode(t, d_rows, fut_rows, vars, cfg, mode, rng);

    if (cfg.variant != Variant::no_residuals) {
      pred = add(t, pred, global_residual(t, y_in, vars));
    }
  }

  if (cfg.rev_in) {
    Var raw = series_affine_inverse(t, pred, vars.revin_gain, vars.revin_bias,
                                    batch.series_index);
    pred = row_affine_const(t, raw, stats.sigma, stats.mean);
  }
  return pred;
}

Tensor predict(const TiDEParams& params, const WindowBatch& batch) {
  Tape tape;
  ModelVars vars = register_params(tape, params, false);
  Var out = forward(tape, params, vars, batch, Mode::eval, nullptr);
  return tape.value(out);
}

}  // namespace tide
