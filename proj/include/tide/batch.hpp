#ifndef TIDE_BATCH_HPP
#define TIDE_BATCH_HPP

#include <vector>

#include "tide/tensor.hpp"

namespace tide {

/// One mini-batch of forecasting windows, possibly drawn from several
/// series. Row b is anchored at step anchor_t[b] of series series_index[b]:
/// the look-back covers steps [anchor_t - L, anchor_t), the target covers
/// [anchor_t, anchor_t + H), and the covariate slab spans both.
struct WindowBatch {
  Tensor lookback;            // [B, L]
  Tensor target;              // [B, H]
  Tensor covariates;          // [B, L+H, r]
  Tensor static_attrs;        // [B, s]
  std::vector<int> series_index;
  std::vector<Index> anchor_t;

  Index size() const { return lookback.rank() == 2 ? lookback.rows() : 0; }
};

}  // namespace tide

#endif  // TIDE_BATCH_HPP
