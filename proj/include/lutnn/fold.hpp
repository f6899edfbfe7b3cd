#pragma once

#include "lutnn/model.hpp"

namespace lutnn {

// Folding of normalization layers into adjacent weight layers. All
// functions are pure: they return the transformed layer/model.

// Fold a per-output-channel normalization that follows the layer's linear
// output into the layer itself:
//   w <- (gamma/sigma) w      b <- (gamma/sigma) b + beta - (gamma/sigma) m
// A zero bias tensor is created when the layer has none. The returned
// layer has no norm params.
LayerSpec fold_bn_after(const LayerSpec& layer);

// Fold normalizations applied to the layer's *inputs* (one NormParams per
// input channel) into the layer. The bias update uses the original
// weights, then the weights are rescaled -- in that order:
//   b+ <- b+ + sum_i (beta_i - (gamma_i/sigma_i) m_i) w+_i
//   w+_i <- (gamma_i/sigma_i) w+_i
// For conv layers each input-channel scale/offset applies to every kernel
// tap of that channel. Rejected for padded convs: the offset term does not
// reach zero-padded border taps, so the fold would change the function.
LayerSpec fold_bn_before(const LayerSpec& layer, const std::vector<NormParams>& input_norms);

// Weight-normalization fold: w <- s * w per output channel, bias unchanged.
// `scale` holds one factor per output channel (or a single shared factor).
LayerSpec fold_weight_norm(const LayerSpec& layer, const std::vector<float>& scale);

// Fold every attached norm in the model (fold-after direction). Idempotent
// on a model without norm params.
FloatModel fold_model(const FloatModel& model);

} // namespace lutnn
