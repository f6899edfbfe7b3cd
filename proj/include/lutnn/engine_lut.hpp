#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lutnn/tables.hpp"

namespace lutnn {

// Map real inputs to nearest-level indices of the first layer's incoming
// activation codebook (ties away from zero; out-of-range values clamp).
std::vector<uint16_t> quantize_input(std::span<const float> input,
                                     const std::vector<double>& levels);

struct LutForwardResult {
    std::vector<int64_t> logits; // final-layer raw accumulators, one per output
    std::vector<int> topk;       // best-first output indices
};

// Per-layer intermediates for equivalence testing.
struct LutTrace {
    std::vector<std::vector<int64_t>> accumulators;
    std::vector<std::vector<uint16_t>> out_indices; // hidden layers only
};

// Integer-only forward pass over the product LUTs: per unit, sum LUT
// entries plus the bias term, arithmetic-shift the accumulator right by s,
// and index the activation table. The final layer keeps the full-precision
// accumulator. The hot path performs only table loads, integer additions,
// shifts, and comparisons; row bases and conv tap offsets are pre-scaled
// at construction so no multiplications survive into the per-input loops.
class LutEngine {
public:
    explicit LutEngine(const QuantizedModel& model); // non-owning reference

    LutForwardResult forward(std::span<const uint16_t> input_indices, int topk,
                             LutTrace* trace = nullptr) const;
    std::vector<LutForwardResult> forward_batch(const std::vector<std::vector<uint16_t>>& inputs,
                                                int topk, int threads = 1) const;

    const QuantizedModel& model() const { return *model_; }

private:
    const QuantizedModel* model_;
    // weight_indices pre-multiplied by the LUT column count, per layer
    std::vector<std::vector<size_t>> row_base_;
    // conv tap offsets into the incoming index tensor, per layer
    std::vector<std::vector<ptrdiff_t>> tap_offset_;
};

LutForwardResult forward_lut(const QuantizedModel& model, std::span<const uint16_t> input_indices,
                             int topk, LutTrace* trace = nullptr);

// Best-first indices by value, ties broken toward the lower index.
std::vector<int> top_k_indices(std::span<const int64_t> values, int k);
std::vector<int> top_k_indices(std::span<const double> values, int k);

// ---------------------------------------------------------------------------
// Real-arithmetic oracle

// Simulates the quantized network exactly, in real arithmetic: weights and
// biases snapped to their codebook levels, inputs and hidden activations
// snapped to the activation levels, sums exact. forward_lut approximates
// this path with integer tables; per-unit accumulators agree within
// (T + 1) * dx * 2^-(s+1) for T incoming terms.
struct RefTrace {
    std::vector<std::vector<double>> preact; // per layer, per unit
    std::vector<std::vector<int>> out_indices;
    std::vector<double> logits;
};

RefTrace forward_reference_quantized(const FloatModel& model,
                                     const std::vector<Codebook>& weight_cbs,
                                     const QuantizeOptions& opt, std::span<const float> input);
RefTrace forward_reference_quantized(const FloatModel& model, const Codebook& shared_weight_cb,
                                     const QuantizeOptions& opt, std::span<const float> input);

} // namespace lutnn
