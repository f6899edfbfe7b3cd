#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "lutnn/codebook.hpp"
#include "lutnn/model.hpp"

namespace lutnn {

// Doubly-indexed product table: entries[i][j] = round(2^s / dx * w_i * a_j),
// nearest with ties away from zero. Rows follow the weight codebook; extra
// rows (readout for w=1 when the codebook lacks it, average-pool scales)
// are appended after the codebook rows.
struct ProductLUT {
    int rows = 0; // codebook rows + extra rows
    int cols = 0;
    int codebook_rows = 0;
    int readout_row = -1; // row whose weight is exactly 1.0
    int s = 0;
    double dx = 0.0;
    std::vector<int32_t> entries; // row-major

    int32_t at(int i, int j) const {
        return entries[static_cast<size_t>(i) * static_cast<size_t>(cols) + static_cast<size_t>(j)];
    }
};

// Singly-indexed activation table mapping the shifted accumulator index
// k + k0 to the nearest activation-level index. Entries are non-decreasing,
// starting at 0 and ending at N_a - 1.
struct ActivationTable {
    int n_x = 0;
    int k0 = 0; // table position of k = 0
    double dx = 0.0;
    std::vector<uint16_t> entries;

    int lookup(int64_t k) const {
        int64_t pos = k + k0;
        if (pos < 0) pos = 0;
        if (pos >= n_x) pos = n_x - 1;
        return entries[static_cast<size_t>(pos)];
    }
};

// max_entry_bits: magnitude bit budget per entry (sign excluded); entries
// beyond it are rejected with the offending (i, j). Pass 0 to check only
// the int32 storage width (final layers, which have no activation table).
// extra_weight_rows appends non-codebook rows, e.g. 1.0 for the readout
// row or 1/size for average pooling.
ProductLUT build_product_lut(const Codebook& weight_cb, const Codebook& act_cb, int s, double dx,
                             int max_entry_bits, std::span<const double> extra_weight_rows = {});

ActivationTable build_activation_table(Activation act, const Codebook& act_cb, double dx);

// LSB-first bit packing of ceil(log2(N_w))-wide indices into little-endian
// bytes. Round-trips exactly; fails on an index >= N_w.
std::vector<uint8_t> pack_weight_indices(std::span<const uint32_t> indices, int n_w);
std::vector<uint32_t> unpack_weight_indices(std::span<const uint8_t> packed, size_t count, int n_w);

// Each bias is snapped to the nearest weight level, then stored as the
// integer accumulator term round(2^s / dx * level).
std::vector<int64_t> quantize_bias_terms(std::span<const double> biases, const Codebook& weight_cb,
                                         int s, double dx);

// ---------------------------------------------------------------------------
// Quantized model container (LUT engine)

struct QuantizedLayer {
    LayerKind kind = LayerKind::dense;
    Activation activation = Activation::relu6;
    int in_count = 0, out_count = 0;
    int out_channels = 0;
    bool has_bias = false;
    // conv geometry
    int in_c = 0, in_h = 0, in_w = 0, kh = 0, kw = 0, stride = 1, pad = 0;

    ProductLUT lut;
    std::optional<ActivationTable> act_table; // absent on the final layer
    std::vector<uint32_t> weight_indices;     // output-major, input-minor; bias index appended per unit
    std::vector<int64_t> bias_terms;          // one per output channel (zero when has_bias is false)
    int weight_cb_index = 0;                  // into QuantizedModel::weight_codebooks

    size_t weights_per_unit() const {
        return static_cast<size_t>(kind == LayerKind::dense ? in_count : in_c * kh * kw) +
               (has_bias ? 1 : 0);
    }
};

struct QuantizedModel {
    int s = 16;
    int n_a = 32;
    Scheme scheme = Scheme::kmeans;
    std::vector<int> input_shape;
    std::vector<double> input_levels; // first layer's incoming activation levels
    std::vector<Codebook> weight_codebooks;
    std::vector<QuantizedLayer> layers;

    size_t n_net() const; // total weight + bias index count
};

struct QuantizeOptions {
    int s = 16;
    int n_a = 32;
    // dx for tanh activation tables; relu6 tables use the level spacing.
    double dx_tanh = 0.02;
    // dx fallback when no hidden activation table fixes the scale
    // (single-layer models).
    double dx_final_fallback = 1.0;
};

// Incoming activation codebook of layer `li`: the outgoing codebook of the
// previous layer, or the input quantization levels for layer 0. Shared by
// the table builder and the real-arithmetic oracle.
Codebook incoming_activation_codebook(const FloatModel& model, size_t li,
                                      const QuantizeOptions& opt);

// Build the full inference-table representation of a (norm-free) float
// model: one product LUT per layer, activation tables for hidden layers,
// bit-packable weight indices, and integer bias terms.
QuantizedModel build_quantized_model(const FloatModel& model, const Codebook& shared_weight_cb,
                                     const QuantizeOptions& opt);
// Per-layer weight codebooks (model-free scheme).
QuantizedModel build_quantized_model(const FloatModel& model,
                                     const std::vector<Codebook>& per_layer_weight_cbs,
                                     Scheme scheme, const QuantizeOptions& opt);

// Single-file container: magic, JSON header, binary payload sections.
void save_quantized_model(const QuantizedModel& m, const std::filesystem::path& path);
QuantizedModel load_quantized_model(const std::filesystem::path& path);

// Serialized payload byte counts, in file order (LUT entries, activation
// table, packed indices, bias terms per layer). Used by the metrics module
// to cross-check file sizes.
struct SectionBytes {
    std::string name;
    uint64_t bytes = 0;
};
std::vector<SectionBytes> quantized_section_bytes(const QuantizedModel& m);

constexpr char kQuantMagic[9] = "LUTQMDL1";

} // namespace lutnn
