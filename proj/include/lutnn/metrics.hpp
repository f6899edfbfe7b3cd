#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lutnn/tables.hpp"

namespace lutnn {

// Per-unit and network-wide table accounting.
//
// NUC counts the table entries plus trainable scheme parameters reachable
// from a single layer's neural unit; NWNC aggregates distinct tables across
// the network and equals NUC whenever the codebooks are shared.

// Model-free: one LUT per layer.
int64_t nuc_modelfree(int64_t n_w, int64_t n_a);
int64_t nwnc_modelfree(const std::vector<int64_t>& per_layer_n_w, int64_t n_a);

struct OctaveLinearCounts {
    int64_t nuc = 0;
    int64_t lut_entries = 0;
};
// Octave weights with linear activations: LUT of N_q * N_a entries plus
// N_o - 1 octave parameters; levels shared network-wide so NWNC = NUC.
// include_zero_column adds one LUT column for the zero weight.
OctaveLinearCounts nuc_octave_linear(int64_t n_q, int64_t n_o, int64_t n_a,
                                     bool include_zero_column = false);

struct OctaveOctaveCounts {
    int64_t nuc = 0;
    int64_t table_entries = 0; // max(N_q;w, N_q;a) + 4 N_q;a
};
// Octave weights and octave activations: the two single-index conversion
// tables plus the extra octave parameters on both sides. NWNC = NUC.
OctaveOctaveCounts nuc_octave_octave(int64_t n_q_w, int64_t n_o_w, int64_t n_q_a, int64_t n_o_a);

struct NetworkSizeBits {
    int64_t weight_table_bits = 0; // N_net * ceil(log2 N_w)
    int64_t lut_bits = 0;          // (s + ceil(log2 N_x)) * N_a * N_w
    int64_t act_table_bits = 0;    // N_x * ceil(log2 N_a)
    int64_t total_bits = 0;
    double download_ratio = 0.0; // 32 / ceil(log2 N_w)
};
NetworkSizeBits network_size_bits(int64_t n_net, int64_t n_w, int64_t n_a, int64_t n_x, int s);

// ---------------------------------------------------------------------------

struct LayerComplexity {
    std::string name;
    int64_t nuc = 0;
    int64_t lut_entries = 0; // actual stored table entries (including extra rows)
    int64_t act_entries = 0;
};

struct ComplexityReport {
    Scheme scheme = Scheme::kmeans;
    std::vector<LayerComplexity> layers;
    int64_t nwnc = 0;
    int64_t network_lut_entries = 0; // distinct stored tables only
    int64_t n_net = 0;
    NetworkSizeBits size;
    std::vector<SectionBytes> serialized_sections;
};

// Accounting for a built LUT-engine model. Distinct tables are detected by
// comparing stored contents, so layers sharing levels and dx count once.
ComplexityReport complexity_report(const QuantizedModel& m);

} // namespace lutnn
