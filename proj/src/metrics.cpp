#include "lutnn/metrics.hpp"

#include <algorithm>

namespace lutnn {

int64_t nuc_modelfree(int64_t n_w, int64_t n_a) { return n_w * n_a; }

int64_t nwnc_modelfree(const std::vector<int64_t>& per_layer_n_w, int64_t n_a) {
    // Summed per layer even when two layers coincidentally share N_w: the
    // tables are layer-specific either way.
    int64_t total = 0;
    for (int64_t n_w : per_layer_n_w) total += nuc_modelfree(n_w, n_a);
    return total;
}

OctaveLinearCounts nuc_octave_linear(int64_t n_q, int64_t n_o, int64_t n_a,
                                     bool include_zero_column) {
    OctaveLinearCounts c;
    c.lut_entries = (include_zero_column ? n_q + 1 : n_q) * n_a;
    c.nuc = c.lut_entries + n_o - 1;
    return c;
}

OctaveOctaveCounts nuc_octave_octave(int64_t n_q_w, int64_t n_o_w, int64_t n_q_a, int64_t n_o_a) {
    OctaveOctaveCounts c;
    c.table_entries = std::max(n_q_w, n_q_a) + 4 * n_q_a;
    c.nuc = c.table_entries + n_o_w + n_o_a - 2;
    return c;
}

NetworkSizeBits network_size_bits(int64_t n_net, int64_t n_w, int64_t n_a, int64_t n_x, int s) {
    NetworkSizeBits r;
    int64_t w_bits = ceil_log2(static_cast<uint64_t>(n_w));
    r.weight_table_bits = n_net * w_bits;
    r.lut_bits = (s + ceil_log2(static_cast<uint64_t>(n_x))) * n_a * n_w;
    r.act_table_bits = n_x * ceil_log2(static_cast<uint64_t>(n_a));
    r.total_bits = r.weight_table_bits + r.lut_bits + r.act_table_bits;
    r.download_ratio = w_bits > 0 ? 32.0 / static_cast<double>(w_bits) : 32.0;
    return r;
}

ComplexityReport complexity_report(const QuantizedModel& m) {
    ComplexityReport rep;
    rep.scheme = m.scheme;
    rep.n_net = static_cast<int64_t>(m.n_net());

    // Distinct stored LUTs: identical entry arrays (same dims, same dx)
    // count once network-wide. Stored octave tables hold every level as a
    // row; the NUC/NWNC accounting still counts N_q * N_a since the other
    // octaves are bit-shifted copies of one octave's rows.
    std::vector<const ProductLUT*> distinct;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const QuantizedLayer& l = m.layers[li];
        const Codebook& wcb = m.weight_codebooks[static_cast<size_t>(l.weight_cb_index)];
        LayerComplexity lc;
        lc.name = "layer" + std::to_string(li);
        lc.lut_entries = static_cast<int64_t>(l.lut.entries.size());
        lc.act_entries = l.act_table ? l.act_table->n_x : 0;
        if (m.scheme == Scheme::octave) {
            lc.nuc = nuc_octave_linear(wcb.n_q, wcb.n_o, m.n_a).nuc;
        } else {
            lc.nuc = nuc_modelfree(wcb.size(), m.n_a);
        }
        rep.layers.push_back(lc);

        bool seen = false;
        for (const ProductLUT* p : distinct) {
            if (p->rows == l.lut.rows && p->cols == l.lut.cols && p->dx == l.lut.dx &&
                p->entries == l.lut.entries) {
                seen = true;
                break;
            }
        }
        if (!seen) distinct.push_back(&l.lut);
    }
    for (const ProductLUT* p : distinct)
        rep.network_lut_entries += static_cast<int64_t>(p->entries.size());

    if (m.scheme == Scheme::model_free) {
        std::vector<int64_t> per_layer;
        for (const auto& l : m.layers)
            per_layer.push_back(m.weight_codebooks[static_cast<size_t>(l.weight_cb_index)].size());
        rep.nwnc = nwnc_modelfree(per_layer, m.n_a);
    } else {
        // Shared-codebook schemes: NWNC equals the per-layer NUC.
        rep.nwnc = rep.layers.empty() ? 0 : rep.layers[0].nuc;
    }

    // Network size per the compression formula, with N_w/N_x taken from the
    // widest layer.
    int64_t n_w = 0, n_x = 1;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        n_w = std::max<int64_t>(n_w, m.weight_codebooks[static_cast<size_t>(m.layers[li].weight_cb_index)].size());
        if (m.layers[li].act_table) n_x = std::max<int64_t>(n_x, m.layers[li].act_table->n_x);
    }
    rep.size = network_size_bits(rep.n_net, n_w, m.n_a, n_x, m.s);
    rep.serialized_sections = quantized_section_bytes(m);
    return rep;
}

} // namespace lutnn
