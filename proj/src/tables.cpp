#include "lutnn/tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lutnn {

ProductLUT build_product_lut(const Codebook& weight_cb, const Codebook& act_cb, int s, double dx,
                             int max_entry_bits, std::span<const double> extra_weight_rows) {
    require(s >= 1, "build_product_lut: s must be >= 1, got ", s);
    require(dx > 0.0, "build_product_lut: dx must be positive, got ", dx);

    ProductLUT lut;
    lut.codebook_rows = weight_cb.size();
    lut.rows = weight_cb.size() + static_cast<int>(extra_weight_rows.size());
    lut.cols = act_cb.size();
    lut.s = s;
    lut.dx = dx;
    lut.entries.resize(static_cast<size_t>(lut.rows) * static_cast<size_t>(lut.cols));

    double scale = std::exp2(static_cast<double>(s)) / dx;
    int64_t limit = max_entry_bits > 0 ? (int64_t{1} << max_entry_bits) - 1
                                       : std::numeric_limits<int32_t>::max();
    limit = std::min<int64_t>(limit, std::numeric_limits<int32_t>::max());

    auto weight_of = [&](int i) {
        return i < lut.codebook_rows
                   ? weight_cb.levels[static_cast<size_t>(i)]
                   : extra_weight_rows[static_cast<size_t>(i - lut.codebook_rows)];
    };
    for (int i = 0; i < lut.rows; ++i) {
        double w = weight_of(i);
        if (w == 1.0 && lut.readout_row < 0) lut.readout_row = i;
        for (int j = 0; j < lut.cols; ++j) {
            int64_t e = round_half_away(scale * w * act_cb.levels[static_cast<size_t>(j)]);
            require(std::llabs(e) <= limit, "build_product_lut: entry (", i, ", ", j, ") = ", e,
                    " exceeds the ", max_entry_bits > 0 ? max_entry_bits : 31,
                    "-bit magnitude budget");
            lut.entries[static_cast<size_t>(i) * lut.cols + j] = static_cast<int32_t>(e);
        }
    }
    require(lut.readout_row >= 0,
            "build_product_lut: no row holds the weight 1.0 (readout row missing)");
    return lut;
}

ActivationTable build_activation_table(Activation act, const Codebook& act_cb, double dx) {
    require(dx > 0.0, "build_activation_table: dx must be positive");
    require(act != Activation::none, "build_activation_table: activation must be bounded");
    int n_a = act_cb.size();
    require(n_a >= 2, "build_activation_table: need at least 2 activation levels");

    std::vector<double> cuts = act_cb.cuts();
    auto index_at = [&](int64_t k) {
        return nearest_by_cuts(cuts, apply_activation(act, static_cast<double>(k) * dx));
    };

    // index_at is non-decreasing in k. Finds the largest k whose index is
    // still <= target by exponential widening plus binary search.
    auto last_k_with_index_le = [&](int target) {
        int64_t lo, hi;
        if (index_at(0) <= target) {
            lo = 0;
            hi = 1;
            while (index_at(hi) <= target) {
                lo = hi;
                hi *= 2;
                require(hi < (int64_t{1} << 40), "build_activation_table: span search diverged");
            }
        } else {
            hi = 0;
            lo = -1;
            while (index_at(lo) > target) {
                hi = lo;
                lo *= 2;
                require(lo > -(int64_t{1} << 40), "build_activation_table: span search diverged");
            }
        }
        while (lo + 1 < hi) {
            int64_t mid = lo + (hi - lo) / 2;
            if (index_at(mid) <= target)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    };

    int64_t k_lo = last_k_with_index_le(0);           // largest k mapping to index 0
    int64_t k_hi = last_k_with_index_le(n_a - 2) + 1; // smallest k mapping to index N_a - 1

    ActivationTable table;
    table.dx = dx;
    table.n_x = static_cast<int>(k_hi - k_lo + 1);
    table.k0 = static_cast<int>(-k_lo);
    table.entries.resize(static_cast<size_t>(table.n_x));
    for (int64_t k = k_lo; k <= k_hi; ++k)
        table.entries[static_cast<size_t>(k - k_lo)] = static_cast<uint16_t>(index_at(k));
    return table;
}

std::vector<uint8_t> pack_weight_indices(std::span<const uint32_t> indices, int n_w) {
    require(n_w >= 1, "pack_weight_indices: N_w must be >= 1");
    int width = ceil_log2(static_cast<uint64_t>(n_w));
    std::vector<uint8_t> out((indices.size() * static_cast<size_t>(width) + 7) / 8, 0);
    size_t bit = 0;
    for (uint32_t idx : indices) {
        require(idx < static_cast<uint32_t>(n_w), "pack_weight_indices: index ", idx,
                " >= N_w = ", n_w);
        for (int b = 0; b < width; ++b, ++bit)
            if (idx & (uint32_t{1} << b)) out[bit / 8] |= static_cast<uint8_t>(1u << (bit % 8));
    }
    return out;
}

std::vector<uint32_t> unpack_weight_indices(std::span<const uint8_t> packed, size_t count, int n_w) {
    require(n_w >= 1, "unpack_weight_indices: N_w must be >= 1");
    int width = ceil_log2(static_cast<uint64_t>(n_w));
    require(packed.size() >= (count * static_cast<size_t>(width) + 7) / 8,
            "unpack_weight_indices: stream too short for ", count, " indices");
    std::vector<uint32_t> out(count, 0);
    size_t bit = 0;
    for (size_t i = 0; i < count; ++i) {
        uint32_t v = 0;
        for (int b = 0; b < width; ++b, ++bit)
            if (packed[bit / 8] & (1u << (bit % 8))) v |= uint32_t{1} << b;
        require(v < static_cast<uint32_t>(n_w), "unpack_weight_indices: decoded index ", v,
                " >= N_w = ", n_w, " at position ", i);
        out[i] = v;
    }
    return out;
}

std::vector<int64_t> quantize_bias_terms(std::span<const double> biases, const Codebook& weight_cb,
                                         int s, double dx) {
    std::vector<int64_t> out(biases.size());
    double scale = std::exp2(static_cast<double>(s)) / dx;
    for (size_t i = 0; i < biases.size(); ++i) {
        require(std::isfinite(biases[i]), "quantize_bias_terms: non-finite bias at ", i);
        out[i] = round_half_away(scale * weight_cb.quantize(biases[i]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full-model table construction

size_t QuantizedModel::n_net() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weight_indices.size();
    return n;
}

namespace {

double act_dx(Activation act, const Codebook& cb, const QuantizeOptions& opt) {
    if (act == Activation::tanh_fn) return opt.dx_tanh;
    // relu6 default: the level spacing, which makes the table a clamp.
    return (cb.levels.back() - cb.levels.front()) / (cb.size() - 1);
}

} // namespace

Codebook incoming_activation_codebook(const FloatModel& model, size_t li,
                                      const QuantizeOptions& opt) {
    if (li == 0) {
        Activation a0 = model.layers.at(0).activation;
        if (a0 == Activation::none) {
            // Single-layer model with an unbounded output: quantize inputs
            // on a symmetric unit range.
            Codebook cb;
            cb.scheme = Scheme::uniform_act;
            cb.levels.resize(static_cast<size_t>(opt.n_a));
            for (int i = 0; i < opt.n_a; ++i)
                cb.levels[static_cast<size_t>(i)] = -1.0 + 2.0 * i / (opt.n_a - 1);
            return cb;
        }
        return uniform_linear_activations(opt.n_a, a0);
    }
    return uniform_linear_activations(opt.n_a, model.layers[li - 1].activation);
}

QuantizedModel build_quantized_model(const FloatModel& model,
                                     const std::vector<Codebook>& per_layer_weight_cbs,
                                     Scheme scheme, const QuantizeOptions& opt) {
    model.validate();
    require(!model.has_norm(), "quantize: model still has norm params; fold it first");
    require(!model.layers.empty(), "quantize: model has no layers");
    require(per_layer_weight_cbs.size() == model.layers.size(),
            "quantize: need one weight codebook per layer, got ", per_layer_weight_cbs.size(),
            " for ", model.layers.size(), " layers");
    require(opt.n_a >= 2, "quantize: N_a must be >= 2");

    QuantizedModel qm;
    qm.s = opt.s;
    qm.n_a = opt.n_a;
    qm.scheme = scheme;
    qm.input_shape = model.input_shape;
    qm.input_levels = incoming_activation_codebook(model, 0, opt).levels;

    bool shared = true;
    for (size_t li = 1; li < per_layer_weight_cbs.size(); ++li)
        if (per_layer_weight_cbs[li].levels != per_layer_weight_cbs[0].levels) shared = false;
    if (shared) {
        qm.weight_codebooks.push_back(per_layer_weight_cbs[0]);
    } else {
        qm.weight_codebooks = per_layer_weight_cbs;
    }

    double prev_dx = opt.dx_final_fallback;
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& fl = model.layers[li];
        const Codebook& wcb = per_layer_weight_cbs[li];
        bool final_layer = (li + 1 == model.layers.size());

        QuantizedLayer ql;
        ql.kind = fl.kind;
        ql.activation = fl.activation;
        ql.in_count = fl.in_count();
        ql.out_count = fl.out_count();
        ql.out_channels = fl.out_channels();
        ql.has_bias = fl.bias.has_value();
        ql.weight_cb_index = shared ? 0 : static_cast<int>(li);
        if (fl.kind == LayerKind::conv2d) {
            ql.in_c = fl.weights.shape[1];
            ql.in_h = fl.in_h;
            ql.in_w = fl.in_w;
            ql.kh = fl.weights.shape[2];
            ql.kw = fl.weights.shape[3];
            ql.stride = fl.stride;
            ql.pad = fl.pad;
        }

        Codebook in_cb = incoming_activation_codebook(model, li, opt);
        double dx;
        int entry_bits = 0;
        if (!final_layer) {
            Codebook out_cb = uniform_linear_activations(opt.n_a, fl.activation);
            dx = act_dx(fl.activation, out_cb, opt);
            ql.act_table = build_activation_table(fl.activation, out_cb, dx);
            entry_bits = opt.s + ceil_log2(static_cast<uint64_t>(ql.act_table->n_x));
        } else {
            // The final layer keeps the full-precision accumulator; its LUT
            // shares the previous layer's step so a homogeneous network uses
            // one table throughout.
            dx = prev_dx;
        }

        std::vector<double> extra;
        if (!wcb.contains_one()) extra.push_back(1.0);
        ql.lut = build_product_lut(wcb, in_cb, opt.s, dx, entry_bits, extra);

        // weight indices: output-major, input-minor, bias entry last
        size_t per_out = fl.weights.size() / static_cast<size_t>(fl.out_channels());
        ql.weight_indices.reserve(fl.param_count());
        std::vector<double> cuts = wcb.cuts();
        for (int o = 0; o < fl.out_channels(); ++o) {
            for (size_t j = 0; j < per_out; ++j) {
                double w = fl.weights.data[static_cast<size_t>(o) * per_out + j];
                ql.weight_indices.push_back(static_cast<uint32_t>(nearest_by_cuts(cuts, w)));
            }
            if (fl.bias)
                ql.weight_indices.push_back(static_cast<uint32_t>(
                    nearest_by_cuts(cuts, static_cast<double>(fl.bias->data[o]))));
        }

        if (fl.bias) {
            std::vector<double> b(fl.bias->data.begin(), fl.bias->data.end());
            ql.bias_terms = quantize_bias_terms(b, wcb, opt.s, dx);
        } else {
            ql.bias_terms.assign(static_cast<size_t>(fl.out_channels()), 0);
        }

        prev_dx = dx;
        qm.layers.push_back(std::move(ql));
    }
    return qm;
}

QuantizedModel build_quantized_model(const FloatModel& model, const Codebook& shared_weight_cb,
                                     const QuantizeOptions& opt) {
    std::vector<Codebook> cbs(model.layers.size(), shared_weight_cb);
    return build_quantized_model(model, cbs, shared_weight_cb.scheme, opt);
}

} // namespace lutnn
