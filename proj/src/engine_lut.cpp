#include "lutnn/engine_lut.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <numeric>
#include <thread>

namespace lutnn {

std::vector<uint16_t> quantize_input(std::span<const float> input,
                                     const std::vector<double>& levels) {
    std::vector<double> cuts = midpoint_cuts(levels);
    std::vector<uint16_t> out(input.size());
    for (size_t i = 0; i < input.size(); ++i)
        out[i] = static_cast<uint16_t>(nearest_by_cuts(cuts, static_cast<double>(input[i])));
    return out;
}

namespace {

template <typename T>
std::vector<int> top_k_impl(std::span<const T> values, int k) {
    std::vector<int> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return values[static_cast<size_t>(a)] > values[static_cast<size_t>(b)];
    });
    order.resize(std::min<size_t>(order.size(), static_cast<size_t>(std::max(k, 0))));
    return order;
}

} // namespace

std::vector<int> top_k_indices(std::span<const int64_t> values, int k) {
    return top_k_impl(values, k);
}
std::vector<int> top_k_indices(std::span<const double> values, int k) {
    return top_k_impl(values, k);
}

LutEngine::LutEngine(const QuantizedModel& model) : model_(&model) {
    row_base_.reserve(model.layers.size());
    tap_offset_.reserve(model.layers.size());
    for (const QuantizedLayer& l : model.layers) {
        std::vector<size_t> rows(l.weight_indices.size());
        for (size_t i = 0; i < l.weight_indices.size(); ++i)
            rows[i] = static_cast<size_t>(l.weight_indices[i]) * static_cast<size_t>(l.lut.cols);
        row_base_.push_back(std::move(rows));

        std::vector<ptrdiff_t> taps;
        if (l.kind == LayerKind::conv2d) {
            taps.reserve(static_cast<size_t>(l.in_c) * l.kh * l.kw);
            for (int c = 0; c < l.in_c; ++c)
                for (int ky = 0; ky < l.kh; ++ky)
                    for (int kx = 0; kx < l.kw; ++kx)
                        taps.push_back((static_cast<ptrdiff_t>(c) * l.in_h + ky) * l.in_w + kx);
        }
        tap_offset_.push_back(std::move(taps));
    }
}

LutForwardResult LutEngine::forward(std::span<const uint16_t> input_indices, int topk,
                                    LutTrace* trace) const {
    const QuantizedModel& m = *model_;
    require(!m.layers.empty(), "forward_lut: empty model");
    require(input_indices.size() == static_cast<size_t>(m.layers[0].in_count),
            "forward_lut: input has ", input_indices.size(), " indices, layer 0 expects ",
            m.layers[0].in_count);

    std::vector<uint16_t> cur(input_indices.begin(), input_indices.end());
    std::vector<uint16_t> next;
    std::vector<int64_t> acc;
    LutForwardResult result;

    for (size_t li = 0; li < m.layers.size(); ++li) {
        const QuantizedLayer& l = m.layers[li];
        const std::vector<size_t>& rows = row_base_[li];
        const int32_t* lut = l.lut.entries.data();
        bool final_layer = (li + 1 == m.layers.size());
        acc.assign(static_cast<size_t>(l.out_count), 0);

        if (l.kind == LayerKind::dense) {
            size_t wpu = l.weights_per_unit();
            const size_t* row = rows.data();
            for (int o = 0; o < l.out_count; ++o, row += wpu) {
                int64_t a = l.bias_terms[static_cast<size_t>(o)];
                for (int i = 0; i < l.in_count; ++i) a += lut[row[i] + cur[static_cast<size_t>(i)]];
                assert(std::llabs(a) < (int64_t{1} << 62));
                acc[static_cast<size_t>(o)] = a;
            }
        } else {
            const std::vector<ptrdiff_t>& taps = tap_offset_[li];
            size_t wpu = l.weights_per_unit();
            int oh = (l.in_h + 2 * l.pad - l.kh) / l.stride + 1;
            int ow = (l.in_w + 2 * l.pad - l.kw) / l.stride + 1;
            const ptrdiff_t row_step = static_cast<ptrdiff_t>(l.stride) * l.in_w; // constant
            size_t out_pos = 0;
            for (int o = 0; o < l.out_channels; ++o) {
                const size_t* row = rows.data() + static_cast<size_t>(o) * wpu;
                int64_t bias = l.bias_terms[static_cast<size_t>(o)];
                int iy0 = -l.pad;
                ptrdiff_t row_origin = -static_cast<ptrdiff_t>(l.pad) * l.in_w;
                for (int y = 0; y < oh; ++y, iy0 += l.stride, row_origin += row_step) {
                    int ix0 = -l.pad;
                    for (int x = 0; x < ow; ++x, ix0 += l.stride) {
                        int64_t a = bias;
                        ptrdiff_t origin = row_origin + ix0;
                        size_t t = 0;
                        for (int c = 0; c < l.in_c; ++c) {
                            for (int ky = 0; ky < l.kh; ++ky) {
                                int iy = iy0 + ky;
                                if (iy < 0 || iy >= l.in_h) {
                                    t += static_cast<size_t>(l.kw);
                                    continue;
                                }
                                for (int kx = 0; kx < l.kw; ++kx, ++t) {
                                    int ix = ix0 + kx;
                                    if (ix < 0 || ix >= l.in_w) continue;
                                    a += lut[row[t] + cur[static_cast<size_t>(origin + taps[t])]];
                                }
                            }
                        }
                        assert(std::llabs(a) < (int64_t{1} << 62));
                        acc[out_pos++] = a;
                    }
                }
            }
        }

        if (trace) trace->accumulators.push_back(acc);

        if (final_layer) {
            result.logits = acc;
            result.topk = top_k_indices(std::span<const int64_t>(result.logits), topk);
        } else {
            const ActivationTable& at = *l.act_table;
            next.resize(acc.size());
            for (size_t u = 0; u < acc.size(); ++u) {
                int64_t k = acc[u] >> m.s; // arithmetic shift: floor division by 2^s
                next[u] = static_cast<uint16_t>(at.lookup(k));
            }
            if (trace) trace->out_indices.push_back(next);
            cur = next;
        }
    }
    return result;
}

std::vector<LutForwardResult> LutEngine::forward_batch(
    const std::vector<std::vector<uint16_t>>& inputs, int topk, int threads) const {
    std::vector<LutForwardResult> out(inputs.size());
    int n_threads = std::max(1, threads);
    if (n_threads == 1 || inputs.size() <= 1) {
        for (size_t i = 0; i < inputs.size(); ++i) out[i] = forward(inputs[i], topk);
        return out;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> cursor{0};
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = cursor.fetch_add(1);
                if (i >= inputs.size()) return;
                out[i] = forward(inputs[i], topk);
            }
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

LutForwardResult forward_lut(const QuantizedModel& model, std::span<const uint16_t> input_indices,
                             int topk, LutTrace* trace) {
    return LutEngine(model).forward(input_indices, topk, trace);
}

// ---------------------------------------------------------------------------
// Real-arithmetic oracle

RefTrace forward_reference_quantized(const FloatModel& model,
                                     const std::vector<Codebook>& weight_cbs,
                                     const QuantizeOptions& opt, std::span<const float> input) {
    model.validate();
    require(weight_cbs.size() == model.layers.size(),
            "reference: need one weight codebook per layer");
    RefTrace tr;

    Codebook in_cb = incoming_activation_codebook(model, 0, opt);
    std::vector<uint16_t> in_idx = quantize_input(input, in_cb.levels);
    std::vector<double> cur(in_idx.size());
    for (size_t i = 0; i < in_idx.size(); ++i) cur[i] = in_cb.levels[in_idx[i]];

    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& fl = model.layers[li];
        const Codebook& wcb = weight_cbs[li];
        std::vector<double> wq(fl.weights.size());
        std::vector<double> wcuts = wcb.cuts();
        for (size_t i = 0; i < wq.size(); ++i)
            wq[i] = wcb.levels[static_cast<size_t>(
                nearest_by_cuts(wcuts, static_cast<double>(fl.weights.data[i])))];

        std::vector<double> x;
        if (fl.kind == LayerKind::dense) {
            int out_n = fl.weights.shape[0], in_n = fl.weights.shape[1];
            x.assign(static_cast<size_t>(out_n), 0.0);
            for (int o = 0; o < out_n; ++o) {
                double a = fl.bias ? wcb.quantize(static_cast<double>(fl.bias->data[o])) : 0.0;
                for (int i = 0; i < in_n; ++i)
                    a += wq[static_cast<size_t>(o) * in_n + i] * cur[static_cast<size_t>(i)];
                x[static_cast<size_t>(o)] = a;
            }
        } else {
            int oc = fl.weights.shape[0], ic = fl.weights.shape[1];
            int kh = fl.weights.shape[2], kw = fl.weights.shape[3];
            int oh = fl.out_h(), ow = fl.out_w();
            x.assign(static_cast<size_t>(oc) * oh * ow, 0.0);
            for (int o = 0; o < oc; ++o) {
                double b = fl.bias ? wcb.quantize(static_cast<double>(fl.bias->data[o])) : 0.0;
                for (int y = 0; y < oh; ++y) {
                    for (int xx = 0; xx < ow; ++xx) {
                        double a = b;
                        for (int c = 0; c < ic; ++c)
                            for (int ky = 0; ky < kh; ++ky) {
                                int iy = y * fl.stride + ky - fl.pad;
                                if (iy < 0 || iy >= fl.in_h) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    int ix = xx * fl.stride + kx - fl.pad;
                                    if (ix < 0 || ix >= fl.in_w) continue;
                                    a += wq[((static_cast<size_t>(o) * ic + c) * kh + ky) * kw + kx] *
                                         cur[(static_cast<size_t>(c) * fl.in_h + iy) * fl.in_w + ix];
                                }
                            }
                        x[(static_cast<size_t>(o) * oh + y) * ow + xx] = a;
                    }
                }
            }
        }
        tr.preact.push_back(x);

        bool final_layer = (li + 1 == model.layers.size());
        if (final_layer) {
            tr.logits = x;
        } else {
            Codebook out_cb = uniform_linear_activations(opt.n_a, fl.activation);
            std::vector<double> ocuts = out_cb.cuts();
            std::vector<int> idx(x.size());
            cur.resize(x.size());
            for (size_t u = 0; u < x.size(); ++u) {
                idx[u] = nearest_by_cuts(ocuts, apply_activation(fl.activation, x[u]));
                cur[u] = out_cb.levels[static_cast<size_t>(idx[u])];
            }
            tr.out_indices.push_back(std::move(idx));
        }
    }
    return tr;
}

RefTrace forward_reference_quantized(const FloatModel& model, const Codebook& shared_weight_cb,
                                     const QuantizeOptions& opt, std::span<const float> input) {
    std::vector<Codebook> cbs(model.layers.size(), shared_weight_cb);
    return forward_reference_quantized(model, cbs, opt, input);
}

} // namespace lutnn
