#include "lutnn/engine_log.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cmath>
#include <thread>

namespace lutnn {

int nlz(uint32_t ux) {
    // Branch-free binary search, after the nlz10a routine in Warren's
    // bit-twiddling collection.
    int32_t x = static_cast<int32_t>(ux);
    int32_t y, m, n;

    y = -static_cast<int32_t>(ux >> 16); // if the left half is 0, n = 16
    m = (y >> 16) & 16;
    n = 16 - m;
    x = static_cast<int32_t>(static_cast<uint32_t>(x) >> m);

    y = x - 0x100; // positions 8-15
    m = (y >> 16) & 8;
    n = n + m;
    x <<= m;

    y = x - 0x1000; // positions 12-15
    m = (y >> 16) & 4;
    n = n + m;
    x <<= m;

    y = x - 0x4000; // positions 14-15
    m = (y >> 16) & 2;
    n = n + m;
    x <<= m;

    y = static_cast<int32_t>(static_cast<uint32_t>(x) >> 14);
    m = y & ~(y >> 1);
    return n + 2 - m;
}

int nlz64(uint64_t x) {
    uint32_t hi = static_cast<uint32_t>(x >> 32);
    if (hi != 0) return nlz(hi);
    return 32 + nlz(static_cast<uint32_t>(x));
}

LogValue encode_log(double x, const LogGrid& grid) {
    LogValue lv;
    if (x == 0.0) return lv;
    require(std::isfinite(x), "encode_log: non-finite value");
    lv.sign = x > 0.0 ? int8_t{1} : int8_t{-1};
    double raw = static_cast<double>(grid.n_q) * std::log2(std::abs(x));
    int64_t v = round_half_away(raw);
    if (v > grid.vmax()) v = grid.vmax();
    if (v < grid.vmin()) return LogValue{}; // below the lowest level by over half a step
    lv.v = static_cast<int32_t>(v);
    return lv;
}

double decode_log(const LogValue& lv, int n_q) {
    if (lv.is_zero()) return 0.0;
    return static_cast<double>(lv.sign) * std::exp2(static_cast<double>(lv.v) / n_q);
}

LogTables build_log_tables(int n_q_w, int n_o_w, int n_q_a, int n_o_a, int e_act, int e_w) {
    require(n_q_w >= 1 && n_o_w >= 1 && n_q_a >= 1 && n_o_a >= 1,
            "log tables: octave parameters must be >= 1");
    require((n_q_a & (n_q_a - 1)) == 0, "log tables: N_q;a must be a power of two, got ", n_q_a);
    require(n_q_a >= n_q_w, "log tables: N_q;a must be >= N_q;w (got ", n_q_a, " < ", n_q_w, ")");
    require(n_q_a % n_q_w == 0 && ((n_q_a / n_q_w) & (n_q_a / n_q_w - 1)) == 0,
            "log tables: N_q;a / N_q;w must be an integer power of two");

    LogTables t;
    t.n_q_w = n_q_w;
    t.n_o_w = n_o_w;
    t.n_q_a = n_q_a;
    t.n_o_a = n_o_a;
    t.e_act = e_act;
    t.e_w = e_w;
    t.ratio_log2 = ceil_log2(static_cast<uint64_t>(n_q_a / n_q_w));
    t.m_bits = ceil_log2(static_cast<uint64_t>(4) * static_cast<uint64_t>(n_q_a));
    // n_o_a + 3 fraction bits suffice for accumulation; the round-trip
    // through t_q_inv additionally needs every entry's mantissa to survive
    // the m_bits window, hence the widening.
    t.p_bits = std::max(n_o_a + 3, ceil_log2(static_cast<uint64_t>(n_q_a)) + 3);
    t.f_bits = t.p_bits + n_o_a;

    int tq_n = std::max(n_q_w, n_q_a);
    t.t_q.resize(static_cast<size_t>(tq_n));
    for (int i = 0; i < tq_n; ++i)
        t.t_q[static_cast<size_t>(i)] = static_cast<uint32_t>(round_half_away(
            std::exp2(static_cast<double>(i) / n_q_a + static_cast<double>(t.p_bits))));

    t.t_q_inv.resize(static_cast<size_t>(4) * static_cast<size_t>(n_q_a));
    double cell = std::exp2(-static_cast<double>(t.m_bits));
    for (size_t b = 0; b < t.t_q_inv.size(); ++b)
        t.t_q_inv[b] = static_cast<uint16_t>(
            round_half_away(n_q_a * std::log2(1.0 + static_cast<double>(b) * cell)));

    // 16 headroom bits above the largest single product keep desk-scale
    // fan-ins overflow-free in the 64-bit accumulator.
    require(t.p_bits + t.n_o_a + std::max(e_w, 0) + 1 + 16 <= 63,
            "log tables: parameters leave no accumulator headroom");
    return t;
}

LogValue log_multiply(const LogValue& w, const LogValue& a, const LogTables& t) {
    LogValue out;
    if (w.is_zero() || a.is_zero()) return out;
    out.sign = static_cast<int8_t>(w.sign * a.sign);
    out.v = a.v + (w.v << t.ratio_log2);
    return out;
}

int64_t log_to_linear(const LogValue& lv, const LogTables& t) {
    if (lv.is_zero()) return 0;
    int shift_q = ceil_log2(static_cast<uint64_t>(t.n_q_a));
    int32_t i = lv.v & (t.n_q_a - 1); // floored mod via mask
    int32_t o = lv.v >> shift_q;      // floored division via arithmetic shift
    int sh = o + t.n_o_a - t.e_act;   // octave shift at the accumulator scale
    uint64_t mag = t.t_q[static_cast<size_t>(i)];
    if (sh >= 0) {
        require(sh < 62 - t.p_bits, "log_to_linear: shift ", sh, " overflows the accumulator");
        mag <<= sh;
    } else {
        int rs = -sh;
        mag = rs >= 64 ? 0 : (mag >> rs);
    }
    return lv.sign > 0 ? static_cast<int64_t>(mag) : -static_cast<int64_t>(mag);
}

LogValue linear_to_log(int64_t acc, const LogTables& t) {
    LogValue out;
    if (acc == 0) return out;
    out.sign = acc > 0 ? int8_t{1} : int8_t{-1};
    uint64_t mag = acc > 0 ? static_cast<uint64_t>(acc) : static_cast<uint64_t>(-acc);

    int b = 63 - nlz64(mag); // leading-one position = octave at accumulator scale
    uint32_t bits;
    if (b >= t.m_bits)
        bits = static_cast<uint32_t>(mag >> (b - t.m_bits)) & ((uint32_t{1} << t.m_bits) - 1);
    else
        bits = static_cast<uint32_t>(mag << (t.m_bits - b)) & ((uint32_t{1} << t.m_bits) - 1);
    int32_t idx = t.t_q_inv[bits];

    int shift_q = ceil_log2(static_cast<uint64_t>(t.n_q_a));
    int32_t v = ((static_cast<int32_t>(b) + t.e_act - t.f_bits) << shift_q) + idx;

    LogGrid g = t.act_grid();
    if (v > g.vmax()) v = g.vmax();
    if (v < g.vmin()) return LogValue{}; // below the lowest representable octave
    out.v = v;
    return out;
}

// ---------------------------------------------------------------------------
// Model construction

size_t LogQuantModel::n_net() const {
    size_t n = 0;
    for (const auto& l : layers) {
        n += l.weights.size();
        if (l.has_bias) n += static_cast<size_t>(l.out_channels);
    }
    return n;
}

void LogQuantModel::finalize() {
    for (LogQuantLayer& l : layers) {
        size_t n = l.weights.size();
        l.rt_v_scaled.resize(n);
        l.rt_sign.resize(n);
        l.rt_off.resize(n);
        l.rt_dy.assign(n, 0);
        l.rt_dx.assign(n, 0);
        for (size_t e = 0; e < n; ++e) {
            const LogWeight& w = l.weights[e];
            int32_t v_w = static_cast<int32_t>(tables.n_q_w) * (tables.e_w - w.octave) - w.index;
            l.rt_v_scaled[e] = v_w << tables.ratio_log2;
            l.rt_sign[e] = w.sign;
            if (l.kind == LayerKind::dense) {
                l.rt_off[e] = w.tap;
            } else {
                int c = w.tap / (l.kh * l.kw);
                int rem = w.tap % (l.kh * l.kw);
                int ky = rem / l.kw, kx = rem % l.kw;
                l.rt_dy[e] = static_cast<int16_t>(ky);
                l.rt_dx[e] = static_cast<int16_t>(kx);
                l.rt_off[e] = (static_cast<int32_t>(c) * l.in_h + ky) * l.in_w + kx;
            }
        }
        l.rt_bias.resize(l.bias_log.size());
        for (size_t o = 0; o < l.bias_log.size(); ++o) {
            LogValue b = l.bias_log[o];
            if (!b.is_zero()) b.v <<= tables.ratio_log2; // weight grid -> product grid
            l.rt_bias[o] = log_to_linear(b, tables);
        }
    }
}

namespace {

// Absolute grid index of an octave-codebook level (integer-exact).
int32_t level_to_v(const Codebook& cb, int level_index, int e_scale) {
    OctaveParts p = octave_components(cb, level_index);
    require(p.sign != 0, "level_to_v: zero level has no index");
    return static_cast<int32_t>(cb.n_q) * (e_scale - p.octave) - p.index;
}

} // namespace

LogQuantModel build_log_model(const FloatModel& model, const LogQuantOptions& opt) {
    model.validate();
    require(!model.has_norm(), "log quantize: model still has norm params; fold it first");
    require(!model.layers.empty(), "log quantize: model has no layers");
    for (size_t li = 0; li + 1 < model.layers.size(); ++li)
        require(model.layers[li].activation == Activation::relu6,
                "log quantize: hidden layer ", li,
                " must use relu6 (octave activation grids are non-negative)");

    LogQuantModel m;
    m.input_shape = model.input_shape;

    double v_max = opt.v_max_override;
    if (v_max <= 0.0) {
        for (double p : gather_params(model)) v_max = std::max(v_max, std::abs(p));
        require(v_max > 0.0, "log quantize: all parameters are zero");
    }
    m.weight_cb = octave_codebook(opt.n_q_w, opt.n_o_w, v_max);
    m.act_cb = octave_activations(opt.n_q_a, opt.n_o_a, Activation::relu6);

    int e_w = static_cast<int>(std::lround(std::log2(m.weight_cb.k_max)));
    int e_act = static_cast<int>(std::lround(std::log2(m.act_cb.k_max)));
    m.tables = build_log_tables(opt.n_q_w, opt.n_o_w, opt.n_q_a, opt.n_o_a, e_act, e_w);

    // Upper activation bound on the grid (relu6 saturation level).
    double lo, hi;
    activation_range(Activation::relu6, &lo, &hi);
    int cap_idx = m.act_cb.nearest(hi);
    require(cap_idx > 0, "log quantize: activation grid has no level near the saturation bound");
    m.act_cap_v = level_to_v(m.act_cb, cap_idx, e_act);

    std::vector<double> wcuts = m.weight_cb.cuts();
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& fl = model.layers[li];
        LogQuantLayer l;
        l.kind = fl.kind;
        l.activation = fl.activation;
        l.in_count = fl.in_count();
        l.out_count = fl.out_count();
        l.out_channels = fl.out_channels();
        l.has_bias = fl.bias.has_value();
        if (fl.kind == LayerKind::conv2d) {
            l.in_c = fl.weights.shape[1];
            l.in_h = fl.in_h;
            l.in_w = fl.in_w;
            l.kh = fl.weights.shape[2];
            l.kw = fl.weights.shape[3];
            l.stride = fl.stride;
            l.pad = fl.pad;
        }

        size_t per_out = fl.weights.size() / static_cast<size_t>(fl.out_channels());
        l.unit_start.push_back(0);
        for (int o = 0; o < fl.out_channels(); ++o) {
            for (size_t j = 0; j < per_out; ++j) {
                double w = fl.weights.data[static_cast<size_t>(o) * per_out + j];
                int idx = nearest_by_cuts(wcuts, w);
                OctaveParts p = octave_components(m.weight_cb, idx);
                if (p.sign == 0) continue; // zero weights are dropped
                LogWeight lw;
                lw.tap = static_cast<int32_t>(j);
                lw.sign = static_cast<int8_t>(p.sign);
                lw.octave = static_cast<uint8_t>(p.octave);
                lw.index = static_cast<uint16_t>(p.index);
                l.weights.push_back(lw);
            }
            if (opt.sort_addends) {
                auto lo = l.weights.begin() + l.unit_start.back();
                std::sort(lo, l.weights.end(), [&](const LogWeight& a, const LogWeight& b) {
                    // ascending magnitude = ascending log index
                    int32_t va = (m.tables.n_q_w) * (e_w - a.octave) - a.index;
                    int32_t vb = (m.tables.n_q_w) * (e_w - b.octave) - b.index;
                    if (va != vb) return va < vb;
                    return a.tap < b.tap;
                });
            }
            l.unit_start.push_back(static_cast<uint32_t>(l.weights.size()));

            LogValue b;
            if (fl.bias) {
                int bidx = nearest_by_cuts(wcuts, static_cast<double>(fl.bias->data[o]));
                OctaveParts p = octave_components(m.weight_cb, bidx);
                if (p.sign != 0) {
                    b.sign = static_cast<int8_t>(p.sign);
                    b.v = level_to_v(m.weight_cb, bidx, e_w);
                }
            }
            l.bias_log.push_back(b);
        }
        m.layers.push_back(std::move(l));
    }
    m.finalize();
    return m;
}

std::vector<LogValue> encode_input_log(const LogQuantModel& m, std::span<const float> input) {
    LogGrid g = m.tables.act_grid();
    std::vector<LogValue> out(input.size());
    for (size_t i = 0; i < input.size(); ++i) {
        double x = static_cast<double>(input[i]);
        // Octave activation grids carry non-negative values only.
        out[i] = encode_log(x < 0.0 ? 0.0 : x, g);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward pass

LogForwardResult forward_log(const LogQuantModel& m, std::span<const LogValue> input, int topk,
                             LogTrace* trace) {
    require(!m.layers.empty(), "forward_log: empty model");
    require(input.size() == static_cast<size_t>(m.layers[0].in_count), "forward_log: input has ",
            input.size(), " values, layer 0 expects ", m.layers[0].in_count);
    const LogTables& t = m.tables;
    require(m.layers[0].rt_v_scaled.size() == m.layers[0].weights.size(),
            "forward_log: model not finalized");

    const int shift_q = ceil_log2(static_cast<uint64_t>(t.n_q_a));
    const int32_t mask = t.n_q_a - 1;
    const int32_t base_sh = t.n_o_a - t.e_act;
    const uint32_t* t_q = t.t_q.data();

    std::vector<LogValue> cur(input.begin(), input.end());
    std::vector<LogValue> next;
    std::vector<int64_t> acc;
    LogForwardResult result;

    // Inline decode of one product term; same arithmetic as
    // log_to_linear(log_multiply(w, a)) with the shift pre-applied.
    auto term = [&](int32_t v, bool negative) -> int64_t {
        int32_t i = v & mask;
        int sh = (v >> shift_q) + base_sh;
        uint64_t mag = t_q[i];
        if (sh >= 0)
            mag <<= sh;
        else
            mag = (-sh) >= 64 ? 0 : (mag >> (-sh));
        return negative ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
    };

    for (size_t li = 0; li < m.layers.size(); ++li) {
        const LogQuantLayer& l = m.layers[li];
        bool final_layer = (li + 1 == m.layers.size());
        acc.assign(static_cast<size_t>(l.out_count), 0);

        if (l.kind == LayerKind::dense) {
            for (int o = 0; o < l.out_channels; ++o) {
                int64_t a = l.rt_bias[static_cast<size_t>(o)];
                for (uint32_t e = l.unit_start[static_cast<size_t>(o)];
                     e < l.unit_start[static_cast<size_t>(o) + 1]; ++e) {
                    const LogValue& av = cur[static_cast<size_t>(l.rt_off[e])];
                    if (av.sign == 0) continue;
                    a += term(av.v + l.rt_v_scaled[e], av.sign != l.rt_sign[e]);
                }
                assert(std::llabs(a) < (int64_t{1} << 62));
                acc[static_cast<size_t>(o)] = a;
            }
        } else {
            int oh = (l.in_h + 2 * l.pad - l.kh) / l.stride + 1;
            int ow = (l.in_w + 2 * l.pad - l.kw) / l.stride + 1;
            const int32_t row_step = l.stride * l.in_w; // constant per layer
            size_t out_pos = 0;
            for (int o = 0; o < l.out_channels; ++o) {
                int64_t bias = l.rt_bias[static_cast<size_t>(o)];
                uint32_t e_lo = l.unit_start[static_cast<size_t>(o)];
                uint32_t e_hi = l.unit_start[static_cast<size_t>(o) + 1];
                int32_t row_origin = -l.pad * l.in_w;
                int iy0 = -l.pad;
                for (int y = 0; y < oh; ++y, iy0 += l.stride, row_origin += row_step) {
                    int ix0 = -l.pad;
                    for (int x = 0; x < ow; ++x, ix0 += l.stride) {
                        int32_t origin = row_origin + ix0; // iy0*in_w + ix0
                        int64_t a = bias;
                        for (uint32_t e = e_lo; e < e_hi; ++e) {
                            int iy = iy0 + l.rt_dy[e];
                            int ix = ix0 + l.rt_dx[e];
                            if (iy < 0 || iy >= l.in_h || ix < 0 || ix >= l.in_w) continue;
                            const LogValue& av = cur[static_cast<size_t>(origin + l.rt_off[e])];
                            if (av.sign == 0) continue;
                            a += term(av.v + l.rt_v_scaled[e], av.sign != l.rt_sign[e]);
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
            next.resize(acc.size());
            for (size_t u = 0; u < acc.size(); ++u) {
                LogValue lv = linear_to_log(acc[u], t);
                // relu6 on the grid: negatives die, the top saturates.
                if (lv.sign <= 0) {
                    lv = LogValue{};
                } else if (lv.v > m.act_cap_v) {
                    lv.v = m.act_cap_v;
                }
                next[u] = lv;
            }
            if (trace) trace->out_values.push_back(next);
            cur = next;
        }
    }
    return result;
}

std::vector<LogForwardResult> forward_log_batch(const LogQuantModel& m,
                                                const std::vector<std::vector<LogValue>>& inputs,
                                                int topk, int threads) {
    std::vector<LogForwardResult> out(inputs.size());
    int n_threads = std::max(1, threads);
    if (n_threads == 1 || inputs.size() <= 1) {
        for (size_t i = 0; i < inputs.size(); ++i) out[i] = forward_log(m, inputs[i], topk);
        return out;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> cursor{0};
    for (int th = 0; th < n_threads; ++th) {
        pool.emplace_back([&] {
            for (;;) {
                size_t i = cursor.fetch_add(1);
                if (i >= inputs.size()) return;
                out[i] = forward_log(m, inputs[i], topk);
            }
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

} // namespace lutnn
