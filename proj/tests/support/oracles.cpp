#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace test_support {

double dp_kmeans_inertia(std::span<const double> samples, int k) {
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    size_t n = x.size();
    std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) {
        pre[i + 1] = pre[i] + x[i];
        pre2[i + 1] = pre2[i] + x[i] * x[i];
    }
    // cost of one cluster over sorted range [i, j)
    auto cost = [&](size_t i, size_t j) {
        double cnt = static_cast<double>(j - i);
        double s = pre[j] - pre[i];
        return (pre2[j] - pre2[i]) - s * s / cnt;
    };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n + 1, inf), curr(n + 1, inf);
    for (size_t j = 1; j <= n; ++j) prev[j] = cost(0, j);
    for (int c = 2; c <= k; ++c) {
        curr.assign(n + 1, inf);
        for (size_t j = static_cast<size_t>(c); j <= n; ++j) {
            for (size_t i = static_cast<size_t>(c) - 1; i < j; ++i) {
                double v = prev[i] + cost(i, j);
                if (v < curr[j]) curr[j] = v;
            }
        }
        prev.swap(curr);
    }
    return std::max(prev[n], 0.0);
}

int naive_nlz(uint32_t x) {
    int n = 0;
    for (uint32_t probe = 0x80000000u; probe != 0; probe >>= 1) {
        if (x & probe) return n;
        ++n;
    }
    return 32;
}

int brute_nearest_level(const std::vector<double>& levels, double x) {
    int best = 0;
    double best_d = std::abs(x - levels[0]);
    for (size_t i = 1; i < levels.size(); ++i) {
        double d = std::abs(x - levels[i]);
        if (d < best_d ||
            (d == best_d && std::abs(levels[i]) > std::abs(levels[static_cast<size_t>(best)]))) {
            best = static_cast<int>(i);
            best_d = d;
        }
    }
    return best;
}

LogRefResult forward_log_reference(const lutnn::LogQuantModel& m,
                                   std::span<const lutnn::LogValue> input) {
    using namespace lutnn;
    const LogTables& t = m.tables;
    LogRefResult out;

    std::vector<LogValue> cur(input.begin(), input.end());
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const LogQuantLayer& l = m.layers[li];
        bool final_layer = (li + 1 == m.layers.size());
        std::vector<double> x(static_cast<size_t>(l.out_count), 0.0);

        if (l.kind == LayerKind::dense) {
            for (int o = 0; o < l.out_channels; ++o) {
                double a = decode_log(l.bias_log[static_cast<size_t>(o)], t.n_q_w);
                for (uint32_t e = l.unit_start[static_cast<size_t>(o)];
                     e < l.unit_start[static_cast<size_t>(o) + 1]; ++e) {
                    const LogWeight& w = l.weights[e];
                    const LogValue& av = cur[static_cast<size_t>(w.tap)];
                    if (av.is_zero()) continue;
                    double wv = static_cast<double>(w.sign) *
                                std::exp2(t.e_w - w.octave -
                                          static_cast<double>(w.index) / t.n_q_w);
                    a += wv * decode_log(av, t.n_q_a);
                }
                x[static_cast<size_t>(o)] = a;
            }
        } else {
            int oh = (l.in_h + 2 * l.pad - l.kh) / l.stride + 1;
            int ow = (l.in_w + 2 * l.pad - l.kw) / l.stride + 1;
            size_t pos = 0;
            for (int o = 0; o < l.out_channels; ++o) {
                double bias = decode_log(l.bias_log[static_cast<size_t>(o)], t.n_q_w);
                for (int y = 0; y < oh; ++y)
                    for (int xx = 0; xx < ow; ++xx) {
                        double a = bias;
                        for (uint32_t e = l.unit_start[static_cast<size_t>(o)];
                             e < l.unit_start[static_cast<size_t>(o) + 1]; ++e) {
                            const LogWeight& w = l.weights[e];
                            int c = w.tap / (l.kh * l.kw);
                            int rem = w.tap % (l.kh * l.kw);
                            int iy = y * l.stride + rem / l.kw - l.pad;
                            int ix = xx * l.stride + rem % l.kw - l.pad;
                            if (iy < 0 || iy >= l.in_h || ix < 0 || ix >= l.in_w) continue;
                            const LogValue& av =
                                cur[(static_cast<size_t>(c) * l.in_h + iy) * l.in_w + ix];
                            if (av.is_zero()) continue;
                            double wv = static_cast<double>(w.sign) *
                                        std::exp2(t.e_w - w.octave -
                                                  static_cast<double>(w.index) / t.n_q_w);
                            a += wv * decode_log(av, t.n_q_a);
                        }
                        x[pos++] = a;
                    }
            }
        }
        out.preact.push_back(x);

        if (final_layer) {
            out.logits = x;
        } else {
            cur.resize(x.size());
            LogGrid g = t.act_grid();
            for (size_t u = 0; u < x.size(); ++u) {
                // geometric rounding mirrors the engine's index-domain decode
                LogValue lv = encode_log(x[u] > 0.0 ? x[u] : 0.0, g);
                if (lv.sign > 0 && lv.v > m.act_cap_v) lv.v = m.act_cap_v;
                cur[u] = lv;
            }
        }
    }
    return out;
}

} // namespace test_support
