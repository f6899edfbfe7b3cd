#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lutnn/codebook.hpp"
#include "lutnn/engine_lut.hpp"
#include "lutnn/model.hpp"

namespace lutnn {

// Branch-free count of leading zero bits; nlz(0) = 32.
int nlz(uint32_t x);
int nlz64(uint64_t x);

// Sign / log-index representation: v = round(N_q * log2|x|), meaningful
// only when sign != 0. Zero is carried in the sign.
struct LogValue {
    int8_t sign = 0; // -1, 0, +1
    int32_t v = 0;

    bool is_zero() const { return sign == 0; }
    bool operator==(const LogValue&) const = default;
};

// Index grid spanning n_o octaves below the power-of-two scale 2^e:
// on-grid indices are v in [n_q*(e - n_o), n_q*e - 1].
struct LogGrid {
    int n_q = 0;
    int e = 0;
    int n_o = 0;

    int32_t vmin() const { return n_q * (e - n_o); }
    int32_t vmax() const { return n_q * e - 1; }
};

// Round |x| onto the grid: indices above the top clamp; more than half a
// step below the bottom level encodes as zero.
LogValue encode_log(double x, const LogGrid& grid);
double decode_log(const LogValue& lv, int n_q); // sign * 2^(v/n_q)

// Conversion tables between the log-index and fixed-point linear domains.
// t_q[i] holds round(2^(i/n_q_a) * 2^p_bits); p_bits is at least
// n_o_a + 3 and is widened to ceil(log2 n_q_a) + 3 when needed so that the
// single-term round-trip through t_q_inv is exact for every grid level.
// t_q_inv has 4*n_q_a entries indexed by the mantissa bits just below the
// accumulator's leading one.
struct LogTables {
    int n_q_w = 0, n_o_w = 0;
    int n_q_a = 0, n_o_a = 0;
    int e_act = 0;    // activation scale exponent: S_max = 2^e_act
    int e_w = 0;      // weight scale exponent: K_max = 2^e_w
    int p_bits = 0;   // t_q fraction bits
    int f_bits = 0;   // accumulator fraction bits (= p_bits + n_o_a)
    int m_bits = 0;   // mantissa index width (= log2(4 n_q_a))
    int ratio_log2 = 0; // log2(n_q_a / n_q_w)
    std::vector<uint32_t> t_q;    // max(n_q_w, n_q_a) entries
    std::vector<uint16_t> t_q_inv; // 4 * n_q_a entries

    LogGrid act_grid() const { return {n_q_a, e_act, n_o_a}; }
    LogGrid weight_grid() const { return {n_q_w, e_w, n_o_w}; }
};

LogTables build_log_tables(int n_q_w, int n_o_w, int n_q_a, int n_o_a, int e_act, int e_w);

// Product of a weight and an activation as an index addition:
// v = v_a + (v_w << ratio_log2), sign multiplicative, zero absorbing.
LogValue log_multiply(const LogValue& w, const LogValue& a, const LogTables& t);

// Fixed-point linear value of a log-index at scale 2^f_bits / S_max:
// mask out the within-octave bits, look up t_q, shift by the octave.
int64_t log_to_linear(const LogValue& lv, const LogTables& t);

// Back to the activation grid: sign, octave from the leading-zero count,
// within-octave index from t_q_inv on the mantissa bits. Values beyond the
// top clamp; values below the lowest octave return zero.
LogValue linear_to_log(int64_t acc, const LogTables& t);

// ---------------------------------------------------------------------------
// Octave/octave model

struct LogWeight {
    int32_t tap = 0;      // dense: input index; conv: (c*kh + ky)*kw + kx
    int8_t sign = 0;      // never 0: zero weights are dropped from the stream
    uint8_t octave = 0;   // k
    uint16_t index = 0;   // n, 1-based
};

struct LogQuantLayer {
    LayerKind kind = LayerKind::dense;
    Activation activation = Activation::relu6;
    int in_count = 0, out_count = 0, out_channels = 0;
    bool has_bias = false;
    int in_c = 0, in_h = 0, in_w = 0, kh = 0, kw = 0, stride = 1, pad = 0;

    std::vector<uint32_t> unit_start; // out_channels + 1 offsets into weights
    std::vector<LogWeight> weights;   // zero-dropped, per unit
    std::vector<LogValue> bias_log;   // per channel, on the weight grid (sign 0 = none)

    // Derived at finalize() so the per-term loop needs no multiplies:
    // pre-shifted product index increments, signs, input offsets, tap
    // coordinates for conv bounds checks, and decoded bias terms.
    std::vector<int32_t> rt_v_scaled;
    std::vector<int8_t> rt_sign;
    std::vector<int32_t> rt_off;
    std::vector<int16_t> rt_dy, rt_dx;
    std::vector<int64_t> rt_bias;
};

struct LogQuantModel {
    LogTables tables;
    std::vector<int> input_shape;
    Codebook weight_cb; // octave weight levels (reference/metrics)
    Codebook act_cb;    // octave activation levels
    int32_t act_cap_v = 0; // grid index of the activation's upper bound
    std::vector<LogQuantLayer> layers;

    size_t n_net() const; // stored weight entries + biases
    void finalize();      // populate per-layer runtime arrays
};

struct LogQuantOptions {
    int n_q_w = 8, n_o_w = 15;
    int n_q_a = 32, n_o_a = 3;
    double v_max_override = 0.0; // 0: derive from the model's weight magnitudes
    // Order each unit's addends smallest weight magnitude first, trading
    // stream locality for accumulator dynamic range. Measured option, not
    // a correctness feature.
    bool sort_addends = false;
};

// Requires a norm-free model whose hidden activations are relu6 (octave
// activation grids are non-negative).
LogQuantModel build_log_model(const FloatModel& model, const LogQuantOptions& opt);

std::vector<LogValue> encode_input_log(const LogQuantModel& m, std::span<const float> input);

struct LogForwardResult {
    std::vector<int64_t> logits; // final accumulators at scale 2^f_bits / S_max
    std::vector<int> topk;
};

struct LogTrace {
    std::vector<std::vector<int64_t>> accumulators;
    std::vector<std::vector<LogValue>> out_values;
};

// Multiply-free forward pass: per unit, index additions for the products,
// t_q decode into a 64-bit fixed-point accumulator, t_q_inv decode back to
// the activation grid. The final layer returns raw accumulators.
LogForwardResult forward_log(const LogQuantModel& m, std::span<const LogValue> input, int topk,
                             LogTrace* trace = nullptr);
std::vector<LogForwardResult> forward_log_batch(const LogQuantModel& m,
                                                const std::vector<std::vector<LogValue>>& inputs,
                                                int topk, int threads = 1);

void save_log_model(const LogQuantModel& m, const std::filesystem::path& path);
LogQuantModel load_log_model(const std::filesystem::path& path);
std::vector<SectionBytes> log_section_bytes(const LogQuantModel& m);

constexpr char kLogMagic[9] = "LOGQMDL1";

} // namespace lutnn
