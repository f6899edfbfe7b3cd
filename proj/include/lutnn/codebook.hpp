#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lutnn/common.hpp"
#include "lutnn/model.hpp"

namespace lutnn {

enum class Scheme {
    kmeans,       // 1-D Lloyd clustering of pooled weights/biases
    laplacian,    // closed-form centers for a Laplacian weight model
    model_free,   // frozen triangle-occupancy buckets, per layer
    octave,       // log-spaced weight levels, shared network-wide
    uniform_act,  // linearly spaced activation levels
    octave_act    // log-spaced activation levels
};

const char* scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// An ordered set of quantization levels plus scheme-specific metadata.
struct Codebook {
    Scheme scheme = Scheme::uniform_act;
    std::vector<double> levels; // ascending
    // model_free: frozen occupancy count per level, same order as levels.
    std::vector<int64_t> counts;
    // octave schemes: samples/octave, octave count, and the power-of-two
    // scale (K_max for weights, S_max for activations).
    int n_q = 0, n_o = 0;
    double k_max = 0.0;

    int size() const { return static_cast<int>(levels.size()); }
    bool contains_one() const;
    std::vector<double> cuts() const { return midpoint_cuts(levels); }
    // Nearest-level index, ties away from zero.
    int nearest(double x) const { return nearest_level_index(levels, x); }
    double quantize(double x) const { return levels[static_cast<size_t>(nearest(x))]; }
};

// Sum of squared distances from each sample to its nearest level.
double quantization_inertia(std::span<const double> samples, const std::vector<double>& levels);

// Weight codebooks must contain the exact level 1.0. Two policies:
// insertion grows the codebook by one level; replacement overwrites the
// nearest existing level, keeping the level count fixed.
void force_one_insert(std::vector<double>& levels);
void force_one_replace_nearest(std::vector<double>& levels);

// ---------------------------------------------------------------------------
// 1-D k-means

struct KMeansOptions {
    size_t subsample = 100000;
    uint64_t seed = 0;
    int restarts = 24;
    int max_iters = 100;
    double tol = 1e-7; // relative inertia change convergence threshold
};

// Lloyd's iteration with k-means++ seeding on a seeded subsample of size
// min(subsample, |samples|). Deterministic given the seed. The result
// includes a forced 1.0 level (inserted when absent). Fails when k exceeds
// the number of distinct subsampled values.
Codebook kmeans_1d(std::span<const double> samples, int k, const KMeansOptions& opt = {});

// ---------------------------------------------------------------------------
// Laplacian-model centers

// One step of the center recursion: Δ = -ln(1 - 2 exp(L_prev) / N).
// Fails when the argument of the logarithm is not positive.
double laplacian_delta(double l_prev, double n);

// Centers {±b·L_i} ∪ {0} for i = 1..N/2 from the recursion
//   L_0 = 0,  Δ_i = laplacian_delta(L_{i-1}, N),  L_i = L_{i-1} + Δ_i
// with scale b = W_max / L_{N/2}. N must be odd, >= 3. The spacings Δ_i
// are strictly increasing.
Codebook laplacian_centers(int n, double w_max);

// W_max estimate: mean magnitude of the top ceil(n / N_w^2) absolute values.
double estimate_w_max(std::span<const double> samples, int n_w);

// ---------------------------------------------------------------------------
// Triangle occupancy profile

// Discretized symmetric triangle of base width N_w + 2 and area N_net:
// bucket_counts[i] bulk-rounds the triangle mass over unit bin i, outer
// bins absorb the tail, the rounding remainder lands in the center bin,
// and a final rebalance keeps the counts unimodal.
struct TriangleProfile {
    int n_w = 0;
    int64_t n_net = 0;
    std::vector<int64_t> counts; // length n_w, symmetric, sums to n_net
};

TriangleProfile triangle_profile(int n_w, int64_t n_net);

// ---------------------------------------------------------------------------
// Model-free (occupancy-driven) quantization

enum class CenterMode { l2_mean, l1_median };

// Sort the layer's pooled weights+biases, partition by the cumulative
// triangle counts, and freeze the per-bucket center (mean or median).
// Fails when the layer has fewer elements than N_w.
Codebook modelfree_init(std::span<const double> layer_values, int n_w,
                        CenterMode mode = CenterMode::l2_mean);

// Rank-scatter requantization: the i-th smallest element receives the i-th
// entry of the frozen sorted quantized-value list, regardless of distance.
// Preserves the frozen value multiset exactly; idempotent.
std::vector<double> modelfree_requantize(std::span<const double> values, const Codebook& cb);

// ---------------------------------------------------------------------------
// Octave codebooks

// Weight levels {0} ∪ {±K_max·2^{-(k + n/N_q)}: 0 <= k < N_o, 1 <= n <= N_q}
// with K_max = 2^ceil(log2 v_max); exactly 2·N_q·N_o + 1 levels.
Codebook octave_codebook(int n_q, int n_o, double v_max);

// (sign, octave, within-octave index) decomposition of an octave-codebook
// level; sign 0 identifies the zero level.
struct OctaveParts {
    int sign = 0;
    int octave = 0; // k
    int index = 0;  // n, 1-based
};
OctaveParts octave_components(const Codebook& cb, int level_index);

// ---------------------------------------------------------------------------
// Activation codebooks

// N_a levels evenly spaced over the closed output range of a bounded
// activation. Fails for unbounded activations.
Codebook uniform_linear_activations(int n_a, Activation act);

// {0} ∪ {S_max·2^{-(k + n/N_q)}} spanning N_o octaves below
// S_max = 2^ceil(log2 max output). Non-negative activations only; signed
// activations (tanh) are rejected.
Codebook octave_activations(int n_q, int n_o, Activation act);

// ---------------------------------------------------------------------------

// Pool all weight and bias values of a model into one sample vector
// (layer-major, weights then bias).
std::vector<double> gather_params(const FloatModel& model);
std::vector<double> gather_layer_params(const LayerSpec& layer);

} // namespace lutnn
