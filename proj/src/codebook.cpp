#include "lutnn/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace lutnn {

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::kmeans: return "kmeans";
        case Scheme::laplacian: return "laplacian";
        case Scheme::model_free: return "modelfree";
        case Scheme::octave: return "octave";
        case Scheme::uniform_act: return "uniform-act";
        case Scheme::octave_act: return "octave-act";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "kmeans") return Scheme::kmeans;
    if (name == "laplacian") return Scheme::laplacian;
    if (name == "modelfree") return Scheme::model_free;
    if (name == "octave") return Scheme::octave;
    if (name == "uniform-act") return Scheme::uniform_act;
    if (name == "octave-act") return Scheme::octave_act;
    fail("unknown quantization scheme '", name, "'");
}

bool Codebook::contains_one() const {
    return std::binary_search(levels.begin(), levels.end(), 1.0);
}

double quantization_inertia(std::span<const double> samples, const std::vector<double>& levels) {
    std::vector<double> cuts = midpoint_cuts(levels);
    double inertia = 0.0;
    for (double x : samples) {
        double d = x - levels[static_cast<size_t>(nearest_by_cuts(cuts, x))];
        inertia += d * d;
    }
    return inertia;
}

void force_one_insert(std::vector<double>& levels) {
    if (std::binary_search(levels.begin(), levels.end(), 1.0)) return;
    levels.insert(std::upper_bound(levels.begin(), levels.end(), 1.0), 1.0);
}

void force_one_replace_nearest(std::vector<double>& levels) {
    require(!levels.empty(), "force_one: empty codebook");
    if (std::binary_search(levels.begin(), levels.end(), 1.0)) return;
    levels[static_cast<size_t>(nearest_level_index(levels, 1.0))] = 1.0;
}

// ---------------------------------------------------------------------------
// 1-D k-means

namespace {

// Deterministic seedings that complement k-means++ draws: equal-mass
// quantiles and an equal-width sweep of the sample range.
std::vector<double> seed_quantiles(const std::vector<double>& sorted_pts, int k) {
    std::vector<double> centers(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
        size_t at = static_cast<size_t>((2.0 * j + 1.0) / (2.0 * k) *
                                        static_cast<double>(sorted_pts.size()));
        centers[static_cast<size_t>(j)] = sorted_pts[std::min(at, sorted_pts.size() - 1)];
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

std::vector<double> seed_uniform(const std::vector<double>& sorted_pts, int k) {
    double lo = sorted_pts.front(), hi = sorted_pts.back();
    std::vector<double> centers(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j)
        centers[static_cast<size_t>(j)] = lo + (hi - lo) * (2.0 * j + 1.0) / (2.0 * k);
    return centers;
}

// One k-means++ seeding pass: k distinct starting centers.
std::vector<double> seed_plus_plus(const std::vector<double>& pts, int k, std::mt19937_64& rng) {
    std::vector<double> centers;
    centers.reserve(static_cast<size_t>(k));
    std::uniform_int_distribution<size_t> first(0, pts.size() - 1);
    centers.push_back(pts[first(rng)]);
    std::vector<double> d2(pts.size());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            double best = std::abs(pts[i] - centers[0]);
            for (size_t j = 1; j < centers.size(); ++j)
                best = std::min(best, std::abs(pts[i] - centers[j]));
            d2[i] = best * best;
            total += d2[i];
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        size_t pick = pts.size() - 1;
        double run = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            run += d2[i];
            if (r < run) {
                pick = i;
                break;
            }
        }
        centers.push_back(pts[pick]);
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

struct LloydResult {
    std::vector<double> centers;
    double inertia = 0.0;
};

// Squared-error cost of one cluster over sorted range [i, j), from moments.
double range_cost(const std::vector<double>& prefix, const std::vector<double>& prefix_sq,
                  size_t i, size_t j) {
    if (j <= i) return 0.0;
    double cnt = static_cast<double>(j - i);
    double s = prefix[j] - prefix[i];
    return (prefix_sq[j] - prefix_sq[i]) - s * s / cnt;
}

// Post-convergence boundary refinement: re-split each adjacent cluster
// pair at its exact optimal boundary, sweeping until no move improves.
// Escapes the Lloyd fixpoints where whole runs of points sit in the wrong
// cluster even though every boundary is a midpoint.
void refine_boundaries(const std::vector<double>& prefix, const std::vector<double>& prefix_sq,
                       std::vector<size_t>& bound) {
    size_t k = bound.size() - 1;
    for (int round = 0; round < 100; ++round) {
        bool changed = false;
        for (size_t j = 0; j + 1 < k; ++j) {
            size_t lo = bound[j], hi = bound[j + 2];
            if (hi - lo < 2) continue;
            size_t best = bound[j + 1];
            double best_cost = range_cost(prefix, prefix_sq, lo, best) +
                               range_cost(prefix, prefix_sq, best, hi);
            for (size_t m = lo + 1; m < hi; ++m) {
                double cost = range_cost(prefix, prefix_sq, lo, m) +
                              range_cost(prefix, prefix_sq, m, hi);
                if (cost < best_cost - 1e-12) {
                    best_cost = cost;
                    best = m;
                }
            }
            if (best != bound[j + 1]) {
                bound[j + 1] = best;
                changed = true;
            }
        }
        if (!changed) break;
    }
}

// One-swap local search: remove the boundary whose loss costs least and
// re-split the cluster whose optimal split gains most, when the exchange
// strictly improves the total. Fixes cluster-count misallocation between
// modes, which neither Lloyd steps nor pairwise boundary moves can reach.
void reallocate_clusters(const std::vector<double>& prefix, const std::vector<double>& prefix_sq,
                         std::vector<size_t>& bound) {
    size_t k = bound.size() - 1;
    if (k < 3) return;
    for (int round = 0; round < 50; ++round) {
        refine_boundaries(prefix, prefix_sq, bound);

        // cheapest boundary to remove
        size_t merge_r = 0;
        double merge_inc = std::numeric_limits<double>::infinity();
        for (size_t r = 1; r < k; ++r) {
            double inc = range_cost(prefix, prefix_sq, bound[r - 1], bound[r + 1]) -
                         range_cost(prefix, prefix_sq, bound[r - 1], bound[r]) -
                         range_cost(prefix, prefix_sq, bound[r], bound[r + 1]);
            if (inc < merge_inc) {
                merge_inc = inc;
                merge_r = r;
            }
        }
        // most profitable cluster to split, disjoint from the merge pair
        size_t split_at = 0;
        double split_gain = -std::numeric_limits<double>::infinity();
        for (size_t t = 0; t < k; ++t) {
            if (t + 1 == merge_r || t == merge_r) continue;
            size_t lo = bound[t], hi = bound[t + 1];
            if (hi - lo < 2) continue;
            double whole = range_cost(prefix, prefix_sq, lo, hi);
            for (size_t m = lo + 1; m < hi; ++m) {
                double gain = whole - range_cost(prefix, prefix_sq, lo, m) -
                              range_cost(prefix, prefix_sq, m, hi);
                if (gain > split_gain) {
                    split_gain = gain;
                    split_at = m;
                }
            }
        }
        if (split_gain - merge_inc <= 1e-12) break;
        bound.erase(bound.begin() + static_cast<ptrdiff_t>(merge_r));
        bound.insert(std::upper_bound(bound.begin(), bound.end(), split_at), split_at);
    }
}

// Lloyd iterations on sorted points, using midpoint boundaries for
// assignment and prefix sums for the mean updates.
LloydResult lloyd(const std::vector<double>& sorted_pts, const std::vector<double>& prefix,
                  const std::vector<double>& prefix_sq, std::vector<double> centers,
                  int max_iters, double tol) {
    size_t n = sorted_pts.size();
    int k = static_cast<int>(centers.size());
    double prev_inertia = -1.0;
    double inertia = 0.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        // Cluster j owns sorted indices [bound[j], bound[j+1]).
        std::vector<size_t> bound(static_cast<size_t>(k) + 1);
        bound[0] = 0;
        bound[static_cast<size_t>(k)] = n;
        for (int j = 0; j + 1 < k; ++j) {
            double cut = 0.5 * (centers[static_cast<size_t>(j)] + centers[static_cast<size_t>(j) + 1]);
            bound[static_cast<size_t>(j) + 1] =
                static_cast<size_t>(std::upper_bound(sorted_pts.begin(), sorted_pts.end(), cut) -
                                    sorted_pts.begin());
        }
        // Empty clusters steal the globally worst-fit point.
        inertia = 0.0;
        bool empty = false;
        for (int j = 0; j < k; ++j)
            if (bound[static_cast<size_t>(j) + 1] == bound[static_cast<size_t>(j)]) empty = true;
        if (empty) {
            for (int j = 0; j < k; ++j) {
                size_t lo = bound[static_cast<size_t>(j)], hi = bound[static_cast<size_t>(j) + 1];
                if (lo < hi) continue;
                // farthest point from its current center
                size_t worst = 0;
                double worst_d = -1.0;
                for (int jj = 0; jj < k; ++jj) {
                    for (size_t i = bound[static_cast<size_t>(jj)]; i < bound[static_cast<size_t>(jj) + 1]; ++i) {
                        double d = std::abs(sorted_pts[i] - centers[static_cast<size_t>(jj)]);
                        if (d > worst_d) {
                            worst_d = d;
                            worst = i;
                        }
                    }
                }
                centers[static_cast<size_t>(j)] = sorted_pts[worst];
            }
            std::sort(centers.begin(), centers.end());
            prev_inertia = -1.0;
            continue;
        }
        for (int j = 0; j < k; ++j) {
            size_t lo = bound[static_cast<size_t>(j)], hi = bound[static_cast<size_t>(j) + 1];
            double cnt = static_cast<double>(hi - lo);
            double sum = prefix[hi] - prefix[lo];
            double sumsq = prefix_sq[hi] - prefix_sq[lo];
            double mean = sum / cnt;
            centers[static_cast<size_t>(j)] = mean;
            inertia += sumsq - sum * mean; // sum (x - mean)^2 via moments
        }
        if (prev_inertia >= 0.0) {
            double denom = std::max(prev_inertia, 1e-300);
            if (std::abs(prev_inertia - inertia) / denom < tol) break;
        }
        prev_inertia = inertia;
    }

    // Final boundaries from the converged centers, then pairwise-exact
    // boundary refinement and a recentering pass.
    std::vector<size_t> bound(static_cast<size_t>(k) + 1);
    bound[0] = 0;
    bound[static_cast<size_t>(k)] = n;
    for (int j = 0; j + 1 < k; ++j) {
        double cut = 0.5 * (centers[static_cast<size_t>(j)] + centers[static_cast<size_t>(j) + 1]);
        bound[static_cast<size_t>(j) + 1] = static_cast<size_t>(
            std::upper_bound(sorted_pts.begin(), sorted_pts.end(), cut) - sorted_pts.begin());
    }
    reallocate_clusters(prefix, prefix_sq, bound);
    refine_boundaries(prefix, prefix_sq, bound);
    inertia = 0.0;
    for (int j = 0; j < k; ++j) {
        size_t lo = bound[static_cast<size_t>(j)], hi = bound[static_cast<size_t>(j) + 1];
        if (lo < hi)
            centers[static_cast<size_t>(j)] =
                (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        inertia += range_cost(prefix, prefix_sq, lo, hi);
    }
    std::sort(centers.begin(), centers.end());
    return {std::move(centers), std::max(inertia, 0.0)};
}

} // namespace

Codebook kmeans_1d(std::span<const double> samples, int k, const KMeansOptions& opt) {
    require(k >= 2, "kmeans_1d: k must be >= 2, got ", k);
    require(!samples.empty(), "kmeans_1d: empty sample set");

    std::mt19937_64 rng(opt.seed);
    std::vector<double> pts;
    if (samples.size() > opt.subsample) {
        pts.reserve(opt.subsample);
        std::sample(samples.begin(), samples.end(), std::back_inserter(pts), opt.subsample, rng);
    } else {
        pts.assign(samples.begin(), samples.end());
    }
    std::sort(pts.begin(), pts.end());
    size_t distinct = 1;
    for (size_t i = 1; i < pts.size(); ++i)
        if (pts[i] != pts[i - 1]) ++distinct;
    require(static_cast<size_t>(k) <= distinct, "kmeans_1d: k = ", k, " exceeds the ", distinct,
            " distinct subsampled values");

    std::vector<double> prefix(pts.size() + 1, 0.0), prefix_sq(pts.size() + 1, 0.0);
    for (size_t i = 0; i < pts.size(); ++i) {
        prefix[i + 1] = prefix[i] + pts[i];
        prefix_sq[i + 1] = prefix_sq[i] + pts[i] * pts[i];
    }

    LloydResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    auto try_seed = [&](std::vector<double> centers) {
        LloydResult res =
            lloyd(pts, prefix, prefix_sq, std::move(centers), opt.max_iters, opt.tol);
        if (res.inertia < best.inertia) best = std::move(res);
    };
    try_seed(seed_quantiles(pts, k));
    try_seed(seed_uniform(pts, k));
    for (int r = 0; r < std::max(1, opt.restarts); ++r) try_seed(seed_plus_plus(pts, k, rng));

    Codebook cb;
    cb.scheme = Scheme::kmeans;
    cb.levels = std::move(best.centers);
    force_one_insert(cb.levels);
    return cb;
}

// ---------------------------------------------------------------------------
// Laplacian-model centers

double laplacian_delta(double l_prev, double n) {
    double arg = 1.0 - 2.0 * std::exp(l_prev) / n;
    require(arg > 0.0, "laplacian recursion leaves the log domain (argument ", arg, ")");
    return -std::log(arg);
}

Codebook laplacian_centers(int n, double w_max) {
    require(n >= 3 && n % 2 == 1, "laplacian_centers: N must be odd and >= 3, got ", n);
    require(w_max > 0.0, "laplacian_centers: W_max must be positive, got ", w_max);
    int half = n / 2;
    std::vector<double> ls(static_cast<size_t>(half) + 1, 0.0);
    for (int i = 1; i <= half; ++i) {
        double delta;
        try {
            delta = laplacian_delta(ls[static_cast<size_t>(i) - 1], static_cast<double>(n));
        } catch (const Error&) {
            fail("laplacian_centers: recursion leaves the log domain at index ", i);
        }
        ls[static_cast<size_t>(i)] = ls[static_cast<size_t>(i) - 1] + delta;
    }
    double b = w_max / ls[static_cast<size_t>(half)];
    Codebook cb;
    cb.scheme = Scheme::laplacian;
    cb.levels.reserve(static_cast<size_t>(n));
    for (int i = half; i >= 1; --i) cb.levels.push_back(-b * ls[static_cast<size_t>(i)]);
    cb.levels.push_back(0.0);
    for (int i = 1; i <= half; ++i) cb.levels.push_back(b * ls[static_cast<size_t>(i)]);
    return cb;
}

double estimate_w_max(std::span<const double> samples, int n_w) {
    require(!samples.empty(), "estimate_w_max: empty sample set");
    require(n_w >= 1, "estimate_w_max: N_w must be >= 1");
    std::vector<double> mags(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) mags[i] = std::abs(samples[i]);
    size_t top = static_cast<size_t>(
        std::ceil(static_cast<double>(samples.size()) /
                  (static_cast<double>(n_w) * static_cast<double>(n_w))));
    top = std::clamp<size_t>(top, 1, mags.size());
    std::nth_element(mags.begin(), mags.begin() + static_cast<ptrdiff_t>(mags.size() - top), mags.end());
    double sum = 0.0;
    for (size_t i = mags.size() - top; i < mags.size(); ++i) sum += mags[i];
    return sum / static_cast<double>(top);
}

// ---------------------------------------------------------------------------
// Triangle occupancy profile

namespace {

// Integral of the unit-area triangle density of base width w from 0 to t.
double triangle_cdf_half(double t, double w) { return (2.0 / w) * (t - t * t / w); }

} // namespace

TriangleProfile triangle_profile(int n_w, int64_t n_net) {
    require(n_w >= 1, "triangle_profile: N_w must be >= 1, got ", n_w);
    require(n_w % 2 == 1, "triangle_profile: N_w must be odd (ambiguous center), got ", n_w);
    require(n_net >= n_w, "triangle_profile: N_net = ", n_net, " < N_w = ", n_w);

    TriangleProfile prof;
    prof.n_w = n_w;
    prof.n_net = n_net;
    int half = n_w / 2;
    double w = static_cast<double>(n_w) + 2.0;

    // Symmetric pair masses, outermost pair absorbing the tail.
    std::vector<int64_t> pair(static_cast<size_t>(half) + 1, 0); // pair[0] unused
    int64_t assigned = 0;
    for (int j = 1; j <= half; ++j) {
        double lo = static_cast<double>(j) - 0.5;
        double hi = (j == half) ? w / 2.0 : static_cast<double>(j) + 0.5;
        double mass = static_cast<double>(n_net) *
                      (triangle_cdf_half(hi, w) - triangle_cdf_half(lo, w));
        pair[static_cast<size_t>(j)] = round_half_away(mass);
        assigned += 2 * pair[static_cast<size_t>(j)];
    }
    int64_t center = n_net - assigned;

    // The rounding remainder lands in the center; if that dents the peak
    // (or drives it negative), shift mass inward pairwise until the counts
    // are unimodal again.
    auto outer_of = [&](int j) { return j == half ? int64_t{0} : pair[static_cast<size_t>(j) + 1]; };
    while (half >= 1 && center < pair[1]) {
        int step = -1;
        for (int j = 1; j <= half; ++j) {
            if (pair[static_cast<size_t>(j)] > outer_of(j)) {
                step = j;
                break;
            }
        }
        require(step != -1, "triangle_profile: internal rebalance failure");
        pair[static_cast<size_t>(step)] -= 1;
        center += 2;
    }

    prof.counts.resize(static_cast<size_t>(n_w));
    prof.counts[static_cast<size_t>(half)] = center;
    for (int j = 1; j <= half; ++j) {
        prof.counts[static_cast<size_t>(half - j)] = pair[static_cast<size_t>(j)];
        prof.counts[static_cast<size_t>(half + j)] = pair[static_cast<size_t>(j)];
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Model-free quantization

Codebook modelfree_init(std::span<const double> layer_values, int n_w, CenterMode mode) {
    require(static_cast<int64_t>(layer_values.size()) >= n_w, "modelfree_init: layer has ",
            layer_values.size(), " elements, fewer than N_w = ", n_w);
    TriangleProfile prof = triangle_profile(n_w, static_cast<int64_t>(layer_values.size()));

    std::vector<double> sorted(layer_values.begin(), layer_values.end());
    std::sort(sorted.begin(), sorted.end());

    Codebook cb;
    cb.scheme = Scheme::model_free;
    cb.counts = prof.counts;
    cb.levels.resize(static_cast<size_t>(n_w));
    size_t lo = 0;
    for (int b = 0; b < n_w; ++b) {
        size_t cnt = static_cast<size_t>(prof.counts[static_cast<size_t>(b)]);
        double center;
        if (cnt == 0) {
            center = sorted[std::min(lo, sorted.size() - 1)];
        } else if (mode == CenterMode::l2_mean) {
            double sum = 0.0;
            for (size_t i = lo; i < lo + cnt; ++i) sum += sorted[i];
            center = sum / static_cast<double>(cnt);
        } else {
            size_t a = lo + (cnt - 1) / 2, c = lo + cnt / 2;
            center = 0.5 * (sorted[a] + sorted[c]);
        }
        cb.levels[static_cast<size_t>(b)] = center;
        lo += cnt;
    }
    return cb;
}

std::vector<double> modelfree_requantize(std::span<const double> values, const Codebook& cb) {
    require(cb.scheme == Scheme::model_free, "modelfree_requantize: wrong codebook scheme");
    int64_t total = std::accumulate(cb.counts.begin(), cb.counts.end(), int64_t{0});
    require(static_cast<int64_t>(values.size()) == total, "modelfree_requantize: ", values.size(),
            " values but frozen occupancy totals ", total);

    std::vector<size_t> order(values.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return values[a] < values[b]; });

    std::vector<double> out(values.size());
    size_t rank = 0;
    for (size_t b = 0; b < cb.counts.size(); ++b)
        for (int64_t i = 0; i < cb.counts[b]; ++i) out[order[rank++]] = cb.levels[b];
    return out;
}

// ---------------------------------------------------------------------------
// Octave codebooks

Codebook octave_codebook(int n_q, int n_o, double v_max) {
    require(n_q >= 1, "octave_codebook: N_q must be >= 1, got ", n_q);
    require(n_o >= 1, "octave_codebook: N_o must be >= 1, got ", n_o);
    require(v_max > 0.0, "octave_codebook: v_max must be positive, got ", v_max);
    double k_max = std::exp2(std::ceil(std::log2(v_max)));

    Codebook cb;
    cb.scheme = Scheme::octave;
    cb.n_q = n_q;
    cb.n_o = n_o;
    cb.k_max = k_max;
    cb.levels.reserve(static_cast<size_t>(2 * n_q * n_o + 1));
    // ascending negatives, zero, ascending positives
    for (int k = 0; k < n_o; ++k)
        for (int s = 1; s <= n_q; ++s)
            cb.levels.push_back(-k_max * std::exp2(-(k + static_cast<double>(s) / n_q)));
    cb.levels.push_back(0.0);
    for (int k = n_o - 1; k >= 0; --k)
        for (int s = n_q; s >= 1; --s)
            cb.levels.push_back(k_max * std::exp2(-(k + static_cast<double>(s) / n_q)));
    return cb;
}

OctaveParts octave_components(const Codebook& cb, int level_index) {
    require(cb.scheme == Scheme::octave || cb.scheme == Scheme::octave_act,
            "octave_components: not an octave codebook");
    int zero_idx = cb.scheme == Scheme::octave ? cb.n_q * cb.n_o : 0;
    require(level_index >= 0 && level_index < cb.size(), "octave_components: index ", level_index,
            " out of range");
    OctaveParts p;
    if (level_index == zero_idx) return p; // sign 0 = zero level
    int pos = level_index > zero_idx ? level_index - zero_idx : zero_idx - level_index;
    p.sign = level_index > zero_idx ? 1 : -1;
    int t = cb.n_q * cb.n_o - pos; // 0 = outermost (largest) level
    p.octave = t / cb.n_q;
    p.index = t % cb.n_q + 1;
    return p;
}

// ---------------------------------------------------------------------------
// Activation codebooks

Codebook uniform_linear_activations(int n_a, Activation act) {
    require(n_a >= 2, "uniform_linear_activations: N_a must be >= 2, got ", n_a);
    double lo, hi;
    activation_range(act, &lo, &hi);
    Codebook cb;
    cb.scheme = Scheme::uniform_act;
    cb.levels.resize(static_cast<size_t>(n_a));
    for (int i = 0; i < n_a; ++i)
        cb.levels[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n_a - 1);
    cb.levels.back() = hi; // exact endpoint
    return cb;
}

Codebook octave_activations(int n_q, int n_o, Activation act) {
    require(n_q >= 1 && n_o >= 1, "octave_activations: N_q and N_o must be >= 1");
    require(act == Activation::relu6,
            "octave_activations: requires a non-negative activation (relu6); '",
            activation_name(act), "' is not supported");
    double lo, hi;
    activation_range(act, &lo, &hi);
    double s_max = std::exp2(std::ceil(std::log2(hi)));

    Codebook cb;
    cb.scheme = Scheme::octave_act;
    cb.n_q = n_q;
    cb.n_o = n_o;
    cb.k_max = s_max;
    cb.levels.reserve(static_cast<size_t>(n_q * n_o + 1));
    cb.levels.push_back(0.0);
    for (int k = n_o - 1; k >= 0; --k)
        for (int s = n_q; s >= 1; --s)
            cb.levels.push_back(s_max * std::exp2(-(k + static_cast<double>(s) / n_q)));
    return cb;
}

// ---------------------------------------------------------------------------

std::vector<double> gather_layer_params(const LayerSpec& layer) {
    std::vector<double> out;
    out.reserve(layer.param_count());
    for (float w : layer.weights.data) out.push_back(static_cast<double>(w));
    if (layer.bias)
        for (float b : layer.bias->data) out.push_back(static_cast<double>(b));
    return out;
}

std::vector<double> gather_params(const FloatModel& model) {
    std::vector<double> out;
    out.reserve(model.param_count());
    for (const auto& l : model.layers) {
        std::vector<double> lp = gather_layer_params(l);
        out.insert(out.end(), lp.begin(), lp.end());
    }
    return out;
}

} // namespace lutnn
