#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lutnn/codebook.hpp"
#include "support/oracles.hpp"

using namespace lutnn;

TEST_CASE("kmeans_1d separated clusters, forced 1.0") {
    std::vector<double> samples{0.0, 0.0, 10.0, 10.0};
    Codebook cb = kmeans_1d(samples, 2);
    REQUIRE(cb.levels.size() == 3);
    CHECK(cb.levels[0] == doctest::Approx(0.0));
    CHECK(cb.levels[1] == 1.0);
    CHECK(cb.levels[2] == doctest::Approx(10.0));
    CHECK(cb.contains_one());
}

TEST_CASE("kmeans_1d k equal to sample count gives zero inertia") {
    std::vector<double> samples{-3.0, -1.0, 0.5, 2.0, 7.0};
    Codebook cb = kmeans_1d(samples, 5);
    double inertia = quantization_inertia(samples, cb.levels);
    CHECK(inertia == doctest::Approx(0.0));
    // centers are the distinct sorted samples (plus the forced 1.0)
    for (double s : samples)
        CHECK(std::binary_search(cb.levels.begin(), cb.levels.end(), s));
}

TEST_CASE("kmeans_1d rejects k beyond distinct values") {
    std::vector<double> samples{1.0, 1.0, 2.0};
    CHECK_THROWS_WITH_AS(kmeans_1d(samples, 3), doctest::Contains("distinct"), Error);
}

TEST_CASE("kmeans_1d deterministic given seed, near DP-optimal") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g1(-5.0, 1.0), g2(5.0, 1.0);
    std::vector<double> samples;
    for (int i = 0; i < 1000; ++i) samples.push_back(g1(rng));
    for (int i = 0; i < 1000; ++i) samples.push_back(g2(rng));

    KMeansOptions opt;
    opt.seed = 42;
    Codebook a = kmeans_1d(samples, 2, opt);
    Codebook b = kmeans_1d(samples, 2, opt);
    CHECK(a.levels == b.levels);

    double got = quantization_inertia(samples, a.levels);
    double best = test_support::dp_kmeans_inertia(samples, 2);
    CHECK(got <= 1.01 * best);
}

TEST_CASE("kmeans_1d subsampling bounds the working set") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> samples;
    for (int i = 0; i < 5000; ++i) samples.push_back(g(rng));
    KMeansOptions opt;
    opt.subsample = 500;
    opt.seed = 3;
    Codebook cb = kmeans_1d(samples, 8, opt);
    CHECK(cb.levels.size() >= 8); // 8 or 9 with the forced 1.0
    CHECK(std::is_sorted(cb.levels.begin(), cb.levels.end()));
}

// ---------------------------------------------------------------------------

TEST_CASE("laplacian_centers recursion values") {
    Codebook cb = laplacian_centers(1001, 1.0);
    REQUIRE(cb.levels.size() == 1001);
    CHECK(cb.levels[500] == 0.0);

    // N=1000 first step: delta_1 = -ln(1 - 2/1000); the recursion itself
    // requires odd N, so evaluate via the formula used one step in.
    double delta1 = -std::log(1.0 - 2.0 / 1000.0);
    CHECK(delta1 == doctest::Approx(0.0020020).epsilon(1e-4));

    // symmetric about zero
    for (size_t i = 0; i < cb.levels.size(); ++i)
        CHECK(cb.levels[i] == doctest::Approx(-cb.levels[cb.levels.size() - 1 - i]).epsilon(1e-12));

    // spacings strictly increase away from zero
    for (size_t i = 501; i + 1 < cb.levels.size(); ++i) {
        double d_in = cb.levels[i] - cb.levels[i - 1];
        double d_out = cb.levels[i + 1] - cb.levels[i];
        CHECK(d_out > d_in);
    }

    // scale: outermost center sits at W_max
    CHECK(cb.levels.back() == doctest::Approx(1.0));
}

TEST_CASE("laplacian_centers rejects bad N") {
    CHECK_THROWS_AS(laplacian_centers(4, 1.0), Error);
    CHECK_THROWS_AS(laplacian_centers(1, 1.0), Error);
}

TEST_CASE("laplacian_delta rejects arguments outside the log domain") {
    // exp(L) >= N/2 makes the log argument non-positive
    CHECK_THROWS_WITH_AS(laplacian_delta(10.0, 3.0), doctest::Contains("log domain"), Error);
    CHECK(laplacian_delta(0.0, 1000.0) == doctest::Approx(-std::log(0.998)).epsilon(1e-12));
}

TEST_CASE("estimate_w_max takes the top magnitudes") {
    // n=16, N_w=2 -> top ceil(16/4)=4 magnitudes
    std::vector<double> s{0.1, -0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
                          0.9, 1.0,  1.1, 1.2, 1.3, 1.4, -1.5, 1.6};
    CHECK(estimate_w_max(s, 2) == doctest::Approx((1.3 + 1.4 + 1.5 + 1.6) / 4.0));
}

// ---------------------------------------------------------------------------

TEST_CASE("triangle_profile analytic example") {
    TriangleProfile p = triangle_profile(3, 100);
    REQUIRE(p.counts.size() == 3);
    CHECK(p.counts[0] == 32);
    CHECK(p.counts[1] == 36);
    CHECK(p.counts[2] == 32);
}

TEST_CASE("triangle_profile single bucket and validation") {
    TriangleProfile p = triangle_profile(1, 77);
    CHECK(p.counts == std::vector<int64_t>{77});
    CHECK_THROWS_WITH_AS(triangle_profile(4, 100), doctest::Contains("odd"), Error);
    CHECK_THROWS_AS(triangle_profile(5, 3), Error);
}

TEST_CASE("triangle_profile symmetry, area, unimodality across sizes") {
    std::vector<int64_t> nets;
    for (int n_w = 1; n_w <= 301; n_w += 30) {
        for (int64_t n_net : {static_cast<int64_t>(n_w), static_cast<int64_t>(n_w) + 1,
                              3l * n_w + 7, 97l * n_w + 13, int64_t{1000000}}) {
            if (n_net < n_w) continue;
            int odd = n_w % 2 == 1 ? n_w : n_w + 1;
            TriangleProfile p = triangle_profile(odd, n_net);
            int64_t sum = 0;
            for (auto c : p.counts) sum += c;
            CHECK(sum == n_net);
            for (size_t i = 0; i < p.counts.size(); ++i)
                CHECK(p.counts[i] == p.counts[p.counts.size() - 1 - i]);
            for (size_t i = p.counts.size() / 2; i + 1 < p.counts.size(); ++i)
                CHECK(p.counts[i] >= p.counts[i + 1]);
        }
        nets.push_back(n_w);
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("modelfree_init bucket centers") {
    std::vector<double> vals{-2.0, -1.0, 0.0, 1.0, 2.0};
    Codebook cb = modelfree_init(vals, 3, CenterMode::l2_mean);
    REQUIRE(cb.counts == std::vector<int64_t>{1, 3, 1});
    CHECK(cb.levels[0] == doctest::Approx(-2.0));
    CHECK(cb.levels[1] == doctest::Approx(0.0));
    CHECK(cb.levels[2] == doctest::Approx(2.0));
}

TEST_CASE("modelfree_init all-equal values and mode difference") {
    std::vector<double> same(9, 4.25);
    Codebook cb = modelfree_init(same, 3);
    for (double l : cb.levels) CHECK(l == doctest::Approx(4.25));

    // mean vs median inside one bucket
    std::vector<double> vals{0.0, 0.0, 10.0};
    Codebook mean_cb = modelfree_init(vals, 1, CenterMode::l2_mean);
    Codebook med_cb = modelfree_init(vals, 1, CenterMode::l1_median);
    CHECK(mean_cb.levels[0] == doctest::Approx(10.0 / 3.0));
    CHECK(med_cb.levels[0] == doctest::Approx(0.0));
}

TEST_CASE("modelfree_init rejects undersized layers") {
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_WITH_AS(modelfree_init(two, 3), doctest::Contains("fewer"), Error);
}

TEST_CASE("modelfree_requantize rank-scatter semantics") {
    std::vector<double> vals{-2.0, -1.0, 0.0, 1.0, 2.0};
    Codebook cb = modelfree_init(vals, 3);

    // fixed point: already-quantized input is unchanged
    std::vector<double> q = modelfree_requantize(vals, cb);
    std::vector<double> q2 = modelfree_requantize(q, cb);
    CHECK(q == q2);

    // rank mapping, not nearest
    Codebook two;
    two.scheme = Scheme::model_free;
    two.levels = {-1.0, 1.0};
    two.counts = {1, 1};
    std::vector<double> flip{5.0, -5.0};
    std::vector<double> out = modelfree_requantize(flip, two);
    CHECK(out == std::vector<double>{1.0, -1.0});

    // permuting the input permutes the output identically
    std::vector<double> in1{0.3, -0.7, 2.0, 1.1, -0.2};
    Codebook cb5 = modelfree_init(in1, 5);
    std::vector<double> perm{2.0, 0.3, -0.2, -0.7, 1.1};
    auto o1 = modelfree_requantize(in1, cb5);
    auto op = modelfree_requantize(perm, cb5);
    CHECK(o1[2] == op[0]);
    CHECK(o1[0] == op[1]);
    CHECK(o1[4] == op[2]);

    // multiset preserved
    std::multiset<double> m1(o1.begin(), o1.end()), mp(op.begin(), op.end());
    CHECK(m1 == mp);

    CHECK_THROWS_AS(modelfree_requantize(flip, cb5), Error);
}

// ---------------------------------------------------------------------------

TEST_CASE("octave_codebook direct evaluation") {
    Codebook cb = octave_codebook(1, 2, 1.0);
    REQUIRE(cb.levels.size() == 5);
    CHECK(cb.levels[0] == doctest::Approx(-0.5));
    CHECK(cb.levels[1] == doctest::Approx(-0.25));
    CHECK(cb.levels[2] == 0.0);
    CHECK(cb.levels[3] == doctest::Approx(0.25));
    CHECK(cb.levels[4] == doctest::Approx(0.5));
}

TEST_CASE("octave_codebook sizes match 2 N_q N_o + 1") {
    CHECK(octave_codebook(16, 15, 1.0).levels.size() == 481);
    CHECK(octave_codebook(8, 15, 1.0).levels.size() == 241);
    CHECK(octave_codebook(3, 4, 2.5).levels.size() == 25);
}

TEST_CASE("octave_codebook contains 1.0 iff K_max >= 2 and log2(K_max) <= N_o") {
    CHECK(octave_codebook(4, 3, 2.0).contains_one());  // K_max = 2
    CHECK(octave_codebook(4, 3, 3.0).contains_one());  // K_max = 4
    CHECK_FALSE(octave_codebook(4, 3, 1.0).contains_one()); // K_max = 1
    CHECK_FALSE(octave_codebook(4, 1, 3.0).contains_one()); // log2 K_max = 2 > N_o
}

TEST_CASE("octave nearest assignment equals brute force") {
    Codebook cb = octave_codebook(4, 5, 1.7);
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100000; ++i) {
        double x = u(rng);
        CHECK(cb.nearest(x) == test_support::brute_nearest_level(cb.levels, x));
    }
}

TEST_CASE("octave_components round-trips every level") {
    Codebook cb = octave_codebook(3, 4, 5.0);
    for (int i = 0; i < cb.size(); ++i) {
        OctaveParts p = octave_components(cb, i);
        if (p.sign == 0) {
            CHECK(cb.levels[static_cast<size_t>(i)] == 0.0);
            continue;
        }
        double v = p.sign * cb.k_max * std::exp2(-(p.octave + static_cast<double>(p.index) / cb.n_q));
        CHECK(v == doctest::Approx(cb.levels[static_cast<size_t>(i)]).epsilon(1e-12));
        CHECK(p.index >= 1);
        CHECK(p.index <= cb.n_q);
        CHECK(p.octave >= 0);
        CHECK(p.octave < cb.n_o);
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("uniform activation levels") {
    Codebook tanh32 = uniform_linear_activations(32, Activation::tanh_fn);
    CHECK(tanh32.levels[1] - tanh32.levels[0] == doctest::Approx(2.0 / 31.0));
    CHECK(tanh32.levels.front() == -1.0);
    CHECK(tanh32.levels.back() == 1.0);

    Codebook relu2 = uniform_linear_activations(2, Activation::relu6);
    CHECK(relu2.levels == std::vector<double>{0.0, 6.0});

    Codebook relu32 = uniform_linear_activations(32, Activation::relu6);
    CHECK(relu32.levels[1] == doctest::Approx(6.0 / 31.0));
    CHECK(relu32.levels.back() == 6.0);

    CHECK_THROWS_AS(uniform_linear_activations(32, Activation::none), Error);
}

TEST_CASE("octave activation levels") {
    Codebook a = octave_activations(32, 3, Activation::relu6);
    CHECK(a.levels.size() == 97); // 96 log-spaced plus zero
    CHECK(a.levels[0] == 0.0);
    CHECK(a.k_max == 8.0); // next power of two above 6

    Codebook b = octave_activations(64, 5, Activation::relu6);
    CHECK(b.levels.size() == 321);

    // strictly decreasing from the top by a factor 2^(-1/N_q)
    double ratio = std::exp2(-1.0 / 64.0);
    for (size_t i = b.levels.size() - 1; i > 2; --i)
        CHECK(b.levels[i - 1] / b.levels[i] == doctest::Approx(ratio).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(octave_activations(32, 3, Activation::tanh_fn),
                         doctest::Contains("non-negative"), Error);
}

// ---------------------------------------------------------------------------

TEST_CASE("force_one policies") {
    std::vector<double> ins{0.0, 10.0};
    force_one_insert(ins);
    CHECK(ins == std::vector<double>{0.0, 1.0, 10.0});
    force_one_insert(ins); // idempotent
    CHECK(ins.size() == 3);

    std::vector<double> rep{0.0, 0.9, 10.0};
    force_one_replace_nearest(rep);
    CHECK(rep == std::vector<double>{0.0, 1.0, 10.0});
    force_one_replace_nearest(rep);
    CHECK(rep == std::vector<double>{0.0, 1.0, 10.0});
}
