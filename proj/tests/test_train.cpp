#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lutnn/datasets.hpp"
#include "lutnn/train.hpp"
#include "support/tempdir.hpp"

using namespace lutnn;

TEST_CASE("two moons and blobs generators are deterministic and labeled") {
    Dataset a = make_two_moons(200, 0.1, 5);
    Dataset b = make_two_moons(200, 0.1, 5);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.n_classes == 2);

    Dataset c = make_blobs(90, 3, 0.2, 7);
    CHECK(c.n_classes == 3);
    std::set<int> labels(c.y.begin(), c.y.end());
    CHECK(labels.size() == 3);
}

TEST_CASE("IDX round trip") {
    Dataset d = make_blobs(12, 2, 0.1, 3);
    // fake 1x2 "images" from the 2-d points, scaled into [0,1]
    Dataset img = d;
    for (auto& v : img.x) v = std::clamp((v + 3.0f) / 6.0f, 0.0f, 1.0f);
    test_support::TempDir dir("idx");
    save_idx(img, 1, 2, dir.path() / "im.idx", dir.path() / "lb.idx");
    Dataset r = load_idx(dir.path() / "im.idx", dir.path() / "lb.idx");
    CHECK(r.size() == img.size());
    CHECK(r.feature_dim == 2);
    CHECK(r.y == img.y);
    for (size_t i = 0; i < r.x.size(); ++i)
        CHECK(std::abs(r.x[i] - img.x[i]) <= 0.5 / 255.0 + 1e-6);

    CHECK_THROWS_AS(load_idx(dir.path() / "lb.idx", dir.path() / "lb.idx"), Error);
}

TEST_CASE("ste_activation forward snaps, backward follows the continuous slope") {
    Codebook acts = uniform_linear_activations(2, Activation::relu6); // {0, 6}
    SteResult r = ste_activation(2.9, Activation::relu6, acts);
    CHECK(r.forward == 0.0);
    CHECK(r.backward == 1.0);

    SteResult dead = ste_activation(-1.0, Activation::relu6, acts);
    CHECK(dead.forward == 0.0);
    CHECK(dead.backward == 0.0);

    // backward matches central differences of the continuous activation
    Codebook t32 = uniform_linear_activations(32, Activation::tanh_fn);
    for (double x : {-1.7, -0.3, 0.0, 0.9, 2.4}) {
        double eps = 1e-5;
        double fd = (apply_activation(Activation::tanh_fn, x + eps) -
                     apply_activation(Activation::tanh_fn, x - eps)) /
                    (2 * eps);
        CHECK(ste_activation(x, Activation::tanh_fn, t32).backward ==
              doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("gradient check: analytic backprop vs central differences") {
    Dataset d = make_two_moons(24, 0.1, 11);
    ToyNet net = ToyNet::mlp(2, {5}, 2, Activation::tanh_fn, 17);
    std::vector<size_t> batch{0, 1, 2, 3, 4, 5, 6, 7};
    CHECK(gradient_check(net, d, batch) < 1e-4);

    ToyNet relu_net = ToyNet::mlp(2, {6, 4}, 2, Activation::relu6, 23);
    CHECK(gradient_check(relu_net, d, batch) < 1e-4);
}

TEST_CASE("gradient check on a small conv net") {
    // 2x(4x4) images from noise; conv 3x3 + dense head
    Dataset d;
    d.feature_dim = 16;
    d.n_classes = 2;
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int i = 0; i < 8; ++i) {
        for (int p = 0; p < 16; ++p) d.x.push_back(u(rng));
        d.y.push_back(i % 2);
    }
    ToyNet net = ToyNet::small_conv(1, 4, 4, 2, 2, 31);
    std::vector<size_t> batch{0, 1, 2, 3};
    CHECK(gradient_check(net, d, batch) < 1e-4);
}

TEST_CASE("requantize_event snaps to levels and caps distinct values") {
    TrainConfig cfg;
    cfg.method = WeightMethod::octave;
    cfg.n_q = 4;
    cfg.n_o = 3;
    ToyNet net = ToyNet::mlp(2, {8}, 2, Activation::tanh_fn, 37);
    QuantState st = make_quant_state(cfg);
    requantize_event(net, st);
    size_t n_w = static_cast<size_t>(2 * cfg.n_q * cfg.n_o + 1);
    CHECK(net.distinct_param_count() <= n_w);
    REQUIRE(st.shared.has_value());
    // every parameter sits on a level
    for (double p : net.params())
        CHECK(std::binary_search(st.shared->levels.begin(), st.shared->levels.end(), p));
    // snapping again is a fixed point
    std::vector<double> before = net.params();
    requantize_event(net, st);
    CHECK(net.params() == before);
}

TEST_CASE("requantize_event nearest snap on a simple codebook") {
    ToyNet net = ToyNet::mlp(1, {}, 2, Activation::tanh_fn, 1);
    net.layers[0].w = {0.1, 0.9};
    net.layers[0].b = {0.0, 0.0};
    QuantState st;
    st.method = WeightMethod::octave;
    Codebook cb;
    cb.scheme = Scheme::octave;
    cb.levels = {0.0, 1.0};
    st.shared = cb;
    st.frozen = true;
    requantize_event(net, st);
    CHECK(net.layers[0].w == std::vector<double>{0.0, 1.0});
}

TEST_CASE("model-free requantize preserves the frozen occupancy multiset") {
    TrainConfig cfg;
    cfg.method = WeightMethod::model_free;
    cfg.n_w = 5;
    ToyNet net = ToyNet::mlp(3, {7}, 3, Activation::tanh_fn, 41);
    QuantState st = make_quant_state(cfg);
    requantize_event(net, st);
    REQUIRE(st.per_layer.size() == net.layers.size());

    auto multiset_of = [&](size_t li) {
        std::multiset<double> s(net.layers[li].w.begin(), net.layers[li].w.end());
        s.insert(net.layers[li].b.begin(), net.layers[li].b.end());
        return s;
    };
    std::vector<std::multiset<double>> frozen;
    for (size_t li = 0; li < net.layers.size(); ++li) frozen.push_back(multiset_of(li));

    // perturb and re-snap: multiset identical
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& l : net.layers) {
        for (auto& w : l.w) w += u(rng);
        for (auto& b : l.b) b += u(rng);
    }
    requantize_event(net, st);
    for (size_t li = 0; li < net.layers.size(); ++li) CHECK(multiset_of(li) == frozen[li]);
    CHECK(net.distinct_param_count() <= static_cast<size_t>(cfg.n_w) * net.layers.size());
}

TEST_CASE("training is reproducible and the no-quantization run matches the float trainer") {
    Dataset all = make_two_moons(300, 0.15, 51);
    Dataset tr, val;
    split_dataset(all, 0.25, 5, &tr, &val);

    TrainConfig cfg;
    cfg.method = WeightMethod::none;
    cfg.ste = false;
    cfg.epochs = 3;
    cfg.seed = 9;
    ToyNet init = ToyNet::mlp(2, {8}, 2, Activation::tanh_fn, cfg.seed);

    TrainResult a = train(cfg, init, tr, val);
    TrainResult b = train(cfg, init, tr, val);
    CHECK(a.net.params() == b.net.params()); // bit-identical

    // S=1 keeps parameters on codebook levels after every step
    TrainConfig q = cfg;
    q.method = WeightMethod::octave;
    q.ste = true;
    q.s_period = 1;
    q.epochs = 1;
    q.n_q = 4;
    q.n_o = 4;
    q.n_a = 16;
    TrainResult qr = train(q, init, tr, val);
    REQUIRE(qr.quant.shared.has_value());
    for (double p : qr.net.params())
        CHECK(std::binary_search(qr.quant.shared->levels.begin(), qr.quant.shared->levels.end(), p));
}

TEST_CASE("quantized two-moons training stays close to the float baseline") {
    Dataset all = make_two_moons(600, 0.15, 77);
    Dataset tr, val;
    split_dataset(all, 0.25, 3, &tr, &val);

    TrainConfig base;
    base.method = WeightMethod::none;
    base.ste = false;
    base.warmup_epochs = 15;
    base.epochs = 15;
    base.lr = 0.08;
    base.seed = 13;
    base.hidden = {16};
    ToyNet init = ToyNet::mlp(2, base.hidden, 2, Activation::tanh_fn, base.seed);
    TrainResult fb = train(base, init, tr, val);
    double float_acc = fb.log.back().val_acc;

    TrainConfig q = base;
    q.method = WeightMethod::octave;
    q.ste = true;
    q.s_period = 100;
    q.n_q = 8;
    q.n_o = 4;
    q.n_a = 16;
    TrainResult qr = train(q, init, tr, val);
    Codebook acb = uniform_linear_activations(q.n_a, q.hidden_act);
    double q_acc = accuracy(qr.net, val, &acb);
    // the saved quantized model is fully snapped
    CHECK(qr.net.distinct_param_count() <= static_cast<size_t>(2 * q.n_q * q.n_o + 1));
    CHECK(q_acc >= float_acc - 0.03);
}

TEST_CASE("divergent training aborts naming the step") {
    Dataset all = make_two_moons(64, 0.1, 5);
    Dataset tr, val;
    split_dataset(all, 0.2, 1, &tr, &val);
    TrainConfig cfg;
    cfg.method = WeightMethod::none;
    cfg.ste = false;
    cfg.epochs = 4;
    ToyNet init = ToyNet::mlp(2, {8}, 2, Activation::tanh_fn, 3);
    init.layers[0].w[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train(cfg, init, tr, val), doctest::Contains("step"), Error);
}
