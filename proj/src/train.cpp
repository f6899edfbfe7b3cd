#include "lutnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace lutnn {

const char* weight_method_name(WeightMethod m) {
    switch (m) {
        case WeightMethod::none: return "none";
        case WeightMethod::kmeans: return "kmeans";
        case WeightMethod::laplacian: return "laplacian";
        case WeightMethod::model_free: return "modelfree";
        case WeightMethod::octave: return "octave";
    }
    return "?";
}

WeightMethod weight_method_from_name(const std::string& name) {
    if (name == "none") return WeightMethod::none;
    if (name == "kmeans") return WeightMethod::kmeans;
    if (name == "laplacian") return WeightMethod::laplacian;
    if (name == "modelfree") return WeightMethod::model_free;
    if (name == "octave") return WeightMethod::octave;
    fail("unknown weight method '", name, "'");
}

SteResult ste_activation(double x, Activation act, const Codebook& act_cb) {
    SteResult r;
    r.forward = act_cb.quantize(apply_activation(act, x));
    r.backward = activation_grad(act, x);
    return r;
}

// ---------------------------------------------------------------------------
// Network construction

namespace {

double xavier_limit(int fan_in, int fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); }

void init_layer(ToyLayer& l, uint64_t seed) {
    std::mt19937_64 rng(seed);
    int fan_in = l.kind == LayerKind::dense ? l.in_n : l.in_c * l.kh * l.kw;
    int fan_out = l.kind == LayerKind::dense ? l.out_n : l.out_c * l.kh * l.kw;
    std::uniform_real_distribution<double> u(-xavier_limit(fan_in, fan_out),
                                             xavier_limit(fan_in, fan_out));
    for (double& w : l.w) w = u(rng);
    for (double& b : l.b) b = 0.0;
}

} // namespace

ToyNet ToyNet::mlp(int in_dim, const std::vector<int>& hidden, int classes, Activation hidden_act,
                   uint64_t seed) {
    require(hidden_act == Activation::relu6 || hidden_act == Activation::tanh_fn,
            "mlp: hidden activation must be bounded");
    ToyNet net;
    net.input_shape = {in_dim};
    int prev = in_dim;
    std::vector<int> dims = hidden;
    dims.push_back(classes);
    for (size_t i = 0; i < dims.size(); ++i) {
        ToyLayer l;
        l.kind = LayerKind::dense;
        l.act = (i + 1 == dims.size()) ? Activation::none : hidden_act;
        l.in_n = prev;
        l.out_n = dims[i];
        l.w.assign(static_cast<size_t>(l.out_n) * l.in_n, 0.0);
        l.b.assign(static_cast<size_t>(l.out_n), 0.0);
        l.vw.assign(l.w.size(), 0.0);
        l.vb.assign(l.b.size(), 0.0);
        init_layer(l, seed + 101 * i + 7);
        net.layers.push_back(std::move(l));
        prev = dims[i];
    }
    return net;
}

ToyNet ToyNet::small_conv(int in_c, int in_h, int in_w, int conv_channels, int classes,
                          uint64_t seed) {
    ToyNet net;
    net.input_shape = {in_c, in_h, in_w};
    ToyLayer c;
    c.kind = LayerKind::conv2d;
    c.act = Activation::relu6;
    c.in_c = in_c;
    c.in_h = in_h;
    c.in_w = in_w;
    c.out_c = conv_channels;
    c.kh = 3;
    c.kw = 3;
    c.stride = 1;
    c.pad = 1;
    c.in_n = in_c * in_h * in_w;
    c.out_n = conv_channels * in_h * in_w;
    c.w.assign(static_cast<size_t>(conv_channels) * in_c * 9, 0.0);
    c.b.assign(static_cast<size_t>(conv_channels), 0.0);
    c.vw.assign(c.w.size(), 0.0);
    c.vb.assign(c.b.size(), 0.0);
    init_layer(c, seed + 3);
    net.layers.push_back(std::move(c));

    ToyLayer d;
    d.kind = LayerKind::dense;
    d.act = Activation::none;
    d.in_n = conv_channels * in_h * in_w;
    d.out_n = classes;
    d.w.assign(static_cast<size_t>(d.out_n) * d.in_n, 0.0);
    d.b.assign(static_cast<size_t>(d.out_n), 0.0);
    d.vw.assign(d.w.size(), 0.0);
    d.vb.assign(d.b.size(), 0.0);
    init_layer(d, seed + 11);
    net.layers.push_back(std::move(d));
    return net;
}

std::vector<double> ToyNet::params() const {
    std::vector<double> p;
    p.reserve(param_count());
    for (const auto& l : layers) {
        p.insert(p.end(), l.w.begin(), l.w.end());
        p.insert(p.end(), l.b.begin(), l.b.end());
    }
    return p;
}

void ToyNet::set_params(const std::vector<double>& p) {
    require(p.size() == param_count(), "set_params: size mismatch");
    size_t k = 0;
    for (auto& l : layers) {
        for (double& w : l.w) w = p[k++];
        for (double& b : l.b) b = p[k++];
    }
}

size_t ToyNet::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

size_t ToyNet::distinct_param_count() const {
    std::set<double> vals;
    for (const auto& l : layers) {
        vals.insert(l.w.begin(), l.w.end());
        vals.insert(l.b.begin(), l.b.end());
    }
    return vals.size();
}

FloatModel ToyNet::to_float_model() const {
    FloatModel m;
    m.input_shape = input_shape;
    for (const auto& l : layers) {
        LayerSpec s;
        s.kind = l.kind;
        s.activation = l.act;
        if (l.kind == LayerKind::dense) {
            s.weights = Tensor({l.out_n, l.in_n}, std::vector<float>(l.w.begin(), l.w.end()));
        } else {
            s.weights =
                Tensor({l.out_c, l.in_c, l.kh, l.kw}, std::vector<float>(l.w.begin(), l.w.end()));
            s.in_h = l.in_h;
            s.in_w = l.in_w;
            s.stride = l.stride;
            s.pad = l.pad;
        }
        s.bias = Tensor({static_cast<int>(l.b.size())}, std::vector<float>(l.b.begin(), l.b.end()));
        m.layers.push_back(std::move(s));
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

void toy_linear(const ToyLayer& l, const std::vector<double>& in, std::vector<double>& out) {
    if (l.kind == LayerKind::dense) {
        out.assign(static_cast<size_t>(l.out_n), 0.0);
        for (int o = 0; o < l.out_n; ++o) {
            double a = l.b[static_cast<size_t>(o)];
            const double* row = l.w.data() + static_cast<size_t>(o) * l.in_n;
            for (int i = 0; i < l.in_n; ++i) a += row[i] * in[static_cast<size_t>(i)];
            out[static_cast<size_t>(o)] = a;
        }
        return;
    }
    int oh = (l.in_h + 2 * l.pad - l.kh) / l.stride + 1;
    int ow = (l.in_w + 2 * l.pad - l.kw) / l.stride + 1;
    out.assign(static_cast<size_t>(l.out_c) * oh * ow, 0.0);
    for (int o = 0; o < l.out_c; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double a = l.b[static_cast<size_t>(o)];
                for (int c = 0; c < l.in_c; ++c)
                    for (int ky = 0; ky < l.kh; ++ky) {
                        int iy = y * l.stride + ky - l.pad;
                        if (iy < 0 || iy >= l.in_h) continue;
                        for (int kx = 0; kx < l.kw; ++kx) {
                            int ix = x * l.stride + kx - l.pad;
                            if (ix < 0 || ix >= l.in_w) continue;
                            a += l.w[((static_cast<size_t>(o) * l.in_c + c) * l.kh + ky) * l.kw + kx] *
                                 in[(static_cast<size_t>(c) * l.in_h + iy) * l.in_w + ix];
                        }
                    }
                out[(static_cast<size_t>(o) * oh + y) * ow + x] = a;
            }
}

} // namespace

std::vector<double> toy_forward(const ToyNet& net, const double* x, const Codebook* act_cb,
                                ForwardCache* cache) {
    std::vector<double> cur(x, x + Tensor::shape_size(net.input_shape));
    std::vector<double> pre;
    for (size_t li = 0; li < net.layers.size(); ++li) {
        const ToyLayer& l = net.layers[li];
        if (cache) cache->inputs.push_back(cur);
        toy_linear(l, cur, pre);
        if (cache) cache->preact.push_back(pre);
        cur.resize(pre.size());
        if (l.act == Activation::none) {
            cur = pre;
        } else if (act_cb) {
            for (size_t i = 0; i < pre.size(); ++i)
                cur[i] = ste_activation(pre[i], l.act, *act_cb).forward;
        } else {
            for (size_t i = 0; i < pre.size(); ++i) cur[i] = apply_activation(l.act, pre[i]);
        }
    }
    if (cache) cache->logits = cur;
    return cur;
}

namespace {

// Softmax cross-entropy; fills dlogits with (softmax - onehot).
double softmax_xent(const std::vector<double>& logits, int label, std::vector<double>& dlogits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    double logz = std::log(z) + mx;
    dlogits.resize(logits.size());
    for (size_t i = 0; i < logits.size(); ++i)
        dlogits[i] = std::exp(logits[i] - logz) -
                     (static_cast<int>(i) == label ? 1.0 : 0.0);
    return logz - logits[static_cast<size_t>(label)];
}

void toy_backward_layer(const ToyLayer& l, const std::vector<double>& in,
                        const std::vector<double>& delta, std::vector<double>& gw,
                        std::vector<double>& gb, std::vector<double>& din) {
    if (l.kind == LayerKind::dense) {
        din.assign(static_cast<size_t>(l.in_n), 0.0);
        for (int o = 0; o < l.out_n; ++o) {
            double d = delta[static_cast<size_t>(o)];
            gb[static_cast<size_t>(o)] += d;
            const double* row = l.w.data() + static_cast<size_t>(o) * l.in_n;
            double* grow = gw.data() + static_cast<size_t>(o) * l.in_n;
            for (int i = 0; i < l.in_n; ++i) {
                grow[i] += d * in[static_cast<size_t>(i)];
                din[static_cast<size_t>(i)] += d * row[i];
            }
        }
        return;
    }
    int oh = (l.in_h + 2 * l.pad - l.kh) / l.stride + 1;
    int ow = (l.in_w + 2 * l.pad - l.kw) / l.stride + 1;
    din.assign(static_cast<size_t>(l.in_c) * l.in_h * l.in_w, 0.0);
    for (int o = 0; o < l.out_c; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double d = delta[(static_cast<size_t>(o) * oh + y) * ow + x];
                if (d == 0.0) continue;
                gb[static_cast<size_t>(o)] += d;
                for (int c = 0; c < l.in_c; ++c)
                    for (int ky = 0; ky < l.kh; ++ky) {
                        int iy = y * l.stride + ky - l.pad;
                        if (iy < 0 || iy >= l.in_h) continue;
                        for (int kx = 0; kx < l.kw; ++kx) {
                            int ix = x * l.stride + kx - l.pad;
                            if (ix < 0 || ix >= l.in_w) continue;
                            size_t wi = ((static_cast<size_t>(o) * l.in_c + c) * l.kh + ky) * l.kw + kx;
                            size_t ii = (static_cast<size_t>(c) * l.in_h + iy) * l.in_w + ix;
                            gw[wi] += d * in[ii];
                            din[ii] += d * l.w[wi];
                        }
                    }
            }
}

} // namespace

double toy_backward_batch(ToyNet& net, const Dataset& data, const std::vector<size_t>& batch,
                          const Codebook* act_cb, std::vector<std::vector<double>>* gw,
                          std::vector<std::vector<double>>* gb) {
    gw->assign(net.layers.size(), {});
    gb->assign(net.layers.size(), {});
    for (size_t li = 0; li < net.layers.size(); ++li) {
        (*gw)[li].assign(net.layers[li].w.size(), 0.0);
        (*gb)[li].assign(net.layers[li].b.size(), 0.0);
    }

    double loss = 0.0;
    std::vector<double> dlogits, delta, din;
    for (size_t idx : batch) {
        ForwardCache cache;
        const float* raw = data.row(idx);
        std::vector<double> x(raw, raw + data.feature_dim);
        toy_forward(net, x.data(), act_cb, &cache);
        loss += softmax_xent(cache.logits, data.y[idx], dlogits);

        delta = dlogits;
        for (size_t li = net.layers.size(); li-- > 0;) {
            const ToyLayer& l = net.layers[li];
            // delta currently holds dL/d(layer output); pull it through the
            // activation (STE uses the continuous derivative).
            if (l.act != Activation::none)
                for (size_t i = 0; i < delta.size(); ++i)
                    delta[i] *= activation_grad(l.act, cache.preact[li][i]);
            toy_backward_layer(l, cache.inputs[li], delta, (*gw)[li], (*gb)[li], din);
            delta = din;
        }
    }

    double inv = 1.0 / static_cast<double>(batch.size());
    for (size_t li = 0; li < net.layers.size(); ++li) {
        for (double& g : (*gw)[li]) g *= inv;
        for (double& g : (*gb)[li]) g *= inv;
    }
    return loss * inv;
}

double gradient_check(ToyNet net, const Dataset& data, const std::vector<size_t>& batch,
                      double eps) {
    std::vector<std::vector<double>> gw, gb;
    toy_backward_batch(net, data, batch, nullptr, &gw, &gb);

    auto batch_loss = [&](ToyNet& n) {
        double loss = 0.0;
        std::vector<double> dl;
        for (size_t idx : batch) {
            const float* raw = data.row(idx);
            std::vector<double> x(raw, raw + data.feature_dim);
            std::vector<double> logits = toy_forward(n, x.data(), nullptr);
            loss += softmax_xent(logits, data.y[idx], dl);
        }
        return loss / static_cast<double>(batch.size());
    };

    double worst = 0.0;
    for (size_t li = 0; li < net.layers.size(); ++li) {
        ToyLayer& l = net.layers[li];
        for (size_t pi = 0; pi < l.w.size() + l.b.size(); ++pi) {
            double* p = pi < l.w.size() ? &l.w[pi] : &l.b[pi - l.w.size()];
            double analytic = pi < l.w.size() ? gw[li][pi] : gb[li][pi - l.w.size()];
            double keep = *p;
            *p = keep + eps;
            double up = batch_loss(net);
            *p = keep - eps;
            double down = batch_loss(net);
            *p = keep;
            double fd = (up - down) / (2.0 * eps);
            double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
            worst = std::max(worst, std::abs(fd - analytic) / denom);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Requantization

QuantState make_quant_state(const TrainConfig& cfg) {
    QuantState st;
    st.method = cfg.method;
    st.n_w = cfg.n_w;
    st.n_q = cfg.n_q;
    st.n_o = cfg.n_o;
    st.mf_mode = cfg.mf_mode;
    st.seed = cfg.seed;
    return st;
}

namespace {

void snap_nearest(ToyNet& net, const Codebook& cb) {
    std::vector<double> cuts = cb.cuts();
    for (auto& l : net.layers) {
        for (double& w : l.w) w = cb.levels[static_cast<size_t>(nearest_by_cuts(cuts, w))];
        for (double& b : l.b) b = cb.levels[static_cast<size_t>(nearest_by_cuts(cuts, b))];
    }
}

} // namespace

void requantize_event(ToyNet& net, QuantState& state) {
    switch (state.method) {
        case WeightMethod::none:
            return;
        case WeightMethod::kmeans: {
            std::vector<double> p = net.params();
            KMeansOptions opt;
            opt.seed = state.seed + static_cast<uint64_t>(state.events) * 7919;
            state.shared = kmeans_1d(p, state.n_w, opt);
            snap_nearest(net, *state.shared);
            break;
        }
        case WeightMethod::laplacian: {
            std::vector<double> p = net.params();
            double w_max = estimate_w_max(p, state.n_w);
            require(w_max > 0.0, "requantize: all parameters are zero");
            state.shared = laplacian_centers(state.n_w, w_max);
            snap_nearest(net, *state.shared);
            break;
        }
        case WeightMethod::octave: {
            if (!state.frozen) {
                double v_max = 0.0;
                for (double p : net.params()) v_max = std::max(v_max, std::abs(p));
                require(v_max > 0.0, "requantize: all parameters are zero");
                state.shared = octave_codebook(state.n_q, state.n_o, v_max);
                state.frozen = true;
            }
            snap_nearest(net, *state.shared);
            break;
        }
        case WeightMethod::model_free: {
            if (!state.frozen) {
                state.per_layer.clear();
                for (const auto& l : net.layers) {
                    std::vector<double> p(l.w);
                    p.insert(p.end(), l.b.begin(), l.b.end());
                    state.per_layer.push_back(modelfree_init(p, state.n_w, state.mf_mode));
                }
                state.frozen = true;
            }
            for (size_t li = 0; li < net.layers.size(); ++li) {
                ToyLayer& l = net.layers[li];
                std::vector<double> p(l.w);
                p.insert(p.end(), l.b.begin(), l.b.end());
                std::vector<double> q = modelfree_requantize(p, state.per_layer[li]);
                std::copy(q.begin(), q.begin() + static_cast<ptrdiff_t>(l.w.size()), l.w.begin());
                std::copy(q.begin() + static_cast<ptrdiff_t>(l.w.size()), q.end(), l.b.begin());
            }
            break;
        }
    }
    ++state.events;
}

// ---------------------------------------------------------------------------
// Training loop

double accuracy(const ToyNet& net, const Dataset& data, const Codebook* act_cb) {
    if (data.size() == 0) return 0.0;
    size_t hits = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        const float* raw = data.row(i);
        std::vector<double> x(raw, raw + data.feature_dim);
        std::vector<double> logits = toy_forward(net, x.data(), act_cb);
        size_t arg = 0;
        for (size_t j = 1; j < logits.size(); ++j)
            if (logits[j] > logits[arg]) arg = j;
        if (static_cast<int>(arg) == data.y[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(const TrainConfig& cfg, ToyNet net, const Dataset& train_set,
                  const Dataset& val_set) {
    require(cfg.s_period >= 1, "train: S must be >= 1");
    require(cfg.batch >= 1 && cfg.epochs >= 0 && cfg.warmup_epochs >= 0,
            "train: bad batch/epoch config");

    std::optional<Codebook> act_cb;
    if (cfg.ste) act_cb = uniform_linear_activations(cfg.n_a, cfg.hidden_act);

    TrainResult result;
    result.quant = make_quant_state(cfg);

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::vector<std::vector<double>> gw, gb;
    int step = 0;

    int total_epochs = cfg.warmup_epochs + cfg.epochs;
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        bool warm = epoch < cfg.warmup_epochs;
        const Codebook* acb = (!warm && act_cb) ? &*act_cb : nullptr;
        std::mt19937_64 rng(cfg.seed + 0x5851f42d * static_cast<uint64_t>(epoch) + 1);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(cfg.batch)) {
            size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch));
            std::vector<size_t> batch(order.begin() + static_cast<ptrdiff_t>(lo),
                                      order.begin() + static_cast<ptrdiff_t>(hi));
            double loss = toy_backward_batch(net, train_set, batch, acb, &gw, &gb);
            require(std::isfinite(loss), "train: loss diverged (non-finite) at step ", step);
            epoch_loss += loss;
            ++batches;

            for (size_t li = 0; li < net.layers.size(); ++li) {
                ToyLayer& l = net.layers[li];
                for (size_t i = 0; i < l.w.size(); ++i) {
                    l.vw[i] = cfg.momentum * l.vw[i] - cfg.lr * gw[li][i];
                    l.w[i] += l.vw[i];
                }
                for (size_t i = 0; i < l.b.size(); ++i) {
                    l.vb[i] = cfg.momentum * l.vb[i] - cfg.lr * gb[li][i];
                    l.b[i] += l.vb[i];
                }
            }
            ++step;
            if (!warm && cfg.method != WeightMethod::none && step % cfg.s_period == 0) {
                requantize_event(net, result.quant);
                result.event_distinct.push_back(net.distinct_param_count());
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.step = step;
        log.train_loss = batches > 0 ? epoch_loss / batches : 0.0;
        log.train_acc = accuracy(net, train_set, acb);
        log.val_acc = accuracy(net, val_set, acb);
        log.distinct_params = net.distinct_param_count();
        result.log.push_back(log);
    }

    // The saved model must be fully quantized.
    if (cfg.method != WeightMethod::none) {
        requantize_event(net, result.quant);
        result.event_distinct.push_back(net.distinct_param_count());
    }
    result.net = std::move(net);
    return result;
}

} // namespace lutnn
