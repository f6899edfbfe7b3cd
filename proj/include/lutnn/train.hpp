#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lutnn/codebook.hpp"
#include "lutnn/datasets.hpp"
#include "lutnn/model.hpp"

namespace lutnn {

enum class WeightMethod { none, kmeans, laplacian, model_free, octave };

const char* weight_method_name(WeightMethod m);
WeightMethod weight_method_from_name(const std::string& name);

struct TrainConfig {
    WeightMethod method = WeightMethod::octave;
    bool ste = true;      // quantize activations in the forward pass
    int s_period = 100;   // requantization period, in optimizer steps
    int n_w = 65;         // level count for kmeans / laplacian / model-free
    int n_q = 8, n_o = 4; // octave weight parameters
    int n_a = 16;         // activation level count
    double lr = 0.05;
    double momentum = 0.9;
    int batch = 32;
    // Continuous phase first (no STE, no requantization), then the
    // quantized fine-tune; frozen-center methods measure their scale from
    // the converged continuous weights.
    int warmup_epochs = 0;
    int epochs = 40;
    uint64_t seed = 1;
    std::vector<int> hidden = {32};
    Activation hidden_act = Activation::tanh_fn;
    CenterMode mf_mode = CenterMode::l2_mean;
};

// Straight-through estimator: the forward value is the nearest activation
// level of the continuous nonlinearity; the backward multiplier is the
// continuous derivative.
struct SteResult {
    double forward = 0.0;
    double backward = 0.0;
};
SteResult ste_activation(double x, Activation act, const Codebook& act_cb);

// ---------------------------------------------------------------------------
// Toy double-precision network with manual backprop.

struct ToyLayer {
    LayerKind kind = LayerKind::dense;
    Activation act = Activation::none;
    int in_n = 0, out_n = 0;
    // conv geometry
    int in_c = 0, in_h = 0, in_w = 0, out_c = 0, kh = 0, kw = 0, stride = 1, pad = 0;
    std::vector<double> w, b;
    std::vector<double> vw, vb; // momentum buffers
};

struct ToyNet {
    std::vector<int> input_shape;
    std::vector<ToyLayer> layers;

    static ToyNet mlp(int in_dim, const std::vector<int>& hidden, int classes,
                      Activation hidden_act, uint64_t seed);
    // conv(In->C1 3x3) . relu6 . dense(classes); for small image tasks
    static ToyNet small_conv(int in_c, int in_h, int in_w, int conv_channels, int classes,
                             uint64_t seed);

    std::vector<double> params() const;
    void set_params(const std::vector<double>& p);
    size_t param_count() const;
    size_t distinct_param_count() const;
    FloatModel to_float_model() const;
};

// Forward pass caching everything backprop needs.
struct ForwardCache {
    std::vector<std::vector<double>> inputs; // per layer
    std::vector<std::vector<double>> preact; // per layer
    std::vector<double> logits;
};

// act_cb: activation codebook for STE quantization (nullptr = continuous).
std::vector<double> toy_forward(const ToyNet& net, const double* x, const Codebook* act_cb,
                                ForwardCache* cache = nullptr);

// Softmax cross-entropy loss + full backward pass; returns the batch loss
// and accumulates gradients (scaled by 1/batch) into gw/gb.
double toy_backward_batch(ToyNet& net, const Dataset& data, const std::vector<size_t>& batch,
                          const Codebook* act_cb, std::vector<std::vector<double>>* gw,
                          std::vector<std::vector<double>>* gb);

// Max relative error between analytic gradients and central finite
// differences on the given batch (continuous path).
double gradient_check(ToyNet net, const Dataset& data, const std::vector<size_t>& batch,
                      double eps = 1e-5);

// ---------------------------------------------------------------------------
// Periodic requantization

struct QuantState {
    WeightMethod method = WeightMethod::none;
    // kmeans / laplacian / octave: one shared codebook; model-free: one per layer.
    std::optional<Codebook> shared;
    std::vector<Codebook> per_layer;
    bool frozen = false; // model-free and octave freeze after the first pass
    int n_w = 0, n_q = 0, n_o = 0;
    CenterMode mf_mode = CenterMode::l2_mean;
    uint64_t seed = 0;
    int events = 0;
};

QuantState make_quant_state(const TrainConfig& cfg);

// Replace every weight and bias with its assigned level: nearest-level for
// kmeans/laplacian/octave, rank-scatter for model-free. After the call the
// net holds at most N_w distinct parameter values.
void requantize_event(ToyNet& net, QuantState& state);

// ---------------------------------------------------------------------------

struct EpochLog {
    int epoch = 0;
    int step = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    size_t distinct_params = 0;
};

struct TrainResult {
    ToyNet net;              // final (quantized when the method is active)
    QuantState quant;
    std::vector<EpochLog> log;
    // Distinct parameter-value count observed right after each
    // requantization event.
    std::vector<size_t> event_distinct;
};

// Mini-batch SGD with momentum; STE activations and a requantize_event
// every cfg.s_period steps when a weight method is active, plus one final
// event so the saved model is fully quantized. Deterministic given
// (seed, config). Fails on divergence (non-finite loss) naming the step.
TrainResult train(const TrainConfig& cfg, ToyNet net, const Dataset& train_set,
                  const Dataset& val_set);

double accuracy(const ToyNet& net, const Dataset& data, const Codebook* act_cb);

} // namespace lutnn
