#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lutnn/common.hpp"

namespace lutnn {

// Dense float tensor, row-major.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {}

    static Tensor zeros(std::vector<int> shape);
    size_t size() const { return data.size(); }
    static size_t shape_size(const std::vector<int>& shape);
};

enum class Activation { relu6, tanh_fn, none };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);
double apply_activation(Activation a, double x);
// Derivative of the continuous activation (used by the training backward pass).
double activation_grad(Activation a, double x);
// Output range of a bounded activation; fails for `none`.
void activation_range(Activation a, double* lo, double* hi);

// Per-channel normalization parameters: y = (gamma/sigma) x + beta - (gamma/sigma) m,
// sigma = sqrt(var + epsilon).
struct NormParams {
    std::vector<float> gamma, beta, mean, var;
    float epsilon = 1e-3f;

    size_t channels() const { return gamma.size(); }
    // gamma/sigma for one channel; fails if var + epsilon <= 0.
    double scale(size_t c) const;
    double offset(size_t c) const; // beta - scale * mean
};

enum class LayerKind { dense, conv2d };

// One weight layer. Dense weights are [out, in]; conv weights are
// [out_c, in_c, kh, kw] with explicit input geometry. A fully-connected
// layer is exactly a 1x1 conv on a [C,1,1] input.
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    Activation activation = Activation::relu6;
    Tensor weights;
    std::optional<Tensor> bias;   // absent until folding creates one
    std::optional<NormParams> norm; // applied to the linear output, before activation
    // conv2d geometry
    int in_h = 0, in_w = 0, stride = 1, pad = 0;

    int out_channels() const { return weights.shape.at(0); }
    int in_count() const;   // flattened input element count
    int out_count() const;  // flattened output element count
    int out_h() const;
    int out_w() const;
    size_t param_count() const { return weights.size() + (bias ? bias->size() : 0); }

    static LayerSpec dense(Tensor w, std::optional<Tensor> b, Activation act);
};

struct FloatModel {
    std::vector<int> input_shape;
    std::vector<LayerSpec> layers;

    int input_size() const { return static_cast<int>(Tensor::shape_size(input_shape)); }
    // Total weight + bias element count across all layers.
    size_t param_count() const;
    bool has_norm() const;
    // Shape compatibility, finiteness, bounded activations on hidden layers.
    void validate() const;
};

// Reference forward pass in real arithmetic. Applies each layer's linear
// map, explicit normalization when present, then the activation. Returns
// pre-softmax logits. Thread-safe on a shared immutable model.
std::vector<float> forward_float(const FloatModel& model, std::span<const float> input);

// Checkpoint directory: model.json manifest plus one little-endian
// float32 blob per tensor.
void save_float_model(const FloatModel& model, const std::filesystem::path& dir);
FloatModel load_float_model(const std::filesystem::path& dir);

// Raw little-endian float32 blob I/O (also used for inference input files).
void write_f32_blob(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_blob(const std::filesystem::path& path);

} // namespace lutnn
