#include "lutnn/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace lutnn {

Tensor Tensor::zeros(std::vector<int> shape) {
    size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
}

size_t Tensor::shape_size(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        require(d >= 0, "tensor dimension must be non-negative, got ", d);
        n *= static_cast<size_t>(d);
    }
    return n;
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu6: return "relu6";
        case Activation::tanh_fn: return "tanh";
        case Activation::none: return "none";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu6") return Activation::relu6;
    if (name == "tanh") return Activation::tanh_fn;
    if (name == "none") return Activation::none;
    fail("unknown activation '", name, "'");
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu6: return x < 0.0 ? 0.0 : (x > 6.0 ? 6.0 : x);
        case Activation::tanh_fn: return std::tanh(x);
        case Activation::none: return x;
    }
    return x;
}

double activation_grad(Activation a, double x) {
    switch (a) {
        case Activation::relu6: return (x > 0.0 && x < 6.0) ? 1.0 : 0.0;
        case Activation::tanh_fn: {
            double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::none: return 1.0;
    }
    return 0.0;
}

void activation_range(Activation a, double* lo, double* hi) {
    switch (a) {
        case Activation::relu6: *lo = 0.0; *hi = 6.0; return;
        case Activation::tanh_fn: *lo = -1.0; *hi = 1.0; return;
        case Activation::none: fail("activation 'none' has no bounded output range");
    }
}

double NormParams::scale(size_t c) const {
    double denom = static_cast<double>(var.at(c)) + static_cast<double>(epsilon);
    require(denom > 0.0, "norm channel ", c, ": var + epsilon = ", denom, " must be positive");
    return static_cast<double>(gamma.at(c)) / std::sqrt(denom);
}

double NormParams::offset(size_t c) const {
    return static_cast<double>(beta.at(c)) - scale(c) * static_cast<double>(mean.at(c));
}

int LayerSpec::in_count() const {
    if (kind == LayerKind::dense) return weights.shape.at(1);
    return weights.shape.at(1) * in_h * in_w;
}

int LayerSpec::out_h() const {
    int kh = weights.shape.at(2);
    return (in_h + 2 * pad - kh) / stride + 1;
}

int LayerSpec::out_w() const {
    int kw = weights.shape.at(3);
    return (in_w + 2 * pad - kw) / stride + 1;
}

int LayerSpec::out_count() const {
    if (kind == LayerKind::dense) return weights.shape.at(0);
    return weights.shape.at(0) * out_h() * out_w();
}

LayerSpec LayerSpec::dense(Tensor w, std::optional<Tensor> b, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.weights = std::move(w);
    l.bias = std::move(b);
    l.activation = act;
    return l;
}

size_t FloatModel::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

bool FloatModel::has_norm() const {
    for (const auto& l : layers)
        if (l.norm) return true;
    return false;
}

namespace {

void check_finite(const Tensor& t, const std::string& what) {
    for (size_t i = 0; i < t.data.size(); ++i)
        require(std::isfinite(t.data[i]), what, ": non-finite value at flat index ", i);
}

} // namespace

void FloatModel::validate() const {
    int flow = input_size();
    for (size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& l = layers[li];
        std::string tag = "layer " + std::to_string(li);
        if (l.kind == LayerKind::dense) {
            require(l.weights.shape.size() == 2, tag, ": dense weights must be rank 2");
        } else {
            require(l.weights.shape.size() == 4, tag, ": conv weights must be rank 4");
            require(l.stride >= 1, tag, ": stride must be >= 1");
            require(l.pad >= 0, tag, ": pad must be >= 0");
            require(l.in_h >= 1 && l.in_w >= 1, tag, ": conv input geometry missing");
            require(l.out_h() >= 1 && l.out_w() >= 1, tag, ": kernel larger than padded input");
        }
        require(l.weights.size() == Tensor::shape_size(l.weights.shape),
                tag, ": weight data size does not match shape");
        require(l.in_count() == flow, tag, ": expects ", l.in_count(),
                " inputs but previous layer provides ", flow);
        check_finite(l.weights, tag + " weights");
        if (l.bias) {
            require(static_cast<int>(l.bias->size()) == l.out_channels(),
                    tag, ": bias size ", l.bias->size(), " != out channels ", l.out_channels());
            check_finite(*l.bias, tag + " bias");
        }
        if (l.norm) {
            size_t oc = static_cast<size_t>(l.out_channels());
            require(l.norm->gamma.size() == oc && l.norm->beta.size() == oc &&
                        l.norm->mean.size() == oc && l.norm->var.size() == oc,
                    tag, ": norm parameter vectors must have one entry per output channel");
            for (size_t c = 0; c < oc; ++c) (void)l.norm->scale(c);
        }
        bool final_layer = (li + 1 == layers.size());
        if (!final_layer)
            require(l.activation != Activation::none,
                    tag, ": activation 'none' is only permitted on the final layer");
        flow = l.out_count();
    }
}

namespace {

void linear_dense(const LayerSpec& l, std::span<const float> in, std::vector<double>& out) {
    int out_n = l.weights.shape[0];
    int in_n = l.weights.shape[1];
    out.assign(static_cast<size_t>(out_n), 0.0);
    const float* w = l.weights.data.data();
    for (int o = 0; o < out_n; ++o) {
        double acc = l.bias ? static_cast<double>(l.bias->data[o]) : 0.0;
        const float* row = w + static_cast<size_t>(o) * in_n;
        for (int i = 0; i < in_n; ++i) acc += static_cast<double>(row[i]) * in[i];
        out[o] = acc;
    }
}

void linear_conv(const LayerSpec& l, std::span<const float> in, std::vector<double>& out) {
    int oc = l.weights.shape[0], ic = l.weights.shape[1];
    int kh = l.weights.shape[2], kw = l.weights.shape[3];
    int oh = l.out_h(), ow = l.out_w();
    out.assign(static_cast<size_t>(oc) * oh * ow, 0.0);
    const float* w = l.weights.data.data();
    for (int o = 0; o < oc; ++o) {
        double b = l.bias ? static_cast<double>(l.bias->data[o]) : 0.0;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = b;
                for (int c = 0; c < ic; ++c) {
                    for (int ky = 0; ky < kh; ++ky) {
                        int iy = y * l.stride + ky - l.pad;
                        if (iy < 0 || iy >= l.in_h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            int ix = x * l.stride + kx - l.pad;
                            if (ix < 0 || ix >= l.in_w) continue;
                            double wv = w[((static_cast<size_t>(o) * ic + c) * kh + ky) * kw + kx];
                            acc += wv * in[(static_cast<size_t>(c) * l.in_h + iy) * l.in_w + ix];
                        }
                    }
                }
                out[(static_cast<size_t>(o) * oh + y) * ow + x] = acc;
            }
        }
    }
}

} // namespace

std::vector<float> forward_float(const FloatModel& model, std::span<const float> input) {
    require(static_cast<int>(input.size()) == model.input_size(),
            "forward: input has ", input.size(), " elements, model expects ", model.input_size());
    std::vector<float> cur(input.begin(), input.end());
    std::vector<double> lin;
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& l = model.layers[li];
        require(static_cast<int>(cur.size()) == l.in_count(),
                "forward: layer ", li, " expects ", l.in_count(), " inputs, got ", cur.size());
        if (l.kind == LayerKind::dense)
            linear_dense(l, cur, lin);
        else
            linear_conv(l, cur, lin);
        if (l.norm) {
            // channel-major output: contiguous runs per channel
            size_t per_ch = lin.size() / static_cast<size_t>(l.out_channels());
            for (int c = 0; c < l.out_channels(); ++c) {
                double s = l.norm->scale(c), off = l.norm->offset(c);
                for (size_t j = 0; j < per_ch; ++j) {
                    double& v = lin[static_cast<size_t>(c) * per_ch + j];
                    v = s * v + off;
                }
            }
        }
        cur.resize(lin.size());
        for (size_t j = 0; j < lin.size(); ++j)
            cur[j] = static_cast<float>(apply_activation(l.activation, lin[j]));
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

void write_f32_blob(const std::filesystem::path& path, std::span<const float> values) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    std::vector<unsigned char> bytes(values.size() * 4);
    for (size_t i = 0; i < values.size(); ++i) {
        uint32_t u = std::bit_cast<uint32_t>(values[i]);
        bytes[4 * i + 0] = static_cast<unsigned char>(u & 0xff);
        bytes[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        bytes[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        bytes[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(f.good(), "write failed for '", path.string(), "'");
}

std::vector<float> read_f32_blob(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    require(f.good(), "cannot open blob '", path.string(), "'");
    std::streamsize n = f.tellg();
    require(n % 4 == 0, "blob '", path.string(), "' has ", n, " bytes, not a multiple of 4");
    f.seekg(0);
    std::vector<unsigned char> bytes(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(bytes.data()), n);
    require(f.good(), "read failed for '", path.string(), "'");
    std::vector<float> out(static_cast<size_t>(n / 4));
    for (size_t i = 0; i < out.size(); ++i) {
        uint32_t u = static_cast<uint32_t>(bytes[4 * i]) |
                     (static_cast<uint32_t>(bytes[4 * i + 1]) << 8) |
                     (static_cast<uint32_t>(bytes[4 * i + 2]) << 16) |
                     (static_cast<uint32_t>(bytes[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

} // namespace lutnn
