#include "lutnn/fold.hpp"

namespace lutnn {

namespace {

Tensor ensure_bias(const LayerSpec& layer) {
    if (layer.bias) return *layer.bias;
    return Tensor::zeros({layer.out_channels()});
}

} // namespace

LayerSpec fold_bn_after(const LayerSpec& layer) {
    require(layer.norm.has_value(), "fold_bn_after: layer has no norm params");
    const NormParams& n = *layer.norm;
    size_t oc = static_cast<size_t>(layer.out_channels());
    require(n.channels() == oc, "fold_bn_after: norm has ", n.channels(),
            " channels, layer has ", oc, " output channels");

    LayerSpec out = layer;
    out.bias = ensure_bias(layer);
    size_t per_oc = layer.weights.size() / oc;
    for (size_t c = 0; c < oc; ++c) {
        double s = n.scale(c);
        for (size_t j = 0; j < per_oc; ++j) {
            float& w = out.weights.data[c * per_oc + j];
            w = static_cast<float>(s * w);
        }
        float& b = out.bias->data[c];
        b = static_cast<float>(s * b + n.offset(c));
    }
    out.norm.reset();
    return out;
}

LayerSpec fold_bn_before(const LayerSpec& layer, const std::vector<NormParams>& input_norms) {
    size_t ic = static_cast<size_t>(layer.kind == LayerKind::dense ? layer.weights.shape.at(1)
                                                                   : layer.weights.shape.at(1));
    require(input_norms.size() == ic, "fold_bn_before: got ", input_norms.size(),
            " input norms for ", ic, " input channels");
    for (size_t i = 0; i < ic; ++i)
        require(input_norms[i].channels() == 1,
                "fold_bn_before: input norm ", i, " must be scalar (one channel)");
    if (layer.kind == LayerKind::conv2d)
        require(layer.pad == 0, "fold_bn_before: padded conv is not exactly foldable");

    LayerSpec out = layer;
    out.bias = ensure_bias(layer);
    size_t oc = static_cast<size_t>(layer.out_channels());
    size_t taps = layer.kind == LayerKind::dense
                      ? 1
                      : static_cast<size_t>(layer.weights.shape.at(2)) * layer.weights.shape.at(3);

    // Bias first, through the original weights.
    for (size_t o = 0; o < oc; ++o) {
        double add = 0.0;
        for (size_t i = 0; i < ic; ++i) {
            double off = input_norms[i].offset(0);
            for (size_t t = 0; t < taps; ++t)
                add += off * layer.weights.data[(o * ic + i) * taps + t];
        }
        float& b = out.bias->data[o];
        b = static_cast<float>(b + add);
    }
    // Then rescale the weights.
    for (size_t o = 0; o < oc; ++o) {
        for (size_t i = 0; i < ic; ++i) {
            double s = input_norms[i].scale(0);
            for (size_t t = 0; t < taps; ++t) {
                float& w = out.weights.data[(o * ic + i) * taps + t];
                w = static_cast<float>(s * w);
            }
        }
    }
    return out;
}

LayerSpec fold_weight_norm(const LayerSpec& layer, const std::vector<float>& scale) {
    size_t oc = static_cast<size_t>(layer.out_channels());
    require(scale.size() == 1 || scale.size() == oc,
            "fold_weight_norm: scale must have 1 or ", oc, " entries, got ", scale.size());
    LayerSpec out = layer;
    size_t per_oc = layer.weights.size() / oc;
    for (size_t c = 0; c < oc; ++c) {
        double s = scale.size() == 1 ? scale[0] : scale[c];
        for (size_t j = 0; j < per_oc; ++j) {
            float& w = out.weights.data[c * per_oc + j];
            w = static_cast<float>(s * w);
        }
    }
    return out;
}

FloatModel fold_model(const FloatModel& model) {
    FloatModel out = model;
    for (auto& l : out.layers)
        if (l.norm) l = fold_bn_after(l);
    out.validate();
    return out;
}

} // namespace lutnn
