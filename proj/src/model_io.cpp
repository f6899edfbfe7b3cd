#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lutnn/model.hpp"

namespace lutnn {

using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;

std::string tensor_file(size_t layer, const char* which) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "layer%03zu_%s.bin", layer, which);
    return buf;
}

json vec_to_json(const std::vector<float>& v) {
    json a = json::array();
    for (float x : v) a.push_back(static_cast<double>(x));
    return a;
}

std::vector<float> vec_from_json(const json& a, const std::string& what) {
    std::vector<float> out;
    out.reserve(a.size());
    for (const auto& x : a) {
        double d = x.get<double>();
        require(std::isfinite(d), what, ": non-finite value in manifest");
        out.push_back(static_cast<float>(d));
    }
    return out;
}

Tensor load_tensor(const std::filesystem::path& dir, const json& jt, const std::string& tag) {
    std::vector<int> shape = jt.at("shape").get<std::vector<int>>();
    std::string file = jt.at("file").get<std::string>();
    std::vector<float> data = read_f32_blob(dir / file);
    size_t expect = Tensor::shape_size(shape);
    require(data.size() == expect, tag, ": manifest declares ", expect,
            " floats but blob '", file, "' holds ", data.size());
    for (size_t i = 0; i < data.size(); ++i)
        require(std::isfinite(data[i]), tag, ": non-finite value in '", file,
                "' at offset ", i * 4);
    return Tensor(std::move(shape), std::move(data));
}

} // namespace

void save_float_model(const FloatModel& model, const std::filesystem::path& dir) {
    model.validate();
    std::filesystem::create_directories(dir);
    json j;
    j["format"] = "float-model";
    j["version"] = kManifestVersion;
    j["input_shape"] = model.input_shape;
    json layers = json::array();
    for (size_t li = 0; li < model.layers.size(); ++li) {
        const LayerSpec& l = model.layers[li];
        json jl;
        jl["kind"] = l.kind == LayerKind::dense ? "dense" : "conv2d";
        jl["activation"] = activation_name(l.activation);
        std::string wfile = tensor_file(li, "weights");
        write_f32_blob(dir / wfile, l.weights.data);
        jl["weights"] = {{"file", wfile}, {"shape", l.weights.shape}};
        if (l.bias) {
            std::string bfile = tensor_file(li, "bias");
            write_f32_blob(dir / bfile, l.bias->data);
            jl["bias"] = {{"file", bfile}, {"shape", l.bias->shape}};
        } else {
            jl["bias"] = nullptr;
        }
        if (l.kind == LayerKind::conv2d) {
            jl["in_h"] = l.in_h;
            jl["in_w"] = l.in_w;
            jl["stride"] = l.stride;
            jl["pad"] = l.pad;
        }
        if (l.norm) {
            jl["norm"] = {{"gamma", vec_to_json(l.norm->gamma)},
                          {"beta", vec_to_json(l.norm->beta)},
                          {"mean", vec_to_json(l.norm->mean)},
                          {"var", vec_to_json(l.norm->var)},
                          {"epsilon", static_cast<double>(l.norm->epsilon)}};
        } else {
            jl["norm"] = nullptr;
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    std::ofstream f(dir / "model.json");
    require(f.good(), "cannot open '", (dir / "model.json").string(), "' for writing");
    f << j.dump(2) << "\n";
    require(f.good(), "write failed for model.json");
}

FloatModel load_float_model(const std::filesystem::path& dir) {
    std::filesystem::path manifest = dir / "model.json";
    std::ifstream f(manifest);
    require(f.good(), "cannot open manifest '", manifest.string(), "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        fail("manifest '", manifest.string(), "' is not valid JSON: ", e.what());
    }
    require(j.value("format", "") == "float-model",
            "'", manifest.string(), "': not a float-model manifest");

    FloatModel model;
    model.input_shape = j.at("input_shape").get<std::vector<int>>();
    size_t li = 0;
    for (const auto& jl : j.at("layers")) {
        std::string tag = "layer " + std::to_string(li);
        LayerSpec l;
        std::string kind = jl.at("kind").get<std::string>();
        if (kind == "dense")
            l.kind = LayerKind::dense;
        else if (kind == "conv2d")
            l.kind = LayerKind::conv2d;
        else
            fail(tag, ": unknown layer kind '", kind, "'");
        l.activation = activation_from_name(jl.at("activation").get<std::string>());
        l.weights = load_tensor(dir, jl.at("weights"), tag + " weights");
        if (!jl.at("bias").is_null())
            l.bias = load_tensor(dir, jl.at("bias"), tag + " bias");
        if (l.kind == LayerKind::conv2d) {
            l.in_h = jl.at("in_h").get<int>();
            l.in_w = jl.at("in_w").get<int>();
            l.stride = jl.at("stride").get<int>();
            l.pad = jl.at("pad").get<int>();
        }
        if (!jl.at("norm").is_null()) {
            const json& jn = jl.at("norm");
            NormParams n;
            n.gamma = vec_from_json(jn.at("gamma"), tag + " norm.gamma");
            n.beta = vec_from_json(jn.at("beta"), tag + " norm.beta");
            n.mean = vec_from_json(jn.at("mean"), tag + " norm.mean");
            n.var = vec_from_json(jn.at("var"), tag + " norm.var");
            n.epsilon = jn.contains("epsilon") ? static_cast<float>(jn.at("epsilon").get<double>())
                                               : 1e-3f;
            l.norm = std::move(n);
        }
        model.layers.push_back(std::move(l));
        ++li;
    }
    model.validate();
    return model;
}

} // namespace lutnn
