// lutnn: quantization toolkit and multiply-free inference for small
// feed-forward networks.
//
// Subcommands: fold, quantize, infer, metrics, train-toy. Exit code 0 on
// success, 2 on usage or input errors (diagnostics on stderr). `--json`
// switches stdout to a single machine-readable object.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lutnn/datasets.hpp"
#include "lutnn/engine_log.hpp"
#include "lutnn/engine_lut.hpp"
#include "lutnn/fold.hpp"
#include "lutnn/metrics.hpp"
#include "lutnn/train.hpp"

using nlohmann::json;
using namespace lutnn;

namespace {

std::filesystem::path resolve_out(const std::string& path) {
    // LUTNN_OUT_DIR re-roots relative output paths.
    const char* base = std::getenv("LUTNN_OUT_DIR");
    std::filesystem::path p(path);
    if (base && *base && p.is_relative()) return std::filesystem::path(base) / p;
    return p;
}

void emit(const json& j, bool as_json, const std::string& human) {
    if (as_json)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << human;
}

// ---------------------------------------------------------------------------

int cmd_fold(const std::string& in, const std::string& out, bool as_json) {
    FloatModel m = load_float_model(in);
    int folded = 0;
    for (const auto& l : m.layers)
        if (l.norm) ++folded;
    FloatModel f = fold_model(m);
    save_float_model(f, resolve_out(out));
    json j{{"command", "fold"},
           {"layers", m.layers.size()},
           {"folded_norms", folded},
           {"out", resolve_out(out).string()}};
    emit(j, as_json,
         "folded " + std::to_string(folded) + " norm(s) across " +
             std::to_string(m.layers.size()) + " layer(s) -> " + resolve_out(out).string() + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

struct QuantizeArgs {
    std::string in, out;
    std::string method = "octave";
    std::string act = "linear";
    int n_w = 256;
    int n_q = 8, n_o = 15;
    int n_a = 32;
    int n_q_a = 32, n_o_a = 3;
    int s = 16;
    double dx = 0.02;
    double v_max = 0.0;
    uint64_t seed = 0;
    uint64_t subsample = 100000;
    std::string mf_mode = "l2";
    bool sort_addends = false;
};

int cmd_quantize(const QuantizeArgs& a, bool as_json) {
    FloatModel m = load_float_model(a.in);
    require(!m.has_norm(), "'", a.in, "' still carries norm params; run `fold` first");
    std::filesystem::path out = resolve_out(a.out);

    if (a.act == "octave") {
        require(a.method == "octave",
                "--act octave requires --method octave (log-domain weights)");
        LogQuantOptions opt;
        opt.n_q_w = a.n_q;
        opt.n_o_w = a.n_o;
        opt.n_q_a = a.n_q_a;
        opt.n_o_a = a.n_o_a;
        opt.v_max_override = a.v_max;
        opt.sort_addends = a.sort_addends;
        LogQuantModel lm = build_log_model(m, opt);
        save_log_model(lm, out);
        OctaveOctaveCounts c = nuc_octave_octave(opt.n_q_w, opt.n_o_w, opt.n_q_a, opt.n_o_a);
        json j{{"command", "quantize"},
               {"engine", "log"},
               {"method", "octave"},
               {"act", "octave"},
               {"n_w", lm.weight_cb.size()},
               {"n_a", lm.act_cb.size()},
               {"n_net", lm.n_net()},
               {"nuc", c.nuc},
               {"nwnc", c.nuc},
               {"table_entries", c.table_entries},
               {"out", out.string()}};
        emit(j, as_json,
             "octave/octave model: N_w=" + std::to_string(lm.weight_cb.size()) +
                 " N_a=" + std::to_string(lm.act_cb.size()) + " NUC=" + std::to_string(c.nuc) +
                 " -> " + out.string() + "\n");
        return 0;
    }

    require(a.act == "linear", "unknown activation scheme '", a.act, "'");
    QuantizeOptions opt;
    opt.s = a.s;
    opt.n_a = a.n_a;
    opt.dx_tanh = a.dx;

    QuantizedModel qm;
    if (a.method == "kmeans") {
        KMeansOptions ko;
        ko.seed = a.seed;
        ko.subsample = a.subsample;
        Codebook cb = kmeans_1d(gather_params(m), a.n_w, ko);
        qm = build_quantized_model(m, cb, opt);
    } else if (a.method == "laplacian") {
        std::vector<double> params = gather_params(m);
        double w_max = a.v_max > 0.0 ? a.v_max : estimate_w_max(params, a.n_w);
        Codebook cb = laplacian_centers(a.n_w, w_max);
        force_one_replace_nearest(cb.levels);
        qm = build_quantized_model(m, cb, opt);
    } else if (a.method == "modelfree") {
        CenterMode mode = a.mf_mode == "l1" ? CenterMode::l1_median : CenterMode::l2_mean;
        FloatModel snapped = m;
        std::vector<Codebook> cbs;
        for (auto& l : snapped.layers) {
            std::vector<double> vals = gather_layer_params(l);
            Codebook cb = modelfree_init(vals, a.n_w, mode);
            force_one_replace_nearest(cb.levels);
            std::vector<double> q = modelfree_requantize(vals, cb);
            size_t k = 0;
            for (auto& w : l.weights.data) w = static_cast<float>(q[k++]);
            if (l.bias)
                for (auto& b : l.bias->data) b = static_cast<float>(q[k++]);
            cbs.push_back(std::move(cb));
        }
        qm = build_quantized_model(snapped, cbs, Scheme::model_free, opt);
    } else if (a.method == "octave") {
        double v_max = a.v_max;
        if (v_max <= 0.0)
            for (double p : gather_params(m)) v_max = std::max(v_max, std::abs(p));
        require(v_max > 0.0, "quantize: all parameters are zero");
        Codebook cb = octave_codebook(a.n_q, a.n_o, v_max);
        qm = build_quantized_model(m, cb, opt);
    } else {
        fail("unknown quantization method '", a.method, "'");
    }

    save_quantized_model(qm, out);
    ComplexityReport rep = complexity_report(qm);
    json j{{"command", "quantize"},
           {"engine", "lut"},
           {"method", a.method},
           {"act", "linear"},
           {"s", qm.s},
           {"n_a", qm.n_a},
           {"n_net", qm.n_net()},
           {"nwnc", rep.nwnc},
           {"network_lut_entries", rep.network_lut_entries},
           {"total_bits", rep.size.total_bits},
           {"out", out.string()}};
    emit(j, as_json,
         a.method + "/linear model: N_net=" + std::to_string(qm.n_net()) +
             " NWNC=" + std::to_string(rep.nwnc) + " -> " + out.string() + "\n");
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_infer(const std::string& engine, const std::string& model_path,
              const std::string& inputs_path, int topk, int threads, bool as_json) {
    std::vector<float> blob = read_f32_blob(inputs_path);
    json results = json::array();
    std::string human;

    auto check_batch = [&](size_t input_size) {
        require(input_size > 0 && blob.size() % input_size == 0, "'", inputs_path, "' holds ",
                blob.size(), " floats, not a multiple of the model input size ", input_size);
        return blob.size() / input_size;
    };

    if (engine == "float") {
        FloatModel m = load_float_model(model_path);
        size_t n = check_batch(static_cast<size_t>(m.input_size()));
        for (size_t i = 0; i < n; ++i) {
            std::span<const float> x(blob.data() + i * m.input_size(),
                                     static_cast<size_t>(m.input_size()));
            std::vector<float> logits = forward_float(m, x);
            std::vector<double> d(logits.begin(), logits.end());
            auto top = top_k_indices(std::span<const double>(d), topk);
            results.push_back({{"top", top}, {"logits", d}});
            human += "input " + std::to_string(i) + ": top1=" + std::to_string(top.at(0)) + "\n";
        }
    } else if (engine == "lut") {
        QuantizedModel qm = load_quantized_model(model_path);
        LutEngine eng(qm);
        size_t input_size = static_cast<size_t>(qm.layers.at(0).in_count);
        size_t n = check_batch(input_size);
        std::vector<std::vector<uint16_t>> batch(n);
        for (size_t i = 0; i < n; ++i)
            batch[i] = quantize_input(
                std::span<const float>(blob.data() + i * input_size, input_size),
                qm.input_levels);
        auto out = eng.forward_batch(batch, topk, threads);
        for (size_t i = 0; i < n; ++i) {
            results.push_back({{"top", out[i].topk}, {"accumulators", out[i].logits}});
            human += "input " + std::to_string(i) +
                     ": top1=" + std::to_string(out[i].topk.at(0)) + "\n";
        }
    } else if (engine == "log") {
        LogQuantModel lm = load_log_model(model_path);
        size_t input_size = static_cast<size_t>(lm.layers.at(0).in_count);
        size_t n = check_batch(input_size);
        std::vector<std::vector<LogValue>> batch(n);
        for (size_t i = 0; i < n; ++i)
            batch[i] = encode_input_log(
                lm, std::span<const float>(blob.data() + i * input_size, input_size));
        auto out = forward_log_batch(lm, batch, topk, threads);
        for (size_t i = 0; i < n; ++i) {
            results.push_back({{"top", out[i].topk}, {"accumulators", out[i].logits}});
            human += "input " + std::to_string(i) +
                     ": top1=" + std::to_string(out[i].topk.at(0)) + "\n";
        }
    } else {
        fail("unknown engine '", engine, "' (expected float, lut, or log)");
    }

    json j{{"command", "infer"}, {"engine", engine}, {"topk", topk}, {"results", results}};
    emit(j, as_json, human);
    return 0;
}

// ---------------------------------------------------------------------------

json metrics_from_params(const json& p) {
    std::string method = p.at("method").get<std::string>();
    json j{{"command", "metrics"}, {"source", "params"}, {"method", method}};
    if (method == "modelfree") {
        int64_t n_a = p.at("n_a").get<int64_t>();
        if (p.contains("per_layer_n_w")) {
            std::vector<int64_t> per = p.at("per_layer_n_w").get<std::vector<int64_t>>();
            j["nuc"] = nuc_modelfree(*std::max_element(per.begin(), per.end()), n_a);
            j["nwnc"] = nwnc_modelfree(per, n_a);
        } else {
            int64_t n_w = p.at("n_w").get<int64_t>();
            int64_t layers = p.value("layers", int64_t{1});
            j["nuc"] = nuc_modelfree(n_w, n_a);
            j["nwnc"] = nwnc_modelfree(std::vector<int64_t>(static_cast<size_t>(layers), n_w), n_a);
        }
        j["lut_entries"] = j["nuc"];
    } else if (method == "octave-linear") {
        OctaveLinearCounts c = nuc_octave_linear(p.at("n_q").get<int64_t>(),
                                                 p.at("n_o").get<int64_t>(),
                                                 p.at("n_a").get<int64_t>(),
                                                 p.value("include_zero_column", false));
        j["nuc"] = c.nuc;
        j["nwnc"] = c.nuc;
        j["lut_entries"] = c.lut_entries;
    } else if (method == "octave-octave") {
        OctaveOctaveCounts c =
            nuc_octave_octave(p.at("n_q_w").get<int64_t>(), p.at("n_o_w").get<int64_t>(),
                              p.at("n_q_a").get<int64_t>(), p.at("n_o_a").get<int64_t>());
        j["nuc"] = c.nuc;
        j["nwnc"] = c.nuc;
        j["table_entries"] = c.table_entries;
    } else {
        fail("params file: unknown method '", method, "'");
    }
    if (p.contains("n_net") && p.contains("n_w") && p.contains("n_a") && p.contains("n_x")) {
        NetworkSizeBits b = network_size_bits(p.at("n_net").get<int64_t>(),
                                              p.at("n_w").get<int64_t>(),
                                              p.at("n_a").get<int64_t>(),
                                              p.at("n_x").get<int64_t>(), p.value("s", 16));
        j["network_size_bits"] = b.total_bits;
        j["download_ratio"] = b.download_ratio;
    }
    return j;
}

json metrics_from_model(const std::string& path) {
    // sniff the magic
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open '", path, "'");
    char magic[8] = {};
    f.read(magic, 8);
    f.close();

    if (std::string(magic, 8) == std::string(kLogMagic, kLogMagic + 8)) {
        LogQuantModel lm = load_log_model(path);
        const LogTables& t = lm.tables;
        OctaveOctaveCounts c = nuc_octave_octave(t.n_q_w, t.n_o_w, t.n_q_a, t.n_o_a);
        json sections = json::array();
        uint64_t total = 0;
        for (const auto& s : log_section_bytes(lm)) {
            sections.push_back({{"name", s.name}, {"bytes", s.bytes}});
            total += s.bytes;
        }
        return json{{"command", "metrics"},
                    {"source", "model"},
                    {"engine", "log"},
                    {"nuc", c.nuc},
                    {"nwnc", c.nuc},
                    {"table_entries", c.table_entries},
                    {"stored_table_entries", lm.tables.t_q.size() + lm.tables.t_q_inv.size()},
                    {"n_net", lm.n_net()},
                    {"n_w", lm.weight_cb.size()},
                    {"n_a", lm.act_cb.size()},
                    {"sections", sections},
                    {"payload_bytes", total}};
    }

    QuantizedModel qm = load_quantized_model(path);
    ComplexityReport rep = complexity_report(qm);
    json layers = json::array();
    for (const auto& l : rep.layers)
        layers.push_back({{"name", l.name},
                          {"nuc", l.nuc},
                          {"lut_entries", l.lut_entries},
                          {"act_entries", l.act_entries}});
    json sections = json::array();
    uint64_t total = 0;
    for (const auto& s : rep.serialized_sections) {
        sections.push_back({{"name", s.name}, {"bytes", s.bytes}});
        total += s.bytes;
    }
    return json{{"command", "metrics"},
                {"source", "model"},
                {"engine", "lut"},
                {"scheme", scheme_name(rep.scheme)},
                {"layers", layers},
                {"nuc", rep.layers.empty() ? 0 : rep.layers[0].nuc},
                {"nwnc", rep.nwnc},
                {"network_lut_entries", rep.network_lut_entries},
                {"n_net", rep.n_net},
                {"network_size_bits", rep.size.total_bits},
                {"download_ratio", rep.size.download_ratio},
                {"sections", sections},
                {"payload_bytes", total}};
}

int cmd_metrics(const std::string& model, const std::string& params, bool as_json) {
    json j;
    if (!model.empty()) {
        j = metrics_from_model(model);
    } else {
        std::ifstream f(params);
        require(f.good(), "cannot open params file '", params, "'");
        json p;
        try {
            f >> p;
        } catch (const json::exception& e) {
            fail("'", params, "' is not valid JSON: ", e.what());
        }
        j = metrics_from_params(p);
    }
    std::string human = "NUC=" + j.at("nuc").dump() + " NWNC=" + j.at("nwnc").dump() + "\n";
    emit(j, as_json, human);
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string task = "moons";
    std::string method = "octave";
    std::string act = "tanh";
    std::string out_dir = "train_out";
    int s_period = 100;
    int n_w = 65, n_q = 8, n_o = 4, n_a = 16;
    int epochs = 30, warmup = 15, batch = 32;
    double lr = 0.05, momentum = 0.9, noise = 0.15, val_fraction = 0.25;
    int samples = 600;
    uint64_t seed = 1;
    std::vector<int> hidden = {16};
    bool baseline = false; // also train the float reference with the same seed
};

int cmd_train(const TrainArgs& a, bool as_json) {
    Dataset all;
    if (a.task == "moons") {
        all = make_two_moons(a.samples, a.noise, a.seed ^ 0xD5);
    } else if (a.task == "blobs") {
        all = make_blobs(a.samples, 3, 0.35, a.seed ^ 0xD5);
    } else if (a.task.rfind("idx:", 0) == 0) {
        std::filesystem::path dir(a.task.substr(4));
        all = load_idx(dir / "images.idx", dir / "labels.idx", 6.0);
    } else {
        fail("unknown task '", a.task, "' (expected moons, blobs, or idx:<dir>)");
    }
    Dataset tr, val;
    split_dataset(all, a.val_fraction, a.seed ^ 0x51, &tr, &val);

    TrainConfig cfg;
    cfg.method = weight_method_from_name(a.method);
    cfg.ste = cfg.method != WeightMethod::none;
    cfg.s_period = a.s_period;
    cfg.n_w = a.n_w;
    cfg.n_q = a.n_q;
    cfg.n_o = a.n_o;
    cfg.n_a = a.n_a;
    cfg.lr = a.lr;
    cfg.momentum = a.momentum;
    cfg.batch = a.batch;
    cfg.warmup_epochs = a.warmup;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.hidden = a.hidden;
    cfg.hidden_act = a.act == "relu6" ? Activation::relu6 : Activation::tanh_fn;

    ToyNet init = ToyNet::mlp(all.feature_dim, cfg.hidden, all.n_classes, cfg.hidden_act, cfg.seed);
    TrainResult res = train(cfg, init, tr, val);

    std::filesystem::path out = resolve_out(a.out_dir);
    std::filesystem::create_directories(out);
    save_float_model(res.net.to_float_model(), out / "quantized");

    double baseline_acc = -1.0;
    if (a.baseline || cfg.method != WeightMethod::none) {
        TrainConfig fcfg = cfg;
        fcfg.method = WeightMethod::none;
        fcfg.ste = false;
        TrainResult fres = train(fcfg, init, tr, val);
        baseline_acc = fres.log.empty() ? 0.0 : fres.log.back().val_acc;
        save_float_model(fres.net.to_float_model(), out / "float");
    } else {
        save_float_model(res.net.to_float_model(), out / "float");
    }

    std::ofstream csv(out / "metrics.csv");
    require(csv.good(), "cannot open '", (out / "metrics.csv").string(), "' for writing");
    csv << "epoch,step,train_loss,train_acc,val_acc,distinct_params\n";
    for (const auto& e : res.log)
        csv << e.epoch << "," << e.step << "," << e.train_loss << "," << e.train_acc << ","
            << e.val_acc << "," << e.distinct_params << "\n";

    double final_val = res.log.empty() ? 0.0 : res.log.back().val_acc;
    json j{{"command", "train-toy"},
           {"task", a.task},
           {"method", a.method},
           {"val_acc", final_val},
           {"distinct_params", res.net.distinct_param_count()},
           {"out", out.string()}};
    if (baseline_acc >= 0.0) j["baseline_val_acc"] = baseline_acc;
    std::string human = "final val acc " + std::to_string(final_val);
    if (baseline_acc >= 0.0) human += " (float baseline " + std::to_string(baseline_acc) + ")";
    human += ", checkpoints in " + out.string() + "\n";
    emit(j, as_json, human);
    return 0;
}

// ---------------------------------------------------------------------------

// --config FILE: a JSON object of long-option defaults, applied for any
// flag not given on the command line.
std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string config_path;
    for (size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;
    std::ifstream f(config_path);
    require(f.good(), "cannot open config file '", config_path, "'");
    json cfg;
    try {
        f >> cfg;
    } catch (const json::exception& e) {
        fail("config '", config_path, "' is not valid JSON: ", e.what());
    }
    require(cfg.is_object(), "config '", config_path, "' must be a JSON object");
    for (auto& [key, value] : cfg.items()) {
        std::string flag = "--" + key;
        bool given = false;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
        if (given) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
        } else if (value.is_string()) {
            args.push_back(flag + "=" + value.get<std::string>());
        } else {
            args.push_back(flag + "=" + value.dump());
        }
    }
    return args;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lutnn: table-based quantization and multiply-free inference"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "emit a JSON object on stdout");
    std::string config_file;
    app.add_option("--config", config_file, "JSON file of default option values");

    // fold
    auto* fold = app.add_subcommand("fold", "fold batch-norm into adjacent weight layers");
    fold->fallthrough(); // accept --json/--config after the name
    std::string fold_in, fold_out;
    fold->add_option("--in", fold_in, "float checkpoint directory")->required();
    fold->add_option("--out", fold_out, "output checkpoint directory")->required();

    // quantize
    auto* quant = app.add_subcommand("quantize", "build inference tables from a float checkpoint");
    quant->fallthrough(); // accept --json/--config after the name
    QuantizeArgs qa;
    quant->add_option("--in", qa.in, "float checkpoint directory (norm-free)")->required();
    quant->add_option("--out", qa.out, "output model file")->required();
    quant->add_option("--method", qa.method, "kmeans | laplacian | modelfree | octave");
    quant->add_option("--act", qa.act, "activation scheme: linear | octave");
    quant->add_option("--nw", qa.n_w, "weight levels (kmeans/laplacian/modelfree)");
    quant->add_option("--nq", qa.n_q, "weight samples per octave");
    quant->add_option("--no", qa.n_o, "weight octave count");
    quant->add_option("--na", qa.n_a, "activation levels (linear)");
    quant->add_option("--nqa", qa.n_q_a, "activation samples per octave");
    quant->add_option("--noa", qa.n_o_a, "activation octave count");
    quant->add_option("--s", qa.s, "fixed-point shift bits");
    quant->add_option("--dx", qa.dx, "activation-table step for tanh layers");
    quant->add_option("--vmax", qa.v_max, "override the weight-scale estimate");
    quant->add_option("--seed", qa.seed, "clustering seed");
    quant->add_option("--subsample", qa.subsample, "k-means subsample size");
    quant->add_option("--mf-center", qa.mf_mode, "model-free center: l2 | l1");
    quant->add_flag("--sort-addends", qa.sort_addends,
                    "log engine: accumulate smallest weight magnitudes first");

    // infer
    auto* infer = app.add_subcommand("infer", "run a forward pass over an input blob");
    infer->fallthrough(); // accept --json/--config after the name
    std::string inf_engine = "lut", inf_model, inf_inputs;
    int inf_topk = 1, inf_threads = 1;
    infer->add_option("--engine", inf_engine, "float | lut | log");
    infer->add_option("--model", inf_model, "model path (directory for float)")->required();
    infer->add_option("--inputs", inf_inputs, "little-endian float32 blob")->required();
    infer->add_option("--topk", inf_topk, "top-k indices to report");
    infer->add_option("--threads", inf_threads, "batch parallelism");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "complexity accounting (NUC/NWNC/bits)");
    metrics->fallthrough(); // accept --json/--config after the name
    std::string met_model, met_params;
    metrics->add_option("--model", met_model, "quantized model file");
    metrics->add_option("--params", met_params, "JSON parameter file");

    // train-toy
    auto* train_cmd = app.add_subcommand("train-toy", "desk-scale quantization-aware training");
    train_cmd->fallthrough(); // accept --json/--config after the name
    TrainArgs ta;
    train_cmd->add_option("--task", ta.task, "moons | blobs | idx:<dir>");
    train_cmd->add_option("--method", ta.method, "none | kmeans | laplacian | modelfree | octave");
    train_cmd->add_option("--S", ta.s_period, "requantization period in steps");
    train_cmd->add_option("--nw", ta.n_w, "weight levels (kmeans/laplacian/modelfree)");
    train_cmd->add_option("--nq", ta.n_q, "weight samples per octave");
    train_cmd->add_option("--no", ta.n_o, "weight octave count");
    train_cmd->add_option("--na", ta.n_a, "activation levels");
    train_cmd->add_option("--act", ta.act, "hidden activation: tanh | relu6");
    train_cmd->add_option("--epochs", ta.epochs, "quantized fine-tune epochs");
    train_cmd->add_option("--warmup", ta.warmup, "continuous epochs before quantization");
    train_cmd->add_option("--batch", ta.batch, "mini-batch size");
    train_cmd->add_option("--lr", ta.lr, "learning rate");
    train_cmd->add_option("--momentum", ta.momentum, "SGD momentum");
    train_cmd->add_option("--samples", ta.samples, "synthetic dataset size");
    train_cmd->add_option("--noise", ta.noise, "synthetic dataset noise");
    train_cmd->add_option("--seed", ta.seed, "training seed");
    train_cmd->add_option("--hidden", ta.hidden, "hidden layer widths");
    train_cmd->add_option("--out-dir", ta.out_dir, "output directory");
    train_cmd->add_flag("--baseline", ta.baseline, "also train the float reference");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = apply_config(args);
        std::vector<const char*> cargs;
        cargs.push_back(argv[0]);
        for (const auto& a : args) cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*fold) return cmd_fold(fold_in, fold_out, as_json);
        if (*quant) return cmd_quantize(qa, as_json);
        if (*infer) return cmd_infer(inf_engine, inf_model, inf_inputs, inf_topk, inf_threads,
                                     as_json);
        if (*metrics) {
            require(!met_model.empty() || !met_params.empty(),
                    "metrics: pass --model or --params");
            return cmd_metrics(met_model, met_params, as_json);
        }
        if (*train_cmd) return cmd_train(ta, as_json);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << app.help();
    return 2;
}
