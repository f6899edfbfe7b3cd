#include <cstring>

#include <json.hpp>

#include "binio.hpp"
#include "lutnn/tables.hpp"

namespace lutnn {

using nlohmann::json;

namespace {

json codebook_to_json(const Codebook& cb) {
    json j;
    j["scheme"] = scheme_name(cb.scheme);
    j["levels"] = cb.levels;
    if (!cb.counts.empty()) j["counts"] = cb.counts;
    if (cb.n_q > 0) {
        j["n_q"] = cb.n_q;
        j["n_o"] = cb.n_o;
        j["k_max"] = cb.k_max;
    }
    return j;
}

Codebook codebook_from_json(const json& j) {
    Codebook cb;
    cb.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    cb.levels = j.at("levels").get<std::vector<double>>();
    if (j.contains("counts")) cb.counts = j.at("counts").get<std::vector<int64_t>>();
    if (j.contains("n_q")) {
        cb.n_q = j.at("n_q").get<int>();
        cb.n_o = j.at("n_o").get<int>();
        cb.k_max = j.at("k_max").get<double>();
    }
    return cb;
}

} // namespace

std::vector<SectionBytes> quantized_section_bytes(const QuantizedModel& m) {
    std::vector<SectionBytes> out;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const QuantizedLayer& l = m.layers[li];
        std::string p = "layer" + std::to_string(li) + ".";
        out.push_back({p + "lut", static_cast<uint64_t>(l.lut.entries.size()) * 4});
        out.push_back({p + "act_table",
                       l.act_table ? static_cast<uint64_t>(l.act_table->entries.size()) * 2 : 0});
        int n_w = m.weight_codebooks[static_cast<size_t>(l.weight_cb_index)].size();
        uint64_t width = static_cast<uint64_t>(ceil_log2(static_cast<uint64_t>(n_w)));
        out.push_back({p + "weight_indices", (l.weight_indices.size() * width + 7) / 8});
        out.push_back({p + "bias_terms", static_cast<uint64_t>(l.bias_terms.size()) * 8});
    }
    return out;
}

void save_quantized_model(const QuantizedModel& m, const std::filesystem::path& path) {
    json j;
    j["format"] = "lut-quantized-model";
    j["version"] = 1;
    j["s"] = m.s;
    j["n_a"] = m.n_a;
    j["scheme"] = scheme_name(m.scheme);
    j["input_shape"] = m.input_shape;
    j["input_levels"] = m.input_levels;
    json jcbs = json::array();
    for (const auto& cb : m.weight_codebooks) jcbs.push_back(codebook_to_json(cb));
    j["weight_codebooks"] = std::move(jcbs);

    std::vector<uint8_t> payload;
    json jlayers = json::array();
    for (const auto& l : m.layers) {
        json jl;
        jl["kind"] = l.kind == LayerKind::dense ? "dense" : "conv2d";
        jl["activation"] = activation_name(l.activation);
        jl["in_count"] = l.in_count;
        jl["out_count"] = l.out_count;
        jl["out_channels"] = l.out_channels;
        jl["has_bias"] = l.has_bias;
        jl["weight_cb"] = l.weight_cb_index;
        if (l.kind == LayerKind::conv2d) {
            jl["in_c"] = l.in_c;
            jl["in_h"] = l.in_h;
            jl["in_w"] = l.in_w;
            jl["kh"] = l.kh;
            jl["kw"] = l.kw;
            jl["stride"] = l.stride;
            jl["pad"] = l.pad;
        }

        uint64_t off = payload.size();
        for (int32_t e : l.lut.entries) binio::put_i32(payload, e);
        jl["lut"] = {{"rows", l.lut.rows},
                     {"cols", l.lut.cols},
                     {"codebook_rows", l.lut.codebook_rows},
                     {"readout_row", l.lut.readout_row},
                     {"dx", l.lut.dx},
                     {"offset", off},
                     {"bytes", payload.size() - off}};

        if (l.act_table) {
            off = payload.size();
            for (uint16_t e : l.act_table->entries) binio::put_u16(payload, e);
            jl["act_table"] = {{"n_x", l.act_table->n_x}, {"k0", l.act_table->k0},
                               {"dx", l.act_table->dx},   {"offset", off},
                               {"bytes", payload.size() - off}};
        } else {
            jl["act_table"] = nullptr;
        }

        int n_w = m.weight_codebooks[static_cast<size_t>(l.weight_cb_index)].size();
        off = payload.size();
        std::vector<uint8_t> packed = pack_weight_indices(l.weight_indices, n_w);
        payload.insert(payload.end(), packed.begin(), packed.end());
        jl["weight_indices"] = {{"count", l.weight_indices.size()},
                                {"offset", off},
                                {"bytes", payload.size() - off}};

        off = payload.size();
        for (int64_t b : l.bias_terms) binio::put_i64(payload, b);
        jl["bias_terms"] = {{"count", l.bias_terms.size()},
                            {"offset", off},
                            {"bytes", payload.size() - off}};
        jlayers.push_back(std::move(jl));
    }
    j["layers"] = std::move(jlayers);

    std::string header = j.dump();
    std::vector<uint8_t> file;
    file.insert(file.end(), kQuantMagic, kQuantMagic + 8);
    binio::put_u32(file, static_cast<uint32_t>(header.size()));
    file.insert(file.end(), header.begin(), header.end());
    file.insert(file.end(), payload.begin(), payload.end());
    binio::write_file(path, file);
}

QuantizedModel load_quantized_model(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = binio::read_file(path);
    std::string name = path.string();
    require(bytes.size() >= 12 && std::memcmp(bytes.data(), kQuantMagic, 8) == 0,
            "'", name, "': not a quantized-model file (bad magic)");
    binio::Reader rd{bytes, name};
    uint64_t hlen = rd.u32_at(8);
    require(12 + hlen <= bytes.size(), "'", name, "': truncated header");
    json j;
    try {
        j = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<ptrdiff_t>(hlen));
    } catch (const json::exception& e) {
        fail("'", name, "': header is not valid JSON: ", e.what());
    }
    require(j.value("format", "") == "lut-quantized-model", "'", name,
            "': unexpected format field");
    uint64_t payload_base = 12 + hlen;
    uint64_t payload_size = bytes.size() - payload_base;

    QuantizedModel m;
    m.s = j.at("s").get<int>();
    m.n_a = j.at("n_a").get<int>();
    m.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    m.input_shape = j.at("input_shape").get<std::vector<int>>();
    m.input_levels = j.at("input_levels").get<std::vector<double>>();
    for (const auto& jcb : j.at("weight_codebooks")) m.weight_codebooks.push_back(codebook_from_json(jcb));
    require(!m.weight_codebooks.empty(), "'", name, "': no weight codebooks");

    auto section = [&](const json& js, uint64_t expect_bytes, const std::string& what) {
        uint64_t off = js.at("offset").get<uint64_t>();
        uint64_t len = js.at("bytes").get<uint64_t>();
        require(len == expect_bytes, "'", name, "': ", what, " holds ", len, " bytes, expected ",
                expect_bytes);
        require(off + len <= payload_size, "'", name, "': ", what, " section at offset ", off,
                " overruns the payload");
        return payload_base + off;
    };

    size_t li = 0;
    for (const auto& jl : j.at("layers")) {
        std::string tag = "layer " + std::to_string(li);
        QuantizedLayer l;
        l.kind = jl.at("kind").get<std::string>() == "dense" ? LayerKind::dense : LayerKind::conv2d;
        l.activation = activation_from_name(jl.at("activation").get<std::string>());
        l.in_count = jl.at("in_count").get<int>();
        l.out_count = jl.at("out_count").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
        l.has_bias = jl.at("has_bias").get<bool>();
        l.weight_cb_index = jl.at("weight_cb").get<int>();
        require(l.weight_cb_index >= 0 &&
                    static_cast<size_t>(l.weight_cb_index) < m.weight_codebooks.size(),
                "'", name, "': ", tag, " references missing codebook ", l.weight_cb_index);
        if (l.kind == LayerKind::conv2d) {
            l.in_c = jl.at("in_c").get<int>();
            l.in_h = jl.at("in_h").get<int>();
            l.in_w = jl.at("in_w").get<int>();
            l.kh = jl.at("kh").get<int>();
            l.kw = jl.at("kw").get<int>();
            l.stride = jl.at("stride").get<int>();
            l.pad = jl.at("pad").get<int>();
        }

        const json& jlut = jl.at("lut");
        l.lut.rows = jlut.at("rows").get<int>();
        l.lut.cols = jlut.at("cols").get<int>();
        l.lut.codebook_rows = jlut.at("codebook_rows").get<int>();
        l.lut.readout_row = jlut.at("readout_row").get<int>();
        l.lut.s = m.s;
        l.lut.dx = jlut.at("dx").get<double>();
        size_t n_entries = static_cast<size_t>(l.lut.rows) * static_cast<size_t>(l.lut.cols);
        uint64_t base = section(jlut, n_entries * 4, tag + " lut");
        l.lut.entries.resize(n_entries);
        for (size_t i = 0; i < n_entries; ++i) l.lut.entries[i] = rd.i32_at(base + i * 4);

        require(l.lut.cols == m.n_a, "'", name, "': ", tag, " LUT has ", l.lut.cols,
                " columns for ", m.n_a, " activation levels");
        require(l.lut.readout_row >= 0 && l.lut.readout_row < l.lut.rows, "'", name, "': ", tag,
                " readout row out of range");

        if (!jl.at("act_table").is_null()) {
            const json& jat = jl.at("act_table");
            ActivationTable at;
            at.n_x = jat.at("n_x").get<int>();
            at.k0 = jat.at("k0").get<int>();
            at.dx = jat.at("dx").get<double>();
            base = section(jat, static_cast<uint64_t>(at.n_x) * 2, tag + " act_table");
            at.entries.resize(static_cast<size_t>(at.n_x));
            for (size_t i = 0; i < at.entries.size(); ++i) {
                at.entries[i] = rd.u16_at(base + i * 2);
                require(at.entries[i] < m.n_a, "'", name, "': ", tag, " act_table entry ", i,
                        " exceeds N_a");
                require(i == 0 || at.entries[i] >= at.entries[i - 1], "'", name, "': ", tag,
                        " act_table is not non-decreasing at ", i);
            }
            require(at.entries.front() == 0 &&
                        at.entries.back() == static_cast<uint16_t>(m.n_a - 1),
                    "'", name, "': ", tag, " act_table end values are not 0 and N_a-1");
            l.act_table = std::move(at);
        }

        const json& jwi = jl.at("weight_indices");
        size_t count = jwi.at("count").get<size_t>();
        int n_w = m.weight_codebooks[static_cast<size_t>(l.weight_cb_index)].size();
        uint64_t width = static_cast<uint64_t>(ceil_log2(static_cast<uint64_t>(n_w)));
        uint64_t packed_bytes = (count * width + 7) / 8;
        base = section(jwi, packed_bytes, tag + " weight_indices");
        std::span<const uint8_t> packed(bytes.data() + base, packed_bytes);
        l.weight_indices = unpack_weight_indices(packed, count, n_w);

        const json& jbt = jl.at("bias_terms");
        size_t bcount = jbt.at("count").get<size_t>();
        base = section(jbt, bcount * 8, tag + " bias_terms");
        l.bias_terms.resize(bcount);
        for (size_t i = 0; i < bcount; ++i) l.bias_terms[i] = rd.i64_at(base + i * 8);

        require(l.weight_indices.size() == l.weights_per_unit() * static_cast<size_t>(l.out_channels),
                "'", name, "': ", tag, " index count ", l.weight_indices.size(),
                " does not match layer geometry");
        m.layers.push_back(std::move(l));
        ++li;
    }
    return m;
}

} // namespace lutnn
