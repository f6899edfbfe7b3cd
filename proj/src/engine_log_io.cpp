#include <cstring>

#include <json.hpp>

#include "binio.hpp"
#include "lutnn/engine_log.hpp"

namespace lutnn {

using nlohmann::json;

namespace {

// Per-entry packed record widths: tap index, sign bit, octave, 1-based
// within-octave index stored as index-1.
struct EntryWidths {
    int tap = 0, oct = 0, idx = 0;
    int total() const { return tap + 1 + oct + idx; }
};

EntryWidths entry_widths(const LogQuantLayer& l, const LogTables& t) {
    EntryWidths w;
    size_t taps = l.kind == LayerKind::dense ? static_cast<size_t>(l.in_count)
                                             : static_cast<size_t>(l.in_c) * l.kh * l.kw;
    w.tap = std::max(1, ceil_log2(taps));
    w.oct = std::max(1, ceil_log2(static_cast<uint64_t>(t.n_o_w)));
    w.idx = std::max(1, ceil_log2(static_cast<uint64_t>(t.n_q_w)));
    return w;
}

class BitWriter {
public:
    void put(uint64_t v, int bits) {
        for (int b = 0; b < bits; ++b, ++bit_)
            if (v & (uint64_t{1} << b)) {
                if (bit_ / 8 >= bytes_.size()) bytes_.resize(bit_ / 8 + 1, 0);
                bytes_[bit_ / 8] |= static_cast<uint8_t>(1u << (bit_ % 8));
            }
        if ((bit_ + 7) / 8 > bytes_.size()) bytes_.resize((bit_ + 7) / 8, 0);
    }
    std::vector<uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<uint8_t> bytes_;
    size_t bit_ = 0;
};

class BitReader {
public:
    BitReader(const uint8_t* data, size_t bytes) : data_(data), bytes_(bytes) {}
    uint64_t get(int bits) {
        uint64_t v = 0;
        for (int b = 0; b < bits; ++b, ++bit_) {
            require(bit_ / 8 < bytes_, "log model: packed weight stream truncated");
            if (data_[bit_ / 8] & (1u << (bit_ % 8))) v |= uint64_t{1} << b;
        }
        return v;
    }

private:
    const uint8_t* data_;
    size_t bytes_;
    size_t bit_ = 0;
};

json codebook_levels_json(const Codebook& cb) {
    return json{{"scheme", scheme_name(cb.scheme)},
                {"levels", cb.levels},
                {"n_q", cb.n_q},
                {"n_o", cb.n_o},
                {"k_max", cb.k_max}};
}

Codebook codebook_levels_from_json(const json& j) {
    Codebook cb;
    cb.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    cb.levels = j.at("levels").get<std::vector<double>>();
    cb.n_q = j.at("n_q").get<int>();
    cb.n_o = j.at("n_o").get<int>();
    cb.k_max = j.at("k_max").get<double>();
    return cb;
}

} // namespace

std::vector<SectionBytes> log_section_bytes(const LogQuantModel& m) {
    std::vector<SectionBytes> out;
    out.push_back({"t_q", static_cast<uint64_t>(m.tables.t_q.size()) * 4});
    out.push_back({"t_q_inv", static_cast<uint64_t>(m.tables.t_q_inv.size()) * 2});
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const LogQuantLayer& l = m.layers[li];
        std::string p = "layer" + std::to_string(li) + ".";
        out.push_back({p + "unit_start", static_cast<uint64_t>(l.unit_start.size()) * 4});
        EntryWidths w = entry_widths(l, m.tables);
        out.push_back({p + "weights",
                       (static_cast<uint64_t>(l.weights.size()) * w.total() + 7) / 8});
        out.push_back({p + "bias", static_cast<uint64_t>(l.bias_log.size()) * 8});
    }
    return out;
}

void save_log_model(const LogQuantModel& m, const std::filesystem::path& path) {
    json j;
    j["format"] = "log-quantized-model";
    j["version"] = 1;
    j["n_q_w"] = m.tables.n_q_w;
    j["n_o_w"] = m.tables.n_o_w;
    j["n_q_a"] = m.tables.n_q_a;
    j["n_o_a"] = m.tables.n_o_a;
    j["e_act"] = m.tables.e_act;
    j["e_w"] = m.tables.e_w;
    j["p_bits"] = m.tables.p_bits;
    j["f_bits"] = m.tables.f_bits;
    j["headroom_bits"] = 63 - (m.tables.p_bits + m.tables.n_o_a + std::max(m.tables.e_w, 0) + 1);
    j["act_cap_v"] = m.act_cap_v;
    j["input_shape"] = m.input_shape;
    j["weight_codebook"] = codebook_levels_json(m.weight_cb);
    j["act_codebook"] = codebook_levels_json(m.act_cb);

    std::vector<uint8_t> payload;
    uint64_t off = payload.size();
    for (uint32_t v : m.tables.t_q) binio::put_u32(payload, v);
    j["t_q"] = {{"count", m.tables.t_q.size()}, {"offset", off}, {"bytes", payload.size() - off}};
    off = payload.size();
    for (uint16_t v : m.tables.t_q_inv) binio::put_u16(payload, v);
    j["t_q_inv"] = {{"count", m.tables.t_q_inv.size()}, {"offset", off},
                    {"bytes", payload.size() - off}};

    json jlayers = json::array();
    for (const LogQuantLayer& l : m.layers) {
        json jl;
        jl["kind"] = l.kind == LayerKind::dense ? "dense" : "conv2d";
        jl["activation"] = activation_name(l.activation);
        jl["in_count"] = l.in_count;
        jl["out_count"] = l.out_count;
        jl["out_channels"] = l.out_channels;
        jl["has_bias"] = l.has_bias;
        if (l.kind == LayerKind::conv2d) {
            jl["in_c"] = l.in_c;
            jl["in_h"] = l.in_h;
            jl["in_w"] = l.in_w;
            jl["kh"] = l.kh;
            jl["kw"] = l.kw;
            jl["stride"] = l.stride;
            jl["pad"] = l.pad;
        }

        off = payload.size();
        for (uint32_t u : l.unit_start) binio::put_u32(payload, u);
        jl["unit_start"] = {{"count", l.unit_start.size()}, {"offset", off},
                            {"bytes", payload.size() - off}};

        EntryWidths w = entry_widths(l, m.tables);
        BitWriter bw;
        for (const LogWeight& lw : l.weights) {
            bw.put(static_cast<uint64_t>(lw.tap), w.tap);
            bw.put(lw.sign > 0 ? 1 : 0, 1);
            bw.put(lw.octave, w.oct);
            bw.put(static_cast<uint64_t>(lw.index - 1), w.idx);
        }
        std::vector<uint8_t> packed = bw.take();
        off = payload.size();
        payload.insert(payload.end(), packed.begin(), packed.end());
        jl["weights"] = {{"count", l.weights.size()}, {"offset", off},
                         {"bytes", payload.size() - off}};

        off = payload.size();
        for (const LogValue& b : l.bias_log) {
            payload.push_back(static_cast<uint8_t>(static_cast<int8_t>(b.sign)));
            payload.push_back(0);
            payload.push_back(0);
            payload.push_back(0);
            binio::put_i32(payload, b.v);
        }
        jl["bias"] = {{"count", l.bias_log.size()}, {"offset", off},
                      {"bytes", payload.size() - off}};
        jlayers.push_back(std::move(jl));
    }
    j["layers"] = std::move(jlayers);

    std::string header = j.dump();
    std::vector<uint8_t> file;
    file.insert(file.end(), kLogMagic, kLogMagic + 8);
    binio::put_u32(file, static_cast<uint32_t>(header.size()));
    file.insert(file.end(), header.begin(), header.end());
    file.insert(file.end(), payload.begin(), payload.end());
    binio::write_file(path, file);
}

LogQuantModel load_log_model(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = binio::read_file(path);
    std::string name = path.string();
    require(bytes.size() >= 12 && std::memcmp(bytes.data(), kLogMagic, 8) == 0,
            "'", name, "': not a log-quantized-model file (bad magic)");
    binio::Reader rd{bytes, name};
    uint64_t hlen = rd.u32_at(8);
    require(12 + hlen <= bytes.size(), "'", name, "': truncated header");
    json j;
    try {
        j = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<ptrdiff_t>(hlen));
    } catch (const json::exception& e) {
        fail("'", name, "': header is not valid JSON: ", e.what());
    }
    require(j.value("format", "") == "log-quantized-model", "'", name,
            "': unexpected format field");
    uint64_t base = 12 + hlen;
    uint64_t payload_size = bytes.size() - base;

    auto section = [&](const json& js, uint64_t expect, const std::string& what) {
        uint64_t off = js.at("offset").get<uint64_t>();
        uint64_t len = js.at("bytes").get<uint64_t>();
        require(len == expect, "'", name, "': ", what, " holds ", len, " bytes, expected ", expect);
        require(off + len <= payload_size, "'", name, "': ", what, " overruns the payload");
        return base + off;
    };

    LogQuantModel m;
    m.weight_cb = codebook_levels_from_json(j.at("weight_codebook"));
    m.act_cb = codebook_levels_from_json(j.at("act_codebook"));
    m.tables = build_log_tables(j.at("n_q_w").get<int>(), j.at("n_o_w").get<int>(),
                                j.at("n_q_a").get<int>(), j.at("n_o_a").get<int>(),
                                j.at("e_act").get<int>(), j.at("e_w").get<int>());
    require(m.tables.p_bits == j.at("p_bits").get<int>() &&
                m.tables.f_bits == j.at("f_bits").get<int>(),
            "'", name, "': stored table scales do not match this build");
    m.act_cap_v = j.at("act_cap_v").get<int32_t>();
    m.input_shape = j.at("input_shape").get<std::vector<int>>();

    // Stored tables must be byte-identical to the reconstruction.
    const json& jtq = j.at("t_q");
    uint64_t o = section(jtq, static_cast<uint64_t>(m.tables.t_q.size()) * 4, "t_q");
    for (size_t i = 0; i < m.tables.t_q.size(); ++i)
        require(rd.u32_at(o + i * 4) == m.tables.t_q[i], "'", name, "': t_q entry ", i,
                " does not match the declared parameters");
    const json& jti = j.at("t_q_inv");
    o = section(jti, static_cast<uint64_t>(m.tables.t_q_inv.size()) * 2, "t_q_inv");
    for (size_t i = 0; i < m.tables.t_q_inv.size(); ++i)
        require(rd.u16_at(o + i * 2) == m.tables.t_q_inv[i], "'", name, "': t_q_inv entry ", i,
                " does not match the declared parameters");

    size_t li = 0;
    for (const auto& jl : j.at("layers")) {
        std::string tag = "layer " + std::to_string(li);
        LogQuantLayer l;
        l.kind = jl.at("kind").get<std::string>() == "dense" ? LayerKind::dense : LayerKind::conv2d;
        l.activation = activation_from_name(jl.at("activation").get<std::string>());
        l.in_count = jl.at("in_count").get<int>();
        l.out_count = jl.at("out_count").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
        l.has_bias = jl.at("has_bias").get<bool>();
        if (l.kind == LayerKind::conv2d) {
            l.in_c = jl.at("in_c").get<int>();
            l.in_h = jl.at("in_h").get<int>();
            l.in_w = jl.at("in_w").get<int>();
            l.kh = jl.at("kh").get<int>();
            l.kw = jl.at("kw").get<int>();
            l.stride = jl.at("stride").get<int>();
            l.pad = jl.at("pad").get<int>();
        }

        const json& jus = jl.at("unit_start");
        size_t us_count = jus.at("count").get<size_t>();
        require(us_count == static_cast<size_t>(l.out_channels) + 1, "'", name, "': ", tag,
                " unit_start count mismatch");
        o = section(jus, us_count * 4, tag + " unit_start");
        l.unit_start.resize(us_count);
        for (size_t i = 0; i < us_count; ++i) l.unit_start[i] = rd.u32_at(o + i * 4);

        const json& jw = jl.at("weights");
        size_t w_count = jw.at("count").get<size_t>();
        require(l.unit_start.back() == w_count, "'", name, "': ", tag,
                " unit offsets do not cover the weight stream");
        EntryWidths w = entry_widths(l, m.tables);
        uint64_t packed_bytes = (static_cast<uint64_t>(w_count) * w.total() + 7) / 8;
        o = section(jw, packed_bytes, tag + " weights");
        BitReader br(bytes.data() + o, packed_bytes);
        size_t taps = l.kind == LayerKind::dense ? static_cast<size_t>(l.in_count)
                                                 : static_cast<size_t>(l.in_c) * l.kh * l.kw;
        l.weights.resize(w_count);
        for (size_t i = 0; i < w_count; ++i) {
            LogWeight& lw = l.weights[i];
            lw.tap = static_cast<int32_t>(br.get(w.tap));
            require(lw.tap >= 0 && static_cast<size_t>(lw.tap) < taps, "'", name, "': ", tag,
                    " weight ", i, " tap out of range");
            lw.sign = br.get(1) ? int8_t{1} : int8_t{-1};
            lw.octave = static_cast<uint8_t>(br.get(w.oct));
            require(lw.octave < m.tables.n_o_w, "'", name, "': ", tag, " weight ", i,
                    " octave out of range");
            lw.index = static_cast<uint16_t>(br.get(w.idx) + 1);
            require(lw.index >= 1 && lw.index <= m.tables.n_q_w, "'", name, "': ", tag,
                    " weight ", i, " index out of range");
        }

        const json& jb = jl.at("bias");
        size_t b_count = jb.at("count").get<size_t>();
        require(b_count == static_cast<size_t>(l.out_channels), "'", name, "': ", tag,
                " bias count mismatch");
        o = section(jb, b_count * 8, tag + " bias");
        l.bias_log.resize(b_count);
        for (size_t i = 0; i < b_count; ++i) {
            int8_t s = static_cast<int8_t>(bytes[o + i * 8]);
            require(s == -1 || s == 0 || s == 1, "'", name, "': ", tag, " bias sign invalid");
            l.bias_log[i].sign = s;
            l.bias_log[i].v = rd.i32_at(o + i * 8 + 4);
        }
        m.layers.push_back(std::move(l));
        ++li;
    }
    m.finalize();
    return m;
}

} // namespace lutnn
