#pragma once

// Little-endian binary section helpers shared by the container formats.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lutnn/common.hpp"

namespace lutnn::binio {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_i32(std::vector<uint8_t>& out, int32_t v) { put_u32(out, static_cast<uint32_t>(v)); }
inline void put_i64(std::vector<uint8_t>& out, int64_t v) { put_u64(out, static_cast<uint64_t>(v)); }

struct Reader {
    const std::vector<uint8_t>& bytes;
    std::string file;

    uint64_t u64_at(uint64_t off) const {
        require(off + 8 <= bytes.size(), file, ": read past end at offset ", off);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes[off + i]) << (8 * i);
        return v;
    }
    uint32_t u32_at(uint64_t off) const {
        require(off + 4 <= bytes.size(), file, ": read past end at offset ", off);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes[off + i]) << (8 * i);
        return v;
    }
    uint16_t u16_at(uint64_t off) const {
        require(off + 2 <= bytes.size(), file, ": read past end at offset ", off);
        return static_cast<uint16_t>(bytes[off] | (bytes[off + 1] << 8));
    }
    int32_t i32_at(uint64_t off) const { return static_cast<int32_t>(u32_at(off)); }
    int64_t i64_at(uint64_t off) const { return static_cast<int64_t>(u64_at(off)); }
};

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    require(f.good(), "cannot open '", path.string(), "'");
    std::streamsize n = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(n));
    f.read(reinterpret_cast<char*>(bytes.data()), n);
    require(f.good(), "read failed for '", path.string(), "'");
    return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(f.good(), "write failed for '", path.string(), "'");
}

} // namespace lutnn::binio
