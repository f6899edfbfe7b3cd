#include "lutnn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "lutnn/common.hpp"

namespace lutnn {

Dataset make_two_moons(int n, double noise, uint64_t seed) {
    require(n >= 2, "two_moons: need at least 2 samples");
    Dataset d;
    d.feature_dim = 2;
    d.n_classes = 2;
    d.x.resize(static_cast<size_t>(n) * 2);
    d.y.resize(static_cast<size_t>(n));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, noise);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int half = n / 2;
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        double t = u(rng) * pi;
        double px, py;
        int label = i < half ? 0 : 1;
        if (label == 0) {
            px = std::cos(t);
            py = std::sin(t);
        } else {
            px = 1.0 - std::cos(t);
            py = 0.5 - std::sin(t);
        }
        d.x[static_cast<size_t>(i) * 2] = static_cast<float>(px + g(rng));
        d.x[static_cast<size_t>(i) * 2 + 1] = static_cast<float>(py + g(rng));
        d.y[static_cast<size_t>(i)] = label;
    }
    return d;
}

Dataset make_blobs(int n, int classes, double spread, uint64_t seed) {
    require(n >= classes && classes >= 2, "blobs: need n >= classes >= 2");
    Dataset d;
    d.feature_dim = 2;
    d.n_classes = classes;
    d.x.resize(static_cast<size_t>(n) * 2);
    d.y.resize(static_cast<size_t>(n));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, spread);
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        int label = i % classes;
        double ang = 2.0 * pi * label / classes;
        d.x[static_cast<size_t>(i) * 2] = static_cast<float>(2.0 * std::cos(ang) + g(rng));
        d.x[static_cast<size_t>(i) * 2 + 1] = static_cast<float>(2.0 * std::sin(ang) + g(rng));
        d.y[static_cast<size_t>(i)] = label;
    }
    return d;
}

namespace {

uint32_t read_be32(std::istream& f, const std::string& file) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    require(f.good(), "'", file, "': truncated IDX header");
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& f, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

} // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 double scale) {
    std::ifstream fi(images, std::ios::binary);
    require(fi.good(), "cannot open IDX image file '", images.string(), "'");
    uint32_t magic = read_be32(fi, images.string());
    require(magic == 0x00000803, "'", images.string(), "': IDX magic ", magic,
            " is not an image file (expected 2051)");
    uint32_t n = read_be32(fi, images.string());
    uint32_t rows = read_be32(fi, images.string());
    uint32_t cols = read_be32(fi, images.string());

    std::ifstream fl(labels, std::ios::binary);
    require(fl.good(), "cannot open IDX label file '", labels.string(), "'");
    uint32_t lmagic = read_be32(fl, labels.string());
    require(lmagic == 0x00000801, "'", labels.string(), "': IDX magic ", lmagic,
            " is not a label file (expected 2049)");
    uint32_t ln = read_be32(fl, labels.string());
    require(ln == n, "IDX pair mismatch: ", n, " images vs ", ln, " labels");

    Dataset d;
    d.feature_dim = static_cast<int>(rows * cols);
    d.x.resize(static_cast<size_t>(n) * rows * cols);
    d.y.resize(n);
    std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
    int max_label = 0;
    for (uint32_t i = 0; i < n; ++i) {
        fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        require(fi.good(), "'", images.string(), "': truncated at image ", i);
        for (size_t p = 0; p < buf.size(); ++p)
            d.x[static_cast<size_t>(i) * buf.size() + p] =
                static_cast<float>(buf[p] / 255.0 * scale);
        unsigned char lab;
        fl.read(reinterpret_cast<char*>(&lab), 1);
        require(fl.good(), "'", labels.string(), "': truncated at label ", i);
        d.y[i] = lab;
        max_label = std::max(max_label, static_cast<int>(lab));
    }
    d.n_classes = max_label + 1;
    return d;
}

void save_idx(const Dataset& d, int rows, int cols, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
    require(rows * cols == d.feature_dim, "save_idx: rows*cols != feature_dim");
    std::ofstream fi(images, std::ios::binary);
    require(fi.good(), "cannot open '", images.string(), "' for writing");
    write_be32(fi, 0x00000803);
    write_be32(fi, static_cast<uint32_t>(d.size()));
    write_be32(fi, static_cast<uint32_t>(rows));
    write_be32(fi, static_cast<uint32_t>(cols));
    for (float v : d.x) {
        unsigned char b = static_cast<unsigned char>(
            std::clamp(std::lround(static_cast<double>(v) * 255.0), 0L, 255L));
        fi.write(reinterpret_cast<char*>(&b), 1);
    }
    std::ofstream fl(labels, std::ios::binary);
    require(fl.good(), "cannot open '", labels.string(), "' for writing");
    write_be32(fl, 0x00000801);
    write_be32(fl, static_cast<uint32_t>(d.size()));
    for (int y : d.y) {
        unsigned char b = static_cast<unsigned char>(y);
        fl.write(reinterpret_cast<char*>(&b), 1);
    }
}

void split_dataset(const Dataset& d, double val_fraction, uint64_t seed, Dataset* train,
                   Dataset* val) {
    std::vector<size_t> order(d.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    size_t n_val = static_cast<size_t>(std::llround(val_fraction * static_cast<double>(d.size())));

    auto take = [&](size_t lo, size_t hi, Dataset* out) {
        out->feature_dim = d.feature_dim;
        out->n_classes = d.n_classes;
        out->x.resize((hi - lo) * static_cast<size_t>(d.feature_dim));
        out->y.resize(hi - lo);
        for (size_t i = lo; i < hi; ++i) {
            std::copy(d.row(order[i]), d.row(order[i]) + d.feature_dim,
                      out->x.begin() + static_cast<ptrdiff_t>((i - lo) * d.feature_dim));
            out->y[i - lo] = d.y[order[i]];
        }
    };
    take(n_val, d.size(), train);
    take(0, n_val, val);
}

} // namespace lutnn
