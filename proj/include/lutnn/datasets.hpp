#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lutnn {

struct Dataset {
    int feature_dim = 0;
    int n_classes = 0;
    std::vector<float> x; // row-major [n, feature_dim]
    std::vector<int> y;

    size_t size() const { return y.size(); }
    const float* row(size_t i) const { return x.data() + i * static_cast<size_t>(feature_dim); }
};

// Two interleaved half-circles with Gaussian noise.
Dataset make_two_moons(int n, double noise, uint64_t seed);

// Isotropic Gaussian clusters on a ring.
Dataset make_blobs(int n, int classes, double spread, uint64_t seed);

// IDX-format image/label pair (big-endian header, uint8 payload). Pixels
// are scaled to [0, scale].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 double scale = 1.0);
void save_idx(const Dataset& d, int rows, int cols, const std::filesystem::path& images,
              const std::filesystem::path& labels); // for tests and tooling

// Deterministic split; val_fraction of the samples go to `val`.
void split_dataset(const Dataset& d, double val_fraction, uint64_t seed, Dataset* train,
                   Dataset* val);

} // namespace lutnn
