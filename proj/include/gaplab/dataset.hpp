#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaplab/rng.hpp"
#include "gaplab/vec.hpp"

namespace gaplab {

// Classification samples with one-hot targets, plus an optional IID
// assignment of sample indices to workers.
struct Dataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;                 // one-hot
    std::vector<std::vector<int>> shards;     // per-worker sample indices

    int size() const { return static_cast<int>(inputs.size()); }
    int input_dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }
    int classes() const { return targets.empty() ? 0 : static_cast<int>(targets.front().size()); }
};

// Gaussian clusters squashed through a logistic into [0,1], one cluster
// per class; class of sample i is i mod classes. The bounded nonnegative
// features mimic pixel intensities, which is what gives classification
// Hessians their characteristic top-C outlier structure.
inline Dataset generate_blobs(int classes, int dim, int n, double spread, std::uint64_t seed,
                              double center_scale = 3.0) {
    if (classes < 1 || dim < 1 || n < classes)
        throw std::invalid_argument("generate_blobs: require n >= classes >= 1");
    auto rng = make_rng(seed, 0xb10bULL);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Vec> centers(classes, Vec(dim));
    for (auto& c : centers)
        for (double& x : c) x = center_scale * gauss(rng);

    Dataset ds;
    ds.inputs.reserve(n);
    ds.targets.reserve(n);
    for (int i = 0; i < n; ++i) {
        const int cls = i % classes;
        Vec x = centers[cls];
        if (spread != 0.0)
            for (double& v : x) v += spread * gauss(rng);
        for (double& v : x) v = 1.0 / (1.0 + std::exp(-v));
        Vec y(classes, 0.0);
        y[cls] = 1.0;
        ds.inputs.push_back(std::move(x));
        ds.targets.push_back(std::move(y));
    }
    return ds;
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("load_idx: truncated file while reading " + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace detail

// IDX-format image/label pair (the MNIST container format). Pixels are
// scaled to [0,1]; labels become one-hot over the label alphabet 0..9.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int limit) {
    if (limit < 0) throw std::invalid_argument("load_idx: negative limit");

    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("load_idx: cannot open images file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("load_idx: cannot open labels file " + labels_path);

    const std::uint32_t img_magic = detail::read_be_u32(img, "image magic");
    if (img_magic != 0x00000803u)
        throw std::runtime_error("load_idx: bad image magic 0x" + std::to_string(img_magic) +
                                 " (expected 0x803)");
    const std::uint32_t lab_magic = detail::read_be_u32(lab, "label magic");
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("load_idx: bad label magic 0x" + std::to_string(lab_magic) +
                                 " (expected 0x801)");

    const std::uint32_t n_images = detail::read_be_u32(img, "image count");
    const std::uint32_t rows = detail::read_be_u32(img, "image rows");
    const std::uint32_t cols = detail::read_be_u32(img, "image cols");
    const std::uint32_t n_labels = detail::read_be_u32(lab, "label count");
    if (n_images != n_labels)
        throw std::runtime_error("load_idx: image/label count mismatch (" +
                                 std::to_string(n_images) + " vs " + std::to_string(n_labels) + ")");

    const int n = std::min<std::uint32_t>(limit, n_images);
    const std::size_t pixels = std::size_t(rows) * cols;

    Dataset ds;
    std::vector<unsigned char> buf(pixels);
    for (int i = 0; i < n; ++i) {
        img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!img) throw std::runtime_error("load_idx: truncated image data at sample " +
                                           std::to_string(i));
        Vec x(pixels);
        for (std::size_t p = 0; p < pixels; ++p) x[p] = buf[p] / 255.0;

        char lc;
        lab.read(&lc, 1);
        if (!lab) throw std::runtime_error("load_idx: truncated label data at sample " +
                                           std::to_string(i));
        const int label = static_cast<unsigned char>(lc);
        if (label > 9) throw std::runtime_error("load_idx: label out of range at sample " +
                                                std::to_string(i));
        Vec y(10, 0.0);
        y[label] = 1.0;
        ds.inputs.push_back(std::move(x));
        ds.targets.push_back(std::move(y));
    }
    return ds;
}

// Random-permutation IID split into M shards with sizes differing by at most 1.
inline void partition_iid(Dataset& ds, int M, std::uint64_t seed) {
    if (M < 1) throw std::invalid_argument("partition_iid: M must be >= 1");
    std::vector<int> perm(ds.size());
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = make_rng(seed, 0x9a47ULL);
    std::shuffle(perm.begin(), perm.end(), rng);

    ds.shards.assign(M, {});
    const int base = ds.size() / M;
    const int extra = ds.size() % M;
    int pos = 0;
    for (int i = 0; i < M; ++i) {
        const int count = base + (i < extra ? 1 : 0);
        ds.shards[i].assign(perm.begin() + pos, perm.begin() + pos + count);
        pos += count;
    }
}

}  // namespace gaplab
