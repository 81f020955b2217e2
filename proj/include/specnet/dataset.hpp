#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "specnet/errors.hpp"
#include "specnet/tensor.hpp"

namespace specnet {

// Images as per-channel maps with pixel values in [0,1] after loading;
// standardize() shifts them to zero mean / unit variance per channel using
// training-split statistics.
template <typename Real>
struct LabeledImageSet {
    index_t rows = 0;
    index_t cols = 0;
    index_t channels = 1;
    index_t num_classes = 0;
    std::vector<std::vector<DenseReal<Real>>> images; // [sample][channel]
    std::vector<index_t> labels;

    bool standardized = false;
    std::vector<Real> channel_mean; // affine params used by standardize()
    std::vector<Real> channel_std;

    index_t size() const { return images.size(); }

    void validate() const {
        if (images.size() != labels.size())
            throw ConsistencyError("LabeledImageSet: image/label count mismatch");
        for (index_t l : labels)
            if (l >= num_classes) throw ValueError("LabeledImageSet: label out of range");
    }
};

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

template <typename Real>
ChannelStats compute_channel_stats(const LabeledImageSet<Real>& set) {
    ChannelStats stats;
    stats.mean.assign(set.channels, 0.0);
    stats.stddev.assign(set.channels, 0.0);
    if (set.images.empty()) return stats;
    const double per_channel =
        static_cast<double>(set.images.size()) * set.rows * set.cols;
    for (const auto& sample : set.images)
        for (index_t c = 0; c < set.channels; ++c)
            for (Real v : sample[c].data) stats.mean[c] += v;
    for (auto& m : stats.mean) m /= per_channel;
    for (const auto& sample : set.images)
        for (index_t c = 0; c < set.channels; ++c)
            for (Real v : sample[c].data) {
                const double d = v - stats.mean[c];
                stats.stddev[c] += d * d;
            }
    for (auto& s : stats.stddev) s = std::sqrt(std::max(s / per_channel, 1e-12));
    return stats;
}

template <typename Real>
void standardize(LabeledImageSet<Real>& set, const ChannelStats& stats) {
    if (set.standardized) return;
    for (auto& sample : set.images)
        for (index_t c = 0; c < set.channels; ++c)
            for (auto& v : sample[c].data)
                v = static_cast<Real>((v - stats.mean[c]) / stats.stddev[c]);
    set.channel_mean.assign(stats.mean.begin(), stats.mean.end());
    set.channel_std.assign(stats.stddev.begin(), stats.stddev.end());
    set.standardized = true;
}

// Inverse of standardize(); recovers the [0,1] pixel values exactly up to
// rounding.
template <typename Real>
Real destandardize_pixel(const LabeledImageSet<Real>& set, index_t channel, Real value) {
    if (!set.standardized) return value;
    return static_cast<Real>(value * set.channel_std[channel] + set.channel_mean[channel]);
}

namespace dataset_detail {

inline std::vector<unsigned char> read_all_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off) {
    if (off + 4 > buf.size()) throw LengthError("IDX header truncated");
    return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
           (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

} // namespace dataset_detail

// MNIST-style IDX pair: big-endian headers, magic 0x00000803 for images and
// 0x00000801 for labels.
template <typename Real>
LabeledImageSet<Real> load_idx(const std::string& image_path, const std::string& label_path) {
    using namespace dataset_detail;
    const auto img = read_all_bytes(image_path);
    const auto lab = read_all_bytes(label_path);

    if (read_be32(img, 0) != 0x00000803u)
        throw FormatError("load_idx: bad image magic in " + image_path);
    if (read_be32(lab, 0) != 0x00000801u)
        throw FormatError("load_idx: bad label magic in " + label_path);

    const std::uint32_t count = read_be32(img, 4);
    const std::uint32_t rows = read_be32(img, 8);
    const std::uint32_t cols = read_be32(img, 12);
    const std::uint32_t label_count = read_be32(lab, 4);
    if (count != label_count)
        throw ConsistencyError("load_idx: image/label count mismatch");

    const std::size_t expected_img = 16 + std::size_t(count) * rows * cols;
    if (img.size() != expected_img)
        throw LengthError("load_idx: image payload length mismatch");
    if (lab.size() != 8 + std::size_t(count))
        throw LengthError("load_idx: label payload length mismatch");

    LabeledImageSet<Real> set;
    set.rows = rows;
    set.cols = cols;
    set.channels = 1;
    set.num_classes = 10;
    set.images.reserve(count);
    set.labels.reserve(count);
    std::size_t off = 16;
    for (std::uint32_t s = 0; s < count; ++s) {
        DenseReal<Real> map(rows, cols);
        for (index_t i = 0; i < map.data.size(); ++i)
            map.data[i] = static_cast<Real>(img[off + i]) / Real(255);
        off += map.data.size();
        set.images.push_back({std::move(map)});
        set.labels.push_back(lab[8 + s]);
    }
    set.validate();
    return set;
}

// CIFAR-10 binary batch: 3073-byte records, one label byte then 3072
// channel-major pixels.
template <typename Real>
LabeledImageSet<Real> load_cifar_bin(const std::string& path) {
    using namespace dataset_detail;
    const auto buf = read_all_bytes(path);
    constexpr std::size_t kRecord = 3073;
    if (buf.empty() || buf.size() % kRecord != 0)
        throw FormatError("load_cifar_bin: size not a multiple of 3073");

    LabeledImageSet<Real> set;
    set.rows = 32;
    set.cols = 32;
    set.channels = 3;
    set.num_classes = 10;
    const std::size_t count = buf.size() / kRecord;
    set.images.reserve(count);
    set.labels.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t base = s * kRecord;
        const unsigned char label = buf[base];
        if (label > 9) throw ValueError("load_cifar_bin: label byte out of range");
        std::vector<DenseReal<Real>> sample;
        sample.reserve(3);
        for (index_t c = 0; c < 3; ++c) {
            DenseReal<Real> map(32, 32);
            for (index_t i = 0; i < 1024; ++i)
                map.data[i] = static_cast<Real>(buf[base + 1 + c * 1024 + i]) / Real(255);
            sample.push_back(std::move(map));
        }
        set.images.push_back(std::move(sample));
        set.labels.push_back(label);
    }
    set.validate();
    return set;
}

// Deterministic two-class 12x12 set: class 0 a bright axis-aligned bar,
// class 1 a bright disc, both with smooth intensity profiles so their
// spectra are compact. The disc integrates to more brightness than the bar
// (margin ~3 over the noise floor), so the summed-pixel functional alone
// separates the classes linearly.
template <typename Real>
LabeledImageSet<Real> synthetic_shapes(index_t n, std::uint64_t seed) {
    if (n < 2) throw UsageError("synthetic_shapes: need at least two samples");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> noise(0.0, 0.12);
    std::uniform_real_distribution<double> bar_amp(0.80, 0.95);
    std::uniform_real_distribution<double> disc_amp(0.90, 1.0);
    std::uniform_int_distribution<int> bar_row(3, 8);
    std::uniform_int_distribution<int> center(5, 6);

    LabeledImageSet<Real> set;
    set.rows = 12;
    set.cols = 12;
    set.channels = 1;
    set.num_classes = 2;
    set.images.reserve(n);
    set.labels.reserve(n);
    for (index_t s = 0; s < n; ++s) {
        const index_t label = s % 2; // balanced round-robin
        DenseReal<Real> map(12, 12);
        for (auto& v : map.data) v = static_cast<Real>(noise(gen));
        if (label == 0) {
            const double r0 = bar_row(gen), a = bar_amp(gen);
            for (int r = 0; r < 12; ++r)
                for (int c = 0; c < 12; ++c) {
                    const double dr = (r - r0) / 1.4, dc = (c - 5.5) / 4.0;
                    map(r, c) += static_cast<Real>(
                        a * std::exp(-0.5 * (dr * dr + dc * dc * dc * dc)));
                }
        } else {
            const double cr = center(gen), cc = center(gen), a = disc_amp(gen);
            for (int r = 0; r < 12; ++r)
                for (int c = 0; c < 12; ++c) {
                    const double dr = (r - cr) / 2.5, dc = (c - cc) / 2.5;
                    map(r, c) += static_cast<Real>(a * std::exp(-0.5 * (dr * dr + dc * dc)));
                }
        }
        for (auto& v : map.data) v = std::min(v, Real(1));
        set.images.push_back({std::move(map)});
        set.labels.push_back(label);
    }
    set.validate();
    return set;
}

// Deterministic contiguous split; the tail becomes the test set.
template <typename Real>
std::pair<LabeledImageSet<Real>, LabeledImageSet<Real>> split_train_test(
    const LabeledImageSet<Real>& set, double test_fraction) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw UsageError("split_train_test: fraction must be in [0,1)");
    const index_t test_n = static_cast<index_t>(set.size() * test_fraction);
    const index_t train_n = set.size() - test_n;
    LabeledImageSet<Real> train = set, test = set;
    train.images.assign(set.images.begin(), set.images.begin() + train_n);
    train.labels.assign(set.labels.begin(), set.labels.begin() + train_n);
    test.images.assign(set.images.begin() + train_n, set.images.end());
    test.labels.assign(set.labels.begin() + train_n, set.labels.end());
    return {std::move(train), std::move(test)};
}

} // namespace specnet
