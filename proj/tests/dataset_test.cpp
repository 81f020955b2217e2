#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "specnet/dataset.hpp"

using namespace specnet;

namespace {

void append_be32(std::string& out, std::uint32_t v) {
    out.push_back(char((v >> 24) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char(v & 0xff));
}

std::string idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                       std::uint32_t magic = 0x00000803u) {
    std::string out;
    append_be32(out, magic);
    append_be32(out, count);
    append_be32(out, rows);
    append_be32(out, cols);
    for (std::uint32_t s = 0; s < count; ++s)
        for (std::uint32_t i = 0; i < rows * cols; ++i)
            out.push_back(char((s * 31 + i * 7) % 256));
    return out;
}

std::string idx_labels(std::uint32_t count, std::uint32_t magic = 0x00000801u) {
    std::string out;
    append_be32(out, magic);
    append_be32(out, count);
    for (std::uint32_t s = 0; s < count; ++s) out.push_back(char(s % 10));
    return out;
}

std::filesystem::path write_temp(const std::string& name, const std::string& bytes) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    return path;
}

} // namespace

TEST(LoadIdx, WellFormedFixture) {
    auto imgs = write_temp("specnet_idx_img.bin", idx_images(2, 28, 28));
    auto labs = write_temp("specnet_idx_lab.bin", idx_labels(2));
    auto set = load_idx<double>(imgs.string(), labs.string());
    EXPECT_EQ(set.size(), 2u);
    EXPECT_EQ(set.rows, 28u);
    EXPECT_EQ(set.cols, 28u);
    EXPECT_EQ(set.labels[1], 1u);
    for (double v : set.images[0][0].data) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(LoadIdx, RejectsWrongTypeMagic) {
    auto imgs = write_temp("specnet_idx_badmagic.bin", idx_images(2, 4, 4, 0x00000801u));
    auto labs = write_temp("specnet_idx_lab2.bin", idx_labels(2));
    EXPECT_THROW(load_idx<double>(imgs.string(), labs.string()), FormatError);
}

TEST(LoadIdx, RejectsTruncatedPayload) {
    auto bytes = idx_images(2, 4, 4);
    bytes.pop_back();
    auto imgs = write_temp("specnet_idx_trunc.bin", bytes);
    auto labs = write_temp("specnet_idx_lab3.bin", idx_labels(2));
    EXPECT_THROW(load_idx<double>(imgs.string(), labs.string()), LengthError);
}

TEST(LoadIdx, RejectsCountMismatch) {
    auto imgs = write_temp("specnet_idx_img4.bin", idx_images(2, 4, 4));
    auto labs = write_temp("specnet_idx_lab4.bin", idx_labels(3));
    EXPECT_THROW(load_idx<double>(imgs.string(), labs.string()), ConsistencyError);
}

TEST(LoadIdx, MissingFileIsDataError) {
    EXPECT_THROW(load_idx<double>("/nonexistent/images", "/nonexistent/labels"), DataError);
}

namespace {

std::string cifar_records(std::size_t count, unsigned char label0 = 3) {
    std::string out;
    for (std::size_t s = 0; s < count; ++s) {
        out.push_back(char(s == 0 ? label0 : (label0 + s) % 10));
        for (std::size_t i = 0; i < 3072; ++i) out.push_back(char((s + i) % 256));
    }
    return out;
}

} // namespace

TEST(LoadCifar, TwoRecordFixture) {
    auto path = write_temp("specnet_cifar2.bin", cifar_records(2));
    auto set = load_cifar_bin<double>(path.string());
    EXPECT_EQ(set.size(), 2u);
    EXPECT_EQ(set.channels, 3u);
    EXPECT_EQ(set.images[0].size(), 3u);
    EXPECT_EQ(set.images[0][0].rows, 32u);
    EXPECT_EQ(set.labels[0], 3u);
}

TEST(LoadCifar, RejectsBadSize) {
    auto path = write_temp("specnet_cifar_short.bin", std::string(3072, 'x'));
    EXPECT_THROW(load_cifar_bin<double>(path.string()), FormatError);
}

TEST(LoadCifar, RejectsLabelOutOfRange) {
    auto path = write_temp("specnet_cifar_badlabel.bin", cifar_records(1, 11));
    EXPECT_THROW(load_cifar_bin<double>(path.string()), ValueError);
}

TEST(SyntheticShapes, DeterministicForFixedSeed) {
    auto a = synthetic_shapes<double>(16, 42);
    auto b = synthetic_shapes<double>(16, 42);
    ASSERT_EQ(a.size(), b.size());
    for (index_t s = 0; s < a.size(); ++s) {
        EXPECT_EQ(a.labels[s], b.labels[s]);
        EXPECT_EQ(a.images[s][0].data, b.images[s][0].data);
    }
}

TEST(SyntheticShapes, BalancedRoundRobin) {
    auto set = synthetic_shapes<double>(2, 7);
    EXPECT_EQ(set.labels[0], 0u);
    EXPECT_EQ(set.labels[1], 1u);
}

TEST(SyntheticShapes, RejectsTooFewSamples) {
    EXPECT_THROW(synthetic_shapes<double>(1, 7), UsageError);
}

TEST(SyntheticShapes, BrightnessSeparatesClasses) {
    auto set = synthetic_shapes<double>(64, 9);
    double max_bar = 0.0, min_disc = 1e9;
    for (index_t s = 0; s < set.size(); ++s) {
        double total = 0;
        for (double v : set.images[s][0].data) total += v;
        if (set.labels[s] == 0)
            max_bar = std::max(max_bar, total);
        else
            min_disc = std::min(min_disc, total);
    }
    EXPECT_LT(max_bar, min_disc); // linear separability by construction
}

TEST(Standardize, ZeroMeanUnitVarianceAndExactRoundTrip) {
    auto imgs = write_temp("specnet_idx_std.bin", idx_images(4, 6, 6));
    auto labs = write_temp("specnet_idx_std_lab.bin", idx_labels(4));
    auto set = load_idx<double>(imgs.string(), labs.string());
    auto raw = set.images; // [0,1] values before standardization
    auto stats = compute_channel_stats(set);
    standardize(set, stats);

    double mean = 0;
    for (const auto& sample : set.images)
        for (double v : sample[0].data) mean += v;
    mean /= static_cast<double>(set.size() * set.rows * set.cols);
    EXPECT_NEAR(mean, 0.0, 1e-12);

    // De-normalization reproduces the raw bytes exactly after rounding.
    for (index_t s = 0; s < set.size(); ++s)
        for (index_t i = 0; i < set.images[s][0].data.size(); ++i) {
            const double back = destandardize_pixel(set, 0, set.images[s][0].data[i]);
            EXPECT_EQ(std::lround(back * 255.0), std::lround(raw[s][0].data[i] * 255.0));
        }
}

TEST(SplitTrainTest, ContiguousDeterministicSplit) {
    auto set = synthetic_shapes<double>(10, 3);
    auto [train, test] = split_train_test(set, 0.2);
    EXPECT_EQ(train.size(), 8u);
    EXPECT_EQ(test.size(), 2u);
    EXPECT_EQ(test.images[0][0].data, set.images[8][0].data);
}
