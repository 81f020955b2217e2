#include <gtest/gtest.h>

#include <cmath>

#include "specnet/checkpoint.hpp"
#include "specnet/dataset.hpp"
#include "specnet/optimizer.hpp"

using namespace specnet;

namespace {

ModelSpec mini_spec(RunMode mode, const LabeledImageSet<double>& data, index_t conv_ch = 4) {
    ModelSpec spec;
    spec.mode = mode;
    spec.input_rows = data.rows;
    spec.input_cols = data.cols;
    spec.input_channels = data.channels;
    spec.num_classes = data.num_classes;
    spec.layers = {LayerDesc::conv(conv_ch, 3), LayerDesc::to_spatial(),
                   LayerDesc::flatten(), LayerDesc::dense(data.num_classes)};
    return spec;
}

template <typename Real>
std::vector<std::vector<DenseReal<Real>>> head_batch(const LabeledImageSet<Real>& set,
                                                     index_t n) {
    std::vector<std::vector<DenseReal<Real>>> out;
    for (index_t s = 0; s < std::min(n, set.size()); ++s) out.push_back(set.images[s]);
    return out;
}

Model<double> make_trained_ready(RunMode mode, const LabeledImageSet<double>& train,
                                 double beta, std::uint64_t seed) {
    auto model = build_model<double>(mini_spec(mode, train), beta);
    std::mt19937_64 gen(seed);
    init_params(model, gen);
    calibrate_model_scale(model, head_batch(train, 16), 0.5);
    return model;
}

} // namespace

TEST(LrSchedule, PaperValues) {
    TrainConfig cfg;
    cfg.initial_lr = 0.02;
    cfg.lr_halving_period = 50;
    EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 0), 0.02);
    EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 49), 0.02);
    EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, 100), 0.005);
}

TEST(LrSchedule, PiecewiseConstantHalving) {
    TrainConfig cfg;
    cfg.initial_lr = 0.02;
    cfg.lr_halving_period = 50;
    for (index_t e = 0; e < 200; ++e) {
        const double expected = 0.02 * std::pow(0.5, static_cast<double>(e / 50));
        EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, e), expected);
        if (e % 50 != 0) {
            EXPECT_DOUBLE_EQ(lr_at_epoch(cfg, e), lr_at_epoch(cfg, e - 1));
        }
    }
}

TEST(SgdMomentum, ZeroGradientLeavesParamsUnchanged) {
    std::vector<double> w = {1.0, -2.0};
    std::vector<double> g = {0.0, 0.0};
    std::vector<std::span<double>> params{std::span<double>(w)};
    std::vector<std::span<const double>> grads{std::span<const double>(g)};
    auto state = SgdState<double>::zeros_like(params, 0.95);
    sgd_momentum_step(params, grads, state, 0.1);
    EXPECT_EQ(w[0], 1.0);
    EXPECT_EQ(w[1], -2.0);
}

TEST(SgdMomentum, PlainSgdStep) {
    std::vector<double> w = {1.0};
    std::vector<double> g = {2.0};
    std::vector<std::span<double>> params{std::span<double>(w)};
    std::vector<std::span<const double>> grads{std::span<const double>(g)};
    auto state = SgdState<double>::zeros_like(params, 0.0);
    sgd_momentum_step(params, grads, state, 0.1);
    EXPECT_NEAR(w[0], 0.8, 1e-15);
}

TEST(SgdMomentum, TwoStepRecurrence) {
    std::vector<double> w = {0.0};
    std::vector<double> g = {1.0};
    std::vector<std::span<double>> params{std::span<double>(w)};
    std::vector<std::span<const double>> grads{std::span<const double>(g)};
    auto state = SgdState<double>::zeros_like(params, 0.95);
    sgd_momentum_step(params, grads, state, 0.02);
    EXPECT_NEAR(w[0], -0.02, 1e-15);
    sgd_momentum_step(params, grads, state, 0.02);
    EXPECT_NEAR(w[0], -0.059, 1e-15); // v2 = 0.95*(-0.02) - 0.02
}

TEST(SgdMomentum, RejectsShapeMismatch) {
    std::vector<double> w = {1.0};
    std::vector<double> g = {1.0, 2.0};
    std::vector<std::span<double>> params{std::span<double>(w)};
    std::vector<std::span<const double>> grads{std::span<const double>(g)};
    auto state = SgdState<double>::zeros_like(params, 0.9);
    EXPECT_THROW(sgd_momentum_step(params, grads, state, 0.1), DimensionError);
}

TEST(Train, SingleEpochProducesOneRow) {
    auto data = synthetic_shapes<double>(64, 11);
    auto stats = compute_channel_stats(data);
    standardize(data, stats);
    auto model = make_trained_ready(RunMode::Spectral, data, 0.5, 11);

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.beta = 0.5;
    cfg.seed = 11;
    LabeledImageSet<double> empty_test = data;
    empty_test.images.clear();
    empty_test.labels.clear();
    auto report = train(model, cfg, data, empty_test);
    ASSERT_EQ(report.rows.size(), 1u);
    EXPECT_TRUE(std::isfinite(report.rows[0].loss));
    EXPECT_FALSE(report.ledger.empty());
}

TEST(Train, DeterministicMetricsForFixedSeed) {
    auto data = synthetic_shapes<double>(32, 13);
    auto stats = compute_channel_stats(data);
    standardize(data, stats);
    LabeledImageSet<double> empty_test = data;
    empty_test.images.clear();
    empty_test.labels.clear();

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.beta = 0.5;
    cfg.seed = 99;

    auto m1 = make_trained_ready(RunMode::Spectral, data, cfg.beta, 99);
    auto r1 = train(m1, cfg, data, empty_test);
    auto m2 = make_trained_ready(RunMode::Spectral, data, cfg.beta, 99);
    auto r2 = train(m2, cfg, data, empty_test);
    EXPECT_EQ(metrics_csv(r1.rows), metrics_csv(r2.rows));
    EXPECT_EQ(ledger_csv(r1.ledger), ledger_csv(r2.ledger));
}

TEST(Train, LossDecreasesOnSeparableData) {
    auto data = synthetic_shapes<double>(64, 17);
    auto stats = compute_channel_stats(data);
    standardize(data, stats);
    LabeledImageSet<double> empty_test = data;
    empty_test.images.clear();
    empty_test.labels.clear();

    for (RunMode mode : {RunMode::Spectral, RunMode::SpatialBaseline}) {
        TrainConfig cfg;
        cfg.epochs = 15;
        cfg.beta = mode == RunMode::Spectral ? 0.5 : 0.0;
        cfg.seed = 17;
        auto model = make_trained_ready(mode, data, cfg.beta, 17);
        auto report = train(model, cfg, data, empty_test);
        EXPECT_LT(report.rows.back().loss, report.rows.front().loss)
            << (mode == RunMode::Spectral ? "spectral" : "baseline");
    }
}

TEST(Checkpoint, RoundTripPreservesEverything) {
    auto data = synthetic_shapes<double>(8, 19);
    auto model = make_trained_ready(RunMode::Spectral, data, 1.0, 19);
    ChannelStats stats{{0.25}, {0.5}};
    const auto bytes = serialize_checkpoint(model, stats);
    auto loaded = deserialize_checkpoint<double>(bytes);

    ASSERT_EQ(loaded.model.convs.size(), model.convs.size());
    for (index_t c = 0; c < model.convs.size(); ++c)
        for (index_t k = 0; k < model.convs[c].kernels.size(); ++k)
            EXPECT_EQ(loaded.model.convs[c].kernels[k].data, model.convs[c].kernels[k].data);
    for (index_t l = 0; l < model.dense.size(); ++l) {
        EXPECT_EQ(loaded.model.dense[l].weights.data, model.dense[l].weights.data);
        EXPECT_EQ(loaded.model.dense[l].bias, model.dense[l].bias);
    }
    EXPECT_EQ(loaded.stats.mean, stats.mean);
    EXPECT_EQ(loaded.model.spec.mode, RunMode::Spectral);

    // Same logits after reload.
    auto a = model_forward(model, data.images[0], false);
    auto b = model_forward(loaded.model, data.images[0], false);
    EXPECT_EQ(a.logits, b.logits);
}

TEST(Checkpoint, RejectsBadMagic) {
    auto data = synthetic_shapes<double>(8, 19);
    auto model = make_trained_ready(RunMode::Spectral, data, 1.0, 19);
    auto bytes = serialize_checkpoint(model);
    bytes[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint<double>(bytes), FormatError);
}

TEST(Checkpoint, RejectsTruncation) {
    auto data = synthetic_shapes<double>(8, 19);
    auto model = make_trained_ready(RunMode::Spectral, data, 1.0, 19);
    auto bytes = serialize_checkpoint(model);
    bytes.resize(bytes.size() / 2);
    EXPECT_THROW(deserialize_checkpoint<double>(bytes), LengthError);
}
