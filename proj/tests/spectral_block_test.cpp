#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "specnet/network.hpp"
#include "specnet/spectral_block.hpp"
#include "test_util.hpp"

using namespace specnet;
using specnet::testing::random_dense;
using specnet::testing::max_abs_diff;

namespace {

SpecConvLayer<double> single_layer(const DenseReal<double>& k, double beta) {
    SpecConvLayer<double> layer(1, 1, k.rows, Beta<double>(beta));
    layer.kernel(0, 0) = k;
    return layer;
}

DenseReal<double> real_part(const SpectralMap<double>& x) {
    DenseReal<double> out(x.rows, x.cols);
    for (index_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i].real();
    return out;
}

// Circular convolution oracle for the no-repadding deep-layer contract.
DenseReal<double> circular_conv(const DenseReal<double>& a, const DenseReal<double>& k) {
    DenseReal<double> y(a.rows, a.cols);
    for (index_t i = 0; i < a.rows; ++i)
        for (index_t j = 0; j < a.cols; ++j) {
            double acc = 0;
            for (index_t m = 0; m < a.rows; ++m)
                for (index_t n = 0; n < a.cols; ++n)
                    acc += a(m, n) * k((i + a.rows - m) % a.rows, (j + a.cols - n) % a.cols);
            y(i, j) = acc;
        }
    return y;
}

double sum_sq(const std::vector<SparseSpectralMap<double>>& Z) {
    double acc = 0;
    for (const auto& ch : Z)
        for (const auto& e : ch.entries) acc += std::norm(e.value);
    return acc;
}

} // namespace

TEST(Activate, ZeroMapsToZero) {
    SparseSpectralMap<double> Y(2, 2);
    Y.entries.push_back({0, 0, {0.0, 0.0}});
    auto Z = activate(Y);
    EXPECT_EQ(Z.entries[0].value, std::complex<double>(0.0, 0.0));
}

TEST(Activate, UnitRealComponent) {
    SparseSpectralMap<double> Y(1, 1);
    Y.entries.push_back({0, 0, {1.0, 0.0}});
    auto Z = activate(Y);
    EXPECT_NEAR(Z.entries[0].value.real(), 0.7615941559557649, 1e-15);
    EXPECT_EQ(Z.entries[0].value.imag(), 0.0);
}

TEST(Activate, CommutesWithConjugation) {
    auto gen = specnet::testing::rng(3);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int i = 0; i < 32; ++i) {
        const std::complex<double> z(dist(gen), dist(gen));
        SparseSpectralMap<double> a(1, 1), b(1, 1);
        a.entries.push_back({0, 0, z});
        b.entries.push_back({0, 0, std::conj(z)});
        const auto fz = activate(a).entries[0].value;
        const auto fcz = activate(b).entries[0].value;
        EXPECT_EQ(fcz, std::conj(fz));
    }
}

TEST(Activate, PreservesSupport) {
    auto gen = specnet::testing::rng(9);
    auto Y = threshold_to_sparse(fft2d(random_dense(5, 5, gen)), Beta<double>(1.0));
    auto Z = activate(Y);
    ASSERT_EQ(Z.entries.size(), Y.entries.size());
    for (index_t i = 0; i < Y.entries.size(); ++i) {
        EXPECT_EQ(Z.entries[i].row, Y.entries[i].row);
        EXPECT_EQ(Z.entries[i].col, Y.entries[i].col);
    }
}

TEST(SpecConvForward, MatchesSpatialReferenceAtZeroBeta) {
    auto gen = specnet::testing::rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = random_dense(5, 5, gen);
        auto k = random_dense(3, 3, gen);
        auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k, 0.0));
        EXPECT_EQ(r.Z[0].rows, 7u);
        EXPECT_EQ(r.Z[0].cols, 7u);
        auto y_fft = real_part(ifft2d(densify(r.cache.Yhat[0])));
        auto y_ref = spatial_conv_reference(x, k);
        EXPECT_LT(max_abs_diff(y_fft, y_ref), 1e-8);
    }
}

TEST(SpecConvForward, ZeroKernelGivesEmptyOutput) {
    auto gen = specnet::testing::rng(22);
    auto x = random_dense(4, 4, gen);
    DenseReal<double> k(3, 3);
    auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k, 0.0));
    EXPECT_TRUE(r.Z[0].entries.empty());
}

TEST(SpecConvForward, SpectralInputRunsCircularConvolution) {
    auto gen = specnet::testing::rng(23);
    auto x = random_dense(4, 4, gen);
    auto k1 = random_dense(3, 3, gen);
    auto k2 = random_dense(3, 3, gen);
    auto r1 = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k1, 0.0));
    auto r2 = spec_conv_forward(r1.Z, single_layer(k2, 0.0));
    EXPECT_EQ(r2.Z[0].rows, 6u); // dims unchanged: no re-padding in deep layers
    EXPECT_EQ(r2.Z[0].cols, 6u);

    auto z1 = real_part(ifft2d(densify(r1.Z[0])));
    auto k2_padded = zero_pad(k2, PadSpec{6, 6});
    auto y_ref = circular_conv(z1, k2_padded);
    auto y_fft = real_part(ifft2d(densify(r2.cache.Yhat[0])));
    EXPECT_LT(max_abs_diff(y_fft, y_ref), 1e-8);
}

TEST(SpecConvForward, RejectsSpectralInputSmallerThanKernel) {
    SparseSpectralMap<double> x(2, 2);
    x.entries.push_back({0, 0, {1.0, 0.0}});
    SpecConvLayer<double> layer(1, 1, 3, Beta<double>(0.0));
    EXPECT_THROW(spec_conv_forward(std::vector<SparseSpectralMap<double>>{x}, layer),
                 DimensionError);
}

TEST(SpecConvForward, EntryCountMonotoneInBeta) {
    auto gen = specnet::testing::rng(25);
    auto x = random_dense(6, 6, gen);
    auto k = random_dense(3, 3, gen);
    index_t prev = static_cast<index_t>(-1);
    for (double beta : {0.0, 0.5, 1.0, 1.5, 2.0}) {
        auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k, beta));
        EXPECT_LE(r.Z[0].entries.size(), prev);
        prev = r.Z[0].entries.size();
    }
}

TEST(SpecConvForward, HermitianAfterThresholdAndActivation) {
    auto gen = specnet::testing::rng(27);
    for (double beta : {0.0, 0.5, 1.0, 1.5}) {
        auto x = random_dense(6, 5, gen);
        auto k = random_dense(3, 3, gen);
        auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k, beta));
        EXPECT_TRUE(check_hermitian(densify(r.Z[0]), 1e-9));
    }
}

TEST(SpecConvBackward, ZeroGradientGivesZeroGrads) {
    auto gen = specnet::testing::rng(31);
    auto x = random_dense(4, 4, gen);
    auto k = random_dense(3, 3, gen);
    auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k, 0.0));
    std::vector<SparseSpectralMap<double>> gz{SparseSpectralMap<double>(6, 6)};
    auto grads = spec_conv_backward(gz, r.cache, single_layer(k, 0.0));
    for (double v : grads.kernel[0].data) EXPECT_EQ(v, 0.0);
    for (double v : grads.input_spatial[0].data) EXPECT_EQ(v, 0.0);
}

TEST(SpecConvBackward, RejectsGradientOffSupport) {
    auto gen = specnet::testing::rng(33);
    auto x = random_dense(4, 4, gen);
    auto k = random_dense(3, 3, gen);
    auto layer = single_layer(k, 1e9); // threshold everything away
    auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, layer);
    ASSERT_TRUE(r.cache.Yhat[0].entries.empty());
    std::vector<SparseSpectralMap<double>> gz{SparseSpectralMap<double>(6, 6)};
    gz[0].entries.push_back({0, 0, {1.0, 0.0}});
    EXPECT_THROW(spec_conv_backward(gz, r.cache, layer), StructuralError);
}

TEST(SpecConvBackward, ScalarChainMatchesFiniteDifference) {
    const double x0 = 0.6, w0 = 0.8;
    auto make = [](double v) { return DenseReal<double>(1, 1, {v}); };
    auto loss_of = [&](double x, double w) {
        auto r = spec_conv_forward(std::vector<DenseReal<double>>{make(x)},
                                   single_layer(make(w), 0.0));
        return r.Z[0].entries.empty() ? 0.0 : r.Z[0].entries[0].value.real();
    };
    auto r = spec_conv_forward(std::vector<DenseReal<double>>{make(x0)},
                               single_layer(make(w0), 0.0));
    std::vector<SparseSpectralMap<double>> gz{SparseSpectralMap<double>(1, 1)};
    gz[0].entries.push_back({0, 0, {1.0, 0.0}});
    auto grads = spec_conv_backward(gz, r.cache, single_layer(make(w0), 0.0));

    const double h = 1e-6;
    const double fd_w = (loss_of(x0, w0 + h) - loss_of(x0, w0 - h)) / (2 * h);
    const double fd_x = (loss_of(x0 + h, w0) - loss_of(x0 - h, w0)) / (2 * h);
    EXPECT_NEAR(grads.kernel[0](0, 0), fd_w, 1e-6);
    EXPECT_NEAR(grads.input_spatial[0](0, 0), fd_x, 1e-6);
}

TEST(SpecConvBackward, KernelGradMatchesFiniteDifferenceSweep) {
    auto gen = specnet::testing::rng(37);
    auto x = random_dense(4, 4, gen);
    auto k = random_dense(3, 3, gen);
    const double beta = 0.5;

    auto loss_of = [&](const DenseReal<double>& kk) {
        auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(kk, beta));
        return sum_sq(r.Z);
    };

    auto r = spec_conv_forward(std::vector<DenseReal<double>>{x}, single_layer(k, beta));
    // Stay away from the threshold discontinuity: no |Y| within 1e-4 of beta.
    {
        SpectralMap<double> Yfull(6, 6);
        for (index_t n = 0; n < Yfull.size(); ++n)
            Yfull.data[n] = r.cache.X[0].data[n] * r.cache.K[0].data[n];
        for (const auto& v : Yfull.data)
            ASSERT_GT(std::abs(std::abs(v) - beta), 1e-4) << "seed hits threshold margin";
    }

    std::vector<SparseSpectralMap<double>> gz{r.Z[0]};
    for (auto& e : gz[0].entries) e.value *= 2.0; // d/dz of |z|^2 as a real pair
    auto grads = spec_conv_backward(gz, r.cache, single_layer(k, beta));

    const double h = 1e-5;
    for (index_t a = 0; a < 3; ++a)
        for (index_t b = 0; b < 3; ++b) {
            auto kp = k, km = k;
            kp(a, b) += h;
            km(a, b) -= h;
            const double fd = (loss_of(kp) - loss_of(km)) / (2 * h);
            const double an = grads.kernel[0](a, b);
            EXPECT_NEAR(an, fd, 1e-4 * std::max({1.0, std::abs(fd), std::abs(an)}));
        }
}

TEST(SpectralDownsample, IdentityWhenTargetEqualsSource) {
    auto gen = specnet::testing::rng(41);
    auto X = fft2d(random_dense(8, 8, gen));
    auto Y = spectral_downsample(X, 8, 8);
    EXPECT_LT(max_abs_diff(Y, X), 1e-12);
}

TEST(SpectralDownsample, PreservesHermitianStructure) {
    auto gen = specnet::testing::rng(43);
    auto X = fft2d(random_dense(8, 9, gen));
    for (auto [tr, tc] : {std::pair<index_t, index_t>{4, 4}, {5, 5}, {3, 4}, {8, 3}}) {
        auto Y = spectral_downsample(X, tr, tc);
        EXPECT_TRUE(check_hermitian(Y, 1e-9)) << tr << "x" << tc;
    }
}

TEST(SpectralDownsample, ConstantMapStaysConstant) {
    DenseReal<double> x(8, 8);
    for (auto& v : x.data) v = 3.25;
    auto Y = spectral_downsample(fft2d(x), 4, 4);
    auto y = ifft2d(Y);
    for (const auto& v : y.data) {
        EXPECT_NEAR(v.real(), 3.25, 1e-9);
        EXPECT_NEAR(v.imag(), 0.0, 1e-9);
    }
}

TEST(SpectralDownsample, RejectsGrowingTarget) {
    SpectralMap<double> X(4, 4);
    EXPECT_THROW(spectral_downsample(X, 5, 4), DimensionError);
}

TEST(SpectralDownsample, AdjointSatisfiesDotProductIdentity) {
    auto gen = specnet::testing::rng(47);
    for (auto [tr, tc] : {std::pair<index_t, index_t>{4, 4}, {5, 3}, {4, 7}}) {
        auto x = specnet::testing::random_spectral(8, 7, gen);
        auto y = specnet::testing::random_spectral(tr, tc, gen);
        auto Ax = spectral_downsample(x, tr, tc);
        auto Aty = spectral_downsample_adjoint(y, 8, 7);
        // packed-real inner products
        double lhs = 0, rhs = 0;
        for (index_t i = 0; i < Ax.data.size(); ++i)
            lhs += Ax.data[i].real() * y.data[i].real() + Ax.data[i].imag() * y.data[i].imag();
        for (index_t i = 0; i < x.data.size(); ++i)
            rhs += x.data[i].real() * Aty.data[i].real() + x.data[i].imag() * Aty.data[i].imag();
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}
