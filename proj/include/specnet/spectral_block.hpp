#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "specnet/errors.hpp"
#include "specnet/fft.hpp"
#include "specnet/tensor.hpp"

namespace specnet {

// Spectral convolutional layer. Kernels are kept in the spatial domain
// (N_k x N_k per (out-channel, in-channel) pair) and transformed on use.
template <typename Real>
struct SpecConvLayer {
    index_t in_channels = 1;
    index_t out_channels = 1;
    index_t kernel_size = 1;
    std::vector<DenseReal<Real>> kernels; // [out * in_channels + in]
    Beta<Real> beta;

    SpecConvLayer() = default;
    SpecConvLayer(index_t in_ch, index_t out_ch, index_t nk, Beta<Real> b)
        : in_channels(in_ch), out_channels(out_ch), kernel_size(nk), beta(b) {
        if (nk < 1) throw DimensionError("SpecConvLayer: kernel size must be >= 1");
        kernels.assign(in_ch * out_ch, DenseReal<Real>(nk, nk));
    }

    DenseReal<Real>& kernel(index_t out, index_t in) {
        return kernels[out * in_channels + in];
    }
    const DenseReal<Real>& kernel(index_t out, index_t in) const {
        return kernels[out * in_channels + in];
    }
};

// Saved forward state for the backward pass. The threshold support is the
// index set of the Yhat entries.
template <typename Real>
struct BlockCache {
    bool input_was_spatial = true;
    index_t input_rows = 0; // original M (spatial) or M' (spectral)
    index_t input_cols = 0;
    index_t spec_rows = 0; // M'
    index_t spec_cols = 0; // N'
    std::vector<SpectralMap<Real>> X;              // per in-channel, spatial path
    std::vector<SparseSpectralMap<Real>> X_sparse; // per in-channel, spectral path
    std::vector<SpectralMap<Real>> K;              // per (out, in) pair
    std::vector<SparseSpectralMap<Real>> Yhat;     // per out-channel, pre-activation
};

template <typename Real>
struct SpecConvResult {
    std::vector<SparseSpectralMap<Real>> Z; // per out-channel
    BlockCache<Real> cache;
};

// f(a+ib) = tanh(a) + i*tanh(b) applied entrywise; the index set is
// unchanged (tanh maps zero to zero and nothing else to zero).
template <typename Real>
SparseSpectralMap<Real> activate(const SparseSpectralMap<Real>& Yhat) {
    SparseSpectralMap<Real> Z(Yhat.rows, Yhat.cols);
    Z.entries.reserve(Yhat.entries.size());
    for (const auto& e : Yhat.entries)
        Z.entries.push_back(
            {e.row, e.col,
             {std::tanh(e.value.real()), std::tanh(e.value.imag())}});
    return Z;
}

namespace block_detail {

template <typename Real>
void check_layer(const SpecConvLayer<Real>& layer) {
    if (layer.kernel_size < 1)
        throw DimensionError("spec_conv: kernel size must be >= 1");
    if (layer.kernels.size() != layer.in_channels * layer.out_channels)
        throw DimensionError("spec_conv: kernel bank does not match channel counts");
}

// Shared tail of Algorithm 1: elementwise products summed over in-channels,
// then threshold and activation per out-channel.
template <typename Real>
SpecConvResult<Real> finish_forward(BlockCache<Real>&& cache,
                                    const SpecConvLayer<Real>& layer,
                                    const std::vector<SpectralMap<Real>>& X_dense) {
    const index_t rows = cache.spec_rows, cols = cache.spec_cols;
    SpecConvResult<Real> result;
    result.Z.reserve(layer.out_channels);
    cache.Yhat.reserve(layer.out_channels);
    for (index_t o = 0; o < layer.out_channels; ++o) {
        SpectralMap<Real> Y(rows, cols);
        for (index_t i = 0; i < layer.in_channels; ++i) {
            const auto& K = cache.K[o * layer.in_channels + i];
            const auto& X = X_dense[i];
            for (index_t n = 0; n < Y.size(); ++n) Y.data[n] += X.data[n] * K.data[n];
        }
        auto Yhat = threshold_to_sparse(Y, layer.beta);
        result.Z.push_back(activate(Yhat));
        cache.Yhat.push_back(std::move(Yhat));
    }
    result.cache = std::move(cache);
    return result;
}

} // namespace block_detail

// Algorithm 1, spatial input: zero-pad x and kernel to (M+N_k-1, N+N_k-1),
// transform, multiply, threshold at beta, activate.
template <typename Real>
SpecConvResult<Real> spec_conv_forward(const std::vector<DenseReal<Real>>& x,
                                       const SpecConvLayer<Real>& layer) {
    block_detail::check_layer(layer);
    if (x.size() != layer.in_channels)
        throw DimensionError("spec_conv_forward: wrong number of input channels");
    const index_t M = x[0].rows, N = x[0].cols;
    for (const auto& ch : x)
        if (ch.rows != M || ch.cols != N)
            throw DimensionError("spec_conv_forward: ragged input channels");

    BlockCache<Real> cache;
    cache.input_was_spatial = true;
    cache.input_rows = M;
    cache.input_cols = N;
    cache.spec_rows = M + layer.kernel_size - 1;
    cache.spec_cols = N + layer.kernel_size - 1;
    const PadSpec pad{cache.spec_rows, cache.spec_cols};

    cache.X.reserve(layer.in_channels);
    for (const auto& ch : x) cache.X.push_back(fft2d(zero_pad(ch, pad)));
    cache.K.reserve(layer.kernels.size());
    for (const auto& k : layer.kernels) cache.K.push_back(fft2d(zero_pad(k, pad)));

    const auto& X_dense = cache.X;
    return block_detail::finish_forward(std::move(cache), layer, X_dense);
}

// Algorithm 1, spectral input: x is already sized (M', N'); only the kernel
// is padded and transformed. Absent sparse entries are exact zeros.
template <typename Real>
SpecConvResult<Real> spec_conv_forward(const std::vector<SparseSpectralMap<Real>>& x,
                                       const SpecConvLayer<Real>& layer) {
    block_detail::check_layer(layer);
    if (x.size() != layer.in_channels)
        throw DimensionError("spec_conv_forward: wrong number of input channels");
    const index_t Mp = x[0].rows, Np = x[0].cols;
    for (const auto& ch : x)
        if (ch.rows != Mp || ch.cols != Np)
            throw DimensionError("spec_conv_forward: ragged input channels");
    if (Mp < layer.kernel_size || Np < layer.kernel_size)
        throw DimensionError("spec_conv_forward: spectral input smaller than kernel");

    BlockCache<Real> cache;
    cache.input_was_spatial = false;
    cache.input_rows = Mp;
    cache.input_cols = Np;
    cache.spec_rows = Mp;
    cache.spec_cols = Np;
    const PadSpec pad{Mp, Np};

    cache.X_sparse = x;
    cache.K.reserve(layer.kernels.size());
    for (const auto& k : layer.kernels) cache.K.push_back(fft2d(zero_pad(k, pad)));

    std::vector<SpectralMap<Real>> X_dense;
    X_dense.reserve(x.size());
    for (const auto& ch : x) X_dense.push_back(densify(ch));
    return block_detail::finish_forward(std::move(cache), layer, X_dense);
}

template <typename Real>
struct SpecConvGrads {
    std::vector<DenseReal<Real>> kernel;                   // per (out, in), N_k x N_k
    std::vector<DenseReal<Real>> input_spatial;            // per in-channel (spatial path)
    std::vector<SparseSpectralMap<Real>> input_spectral;   // per in-channel (spectral path)
};

namespace block_detail {

// Real part of the adjoint transform, cropped to the top-left block. The
// adjoint of the unnormalized forward DFT is the unnormalized inverse
// (i.e. rows*cols times ifft2d).
template <typename Real>
DenseReal<Real> adjoint_to_spatial(const SpectralMap<Real>& g, index_t rows, index_t cols) {
    auto full = ifft2d_unnormalized(g);
    DenseReal<Real> out(rows, cols);
    for (index_t r = 0; r < rows; ++r)
        for (index_t c = 0; c < cols; ++c) out(r, c) = full(r, c).real();
    return out;
}

template <typename Real>
SparseSpectralMap<Real> sparsify_nonzero(const SpectralMap<Real>& X) {
    return threshold_to_sparse(X, Beta<Real>(Real(0)));
}

} // namespace block_detail

// Backward pass with the straight-through threshold rule: gradients exist
// only on the cached support, every dropped index gets zero. Complex
// scalars are treated as ordered pairs of reals throughout, so
// grad_X = g (.) conj(K) and grad_K = g (.) conj(X) entrywise.
template <typename Real>
SpecConvGrads<Real> spec_conv_backward(const std::vector<SparseSpectralMap<Real>>& grad_Z,
                                       const BlockCache<Real>& cache,
                                       const SpecConvLayer<Real>& layer) {
    block_detail::check_layer(layer);
    if (grad_Z.size() != layer.out_channels || cache.Yhat.size() != layer.out_channels)
        throw StructuralError("spec_conv_backward: out-channel count mismatch");

    const index_t rows = cache.spec_rows, cols = cache.spec_cols;

    std::vector<SpectralMap<Real>> X_dense;
    if (cache.input_was_spatial) {
        X_dense = cache.X;
    } else {
        X_dense.reserve(cache.X_sparse.size());
        for (const auto& ch : cache.X_sparse) X_dense.push_back(densify(ch));
    }

    std::vector<SpectralMap<Real>> grad_X(layer.in_channels, SpectralMap<Real>(rows, cols));
    SpecConvGrads<Real> grads;
    grads.kernel.assign(layer.kernels.size(),
                        DenseReal<Real>(layer.kernel_size, layer.kernel_size));

    for (index_t o = 0; o < layer.out_channels; ++o) {
        const auto& Yhat = cache.Yhat[o];
        const auto& gz = grad_Z[o];
        if (gz.rows != rows || gz.cols != cols)
            throw StructuralError("spec_conv_backward: gradient dims mismatch");

        // Merge-walk both sorted entry lists; every gradient index must sit
        // on the cached support.
        std::vector<SparseEntry<Real>> g1; // activation backward, on support
        g1.reserve(gz.entries.size());
        index_t yi = 0;
        for (const auto& ge : gz.entries) {
            while (yi < Yhat.entries.size() &&
                   (Yhat.entries[yi].row < ge.row ||
                    (Yhat.entries[yi].row == ge.row && Yhat.entries[yi].col < ge.col)))
                ++yi;
            if (yi == Yhat.entries.size() || Yhat.entries[yi].row != ge.row ||
                Yhat.entries[yi].col != ge.col)
                throw StructuralError("spec_conv_backward: gradient support exceeds cache support");
            const auto a = Yhat.entries[yi].value.real();
            const auto b = Yhat.entries[yi].value.imag();
            const Real ta = std::tanh(a), tb = std::tanh(b);
            g1.push_back({ge.row, ge.col,
                          {ge.value.real() * (Real(1) - ta * ta),
                           ge.value.imag() * (Real(1) - tb * tb)}});
        }

        for (index_t i = 0; i < layer.in_channels; ++i) {
            const auto& K = cache.K[o * layer.in_channels + i];
            const auto& X = X_dense[i];
            SpectralMap<Real> gK(rows, cols);
            auto& gX = grad_X[i];
            for (const auto& e : g1) {
                gK(e.row, e.col) += e.value * std::conj(X(e.row, e.col));
                gX(e.row, e.col) += e.value * std::conj(K(e.row, e.col));
            }
            auto gk_spatial = block_detail::adjoint_to_spatial(
                gK, layer.kernel_size, layer.kernel_size);
            auto& acc = grads.kernel[o * layer.in_channels + i];
            for (index_t n = 0; n < acc.size(); ++n) acc.data[n] += gk_spatial.data[n];
        }
    }

    if (cache.input_was_spatial) {
        grads.input_spatial.reserve(layer.in_channels);
        for (index_t i = 0; i < layer.in_channels; ++i)
            grads.input_spatial.push_back(block_detail::adjoint_to_spatial(
                grad_X[i], cache.input_rows, cache.input_cols));
    } else {
        grads.input_spectral.reserve(layer.in_channels);
        for (index_t i = 0; i < layer.in_channels; ++i)
            grads.input_spectral.push_back(block_detail::sparsify_nonzero(grad_X[i]));
    }
    return grads;
}

namespace block_detail {

// Per-axis mapping for frequency truncation: each output bin draws from the
// source bin with the same signed frequency; an even-target Nyquist bin
// averages its two source mirrors.
struct AxisTap {
    index_t src1 = 0;
    index_t src2 = 0;
    double w = 1.0; // weight applied to each listed source
    bool split = false;
};

inline AxisTap axis_tap(index_t out_idx, index_t target, index_t source) {
    AxisTap tap;
    if (target % 2 == 0 && out_idx == target / 2) {
        tap.split = true;
        tap.w = 0.5;
        tap.src1 = target / 2;
        tap.src2 = (source - target / 2) % source;
        if (tap.src1 == tap.src2) { // identity-size edge case
            tap.split = false;
            tap.w = 1.0;
        }
        return tap;
    }
    if (out_idx <= (target - 1) / 2 || (target % 2 == 0 && out_idx < target / 2)) {
        tap.src1 = out_idx;
    } else {
        tap.src1 = source + out_idx - target; // negative frequency
    }
    return tap;
}

} // namespace block_detail

// Frequency-truncation pooling: keep the centered low-frequency block,
// rescale by (target_rows*target_cols)/(rows*cols) so constant maps stay
// constant, and symmetrize even-target Nyquist lines so Hermitian inputs
// stay Hermitian.
template <typename Real>
SpectralMap<Real> spectral_downsample(const SpectralMap<Real>& X, index_t target_rows,
                                      index_t target_cols) {
    if (target_rows > X.rows || target_cols > X.cols)
        throw DimensionError("spectral_downsample: target larger than source");
    if (target_rows < 1 || target_cols < 1)
        throw DimensionError("spectral_downsample: empty target");
    const Real alpha = static_cast<Real>(target_rows * target_cols) /
                       static_cast<Real>(X.rows * X.cols);
    SpectralMap<Real> out(target_rows, target_cols);
    for (index_t p = 0; p < target_rows; ++p) {
        const auto rt = block_detail::axis_tap(p, target_rows, X.rows);
        for (index_t q = 0; q < target_cols; ++q) {
            const auto ct = block_detail::axis_tap(q, target_cols, X.cols);
            std::complex<Real> acc(0);
            acc += X(rt.src1, ct.src1) * static_cast<Real>(rt.w * ct.w);
            if (rt.split) acc += X(rt.src2, ct.src1) * static_cast<Real>(rt.w * ct.w);
            if (ct.split) acc += X(rt.src1, ct.src2) * static_cast<Real>(rt.w * ct.w);
            if (rt.split && ct.split)
                acc += X(rt.src2, ct.src2) * static_cast<Real>(rt.w * ct.w);
            out(p, q) = acc * alpha;
        }
    }
    return out;
}

template <typename Real>
SparseSpectralMap<Real> spectral_downsample(const SparseSpectralMap<Real>& S,
                                            index_t target_rows, index_t target_cols) {
    return block_detail::sparsify_nonzero(
        spectral_downsample(densify(S), target_rows, target_cols));
}

// Transpose of spectral_downsample as a real-linear map on packed reals.
template <typename Real>
SpectralMap<Real> spectral_downsample_adjoint(const SpectralMap<Real>& grad_out,
                                              index_t source_rows, index_t source_cols) {
    if (grad_out.rows > source_rows || grad_out.cols > source_cols)
        throw DimensionError("spectral_downsample_adjoint: target larger than source");
    const Real alpha = static_cast<Real>(grad_out.rows * grad_out.cols) /
                       static_cast<Real>(source_rows * source_cols);
    SpectralMap<Real> out(source_rows, source_cols);
    for (index_t p = 0; p < grad_out.rows; ++p) {
        const auto rt = block_detail::axis_tap(p, grad_out.rows, source_rows);
        for (index_t q = 0; q < grad_out.cols; ++q) {
            const auto ct = block_detail::axis_tap(q, grad_out.cols, source_cols);
            const auto g = grad_out(p, q) * alpha * static_cast<Real>(rt.w * ct.w);
            out(rt.src1, ct.src1) += g;
            if (rt.split) out(rt.src2, ct.src1) += g;
            if (ct.split) out(rt.src1, ct.src2) += g;
            if (rt.split && ct.split) out(rt.src2, ct.src2) += g;
        }
    }
    return out;
}

} // namespace specnet
