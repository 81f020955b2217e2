#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "specnet/errors.hpp"
#include "specnet/fft.hpp"
#include "specnet/memory.hpp"
#include "specnet/spectral_block.hpp"
#include "specnet/tensor.hpp"

namespace specnet {

// Full 2D convolution by direct summation, output (M+N_k-1, N+N_k-1).
// O(M'N'N_k^2) multiplications; the Eq.-1 oracle and the baseline compute
// path.
template <typename Real>
DenseReal<Real> spatial_conv_reference(const DenseReal<Real>& x, const DenseReal<Real>& k) {
    if (x.rows < 1 || x.cols < 1 || k.rows < 1 || k.cols < 1)
        throw DimensionError("spatial_conv_reference: empty operand");
    DenseReal<Real> y(x.rows + k.rows - 1, x.cols + k.cols - 1);
    for (index_t m = 0; m < x.rows; ++m)
        for (index_t n = 0; n < x.cols; ++n) {
            const Real xv = x(m, n);
            for (index_t a = 0; a < k.rows; ++a)
                for (index_t b = 0; b < k.cols; ++b) y(m + a, n + b) += xv * k(a, b);
        }
    return y;
}

// Spectral -> spatial conversion. Valid only for conjugate-symmetric maps;
// the inverse transform must come out real up to `tol`.
template <typename Real>
DenseReal<Real> to_spatial(const SparseSpectralMap<Real>& Z, Real tol = Real(1e-6)) {
    auto x = ifft2d(densify(Z));
    DenseReal<Real> out(x.rows, x.cols);
    for (index_t i = 0; i < x.data.size(); ++i) {
        if (std::abs(x.data[i].imag()) > tol)
            throw NumericIntegrityError(
                "to_spatial: imaginary residue exceeds tolerance (symmetry violated)");
        out.data[i] = x.data[i].real();
    }
    return out;
}

template <typename Real>
struct DenseLayer {
    DenseReal<Real> weights; // out x in
    std::vector<Real> bias;  // out

    DenseLayer() = default;
    DenseLayer(index_t out, index_t in) : weights(out, in), bias(out, Real(0)) {}
};

template <typename Real>
std::vector<Real> dense_forward(const std::vector<Real>& x, const DenseLayer<Real>& layer) {
    if (x.size() != layer.weights.cols)
        throw DimensionError("dense_forward: input length does not match weights");
    std::vector<Real> out(layer.weights.rows);
    for (index_t o = 0; o < layer.weights.rows; ++o) {
        Real acc = layer.bias[o];
        for (index_t i = 0; i < layer.weights.cols; ++i) acc += layer.weights(o, i) * x[i];
        out[o] = acc;
    }
    return out;
}

template <typename Real>
struct SoftmaxXent {
    Real loss = Real(0);
    std::vector<Real> grad; // softmax(logits) - onehot(label)
};

// Cross-entropy with max-subtraction stabilization.
template <typename Real>
SoftmaxXent<Real> softmax_xent(const std::vector<Real>& logits, index_t label) {
    if (label >= logits.size()) throw DimensionError("softmax_xent: label out of range");
    Real mx = logits[0];
    for (Real v : logits) mx = std::max(mx, v);
    Real denom = Real(0);
    std::vector<Real> ex(logits.size());
    for (index_t i = 0; i < logits.size(); ++i) {
        ex[i] = std::exp(logits[i] - mx);
        denom += ex[i];
    }
    SoftmaxXent<Real> out;
    out.grad.resize(logits.size());
    for (index_t i = 0; i < logits.size(); ++i) {
        const Real p = ex[i] / denom;
        out.grad[i] = p - (i == label ? Real(1) : Real(0));
    }
    out.loss = -(logits[label] - mx - std::log(denom));
    return out;
}

// ---------------------------------------------------------------------------
// Spatial evaluation of the spectral block nonlinearity. The baseline mode
// computes the identical beta=0 network function while storing feature maps
// densely in the spatial domain.

template <typename Real>
SpectralMap<Real> complex_tanh(const SpectralMap<Real>& Y) {
    SpectralMap<Real> out(Y.rows, Y.cols);
    for (index_t i = 0; i < Y.data.size(); ++i)
        out.data[i] = {std::tanh(Y.data[i].real()), std::tanh(Y.data[i].imag())};
    return out;
}

template <typename Real>
DenseReal<Real> spectral_activation_spatial(const DenseReal<Real>& y) {
    auto A = complex_tanh(fft2d(y));
    auto z = ifft2d(A);
    DenseReal<Real> out(y.rows, y.cols);
    for (index_t i = 0; i < out.data.size(); ++i) out.data[i] = z.data[i].real();
    return out;
}

template <typename Real>
DenseReal<Real> spectral_activation_spatial_backward(const DenseReal<Real>& y,
                                                     const DenseReal<Real>& grad_z) {
    const Real rc = static_cast<Real>(y.rows * y.cols);
    auto Yf = fft2d(y);
    // adjoint of Re(ifft2d(.)) is fft2d(.)/(rows*cols)
    auto gA = fft2d(grad_z);
    for (auto& v : gA.data) v /= rc;
    SpectralMap<Real> gYf(y.rows, y.cols);
    for (index_t i = 0; i < gYf.data.size(); ++i) {
        const Real ta = std::tanh(Yf.data[i].real());
        const Real tb = std::tanh(Yf.data[i].imag());
        gYf.data[i] = {gA.data[i].real() * (Real(1) - ta * ta),
                       gA.data[i].imag() * (Real(1) - tb * tb)};
    }
    auto gy = ifft2d_unnormalized(gYf); // adjoint of fft2d
    DenseReal<Real> out(y.rows, y.cols);
    for (index_t i = 0; i < out.data.size(); ++i) out.data[i] = gy.data[i].real();
    return out;
}

// Frequency-truncation pooling applied to a spatial map via the round trip.
template <typename Real>
DenseReal<Real> spatial_pool(const DenseReal<Real>& y, index_t target_rows,
                             index_t target_cols) {
    auto Yt = spectral_downsample(fft2d(y), target_rows, target_cols);
    auto z = ifft2d(Yt);
    DenseReal<Real> out(target_rows, target_cols);
    for (index_t i = 0; i < out.data.size(); ++i) out.data[i] = z.data[i].real();
    return out;
}

template <typename Real>
DenseReal<Real> spatial_pool_backward(const DenseReal<Real>& grad_z, index_t source_rows,
                                      index_t source_cols) {
    const Real tc = static_cast<Real>(grad_z.rows * grad_z.cols);
    SpectralMap<Real> gz_c(grad_z.rows, grad_z.cols);
    for (index_t i = 0; i < gz_c.data.size(); ++i)
        gz_c.data[i] = {grad_z.data[i], Real(0)};
    auto gYt = fft2d(gz_c);
    for (auto& v : gYt.data) v /= tc;
    auto gYf = spectral_downsample_adjoint(gYt, source_rows, source_cols);
    auto gy = ifft2d_unnormalized(gYf);
    DenseReal<Real> out(source_rows, source_cols);
    for (index_t i = 0; i < out.data.size(); ++i) out.data[i] = gy.data[i].real();
    return out;
}

// ---------------------------------------------------------------------------
// Model description and validation.

enum class LayerKind { SpecConv, SpectralPool, ToSpatial, Flatten, Dense, ActivationSpatial };

struct LayerDesc {
    LayerKind kind = LayerKind::SpecConv;
    index_t out_channels = 0; // SpecConv
    index_t kernel_size = 0;  // SpecConv
    index_t units = 0;        // Dense
    std::optional<double> beta_override; // SpecConv; falls back to the global beta

    static LayerDesc conv(index_t out_ch, index_t nk) {
        LayerDesc d;
        d.kind = LayerKind::SpecConv;
        d.out_channels = out_ch;
        d.kernel_size = nk;
        return d;
    }
    static LayerDesc pool() { return of_kind(LayerKind::SpectralPool); }
    static LayerDesc to_spatial() { return of_kind(LayerKind::ToSpatial); }
    static LayerDesc flatten() { return of_kind(LayerKind::Flatten); }
    static LayerDesc dense(index_t units) {
        LayerDesc d;
        d.kind = LayerKind::Dense;
        d.units = units;
        return d;
    }
    static LayerDesc activation() { return of_kind(LayerKind::ActivationSpatial); }

    static LayerDesc of_kind(LayerKind k) {
        LayerDesc d;
        d.kind = k;
        return d;
    }
};

struct ModelSpec {
    RunMode mode = RunMode::Spectral;
    index_t input_rows = 0;
    index_t input_cols = 0;
    index_t input_channels = 1;
    index_t num_classes = 2;
    std::vector<LayerDesc> layers;
};

enum class DataDomain { SpatialMaps, SpectralMaps, Vector };

struct LayerShape {
    DataDomain domain = DataDomain::SpatialMaps;
    index_t rows = 0, cols = 0, channels = 0; // map domains
    index_t units = 0;                        // vector domain
};

// Pool targets: dimensions halved, rounded up, never below 1.
inline index_t pooled_dim(index_t d) { return std::max<index_t>(1, (d + 1) / 2); }

// Walks the layer chain and returns the shape after each layer. Shape-chain
// violations are build-time errors.
inline std::vector<LayerShape> plan_shapes(const ModelSpec& spec) {
    if (spec.input_rows < 1 || spec.input_cols < 1 || spec.input_channels < 1)
        throw DimensionError("plan_shapes: bad input dims");
    const bool spectral = spec.mode == RunMode::Spectral;
    LayerShape cur{DataDomain::SpatialMaps, spec.input_rows, spec.input_cols,
                   spec.input_channels, 0};
    std::vector<LayerShape> out;
    index_t transitions = 0;
    bool seen_dense = false;
    for (const auto& d : spec.layers) {
        switch (d.kind) {
        case LayerKind::SpecConv: {
            if (d.out_channels < 1 || d.kernel_size < 1)
                throw DimensionError("plan_shapes: bad conv descriptor");
            if (spectral) {
                if (cur.domain == DataDomain::SpatialMaps) {
                    cur.rows += d.kernel_size - 1;
                    cur.cols += d.kernel_size - 1;
                } else if (cur.domain == DataDomain::SpectralMaps) {
                    if (cur.rows < d.kernel_size || cur.cols < d.kernel_size)
                        throw DimensionError("plan_shapes: spectral input smaller than kernel");
                } else {
                    throw DimensionError("plan_shapes: conv needs map input");
                }
                cur.domain = DataDomain::SpectralMaps;
            } else {
                if (cur.domain != DataDomain::SpatialMaps)
                    throw DimensionError("plan_shapes: baseline conv needs spatial maps");
                cur.rows += d.kernel_size - 1;
                cur.cols += d.kernel_size - 1;
            }
            cur.channels = d.out_channels;
            break;
        }
        case LayerKind::SpectralPool: {
            if (cur.domain == DataDomain::Vector)
                throw DimensionError("plan_shapes: pool needs map input");
            if (spectral && cur.domain != DataDomain::SpectralMaps)
                throw DimensionError("plan_shapes: spectral pool placed outside spectral maps");
            cur.rows = pooled_dim(cur.rows);
            cur.cols = pooled_dim(cur.cols);
            break;
        }
        case LayerKind::ToSpatial: {
            if (spectral) {
                if (cur.domain != DataDomain::SpectralMaps)
                    throw DimensionError("plan_shapes: to-spatial needs spectral maps");
                cur.domain = DataDomain::SpatialMaps;
                ++transitions;
            } else if (cur.domain != DataDomain::SpatialMaps) {
                throw DimensionError("plan_shapes: to-spatial needs map input");
            }
            break;
        }
        case LayerKind::Flatten: {
            if (cur.domain != DataDomain::SpatialMaps)
                throw DimensionError("plan_shapes: flatten needs spatial maps");
            cur.units = cur.rows * cur.cols * cur.channels;
            cur.domain = DataDomain::Vector;
            break;
        }
        case LayerKind::Dense: {
            if (cur.domain != DataDomain::Vector)
                throw DimensionError("plan_shapes: dense needs a flattened vector");
            if (d.units < 1) throw DimensionError("plan_shapes: bad dense units");
            cur.units = d.units;
            seen_dense = true;
            break;
        }
        case LayerKind::ActivationSpatial: {
            if (cur.domain == DataDomain::SpectralMaps)
                throw DimensionError("plan_shapes: spatial activation on spectral maps");
            break;
        }
        }
        out.push_back(cur);
    }
    if (!seen_dense || out.empty() || out.back().domain != DataDomain::Vector ||
        out.back().units != spec.num_classes)
        throw DimensionError("plan_shapes: model must end in a dense head over num_classes");
    if (spectral) {
        bool any_conv = false;
        for (const auto& d : spec.layers) any_conv |= (d.kind == LayerKind::SpecConv);
        if (any_conv && transitions != 1)
            throw DimensionError(
                "plan_shapes: spectral mode requires exactly one to-spatial transition");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model: spec plus parameters.

template <typename Real>
struct Model {
    ModelSpec spec;
    Real beta = Real(0); // global threshold; conv layers may override
    std::vector<LayerShape> shapes;
    std::vector<SpecConvLayer<Real>> convs;
    std::vector<DenseLayer<Real>> dense;

    // Maps layer index -> index into convs/dense (size_t(-1) elsewhere).
    std::vector<index_t> param_slot;
};

template <typename Real>
Model<Real> build_model(const ModelSpec& spec, Real beta) {
    Model<Real> m;
    m.spec = spec;
    m.beta = beta;
    m.shapes = plan_shapes(spec);
    m.param_slot.assign(spec.layers.size(), static_cast<index_t>(-1));
    LayerShape prev{DataDomain::SpatialMaps, spec.input_rows, spec.input_cols,
                    spec.input_channels, 0};
    for (index_t li = 0; li < spec.layers.size(); ++li) {
        const auto& d = spec.layers[li];
        if (d.kind == LayerKind::SpecConv) {
            const Real layer_beta =
                d.beta_override ? static_cast<Real>(*d.beta_override) : beta;
            m.param_slot[li] = m.convs.size();
            m.convs.emplace_back(prev.channels, d.out_channels, d.kernel_size,
                                 Beta<Real>(layer_beta));
        } else if (d.kind == LayerKind::Dense) {
            m.param_slot[li] = m.dense.size();
            m.dense.emplace_back(d.units, prev.units);
        }
        prev = m.shapes[li];
    }
    return m;
}

// Fan-based uniform init, fixed draw order for reproducibility. Spectral
// conv banks then get a per-layer gain calibrated on data (see
// calibrate_spectral_scale) so pre-threshold magnitudes land in the beta
// sweep range at every depth.
template <typename Real>
void init_params(Model<Real>& m, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (auto& conv : m.convs) {
        const double fan_in =
            static_cast<double>(conv.in_channels * conv.kernel_size * conv.kernel_size);
        const double fan_out =
            static_cast<double>(conv.out_channels * conv.kernel_size * conv.kernel_size);
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& k : conv.kernels)
            for (auto& v : k.data) v = static_cast<Real>(s * unit(gen));
    }
    for (auto& layer : m.dense) {
        const double fan_in = static_cast<double>(layer.weights.cols);
        const double fan_out = static_cast<double>(layer.weights.rows);
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : layer.weights.data) v = static_cast<Real>(s * unit(gen));
        for (auto& v : layer.bias) v = Real(0);
    }
}

template <typename Real>
std::vector<Real> flatten_maps(const std::vector<DenseReal<Real>>& maps) {
    std::vector<Real> out;
    for (const auto& m : maps) out.insert(out.end(), m.data.begin(), m.data.end());
    return out;
}

template <typename Real>
std::vector<Real> calibrate_model_scale(Model<Real>& model,
                                        const std::vector<std::vector<DenseReal<Real>>>& batch,
                                        Real target_rms = Real(1));

// ---------------------------------------------------------------------------
// Forward / backward execution.

template <typename Real>
struct Activations {
    DataDomain domain = DataDomain::SpatialMaps;
    std::vector<DenseReal<Real>> maps;
    std::vector<SparseSpectralMap<Real>> spectral;
    std::vector<Real> vec;
};

template <typename Real>
struct LayerState {
    // SpecConv, spectral mode
    BlockCache<Real> block;
    // SpecConv, baseline mode
    std::vector<DenseReal<Real>> conv_input;
    std::vector<DenseReal<Real>> conv_pre; // pre-activation maps per out-channel
    // Pool / flatten bookkeeping
    index_t in_rows = 0, in_cols = 0, in_channels = 0;
    // Dense / activation
    std::vector<Real> vec_input;
};

template <typename Real>
struct SampleTrace {
    std::vector<LayerState<Real>> layers;
};

template <typename Real>
struct ForwardResult {
    std::vector<Real> logits;
    SampleTrace<Real> trace;
    // Logical bytes of the feature map each conv/pool layer retains for
    // backward; indexed by layer.
    std::vector<std::uint64_t> layer_bytes;
};

template <typename Real>
ForwardResult<Real> model_forward(const Model<Real>& model,
                                  const std::vector<DenseReal<Real>>& sample,
                                  bool record_trace = true) {
    if (sample.size() != model.spec.input_channels)
        throw DimensionError("model_forward: wrong channel count");
    const bool spectral = model.spec.mode == RunMode::Spectral;
    constexpr std::uint64_t kScalarBytes = sizeof(Real);
    constexpr std::uint64_t kIndexBytes = 4;

    ForwardResult<Real> result;
    result.layer_bytes.assign(model.spec.layers.size(), 0);
    if (record_trace) result.trace.layers.resize(model.spec.layers.size());

    Activations<Real> cur;
    cur.domain = DataDomain::SpatialMaps;
    cur.maps = sample;

    for (index_t li = 0; li < model.spec.layers.size(); ++li) {
        const auto& d = model.spec.layers[li];
        LayerState<Real> state;
        switch (d.kind) {
        case LayerKind::SpecConv: {
            const auto& conv = model.convs[model.param_slot[li]];
            if (spectral) {
                SpecConvResult<Real> r = cur.domain == DataDomain::SpatialMaps
                                             ? spec_conv_forward(cur.maps, conv)
                                             : spec_conv_forward(cur.spectral, conv);
                for (const auto& yh : r.cache.Yhat)
                    result.layer_bytes[li] += sparse_bytes(yh, kScalarBytes, kIndexBytes);
                cur.domain = DataDomain::SpectralMaps;
                cur.spectral = std::move(r.Z);
                cur.maps.clear();
                if (record_trace) state.block = std::move(r.cache);
            } else {
                if (record_trace) state.conv_input = cur.maps;
                std::vector<DenseReal<Real>> outs;
                outs.reserve(conv.out_channels);
                for (index_t o = 0; o < conv.out_channels; ++o) {
                    DenseReal<Real> y(cur.maps[0].rows + conv.kernel_size - 1,
                                      cur.maps[0].cols + conv.kernel_size - 1);
                    for (index_t i = 0; i < conv.in_channels; ++i) {
                        auto part = spatial_conv_reference(cur.maps[i], conv.kernel(o, i));
                        for (index_t n = 0; n < y.size(); ++n) y.data[n] += part.data[n];
                    }
                    result.layer_bytes[li] += dense_bytes(y.rows, y.cols, 1, kScalarBytes);
                    outs.push_back(std::move(y));
                }
                std::vector<DenseReal<Real>> acts;
                acts.reserve(outs.size());
                for (const auto& y : outs) acts.push_back(spectral_activation_spatial(y));
                if (record_trace) state.conv_pre = std::move(outs);
                cur.maps = std::move(acts);
            }
            break;
        }
        case LayerKind::SpectralPool: {
            if (spectral) {
                state.in_rows = cur.spectral[0].rows;
                state.in_cols = cur.spectral[0].cols;
                const index_t tr = pooled_dim(state.in_rows);
                const index_t tc = pooled_dim(state.in_cols);
                std::vector<SparseSpectralMap<Real>> pooled;
                pooled.reserve(cur.spectral.size());
                for (const auto& ch : cur.spectral) {
                    pooled.push_back(spectral_downsample(ch, tr, tc));
                    result.layer_bytes[li] +=
                        sparse_bytes(pooled.back(), kScalarBytes, kIndexBytes);
                }
                cur.spectral = std::move(pooled);
            } else {
                state.in_rows = cur.maps[0].rows;
                state.in_cols = cur.maps[0].cols;
                const index_t tr = pooled_dim(state.in_rows);
                const index_t tc = pooled_dim(state.in_cols);
                std::vector<DenseReal<Real>> pooled;
                pooled.reserve(cur.maps.size());
                for (const auto& ch : cur.maps) {
                    pooled.push_back(spatial_pool(ch, tr, tc));
                    result.layer_bytes[li] += dense_bytes(tr, tc, 1, kScalarBytes);
                }
                cur.maps = std::move(pooled);
            }
            break;
        }
        case LayerKind::ToSpatial: {
            if (spectral) {
                std::vector<DenseReal<Real>> maps;
                maps.reserve(cur.spectral.size());
                for (const auto& ch : cur.spectral) maps.push_back(to_spatial(ch));
                cur.maps = std::move(maps);
                cur.spectral.clear();
                cur.domain = DataDomain::SpatialMaps;
            }
            break;
        }
        case LayerKind::Flatten: {
            state.in_rows = cur.maps[0].rows;
            state.in_cols = cur.maps[0].cols;
            state.in_channels = cur.maps.size();
            cur.vec = flatten_maps(cur.maps);
            cur.maps.clear();
            cur.domain = DataDomain::Vector;
            break;
        }
        case LayerKind::Dense: {
            const auto& layer = model.dense[model.param_slot[li]];
            if (record_trace) state.vec_input = cur.vec;
            cur.vec = dense_forward(cur.vec, layer);
            break;
        }
        case LayerKind::ActivationSpatial: {
            if (cur.domain == DataDomain::Vector) {
                if (record_trace) state.vec_input = cur.vec;
                for (auto& v : cur.vec) v = std::tanh(v);
            } else {
                if (record_trace) state.conv_input = cur.maps;
                for (auto& m : cur.maps)
                    for (auto& v : m.data) v = std::tanh(v);
            }
            break;
        }
        }
        if (record_trace) result.trace.layers[li] = std::move(state);
    }
    result.logits = std::move(cur.vec);
    return result;
}

template <typename Real>
struct ModelGrads {
    std::vector<std::vector<DenseReal<Real>>> conv_kernel; // per conv, per (o,i)
    std::vector<DenseReal<Real>> dense_w;
    std::vector<std::vector<Real>> dense_b;

    static ModelGrads zeros_like(const Model<Real>& m) {
        ModelGrads g;
        g.conv_kernel.reserve(m.convs.size());
        for (const auto& c : m.convs)
            g.conv_kernel.emplace_back(c.kernels.size(),
                                       DenseReal<Real>(c.kernel_size, c.kernel_size));
        g.dense_w.reserve(m.dense.size());
        g.dense_b.reserve(m.dense.size());
        for (const auto& d : m.dense) {
            g.dense_w.emplace_back(d.weights.rows, d.weights.cols);
            g.dense_b.emplace_back(d.bias.size(), Real(0));
        }
        return g;
    }

    void accumulate(const ModelGrads& other) {
        for (index_t c = 0; c < conv_kernel.size(); ++c)
            for (index_t k = 0; k < conv_kernel[c].size(); ++k)
                for (index_t n = 0; n < conv_kernel[c][k].data.size(); ++n)
                    conv_kernel[c][k].data[n] += other.conv_kernel[c][k].data[n];
        for (index_t l = 0; l < dense_w.size(); ++l) {
            for (index_t n = 0; n < dense_w[l].data.size(); ++n)
                dense_w[l].data[n] += other.dense_w[l].data[n];
            for (index_t n = 0; n < dense_b[l].size(); ++n)
                dense_b[l][n] += other.dense_b[l][n];
        }
    }

    void scale(Real s) {
        for (auto& bank : conv_kernel)
            for (auto& k : bank)
                for (auto& v : k.data) v *= s;
        for (auto& w : dense_w)
            for (auto& v : w.data) v *= s;
        for (auto& b : dense_b)
            for (auto& v : b) v *= s;
    }
};

// Parameter tensors in a fixed traversal order (conv banks, then dense
// weights and biases); gradient tensors enumerate identically.
template <typename Real>
std::vector<std::span<Real>> param_tensors(Model<Real>& m) {
    std::vector<std::span<Real>> out;
    for (auto& c : m.convs)
        for (auto& k : c.kernels) out.emplace_back(k.data);
    for (auto& d : m.dense) {
        out.emplace_back(d.weights.data);
        out.emplace_back(d.bias);
    }
    return out;
}

template <typename Real>
std::vector<std::span<const Real>> grad_tensors(const ModelGrads<Real>& g) {
    std::vector<std::span<const Real>> out;
    for (const auto& bank : g.conv_kernel)
        for (const auto& k : bank) out.emplace_back(k.data);
    for (index_t l = 0; l < g.dense_w.size(); ++l) {
        out.emplace_back(g.dense_w[l].data);
        out.emplace_back(g.dense_b[l]);
    }
    return out;
}

// Keeps only the gradient values sitting on the given support; everything
// else is straight-through masked to zero.
template <typename Real>
SparseSpectralMap<Real> restrict_to_support(const SpectralMap<Real>& grad,
                                            const SparseSpectralMap<Real>& support) {
    SparseSpectralMap<Real> out(grad.rows, grad.cols);
    for (const auto& e : support.entries) {
        const auto v = grad(e.row, e.col);
        if (v != std::complex<Real>(0)) out.entries.push_back({e.row, e.col, v});
    }
    return out;
}

template <typename Real>
ModelGrads<Real> model_backward(const Model<Real>& model, const SampleTrace<Real>& trace,
                                const std::vector<Real>& grad_logits) {
    const bool spectral = model.spec.mode == RunMode::Spectral;
    auto grads = ModelGrads<Real>::zeros_like(model);

    Activations<Real> g; // gradient flowing backwards, same layout as forward values
    g.domain = DataDomain::Vector;
    g.vec = grad_logits;
    // Dense spectral-gradient buffers per channel (spectral mode between blocks).
    std::vector<SpectralMap<Real>> gspec;

    for (index_t li = model.spec.layers.size(); li-- > 0;) {
        const auto& d = model.spec.layers[li];
        const auto& state = trace.layers[li];
        switch (d.kind) {
        case LayerKind::Dense: {
            const auto& layer = model.dense[model.param_slot[li]];
            auto& gw = grads.dense_w[model.param_slot[li]];
            auto& gb = grads.dense_b[model.param_slot[li]];
            std::vector<Real> gx(layer.weights.cols, Real(0));
            for (index_t o = 0; o < layer.weights.rows; ++o) {
                gb[o] += g.vec[o];
                for (index_t i = 0; i < layer.weights.cols; ++i) {
                    gw(o, i) += g.vec[o] * state.vec_input[i];
                    gx[i] += layer.weights(o, i) * g.vec[o];
                }
            }
            g.vec = std::move(gx);
            break;
        }
        case LayerKind::ActivationSpatial: {
            if (g.domain == DataDomain::Vector) {
                for (index_t i = 0; i < g.vec.size(); ++i) {
                    const Real t = std::tanh(state.vec_input[i]);
                    g.vec[i] *= (Real(1) - t * t);
                }
            } else {
                for (index_t ch = 0; ch < g.maps.size(); ++ch)
                    for (index_t n = 0; n < g.maps[ch].data.size(); ++n) {
                        const Real t = std::tanh(state.conv_input[ch].data[n]);
                        g.maps[ch].data[n] *= (Real(1) - t * t);
                    }
            }
            break;
        }
        case LayerKind::Flatten: {
            std::vector<DenseReal<Real>> maps(state.in_channels,
                                              DenseReal<Real>(state.in_rows, state.in_cols));
            const index_t per = state.in_rows * state.in_cols;
            for (index_t ch = 0; ch < state.in_channels; ++ch)
                for (index_t n = 0; n < per; ++n) maps[ch].data[n] = g.vec[ch * per + n];
            g.maps = std::move(maps);
            g.vec.clear();
            g.domain = DataDomain::SpatialMaps;
            break;
        }
        case LayerKind::ToSpatial: {
            if (!spectral) break;
            // adjoint of Re(ifft2d(densify(.))) restricted to the stored support
            gspec.clear();
            gspec.reserve(g.maps.size());
            for (index_t ch = 0; ch < g.maps.size(); ++ch) {
                const auto& gm = g.maps[ch];
                const Real rc = static_cast<Real>(gm.rows * gm.cols);
                SpectralMap<Real> gz(gm.rows, gm.cols);
                for (index_t n = 0; n < gm.data.size(); ++n)
                    gz.data[n] = {gm.data[n], Real(0)};
                auto G = fft2d(gz);
                for (auto& v : G.data) v /= rc;
                gspec.push_back(std::move(G));
            }
            g.maps.clear();
            g.domain = DataDomain::SpectralMaps;
            break;
        }
        case LayerKind::SpectralPool: {
            if (spectral) {
                std::vector<SpectralMap<Real>> up;
                up.reserve(gspec.size());
                for (auto& ch : gspec)
                    up.push_back(spectral_downsample_adjoint(ch, state.in_rows, state.in_cols));
                gspec = std::move(up);
            } else {
                std::vector<DenseReal<Real>> up;
                up.reserve(g.maps.size());
                for (const auto& ch : g.maps)
                    up.push_back(spatial_pool_backward(ch, state.in_rows, state.in_cols));
                g.maps = std::move(up);
            }
            break;
        }
        case LayerKind::SpecConv: {
            const auto& conv = model.convs[model.param_slot[li]];
            auto& kbank = grads.conv_kernel[model.param_slot[li]];
            if (spectral) {
                // Straight-through threshold rule at the layer boundary.
                std::vector<SparseSpectralMap<Real>> gz;
                gz.reserve(conv.out_channels);
                for (index_t o = 0; o < conv.out_channels; ++o)
                    gz.push_back(restrict_to_support(gspec[o], state.block.Yhat[o]));
                auto bg = spec_conv_backward(gz, state.block, conv);
                for (index_t k = 0; k < kbank.size(); ++k)
                    for (index_t n = 0; n < kbank[k].data.size(); ++n)
                        kbank[k].data[n] += bg.kernel[k].data[n];
                if (state.block.input_was_spatial) {
                    g.maps = std::move(bg.input_spatial);
                    g.domain = DataDomain::SpatialMaps;
                    gspec.clear();
                } else {
                    gspec.clear();
                    gspec.reserve(bg.input_spectral.size());
                    for (const auto& ch : bg.input_spectral) gspec.push_back(densify(ch));
                }
            } else {
                std::vector<DenseReal<Real>> gpre;
                gpre.reserve(conv.out_channels);
                for (index_t o = 0; o < conv.out_channels; ++o)
                    gpre.push_back(
                        spectral_activation_spatial_backward(state.conv_pre[o], g.maps[o]));
                std::vector<DenseReal<Real>> gx(
                    conv.in_channels, DenseReal<Real>(state.conv_input[0].rows,
                                                      state.conv_input[0].cols));
                for (index_t o = 0; o < conv.out_channels; ++o) {
                    const auto& gy = gpre[o];
                    for (index_t i = 0; i < conv.in_channels; ++i) {
                        auto& gk = kbank[o * conv.in_channels + i];
                        const auto& x = state.conv_input[i];
                        const auto& k = conv.kernel(o, i);
                        for (index_t m = 0; m < x.rows; ++m)
                            for (index_t n = 0; n < x.cols; ++n) {
                                const Real xv = x(m, n);
                                Real gacc = Real(0);
                                for (index_t a = 0; a < k.rows; ++a)
                                    for (index_t b = 0; b < k.cols; ++b) {
                                        gk(a, b) += gy(m + a, n + b) * xv;
                                        gacc += gy(m + a, n + b) * k(a, b);
                                    }
                                gx[i](m, n) += gacc;
                            }
                    }
                }
                g.maps = std::move(gx);
            }
            break;
        }
        }
    }
    return grads;
}

// Rescales each conv bank so that on the calibration batch the RMS spectral
// pre-threshold magnitude |Y| equals target_rms, then scales dense layers
// toward unit-RMS outputs. Measurement runs the model's own forward path
// with thresholds disabled; at beta = 0 both execution modes compute the
// same function, so the two modes calibrate to matching scales. Without
// this, fan-based init leaves deep-layer |Y| far below the beta sweep range
// and the threshold silences those layers permanently.
template <typename Real>
std::vector<Real> calibrate_model_scale(Model<Real>& model,
                                        const std::vector<std::vector<DenseReal<Real>>>& batch,
                                        Real target_rms) {
    if (batch.empty()) throw UsageError("calibrate_model_scale: empty calibration batch");
    std::vector<Real> gains;
    for (index_t li = 0; li < model.spec.layers.size(); ++li) {
        const auto kind = model.spec.layers[li].kind;
        if (kind != LayerKind::SpecConv && kind != LayerKind::Dense) continue;

        Model<Real> probe = model;
        for (auto& c : probe.convs) c.beta = Beta<Real>(Real(0));

        double sum_sq = 0.0, count = 0.0;
        for (const auto& sample : batch) {
            auto fwd = model_forward(probe, sample);
            const auto& st = fwd.trace.layers[li];
            if (kind == LayerKind::SpecConv) {
                if (model.spec.mode == RunMode::Spectral) {
                    for (const auto& yh : st.block.Yhat) {
                        for (const auto& e : yh.entries) sum_sq += std::norm(e.value);
                        count += static_cast<double>(yh.rows * yh.cols);
                    }
                } else {
                    // Parseval: mean |FFT(y)|^2 over bins equals sum of y^2.
                    for (const auto& y : st.conv_pre) {
                        const double rc = static_cast<double>(y.rows * y.cols);
                        double e = 0.0;
                        for (Real v : y.data) e += static_cast<double>(v) * v;
                        sum_sq += rc * e;
                        count += rc;
                    }
                }
            } else {
                auto out = dense_forward(st.vec_input, probe.dense[probe.param_slot[li]]);
                for (Real v : out) sum_sq += static_cast<double>(v) * v;
                count += static_cast<double>(out.size());
            }
        }
        const double rms = std::sqrt(sum_sq / std::max(count, 1.0));
        const double target = kind == LayerKind::SpecConv ? static_cast<double>(target_rms) : 1.0;
        const Real gain = rms > 0 ? static_cast<Real>(target / rms) : Real(1);
        gains.push_back(gain);
        if (kind == LayerKind::SpecConv) {
            for (auto& k : model.convs[model.param_slot[li]].kernels)
                for (auto& v : k.data) v *= gain;
        } else {
            for (auto& v : model.dense[model.param_slot[li]].weights.data) v *= gain;
        }
    }
    return gains;
}

} // namespace specnet
