#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "specnet/errors.hpp"
#include "specnet/tensor.hpp"

namespace specnet {

// Pad target, (M', N') in the convolution-theorem pipeline.
struct PadSpec {
    index_t target_rows = 0;
    index_t target_cols = 0;
};

// Top-left block equals x, remainder zero.
template <typename Real>
DenseReal<Real> zero_pad(const DenseReal<Real>& x, const PadSpec& p) {
    if (p.target_rows < x.rows || p.target_cols < x.cols)
        throw DimensionError("zero_pad: target smaller than source");
    DenseReal<Real> out(p.target_rows, p.target_cols);
    for (index_t r = 0; r < x.rows; ++r)
        for (index_t c = 0; c < x.cols; ++c)
            out(r, c) = x(r, c);
    return out;
}

namespace fft_detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

// One-dimensional transform plan. Power-of-two lengths run an iterative
// radix-2 Cooley-Tukey; every other length runs Bluestein's chirp-z,
// which reduces to a power-of-two cyclic convolution. Forward kernel is
// e^{-2*pi*i/n}; nothing is normalized here.
template <typename Real>
class Fft1d {
public:
    explicit Fft1d(std::size_t n) : n_(n) {
        if (n == 0) throw DimensionError("Fft1d: zero length");
        if (is_pow2(n_)) {
            init_pow2_tables(n_, twiddle_, bitrev_);
        } else {
            init_bluestein();
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::complex<Real>* x) const {
        if (is_pow2(n_)) {
            pow2_transform(x, n_, twiddle_, bitrev_);
        } else {
            bluestein_transform(x);
        }
    }

    // e^{+2*pi*i/n} kernel without the 1/n factor; the adjoint of forward().
    void inverse_unnormalized(std::complex<Real>* x) const {
        for (std::size_t i = 0; i < n_; ++i) x[i] = std::conj(x[i]);
        forward(x);
        for (std::size_t i = 0; i < n_; ++i) x[i] = std::conj(x[i]);
    }

private:
    static void init_pow2_tables(std::size_t n, std::vector<std::complex<Real>>& tw,
                                 std::vector<std::uint32_t>& rev) {
        tw.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) /
                               static_cast<double>(n);
            tw[k] = std::complex<Real>(static_cast<Real>(std::cos(ang)),
                                       static_cast<Real>(std::sin(ang)));
        }
        rev.resize(n);
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) j |= std::size_t{1} << (bits - 1 - b);
            rev[i] = static_cast<std::uint32_t>(j);
        }
    }

    static void pow2_transform(std::complex<Real>* x, std::size_t n,
                               const std::vector<std::complex<Real>>& tw,
                               const std::vector<std::uint32_t>& rev) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = rev[i];
            if (i < j) std::swap(x[i], x[j]);
        }
        for (std::size_t len = 2; len <= n; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t step = n / len;
            for (std::size_t start = 0; start < n; start += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    const auto w = tw[k * step];
                    const auto u = x[start + k];
                    const auto v = x[start + k + half] * w;
                    x[start + k] = u + v;
                    x[start + k + half] = u - v;
                }
            }
        }
    }

    void init_bluestein() {
        m_ = next_pow2(2 * n_ - 1);
        init_pow2_tables(m_, twiddle_, bitrev_);
        chirp_.resize(n_);
        // exp(-i*pi*k^2/n); k^2 taken mod 2n keeps the angle argument small.
        for (std::size_t k = 0; k < n_; ++k) {
            const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n_);
            const double ang =
                -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n_);
            chirp_[k] = std::complex<Real>(static_cast<Real>(std::cos(ang)),
                                           static_cast<Real>(std::sin(ang)));
        }
        // Pre-transformed symmetric chirp filter b, b[-k] = b[k] = conj(chirp[k]).
        filter_fft_.assign(m_, std::complex<Real>(0));
        filter_fft_[0] = std::conj(chirp_[0]);
        for (std::size_t k = 1; k < n_; ++k) {
            const auto b = std::conj(chirp_[k]);
            filter_fft_[k] = b;
            filter_fft_[m_ - k] = b;
        }
        pow2_transform(filter_fft_.data(), m_, twiddle_, bitrev_);
    }

    void bluestein_transform(std::complex<Real>* x) const {
        std::vector<std::complex<Real>> a(m_, std::complex<Real>(0));
        for (std::size_t k = 0; k < n_; ++k) a[k] = x[k] * chirp_[k];
        pow2_transform(a.data(), m_, twiddle_, bitrev_);
        for (std::size_t k = 0; k < m_; ++k) a[k] *= filter_fft_[k];
        // Unnormalized inverse of the pow2 convolution.
        for (std::size_t k = 0; k < m_; ++k) a[k] = std::conj(a[k]);
        pow2_transform(a.data(), m_, twiddle_, bitrev_);
        const Real scale = Real(1) / static_cast<Real>(m_);
        for (std::size_t k = 0; k < n_; ++k)
            x[k] = std::conj(a[k]) * scale * chirp_[k];
    }

    std::size_t n_ = 0;
    std::size_t m_ = 0; // pow2 convolution length (Bluestein only)
    std::vector<std::complex<Real>> twiddle_;
    std::vector<std::uint32_t> bitrev_;
    std::vector<std::complex<Real>> chirp_;
    std::vector<std::complex<Real>> filter_fft_;
};

// Plans are immutable once built; a thread-local cache keeps transforms
// lock-free under batch-level parallelism.
template <typename Real>
const Fft1d<Real>& plan_for(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::unique_ptr<Fft1d<Real>>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Fft1d<Real>>(n);
    return *slot;
}

enum class Direction { Forward, InverseUnnormalized };

template <typename Real>
void transform_2d(SpectralMap<Real>& x, Direction dir) {
    const auto& row_plan = plan_for<Real>(x.cols);
    for (index_t r = 0; r < x.rows; ++r) {
        auto* row = x.data.data() + r * x.cols;
        if (dir == Direction::Forward)
            row_plan.forward(row);
        else
            row_plan.inverse_unnormalized(row);
    }
    const auto& col_plan = plan_for<Real>(x.rows);
    std::vector<std::complex<Real>> col(x.rows);
    for (index_t c = 0; c < x.cols; ++c) {
        for (index_t r = 0; r < x.rows; ++r) col[r] = x(r, c);
        if (dir == Direction::Forward)
            col_plan.forward(col.data());
        else
            col_plan.inverse_unnormalized(col.data());
        for (index_t r = 0; r < x.rows; ++r) x(r, c) = col[r];
    }
}

} // namespace fft_detail

// X(p,q) = sum_m sum_n w_rows^{pm} w_cols^{qn} x(m,n), negative-exponent
// forward kernel, unnormalized.
template <typename Real>
SpectralMap<Real> fft2d(const SpectralMap<Real>& x) {
    if (x.rows < 1 || x.cols < 1) throw DimensionError("fft2d: empty map");
    SpectralMap<Real> out = x;
    fft_detail::transform_2d(out, fft_detail::Direction::Forward);
    return out;
}

template <typename Real>
SpectralMap<Real> fft2d(const DenseReal<Real>& x) {
    if (x.rows < 1 || x.cols < 1) throw DimensionError("fft2d: empty map");
    SpectralMap<Real> out(x.rows, x.cols);
    for (index_t i = 0; i < x.size(); ++i) out.data[i] = std::complex<Real>(x.data[i], 0);
    fft_detail::transform_2d(out, fft_detail::Direction::Forward);
    return out;
}

// Adjoint of fft2d on packed reals: positive-exponent kernel, no 1/(rows*cols).
template <typename Real>
SpectralMap<Real> ifft2d_unnormalized(const SpectralMap<Real>& X) {
    if (X.rows < 1 || X.cols < 1) throw DimensionError("ifft2d: empty map");
    SpectralMap<Real> out = X;
    fft_detail::transform_2d(out, fft_detail::Direction::InverseUnnormalized);
    return out;
}

// Exact inverse of fft2d: positive-exponent kernel scaled by 1/(rows*cols).
template <typename Real>
SpectralMap<Real> ifft2d(const SpectralMap<Real>& X) {
    SpectralMap<Real> out = ifft2d_unnormalized(X);
    const Real scale = Real(1) / static_cast<Real>(X.rows * X.cols);
    for (auto& v : out.data) v *= scale;
    return out;
}

namespace fft_detail {

// Direct double-summation DFT. O((MN)^2); permanent cross-check oracle for
// the fast path, kept independent of it.
template <typename Real, typename Source>
SpectralMap<Real> dft2d_reference_impl(const Source& x) {
    const index_t R = x.rows, C = x.cols;
    SpectralMap<Real> out(R, C);
    for (index_t p = 0; p < R; ++p) {
        for (index_t q = 0; q < C; ++q) {
            std::complex<double> acc(0, 0);
            for (index_t m = 0; m < R; ++m) {
                for (index_t n = 0; n < C; ++n) {
                    // Integer products reduced mod dims keep angles in [0, 2pi).
                    const double frac =
                        static_cast<double>((p * m) % R) / static_cast<double>(R) +
                        static_cast<double>((q * n) % C) / static_cast<double>(C);
                    const double ang = -2.0 * std::numbers::pi * frac;
                    const std::complex<double> w(std::cos(ang), std::sin(ang));
                    if constexpr (std::is_same_v<Source, DenseReal<Real>>) {
                        acc += w * static_cast<double>(x(m, n));
                    } else {
                        acc += w * std::complex<double>(x(m, n).real(), x(m, n).imag());
                    }
                }
            }
            out(p, q) = std::complex<Real>(static_cast<Real>(acc.real()),
                                           static_cast<Real>(acc.imag()));
        }
    }
    return out;
}

} // namespace fft_detail

template <typename Real>
SpectralMap<Real> dft2d_reference(const DenseReal<Real>& x) {
    return fft_detail::dft2d_reference_impl<Real, DenseReal<Real>>(x);
}

template <typename Real>
SpectralMap<Real> dft2d_reference(const SpectralMap<Real>& x) {
    return fft_detail::dft2d_reference_impl<Real, SpectralMap<Real>>(x);
}

} // namespace specnet
