#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "specnet/errors.hpp"

namespace specnet {

using index_t = std::size_t;

// Dense real-valued 2D map, row-major. Holds spatial feature maps, kernels
// and images.
template <typename Real>
struct DenseReal {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<Real> data;

    DenseReal() = default;
    DenseReal(index_t r, index_t c) : rows(r), cols(c), data(r * c, Real(0)) {}
    DenseReal(index_t r, index_t c, std::vector<Real> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols)
            throw DimensionError("DenseReal: data length does not match rows*cols");
    }

    Real& operator()(index_t r, index_t c) { return data[r * cols + c]; }
    const Real& operator()(index_t r, index_t c) const { return data[r * cols + c]; }
    index_t size() const { return rows * cols; }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](Real v) { return std::isfinite(v); });
    }
};

// Dense complex-valued 2D map, row-major. Post-FFT feature maps and
// spectral kernels live here.
template <typename Real>
struct SpectralMap {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<std::complex<Real>> data;

    SpectralMap() = default;
    SpectralMap(index_t r, index_t c)
        : rows(r), cols(c), data(r * c, std::complex<Real>(0)) {}
    SpectralMap(index_t r, index_t c, std::vector<std::complex<Real>> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (data.size() != rows * cols)
            throw DimensionError("SpectralMap: data length does not match rows*cols");
    }

    std::complex<Real>& operator()(index_t r, index_t c) { return data[r * cols + c]; }
    const std::complex<Real>& operator()(index_t r, index_t c) const {
        return data[r * cols + c];
    }
    index_t size() const { return rows * cols; }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](const std::complex<Real>& v) {
            return std::isfinite(v.real()) && std::isfinite(v.imag());
        });
    }
};

template <typename Real>
struct SparseEntry {
    index_t row = 0;
    index_t col = 0;
    std::complex<Real> value{};
};

// Coordinate-list storage of the spectral entries surviving the beta
// threshold. Entries are sorted by (row, col) and every stored value has
// magnitude > 0.
template <typename Real>
struct SparseSpectralMap {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<SparseEntry<Real>> entries;

    SparseSpectralMap() = default;
    SparseSpectralMap(index_t r, index_t c) : rows(r), cols(c) {}

    index_t nnz() const { return entries.size(); }

    // Structural invariants: in-bounds, strictly increasing (row, col),
    // no stored zeros.
    void validate() const {
        for (index_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            if (e.row >= rows || e.col >= cols)
                throw StructuralError("SparseSpectralMap: entry index out of bounds");
            if (std::abs(e.value) <= Real(0))
                throw StructuralError("SparseSpectralMap: stored zero entry");
            if (i > 0) {
                const auto& p = entries[i - 1];
                if (p.row > e.row || (p.row == e.row && p.col >= e.col))
                    throw StructuralError("SparseSpectralMap: entries not sorted by (row, col)");
            }
        }
    }
};

// Non-negative magnitude threshold from Algorithm 1.
template <typename Real>
struct Beta {
    Real value = Real(0);

    Beta() = default;
    explicit Beta(Real v) : value(v) {
        if (!(v >= Real(0)))
            throw ValueError("Beta: threshold must be >= 0");
    }
};

// Keeps exactly the entries with |Y(i,j)| > beta (strict inequality, so
// beta = 0 drops exact zeros).
template <typename Real>
SparseSpectralMap<Real> threshold_to_sparse(const SpectralMap<Real>& Y,
                                            const Beta<Real>& beta) {
    SparseSpectralMap<Real> S(Y.rows, Y.cols);
    for (index_t r = 0; r < Y.rows; ++r)
        for (index_t c = 0; c < Y.cols; ++c) {
            const auto v = Y(r, c);
            if (std::abs(v) > beta.value)
                S.entries.push_back({r, c, v});
        }
    return S;
}

template <typename Real>
SpectralMap<Real> densify(const SparseSpectralMap<Real>& S) {
    SpectralMap<Real> Y(S.rows, S.cols);
    for (const auto& e : S.entries) {
        if (e.row >= S.rows || e.col >= S.cols)
            throw StructuralError("densify: entry index out of bounds");
        Y(e.row, e.col) = e.value;
    }
    return Y;
}

template <typename Real>
Real nnz_fraction(const SparseSpectralMap<Real>& S) {
    if (S.rows == 0 || S.cols == 0) return Real(0);
    return static_cast<Real>(S.entries.size()) / static_cast<Real>(S.rows * S.cols);
}

// True iff X((rows-p) mod rows, (cols-q) mod cols) == conj(X(p,q)) within
// tol for every bin. DFTs of real maps satisfy this exactly up to rounding.
template <typename Real>
bool check_hermitian(const SpectralMap<Real>& X, Real tol) {
    for (index_t p = 0; p < X.rows; ++p) {
        const index_t pm = (X.rows - p) % X.rows;
        for (index_t q = 0; q < X.cols; ++q) {
            const index_t qm = (X.cols - q) % X.cols;
            if (std::abs(X(pm, qm) - std::conj(X(p, q))) > tol) return false;
        }
    }
    return true;
}

} // namespace specnet
