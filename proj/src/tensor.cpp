// SPDX-License-Identifier: Apache-2.0
#include "bdris/tensor.hpp"

#include <cmath>
#include <numbers>

namespace bdris {

namespace {
thread_local std::uint64_t g_flops = 0;
}

namespace flops {

std::uint64_t count() { return g_flops; }
void reset() { g_flops = 0; }
void add(std::uint64_t n) { g_flops += n; }

Scope::Scope() : saved_(g_flops) { g_flops = 0; }
Scope::~Scope() { g_flops += saved_; }
std::uint64_t Scope::elapsed() const { return g_flops; }

}  // namespace flops

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw Error("matmul: inner dimensions differ");
    flops::add(static_cast<std::uint64_t>(a.rows()) * static_cast<std::uint64_t>(a.cols()) *
               static_cast<std::uint64_t>(b.cols()));
    return a * b;
}

Tensor3::Tensor3(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3)
    : dims_{i1, i2, i3}, data_(static_cast<std::size_t>(i1 * i2 * i3), cplx{0.0, 0.0}) {
    if (i1 < 0 || i2 < 0 || i3 < 0) throw Error("Tensor3: negative dimension");
}

Tensor3 Tensor3::from_slices(const std::vector<ComplexMatrix>& slices) {
    if (slices.empty()) return {};
    const auto rows = slices.front().rows();
    const auto cols = slices.front().cols();
    Tensor3 t(rows, cols, static_cast<Eigen::Index>(slices.size()));
    for (std::size_t s = 0; s < slices.size(); ++s) t.set_slice(static_cast<Eigen::Index>(s), slices[s]);
    return t;
}

Eigen::Map<ComplexMatrix> Tensor3::slice(Eigen::Index t) {
    if (t < 0 || t >= dims_[2]) throw Error("Tensor3::slice: index out of range");
    return {data_.data() + t * dims_[0] * dims_[1], dims_[0], dims_[1]};
}

Eigen::Map<const ComplexMatrix> Tensor3::slice(Eigen::Index t) const {
    if (t < 0 || t >= dims_[2]) throw Error("Tensor3::slice: index out of range");
    return {data_.data() + t * dims_[0] * dims_[1], dims_[0], dims_[1]};
}

void Tensor3::set_slice(Eigen::Index t, const ComplexMatrix& m) {
    if (m.rows() != dims_[0] || m.cols() != dims_[1]) throw Error("Tensor3::set_slice: shape mismatch");
    slice(t) = m;
}

Tensor3 Tensor3::slices(Eigen::Index first, Eigen::Index count) const {
    if (first < 0 || count < 0 || first + count > dims_[2]) throw Error("Tensor3::slices: range out of bounds");
    Tensor3 out(dims_[0], dims_[1], count);
    const auto stride = dims_[0] * dims_[1];
    std::copy(data_.begin() + first * stride, data_.begin() + (first + count) * stride, out.data_.begin());
    return out;
}

double Tensor3::squared_norm() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return s;
}

ComplexVector vec(const ComplexMatrix& m) {
    return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw Error("unvec: length does not match rows*cols");
    return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

ComplexMatrix mode_unfold(const Tensor3& t, int n) {
    const auto [i1, i2, i3] = t.dims();
    switch (n) {
        case 1:
            return Eigen::Map<const ComplexMatrix>(t.data().data(), i1, i2 * i3);
        case 2: {
            ComplexMatrix out(i2, i1 * i3);
            for (Eigen::Index s = 0; s < i3; ++s) out.middleCols(s * i1, i1) = t.slice(s).transpose();
            return out;
        }
        case 3: {
            ComplexMatrix out(i3, i1 * i2);
            for (Eigen::Index s = 0; s < i3; ++s) out.row(s) = vec(t.slice(s)).transpose();
            return out;
        }
        default:
            throw Error("mode_unfold: mode must be 1, 2 or 3");
    }
}

Tensor3 fold(const ComplexMatrix& m, int n, const Tensor3::Dims& dims) {
    const auto [i1, i2, i3] = dims;
    Tensor3 t(dims);
    switch (n) {
        case 1:
            if (m.rows() != i1 || m.cols() != i2 * i3) break;
            std::copy(m.data(), m.data() + m.size(), t.data().begin());
            return t;
        case 2:
            if (m.rows() != i2 || m.cols() != i1 * i3) break;
            for (Eigen::Index s = 0; s < i3; ++s) t.slice(s) = m.middleCols(s * i1, i1).transpose();
            return t;
        case 3:
            if (m.rows() != i3 || m.cols() != i1 * i2) break;
            for (Eigen::Index s = 0; s < i3; ++s) t.set_slice(s, unvec(m.row(s).transpose(), i1, i2));
            return t;
        default:
            throw Error("fold: mode must be 1, 2 or 3");
    }
    throw Error("fold: matrix shape does not match the requested dimensions");
}

Tensor3 n_mode_product(const Tensor3& t, const ComplexMatrix& m, int n) {
    if (n < 1 || n > 3) throw Error("n_mode_product: mode must be 1, 2 or 3");
    if (m.cols() != t.dim(n)) throw Error("n_mode_product: matrix columns must equal the mode dimension");
    Tensor3::Dims dims = t.dims();
    dims[static_cast<std::size_t>(n - 1)] = m.rows();
    return fold(matmul(m, mode_unfold(t, n)), n, dims);
}

ComplexMatrix pinv(const ComplexMatrix& m, double rel_tol, Eigen::Index& rank) {
    if (!all_finite(m)) throw Error("pinv: non-finite input");
    rank = 0;
    if (m.size() == 0) return ComplexMatrix::Zero(m.cols(), m.rows());
    const auto lo = static_cast<std::uint64_t>(std::min(m.rows(), m.cols()));
    const auto hi = static_cast<std::uint64_t>(std::max(m.rows(), m.cols()));
    flops::add(lo * lo * hi);

    Eigen::BDCSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
    RealVector inv = RealVector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
            ++rank;
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

ComplexMatrix pinv(const ComplexMatrix& m, double rel_tol) {
    Eigen::Index rank = 0;
    return pinv(m, rel_tol, rank);
}

ComplexMatrix dft_matrix(Eigen::Index n) {
    if (n < 1) throw Error("dft_matrix: size must be at least 1");
    ComplexMatrix f(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto jk = static_cast<double>((j * k) % n);
            f(j, k) = std::polar(1.0, -2.0 * std::numbers::pi * jk / static_cast<double>(n));
        }
    return f;
}

Eigen::Index numerical_rank(const ComplexMatrix& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<ComplexMatrix> svd(m);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++r;
    return r;
}

bool all_finite(const ComplexMatrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const auto z = m.data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

}  // namespace bdris
