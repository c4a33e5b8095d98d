// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace bdris {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Dense complex third-order array.
///
/// Storage is column-major over (i1, i2, i3): the linear index of entry
/// (i1, i2, i3) is i1 + I1 * (i2 + I2 * i3). Frontal slice t is therefore a
/// contiguous I1 x I2 column-major matrix, and the mode-1 unfolding is the
/// raw buffer viewed as I1 x (I2 * I3).
class Tensor3 {
  public:
    using Dims = std::array<Eigen::Index, 3>;

    Tensor3() = default;
    Tensor3(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3);
    explicit Tensor3(const Dims& dims) : Tensor3(dims[0], dims[1], dims[2]) {}

    /// Stacks equally sized matrices as frontal slices.
    static Tensor3 from_slices(const std::vector<ComplexMatrix>& slices);

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] Eigen::Index dim(int n) const { return dims_.at(static_cast<std::size_t>(n - 1)); }
    [[nodiscard]] Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(data_.size()); }

    cplx& operator()(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3) {
        return data_[static_cast<std::size_t>(i1 + dims_[0] * (i2 + dims_[1] * i3))];
    }
    const cplx& operator()(Eigen::Index i1, Eigen::Index i2, Eigen::Index i3) const {
        return data_[static_cast<std::size_t>(i1 + dims_[0] * (i2 + dims_[1] * i3))];
    }

    [[nodiscard]] Eigen::Map<ComplexMatrix> slice(Eigen::Index t);
    [[nodiscard]] Eigen::Map<const ComplexMatrix> slice(Eigen::Index t) const;
    void set_slice(Eigen::Index t, const ComplexMatrix& m);

    /// Copy of frontal slices [first, first + count).
    [[nodiscard]] Tensor3 slices(Eigen::Index first, Eigen::Index count) const;

    [[nodiscard]] const std::vector<cplx>& data() const noexcept { return data_; }
    [[nodiscard]] std::vector<cplx>& data() noexcept { return data_; }

    [[nodiscard]] double squared_norm() const;

    bool operator==(const Tensor3& other) const = default;

  private:
    Dims dims_{0, 0, 0};
    std::vector<cplx> data_;
};

// ---------------------------------------------------------------------------
// Operation counting. Only the matrix product and SVD kernels below are
// instrumented; counts are complex multiply-accumulates at leading order.
// ---------------------------------------------------------------------------
namespace flops {

std::uint64_t count();
void reset();
void add(std::uint64_t n);

/// Resets the calling thread's counter for its lifetime and restores it after.
class Scope {
  public:
    Scope();
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;
    [[nodiscard]] std::uint64_t elapsed() const;

  private:
    std::uint64_t saved_;
};

}  // namespace flops

/// Counted dense product a * b.
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Column-stacking vectorization.
ComplexVector vec(const ComplexMatrix& m);
ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols);

/// Kronecker product; block (i, j) of the result equals a(i, j) * b.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Mode-n unfolding (n in {1, 2, 3}) with the cyclic column ordering under
/// which [X](1) = A1 [G](1) (I kron A2)^T and [X](2) = A2 [G](2) (I kron A1)^T
/// hold for X = G x1 A1 x2 A2.
ComplexMatrix mode_unfold(const Tensor3& t, int n);
Tensor3 fold(const ComplexMatrix& m, int n, const Tensor3::Dims& dims);

/// t x_n m. Requires m.cols() == t.dim(n).
Tensor3 n_mode_product(const Tensor3& t, const ComplexMatrix& m, int n);

inline constexpr double kDefaultPinvTol = 1e-12;

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// rel_tol * sigma_max are treated as zero.
ComplexMatrix pinv(const ComplexMatrix& m, double rel_tol = kDefaultPinvTol);

/// Same as pinv, also reporting the numerical rank that was kept.
ComplexMatrix pinv(const ComplexMatrix& m, double rel_tol, Eigen::Index& rank);

/// out[i] = v[(i - k) mod len].
template <typename Vec>
Vec circshift(const Vec& v, Eigen::Index k) {
    const Eigen::Index n = v.size();
    Vec out(n);
    if (n == 0) return out;
    const Eigen::Index s = ((k % n) + n) % n;
    for (Eigen::Index i = 0; i < n; ++i) out[(i + s) % n] = v[i];
    return out;
}

/// n x n DFT matrix, entry (j, k) = exp(-2 pi i j k / n).
ComplexMatrix dft_matrix(Eigen::Index n);

/// Numerical rank via SVD with threshold rel_tol * sigma_max.
Eigen::Index numerical_rank(const ComplexMatrix& m, double rel_tol = 1e-8);

bool all_finite(const ComplexMatrix& m);

}  // namespace bdris
