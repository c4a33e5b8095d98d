// SPDX-License-Identifier: Apache-2.0
#include "bdris/system.hpp"
#include "bdris/tensor.hpp"

#include <doctest.h>

using namespace bdris;

namespace {

Rng rng_for(std::uint64_t s) { return Rng(s); }

Tensor3 random_tensor(Eigen::Index a, Eigen::Index b, Eigen::Index c, Rng& rng) {
    std::vector<ComplexMatrix> s;
    for (Eigen::Index i = 0; i < c; ++i) s.push_back(complex_gaussian(a, b, rng));
    return Tensor3::from_slices(s);
}

double rel(const ComplexMatrix& a, const ComplexMatrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST_CASE("vec stacks columns and round-trips") {
    ComplexMatrix m(2, 2);
    m << 1, 3, 2, 4;
    const ComplexVector v = vec(m);
    for (int i = 0; i < 4; ++i) CHECK(v(i) == cplx(i + 1, 0));
    CHECK(vec(ComplexMatrix::Identity(2, 2)) == (ComplexVector(4) << 1, 0, 0, 1).finished());
    auto rng = rng_for(1);
    const ComplexMatrix r = complex_gaussian(3, 2, rng);
    CHECK(unvec(vec(r), 3, 2) == r);
    CHECK_THROWS_AS(unvec(vec(r), 2, 2), Error);
}

TEST_CASE("kron block structure and the vec identity") {
    CHECK(kron(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(2, 2)) == ComplexMatrix::Identity(4, 4));
    ComplexMatrix two(1, 1), three(1, 1);
    two << 2;
    three << 3;
    CHECK(kron(two, three)(0, 0) == cplx(6, 0));
    auto rng = rng_for(2);
    const ComplexMatrix A = complex_gaussian(2, 2, rng);
    const ComplexMatrix B = complex_gaussian(2, 3, rng);
    const ComplexMatrix C = complex_gaussian(2, 3, rng);
    const ComplexVector lhs = vec(A * B * C.transpose());
    const ComplexVector rhs = kron(C, A) * vec(B);
    CHECK((lhs - rhs).norm() / lhs.norm() < 1e-12);
}

TEST_CASE("unfoldings satisfy the Tucker2 identities") {
    auto rng = rng_for(3);
    const Tensor3 G = random_tensor(3, 4, 5, rng);
    const ComplexMatrix A1 = complex_gaussian(6, 3, rng);
    const ComplexMatrix A2 = complex_gaussian(2, 4, rng);
    const Tensor3 X = n_mode_product(n_mode_product(G, A1, 1), A2, 2);
    const ComplexMatrix I5 = ComplexMatrix::Identity(5, 5);
    CHECK(rel(mode_unfold(X, 1), A1 * mode_unfold(G, 1) * kron(I5, A2).transpose()) < 1e-12);
    CHECK(rel(mode_unfold(X, 2), A2 * mode_unfold(G, 2) * kron(I5, A1).transpose()) < 1e-12);
    for (int n = 1; n <= 3; ++n) CHECK(fold(mode_unfold(X, n), n, X.dims()) == X);
    CHECK(mode_unfold(X, 3).rows() == 5);
    CHECK_THROWS_AS(mode_unfold(X, 4), Error);
}

TEST_CASE("n-mode products") {
    auto rng = rng_for(4);
    const Tensor3 t = random_tensor(3, 4, 2, rng);
    CHECK(n_mode_product(t, ComplexMatrix::Identity(3, 3), 1) == t);
    const ComplexMatrix A = complex_gaussian(5, 3, rng);
    const ComplexMatrix B = complex_gaussian(2, 4, rng);
    const Tensor3 ab = n_mode_product(n_mode_product(t, A, 1), B, 2);
    const Tensor3 ba = n_mode_product(n_mode_product(t, B, 2), A, 1);
    CHECK(rel(mode_unfold(ab, 1), mode_unfold(ba, 1)) < 1e-12);
    Tensor3 s(1, 1, 1);
    s(0, 0, 0) = 2.0;
    ComplexMatrix three(1, 1);
    three << 3;
    CHECK(n_mode_product(s, three, 1)(0, 0, 0) == cplx(6, 0));
    CHECK_THROWS_AS(n_mode_product(t, A, 2), Error);
}

TEST_CASE("pinv satisfies the Moore-Penrose conditions") {
    CHECK(rel(pinv(ComplexMatrix::Identity(3, 3)), ComplexMatrix::Identity(3, 3)) < 1e-15);
    ComplexMatrix d = ComplexMatrix::Zero(2, 2);
    d(0, 0) = 2.0;
    ComplexMatrix expect = ComplexMatrix::Zero(2, 2);
    expect(0, 0) = 0.5;
    CHECK(rel(pinv(d), expect) < 1e-15);

    auto rng = rng_for(5);
    const ComplexMatrix m = complex_gaussian(3, 5, rng);
    CHECK((m * pinv(m) - ComplexMatrix::Identity(3, 3)).norm() < 1e-10);

    const ComplexMatrix deficient = complex_gaussian(6, 2, rng) * complex_gaussian(2, 5, rng);
    Eigen::Index rank = 0;
    const ComplexMatrix p = pinv(deficient, 1e-10, rank);
    CHECK(rank == 2);
    const double tol = 1e-9 * deficient.norm();
    CHECK((deficient * p * deficient - deficient).norm() < tol);
    CHECK((p * deficient * p - p).norm() < 1e-9 * p.norm());
    CHECK(((deficient * p).adjoint() - deficient * p).norm() < 1e-9);
    CHECK(((p * deficient).adjoint() - p * deficient).norm() < 1e-9);

    ComplexMatrix bad = ComplexMatrix::Identity(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(pinv(bad), Error);
}

TEST_CASE("circshift") {
    Eigen::VectorXd v(4);
    v << 1, 2, 3, 4;
    CHECK(circshift(v, 1) == (Eigen::VectorXd(4) << 4, 1, 2, 3).finished());
    CHECK(circshift(v, 4) == v);
    CHECK(circshift(v, 0) == v);
    CHECK(circshift(v, -1) == (Eigen::VectorXd(4) << 2, 3, 4, 1).finished());
}

TEST_CASE("dft matrix") {
    CHECK(dft_matrix(1)(0, 0) == cplx(1, 0));
    const ComplexMatrix f2 = dft_matrix(2);
    CHECK(std::abs(f2(1, 1) - cplx(-1, 0)) < 1e-15);
    CHECK(std::abs(f2(0, 1) - cplx(1, 0)) < 1e-15);
    const ComplexMatrix f4 = dft_matrix(4);
    CHECK((f4.adjoint() * f4 - 4.0 * ComplexMatrix::Identity(4, 4)).norm() < 1e-12);
    CHECK_THROWS_AS(dft_matrix(0), Error);
}

TEST_CASE("flop counter scopes nest") {
    flops::reset();
    auto rng = rng_for(6);
    const ComplexMatrix a = complex_gaussian(2, 3, rng);
    const ComplexMatrix b = complex_gaussian(3, 4, rng);
    {
        flops::Scope s;
        (void)matmul(a, b);
        CHECK(s.elapsed() == 24);
    }
    CHECK(flops::count() == 24);
}

TEST_CASE("kernels are deterministic") {
    auto r1 = rng_for(7);
    auto r2 = rng_for(7);
    const ComplexMatrix a = complex_gaussian(4, 6, r1);
    const ComplexMatrix b = complex_gaussian(4, 6, r2);
    CHECK(a == b);
    CHECK(pinv(a) == pinv(b));
}
