// SPDX-License-Identifier: Apache-2.0
#include "bdris/reflection.hpp"

#include <doctest.h>

using namespace bdris;

TEST_CASE("random symmetric unitary reflections") {
    Rng rng(11);
    const auto one = random_symmetric_unitary(1, rng);
    CHECK(std::abs(std::abs(one.theta(0, 0)) - 1.0) < 1e-14);
    for (int m : {2, 4, 16, 64}) {
        const auto r = random_symmetric_unitary(m, rng);
        CHECK(r.unitarity_error() < 1e-10);
        CHECK(r.symmetry_error() < 1e-12);
        CHECK(r.is_feasible());
    }
    Rng a(1), b(2);
    CHECK((random_symmetric_unitary(4, a).theta - random_symmetric_unitary(4, b).theta).norm() > 0.0);
}

TEST_CASE("fully-connected training book") {
    SystemConfig cfg;
    cfg.M = 4;
    cfg.T = 6;
    Rng rng(3);
    const auto book = build_training_book(cfg, rng);
    CHECK(book.T() == 6);
    CHECK((book.X * book.X.adjoint() - ComplexMatrix::Identity(cfg.K, cfg.K)).norm() < 1e-12);
    for (const auto& t : book.thetas) {
        ReflectionMatrix r{Topology::FullyConnected, 1, t};
        CHECK(r.is_feasible());
    }
    for (int i = 0; i < book.T(); ++i)
        for (int j = i + 1; j < book.T(); ++j) CHECK((book.thetas[i] - book.thetas[j]).norm() > 1e-6);
}

TEST_CASE("group-connected training book schedule") {
    SystemConfig cfg;
    cfg.topology = Topology::GroupConnected;
    cfg.M = 4;
    cfg.groups = 2;
    cfg.T = 8;
    Rng rng(4);
    const auto book = build_training_book(cfg, rng);
    CHECK(book.blocks_per_group() == 4);
    for (int t = 0; t < book.T(); ++t) {
        const int g = book.active_group[t];
        CHECK(g == t / 4);
        ReflectionMatrix r{Topology::GroupConnected, 2, book.thetas[t]};
        CHECK(r.off_block_norm() == 0.0);
        CHECK(r.block(1 - g).norm() == 0.0);
        const ComplexMatrix b = r.block(g);
        CHECK((b * b.adjoint() - ComplexMatrix::Identity(2, 2)).norm() < 1e-10);
        CHECK((b - b.transpose()).norm() < 1e-12);
    }
    CHECK(book.group_reflections(1).size() == 4);
}

TEST_CASE("identifiability") {
    SystemConfig cfg;
    CHECK(validate_identifiability(cfg).ok);
    cfg.N = cfg.K = 2;
    cfg.T = 4;
    const auto rep = validate_identifiability(cfg);
    CHECK_FALSE(rep.ok);
    CHECK(rep.message.find("M <= min(N*T, K*T)") != std::string::npos);

    SystemConfig small;
    small.M = 8;
    small.N = small.K = 2;
    small.T = 3;
    Rng rng(1);
    CHECK_THROWS_AS(build_training_book(small, rng), Error);
    small.M = 4;
    CHECK(validate_identifiability(small).ok);

    SystemConfig gc;
    gc.topology = Topology::GroupConnected;
    gc.groups = 2;
    gc.T = 22;
    CHECK(validate_identifiability(gc).ok);
    gc.T = 21;
    CHECK_FALSE(validate_identifiability(gc).ok);
    gc.T = 2;
    CHECK_FALSE(validate_identifiability(gc).ok);
}

TEST_CASE("DFT pilot matrix") {
    const ComplexMatrix p1 = dft_pilot_phi(1, 1);
    CHECK(p1.rows() == 1);
    CHECK(std::abs(p1(0, 0) - cplx(1, 0)) < 1e-15);

    const ComplexMatrix p2 = dft_pilot_phi(2, 1);
    CHECK(p2.rows() == 4);
    const ComplexMatrix pp = p2 * p2.adjoint();
    const cplx scale = pp(0, 0);
    CHECK((pp - scale * ComplexMatrix::Identity(4, 4)).norm() < 1e-12);

    const ComplexMatrix p3 = dft_pilot_phi(2, 2);
    CHECK(p3.rows() == 8);
    CHECK(numerical_rank(p3) == 8);

    for (int mb : {3, 4, 8}) {
        const ComplexMatrix p = dft_pilot_phi(mb, 2);
        CHECK((p * p.adjoint() - 2.0 * mb * ComplexMatrix::Identity(p.rows(), p.rows())).norm() < 1e-9);
    }
}

TEST_CASE("DFT training book reshapes the pilot columns") {
    SystemConfig cfg;
    cfg.M = 4;
    cfg.topology = Topology::GroupConnected;
    cfg.groups = 2;
    const auto book = dft_training_book(cfg);
    const ComplexMatrix phi = dft_pilot_phi(2, 2);
    CHECK(book.T() == 8);
    for (int t = 0; t < 8; ++t) {
        CHECK(vec(book.thetas[t].block(0, 0, 2, 2)) == phi.col(t).head(4));
        CHECK(vec(book.thetas[t].block(2, 2, 2, 2)) == phi.col(t).tail(4));
    }
}
