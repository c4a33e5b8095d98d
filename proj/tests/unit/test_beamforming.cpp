// SPDX-License-Identifier: Apache-2.0
#include "bdris/beamforming.hpp"
#include "bdris/channel.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace bdris;

TEST_CASE("takagi projection is symmetric unitary") {
    Rng rng(11);
    for (int m : {1, 3, 8}) {
        const ComplexMatrix a = complex_gaussian(m, m, rng);
        const ComplexMatrix t = takagi_projection(a);
        CHECK((t - t.transpose()).norm() < 1e-12);
        CHECK((t * t.adjoint() - ComplexMatrix::Identity(m, m)).norm() < 1e-10);
    }
    const ReflectionMatrix r = random_symmetric_unitary(6, rng);
    CHECK((takagi_projection(r.theta) - r.theta).norm() < 1e-10);
}

TEST_CASE("takagi projection of a rank-deficient matrix") {
    Rng rng(12);
    const ComplexVector v = complex_gaussian(5, 1, rng);
    const ComplexMatrix t = takagi_projection(v * v.transpose());
    CHECK((t * t.adjoint() - ComplexMatrix::Identity(5, 5)).norm() < 1e-10);
    CHECK((t - t.transpose()).norm() < 1e-12);
    const ComplexMatrix z = takagi_projection(ComplexMatrix::Zero(3, 3));
    CHECK((z * z.adjoint() - ComplexMatrix::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("scalar RIS aligns the phase") {
    ComplexMatrix h(1, 1);
    ComplexMatrix e(1, 1);
    h << cplx(0.3, -1.2);
    e << cplx(-0.7, 0.4);
    const BeamformingSolution sol = optimize(CsiModel::from_factors(h, e, 1), Topology::FullyConnected);
    const cplx g = (h * sol.theta.theta * e)(0, 0);
    CHECK(std::abs(g) == doctest::Approx(std::abs(h(0, 0)) * std::abs(e(0, 0))));
    CHECK(std::abs(sol.precoders(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("optimized solution invariants") {
    SystemConfig cfg;
    Rng rng(13);
    int better = 0;
    const int drops = 20;
    for (int d = 0; d < drops; ++d) {
        const ChannelSet ch = gen_channel_set(cfg, rng);
        const CsiModel csi = CsiModel::from_factors(ch.H, ch.E_series.front(), 1);
        const BeamformingSolution sol = optimize(csi, Topology::FullyConnected);
        CHECK(sol.theta.is_feasible(1e-10));
        CHECK(std::fabs(sol.precoders.squaredNorm() - 1.0) < 1e-10);
        for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
            CHECK(sol.objective_trace[i] >= sol.objective_trace[i - 1] - 1e-9);

        const ReflectionMatrix init = random_symmetric_unitary(cfg.M, rng);
        const ComplexMatrix G0 = csi.cascade(init.theta);
        const double f0 = weighted_sum_power(G0, compute_precoders(G0, PrecoderKind::MatchedFilter), sol.weights);
        if (sol.objective() > f0) ++better;

        BeamformingOptions diag;
        diag.diagonal = true;
        CHECK(optimize(csi, Topology::FullyConnected, diag).objective() <= sol.objective() + 1e-9);
    }
    CHECK(better == drops);
}

TEST_CASE("gauge invariance") {
    SystemConfig cfg;
    Rng rng(14);
    const ChannelSet ch = gen_channel_set(cfg, rng);
    const cplx c(0.4, -1.7);
    const BeamformingSolution a = optimize(CsiModel::from_factors(ch.H, ch.E_series[0], 1), Topology::FullyConnected);
    const BeamformingSolution b =
        optimize(CsiModel::from_factors(c * ch.H, ch.E_series[0] / c, 1), Topology::FullyConnected);
    CHECK(std::fabs(a.objective() - b.objective()) < 1e-9 * std::max(1.0, a.objective()));
    CHECK((a.theta.theta - b.theta.theta).norm() < 1e-9);
}

TEST_CASE("group-connected blocks stay block diagonal") {
    SystemConfig cfg;
    cfg.groups = 2;
    cfg.topology = Topology::GroupConnected;
    cfg.T = 22;
    Rng rng(15);
    const ChannelSet ch = gen_channel_set(cfg, rng);
    const BeamformingSolution sol =
        optimize(CsiModel::from_factors(ch.H, ch.E_series[0], 2), Topology::GroupConnected);
    CHECK(sol.theta.off_block_norm() == 0.0);
    CHECK(sol.theta.is_feasible(1e-10));
}

TEST_CASE("zero-forcing precoders null the interference") {
    Rng rng(16);
    const ComplexMatrix G = complex_gaussian(5, 3, rng);
    const ComplexMatrix U = compute_precoders(G, PrecoderKind::ZeroForcing);
    const ComplexMatrix cross = G.transpose() * U;
    CHECK(std::fabs(U.squaredNorm() - 1.0) < 1e-12);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(std::abs(cross(i, j)) < 1e-10);
}

TEST_CASE("sinr edge cases") {
    ComplexMatrix h(2, 1);
    h << cplx(1.0, 0.0), cplx(0.0, 1.0);
    ComplexMatrix e(1, 1);
    e << cplx(2.0, 0.0);
    BeamformingSolution sol;
    sol.theta.theta = ComplexMatrix::Identity(1, 1);
    sol.weights = {1.0};
    sol.precoders = compute_precoders(h * e, PrecoderKind::MatchedFilter);
    CHECK(sinr(sol, h, e, 0, 1.0, 0.5) == doctest::Approx(8.0 / 0.5));
    sol.precoders << cplx(0.0, -1.0) / std::sqrt(2.0), cplx(1.0, 0.0) / std::sqrt(2.0);
    CHECK(sinr(sol, h, e, 0, 1.0, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
    sol.precoders = compute_precoders(h * e, PrecoderKind::MatchedFilter);
    CHECK(sinr(sol, h, e, 0, 1.0, std::numeric_limits<double>::infinity()) == 0.0);
    CHECK_THROWS_AS(sinr(sol, h, e, 1, 1.0, 1.0), Error);
}

TEST_CASE("sum rate") {
    CHECK(sum_rate({1, 1, 1, 1, 1}, 1.0) == doctest::Approx(5.0));
    CHECK(sum_rate({3, 7}, 0.0) == 0.0);
    CHECK(sum_rate({1}, (1e4 - 256.0) / 1e4) == doctest::Approx(0.9744));
    CHECK_THROWS_AS(sum_rate({-0.1}, 1.0), Error);
    CHECK_THROWS_AS(sum_rate({1.0}, 1.5), Error);
}

TEST_CASE("non-finite CSI is rejected") {
    ComplexMatrix z = ComplexMatrix::Ones(4, 4);
    z(1, 1) = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    CHECK_THROWS_AS(CsiModel::from_composite(z, 1, 2, 2), Error);
}
