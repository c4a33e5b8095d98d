// SPDX-License-Identifier: Apache-2.0
#include "bdris/channel.hpp"
#include "bdris/ls_estimator.hpp"
#include "bdris/tucker2.hpp"

#include <doctest.h>

using namespace bdris;

namespace {

double nmse(const ComplexMatrix& est, const ComplexMatrix& truth) {
    return (est - truth).squaredNorm() / truth.squaredNorm();
}

struct Instance {
    SystemConfig cfg;
    ChannelSet ch;
    PilotBook book;
};

Instance make_instance(int n, int k, int m, int t, int groups, std::uint64_t seed) {
    Instance in;
    in.cfg.N = n;
    in.cfg.K = k;
    in.cfg.M = m;
    in.cfg.T = t;
    in.cfg.groups = groups;
    in.cfg.topology = groups == 1 ? Topology::FullyConnected : Topology::GroupConnected;
    Rng rng(seed);
    in.ch = gen_channel_set(in.cfg, rng);
    in.book = build_training_book(in.cfg, rng);
    return in;
}

}  // namespace

TEST_CASE("noiseless fully-connected recovery") {
    auto in = make_instance(4, 4, 4, 6, 1, 21);
    Rng rng(1);
    const auto obs = simulate_training(in.ch, in.book, 0, 1.0, 0.0, rng);
    BalsSettings s;
    s.seed = 99;
    s.kappa = 1e-24;
    s.i_max = 2000;
    const auto raw = bals_fully(obs, in.book, s);
    const ComplexMatrix I = ComplexMatrix::Identity(4, 4);
    const ComplexMatrix truth = in.ch.H * in.ch.E_series[0];
    CHECK(nmse(cascade(raw, I), truth) < 1e-10);
    const auto res = resolve_scaling(raw, in.ch.H(0, 0));
    CHECK(nmse(res.H_hat, in.ch.H) < 1e-6);
    CHECK(nmse(res.E_hat, in.ch.E_series[0]) < 1e-6);
    CHECK(nmse(cascade(res, I), truth) < 1e-10);
    CHECK(res.iterations <= s.i_max);
    for (std::size_t i = 1; i < raw.residual_history.size(); ++i)
        CHECK(raw.residual_history[i] <= raw.residual_history[i - 1] + 1e-9);
}

TEST_CASE("noiseless group-connected recovery and degenerate grouping") {
    auto in = make_instance(4, 4, 4, 8, 2, 22);
    Rng rng(2);
    const auto obs = simulate_training(in.ch, in.book, 0, 1.0, 0.0, rng);
    const auto parts = split_by_group(obs.Y, in.book);
    BalsSettings tight;
    tight.kappa = 1e-24;
    tight.i_max = 2000;
    const auto res = bals_group(parts, in.book, tight, {in.ch.H(0, 0), in.ch.H(0, 2)});
    CHECK(nmse(res.H_hat, in.ch.H) < 1e-6);
    CHECK(nmse(res.E_hat, in.ch.E_series[0]) < 1e-6);
    for (int g = 0; g < 2; ++g)
        CHECK(nmse(res.H_hat.middleCols(2 * g, 2), in.ch.H.middleCols(2 * g, 2)) < 1e-6);

    auto fc = make_instance(3, 3, 4, 6, 1, 23);
    const auto o = simulate_training(fc.ch, fc.book, 0, 20.0, rng);
    BalsSettings s;
    s.seed = 5;
    const auto a = bals_fully(o, fc.book, s, fc.ch.H(0, 0));
    const auto b = bals_group({o.Y}, fc.book, s, {fc.ch.H(0, 0)});
    CHECK(a.H_hat == b.H_hat);
    CHECK(a.E_hat == b.E_hat);
}

TEST_CASE("Kronecker initialization recovers a Rician instance") {
    for (auto init : {BalsInit::Kronecker}) {
        auto in = make_instance(5, 5, 16, 20, 1, 26);
        Rng rng(6);
        const auto obs = simulate_training(in.ch, in.book, 0, 1.0, 0.0, rng);
        BalsSettings s;
        s.init = init;
        s.kappa = 1e-24;
        s.i_max = 2000;
        const auto res = bals_fully(obs, in.book, s, in.ch.H(0, 0));
        CHECK(nmse(res.H_hat, in.ch.H) < 1e-8);
        CHECK(res.converged);
    }
}

TEST_CASE("BALS edge cases") {
    auto in = make_instance(4, 4, 4, 6, 1, 24);
    const Tensor3 zero(4, 4, 6);
    const auto res = bals_fully(zero, in.book.thetas, {}, cplx(1.0, 0.0));
    CHECK(res.iterations == 1);
    CHECK(res.residual_history.front() == 0.0);
    CHECK((res.H_hat * res.E_hat).norm() == 0.0);
    CHECK(res.degenerate_anchor);

    const Tensor3 small(2, 2, 6);
    auto big = make_instance(4, 4, 16, 6, 1, 25);
    CHECK_THROWS_AS(bals_fully(small, big.book.thetas, {}), Error);
    BalsSettings bad;
    bad.i_max = 0;
    CHECK_THROWS_AS(bals_fully(zero, in.book.thetas, bad), Error);
    bad.i_max = 5;
    bad.kappa = 0.0;
    CHECK_THROWS_AS(bals_fully(zero, in.book.thetas, bad), Error);
}

TEST_CASE("scaling resolution is a gauge fix") {
    Rng rng(3);
    EstimateResult r;
    r.H_hat = complex_gaussian(3, 4, rng);
    r.E_hat = complex_gaussian(4, 2, rng);
    EstimateResult s = r;
    s.H_hat *= 2.0;
    s.E_hat /= 2.0;
    const cplx anchor(0.3, -1.2);
    const auto a = resolve_scaling(r, anchor);
    const auto b = resolve_scaling(s, anchor);
    CHECK((a.H_hat - b.H_hat).norm() < 1e-14);
    CHECK((a.E_hat - b.E_hat).norm() < 1e-14);
    CHECK((a.H_hat * a.E_hat - r.H_hat * r.E_hat).norm() < 1e-12);
    const auto same = resolve_scaling(r, r.H_hat(0, 0));
    CHECK((same.H_hat - r.H_hat).norm() < 1e-15);
    const ComplexMatrix theta = random_symmetric_unitary(4, rng).theta;
    CHECK((cascade(a, theta) - cascade(r, theta)).norm() < 1e-12);
}

TEST_CASE("estimation summary export") {
    EstimateResult r;
    r.iterations = 3;
    r.residual_history = {3.0, 2.0, 1.0};
    const auto js = estimate_summary_json(r);
    CHECK(js.find("\"iterations\": 3") != std::string::npos);
}

TEST_CASE("LS baseline is exact on noiseless data") {
    for (int groups : {1, 2}) {
        SystemConfig cfg;
        cfg.N = 3;
        cfg.K = 2;
        cfg.M = 4;
        cfg.groups = groups;
        cfg.topology = groups == 1 ? Topology::FullyConnected : Topology::GroupConnected;
        Rng rng(4);
        const auto ch = gen_channel_set(cfg, rng);
        const auto book = dft_training_book(cfg);
        CHECK(book.T() == 16 / groups);
        const auto obs = simulate_training(ch, book, 0, 1.0, 0.0, rng);
        const auto est = LsEstimator::from_dft_design(4 / groups, groups);
        const ComplexMatrix z = est.estimate(obs.Y);
        const ComplexMatrix truth = composite_channel(ch.H, ch.E_series[0], groups);
        CHECK(nmse(z, truth) < 1e-20);
        CHECK((ls_estimate(obs.Y, est.phi()) - z).norm() < 1e-10);
        CHECK((est.phi_pinv() - pinv(est.phi())).norm() < 1e-12);

        const ComplexMatrix theta = ReflectionMatrix::from_blocks(
                                        std::vector<ComplexMatrix>(groups, random_symmetric_unitary(4 / groups, rng).theta),
                                        cfg.topology)
                                        .theta;
        const ComplexMatrix g = cascade_from_Z(truth, theta, groups, 3, 2);
        CHECK((g - ch.H * theta * ch.E_series[0]).norm() < 1e-12);
        CHECK(cascade_from_Z(truth, ComplexMatrix::Zero(4, 4), groups, 3, 2).norm() == 0.0);
        CHECK_THROWS_AS(static_cast<void>(est.estimate(Tensor3(3, 2, 3))), Error);
    }
}
