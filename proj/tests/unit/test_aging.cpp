// SPDX-License-Identifier: Apache-2.0
#include "bdris/aging.hpp"
#include "bdris/system.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace bdris;

namespace {

double j0_quadrature(double x) {
    // J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt, midpoint rule
    const int n = 4000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::cos(x * std::sin(std::numbers::pi * (i + 0.5) / n));
    return s / n;
}

RealMatrix loaded_toeplitz(const RealVector& acf, double eps) {
    const int q = static_cast<int>(acf.size()) - 1;
    RealMatrix r(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) r(i, j) = i == j ? acf(0) + eps : acf(std::abs(i - j));
    return r;
}

}  // namespace

TEST_CASE("J0 against independent oracles") {
    CHECK(jakes_acf(0.3, 0) == 1.0);
    CHECK(jakes_acf(0.0, 17) == 1.0);
    CHECK(std::abs(jakes_acf(0.005, 10) - std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * 0.05)) < 1e-10);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i)
        for (int lag = 0; lag < 10; ++lag) {
            const double fn = 0.005 * (i + 1);
            const double x = 2.0 * std::numbers::pi * fn * lag * 4.0;
            worst = std::max(worst, std::abs(jakes_acf(fn, lag * 4) - std::cyl_bessel_j(0.0, x)));
        }
    CHECK(worst < 1e-12);
    for (double x : {0.5, 7.3, 11.9, 12.0, 19.99, 20.0, 20.01, 35.0, 80.0, 400.0})
        CHECK(std::abs(bessel_j0(x) - j0_quadrature(x)) < 1e-12);
    CHECK_THROWS_AS(jakes_acf(-0.1, 1), Error);
}

TEST_CASE("Levinson-Durbin solves the loaded Toeplitz system") {
    const double fn = 0.005;
    const auto m1 = fit_jakes_ar(fn, 1, 0.1);
    CHECK(std::abs(m1.a(0) + jakes_acf(fn, 1) / 1.1) < 1e-15);

    RealVector white = RealVector::Zero(9);
    white(0) = 1.0;
    const auto mw = levinson_durbin(white, 0.1);
    CHECK(mw.a.norm() == 0.0);
    CHECK(std::abs(mw.sigma2_omega - 1.1) < 1e-15);

    for (int q : {4, 16, 32})
        for (double f : {0.0005, 0.005, 0.02, 0.05}) {
            const RealVector acf = jakes_acf_vector(f, q);
            const auto m = levinson_durbin(acf, 0.1);
            const RealVector res = loaded_toeplitz(acf, 0.1) * m.a + acf.tail(q);
            CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
            const RealVector direct = loaded_toeplitz(acf, 0.1).ldlt().solve(-acf.tail(q));
            CHECK((direct - m.a).norm() < 1e-9);
            CHECK(m.max_pole_modulus() < 1.0);
            CHECK(m.sigma2_omega >= 0.0);
        }
    CHECK_THROWS_AS(levinson_durbin(RealVector::Ones(1), 0.1), Error);
}

TEST_CASE("AR prediction recursion") {
    ArModel m;
    m.Q = 2;
    m.a = (RealVector(2) << -1.6, 0.8).finished();
    std::vector<ComplexMatrix> truth;
    truth.push_back(ComplexMatrix::Constant(2, 2, cplx(1.0, 0.5)));
    truth.push_back(ComplexMatrix::Constant(2, 2, cplx(0.3, -0.2)));
    for (int l = 2; l < 12; ++l) truth.push_back(-m.a(0) * truth[l - 1] - m.a(1) * truth[l - 2]);
    const std::vector<ComplexMatrix> hist(truth.begin(), truth.begin() + 4);
    const auto pred = ar_predict(hist, m, 8);
    for (int p = 0; p < 8; ++p) CHECK((pred[p] - truth[4 + p]).norm() < 1e-12 * truth[4 + p].norm() + 1e-14);

    ArModel zero;
    zero.Q = 3;
    zero.a = RealVector::Zero(3);
    for (const auto& p : ar_predict(hist, zero, 3)) CHECK(p.norm() == 0.0);
    CHECK_THROWS_AS(ar_predict(std::vector<ComplexMatrix>(hist.begin(), hist.begin() + 2), zero, 1), Error);

    const auto fitted = fit_jakes_ar(0.0, 16, 0.1);
    Rng rng(5);
    const ComplexMatrix e = complex_gaussian(4, 3, rng);
    const std::vector<ComplexMatrix> constant(16, e);
    const auto one = ar_predict(constant, fitted, 1);
    CHECK((one[0] - e).norm() / e.norm() < 0.1 / 1.1 + 1e-6);
}

TEST_CASE("CSI preprocessing layout") {
    std::vector<ComplexMatrix> one{ComplexMatrix::Constant(1, 1, cplx(0, 1))};
    const RealMatrix c = preprocess_csi(one, 1);
    CHECK(c(0, 0) == 0.0);
    CHECK(c(1, 0) == 1.0);
    Rng rng(8);
    std::vector<ComplexMatrix> hist;
    for (int v = 0; v < 3; ++v) hist.push_back(complex_gaussian(4, 2, rng));
    const RealMatrix h = preprocess_csi(hist, 3);
    CHECK(h.rows() == 8);
    CHECK(h.cols() == 6);
    CHECK(h(5, 3) == hist[1](1, 1).imag());
    const auto back = unpreprocess_csi(h, 2);
    for (int v = 0; v < 3; ++v) CHECK(back[v] == hist[v]);
    std::vector<ComplexMatrix> real{ComplexMatrix::Constant(2, 2, cplx(1.5, 0))};
    CHECK(preprocess_csi(real, 1).bottomRows(2).norm() == 0.0);
    CHECK_THROWS_AS(preprocess_csi(hist, 2), Error);
}

TEST_CASE("sample ACF and raw AR fit") {
    std::vector<ComplexMatrix> hist(10, ComplexMatrix::Constant(3, 3, cplx(1, 1)));
    const RealVector r = sample_acf(hist, 3);
    CHECK(r(0) == doctest::Approx(1.0));
    CHECK(r(1) == doctest::Approx(0.9));
    CHECK(r(3) == doctest::Approx(0.7));
    const auto m = fit_raw_ar(hist, 3, 0.1);
    CHECK(m.max_pole_modulus() < 1.0);
}

TEST_CASE("pattern bank CSV round trip") {
    const auto fns = log_spaced_dopplers(10, 9.0, 360.0, 3e9, 1e-5);
    CHECK(fns.size() == 10);
    CHECK(fns.front() == doctest::Approx(2.5e-4).epsilon(1e-3));
    CHECK(fns.back() == doctest::Approx(1e-2).epsilon(1e-3));
    const auto bank = PatternBank::from_dopplers(fns, 16, 0.1);
    const auto path = std::filesystem::temp_directory_path() / "bdris_bank_test.csv";
    bank.save_csv(path);
    const auto back = PatternBank::load_csv(path);
    REQUIRE(back.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(back.entries[i].fn == bank.entries[i].fn);
        CHECK((back.entries[i].a - bank.entries[i].a).norm() == 0.0);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(PatternBank::from_dopplers({0.01, 0.005}, 4, 0.1), Error);
}
