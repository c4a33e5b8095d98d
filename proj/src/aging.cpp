// SPDX-License-Identifier: Apache-2.0
#include "bdris/aging.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace bdris {

namespace {

constexpr double kSeriesLimit = 12.0;

double j0_series(double x) {
    const long double q = -0.25L * static_cast<long double>(x) * static_cast<long double>(x);
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 1; k < 200; ++k) {
        term *= q / (static_cast<long double>(k) * static_cast<long double>(k));
        sum += term;
        if (std::fabs(term) < 1e-24L && k > x) break;
    }
    return static_cast<double>(sum);
}

double j0_asymptotic(double x) {
    double p = 0.0;
    double qs = 0.0;
    double term = 1.0;  // a_k / x^k
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 60; ++k) {
        if (k > 0) {
            const double odd = 2.0 * k - 1.0;
            term *= -odd * odd / (8.0 * k * x);
        }
        if (std::fabs(term) > prev) break;
        prev = std::fabs(term);
        const double sgn = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
        if (k % 2 == 0) p += sgn * term;
        else qs += sgn * term;
        if (std::fabs(term) < 1e-18) break;
    }
    const double chi = x - 0.25 * std::numbers::pi;
    return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - qs * std::sin(chi));
}

}  // namespace

double bessel_j0(double x) {
    x = std::fabs(x);
    return x < kSeriesLimit ? j0_series(x) : j0_asymptotic(x);
}

double jakes_acf(double fn, int lag) {
    if (!(fn >= 0.0)) throw Error("jakes_acf: normalized Doppler must be non-negative");
    return bessel_j0(2.0 * std::numbers::pi * fn * std::abs(lag));
}

RealVector jakes_acf_vector(double fn, int order) {
    RealVector r(order + 1);
    for (int l = 0; l <= order; ++l) r(l) = jakes_acf(fn, l);
    return r;
}

double ArModel::max_pole_modulus() const {
    if (Q == 0) return 0.0;
    RealMatrix c = RealMatrix::Zero(Q, Q);
    c.row(0) = -a.transpose();
    for (int i = 1; i < Q; ++i) c(i, i - 1) = 1.0;
    Eigen::EigenSolver<RealMatrix> es(c, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

ArModel levinson_durbin(const RealVector& acf, double epsilon) {
    const int q = static_cast<int>(acf.size()) - 1;
    if (q < 1) throw Error("levinson_durbin: order must be >= 1");
    if (!(acf(0) > 0.0)) throw Error("levinson_durbin: acf[0] must be positive");
    if (epsilon < 0.0) throw Error("levinson_durbin: loading must be non-negative");
    const double r0 = acf(0) + epsilon;
    RealVector a = RealVector::Zero(q);
    RealVector prev(q);
    double err = r0;
    for (int k = 1; k <= q; ++k) {
        double acc = acf(k);
        for (int j = 1; j < k; ++j) acc += a(j - 1) * acf(k - j);
        const double lambda = -acc / err;
        if (!(std::fabs(lambda) < 1.0))
            throw Error("levinson_durbin: loaded Toeplitz system is not positive definite (reflection coefficient " +
                        std::to_string(lambda) + " at order " + std::to_string(k) + ")");
        prev.head(k - 1) = a.head(k - 1);
        for (int j = 1; j < k; ++j) a(j - 1) = prev(j - 1) + lambda * prev(k - j - 1);
        a(k - 1) = lambda;
        err *= 1.0 - lambda * lambda;
    }
    ArModel m;
    m.Q = q;
    m.a = a;
    m.epsilon = epsilon;
    m.sigma2_omega = r0 + a.dot(acf.segment(1, q));
    m.fn = -1.0;
    return m;
}

ArModel fit_jakes_ar(double fn, int Q, double epsilon) {
    ArModel m = levinson_durbin(jakes_acf_vector(fn, Q), epsilon);
    m.fn = fn;
    return m;
}

std::vector<ComplexMatrix> ar_predict(const std::vector<ComplexMatrix>& history, const ArModel& model, int horizon) {
    if (static_cast<int>(history.size()) < model.Q)
        throw Error("ar_predict: history holds " + std::to_string(history.size()) + " intervals, order is " +
                    std::to_string(model.Q));
    if (horizon < 0) throw Error("ar_predict: negative horizon");
    if (history.empty()) return std::vector<ComplexMatrix>(static_cast<std::size_t>(horizon));
    std::vector<ComplexMatrix> buf(history.end() - model.Q, history.end());
    const auto rows = history.back().rows();
    const auto cols = history.back().cols();
    std::vector<ComplexMatrix> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int p = 0; p < horizon; ++p) {
        ComplexMatrix next = ComplexMatrix::Zero(rows, cols);
        const auto n = buf.size();
        for (int q = 1; q <= model.Q; ++q) next -= model.a(q - 1) * buf[n - static_cast<std::size_t>(q)];
        buf.push_back(next);
        out.push_back(std::move(next));
    }
    return out;
}

RealVector sample_acf(const std::vector<ComplexMatrix>& history, int order) {
    const int v = static_cast<int>(history.size());
    if (v == 0) throw Error("sample_acf: empty history");
    if (order < 0) throw Error("sample_acf: negative order");
    RealVector r = RealVector::Zero(order + 1);
    for (int lag = 0; lag <= order && lag < v; ++lag) {
        double s = 0.0;
        for (int l = lag; l < v; ++l)
            s += (history[static_cast<std::size_t>(l)].array() *
                  history[static_cast<std::size_t>(l - lag)].array().conjugate())
                     .sum()
                     .real();
        r(lag) = s;
    }
    if (!(r(0) > 0.0)) throw Error("sample_acf: history has zero power");
    return r / r(0);
}

ArModel fit_raw_ar(const std::vector<ComplexMatrix>& history, int Q, double epsilon) {
    return levinson_durbin(sample_acf(history, Q), epsilon);
}

RealMatrix preprocess_csi(const std::vector<ComplexMatrix>& history, int V) {
    if (V < 1 || static_cast<int>(history.size()) != V)
        throw Error("preprocess_csi: expected " + std::to_string(V) + " matrices, got " +
                    std::to_string(history.size()));
    const auto m = history.front().rows();
    const auto k = history.front().cols();
    RealMatrix c(2 * m, V * k);
    for (int v = 0; v < V; ++v) {
        const auto& e = history[static_cast<std::size_t>(v)];
        if (e.rows() != m || e.cols() != k) throw Error("preprocess_csi: inconsistent matrix sizes");
        c.block(0, v * k, m, k) = e.real();
        c.block(m, v * k, m, k) = e.imag();
    }
    return c;
}

std::vector<ComplexMatrix> unpreprocess_csi(const RealMatrix& c, int K) {
    if (K < 1 || c.cols() % K != 0 || c.rows() % 2 != 0) throw Error("unpreprocess_csi: bad shape");
    const auto m = c.rows() / 2;
    std::vector<ComplexMatrix> out;
    for (Eigen::Index v = 0; v < c.cols() / K; ++v) {
        ComplexMatrix e(m, K);
        e.real() = c.block(0, v * K, m, K);
        e.imag() = c.block(m, v * K, m, K);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<ComplexMatrix> derotate(const std::vector<ComplexMatrix>& series, double fn, int l0) {
    std::vector<ComplexMatrix> out;
    out.reserve(series.size());
    for (std::size_t l = 0; l < series.size(); ++l)
        out.push_back(series[l] *
                      std::polar(1.0, -2.0 * std::numbers::pi * fn * static_cast<double>(l0 + static_cast<int>(l))));
    return out;
}

std::vector<double> PatternBank::dopplers() const {
    std::vector<double> f;
    for (const auto& e : entries) f.push_back(e.fn);
    return f;
}

PatternBank PatternBank::from_dopplers(const std::vector<double>& fns, int Q, double epsilon) {
    PatternBank b;
    for (std::size_t i = 0; i < fns.size(); ++i) {
        if (i > 0 && !(fns[i] > fns[i - 1])) throw Error("PatternBank: Doppler values must be strictly increasing");
        b.entries.push_back(fit_jakes_ar(fns[i], Q, epsilon));
    }
    return b;
}

void PatternBank::save_csv(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error("PatternBank: cannot write " + path.string());
    os << "f_n,Q,epsilon,sigma2";
    const int qmax = entries.empty() ? 0 : entries.front().Q;
    for (int q = 1; q <= qmax; ++q) os << ",a" << q;
    os << '\n' << std::setprecision(17);
    for (const auto& e : entries) {
        os << e.fn << ',' << e.Q << ',' << e.epsilon << ',' << e.sigma2_omega;
        for (int q = 0; q < e.Q; ++q) os << ',' << e.a(q);
        os << '\n';
    }
}

PatternBank PatternBank::load_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("PatternBank: cannot read " + path.string());
    std::string line;
    std::getline(is, line);
    PatternBank b;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() < 4) throw Error("PatternBank: malformed row in " + path.string());
        ArModel m;
        m.fn = vals[0];
        m.Q = static_cast<int>(vals[1]);
        m.epsilon = vals[2];
        m.sigma2_omega = vals[3];
        if (static_cast<int>(vals.size()) != 4 + m.Q) throw Error("PatternBank: coefficient count mismatch");
        m.a = Eigen::Map<const RealVector>(vals.data() + 4, m.Q);
        b.entries.push_back(std::move(m));
    }
    return b;
}

double doppler_from_speed(double kmh, double fc, double Ts) {
    return kmh / 3.6 * fc / 299'792'458.0 * Ts;
}

std::vector<double> log_spaced_dopplers(int F, double kmh_min, double kmh_max, double fc, double Ts) {
    if (F < 1) throw Error("log_spaced_dopplers: F must be >= 1");
    std::vector<double> out;
    if (F == 1) {
        out.push_back(doppler_from_speed(kmh_min, fc, Ts));
        return out;
    }
    const double lo = std::log(kmh_min);
    const double hi = std::log(kmh_max);
    for (int i = 0; i < F; ++i)
        out.push_back(doppler_from_speed(std::exp(lo + (hi - lo) * i / (F - 1)), fc, Ts));
    return out;
}

}  // namespace bdris
