// SPDX-License-Identifier: Apache-2.0
#include "bdris/beamforming.hpp"

#include "bdris/ls_estimator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>

namespace bdris {

CsiModel CsiModel::from_factors(const ComplexMatrix& H, const ComplexMatrix& E, int groups) {
    return from_composite(composite_channel(H, E, groups), groups, static_cast<int>(H.rows()),
                          static_cast<int>(E.cols()));
}

CsiModel CsiModel::from_composite(const ComplexMatrix& Z, int groups, int N, int K) {
    if (groups < 1 || N < 1 || K < 1 || Z.rows() != static_cast<Eigen::Index>(N) * K || Z.cols() % groups != 0)
        throw Error("CsiModel: composite channel has the wrong shape");
    const auto s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(Z.cols() / groups))));
    if (static_cast<Eigen::Index>(s) * s * groups != Z.cols()) throw Error("CsiModel: block width is not a square");
    if (!all_finite(Z)) throw Error("CsiModel: non-finite CSI");
    return CsiModel{N, K, groups, s, Z};
}

ComplexMatrix CsiModel::cascade(const ComplexMatrix& theta) const {
    if (theta.rows() != M() || theta.cols() != M()) throw Error("CsiModel: reflection size mismatch");
    const Eigen::Index bs = static_cast<Eigen::Index>(group_size) * group_size;
    ComplexVector v = ComplexVector::Zero(Z.rows());
    for (int g = 0; g < groups; ++g)
        v += Z.middleCols(g * bs, bs) * vec(theta.block(g * group_size, g * group_size, group_size, group_size));
    return unvec(v, N, K);
}

ComplexMatrix compute_precoders(const ComplexMatrix& G, PrecoderKind kind) {
    const auto k = G.cols();
    ComplexMatrix u;
    if (kind == PrecoderKind::MatchedFilter) {
        u = G.conjugate();
        for (Eigen::Index i = 0; i < k; ++i) {
            const double n = u.col(i).norm();
            if (n > 0.0) u.col(i) /= n * std::sqrt(static_cast<double>(k));
            else u.col(i).setConstant(cplx(1.0 / std::sqrt(static_cast<double>(u.rows() * k)), 0.0));
        }
        return u;
    }
    u = pinv(G.transpose());
    const double n = u.norm();
    if (!(n > 0.0)) return compute_precoders(G, PrecoderKind::MatchedFilter);
    return u / n;
}

double weighted_sum_power(const ComplexMatrix& G, const ComplexMatrix& U, const std::vector<double>& weights) {
    double f = 0.0;
    for (Eigen::Index k = 0; k < G.cols(); ++k)
        f += weights[static_cast<std::size_t>(k)] * std::norm(G.col(k).cwiseProduct(U.col(k)).sum());
    return f;
}

ComplexMatrix takagi_projection(const ComplexMatrix& a, double rel_tol) {
    const auto m = a.rows();
    if (a.cols() != m) throw Error("takagi_projection: matrix must be square");
    const ComplexMatrix as = 0.5 * (a + a.transpose());
    RealMatrix r(2 * m, 2 * m);
    r.topLeftCorner(m, m) = as.real();
    r.topRightCorner(m, m) = as.imag();
    r.bottomLeftCorner(m, m) = as.imag();
    r.bottomRightCorner(m, m) = -as.real();
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(r);
    const RealVector& ev = es.eigenvalues();
    const double top = ev(2 * m - 1);
    Eigen::Index rank = 0;
    while (rank < m && top > 0.0 && ev(2 * m - 1 - rank) > rel_tol * top) ++rank;
    ComplexMatrix u(m, m);
    for (Eigen::Index i = 0; i < rank; ++i) {
        const RealVector x = es.eigenvectors().col(2 * m - 1 - i);
        u.col(i).real() = x.head(m);
        u.col(i).imag() = x.tail(m);
    }
    if (rank < m) {
        ComplexMatrix q = ComplexMatrix::Identity(m, m);
        if (rank > 0) q = Eigen::HouseholderQR<ComplexMatrix>(u.leftCols(rank)).householderQ() * q;
        u.rightCols(m - rank) = q.rightCols(m - rank);
    }
    const ComplexMatrix theta = u * u.transpose();
    return 0.5 * (theta + theta.transpose());
}

namespace {

ComplexMatrix diagonal_phases(const ComplexMatrix& a) {
    ComplexMatrix d = ComplexMatrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double mag = std::abs(a(i, i));
        d(i, i) = mag > 0.0 ? a(i, i) / mag : cplx(1.0, 0.0);
    }
    return d;
}

/// One minorize-maximize update of every block with the precoders held fixed.
ComplexMatrix update_theta(const CsiModel& csi, const ComplexMatrix& G, const ComplexMatrix& U,
                           const std::vector<double>& weights, bool diagonal) {
    const int s = csi.group_size;
    const Eigen::Index bs = static_cast<Eigen::Index>(s) * s;
    ComplexMatrix theta = ComplexMatrix::Zero(csi.M(), csi.M());
    for (int g = 0; g < csi.groups; ++g) {
        ComplexVector acc = ComplexVector::Zero(bs);
        for (int k = 0; k < csi.K; ++k) {
            const cplx c = G.col(k).cwiseProduct(U.col(k)).sum();
            const ComplexVector w = csi.Z.block(static_cast<Eigen::Index>(k) * csi.N, g * bs, csi.N, bs).transpose() *
                                    U.col(k);
            acc += weights[static_cast<std::size_t>(k)] * c * w.conjugate();
        }
        const ComplexMatrix a = unvec(acc, s, s);
        theta.block(g * s, g * s, s, s) = diagonal ? diagonal_phases(a) : takagi_projection(a);
    }
    return theta;
}

}  // namespace

BeamformingSolution optimize(const CsiModel& csi, Topology topology, const BeamformingOptions& options) {
    if (!all_finite(csi.Z)) throw Error("optimize: non-finite CSI");
    if (options.rounds < 0) throw Error("optimize: negative round count");
    std::vector<double> weights = options.weights;
    if (weights.empty()) weights.assign(static_cast<std::size_t>(csi.K), 1.0 / csi.K);
    if (static_cast<int>(weights.size()) != csi.K) throw Error("optimize: one weight per user required");
    for (double w : weights)
        if (!(w > 0.0)) throw Error("optimize: weights must be positive");

    ComplexMatrix theta;
    if (options.initial) {
        theta = *options.initial;
    } else if (!options.diagonal && options.warm_start) {
        BeamformingOptions diag = options;
        diag.diagonal = true;
        theta = optimize(csi, topology, diag).theta.theta;
    } else {
        theta = ComplexMatrix::Identity(csi.M(), csi.M());
    }
    if (theta.rows() != csi.M() || theta.cols() != csi.M()) throw Error("optimize: initial reflection size mismatch");

    ComplexMatrix G = csi.cascade(theta);
    ComplexMatrix U = compute_precoders(G, options.precoder);
    double f = weighted_sum_power(G, U, weights);
    BeamformingSolution sol;
    sol.objective_trace.push_back(f);
    for (int r = 0; r < options.rounds; ++r) {
        const ComplexMatrix next = update_theta(csi, G, U, weights, options.diagonal);
        const ComplexMatrix Gn = csi.cascade(next);
        const ComplexMatrix Un = compute_precoders(Gn, options.precoder);
        const double fn = weighted_sum_power(Gn, Un, weights);
        if (!(fn > f)) break;
        const double gain = fn - f;
        theta = next;
        G = Gn;
        U = Un;
        f = fn;
        sol.objective_trace.push_back(f);
        if (gain <= options.tolerance * std::max(1.0, f)) break;
    }
    sol.theta.topology = topology;
    sol.theta.groups = csi.groups;
    sol.theta.theta = theta;
    sol.precoders = U;
    sol.weights = weights;
    return sol;
}

double sinr(const BeamformingSolution& sol, const ComplexMatrix& H, const ComplexMatrix& E, int k, double P_d,
            double sigma2) {
    const ComplexMatrix G = H * sol.theta.theta * E;
    if (k < 0 || k >= G.cols()) throw Error("sinr: user index out of range");
    const double a = sol.weights[static_cast<std::size_t>(k)] * P_d;
    double signal = 0.0;
    double interference = 0.0;
    for (Eigen::Index i = 0; i < G.cols(); ++i) {
        const double p = a * std::norm(G.col(k).cwiseProduct(sol.precoders.col(i)).sum());
        if (i == k) signal = p;
        else interference += p;
    }
    return signal / (interference + sigma2);
}

std::vector<double> sinrs(const BeamformingSolution& sol, const ComplexMatrix& H, const ComplexMatrix& E, double P_d,
                          double sigma2) {
    std::vector<double> out;
    for (int k = 0; k < static_cast<int>(E.cols()); ++k) out.push_back(sinr(sol, H, E, k, P_d, sigma2));
    return out;
}

double sum_rate(const std::vector<double>& sinr_values, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("sum_rate: lambda must lie in [0, 1]");
    double r = 0.0;
    for (double s : sinr_values) {
        if (!(s >= 0.0)) throw Error("sum_rate: negative SINR");
        r += std::log2(1.0 + s);
    }
    return lambda * r;
}

}  // namespace bdris
