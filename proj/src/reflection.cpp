// SPDX-License-Identifier: Apache-2.0
#include "bdris/reflection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bdris {

ComplexMatrix ReflectionMatrix::block(int g) const {
    const int s = group_size();
    if (g < 0 || g >= groups) throw Error("ReflectionMatrix::block: group index out of range");
    return theta.block(g * s, g * s, s, s);
}

double ReflectionMatrix::symmetry_error() const {
    double worst = 0.0;
    for (int g = 0; g < groups; ++g) {
        const ComplexMatrix b = block(g);
        worst = std::max(worst, (b - b.transpose()).norm());
    }
    return worst;
}

double ReflectionMatrix::unitarity_error() const {
    double worst = 0.0;
    for (int g = 0; g < groups; ++g) {
        const ComplexMatrix b = block(g);
        worst = std::max(worst, (b * b.adjoint() - ComplexMatrix::Identity(b.rows(), b.cols())).norm());
    }
    return worst;
}

double ReflectionMatrix::off_block_norm() const {
    ComplexMatrix rest = theta;
    const int s = group_size();
    for (int g = 0; g < groups; ++g) rest.block(g * s, g * s, s, s).setZero();
    return rest.norm();
}

bool ReflectionMatrix::is_feasible(double tol) const {
    if (theta.rows() != theta.cols() || groups < 1 || M() % groups != 0) return false;
    return symmetry_error() <= tol && unitarity_error() <= tol && off_block_norm() <= tol;
}

ReflectionMatrix ReflectionMatrix::from_blocks(const std::vector<ComplexMatrix>& blocks, Topology topology) {
    if (blocks.empty()) throw Error("ReflectionMatrix::from_blocks: no blocks");
    const auto s = blocks.front().rows();
    const auto g = static_cast<Eigen::Index>(blocks.size());
    ReflectionMatrix r;
    r.topology = topology;
    r.groups = static_cast<int>(g);
    r.theta = ComplexMatrix::Zero(s * g, s * g);
    for (Eigen::Index i = 0; i < g; ++i) {
        if (blocks[static_cast<std::size_t>(i)].rows() != s || blocks[static_cast<std::size_t>(i)].cols() != s)
            throw Error("ReflectionMatrix::from_blocks: blocks must be square and equally sized");
        r.theta.block(i * s, i * s, s, s) = blocks[static_cast<std::size_t>(i)];
    }
    return r;
}

ComplexMatrix haar_unitary(int m, Rng& rng) {
    if (m < 1) throw Error("haar_unitary: size must be >= 1");
    const ComplexMatrix z = complex_gaussian(m, m, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(z);
    const ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(m, m);
    const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    ComplexVector phase(m);
    for (int i = 0; i < m; ++i) {
        const double a = std::abs(r(i, i));
        phase(i) = a > 0.0 ? r(i, i) / a : cplx{1.0, 0.0};
    }
    return q * phase.asDiagonal();
}

ReflectionMatrix random_symmetric_unitary(int m, Rng& rng) {
    const ComplexMatrix u = haar_unitary(m, rng);
    ReflectionMatrix r;
    r.theta = u * u.transpose();
    return r;
}

std::vector<ComplexMatrix> PilotBook::group_reflections(int g) const {
    if (g < 0 || g >= groups) throw Error("PilotBook::group_reflections: group index out of range");
    const int s = group_size();
    const int tg = blocks_per_group();
    std::vector<ComplexMatrix> out;
    out.reserve(static_cast<std::size_t>(tg));
    for (int t = g * tg; t < (g + 1) * tg; ++t)
        out.emplace_back(thetas[static_cast<std::size_t>(t)].block(g * s, g * s, s, s));
    return out;
}

ComplexMatrix pilot_symbols(int K) {
    return dft_matrix(K) / std::sqrt(static_cast<double>(K));
}

IdentifiabilityReport validate_identifiability(const SystemConfig& cfg) {
    IdentifiabilityReport rep;
    std::ostringstream os;
    if (cfg.topology == Topology::FullyConnected) {
        const long lim = std::min(static_cast<long>(cfg.N) * cfg.T, static_cast<long>(cfg.K) * cfg.T);
        if (cfg.M > lim) {
            os << "identifiability: M <= min(N*T, K*T) violated (" << cfg.M << " > " << lim << ")";
            rep.ok = false;
        }
    } else {
        if (cfg.groups < 1 || cfg.M % cfg.groups != 0) {
            os << "identifiability: M must be divisible by the group count";
            rep.ok = false;
        } else if (cfg.T % cfg.groups != 0) {
            os << "identifiability: T_g = T / groups must be integral (T=" << cfg.T << ", groups=" << cfg.groups
               << ")";
            rep.ok = false;
        } else {
            const int tg = cfg.T / cfg.groups;
            const long lim = std::min(static_cast<long>(cfg.N) * tg, static_cast<long>(cfg.K) * tg);
            if (cfg.group_size() > lim) {
                os << "identifiability: Mbar <= min(N*T_g, K*T_g) violated (" << cfg.group_size() << " > " << lim
                   << ")";
                rep.ok = false;
            }
        }
    }
    rep.message = rep.ok ? "ok" : os.str();
    return rep;
}

PilotBook build_training_book(const SystemConfig& cfg, Rng& rng) {
    const auto rep = validate_identifiability(cfg);
    if (!rep) throw Error(rep.message);
    PilotBook book;
    book.topology = cfg.topology;
    book.groups = cfg.topology == Topology::FullyConnected ? 1 : cfg.groups;
    book.X = pilot_symbols(cfg.K);
    const int s = cfg.M / book.groups;
    const int tg = cfg.T / book.groups;
    for (int g = 0; g < book.groups; ++g) {
        for (int t = 0; t < tg; ++t) {
            ComplexMatrix theta = ComplexMatrix::Zero(cfg.M, cfg.M);
            theta.block(g * s, g * s, s, s) = random_symmetric_unitary(s, rng).theta;
            book.thetas.push_back(std::move(theta));
            book.active_group.push_back(book.topology == Topology::FullyConnected ? -1 : g);
        }
    }
    return book;
}

ComplexMatrix dft_pilot_phi(int group_size, int groups) {
    if (group_size < 1 || groups < 1) throw Error("dft_pilot_phi: sizes must be >= 1");
    const Eigen::Index mb = group_size;
    const ComplexMatrix u1 = dft_matrix(mb);
    const ComplexMatrix u2 = u1 / std::sqrt(static_cast<double>(mb));
    const ComplexVector v1 = vec(u1);
    ComplexMatrix psi2(mb * mb, mb * mb);
    for (Eigen::Index m = 0; m < mb; ++m) {
        ComplexVector mask(mb * mb);
        for (Eigen::Index j = 0; j < mb; ++j) mask.segment(j * mb, mb).setConstant(u2(j, m));
        for (Eigen::Index n = 0; n < mb; ++n)
            psi2.col(m * mb + n) = circshift(v1, n * mb).cwiseProduct(mask);
    }
    return kron(dft_matrix(groups), psi2);
}

PilotBook dft_training_book(const SystemConfig& cfg) {
    PilotBook book;
    book.topology = cfg.topology;
    book.groups = cfg.topology == Topology::FullyConnected ? 1 : cfg.groups;
    book.X = pilot_symbols(cfg.K);
    const int s = cfg.M / book.groups;
    const ComplexMatrix phi = dft_pilot_phi(s, book.groups);
    const Eigen::Index blk = static_cast<Eigen::Index>(s) * s;
    for (Eigen::Index t = 0; t < phi.cols(); ++t) {
        ComplexMatrix theta = ComplexMatrix::Zero(cfg.M, cfg.M);
        for (int g = 0; g < book.groups; ++g)
            theta.block(g * s, g * s, s, s) = unvec(phi.col(t).segment(g * blk, blk), s, s);
        book.thetas.push_back(std::move(theta));
        book.active_group.push_back(-1);
    }
    return book;
}

}  // namespace bdris
