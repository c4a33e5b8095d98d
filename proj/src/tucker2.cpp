// SPDX-License-Identifier: Apache-2.0
#include "bdris/tucker2.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <iomanip>

namespace bdris {

void BalsSettings::validate() const {
    if (!(kappa > 0.0)) throw Error("bals: kappa must be positive");
    if (i_max < 1) throw Error("bals: i_max must be >= 1");
}

namespace {

ComplexMatrix stack_products(const std::vector<ComplexMatrix>& thetas, const ComplexMatrix& f, bool transpose) {
    const auto m = thetas.front().rows();
    ComplexMatrix out(m, f.cols() * static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t t = 0; t < thetas.size(); ++t)
        out.middleCols(static_cast<Eigen::Index>(t) * f.cols(), f.cols()) =
            transpose ? matmul(thetas[t].transpose(), f) : matmul(thetas[t], f);
    return out;
}

/// Step mu minimizing the residual at B + mu (A - B), where B = (h0, e0) and
/// A = (h1, e1). The residual is a quartic in mu; its stationary points are
/// the real roots of a cubic.
double line_search_step(const ComplexMatrix& y2, const std::vector<ComplexMatrix>& thetas, const ComplexMatrix& h0,
                        const ComplexMatrix& e0, const ComplexMatrix& h1, const ComplexMatrix& e1) {
    const ComplexMatrix dh = h1 - h0;
    const ComplexMatrix de = e1 - e0;
    const ComplexMatrix a0 = stack_products(thetas, h0.transpose(), true);
    const ComplexMatrix ad = stack_products(thetas, dh.transpose(), true);
    const ComplexMatrix r0 = y2 - matmul(e0.transpose(), a0);
    const ComplexMatrix g1 = matmul(de.transpose(), a0) + matmul(e0.transpose(), ad);
    const ComplexMatrix g2 = matmul(de.transpose(), ad);
    auto inner = [](const ComplexMatrix& a, const ComplexMatrix& b) { return (a.conjugate().cwiseProduct(b)).sum().real(); };
    const double c1 = -2.0 * inner(r0, g1);
    const double c2 = g1.squaredNorm() - 2.0 * inner(r0, g2);
    const double c3 = 2.0 * inner(g1, g2);
    const double c4 = g2.squaredNorm();
    auto value = [&](double mu) { return mu * (c1 + mu * (c2 + mu * (c3 + mu * c4))); };
    double best = 1.0;
    double best_val = value(1.0);
    if (c4 <= 0.0) return best;
    Eigen::Matrix3d comp = Eigen::Matrix3d::Zero();
    comp(0, 0) = -3.0 * c3 / (4.0 * c4);
    comp(0, 1) = -2.0 * c2 / (4.0 * c4);
    comp(0, 2) = -c1 / (4.0 * c4);
    comp(1, 0) = 1.0;
    comp(2, 1) = 1.0;
    const Eigen::Vector3cd roots = Eigen::EigenSolver<Eigen::Matrix3d>(comp, false).eigenvalues();
    for (int i = 0; i < 3; ++i) {
        if (std::fabs(roots(i).imag()) > 1e-9 * std::max(1.0, std::abs(roots(i)))) continue;
        const double mu = roots(i).real();
        if (!(mu > 0.0)) continue;
        const double v = value(mu);
        if (v < best_val) {
            best_val = v;
            best = mu;
        }
    }
    return best;
}

/// E from the nearest Kronecker product to the minimum-norm solution of
/// vec(Y_t) = (E^T kron H) vec(Theta_t).
ComplexMatrix kronecker_init(const Tensor3& y, const std::vector<ComplexMatrix>& thetas) {
    const auto [n, k, t] = y.dims();
    const auto m = thetas.front().rows();
    ComplexMatrix w(m * m, t);
    for (Eigen::Index i = 0; i < t; ++i) w.col(i) = vec(thetas[static_cast<std::size_t>(i)]);
    const ComplexMatrix upsilon = Eigen::Map<const ComplexMatrix>(y.data().data(), n * k, t);
    const ComplexMatrix z = matmul(upsilon, pinv(w));
    // rows of the rearrangement index (a, j_a) of E^T, columns (b, j_b) of H
    ComplexMatrix r(k * m, n * m);
    for (Eigen::Index ja = 0; ja < m; ++ja)
        for (Eigen::Index ia = 0; ia < k; ++ia)
            for (Eigen::Index jb = 0; jb < m; ++jb)
                for (Eigen::Index ib = 0; ib < n; ++ib) r(ia + k * ja, ib + n * jb) = z(ia * n + ib, ja * m + jb);
    Eigen::BDCSVD<ComplexMatrix> svd(r, Eigen::ComputeThinU);
    const auto lo = static_cast<std::uint64_t>(std::min(r.rows(), r.cols()));
    flops::add(lo * lo * static_cast<std::uint64_t>(std::max(r.rows(), r.cols())));
    const ComplexVector u = svd.matrixU().col(0) * std::sqrt(svd.singularValues()(0));
    return unvec(u, k, m).transpose();
}

}  // namespace

EstimateResult bals_fully(const Tensor3& y, const std::vector<ComplexMatrix>& thetas, const BalsSettings& settings,
                          std::optional<cplx> anchor) {
    settings.validate();
    const auto [n, k, t] = y.dims();
    if (thetas.empty() || static_cast<Eigen::Index>(thetas.size()) != t)
        throw Error("bals: reflection count must equal the number of observed blocks");
    const auto m = thetas.front().rows();
    for (const auto& th : thetas)
        if (th.rows() != m || th.cols() != m) throw Error("bals: reflections must be square and equally sized");
    if (m > std::min(n * t, k * t))
        throw Error("identifiability: M <= min(N*T, K*T) violated (" + std::to_string(m) + " > " +
                    std::to_string(std::min(n * t, k * t)) + ")");

    const ComplexMatrix y1 = mode_unfold(y, 1);
    const ComplexMatrix y2 = mode_unfold(y, 2);

    EstimateResult res;
    Rng rng(settings.seed);
    const std::uint64_t start_flops = flops::count();
    res.E_hat = settings.init == BalsInit::Kronecker ? kronecker_init(y, thetas) : complex_gaussian(m, k, rng);
    res.init_flops = flops::count() - start_flops;
    ComplexMatrix prev_h;
    ComplexMatrix prev_e;
    double first = 0.0;
    for (int i = 1; i <= settings.i_max; ++i) {
        Eigen::Index rank_h = 0;
        Eigen::Index rank_e = 0;
        const ComplexMatrix a_h = stack_products(thetas, res.E_hat, false);
        res.H_hat = matmul(y1, pinv(a_h, settings.pinv_tol, rank_h));
        ComplexMatrix a_e = stack_products(thetas, res.H_hat.transpose(), true);
        ComplexMatrix e_t = matmul(y2, pinv(a_e, settings.pinv_tol, rank_e));
        res.E_hat = e_t.transpose();
        if (rank_h < m || rank_e < m) res.rank_deficient = true;

        double e = (y2 - matmul(e_t, a_e)).squaredNorm();
        if (settings.line_search && i > 1) {
            const double mu = line_search_step(y2, thetas, prev_h, prev_e, res.H_hat, res.E_hat);
            if (mu != 1.0) {
                const ComplexMatrix h = prev_h + mu * (res.H_hat - prev_h);
                const ComplexMatrix et = (prev_e + mu * (res.E_hat - prev_e)).transpose();
                const ComplexMatrix a = stack_products(thetas, h.transpose(), true);
                const double r = (y2 - matmul(et, a)).squaredNorm();
                if (r < e) {
                    res.H_hat = h;
                    res.E_hat = et.transpose();
                    e = r;
                }
            }
        }
        prev_h = res.H_hat;
        prev_e = res.E_hat;
        res.residual_history.push_back(e);
        res.iterations = i;
        if (i == 1) {
            first = e;
            if (e == 0.0) {
                res.converged = true;
                break;
            }
            continue;
        }
        const double delta = std::fabs(e - res.residual_history[static_cast<std::size_t>(i - 2)]);
        if (delta <= settings.kappa || (settings.relative_guard && delta / std::max(first, 1e-30) <= settings.kappa)) {
            res.converged = true;
            break;
        }
    }
    res.sweep_flops = flops::count() - start_flops - res.init_flops;
    if (anchor) res = resolve_scaling(std::move(res), *anchor);
    return res;
}

EstimateResult bals_fully(const PilotObservation& obs, const PilotBook& book, const BalsSettings& settings,
                          std::optional<cplx> anchor) {
    return bals_fully(obs.Y, book.thetas, settings, anchor);
}

EstimateResult bals_group(const std::vector<Tensor3>& per_group, const PilotBook& book, const BalsSettings& settings,
                          const std::vector<cplx>& anchors) {
    const int groups = book.groups;
    if (static_cast<int>(per_group.size()) != groups) throw Error("bals_group: one observation per group required");
    if (book.T() % groups != 0) throw Error("identifiability: T_g = T / groups must be integral");
    if (!anchors.empty() && static_cast<int>(anchors.size()) != groups)
        throw Error("bals_group: one anchor per group required");
    const int s = book.group_size();
    std::vector<EstimateResult> parts;
    for (int g = 0; g < groups; ++g) {
        BalsSettings gs = settings;
        gs.seed = settings.seed + static_cast<std::uint64_t>(g);
        std::optional<cplx> a;
        if (!anchors.empty()) a = anchors[static_cast<std::size_t>(g)];
        try {
            parts.push_back(bals_fully(per_group[static_cast<std::size_t>(g)], book.group_reflections(g), gs, a));
        } catch (const Error& e) {
            throw Error("group " + std::to_string(g) + ": " + e.what());
        }
    }
    EstimateResult out;
    const auto n = parts.front().H_hat.rows();
    const auto k = parts.front().E_hat.cols();
    out.H_hat.resize(n, static_cast<Eigen::Index>(s) * groups);
    out.E_hat.resize(static_cast<Eigen::Index>(s) * groups, k);
    out.converged = true;
    out.scaled = !anchors.empty();
    std::size_t longest = 0;
    for (const auto& p : parts) longest = std::max(longest, p.residual_history.size());
    out.residual_history.assign(longest, 0.0);
    for (int g = 0; g < groups; ++g) {
        const auto& p = parts[static_cast<std::size_t>(g)];
        out.H_hat.middleCols(static_cast<Eigen::Index>(g) * s, s) = p.H_hat;
        out.E_hat.middleRows(static_cast<Eigen::Index>(g) * s, s) = p.E_hat;
        out.iterations = std::max(out.iterations, p.iterations);
        out.converged = out.converged && p.converged;
        out.rank_deficient = out.rank_deficient || p.rank_deficient;
        out.degenerate_anchor = out.degenerate_anchor || p.degenerate_anchor;
        out.init_flops += p.init_flops;
        out.sweep_flops += p.sweep_flops;
        for (std::size_t i = 0; i < longest; ++i)
            out.residual_history[i] += p.residual_history[std::min(i, p.residual_history.size() - 1)];
    }
    if (!anchors.empty()) out.beta_anchor = anchors.front();
    return out;
}

EstimateResult resolve_scaling(EstimateResult result, cplx anchor) {
    const cplx h11 = result.H_hat(0, 0);
    result.beta_anchor = anchor;
    if (h11 == cplx{0.0, 0.0}) {
        result.degenerate_anchor = true;
        return result;
    }
    const cplx c = anchor / h11;
    result.H_hat *= c;
    result.E_hat /= c;
    result.scaled = true;
    return result;
}

EstimateResult resolve_scaling(EstimateResult result, const std::vector<cplx>& anchors, int groups) {
    if (static_cast<int>(anchors.size()) != groups || groups < 1 || result.H_hat.cols() % groups != 0)
        throw Error("resolve_scaling: one anchor per group required");
    const auto s = result.H_hat.cols() / groups;
    for (int g = 0; g < groups; ++g) {
        const cplx h = result.H_hat(0, g * s);
        if (h == cplx{0.0, 0.0}) {
            result.degenerate_anchor = true;
            continue;
        }
        const cplx c = anchors[static_cast<std::size_t>(g)] / h;
        result.H_hat.middleCols(g * s, s) *= c;
        result.E_hat.middleRows(g * s, s) /= c;
    }
    result.beta_anchor = anchors.front();
    result.scaled = true;
    return result;
}

ComplexMatrix cascade(const EstimateResult& result, const ComplexMatrix& theta) {
    if (theta.rows() != result.H_hat.cols() || theta.cols() != result.E_hat.rows())
        throw Error("cascade: reflection size does not match the estimate");
    return result.H_hat * theta * result.E_hat;
}

void save_estimate_csv(const EstimateResult& result, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << "matrix,row,col,re,im\n" << std::setprecision(17);
    auto dump = [&](const char* name, const ComplexMatrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                os << name << ',' << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag() << '\n';
    };
    dump("H_hat", result.H_hat);
    dump("E_hat", result.E_hat);
}

std::string estimate_summary_json(const EstimateResult& result) {
    nlohmann::json j;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    j["scaled"] = result.scaled;
    j["rank_deficient"] = result.rank_deficient;
    j["degenerate_anchor"] = result.degenerate_anchor;
    j["residual_history"] = result.residual_history;
    j["beta_anchor"] = {result.beta_anchor.real(), result.beta_anchor.imag()};
    return j.dump(2);
}

}  // namespace bdris
