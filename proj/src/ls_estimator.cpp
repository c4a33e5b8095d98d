// SPDX-License-Identifier: Apache-2.0
#include "bdris/ls_estimator.hpp"

#include "bdris/reflection.hpp"

namespace bdris {

LsEstimator LsEstimator::from_dft_design(int group_size, int groups) {
    ComplexMatrix phi = dft_pilot_phi(group_size, groups);
    ComplexMatrix p = phi.adjoint() / (static_cast<double>(groups) * group_size);
    return {std::move(phi), std::move(p), groups};
}

LsEstimator LsEstimator::from_training_matrix(const ComplexMatrix& phi) {
    Eigen::Index rank = 0;
    ComplexMatrix p = pinv(phi, kDefaultPinvTol, rank);
    if (rank < phi.rows()) throw Error("ls: training matrix is rank deficient");
    return {phi, std::move(p), 1};
}

ComplexMatrix LsEstimator::estimate(const Tensor3& obs) const {
    if (obs.dim(3) != phi_.cols())
        throw Error("ls: expected " + std::to_string(phi_.cols()) + " observed blocks, got " +
                    std::to_string(obs.dim(3)));
    const ComplexMatrix upsilon =
        Eigen::Map<const ComplexMatrix>(obs.data().data(), obs.dim(1) * obs.dim(2), obs.dim(3));
    return matmul(upsilon, phi_pinv_);
}

ComplexMatrix ls_estimate(const Tensor3& obs, const ComplexMatrix& phi) {
    return LsEstimator::from_training_matrix(phi).estimate(obs);
}

ComplexMatrix cascade_from_Z(const ComplexMatrix& Z, const ComplexMatrix& theta, int groups, Eigen::Index N,
                             Eigen::Index K) {
    if (groups < 1 || theta.rows() != theta.cols() || theta.rows() % groups != 0)
        throw Error("cascade_from_Z: reflection does not split into the requested groups");
    const Eigen::Index s = theta.rows() / groups;
    if (Z.rows() != N * K || Z.cols() != groups * s * s) throw Error("cascade_from_Z: dimension mismatch");
    ComplexVector g = ComplexVector::Zero(N * K);
    for (int i = 0; i < groups; ++i) {
        const ComplexMatrix v = vec(theta.block(i * s, i * s, s, s));
        g += matmul(Z.middleCols(i * s * s, s * s), v);
    }
    return unvec(g, N, K);
}

ComplexMatrix composite_channel(const ComplexMatrix& H, const ComplexMatrix& E, int groups) {
    const Eigen::Index m = H.cols();
    if (groups < 1 || m % groups != 0 || E.rows() != m) throw Error("composite_channel: dimension mismatch");
    const Eigen::Index s = m / groups;
    ComplexMatrix z(H.rows() * E.cols(), groups * s * s);
    for (int g = 0; g < groups; ++g)
        z.middleCols(g * s * s, s * s) = kron(E.middleRows(g * s, s).transpose(), H.middleCols(g * s, s));
    return z;
}

}  // namespace bdris
