// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/tensor.hpp"

#include <vector>

namespace bdris {

/// Least-squares estimator of the composite channel Z = [Z_1 ... Z_G],
/// Z_g = E_g^T kron H_g, from T = G * Mbar^2 observed blocks.
class LsEstimator {
  public:
    /// Uses the closed form pinv(Phi) = Phi^H / (G * Mbar) of the DFT design.
    static LsEstimator from_dft_design(int group_size, int groups);
    /// Pseudo-inverse of an arbitrary full-row-rank training matrix via SVD.
    static LsEstimator from_training_matrix(const ComplexMatrix& phi);

    [[nodiscard]] const ComplexMatrix& phi() const { return phi_; }
    [[nodiscard]] const ComplexMatrix& phi_pinv() const { return phi_pinv_; }
    [[nodiscard]] int groups() const { return groups_; }
    [[nodiscard]] int T() const { return static_cast<int>(phi_.cols()); }

    /// Z_hat = Upsilon * pinv(Phi) with Upsilon = [vec G~_1, ..., vec G~_T].
    [[nodiscard]] ComplexMatrix estimate(const Tensor3& obs) const;

  private:
    LsEstimator(ComplexMatrix phi, ComplexMatrix pinv, int groups)
        : phi_(std::move(phi)), phi_pinv_(std::move(pinv)), groups_(groups) {}
    ComplexMatrix phi_;
    ComplexMatrix phi_pinv_;
    int groups_ = 1;
};

/// One-shot estimate with an SVD pseudo-inverse of phi.
ComplexMatrix ls_estimate(const Tensor3& obs, const ComplexMatrix& phi);

/// unvec(sum_g Z_g vec(Theta_g)) as an N x K matrix, where Theta_g are the
/// diagonal blocks of the block-diagonal reflection theta.
ComplexMatrix cascade_from_Z(const ComplexMatrix& Z, const ComplexMatrix& theta, int groups, Eigen::Index N,
                             Eigen::Index K);

/// The exact composite channel of (H, E) for the given grouping.
ComplexMatrix composite_channel(const ComplexMatrix& H, const ComplexMatrix& E, int groups);

}  // namespace bdris
