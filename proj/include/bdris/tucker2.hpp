// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/channel.hpp"
#include "bdris/reflection.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bdris {

enum class BalsInit {
    Random,     ///< E entries i.i.d. CN(0,1) from the seed
    Kronecker,  ///< nearest Kronecker factor of the minimum-norm composite channel
};

struct BalsSettings {
    double kappa = 1e-6;
    int i_max = 30;
    /// Also stop when |e_i - e_{i-1}| / e_1 <= kappa.
    bool relative_guard = false;
    /// Exact line search along the latest update direction after each sweep.
    bool line_search = true;
    BalsInit init = BalsInit::Kronecker;
    std::uint64_t seed = 1;
    double pinv_tol = kDefaultPinvTol;

    void validate() const;
};

struct EstimateResult {
    ComplexMatrix H_hat;  ///< N x M
    ComplexMatrix E_hat;  ///< M x K
    int iterations = 0;
    std::vector<double> residual_history;
    cplx beta_anchor{0.0, 0.0};
    bool converged = false;
    bool scaled = false;
    bool rank_deficient = false;     ///< a least-squares system lost rank
    bool degenerate_anchor = false;  ///< H_hat(0,0) was zero when scaling
    std::uint64_t init_flops = 0;    ///< counted work of the initialization
    std::uint64_t sweep_flops = 0;   ///< counted work of all iterations
};

/// Tucker2 BALS fit of y (N x K x T, slices H Theta_t E + noise) with known
/// reflections. When an anchor (the true H(0,0)) is given the scaling
/// ambiguity is resolved before returning.
EstimateResult bals_fully(const Tensor3& y, const std::vector<ComplexMatrix>& thetas, const BalsSettings& settings,
                          std::optional<cplx> anchor = std::nullopt);

EstimateResult bals_fully(const PilotObservation& obs, const PilotBook& book, const BalsSettings& settings,
                          std::optional<cplx> anchor = std::nullopt);

/// Runs the fully-connected procedure on each group's blocks. Group g starts
/// from the seed settings.seed + g and is scaled with anchors[g] (the true
/// H(0, g * group_size)) when anchors are supplied.
EstimateResult bals_group(const std::vector<Tensor3>& per_group, const PilotBook& book, const BalsSettings& settings,
                          const std::vector<cplx>& anchors = {});

/// H_hat *= anchor / H_hat(0,0), E_hat /= the same factor.
EstimateResult resolve_scaling(EstimateResult result, cplx anchor);

/// Per-group scaling for a group-connected estimate.
EstimateResult resolve_scaling(EstimateResult result, const std::vector<cplx>& anchors, int groups);

/// H_hat * theta * E_hat.
ComplexMatrix cascade(const EstimateResult& result, const ComplexMatrix& theta);

/// Row-major CSV with columns matrix,row,col,re,im for H_hat and E_hat.
void save_estimate_csv(const EstimateResult& result, const std::filesystem::path& path);

/// JSON run summary: iterations, residual history, flags.
std::string estimate_summary_json(const EstimateResult& result);

}  // namespace bdris
