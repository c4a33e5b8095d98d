// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/reflection.hpp"

#include <optional>
#include <vector>

namespace bdris {

/// Downlink CSI seen by the optimizer: the composite channel Z = [Z_1 ... Z_G]
/// with vec(H Theta E) = sum_g Z_g vec(Theta_g). Built either from factor
/// estimates or directly from a least-squares estimate of Z.
struct CsiModel {
    int N = 0;
    int K = 0;
    int groups = 1;
    int group_size = 0;
    ComplexMatrix Z;  ///< NK x groups * group_size^2

    static CsiModel from_factors(const ComplexMatrix& H, const ComplexMatrix& E, int groups);
    static CsiModel from_composite(const ComplexMatrix& Z, int groups, int N, int K);

    [[nodiscard]] int M() const { return groups * group_size; }
    /// N x K cascade for a block-diagonal reflection.
    [[nodiscard]] ComplexMatrix cascade(const ComplexMatrix& theta) const;
};

enum class PrecoderKind {
    MatchedFilter,  ///< u_k proportional to conj(g_k), energy 1/K each
    ZeroForcing,    ///< pseudo-inverse of the effective channel, total energy 1
};

struct BeamformingOptions {
    int rounds = 50;
    double tolerance = 1e-8;  ///< stop when the gain is below tolerance * max(1, F)
    PrecoderKind precoder = PrecoderKind::MatchedFilter;
    bool diagonal = false;    ///< restrict Theta to unit-modulus diagonal phases
    bool warm_start = true;   ///< start the BD search from the diagonal optimum
    std::vector<double> weights;            ///< alpha_k; empty means 1/K each
    std::optional<ComplexMatrix> initial;   ///< starting Theta; identity when absent
};

struct BeamformingSolution {
    ReflectionMatrix theta;
    ComplexMatrix precoders;  ///< N x K, column k is u_k
    std::vector<double> weights;
    std::vector<double> objective_trace;  ///< objective after each accepted round, first entry at the start point

    [[nodiscard]] double objective() const { return objective_trace.back(); }
};

/// Precoders for the effective N x K channel g_k = column k of G.
ComplexMatrix compute_precoders(const ComplexMatrix& G, PrecoderKind kind);

/// sum_k alpha_k |g_k^T u_k|^2.
double weighted_sum_power(const ComplexMatrix& G, const ComplexMatrix& U, const std::vector<double>& weights);

/// Closest symmetric unitary matrix to sym(A) in the real inner product:
/// Takagi factor A_s = V S V^T, result V V^T. Singular directions below the
/// tolerance are completed with an orthonormal complement.
ComplexMatrix takagi_projection(const ComplexMatrix& a, double rel_tol = 1e-12);

/// Alternating maximization of the weighted sum power over the precoders
/// and the reflection blocks.
BeamformingSolution optimize(const CsiModel& csi, Topology topology, const BeamformingOptions& options = {});

/// SINR of user k on the true channel (H, E) with the optimized solution.
double sinr(const BeamformingSolution& sol, const ComplexMatrix& H, const ComplexMatrix& E, int k, double P_d,
            double sigma2);
std::vector<double> sinrs(const BeamformingSolution& sol, const ComplexMatrix& H, const ComplexMatrix& E, double P_d,
                          double sigma2);

/// lambda * sum_k log2(1 + SINR_k).
double sum_rate(const std::vector<double>& sinr_values, double lambda);

}  // namespace bdris
