// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/system.hpp"

#include <string>
#include <vector>

namespace bdris {

/// BD-RIS reflection matrix. For the group-connected topology theta is block
/// diagonal with `groups` square blocks of equal size.
struct ReflectionMatrix {
    Topology topology = Topology::FullyConnected;
    int groups = 1;
    ComplexMatrix theta;

    [[nodiscard]] int M() const { return static_cast<int>(theta.rows()); }
    [[nodiscard]] int group_size() const { return M() / groups; }
    [[nodiscard]] ComplexMatrix block(int g) const;

    /// Max over blocks of ||B - B^T||_F.
    [[nodiscard]] double symmetry_error() const;
    /// Max over blocks of ||B B^H - I||_F.
    [[nodiscard]] double unitarity_error() const;
    /// Frobenius norm of everything outside the diagonal blocks.
    [[nodiscard]] double off_block_norm() const;
    [[nodiscard]] bool is_feasible(double tol = 1e-10) const;

    static ReflectionMatrix from_blocks(const std::vector<ComplexMatrix>& blocks, Topology topology);
};

/// Theta = U U^T with U Haar-distributed on U(m).
ReflectionMatrix random_symmetric_unitary(int m, Rng& rng);

/// Haar-random unitary from the QR factorization of a complex Gaussian matrix.
ComplexMatrix haar_unitary(int m, Rng& rng);

/// Training reflections and pilot symbols.
///
/// `thetas[t]` is the effective M x M reflection applied in block t. In the
/// group-connected case block t drives only group `active_group[t]` and all
/// other diagonal blocks are zero. Blocks are ordered group-major, so group g
/// owns blocks [g * T_g, (g + 1) * T_g).
struct PilotBook {
    Topology topology = Topology::FullyConnected;
    int groups = 1;
    std::vector<ComplexMatrix> thetas;
    std::vector<int> active_group;  ///< -1 when every group is active
    ComplexMatrix X;                ///< K x K pilot symbols

    [[nodiscard]] int T() const { return static_cast<int>(thetas.size()); }
    [[nodiscard]] int M() const { return thetas.empty() ? 0 : static_cast<int>(thetas.front().rows()); }
    [[nodiscard]] int group_size() const { return M() / groups; }
    [[nodiscard]] int blocks_per_group() const { return T() / groups; }

    /// The group_size x group_size diagonal block g of each training block
    /// assigned to group g.
    [[nodiscard]] std::vector<ComplexMatrix> group_reflections(int g) const;

    bool operator==(const PilotBook&) const = default;
};

/// K x K DFT matrix scaled to be unitary.
ComplexMatrix pilot_symbols(int K);

PilotBook build_training_book(const SystemConfig& cfg, Rng& rng);

/// Phi = F_G kron Psi2, of size G*Mbar^2 square. Column t stacks
/// vec(Theta_{t,1}), ..., vec(Theta_{t,G}).
ComplexMatrix dft_pilot_phi(int group_size, int groups);

/// Training book whose block t uses the reflections encoded in column t of
/// dft_pilot_phi. These are generally not unitary.
PilotBook dft_training_book(const SystemConfig& cfg);

struct IdentifiabilityReport {
    bool ok = true;
    std::string message;
    explicit operator bool() const { return ok; }
};

IdentifiabilityReport validate_identifiability(const SystemConfig& cfg);

}  // namespace bdris
