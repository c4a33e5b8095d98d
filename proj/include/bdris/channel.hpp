// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/reflection.hpp"
#include "bdris/system.hpp"

#include <filesystem>
#include <vector>

namespace bdris {

struct ChannelSet {
    ComplexMatrix H;                     ///< N x M, constant over the drop
    std::vector<ComplexMatrix> E_series; ///< M x K per coherence interval
    ComplexMatrix R_ris;
    ComplexMatrix R_bs;

    [[nodiscard]] int N() const { return static_cast<int>(H.rows()); }
    [[nodiscard]] int M() const { return static_cast<int>(H.cols()); }
    [[nodiscard]] int K() const { return E_series.empty() ? 0 : static_cast<int>(E_series.front().cols()); }
    [[nodiscard]] int intervals() const { return static_cast<int>(E_series.size()); }

    bool operator==(const ChannelSet&) const = default;
};

/// Slices G~_t = Y_t X^H / sqrt(Pp), stacked as an N x K x T tensor.
struct PilotObservation {
    Tensor3 Y;
    double noise_power = 0.0;
    double pilot_power = 1.0;
};

/// Exponential correlation rho^|i - j|.
ComplexMatrix gen_correlation(int dim, double rho);

/// Principal square root of a Hermitian PSD matrix.
ComplexMatrix hermitian_sqrt(const ComplexMatrix& r);

/// Outer product a_N(phi_bs) a_M(phi_ris)^H of unit-modulus steering vectors,
/// with both angles drawn uniformly in [-pi/2, pi/2].
ComplexMatrix los_component(int rows, int cols, Rng& rng);

ComplexMatrix gen_H(const SystemConfig& cfg, const ComplexMatrix& R_bs, const ComplexMatrix& R_ris,
                    const ComplexMatrix& los, Rng& rng);
ComplexMatrix gen_H(const SystemConfig& cfg, const ComplexMatrix& R_bs, const ComplexMatrix& R_ris, Rng& rng);

/// `length` consecutive M x K matrices following the configured aging model.
std::vector<ComplexMatrix> gen_E_series(const SystemConfig& cfg, const ComplexMatrix& R_ris, int length, Rng& rng);

/// Draws a full drop: correlations, H and Q + P intervals of E.
ChannelSet gen_channel_set(const SystemConfig& cfg, Rng& rng);

/// SNR form: Pp / sigma^2 = 10^(snr_db / 10) with sigma^2 = 1.
PilotObservation simulate_training(const ChannelSet& ch, const PilotBook& book, int l, double snr_db, Rng& rng);
PilotObservation simulate_training(const ChannelSet& ch, const PilotBook& book, int l, double pilot_power,
                                   double noise_power, Rng& rng);

/// Per-group sub-tensors of a group-major group-connected observation.
std::vector<Tensor3> split_by_group(const Tensor3& y, const PilotBook& book);

/// The noiseless cascade H Theta E for reflection theta.
ComplexMatrix cascade(const ComplexMatrix& H, const ComplexMatrix& theta, const ComplexMatrix& E);

// Bundle IO. The binary layout is a magic tag, a little-endian header of
// unsigned 64-bit dimensions, then each matrix in row-major order with
// interleaved (re, im) doubles.
void save_channel_set(const ChannelSet& ch, const std::filesystem::path& path);
ChannelSet load_channel_set(const std::filesystem::path& path);
void save_channel_set_csv(const ChannelSet& ch, const std::filesystem::path& path);
ChannelSet load_channel_set_csv(const std::filesystem::path& path);

void save_pilot_book(const PilotBook& book, const std::filesystem::path& path);
PilotBook load_pilot_book(const std::filesystem::path& path);
void save_pilot_book_csv(const PilotBook& book, const std::filesystem::path& path);
PilotBook load_pilot_book_csv(const std::filesystem::path& path);

}  // namespace bdris
