// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace bdris {

using Rng = std::mt19937_64;

enum class Topology { FullyConnected, GroupConnected };

/// How the UE-RIS channel evolves across coherence intervals.
enum class AgingModel {
    Autoregressive,  ///< high-order AR process matched to the Jakes ACF
    PhaseRotation,   ///< common Doppler phase factor exp(j 2 pi f_n l)
};

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct SystemConfig {
    int N = 5;        ///< BS antennas
    int K = 5;        ///< single-antenna users
    int M = 16;       ///< RIS elements
    int groups = 1;   ///< group count; group size is M / groups
    Topology topology = Topology::FullyConnected;
    int T = 20;       ///< training blocks per estimated interval
    int Q = 16;       ///< training-phase coherence intervals
    int P = 10;       ///< prediction-phase coherence intervals
    int Tc = 10'000;  ///< slots per coherence interval
    double Ts = 1e-5;
    double fc = 3e9;
    /// User speed in m/s. When set, overrides fn through fn = v fc / c * Ts.
    std::optional<double> speed_mps;
    double fn = 0.005;
    double rician_factor = 2.8;
    double beta_e = 1.0;
    double beta_H = 1.0;
    double rho_ris = 0.5;
    double rho_bs = 0.5;
    double snr_db = 20.0;
    std::uint64_t seed = 1;

    AgingModel aging = AgingModel::Autoregressive;
    int generator_order = 32;
    double generator_loading = 1e-7;

    [[nodiscard]] int group_size() const { return M / groups; }
    [[nodiscard]] int blocks_per_group() const { return T / groups; }
    [[nodiscard]] double normalized_doppler() const;
    [[nodiscard]] int intervals() const { return Q + P; }

    /// Throws Error describing the first violated structural constraint.
    void validate() const;
};

/// SplitMix64 mix of (master, stream). Used to give each drop, group or
/// worker its own independent RNG stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Circularly-symmetric complex Gaussian sample with unit variance.
cplx complex_normal(Rng& rng);
ComplexMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng);

double db_to_linear(double db);

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

}  // namespace bdris
