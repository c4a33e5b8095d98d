// SPDX-License-Identifier: Apache-2.0
#include "bdris/system.hpp"

#include <cmath>

namespace bdris {

double SystemConfig::normalized_doppler() const {
    if (speed_mps) return *speed_mps * fc / kSpeedOfLight * Ts;
    return fn;
}

void SystemConfig::validate() const {
    if (N < 1 || K < 1 || M < 1 || groups < 1 || T < 1 || Q < 1 || P < 0 || Tc < 1)
        throw Error("config: counts N, K, M, groups, T, Q, Tc must be >= 1 and P >= 0");
    if (M % groups != 0) throw Error("config: M must equal groups * group_size (M % groups != 0)");
    if (topology == Topology::FullyConnected && groups != 1)
        throw Error("config: a fully-connected RIS has exactly one group");
    if (static_cast<long>(Tc) <= static_cast<long>(K) * T) throw Error("config: Tc > K*T is required");
    if (normalized_doppler() < 0.0) throw Error("config: normalized Doppler must be non-negative");
    if (rho_ris < 0.0 || rho_ris >= 1.0 || rho_bs < 0.0 || rho_bs >= 1.0)
        throw Error("config: correlation coefficients must lie in [0, 1)");
    if (rician_factor < 0.0) throw Error("config: Rician factor must be non-negative");
    if (generator_order < 1) throw Error("config: generator_order must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

cplx complex_normal(Rng& rng) {
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

ComplexMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    ComplexMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal(rng);
    return m;
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

std::string to_string(Topology t) {
    return t == Topology::FullyConnected ? "fully" : "group";
}

Topology topology_from_string(const std::string& s) {
    if (s == "fully" || s == "fully-connected" || s == "FC") return Topology::FullyConnected;
    if (s == "group" || s == "group-connected" || s == "GC") return Topology::GroupConnected;
    throw Error("unknown topology '" + s + "' (expected fully or group)");
}

}  // namespace bdris
