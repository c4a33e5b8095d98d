// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/system.hpp"
#include "bdris/tucker2.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bdris {

enum class Scheme { FcConv, FcProp, GcConv, GcProp };

std::string to_string(Scheme s);  ///< "FC-CONV", "FC-PROP", "GC-CONV", "GC-PROP"
Scheme scheme_from_string(const std::string& s);
Topology topology_of(Scheme s);
bool is_proposed(Scheme s);

/// ||est - truth||_F^2 / ||truth||_F^2.
double nmse(const ComplexMatrix& est, const ComplexMatrix& truth);

/// Pilot slots spent over the Q + P intervals. Conventional schemes estimate
/// every interval with a full DFT book; the proposed ones train only the Q
/// measured intervals, with one anchor probe per group.
std::int64_t pilot_length(Scheme s, const SystemConfig& cfg);

/// P_a = pilot_length / (Q + P).
double average_pilot_overhead(Scheme s, const SystemConfig& cfg);

/// 100 (1 - prop / conv).
double overhead_reduction(double prop, double conv);

/// lambda = (Tc - P_a) / Tc, clamped to [0, 1].
double data_coefficient(Scheme s, const SystemConfig& cfg);

/// Leading-order operation count of the complexity table. `iterations` is
/// the BALS iteration count and is ignored by the conventional schemes.
double flop_model(Scheme s, const SystemConfig& cfg, int iterations);

struct FlopMeasurement {
    std::uint64_t total = 0;          ///< everything counted for one estimate
    std::uint64_t per_iteration = 0;  ///< BALS sweep work per iteration; equals total for LS
    int iterations = 1;
};

/// Runs one estimate of the given scheme on a fresh drop and reports the
/// instrumented kernel counters.
FlopMeasurement measure_estimation_flops(Scheme s, const SystemConfig& cfg, const BalsSettings& settings, Rng& rng);

struct MetricsReport {
    Scheme scheme = Scheme::FcProp;
    double snr_db = 0.0;
    int drop = 0;
    std::vector<double> nmse_per_interval;
    double mean_sum_rate = 0.0;
    double P_a = 0.0;
    std::int64_t total_pilot_len = 0;
    std::uint64_t flop_count = 0;

    static MetricsReport make(Scheme s, const SystemConfig& cfg);

    [[nodiscard]] double mean_nmse() const;
    [[nodiscard]] static std::string csv_header(int intervals);
    [[nodiscard]] std::string csv_row() const;
};

/// "%.12e" formatting used by every CSV writer.
std::string format_real(double v);

}  // namespace bdris
