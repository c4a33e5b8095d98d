// SPDX-License-Identifier: Apache-2.0
#include "bdris/metrics.hpp"

#include "bdris/channel.hpp"
#include "bdris/ls_estimator.hpp"
#include "bdris/reflection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace bdris {

std::string to_string(Scheme s) {
    switch (s) {
    case Scheme::FcConv: return "FC-CONV";
    case Scheme::FcProp: return "FC-PROP";
    case Scheme::GcConv: return "GC-CONV";
    case Scheme::GcProp: return "GC-PROP";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s) {
    for (Scheme v : {Scheme::FcConv, Scheme::FcProp, Scheme::GcConv, Scheme::GcProp})
        if (to_string(v) == s) return v;
    throw Error("unknown scheme '" + s + "'");
}

Topology topology_of(Scheme s) {
    return (s == Scheme::FcConv || s == Scheme::FcProp) ? Topology::FullyConnected : Topology::GroupConnected;
}

bool is_proposed(Scheme s) { return s == Scheme::FcProp || s == Scheme::GcProp; }

double nmse(const ComplexMatrix& est, const ComplexMatrix& truth) {
    if (est.rows() != truth.rows() || est.cols() != truth.cols()) throw Error("nmse: dimension mismatch");
    const double den = truth.squaredNorm();
    if (!(den > 0.0)) throw Error("nmse: true channel is zero");
    return (est - truth).squaredNorm() / den;
}

std::int64_t pilot_length(Scheme s, const SystemConfig& cfg) {
    const std::int64_t qp = cfg.Q + cfg.P;
    const std::int64_t g = cfg.groups;
    const std::int64_t mbar = cfg.group_size();
    switch (s) {
    case Scheme::FcConv: return static_cast<std::int64_t>(cfg.M) * cfg.M * qp;
    case Scheme::FcProp: return static_cast<std::int64_t>(cfg.T + 1) * cfg.Q;
    case Scheme::GcConv: return mbar * mbar * g * qp;
    case Scheme::GcProp: return (cfg.T + g) * cfg.Q;
    }
    return 0;
}

double average_pilot_overhead(Scheme s, const SystemConfig& cfg) {
    return static_cast<double>(pilot_length(s, cfg)) / static_cast<double>(cfg.Q + cfg.P);
}

double overhead_reduction(double prop, double conv) {
    if (!(conv > 0.0)) throw Error("overhead_reduction: conventional overhead must be positive");
    return 100.0 * (1.0 - prop / conv);
}

double data_coefficient(Scheme s, const SystemConfig& cfg) {
    const double tc = cfg.Tc;
    return std::clamp((tc - average_pilot_overhead(s, cfg)) / tc, 0.0, 1.0);
}

double flop_model(Scheme s, const SystemConfig& cfg, int iterations) {
    const double i = iterations;
    const double q = cfg.Q;
    const double qp = cfg.Q + cfg.P;
    const double n = cfg.N;
    const double k = cfg.K;
    const double t = cfg.T;
    const double m = cfg.M;
    const double g = cfg.groups;
    const double mb = cfg.group_size();
    const double prediction = 28514.0 * k * m * q + 64.0 * (q + 1.0) + 8192.0;
    switch (s) {
    case Scheme::FcProp: return i * q * (m * m * t * (k + n) + 2.0 * n * k * t * m) + prediction;
    case Scheme::GcProp: return i * q * g * (mb * mb * t * (k + n) + 2.0 * n * k * t * mb) + prediction;
    case Scheme::FcConv: return qp * std::pow(m, 4) * (1.0 + n * k);
    case Scheme::GcConv: return qp * g * g * std::pow(mb, 4) * (1.0 + n * k);
    }
    return 0.0;
}

FlopMeasurement measure_estimation_flops(Scheme s, const SystemConfig& cfg_in, const BalsSettings& settings, Rng& rng) {
    SystemConfig cfg = cfg_in;
    cfg.topology = topology_of(s);
    if (cfg.topology == Topology::FullyConnected) cfg.groups = 1;
    cfg.validate();
    const ChannelSet ch = gen_channel_set(cfg, rng);
    FlopMeasurement out;
    flops::Scope scope;
    if (is_proposed(s)) {
        const PilotBook book = build_training_book(cfg, rng);
        const PilotObservation obs = simulate_training(ch, book, 0, cfg.snr_db, rng);
        flops::reset();
        const EstimateResult r = cfg.topology == Topology::FullyConnected
                                     ? bals_fully(obs, book, settings)
                                     : bals_group(split_by_group(obs.Y, book), book, settings);
        out.total = flops::count();
        out.iterations = r.iterations;
        out.per_iteration = r.sweep_flops / static_cast<std::uint64_t>(std::max(1, r.iterations));
    } else {
        const PilotBook book = dft_training_book(cfg);
        const PilotObservation obs = simulate_training(ch, book, 0, cfg.snr_db, rng);
        const LsEstimator ls = LsEstimator::from_dft_design(cfg.group_size(), cfg.groups);
        flops::reset();
        (void)ls.estimate(obs.Y);
        out.total = flops::count();
        out.per_iteration = out.total;
    }
    return out;
}

MetricsReport MetricsReport::make(Scheme s, const SystemConfig& cfg) {
    MetricsReport r;
    r.scheme = s;
    r.snr_db = cfg.snr_db;
    r.total_pilot_len = pilot_length(s, cfg);
    r.P_a = average_pilot_overhead(s, cfg);
    return r;
}

double MetricsReport::mean_nmse() const {
    if (nmse_per_interval.empty()) return 0.0;
    return std::accumulate(nmse_per_interval.begin(), nmse_per_interval.end(), 0.0) /
           static_cast<double>(nmse_per_interval.size());
}

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

std::string MetricsReport::csv_header(int intervals) {
    std::string h = "scheme,snr_db,drop,P_a,total_pilot_len,flop_count,mean_sum_rate,mean_nmse";
    for (int l = 0; l < intervals; ++l) h += ",nmse_" + std::to_string(l);
    return h;
}

std::string MetricsReport::csv_row() const {
    std::string row = to_string(scheme) + ',' + format_real(snr_db) + ',' + std::to_string(drop) + ',' +
                      format_real(P_a) + ',' + std::to_string(total_pilot_len) + ',' + std::to_string(flop_count) +
                      ',' + format_real(mean_sum_rate) + ',' + format_real(mean_nmse());
    for (double v : nmse_per_interval) row += ',' + format_real(v);
    return row;
}

}  // namespace bdris
