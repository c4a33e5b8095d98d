// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bdris/beamforming.hpp"
#include "bdris/cnn.hpp"
#include "bdris/metrics.hpp"
#include "bdris/tucker2.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace bdris {

inline constexpr int kConfigSchema = 1;

/// One row of the pilot-overhead table.
struct OverheadRow {
    Topology topology = Topology::FullyConnected;
    int M = 16;
    int groups = 1;
    int T = 20;
};

struct PredictionSettings {
    double ar_loading = 0.1;
    std::vector<int> ar_orders{8, 16, 24};
    int bank_size = 10;
    double bank_kmh_min = 9.0;
    double bank_kmh_max = 360.0;
    std::vector<double> speeds_kmh{9.0, 22.6, 56.9, 143.1, 360.0};
    int train_per_class = 200;
    int val_per_class = 50;
    int test_per_class = 50;
    double noise_relative_power = 1e-3;  ///< training-set perturbation matching the estimation error
    bool derotate = false;
    std::filesystem::path model;  ///< trained CNN weights; trained inline when empty or missing
    CnnHyper hyper;
};

struct ExperimentSpec {
    std::string scenario = "default";
    SystemConfig cfg;
    BalsSettings bals;
    int drops = 200;
    int workers = 1;
    std::vector<double> snr_db{0, 5, 10, 15, 20, 25, 30};     ///< pilot SNR axis of the estimation sweeps
    std::vector<double> downlink_snr_db{0, 10, 20, 30};       ///< sum-rate axis
    std::vector<int> T_list{8, 12, 16, 20, 24, 28};
    int gc_groups = 2;  ///< group count used for the group-connected runs
    int gc_T = 22;      ///< training blocks for the group-connected runs
    PredictionSettings prediction;
    BeamformingOptions beamforming;
    std::vector<OverheadRow> overhead_rows;

    /// Throws Error naming the first violated constraint, including the
    /// identifiability inequality for every configuration the sweep visits.
    void validate() const;

    [[nodiscard]] SystemConfig fully_config() const;
    [[nodiscard]] SystemConfig group_config() const;
};

/// Parses an INI file (sections [meta], [system], [estimation], [experiment],
/// [prediction], [beamforming], [overhead]). Unknown keys are rejected.
ExperimentSpec load_spec(const std::filesystem::path& path);
ExperimentSpec parse_spec(const std::string& text);

/// Number of workers from the BDRIS_WORKERS environment variable, or `fallback`.
int workers_from_env(int fallback);

/// Runs f(0) .. f(n - 1) on up to `workers` threads and returns the results
/// in index order.
template <class R>
std::vector<R> parallel_map(int n, int workers, const std::function<R(int)>& f);

/// A CSV table: header plus rows of already formatted cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::string str() const;
    void write(const std::filesystem::path& path) const;
};

// Per-drop results shared by the experiment drivers and the acceptance tests.

struct EstimationDrop {
    double bals_nmse = 0.0;
    double ls_nmse = 0.0;
    int iterations = 0;
    std::uint64_t bals_flops = 0;
    std::uint64_t ls_flops = 0;
};

/// One drop of estimation at interval 0: cascade NMSE (Theta = I) of
/// Tucker2-BALS with the training book and of DFT-LS with the DFT book.
EstimationDrop estimation_drop(const SystemConfig& cfg, const BalsSettings& bals, std::uint64_t seed,
                               bool run_ls = true);

struct PredictionDrop {
    std::vector<double> cnn_ar;                 ///< NMSE at horizons 0..P
    std::vector<std::vector<double>> raw_ar;    ///< per AR order, horizons 0..P
    int selected_class = -1;
};

/// Estimates the Q measured intervals with BALS, forecasts the next P with
/// the CNN-selected bank model and with raw AR fits, and scores every horizon
/// against the true cascade. Horizon 0 is the last measured interval.
PredictionDrop prediction_drop(const SystemConfig& cfg, const BalsSettings& bals, const PredictionSettings& pred,
                               const CnnModel& model, const PatternBank& bank, std::uint64_t seed);

struct SumRatePoint {
    double perfect = 0.0;
    double proposed = 0.0;
    double conventional = 0.0;
};

struct SumRateDrop {
    std::vector<SumRatePoint> points;  ///< one per downlink SNR
    double bd_objective = 0.0;         ///< optimized objective with perfect CSI at interval 0
    double diag_objective = 0.0;       ///< same with diagonal phases
};

/// Sum rate averaged over the Q + P intervals for perfect, proposed
/// (estimated then predicted) and conventional (LS every interval) CSI.
/// Training runs at cfg.snr_db; `snr_db` is the downlink axis P_d / sigma^2.
SumRateDrop sumrate_drop(const SystemConfig& cfg, const BalsSettings& bals, const PredictionSettings& pred,
                         const BeamformingOptions& bf, const CnnModel& model, const PatternBank& bank,
                         const std::vector<double>& snr_db, std::uint64_t seed);

/// Per-drop results of the sweeps, indexed [point][drop]. Drop d of every
/// point shares the channel seed derive_seed(cfg.seed, d). The prediction
/// drops are dealt round-robin over the speed grid, so speed s holds drops
/// s, s + S, ... and its j-th drop uses seed j.
std::vector<std::vector<EstimationDrop>> collect_nmse_vs_snr(const ExperimentSpec& spec, const SystemConfig& cfg);
std::vector<std::vector<PredictionDrop>> collect_prediction(const ExperimentSpec& spec, const CnnModel& model,
                                                            const PatternBank& bank);
std::vector<SumRateDrop> collect_sumrate(const ExperimentSpec& spec, const SystemConfig& cfg, const CnnModel& model,
                                         const PatternBank& bank);

/// Bank of AR models over the configured speed range.
PatternBank make_bank(const ExperimentSpec& spec);

/// Trains the aging-pattern classifier on synthetic series for the bank.
CnnModel train_cnn(const ExperimentSpec& spec, const PatternBank& bank, TrainingReport* report = nullptr,
                   double* test_accuracy = nullptr);

/// Loads the configured model when present, otherwise trains one.
CnnModel obtain_cnn(const ExperimentSpec& spec, const PatternBank& bank);

// Drivers. Each returns its CSV table and writes nothing; the CLI handles IO.
/// One MetricsReport row per (scheme, SNR, drop) at interval 0.
CsvTable run_estimate(const ExperimentSpec& spec);
CsvTable run_nmse_vs_snr(const ExperimentSpec& spec);
CsvTable run_nmse_vs_T(const ExperimentSpec& spec);
CsvTable run_prediction(const ExperimentSpec& spec, const CnnModel& model, const PatternBank& bank);
CsvTable run_sumrate(const ExperimentSpec& spec, const CnnModel& model, const PatternBank& bank);
CsvTable run_overhead(const ExperimentSpec& spec);

}  // namespace bdris

#include "bdris/parallel.inl"
