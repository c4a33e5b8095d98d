// SPDX-License-Identifier: Apache-2.0
#include "bdris/experiments.hpp"

#include "bdris/ls_estimator.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace bdris {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct Field {
    std::string where;
    std::string value;

    [[noreturn]] void fail(const std::string& what) const {
        throw Error("config: " + where + ": expected " + what + ", got '" + value + "'");
    }

    [[nodiscard]] double real() const {
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0' || !std::isfinite(v)) fail("a finite number");
        return v;
    }

    [[nodiscard]] long integer() const {
        char* end = nullptr;
        const long v = std::strtol(value.c_str(), &end, 10);
        if (value.empty() || *end != '\0') fail("an integer");
        return v;
    }

    [[nodiscard]] int count() const {
        const long v = integer();
        if (v < 0 || v > 1'000'000'000) fail("a non-negative integer");
        return static_cast<int>(v);
    }

    [[nodiscard]] bool boolean() const {
        if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
        if (value == "false" || value == "0" || value == "no" || value == "off") return false;
        fail("a boolean");
    }

    [[nodiscard]] std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& item : split(value, ',')) out.push_back(Field{where, item}.real());
        if (out.empty()) fail("a non-empty list");
        return out;
    }

    [[nodiscard]] std::vector<int> counts() const {
        std::vector<int> out;
        for (const auto& item : split(value, ',')) out.push_back(Field{where, item}.count());
        if (out.empty()) fail("a non-empty list");
        return out;
    }
};

using Setter = void (*)(const Field&, ExperimentSpec&);
using Schema = std::map<std::string, std::map<std::string, Setter>>;

std::vector<OverheadRow> parse_overhead_rows(const Field& f) {
    std::vector<OverheadRow> rows;
    for (const auto& item : split(f.value, ';')) {
        std::istringstream is(item);
        std::string topo;
        OverheadRow r;
        if (!(is >> topo >> r.M >> r.groups >> r.T) || !(is >> std::ws).eof())
            Field{f.where, item}.fail("'topology M groups T'");
        try {
            r.topology = topology_from_string(topo);
        } catch (const Error&) {
            Field{f.where, item}.fail("topology 'fully' or 'group'");
        }
        rows.push_back(r);
    }
    if (rows.empty()) f.fail("at least one row");
    return rows;
}

const Schema& schema() {
    static const Schema s = {
        {"meta",
         {
             {"schema",
              [](const Field& f, ExperimentSpec&) {
                  if (f.integer() != kConfigSchema) f.fail("schema " + std::to_string(kConfigSchema));
              }},
             {"scenario", [](const Field& f, ExperimentSpec& e) { e.scenario = f.value; }},
         }},
        {"system",
         {
             {"N", [](const Field& f, ExperimentSpec& e) { e.cfg.N = f.count(); }},
             {"K", [](const Field& f, ExperimentSpec& e) { e.cfg.K = f.count(); }},
             {"M", [](const Field& f, ExperimentSpec& e) { e.cfg.M = f.count(); }},
             {"groups", [](const Field& f, ExperimentSpec& e) { e.cfg.groups = f.count(); }},
             {"topology",
              [](const Field& f, ExperimentSpec& e) {
                  try {
                      e.cfg.topology = topology_from_string(f.value);
                  } catch (const Error&) {
                      f.fail("'fully' or 'group'");
                  }
              }},
             {"T", [](const Field& f, ExperimentSpec& e) { e.cfg.T = f.count(); }},
             {"Q", [](const Field& f, ExperimentSpec& e) { e.cfg.Q = f.count(); }},
             {"P", [](const Field& f, ExperimentSpec& e) { e.cfg.P = f.count(); }},
             {"Tc", [](const Field& f, ExperimentSpec& e) { e.cfg.Tc = f.count(); }},
             {"Ts", [](const Field& f, ExperimentSpec& e) { e.cfg.Ts = f.real(); }},
             {"fc", [](const Field& f, ExperimentSpec& e) { e.cfg.fc = f.real(); }},
             {"fn", [](const Field& f, ExperimentSpec& e) { e.cfg.fn = f.real(); }},
             {"speed_kmh", [](const Field& f, ExperimentSpec& e) { e.cfg.speed_mps = f.real() / 3.6; }},
             {"rician_factor", [](const Field& f, ExperimentSpec& e) { e.cfg.rician_factor = f.real(); }},
             {"beta_e", [](const Field& f, ExperimentSpec& e) { e.cfg.beta_e = f.real(); }},
             {"beta_H", [](const Field& f, ExperimentSpec& e) { e.cfg.beta_H = f.real(); }},
             {"rho_ris", [](const Field& f, ExperimentSpec& e) { e.cfg.rho_ris = f.real(); }},
             {"rho_bs", [](const Field& f, ExperimentSpec& e) { e.cfg.rho_bs = f.real(); }},
             {"snr_db", [](const Field& f, ExperimentSpec& e) { e.cfg.snr_db = f.real(); }},
             {"seed",
              [](const Field& f, ExperimentSpec& e) {
                  char* end = nullptr;
                  const auto v = std::strtoull(f.value.c_str(), &end, 10);
                  if (f.value.empty() || *end != '\0' || f.value.front() == '-') f.fail("an unsigned integer");
                  e.cfg.seed = v;
              }},
             {"aging",
              [](const Field& f, ExperimentSpec& e) {
                  if (f.value == "ar")
                      e.cfg.aging = AgingModel::Autoregressive;
                  else if (f.value == "rotation")
                      e.cfg.aging = AgingModel::PhaseRotation;
                  else
                      f.fail("'ar' or 'rotation'");
              }},
             {"generator_order", [](const Field& f, ExperimentSpec& e) { e.cfg.generator_order = f.count(); }},
             {"generator_loading", [](const Field& f, ExperimentSpec& e) { e.cfg.generator_loading = f.real(); }},
         }},
        {"estimation",
         {
             {"kappa", [](const Field& f, ExperimentSpec& e) { e.bals.kappa = f.real(); }},
             {"i_max", [](const Field& f, ExperimentSpec& e) { e.bals.i_max = f.count(); }},
             {"relative_guard", [](const Field& f, ExperimentSpec& e) { e.bals.relative_guard = f.boolean(); }},
             {"line_search", [](const Field& f, ExperimentSpec& e) { e.bals.line_search = f.boolean(); }},
             {"init",
              [](const Field& f, ExperimentSpec& e) {
                  if (f.value == "kronecker")
                      e.bals.init = BalsInit::Kronecker;
                  else if (f.value == "random")
                      e.bals.init = BalsInit::Random;
                  else
                      f.fail("'kronecker' or 'random'");
              }},
         }},
        {"experiment",
         {
             {"drops", [](const Field& f, ExperimentSpec& e) { e.drops = f.count(); }},
             {"workers", [](const Field& f, ExperimentSpec& e) { e.workers = f.count(); }},
             {"snr_db", [](const Field& f, ExperimentSpec& e) { e.snr_db = f.reals(); }},
             {"downlink_snr_db", [](const Field& f, ExperimentSpec& e) { e.downlink_snr_db = f.reals(); }},
             {"T_list", [](const Field& f, ExperimentSpec& e) { e.T_list = f.counts(); }},
             {"gc_groups", [](const Field& f, ExperimentSpec& e) { e.gc_groups = f.count(); }},
             {"gc_T", [](const Field& f, ExperimentSpec& e) { e.gc_T = f.count(); }},
         }},
        {"prediction",
         {
             {"ar_loading", [](const Field& f, ExperimentSpec& e) { e.prediction.ar_loading = f.real(); }},
             {"ar_orders", [](const Field& f, ExperimentSpec& e) { e.prediction.ar_orders = f.counts(); }},
             {"bank_size", [](const Field& f, ExperimentSpec& e) { e.prediction.bank_size = f.count(); }},
             {"bank_kmh_min", [](const Field& f, ExperimentSpec& e) { e.prediction.bank_kmh_min = f.real(); }},
             {"bank_kmh_max", [](const Field& f, ExperimentSpec& e) { e.prediction.bank_kmh_max = f.real(); }},
             {"speeds_kmh", [](const Field& f, ExperimentSpec& e) { e.prediction.speeds_kmh = f.reals(); }},
             {"train_per_class", [](const Field& f, ExperimentSpec& e) { e.prediction.train_per_class = f.count(); }},
             {"val_per_class", [](const Field& f, ExperimentSpec& e) { e.prediction.val_per_class = f.count(); }},
             {"test_per_class", [](const Field& f, ExperimentSpec& e) { e.prediction.test_per_class = f.count(); }},
             {"noise_relative_power",
              [](const Field& f, ExperimentSpec& e) { e.prediction.noise_relative_power = f.real(); }},
             {"derotate", [](const Field& f, ExperimentSpec& e) { e.prediction.derotate = f.boolean(); }},
             {"model", [](const Field& f, ExperimentSpec& e) { e.prediction.model = f.value; }},
             {"learning_rate", [](const Field& f, ExperimentSpec& e) { e.prediction.hyper.learning_rate = f.real(); }},
             {"batch", [](const Field& f, ExperimentSpec& e) { e.prediction.hyper.batch = f.count(); }},
             {"max_epochs", [](const Field& f, ExperimentSpec& e) { e.prediction.hyper.max_epochs = f.count(); }},
             {"patience", [](const Field& f, ExperimentSpec& e) { e.prediction.hyper.patience = f.count(); }},
         }},
        {"beamforming",
         {
             {"rounds", [](const Field& f, ExperimentSpec& e) { e.beamforming.rounds = f.count(); }},
             {"tolerance", [](const Field& f, ExperimentSpec& e) { e.beamforming.tolerance = f.real(); }},
             {"precoder",
              [](const Field& f, ExperimentSpec& e) {
                  if (f.value == "matched")
                      e.beamforming.precoder = PrecoderKind::MatchedFilter;
                  else if (f.value == "zf")
                      e.beamforming.precoder = PrecoderKind::ZeroForcing;
                  else
                      f.fail("'matched' or 'zf'");
              }},
         }},
        {"overhead",
         {
             {"rows", [](const Field& f, ExperimentSpec& e) { e.overhead_rows = parse_overhead_rows(f); }},
         }},
    };
    return s;
}

std::vector<OverheadRow> default_overhead_rows() {
    return {
        {Topology::FullyConnected, 16, 1, 20}, {Topology::FullyConnected, 32, 1, 36},
        {Topology::FullyConnected, 64, 1, 78}, {Topology::GroupConnected, 16, 2, 22},
        {Topology::GroupConnected, 32, 2, 40}, {Topology::GroupConnected, 64, 2, 84},
    };
}

}  // namespace

ExperimentSpec parse_spec(const std::string& text) {
    boost::property_tree::ptree tree;
    std::istringstream is(text);
    try {
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(std::string("config: ") + e.what());
    }
    ExperimentSpec spec;
    spec.overhead_rows = default_overhead_rows();
    const Schema& sch = schema();
    for (const auto& [section, body] : tree) {
        const auto sec = sch.find(section);
        if (sec == sch.end()) throw Error("config: unknown section [" + section + "]");
        if (body.empty() && !body.data().empty())
            throw Error("config: key '" + section + "' must be inside a section");
        for (const auto& [key, node] : body) {
            const auto it = sec->second.find(key);
            if (it == sec->second.end()) throw Error("config: unknown key '" + key + "' in [" + section + "]");
            it->second(Field{"[" + section + "] " + key, trim(node.data())}, spec);
        }
    }
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse_spec(os.str());
}

SystemConfig ExperimentSpec::fully_config() const {
    SystemConfig c = cfg;
    c.topology = Topology::FullyConnected;
    c.groups = 1;
    return c;
}

SystemConfig ExperimentSpec::group_config() const {
    SystemConfig c = cfg;
    c.topology = Topology::GroupConnected;
    c.groups = gc_groups;
    c.T = gc_T;
    return c;
}

void ExperimentSpec::validate() const {
    const auto check_cfg = [](const SystemConfig& c) {
        c.validate();
        const auto rep = validate_identifiability(c);
        if (!rep) throw Error(rep.message);
    };
    check_cfg(cfg);
    bals.validate();
    if (drops < 1) throw Error("config: drops >= 1 is required");
    if (workers < 0) throw Error("config: workers must be non-negative");
    if (snr_db.empty() || downlink_snr_db.empty() || T_list.empty())
        throw Error("config: sweep lists must be non-empty");
    check_cfg(fully_config());
    if (gc_groups < 1) throw Error("config: gc_groups >= 1 is required");
    check_cfg(group_config());
    for (int t : T_list) {
        SystemConfig c = fully_config();
        c.T = t;
        check_cfg(c);
    }
    const auto& p = prediction;
    if (p.ar_loading <= 0.0) throw Error("config: ar_loading > 0 is required");
    for (int q : p.ar_orders)
        if (q < 1) throw Error("config: AR orders must be >= 1");
    if (p.bank_size < 1) throw Error("config: bank_size >= 1 is required");
    if (!(p.bank_kmh_min > 0.0) || p.bank_kmh_max < p.bank_kmh_min)
        throw Error("config: 0 < bank_kmh_min <= bank_kmh_max is required");
    if (p.speeds_kmh.empty()) throw Error("config: speeds_kmh must be non-empty");
    for (double v : p.speeds_kmh)
        if (v < 0.0) throw Error("config: speeds must be non-negative");
    if (p.train_per_class < 1 || p.val_per_class < 1 || p.test_per_class < 1)
        throw Error("config: dataset sizes must be >= 1 per class");
    if (p.noise_relative_power < 0.0) throw Error("config: noise_relative_power must be non-negative");
    if (p.hyper.learning_rate <= 0.0 || p.hyper.batch < 1 || p.hyper.patience < 1)
        throw Error("config: learning_rate > 0, batch >= 1 and patience >= 1 are required");
    if (cfg.Q < 2) throw Error("config: Q >= 2 is required by the aging classifier");
    if (beamforming.rounds < 1) throw Error("config: beamforming rounds >= 1 is required");
    for (const auto& r : overhead_rows) {
        SystemConfig c = cfg;
        c.topology = r.topology;
        c.M = r.M;
        c.groups = r.groups;
        c.T = r.T;
        check_cfg(c);
    }
}

int workers_from_env(int fallback) {
    const char* v = std::getenv("BDRIS_WORKERS");
    if (v == nullptr || *v == '\0') return fallback;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096) throw Error(std::string("BDRIS_WORKERS: expected a positive integer, got '") + v + "'");
    return static_cast<int>(n);
}

std::string CsvTable::str() const {
    std::ostringstream os;
    const auto line = [&os](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << str();
    if (!out) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Per-drop kernels
// ---------------------------------------------------------------------------

namespace {

int effective_groups(const SystemConfig& cfg) {
    return cfg.topology == Topology::FullyConnected ? 1 : cfg.groups;
}

std::vector<cplx> anchors_of(const ComplexMatrix& H, const SystemConfig& cfg) {
    std::vector<cplx> a;
    const int g = effective_groups(cfg);
    for (int i = 0; i < g; ++i) a.push_back(H(0, i * (cfg.M / g)));
    return a;
}

EstimateResult estimate_proposed(const PilotObservation& obs, const PilotBook& book, const SystemConfig& cfg,
                                 const BalsSettings& bals, const ComplexMatrix& H) {
    const auto anchors = anchors_of(H, cfg);
    if (cfg.topology == Topology::FullyConnected) return bals_fully(obs, book, bals, anchors.front());
    return bals_group(split_by_group(obs.Y, book), book, bals, anchors);
}

ComplexMatrix estimate_ls(const PilotObservation& obs, const SystemConfig& cfg) {
    return LsEstimator::from_dft_design(cfg.M / effective_groups(cfg), effective_groups(cfg)).estimate(obs.Y);
}

ComplexMatrix identity_cascade_ls(const ComplexMatrix& Z, const SystemConfig& cfg) {
    return cascade_from_Z(Z, ComplexMatrix::Identity(cfg.M, cfg.M), effective_groups(cfg), cfg.N, cfg.K);
}

/// Least-squares E for a fixed H over every training block of one interval.
ComplexMatrix solve_E(const ComplexMatrix& H, const PilotObservation& obs, const PilotBook& book) {
    const Eigen::Index m = H.cols();
    ComplexMatrix gram = ComplexMatrix::Zero(m, m);
    ComplexMatrix rhs = ComplexMatrix::Zero(m, obs.Y.dim(2));
    for (int t = 0; t < book.T(); ++t) {
        const ComplexMatrix A = H * book.thetas[static_cast<std::size_t>(t)];
        gram.noalias() += A.adjoint() * A;
        rhs.noalias() += A.adjoint() * obs.Y.slice(t);
    }
    return gram.colPivHouseholderQr().solve(rhs);
}

/// BALS on each of the Q training intervals; H averaged over the intervals
/// and E re-solved against the average.
struct TrainingEstimate {
    ComplexMatrix H;
    std::vector<ComplexMatrix> E;
};

TrainingEstimate estimate_training_phase(const ChannelSet& ch, const PilotBook& book, const SystemConfig& cfg,
                                         const BalsSettings& bals, double snr_db, Rng& rng) {
    std::vector<PilotObservation> obs;
    TrainingEstimate out;
    out.H = ComplexMatrix::Zero(cfg.N, cfg.M);
    for (int l = 0; l < cfg.Q; ++l) {
        obs.push_back(simulate_training(ch, book, l, snr_db, rng));
        out.H += estimate_proposed(obs.back(), book, cfg, bals, ch.H).H_hat;
    }
    out.H /= static_cast<double>(cfg.Q);
    for (const auto& o : obs) out.E.push_back(solve_E(out.H, o, book));
    return out;
}

/// History padded with leading zeros to at least `order` entries.
std::vector<ComplexMatrix> padded(const std::vector<ComplexMatrix>& history, int order) {
    if (static_cast<int>(history.size()) >= order) return history;
    std::vector<ComplexMatrix> out(static_cast<std::size_t>(order) - history.size(),
                                   ComplexMatrix::Zero(history.front().rows(), history.front().cols()));
    out.insert(out.end(), history.begin(), history.end());
    return out;
}

struct CnnForecast {
    std::vector<ComplexMatrix> E;
    int selected = -1;
};

CnnForecast cnn_ar_forecast(const std::vector<ComplexMatrix>& history, const PredictionSettings& pred,
                            const CnnModel& model, const PatternBank& bank, int horizon) {
    const int K = static_cast<int>(history.front().cols());
    const RealMatrix c = preprocess_csi(history, static_cast<int>(history.size()));
    const int cls = bank.size() == 1 ? 0 : cnn_predict_class(model, cnn_features(c, K));
    const ArModel& ar = bank.entries[static_cast<std::size_t>(cls)];
    CnnForecast out;
    out.selected = cls;
    if (!pred.derotate) {
        out.E = ar_predict(padded(history, ar.Q), ar, horizon);
        return out;
    }
    const int q = static_cast<int>(history.size());
    const auto base = padded(derotate(history, ar.fn), ar.Q);
    out.E = derotate(ar_predict(base, ar, horizon), -ar.fn, q);
    return out;
}

void check_model(const CnnModel& model, const PatternBank& bank, const SystemConfig& cfg) {
    const auto& a = model.architecture();
    if (a.rows != 2 * cfg.M || a.cols != (cfg.Q - 1) * cfg.K)
        throw Error("aging classifier input is " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                    ", the configuration needs " + std::to_string(2 * cfg.M) + "x" +
                    std::to_string((cfg.Q - 1) * cfg.K));
    if (a.outputs != bank.size())
        throw Error("aging classifier has " + std::to_string(a.outputs) + " outputs, the bank has " +
                    std::to_string(bank.size()) + " entries");
}

int worker_count(const ExperimentSpec& spec) { return spec.workers > 0 ? spec.workers : 1; }

std::string fmt(double v) { return format_real(v); }

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

EstimationDrop estimation_drop(const SystemConfig& cfg, const BalsSettings& bals, std::uint64_t seed, bool run_ls) {
    Rng rng(seed);
    const ChannelSet ch = gen_channel_set(cfg, rng);
    const ComplexMatrix truth = cascade(ch.H, ComplexMatrix::Identity(cfg.M, cfg.M), ch.E_series.front());
    EstimationDrop out;

    Rng prop_rng(derive_seed(seed, 1));
    const PilotBook book = build_training_book(cfg, prop_rng);
    const PilotObservation obs = simulate_training(ch, book, 0, cfg.snr_db, prop_rng);
    {
        flops::Scope scope;
        const EstimateResult r = estimate_proposed(obs, book, cfg, bals, ch.H);
        out.bals_flops = flops::count();
        out.iterations = r.iterations;
        out.bals_nmse = nmse(cascade(r, ComplexMatrix::Identity(cfg.M, cfg.M)), truth);
    }
    if (run_ls) {
        Rng ls_rng(derive_seed(seed, 2));
        const PilotObservation ls_obs = simulate_training(ch, dft_training_book(cfg), 0, cfg.snr_db, ls_rng);
        flops::Scope scope;
        const ComplexMatrix Z = estimate_ls(ls_obs, cfg);
        out.ls_flops = flops::count();
        out.ls_nmse = nmse(identity_cascade_ls(Z, cfg), truth);
    }
    return out;
}

PredictionDrop prediction_drop(const SystemConfig& cfg, const BalsSettings& bals, const PredictionSettings& pred,
                               const CnnModel& model, const PatternBank& bank, std::uint64_t seed) {
    Rng rng(seed);
    const ChannelSet ch = gen_channel_set(cfg, rng);
    Rng est_rng(derive_seed(seed, 1));
    const PilotBook book = build_training_book(cfg, est_rng);
    const TrainingEstimate est = estimate_training_phase(ch, book, cfg, bals, cfg.snr_db, est_rng);

    const ComplexMatrix I = ComplexMatrix::Identity(cfg.M, cfg.M);
    const auto score = [&](const ComplexMatrix& E_hat, int l) {
        return nmse(cascade(est.H, I, E_hat), cascade(ch.H, I, ch.E_series[static_cast<std::size_t>(l)]));
    };
    const int last = cfg.Q - 1;
    PredictionDrop out;
    const double h0 = score(est.E.back(), last);

    const CnnForecast cnn = cnn_ar_forecast(est.E, pred, model, bank, cfg.P);
    out.selected_class = cnn.selected;
    out.cnn_ar.push_back(h0);
    for (int p = 1; p <= cfg.P; ++p) out.cnn_ar.push_back(score(cnn.E[static_cast<std::size_t>(p - 1)], last + p));

    for (int q : pred.ar_orders) {
        const ArModel ar = fit_raw_ar(est.E, q, pred.ar_loading);
        const auto forecast = ar_predict(padded(est.E, q), ar, cfg.P);
        std::vector<double> curve{h0};
        for (int p = 1; p <= cfg.P; ++p) curve.push_back(score(forecast[static_cast<std::size_t>(p - 1)], last + p));
        out.raw_ar.push_back(std::move(curve));
    }
    return out;
}

SumRateDrop sumrate_drop(const SystemConfig& cfg, const BalsSettings& bals, const PredictionSettings& pred,
                         const BeamformingOptions& bf, const CnnModel& model, const PatternBank& bank,
                         const std::vector<double>& snr_db, std::uint64_t seed) {
    Rng rng(seed);
    const ChannelSet ch = gen_channel_set(cfg, rng);
    const int G = effective_groups(cfg);
    const int L = cfg.intervals();
    const auto interval = [&](int l) -> const ComplexMatrix& { return ch.E_series[static_cast<std::size_t>(l)]; };

    std::vector<BeamformingSolution> perfect;
    for (int l = 0; l < L; ++l) perfect.push_back(optimize(CsiModel::from_factors(ch.H, interval(l), G), cfg.topology, bf));

    SumRateDrop out;
    out.bd_objective = perfect.front().objective();
    BeamformingOptions diag = bf;
    diag.diagonal = true;
    out.diag_objective = optimize(CsiModel::from_factors(ch.H, interval(0), G), cfg.topology, diag).objective();

    const Scheme prop = cfg.topology == Topology::FullyConnected ? Scheme::FcProp : Scheme::GcProp;
    const Scheme conv = cfg.topology == Topology::FullyConnected ? Scheme::FcConv : Scheme::GcConv;
    const double lambda_prop = data_coefficient(prop, cfg);
    const double lambda_conv = data_coefficient(conv, cfg);
    Rng est_rng(derive_seed(seed, 1));
    const PilotBook book = build_training_book(cfg, est_rng);
    const TrainingEstimate est = estimate_training_phase(ch, book, cfg, bals, cfg.snr_db, est_rng);
    std::vector<ComplexMatrix> E_hat = est.E;
    if (cfg.P > 0) {
        const CnnForecast cnn = cnn_ar_forecast(est.E, pred, model, bank, cfg.P);
        E_hat.insert(E_hat.end(), cnn.E.begin(), cnn.E.end());
    }
    std::vector<BeamformingSolution> proposed;
    for (int l = 0; l < L; ++l)
        proposed.push_back(
            optimize(CsiModel::from_factors(est.H, E_hat[static_cast<std::size_t>(l)], G), cfg.topology, bf));

    Rng ls_rng(derive_seed(seed, 2));
    const PilotBook dft_book = dft_training_book(cfg);
    std::vector<BeamformingSolution> conventional;
    for (int l = 0; l < L; ++l) {
        const ComplexMatrix Z = estimate_ls(simulate_training(ch, dft_book, l, cfg.snr_db, ls_rng), cfg);
        conventional.push_back(optimize(CsiModel::from_composite(Z, G, cfg.N, cfg.K), cfg.topology, bf));
    }

    for (double snr : snr_db) {
        const double pd = db_to_linear(snr);
        const auto average = [&](const std::vector<BeamformingSolution>& sols, double lambda) {
            double acc = 0.0;
            for (int l = 0; l < L; ++l)
                acc += sum_rate(sinrs(sols[static_cast<std::size_t>(l)], ch.H, interval(l), pd, 1.0), lambda);
            return acc / L;
        };
        out.points.push_back({average(perfect, 1.0), average(proposed, lambda_prop), average(conventional, lambda_conv)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classifier plumbing
// ---------------------------------------------------------------------------

PatternBank make_bank(const ExperimentSpec& spec) {
    const auto& p = spec.prediction;
    return PatternBank::from_dopplers(
        log_spaced_dopplers(p.bank_size, p.bank_kmh_min, p.bank_kmh_max, spec.cfg.fc, spec.cfg.Ts), spec.cfg.Q,
        p.ar_loading);
}

CnnModel train_cnn(const ExperimentSpec& spec, const PatternBank& bank, TrainingReport* report,
                   double* test_accuracy) {
    const auto& p = spec.prediction;
    const SystemConfig cfg = spec.fully_config();
    const std::vector<double> dopplers = bank.dopplers();
    const DatasetNoise noise{p.noise_relative_power};
    Rng data_rng(derive_seed(cfg.seed, 0xD47A));
    const CnnDataset train = make_cnn_dataset(cfg, dopplers, p.train_per_class, cfg.Q, data_rng, noise);
    const CnnDataset val = make_cnn_dataset(cfg, dopplers, p.val_per_class, cfg.Q, data_rng, noise);

    CnnArchitecture arch;
    arch.rows = static_cast<int>(train.inputs.front().rows());
    arch.cols = static_cast<int>(train.inputs.front().cols());
    arch.outputs = bank.size();
    Rng train_rng(derive_seed(cfg.seed, 0xC44));
    CnnModel init = CnnModel::initialize(arch, train_rng);
    const auto [mu, sd] = train.entry_statistics();
    init.set_input_normalization(mu, sd > 0.0 ? sd : 1.0);
    CnnModel model = cnn_train(init, train, val, p.hyper, train_rng, report);
    if (test_accuracy != nullptr) {
        const CnnDataset test = make_cnn_dataset(cfg, dopplers, p.test_per_class, cfg.Q, data_rng, noise);
        *test_accuracy = cnn_accuracy(model, test);
    }
    return model;
}

CnnModel obtain_cnn(const ExperimentSpec& spec, const PatternBank& bank) {
    const auto& path = spec.prediction.model;
    CnnModel model = !path.empty() && std::filesystem::exists(path) ? CnnModel::load(path) : train_cnn(spec, bank);
    check_model(model, bank, spec.cfg);
    return model;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

std::vector<std::vector<EstimationDrop>> collect_nmse_vs_snr(const ExperimentSpec& spec, const SystemConfig& cfg) {
    const auto per_drop = parallel_map<std::vector<EstimationDrop>>(
        spec.drops, worker_count(spec), [&](int d) {
            std::vector<EstimationDrop> row;
            for (double snr : spec.snr_db) {
                SystemConfig c = cfg;
                c.snr_db = snr;
                row.push_back(estimation_drop(c, spec.bals, derive_seed(cfg.seed, static_cast<std::uint64_t>(d))));
            }
            return row;
        });
    std::vector<std::vector<EstimationDrop>> out(spec.snr_db.size());
    for (const auto& row : per_drop)
        for (std::size_t s = 0; s < row.size(); ++s) out[s].push_back(row[s]);
    return out;
}

CsvTable run_estimate(const ExperimentSpec& spec) {
    CsvTable t;
    const std::string head = MetricsReport::csv_header(1);
    t.header = split(head, ',');
    for (const SystemConfig& cfg : {spec.fully_config(), spec.group_config()}) {
        const auto drops = collect_nmse_vs_snr(spec, cfg);
        const Scheme prop = cfg.topology == Topology::FullyConnected ? Scheme::FcProp : Scheme::GcProp;
        const Scheme conv = cfg.topology == Topology::FullyConnected ? Scheme::FcConv : Scheme::GcConv;
        for (std::size_t s = 0; s < spec.snr_db.size(); ++s) {
            SystemConfig c = cfg;
            c.snr_db = spec.snr_db[s];
            for (std::size_t d = 0; d < drops[s].size(); ++d) {
                const EstimationDrop& e = drops[s][d];
                for (Scheme sc : {prop, conv}) {
                    MetricsReport r = MetricsReport::make(sc, c);
                    r.drop = static_cast<int>(d);
                    r.nmse_per_interval = {is_proposed(sc) ? e.bals_nmse : e.ls_nmse};
                    r.flop_count = is_proposed(sc) ? e.bals_flops : e.ls_flops;
                    t.rows.push_back(split(r.csv_row(), ','));
                }
            }
        }
    }
    return t;
}

CsvTable run_nmse_vs_snr(const ExperimentSpec& spec) {
    CsvTable t;
    t.header = {"topology", "M", "groups", "T", "snr_db", "drops", "bals_nmse", "ls_nmse", "bals_iterations"};
    for (const SystemConfig& cfg : {spec.fully_config(), spec.group_config()}) {
        const auto drops = collect_nmse_vs_snr(spec, cfg);
        for (std::size_t s = 0; s < spec.snr_db.size(); ++s) {
            std::vector<double> b, l, it;
            for (const auto& e : drops[s]) {
                b.push_back(e.bals_nmse);
                l.push_back(e.ls_nmse);
                it.push_back(e.iterations);
            }
            t.rows.push_back({to_string(cfg.topology), std::to_string(cfg.M), std::to_string(effective_groups(cfg)),
                              std::to_string(cfg.T), fmt(spec.snr_db[s]), std::to_string(drops[s].size()),
                              fmt(mean_of(b)), fmt(mean_of(l)), fmt(mean_of(it))});
        }
    }
    return t;
}

CsvTable run_nmse_vs_T(const ExperimentSpec& spec) {
    const SystemConfig base = spec.fully_config();
    const auto per_drop = parallel_map<std::vector<double>>(spec.drops, worker_count(spec), [&](int d) {
        std::vector<double> row;
        for (int T : spec.T_list) {
            SystemConfig c = base;
            c.T = T;
            row.push_back(estimation_drop(c, spec.bals, derive_seed(base.seed, static_cast<std::uint64_t>(d)), false)
                              .bals_nmse);
        }
        return row;
    });
    std::vector<double> curve(spec.T_list.size(), 0.0);
    for (const auto& row : per_drop)
        for (std::size_t i = 0; i < row.size(); ++i) curve[i] += row[i] / static_cast<double>(per_drop.size());

    const double plateau = curve.back();
    std::size_t onset = curve.size() - 1;
    for (std::size_t i = 0; i < curve.size(); ++i)
        if (curve[i] <= 1.05 * plateau) {
            onset = i;
            break;
        }
    CsvTable t;
    t.header = {"topology", "M", "T", "drops", "bals_nmse", "ratio_to_plateau", "plateau_onset"};
    for (std::size_t i = 0; i < curve.size(); ++i)
        t.rows.push_back({to_string(base.topology), std::to_string(base.M), std::to_string(spec.T_list[i]),
                          std::to_string(spec.drops), fmt(curve[i]), fmt(curve[i] / plateau),
                          i == onset ? "1" : "0"});
    return t;
}

std::vector<std::vector<PredictionDrop>> collect_prediction(const ExperimentSpec& spec, const CnnModel& model,
                                                            const PatternBank& bank) {
    check_model(model, bank, spec.cfg);
    const SystemConfig base = spec.fully_config();
    const auto& speeds = spec.prediction.speeds_kmh;
    const int S = static_cast<int>(speeds.size());
    const auto flat = parallel_map<PredictionDrop>(spec.drops, worker_count(spec), [&](int i) {
        SystemConfig c = base;
        c.speed_mps = speeds[static_cast<std::size_t>(i % S)] / 3.6;
        return prediction_drop(c, spec.bals, spec.prediction, model, bank,
                               derive_seed(base.seed, static_cast<std::uint64_t>(i / S)));
    });
    std::vector<std::vector<PredictionDrop>> out(speeds.size());
    for (int i = 0; i < spec.drops; ++i) out[static_cast<std::size_t>(i % S)].push_back(flat[static_cast<std::size_t>(i)]);
    return out;
}

CsvTable run_prediction(const ExperimentSpec& spec, const CnnModel& model, const PatternBank& bank) {
    const auto drops = collect_prediction(spec, model, bank);
    const auto& pred = spec.prediction;
    const int P = spec.cfg.P;
    CsvTable t;
    t.header = {"set", "speed_kmh", "horizon", "predictor", "drops", "nmse"};
    const auto emit = [&](const std::string& set, const std::string& speed,
                          const std::vector<const PredictionDrop*>& subset) {
        for (int h = 0; h <= P; ++h) {
            const auto hz = static_cast<std::size_t>(h);
            std::vector<double> v;
            for (const auto* d : subset) v.push_back(d->cnn_ar[hz]);
            t.rows.push_back({set, speed, std::to_string(h), "cnn-ar", std::to_string(subset.size()), fmt(mean_of(v))});
            for (std::size_t q = 0; q < pred.ar_orders.size(); ++q) {
                v.clear();
                for (const auto* d : subset) v.push_back(d->raw_ar[q][hz]);
                t.rows.push_back({set, speed, std::to_string(h), "ar" + std::to_string(pred.ar_orders[q]),
                                  std::to_string(subset.size()), fmt(mean_of(v))});
            }
        }
    };
    std::vector<const PredictionDrop*> all;
    for (const auto& per_speed : drops)
        for (const auto& d : per_speed) all.push_back(&d);
    emit("mixed", "all", all);
    for (std::size_t s = 0; s < drops.size(); ++s) {
        std::vector<const PredictionDrop*> subset;
        for (const auto& d : drops[s]) subset.push_back(&d);
        emit("speed", fmt(pred.speeds_kmh[s]), subset);
    }
    return t;
}

std::vector<SumRateDrop> collect_sumrate(const ExperimentSpec& spec, const SystemConfig& cfg, const CnnModel& model,
                                         const PatternBank& bank) {
    check_model(model, bank, cfg);
    return parallel_map<SumRateDrop>(spec.drops, worker_count(spec), [&](int d) {
        return sumrate_drop(cfg, spec.bals, spec.prediction, spec.beamforming, model, bank, spec.downlink_snr_db,
                            derive_seed(cfg.seed, static_cast<std::uint64_t>(d)));
    });
}

CsvTable run_sumrate(const ExperimentSpec& spec, const CnnModel& model, const PatternBank& bank) {
    CsvTable t;
    t.header = {"topology", "M", "groups", "snr_db", "csi", "lambda", "drops", "sum_rate"};
    for (const SystemConfig& cfg : {spec.fully_config(), spec.group_config()}) {
        const auto drops = collect_sumrate(spec, cfg, model, bank);
        const Scheme prop = cfg.topology == Topology::FullyConnected ? Scheme::FcProp : Scheme::GcProp;
        const Scheme conv = cfg.topology == Topology::FullyConnected ? Scheme::FcConv : Scheme::GcConv;
        for (std::size_t s = 0; s < spec.downlink_snr_db.size(); ++s) {
            std::vector<double> perfect, proposed, conventional;
            for (const auto& d : drops) {
                perfect.push_back(d.points[s].perfect);
                proposed.push_back(d.points[s].proposed);
                conventional.push_back(d.points[s].conventional);
            }
            const auto row = [&](const std::string& csi, double lambda, const std::vector<double>& v) {
                t.rows.push_back({to_string(cfg.topology), std::to_string(cfg.M),
                                  std::to_string(effective_groups(cfg)), fmt(spec.downlink_snr_db[s]), csi,
                                  fmt(lambda), std::to_string(drops.size()), fmt(mean_of(v))});
            };
            row("perfect", 1.0, perfect);
            row("proposed", data_coefficient(prop, cfg), proposed);
            row("conventional", data_coefficient(conv, cfg), conventional);
        }
    }
    return t;
}

CsvTable run_overhead(const ExperimentSpec& spec) {
    CsvTable t;
    t.header = {"topology", "M", "groups", "T", "Q", "P", "conv_P_a", "prop_P_a", "prop_coefficient",
                "reduction_percent"};
    for (const auto& r : spec.overhead_rows) {
        SystemConfig c = spec.cfg;
        c.topology = r.topology;
        c.M = r.M;
        c.groups = r.groups;
        c.T = r.T;
        const bool fc = r.topology == Topology::FullyConnected;
        const double conv = average_pilot_overhead(fc ? Scheme::FcConv : Scheme::GcConv, c);
        const double prop = average_pilot_overhead(fc ? Scheme::FcProp : Scheme::GcProp, c);
        t.rows.push_back({to_string(r.topology), std::to_string(r.M), std::to_string(r.groups), std::to_string(r.T),
                          std::to_string(c.Q), std::to_string(c.P), fmt(conv), fmt(prop),
                          std::to_string(fc ? r.T + 1 : r.T + r.groups), fmt(overhead_reduction(prop, conv))});
    }
    return t;
}

}  // namespace bdris
