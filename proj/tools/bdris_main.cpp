// SPDX-License-Identifier: Apache-2.0
// Command-line front end for the experiment drivers.
#include "bdris/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace bdris;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> drops;
    std::optional<int> workers;
    std::string output;
    std::string model;
    std::string axis = "snr";
    bool validate_only = false;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("-c,--config", o.config, "scenario file (INI)")->required();
    cmd->add_option("--seed", o.seed, "master seed, overrides [system] seed");
    cmd->add_option("--drops", o.drops, "Monte-Carlo drops, overrides [experiment] drops")->check(CLI::PositiveNumber);
    cmd->add_option("-o,--output", o.output, "CSV destination; stdout when omitted");
    cmd->add_option("-j,--workers", o.workers, "worker threads (default: BDRIS_WORKERS or the config)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--validate", o.validate_only, "check the configuration and exit");
}

/// Writes to a sibling temporary, then renames it into place.
void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + path.string());
        out << text;
        if (!out.flush()) throw Error("write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

void emit(const Options& o, const std::string& command, const ExperimentSpec& spec, const CsvTable& table,
          nlohmann::ordered_json extra = {}) {
    const std::string csv = table.str();
    if (o.output.empty()) {
        std::cout << csv;
        return;
    }
    nlohmann::ordered_json j;
    j["command"] = command;
    j["scenario"] = spec.scenario;
    j["schema"] = kConfigSchema;
    j["seed"] = spec.cfg.seed;
    j["drops"] = spec.drops;
    j["rows"] = table.rows.size();
    j["columns"] = table.header;
    for (auto& [k, v] : extra.items()) j[k] = v;
    write_atomic(o.output, csv);
    write_atomic(o.output + ".json", j.dump(2) + "\n");
}

ExperimentSpec prepare(const Options& o) {
    ExperimentSpec spec = load_spec(o.config);
    if (o.seed) spec.cfg.seed = *o.seed;
    if (o.drops) spec.drops = *o.drops;
    if (!o.model.empty()) spec.prediction.model = o.model;
    spec.workers = o.workers ? *o.workers : workers_from_env(spec.workers > 0 ? spec.workers : 1);
    spec.validate();
    return spec;
}

int run(const std::string& command, const Options& o) {
    ExperimentSpec spec;
    try {
        spec = prepare(o);
    } catch (const std::exception& e) {
        std::cerr << "bdris " << command << ": " << e.what() << '\n';
        return 2;
    }
    if (o.validate_only) {
        std::cerr << "bdris " << command << ": configuration ok\n";
        return 0;
    }
    if (command == "estimate") {
        emit(o, command, spec, run_estimate(spec));
    } else if (command == "sweep") {
        if (o.axis == "snr")
            emit(o, command, spec, run_nmse_vs_snr(spec));
        else
            emit(o, command, spec, run_nmse_vs_T(spec));
    } else if (command == "overhead") {
        emit(o, command, spec, run_overhead(spec));
    } else if (command == "predict" || command == "sumrate") {
        const PatternBank bank = make_bank(spec);
        const CnnModel model = obtain_cnn(spec, bank);
        emit(o, command, spec, command == "predict" ? run_prediction(spec, model, bank) : run_sumrate(spec, model, bank));
    } else if (command == "train-cnn") {
        const PatternBank bank = make_bank(spec);
        TrainingReport rep;
        double accuracy = 0.0;
        const CnnModel model = train_cnn(spec, bank, &rep, &accuracy);
        const fs::path model_path = spec.prediction.model.empty() ? fs::path("cnn_model.bin") : spec.prediction.model;
        CsvTable t;
        t.header = {"epoch", "train_loss", "val_loss"};
        for (std::size_t e = 0; e < rep.val_loss.size(); ++e)
            t.rows.push_back({std::to_string(e + 1), format_real(rep.train_loss[e]), format_real(rep.val_loss[e])});
        model.save(model_path);
        bank.save_csv(model_path.string() + ".bank.csv");
        if (!rep.message.empty()) std::cerr << "bdris train-cnn: " << rep.message << '\n';
        nlohmann::ordered_json extra;
        extra["model"] = model_path.string();
        extra["epochs"] = rep.epochs;
        extra["best_epoch"] = rep.best_epoch;
        extra["test_accuracy"] = accuracy;
        extra["diverged"] = rep.diverged;
        extra["stalled"] = rep.stalled;
        emit(o, command, spec, t, extra);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BD-RIS channel estimation, prediction and beamforming experiments"};
    app.require_subcommand(1);
    Options o;

    auto* estimate = app.add_subcommand("estimate", "per-drop NMSE, pilot and flop report for all four schemes");
    auto* sweep = app.add_subcommand("sweep", "mean NMSE versus SNR or training length");
    auto* predict = app.add_subcommand("predict", "CNN-AR and raw AR prediction NMSE");
    auto* overhead = app.add_subcommand("overhead", "average pilot overhead table");
    auto* sumrate = app.add_subcommand("sumrate", "downlink sum rate for perfect, proposed and conventional CSI");
    auto* train = app.add_subcommand("train-cnn", "train the aging-pattern classifier and save it with its bank");
    for (auto* cmd : {estimate, sweep, predict, overhead, sumrate, train}) add_common(cmd, o);
    sweep->add_option("--axis", o.axis, "sweep axis")->check(CLI::IsMember({"snr", "T"}));
    for (auto* cmd : {predict, sumrate, train}) cmd->add_option("--model", o.model, "classifier weights path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, o);
    } catch (const std::exception& e) {
        std::cerr << "bdris " << command << ": " << e.what() << '\n';
        return 1;
    }
}
