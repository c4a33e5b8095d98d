// SPDX-License-Identifier: Apache-2.0
// Python bindings for configuration, estimation and the experiment drivers.
#include "bdris/experiments.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace bdris;

namespace {

py::dict noiseless_fit(const SystemConfig& cfg, std::uint64_t seed, double kappa, int i_max) {
    Rng rng(seed);
    const ChannelSet ch = gen_channel_set(cfg, rng);
    const PilotBook book = build_training_book(cfg, rng);
    const PilotObservation obs = simulate_training(ch, book, 0, 1.0, 0.0, rng);
    BalsSettings s;
    s.kappa = kappa;
    s.i_max = i_max;
    EstimateResult r;
    if (cfg.topology == Topology::FullyConnected) {
        r = bals_fully(obs, book, s, ch.H(0, 0));
    } else {
        std::vector<cplx> anchors;
        for (int g = 0; g < cfg.groups; ++g) anchors.push_back(ch.H(0, g * cfg.group_size()));
        r = bals_group(split_by_group(obs.Y, book), book, s, anchors);
    }
    const ComplexMatrix& E = ch.E_series.front();
    py::dict d;
    d["H"] = ch.H;
    d["E"] = E;
    d["H_hat"] = r.H_hat;
    d["E_hat"] = r.E_hat;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    d["residual_history"] = r.residual_history;
    return d;
}

}  // namespace

PYBIND11_MODULE(bdris, m) {
    m.doc() = "BD-RIS channel estimation, prediction and beamforming experiments";
    py::register_exception<Error>(m, "Error", PyExc_ValueError);

    py::enum_<Topology>(m, "Topology")
        .value("FULLY", Topology::FullyConnected)
        .value("GROUP", Topology::GroupConnected);
    py::enum_<Scheme>(m, "Scheme")
        .value("FC_CONV", Scheme::FcConv)
        .value("FC_PROP", Scheme::FcProp)
        .value("GC_CONV", Scheme::GcConv)
        .value("GC_PROP", Scheme::GcProp);

    py::class_<SystemConfig>(m, "SystemConfig")
        .def(py::init<>())
        .def_readwrite("N", &SystemConfig::N)
        .def_readwrite("K", &SystemConfig::K)
        .def_readwrite("M", &SystemConfig::M)
        .def_readwrite("groups", &SystemConfig::groups)
        .def_readwrite("topology", &SystemConfig::topology)
        .def_readwrite("T", &SystemConfig::T)
        .def_readwrite("Q", &SystemConfig::Q)
        .def_readwrite("P", &SystemConfig::P)
        .def_readwrite("Tc", &SystemConfig::Tc)
        .def_readwrite("fn", &SystemConfig::fn)
        .def_readwrite("snr_db", &SystemConfig::snr_db)
        .def_readwrite("seed", &SystemConfig::seed)
        .def("validate", &SystemConfig::validate);

    py::class_<BalsSettings>(m, "BalsSettings")
        .def(py::init<>())
        .def_readwrite("kappa", &BalsSettings::kappa)
        .def_readwrite("i_max", &BalsSettings::i_max)
        .def_readwrite("line_search", &BalsSettings::line_search);

    py::class_<EstimationDrop>(m, "EstimationDrop")
        .def_readonly("bals_nmse", &EstimationDrop::bals_nmse)
        .def_readonly("ls_nmse", &EstimationDrop::ls_nmse)
        .def_readonly("iterations", &EstimationDrop::iterations)
        .def_readonly("bals_flops", &EstimationDrop::bals_flops)
        .def_readonly("ls_flops", &EstimationDrop::ls_flops);

    py::class_<ExperimentSpec>(m, "ExperimentSpec")
        .def_readwrite("cfg", &ExperimentSpec::cfg)
        .def_readwrite("bals", &ExperimentSpec::bals)
        .def_readwrite("drops", &ExperimentSpec::drops)
        .def_readwrite("workers", &ExperimentSpec::workers)
        .def_readwrite("snr_db", &ExperimentSpec::snr_db)
        .def_readwrite("T_list", &ExperimentSpec::T_list)
        .def_readonly("scenario", &ExperimentSpec::scenario)
        .def("validate", &ExperimentSpec::validate);

    m.def("parse_spec", &parse_spec, py::arg("text"));
    m.def("load_spec", [](const std::string& path) { return load_spec(path); }, py::arg("path"));
    m.def("run_estimate", [](const ExperimentSpec& s) { return run_estimate(s).str(); });
    m.def("run_nmse_vs_snr", [](const ExperimentSpec& s) { return run_nmse_vs_snr(s).str(); });
    m.def("run_nmse_vs_T", [](const ExperimentSpec& s) { return run_nmse_vs_T(s).str(); });
    m.def("run_overhead", [](const ExperimentSpec& s) { return run_overhead(s).str(); });

    m.def("estimation_drop", &estimation_drop, py::arg("cfg"), py::arg("bals"), py::arg("seed"),
          py::arg("run_ls") = true);
    m.def("noiseless_fit", &noiseless_fit, py::arg("cfg"), py::arg("seed"), py::arg("kappa") = 1e-24,
          py::arg("i_max") = 2000);
    m.def("nmse", &nmse, py::arg("estimate"), py::arg("truth"));

    m.def("pilot_length", &pilot_length);
    m.def("average_pilot_overhead", &average_pilot_overhead);
    m.def("overhead_reduction", &overhead_reduction);
    m.def("flop_model", &flop_model, py::arg("scheme"), py::arg("cfg"), py::arg("iterations"));

    m.def("bessel_j0", &bessel_j0);
    m.def("jakes_acf", &jakes_acf, py::arg("fn"), py::arg("lag"));
    m.def("fit_jakes_ar",
          [](double fn, int Q, double epsilon) {
              const ArModel a = fit_jakes_ar(fn, Q, epsilon);
              return py::make_tuple(a.a, a.sigma2_omega, a.max_pole_modulus());
          },
          py::arg("fn"), py::arg("Q"), py::arg("epsilon"));
}
