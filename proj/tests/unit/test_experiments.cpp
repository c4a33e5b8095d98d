// SPDX-License-Identifier: Apache-2.0
#include "bdris/experiments.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace bdris;

namespace {

ExperimentSpec small_spec() {
    ExperimentSpec s = parse_spec(R"(
[meta]
schema = 1
scenario = unit

[system]
N = 3
K = 3
M = 4
T = 6
Q = 4
P = 2
seed = 99

[experiment]
drops = 3
snr_db = 10, 20
downlink_snr_db = 10
T_list = 4, 6
gc_groups = 2
gc_T = 6
)");
    return s;
}

}  // namespace

TEST_CASE("config sections map onto the spec") {
    const ExperimentSpec s = small_spec();
    CHECK(s.scenario == "unit");
    CHECK(s.cfg.N == 3);
    CHECK(s.cfg.M == 4);
    CHECK(s.cfg.seed == 99);
    CHECK(s.drops == 3);
    CHECK(s.snr_db == std::vector<double>{10, 20});
    CHECK(s.T_list == std::vector<int>{4, 6});
    CHECK(s.overhead_rows.size() == 6);
    CHECK(s.group_config().groups == 2);
    CHECK(s.group_config().topology == Topology::GroupConnected);
    CHECK(s.fully_config().groups == 1);
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("config errors name the offending entry") {
    const auto message = [](const std::string& text) {
        try {
            parse_spec(text);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("[system]\nM = sixteen\n").find("[system] M") != std::string::npos);
    CHECK(message("[system]\nbogus = 1\n").find("unknown key 'bogus'") != std::string::npos);
    CHECK(message("[nowhere]\nx = 1\n").find("unknown section") != std::string::npos);
    CHECK(message("[meta]\nschema = 7\n").find("schema") != std::string::npos);
    CHECK(message("[overhead]\nrows = fully 16 1\n").find("[overhead] rows") != std::string::npos);
    CHECK(message("[experiment]\nsnr_db = 1, x\n").find("snr_db") != std::string::npos);
}

TEST_CASE("validation reports the identifiability inequality") {
    ExperimentSpec s = small_spec();
    s.cfg.M = 32;
    s.cfg.T = 2;
    try {
        s.validate();
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("M <= min(N*T, K*T)") != std::string::npos);
    }
    ExperimentSpec d = small_spec();
    d.drops = 0;
    CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("overhead rows from the config") {
    ExperimentSpec s = parse_spec("[overhead]\nrows = fully 16 1 20; group 32 2 40\n");
    const CsvTable t = run_overhead(s);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][8] == "21");
    CHECK(t.rows[1][8] == "42");
    CHECK(std::stod(t.rows[0][9]) == doctest::Approx(94.95).epsilon(5e-4));
    CHECK(std::stod(t.rows[1][6]) == doctest::Approx(512.0));
}

TEST_CASE("parallel map keeps index order") {
    const std::function<int(int)> sq = [](int i) { return i * i; };
    const auto a = parallel_map(50, 1, sq);
    const auto b = parallel_map(50, 4, sq);
    CHECK(a == b);
    CHECK(b[7] == 49);
    CHECK(parallel_map(0, 3, sq).empty());
    const std::function<int(int)> bad = [](int i) -> int {
        if (i % 5 == 3) throw Error("drop " + std::to_string(i));
        return i;
    };
    try {
        parallel_map(20, 4, bad);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == "drop 3");
    }
}

TEST_CASE("sweep output does not depend on the worker count") {
    ExperimentSpec s = small_spec();
    s.workers = 1;
    const std::string one = run_nmse_vs_snr(s).str();
    s.workers = 3;
    CHECK(run_nmse_vs_snr(s).str() == one);
    CHECK(run_nmse_vs_T(s).str() == run_nmse_vs_T(s).str());
}

TEST_CASE("estimation drop at high SNR favours the tensor fit") {
    SystemConfig cfg;
    cfg.N = 4;
    cfg.K = 4;
    cfg.M = 4;
    cfg.T = 8;
    cfg.snr_db = 30;
    const EstimationDrop d = estimation_drop(cfg, BalsSettings{}, 5);
    CHECK(d.bals_nmse < 1e-2);
    CHECK(d.ls_nmse < 1e-1);
    CHECK(d.bals_flops > 0);
    CHECK(d.ls_flops > 0);
}

TEST_CASE("worker count from the environment") {
    ::setenv("BDRIS_WORKERS", "3", 1);
    CHECK(workers_from_env(1) == 3);
    ::setenv("BDRIS_WORKERS", "zero", 1);
    CHECK_THROWS_AS(workers_from_env(1), Error);
    ::unsetenv("BDRIS_WORKERS");
    CHECK(workers_from_env(2) == 2);
}

TEST_CASE("csv table formatting") {
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{"1", "2"}, {"3", "4"}};
    CHECK(t.str() == "a,b\n1,2\n3,4\n");
}
