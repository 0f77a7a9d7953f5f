// Scenario orchestration: config parsing, the bubbling monitor, the 4d energy
// bookkeeping, and a small collapse sweep with the determinism contract.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lab.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

using namespace hymlab;

namespace {
constexpr double kPi = 3.14159265358979323846;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
} // namespace

TEST_CASE("config parsing: sections, scalars, lists, complex literals") {
    const std::string text = R"(
# comment
[potential]
name = "tau_linear"
param = 0.1
base_point = [0.05, -0.1]

[spectral]
lifts = ["0.25", "-0.25"]
w_coefficients = ["0.01+0.02i", "-0.01-0.02i"]

[grid]
n = 32

[flow]
tol = 1e-9
dealias = true

[collapse]
count = 4
seed = 11
)";
    const Config cfg = Config::parse_text(text, "inline");
    CHECK(cfg.get_string("potential", "name", "") == "tau_linear");
    CHECK(cfg.get_number("potential", "param", 0.0) == 0.1);
    CHECK(cfg.get_int("grid", "n", 0) == 32);
    CHECK(cfg.get_bool("flow", "dealias", false));
    const auto lifts = cfg.get_complex_list("spectral", "lifts");
    REQUIRE(lifts.size() == 2);
    CHECK(lifts[0] == complexd(0.25, 0.0));
    const auto wc = cfg.get_complex_list("spectral", "w_coefficients");
    CHECK(wc[0] == complexd(0.01, 0.02));
    CHECK(wc[1] == complexd(-0.01, -0.02));

    const Scenario sc = scenario_from_config(cfg);
    CHECK(sc.N == 32);
    CHECK(sc.t_count == 4);
    CHECK(sc.seed == 11);
    CHECK(sc.base.x1 == 0.05);

    // JSON mirror
    const Config jt = Config::parse_json_text(
        R"({"grid": {"n": 16}, "spectral": {"lifts": ["0.1", "-0.1"]}})", "inline");
    CHECK(jt.get_int("grid", "n", 0) == 16);
    CHECK(jt.get_complex_list("spectral", "lifts")[0] == complexd(0.1, 0.0));
}

TEST_CASE("config errors carry location and field information") {
    try {
        Config::parse_text("[geometry\nx = 1\n", "bad.toml");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.toml:1") != std::string::npos);
    }
    try {
        Config::parse_text("[a]\nkey value\n", "bad.toml");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.toml:2") != std::string::npos);
    }
    try {
        const Config cfg = Config::parse_text("[grid]\nn = \"x\"\n", "c.toml");
        cfg.get_int("grid", "n", 0);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[grid].n") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_complex("1.2.3i"), ConfigError);
    CHECK(parse_complex("i") == complexd(0.0, 1.0));
    CHECK(parse_complex("-i") == complexd(0.0, -1.0));
    CHECK(parse_complex("2e-3-1e-2i") == complexd(0.002, -0.01));
}

TEST_CASE("scenario validation") {
    Config cfg = Config::parse_text("[collapse]\namplitude = -1\n", "v.toml");
    CHECK_THROWS_AS(scenario_from_config(cfg), ConfigError);
    Config cfg2 = Config::parse_text("[collapse]\nratio = 1.5\n", "v.toml");
    CHECK_THROWS_AS(scenario_from_config(cfg2), ConfigError);
}

TEST_CASE("bubbling monitor components") {
    // constant section: everything vanishes on the reference connection
    Scenario sc;
    sc.N = 16;
    const LabSetup setup = build_setup(sc);
    const BubblingRecord r0 = bubbling_monitor(setup, setup.A0, sc.base, 0.5);
    CHECK(r0.f_base_c0 == 0.0);
    CHECK(r0.f_fiber_c0 == 0.0);
    CHECK(r0.kappa_sq_c0 < 1e-20);
    CHECK(r0.m == 0.0);

    // linear section: kappa matches the closed form 16 pi^2 c^2 on the
    // identity chart (Theta_11 = diag(c,-c), Theta_22 = -Theta_11)
    Scenario sl;
    sl.N = 16;
    const double c = 0.02;
    sl.w_coefficients = {complexd(c, 0.0), complexd(-c, 0.0)};
    const LabSetup lin = build_setup(sl);
    const BubblingRecord r1 = bubbling_monitor(lin, lin.A0, sl.base, 0.5);
    CHECK(r1.kappa_sq_c0 ==
          doctest::Approx(16.0 * kPi * kPi * c * c).epsilon(1e-6));
    CHECK(r1.m == doctest::Approx(r1.f_base_c0 + r1.f_fiber_c0_over_t +
                                  r1.kappa_sq_c0)
                      .epsilon(1e-14));
    CHECK(r1.t_m == doctest::Approx(0.5 * r1.m).epsilon(1e-14));
}

TEST_CASE("4d energy bookkeeping: constant Theta") {
    // holomorphic linear section: Theta_11 = diag(c,-c) = -Theta_22,
    // off-diagonal Theta zero; the defect vanishes identically
    const double c = 0.05;
    Eigen::MatrixXcd t11 = Eigen::MatrixXcd::Zero(2, 2);
    t11(0, 0) = c;
    t11(1, 1) = -c;
    std::array<Eigen::MatrixXcd, 4> Theta{t11, Eigen::MatrixXcd::Zero(2, 2),
                                          Eigen::MatrixXcd::Zero(2, 2), -t11};
    const EnergyBookkeeping bk = testbed_energy_constant_theta(Theta, 1.0);
    CHECK(bk.lam_f_norm_sq == 0.0);
    CHECK(bk.f_norm_sq ==
          doctest::Approx(16.0 * kPi * kPi * c * c).epsilon(1e-13));
    CHECK(bk.chern == doctest::Approx(bk.f_norm_sq).epsilon(1e-13));
    CHECK(bk.defect_rel < 1e-12);

    // constant section: everything zero
    std::array<Eigen::MatrixXcd, 4> zero;
    for (auto& m : zero) m = Eigen::MatrixXcd::Zero(2, 2);
    const EnergyBookkeeping bz = testbed_energy_constant_theta(zero, 1.0);
    CHECK(bz.f_norm_sq == 0.0);
    CHECK(bz.chern == 0.0);
}

TEST_CASE("4d energy bookkeeping: perturbed periodic connection") {
    SpectralData sd({complexd(0.25, 0.0), complexd(-0.25, 0.0)},
                    complexd(0.0, 1.0));
    const EnergyBookkeeping bk = testbed_energy_perturbed(sd, 12, 12, 1.0, 0.3, 5);
    CHECK(bk.f_norm_sq > 0.0);
    CHECK(bk.defect_rel < 1e-6);
}

TEST_CASE("collapse sweep: zero amplitude is exactly flat") {
    Scenario sc;
    sc.N = 16;
    sc.amplitude = 0.0;
    sc.t_count = 3;
    sc.base_tol = 0.05;
    sc.flow.record_every = 0;
    const CollapseReport rep = run_collapse_experiment(sc);
    REQUIRE(rep.rows.size() == 3);
    for (const auto& r : rep.rows) {
        CHECK(r.ok);
        CHECK(r.dist_l2 == 0.0);
        CHECK(r.f_l2 == 0.0);
        CHECK(r.flow_steps == 0);
    }
}

TEST_CASE("collapse sweep: decreasing distances and bit-identical reruns") {
    Scenario sc;
    sc.N = 16;
    sc.amplitude = 0.2;
    sc.seed = 9;
    sc.t_count = 3;
    sc.t_ratio = 0.5;
    sc.base_tol = 0.05;
    sc.base_samples = 2;
    sc.flow.record_every = 0;
    sc.flow.dealias_modes = 5;

    const CollapseReport rep = run_collapse_experiment(sc);
    REQUIRE(rep.rows.size() == 3);
    for (size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(rep.rows[i].ok);
        CHECK(rep.rows[i].f_l2 <= rep.rows[i].hym_tol);
        if (i > 0) CHECK(rep.rows[i].dist_l21 < rep.rows[i - 1].dist_l21);
        for (const auto& b : rep.rows[i].monitor)
            CHECK(b.t_m == doctest::Approx(b.t * b.m).epsilon(1e-14));
    }
    // t_i m_i decreases along the sweep at every monitored sample
    for (size_t i = 1; i < rep.rows.size(); ++i)
        for (size_t k = 0; k < rep.rows[i].monitor.size(); ++k)
            CHECK(rep.rows[i].monitor[k].t_m < rep.rows[i - 1].monitor[k].t_m);

    write_collapse_csv(rep, "rep_a.csv", "mon_a.csv");
    const CollapseReport rep2 = run_collapse_experiment(sc);
    write_collapse_csv(rep2, "rep_b.csv", "mon_b.csv");
    CHECK(slurp("rep_a.csv") == slurp("rep_b.csv"));
    CHECK(slurp("mon_a.csv") == slurp("mon_b.csv"));
    CHECK(!slurp("rep_a.csv").empty());
    for (const char* f : {"rep_a.csv", "rep_b.csv", "mon_a.csv", "mon_b.csv"})
        std::remove(f);
}

TEST_CASE("trajectory CSV format") {
    std::vector<FlowRecord> traj{{0, 0.0, 0.1, 2.0, 1.4, 0.3, 0.5, 0.2},
                                 {10, 1.0, 0.2, 1.0, 1.0, 0.2, 0.4, 0.1}};
    write_trajectory_csv(traj, "traj_test.csv");
    const std::string body = slurp("traj_test.csv");
    CHECK(body.find("step,time,dt,ym_energy,hym_residual,dist_l2,dist_l21,c0_s") ==
          0);
    CHECK(body.find("\n10,1,") != std::string::npos);
    std::remove("traj_test.csv");
}

TEST_CASE("worker threads respect HYMLAB_THREADS") {
    setenv("HYMLAB_THREADS", "1", 1);
    CHECK(worker_threads(8) == 1);
    unsetenv("HYMLAB_THREADS");
    CHECK(worker_threads(1) == 1);
    CHECK(worker_threads(8) >= 1);
}
