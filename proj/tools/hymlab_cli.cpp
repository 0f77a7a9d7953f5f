// hymlab_cli.cpp -- command-line driver: geometry and connection check suites,
// Poincare constant, single flow runs, the collapse sweep, and the gauge
// normalization demo.
//
// Exit codes: 0 all checks pass, 1 check failure, 2 usage/config error.

#include "lab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <random>

using namespace hymlab;
using nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct CheckTable {
    ordered_json rows = ordered_json::array();
    bool all_pass = true;
    bool json_out = false;

    void add(const std::string& name, double value, double threshold) {
        const bool pass = value <= threshold;
        all_pass = all_pass && pass;
        if (json_out) {
            rows.push_back({{"check", name},
                            {"value", value},
                            {"threshold", threshold},
                            {"pass", pass}});
        } else {
            std::printf("%-58s %12.4e  <= %8.1e  %s\n", name.c_str(), value,
                        threshold, pass ? "PASS" : "FAIL");
        }
    }
    int finish(const std::string& suite) {
        if (json_out) {
            ordered_json out{{"suite", suite}, {"pass", all_pass}, {"checks", rows}};
            std::cout << out.dump(2) << "\n";
        } else {
            std::printf("%s: %s\n", suite.c_str(), all_pass ? "PASS" : "FAIL");
        }
        return all_pass ? 0 : 1;
    }
};

Scenario load_scenario(const std::string& config_path, const std::string& out_dir,
                       long long seed, int grid_n) {
    Scenario sc;
    if (!config_path.empty()) sc = scenario_from_config(Config::parse_file(config_path));
    if (!out_dir.empty()) sc.out_dir = out_dir;
    if (seed >= 0) sc.seed = static_cast<std::uint64_t>(seed);
    if (grid_n > 0) sc.N = grid_n;
    return sc;
}

// ---- check-geometry --------------------------------------------------------------

int run_check_geometry(const Scenario& sc, bool json_out) {
    CheckTable tab;
    tab.json_out = json_out;
    std::mt19937_64 rng(sc.seed);

    for (const std::string name : {"identity", "diagonal", "tau_linear"}) {
        auto phi = make_potential(name, name == "diagonal" ? 2.0 : 0.1);
        const Domain& d = phi->domain();
        std::uniform_real_distribution<double> ux(d.x1_min, d.x1_max);
        std::uniform_real_distribution<double> uy(d.x2_min, d.x2_max);

        double ma = 0.0, tau_fd = 0.0, imtau = 0.0, normtau = 0.0, hk = 0.0,
               compat = 0.0;
        std::uniform_real_distribution<double> us(0.1, 2.0);
        for (int k = 0; k < 1000; ++k) {
            const BasePoint b{ux(rng), uy(rng)};
            ma = std::max(ma, monge_ampere_residual(*phi, b));
            const Hess2 H = phi->hess(b.x1, b.x2);
            const complexd tau = tau_at(*phi, b).tau;
            imtau = std::max(imtau, std::abs(tau.imag() * H.h22 - 1.0));
            normtau = std::max(normtau, std::abs(std::norm(tau) - H.h11 / H.h22));
            if (k < 100) {
                // finite-difference Hessian of eval cross-checks tau
                const double h = 1e-4;
                auto f = [&](double x, double y) { return phi->eval(x, y); };
                const double h12 = (f(b.x1 + h, b.x2 + h) - f(b.x1 + h, b.x2 - h) -
                                    f(b.x1 - h, b.x2 + h) + f(b.x1 - h, b.x2 - h)) /
                                   (4.0 * h * h);
                const double h22 =
                    (f(b.x1, b.x2 + h) - 2.0 * f(b.x1, b.x2) + f(b.x1, b.x2 - h)) /
                    (h * h);
                tau_fd = std::max(tau_fd,
                                  std::abs(tau - complexd(h12, 1.0) / h22) /
                                      std::abs(tau));
                const SemiFlatTriple T = triple_at(*phi, b, us(rng));
                const Eigen::Matrix4d id = Eigen::Matrix4d::Identity();
                hk = std::max(hk, (T.I * T.I + id).norm());
                hk = std::max(hk, (T.J * T.J + id).norm());
                hk = std::max(hk, (T.K - T.I * T.J).norm());
                for (int v = 0; v < 6; ++v) {
                    Eigen::Vector4d a = Eigen::Vector4d::NullaryExpr(
                        [&](Eigen::Index) { return ux(rng); });
                    Eigen::Vector4d c = Eigen::Vector4d::NullaryExpr(
                        [&](Eigen::Index) { return uy(rng); });
                    compat = std::max(
                        {compat,
                         std::abs(a.dot(T.omega_I * c) - (T.I * a).dot(T.g * c)),
                         std::abs(a.dot(T.omega_J * c) - (T.J * a).dot(T.g * c)),
                         std::abs(a.dot(T.omega_K * c) - (T.K * a).dot(T.g * c))});
                }
            }
        }
        const double ma_tol = phi->ma_tolerance();
        tab.add(name + ": |det(hess) - 1| (1000 pts)", ma, ma_tol);
        tab.add(name + ": tau vs finite-difference hessian", tau_fd, 1e-6);
        tab.add(name + ": Im(tau) phi_22 - 1", imtau, 1e-12);
        tab.add(name + ": |tau|^2 - phi_11/phi_22", normtau, 1e-12);
        tab.add(name + ": quaternion relations", hk, 1e-12);
        tab.add(name + ": form/metric compatibility", compat, 1e-12);

        // closedness decays at order >= 2 (constant forms are exactly closed)
        const double c1 = closedness_residual(*phi, 0.7, 1.0 / 32);
        const double c2 = closedness_residual(*phi, 0.7, 1.0 / 64);
        if (c1 > 1e-14)
            tab.add(name + ": closedness order (h halving ratio <= 0.3)",
                    c2 / c1, 0.3);
        else
            tab.add(name + ": closedness residual (constant forms)", c1, 1e-14);
    }

    // degeneration identity
    auto phi = make_potential("tau_linear", 0.1);
    const BasePoint b{0.1, 0.2};
    double sfdeg = 0.0;
    for (double t : {1.0, 0.5, 0.1, 0.01}) {
        const auto params = DegenerationParams::from_t(t);
        const Eigen::Matrix4d lhs = degeneration_form(*phi, b, params);
        const Eigen::Matrix4d rhs = base_form() + t * semiflat_form();
        sfdeg = std::max(sfdeg, (lhs - rhs).norm());
    }
    tab.add("sfdeg: (1+t)s omega_I - base - t omega_SF", sfdeg, 1e-14);

    // Cauchy-Riemann residuals of the holomorphic chart
    auto w_of = [&](double x, double y) {
        return holomorphic_coords(*phi, {x, y}).first;
    };
    tab.add("tau_linear: CR residual of w", cr_residual(*phi, w_of, 1.0 / 64), 1e-6);
    auto x1_of = [](double x, double) { return complexd(x, 0.0); };
    const double cr_bad = cr_residual(*phi, x1_of, 1.0 / 64);
    tab.add("x1 is not holomorphic (residual >= 0.4)",
            cr_bad >= 0.4 ? 0.0 : 1.0, 0.5);

    return tab.finish("check-geometry");
}

// ---- check-connection ------------------------------------------------------------

int run_check_connection(const Scenario& sc, bool json_out) {
    CheckTable tab;
    tab.json_out = json_out;

    const LabSetup setup = build_setup(sc);
    const FiberGrid& grid = setup.grid;
    const int n = setup.sd.rank();

    tab.add("flatness |F_{A0}|_{L^2}", l2_norm(curvature(setup.A0).F), 1e-14);
    tab.add("trace of A0 components",
            std::abs(setup.sd.lift_sum()), 1e-12);

    double hol = 0.0;
    const Eigen::MatrixXcd H1 = holonomy(setup.A0, Cycle::y1);
    const Eigen::MatrixXcd H2 = holonomy(setup.A0, Cycle::y2);
    for (int i = 0; i < n; ++i) {
        hol = std::max(hol, std::abs(H1(i, i) - std::exp(complexd(
                                                    0.0, 2.0 * kPi *
                                                             setup.sd.theta1()[i]))));
        hol = std::max(hol, std::abs(H2(i, i) - std::exp(complexd(
                                                    0.0, 2.0 * kPi *
                                                             setup.sd.theta2()[i]))));
    }
    tab.add("holonomy = diag(e^{2 pi i theta})", hol, 1e-12);

    // lattice-lift gauge equivalence for three shift patterns
    const std::vector<std::vector<std::pair<int, int>>> patterns = {
        {{1, 0}, {-1, 0}}, {{0, 1}, {0, -1}}, {{1, 1}, {-1, -1}}};
    double lift_resid = 0.0;
    for (const auto& pat : patterns) {
        if (static_cast<int>(pat.size()) != n) continue;
        std::vector<complexd> shifted = setup.sd.lifts();
        for (int i = 0; i < n; ++i)
            shifted[i] += static_cast<double>(pat[i].first) -
                          grid.tau * static_cast<double>(pat[i].second);
        SpectralData sd_shift(shifted, grid.tau, LiftPolicy::AsGiven);
        const FiberConnection Psi = reference_connection(sd_shift, grid, true);
        const MatrixField u = lift_equivalence_gauge(setup.sd, grid, pat);
        lift_resid = std::max(
            lift_resid, conn_l2_dist(apply_complex_gauge(u, Psi), setup.A0));
    }
    tab.add("lattice-lift gauge equivalence (3 patterns)", lift_resid, 1e-10);

    // triple-HYM residuals: holomorphic linear section vs Re(w) counterexample
    {
        auto phi = make_potential("identity");
        const complexd tau(0.0, 1.0);
        SpectralData lin({complexd(0.12, 0.0), complexd(-0.12, 0.0)}, tau);
        lin.set_linear_w({complexd(0.05, 0.0), complexd(-0.05, 0.0)}, phi, {0.0, 0.0});
        const TripleResidual r = hym_residual_triple(*phi, {0.1, 0.05}, lin, 0.7);
        tab.add("triple-HYM residual I (holomorphic section)", r.r_I, 1e-8);
        tab.add("triple-HYM residual J (holomorphic section)", r.r_J, 1e-8);
        tab.add("triple-HYM residual K (holomorphic section)", r.r_K, 1e-8);

        SpectralData bad({complexd(0.12, 0.0), complexd(-0.12, 0.0)}, tau);
        bad.set_custom([phi](const BasePoint& b) {
            const complexd w = holomorphic_coords(*phi, b).first;
            return std::vector<complexd>{w.real(), -w.real()};
        });
        const TripleResidual rb = hym_residual_triple(*phi, {0.1, 0.05}, bad, 0.7);
        tab.add("non-holomorphic section violates J (residual >= 1e-3)",
                rb.r_J >= 1e-3 ? 0.0 : 1.0, 0.5);
    }

    // curvature identity at the scenario grid
    {
        const MatrixField s = random_herm_perp(grid, n, 1.0, 3, sc.seed + 11);
        tab.add("curvature identity residual (|s|_C0 = 1)",
                curvature_identity_residual(s, setup.A0), 1e-6);
    }

    // degree diagnostic of the flat reference
    tab.add("degree diagnostic |i int Tr F|", std::abs(degree_diagnostic(setup.A0)),
            1e-14);

    return tab.finish("check-connection");
}

// ---- poincare -----------------------------------------------------------------------

int run_poincare(const Scenario& sc, bool json_out) {
    const LabSetup setup = build_setup(sc);
    const PoincareEstimate est = poincare_constant(setup.sd, setup.grid);
    if (json_out) {
        ordered_json out{{"c_p", est.c_p},
                         {"lambda_min", est.lambda_min},
                         {"certificate",
                          {{"entry", {est.entry_j, est.entry_k}},
                           {"mode", {est.mode_m, est.mode_n}}}}};
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("C_p        = %.12g\n", est.c_p);
        std::printf("lambda_min = %.12g\n", est.lambda_min);
        std::printf("certificate: entry (%d,%d), mode (%d,%d)\n", est.entry_j,
                    est.entry_k, est.mode_m, est.mode_n);
    }
    return 0;
}

// ---- flow ----------------------------------------------------------------------------

int run_flow(const Scenario& sc, bool json_out) {
    const LabSetup setup = build_setup(sc);
    const MatrixField s = random_herm_perp(setup.grid, sc.rank, sc.amplitude,
                                           sc.seed_max_mode, sc.seed);
    const FlowResult res = kempf_ness_flow(herm_exp(s), setup.A0, sc.flow);

    std::filesystem::create_directories(sc.out_dir);
    const std::string traj_path = sc.out_dir + "/trajectory.csv";
    write_trajectory_csv(res.trajectory, traj_path);

    bool monotone = true;
    for (size_t i = 1; i < res.trajectory.size(); ++i)
        monotone = monotone &&
                   res.trajectory[i].ym_energy <= res.trajectory[i - 1].ym_energy;

    if (json_out) {
        ordered_json out{{"terminal_residual", res.terminal_residual},
                         {"steps", res.steps},
                         {"time", res.time},
                         {"energy_monotone", monotone},
                         {"trajectory_csv", traj_path}};
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("terminal |iLambda F|_{L^2} = %.3e after %ld steps (t = %.3f)\n",
                    res.terminal_residual, res.steps, res.time);
        std::printf("energy monotone: %s\n", monotone ? "yes" : "NO");
        std::printf("trajectory: %s\n", traj_path.c_str());
    }
    return (res.terminal_residual < sc.flow.tol && monotone) ? 0 : 1;
}

// ---- collapse ----------------------------------------------------------------------------

int run_collapse(const Scenario& sc, bool json_out) {
    const CollapseReport rep = run_collapse_experiment(sc);
    std::filesystem::create_directories(sc.out_dir);
    const std::string report_path = sc.out_dir + "/report.csv";
    const std::string monitor_path = sc.out_dir + "/monitor.csv";
    write_collapse_csv(rep, report_path, monitor_path);

    // note: the semi-flat family itself stands in for the Ricci-flat metrics;
    // monitor norms use g_X := the s = 1 semi-flat metric
    bool all_ok = true;
    for (const auto& r : rep.rows) all_ok = all_ok && r.ok;

    if (json_out) {
        ordered_json rows = ordered_json::array();
        for (const auto& r : rep.rows)
            rows.push_back({{"t", r.t},
                            {"dist_l2", r.dist_l2},
                            {"dist_l21", r.dist_l21},
                            {"f_l2", r.f_l2},
                            {"f_c0", r.f_c0},
                            {"hol_dist", r.hol_dist},
                            {"steps", r.flow_steps},
                            {"ok", r.ok}});
        ordered_json out{{"rows", rows},
                         {"fitted_rate", rep.fitted_rate},
                         {"s_star_c0", rep.s_star_c0},
                         {"report_csv", report_path},
                         {"monitor_csv", monitor_path},
                         {"metric_model", "semi-flat family; g_X = s=1 semi-flat"}};
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("metric model: semi-flat family as the Ricci-flat stand-in; "
                    "g_X = s = 1 semi-flat metric\n");
        std::printf("%12s %12s %12s %12s %8s\n", "t", "dist_l21", "f_l2",
                    "hol_dist", "steps");
        for (const auto& r : rep.rows) {
            if (r.ok)
                std::printf("%12.5e %12.5e %12.5e %12.5e %8ld\n", r.t, r.dist_l21,
                            r.f_l2, r.hol_dist, r.flow_steps);
            else
                std::printf("%12.5e FAILED: %s\n", r.t, r.error.c_str());
        }
        std::printf("fitted log-log rate (dist_l21 vs f_l2): %.3f\n", rep.fitted_rate);
        std::printf("report: %s\nmonitor: %s\n", report_path.c_str(),
                    monitor_path.c_str());
    }
    return all_ok ? 0 : 1;
}

// ---- normalize -----------------------------------------------------------------------------

int run_normalize(const Scenario& sc, bool json_out) {
    const LabSetup setup = build_setup(sc);
    const int n = sc.rank;

    // diagonal smooth field plus the unbounded flat direction diag(10,-10,...)
    MatrixField s_small(setup.grid, n);
    {
        MatrixField r = random_herm_perp(setup.grid, n, 0.05, 2, sc.seed + 3);
        for (int i = 0; i < setup.grid.N; ++i)
            for (int j = 0; j < setup.grid.N; ++j) {
                complexd* p = s_small.at(i, j);
                const complexd* q = r.at(i, j);
                for (int d = 0; d < n; ++d) p[d * n + d] = q[d * n + d];
            }
        s_small = project_herm_perp(traceless(hermitize(s_small)));
    }
    MatrixField s_big = s_small;
    for (int i = 0; i < setup.grid.N; ++i)
        for (int j = 0; j < setup.grid.N; ++j) {
            complexd* p = s_big.at(i, j);
            for (int d = 0; d < n; ++d)
                p[d * n + d] += (d == 0 ? 10.0 : (d == 1 ? -10.0 : 0.0));
        }

    const GaugeFixCalibration cal = calibrate_gauge_fix(setup.A0, setup.sd);
    const NormalizeResult res = normalize_gauge(s_big, setup.A0, setup.sd, 1e-2, &cal);

    const bool pass = res.conn_residual < 1e-8 && res.c0_s_prime <= cal.C0;
    if (json_out) {
        ordered_json out{{"C1", cal.C1},
                         {"Lambda0", cal.Lambda0},
                         {"C0", cal.C0},
                         {"c0_s_input", c0_norm(s_big)},
                         {"c0_s_prime", res.c0_s_prime},
                         {"conn_residual", res.conn_residual},
                         {"pass", pass}};
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("calibration: C1 = %.3f, Lambda0 = %.3f, C0 = %.3f\n", cal.C1,
                    cal.Lambda0, cal.C0);
        std::printf("input |s|_C0 = %.3f -> normalized |s'|_C0 = %.3e\n",
                    c0_norm(s_big), res.c0_s_prime);
        std::printf("connection residual = %.3e\n", res.conn_residual);
        std::printf("%s\n", pass ? "PASS" : "FAIL");
    }
    return pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hymlab: semi-flat geometry, flat reference connections, and "
                 "gauge flows on collapsing elliptic fibers"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed = -1;
    int grid_n = 0;
    bool json_out = false;
    app.add_option("--config", config_path, "scenario config (.toml subset or .json)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "RNG seed override");
    app.add_option("--grid", grid_n, "fiber grid N override");
    app.add_flag("--json", json_out, "JSON output");

    auto* c_geo = app.add_subcommand("check-geometry", "base geometry invariant suite");
    auto* c_conn = app.add_subcommand("check-connection",
                                      "reference connection and gauge calculus checks");
    auto* c_poi = app.add_subcommand("poincare", "Poincare constant with certificate");
    auto* c_flow = app.add_subcommand("flow", "single Kempf-Ness flow run");
    auto* c_col = app.add_subcommand("collapse", "collapsing-family sweep");
    auto* c_norm = app.add_subcommand("normalize", "gauge-fixing normalization demo");
    for (auto* sub : {c_geo, c_conn, c_poi, c_flow, c_col, c_norm})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const Scenario sc = load_scenario(config_path, out_dir, seed, grid_n);
        if (c_geo->parsed()) return run_check_geometry(sc, json_out);
        if (c_conn->parsed()) return run_check_connection(sc, json_out);
        if (c_poi->parsed()) return run_poincare(sc, json_out);
        if (c_flow->parsed()) return run_flow(sc, json_out);
        if (c_col->parsed()) return run_collapse(sc, json_out);
        if (c_norm->parsed()) return run_normalize(sc, json_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
