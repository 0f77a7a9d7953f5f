// lab.hpp -- scenario orchestration: the collapsing-family experiment, the
// bubbling monitor, the doubly periodic 4d energy bookkeeping, and report
// writers.
//
// Collapse sweep: one fixed Hermitian seed field s*, per-row initial
// connection e^{s*}_dagger A0, flowed until |iLambda F|_{L^2} <= base_tol * t_i
// (a t-independent tolerance in the 1/t-scaled fiber metric of g_{t_i}).
// Monitor norms are taken against g_X := the s = 1 semi-flat metric.

#pragma once

#include "config.hpp"
#include "flows.hpp"

#include <cstdint>

namespace hymlab {

struct Scenario {
    std::string potential = "identity";
    double potential_param = 0.0;
    BasePoint base{0.0, 0.0};

    std::vector<complexd> lifts{complexd(0.25, 0.0), complexd(-0.25, 0.0)};
    std::vector<complexd> w_coefficients; // empty -> constant section

    int N = 64;
    int rank = 2;

    FlowOptions flow;

    double t0 = 1.0;
    int t_count = 8;
    double t_ratio = 0.5;
    double amplitude = 0.3;
    std::uint64_t seed = 7;
    int seed_max_mode = 2;
    double base_tol = 0.005;
    int base_samples = 5;

    std::string out_dir = "out";
    bool json = false;
};

Scenario scenario_from_config(const Config& cfg);

// geometry + spectral data + reference connection assembled from a scenario
struct LabSetup {
    std::shared_ptr<const HessianPotential> potential;
    BasePoint base;
    complexd tau;
    FiberGrid grid;
    SpectralData sd;
    FiberConnection A0;
};

LabSetup build_setup(const Scenario& sc);

// ---- bubbling monitor -----------------------------------------------------------

struct BubblingRecord {
    double t;
    double x1, x2;              // base sample
    double f_base_c0;           // |F_B|_{C^0(g_X)}
    double f_fiber_c0;          // |F_A|_{C^0(g_X)}
    double f_fiber_c0_over_t;   // (1/t) |F_A|
    double kappa_sq_c0;         // |kappa|^2_{C^0(g_X)}
    double m;                   // sum of the three
    double t_m;
};

// Curvature components split by index type (xx -> base, yy -> fiber,
// xy -> mixed); the fiber part comes from the flowed fiber connection, the
// mixed part from the section's Theta derivatives at the sample.
BubblingRecord bubbling_monitor(const LabSetup& setup, const FiberConnection& A_fiber,
                                const BasePoint& sample, double t);

// ---- collapse experiment -----------------------------------------------------------

struct ConvergenceRow {
    double t;
    double hym_tol;        // base_tol * t
    double dist_l2;        // |A_i - A0|_{L^2}
    double dist_l21;
    double f_l2;           // terminal |F_{A_i}|_{L^2}
    double f_c0;           // |F_{A_i}|_{C^0}
    double hol_dist;       // holonomy spectrum distance to A0
    long flow_steps;
    bool ok;
    std::string error;
    std::vector<BubblingRecord> monitor;
};

struct CollapseReport {
    std::vector<ConvergenceRow> rows;
    double fitted_rate; // log-log slope of dist_l21 against f_l2
    double s_star_c0;
};

CollapseReport run_collapse_experiment(const Scenario& sc);

void write_collapse_csv(const CollapseReport& rep, const std::string& report_path,
                        const std::string& monitor_path);
void write_trajectory_csv(const std::vector<FlowRecord>& traj, const std::string& path);

// ---- doubly periodic 4d testbed -----------------------------------------------------

struct EnergyBookkeeping {
    double f_norm_sq;     // |F|^2_{L^2(g_t)}
    double lam_f_norm_sq; // |iLambda F|^2
    double chern;         // integral Tr(F ^ F), complex orientation
    double defect_rel;    // |f - lam - chern| / max(f, eps)
};

// Constant-Theta reference connection (linear spectral section): all
// quantities are exact in the Theta matrices.
EnergyBookkeeping testbed_energy_constant_theta(
    const std::array<Eigen::MatrixXcd, 4>& Theta, double t);

// Periodic 4d testbed: constant-section Xi_0 moved by a band-limited complex
// gauge e^{s(x,y)}; spectral curvature on an (Nb, Nb, Nf, Nf) grid.
EnergyBookkeeping testbed_energy_perturbed(const SpectralData& sd, int Nb, int Nf,
                                           double t, double amplitude,
                                           std::uint64_t seed);

// number of worker threads for sweeps (HYMLAB_THREADS caps hardware value)
int worker_threads(int jobs);

std::string format_double(double v); // shortest round-trip, deterministic

} // namespace hymlab
