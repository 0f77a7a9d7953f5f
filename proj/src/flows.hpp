// flows.hpp -- Kempf-Ness flow, Yang-Mills heat flow, the Poincare constant,
// Hermitian-gauge recovery, and the gauge-fixing normalization.
//
// Flow convention (see gauge_action.hpp): the moment map is mu = i F_12 and
// the Kempf-Ness flow is g' = mu(g_dagger A0) g; the induced connection path
// A(t) = g(t)_dagger A0 solves the Yang-Mills heat flow and both decrease
// E = |F|_{L^2}^2.  Steps are explicit RK4, accepted only when the energy
// does not increase; dt halves on rejection and grows slowly on acceptance.

#pragma once

#include "gauge_action.hpp"

#include <cstdint>
#include <optional>

namespace hymlab {

// ---- Poincare constant --------------------------------------------------------

struct PoincareEstimate {
    double c_p;        // 1 / lambda_min
    double lambda_min; // min |symbol| * |dzbar|_{g0}
    int entry_j, entry_k;
    int mode_m, mode_n;
};

// Exact mode computation of the smallest singular value of dbar_{A0} on
// Herm_0^perp: entry (j,k), mode (m,nh) carries the symbol
// pi (tau nh - m - q_jk) / Im(tau); diagonal entries exclude mode (0,0).
PoincareEstimate poincare_constant(const SpectralData& sd, const FiberGrid& grid);

// ---- Hermitian recovery (Lemma 6.3 endpoint) ------------------------------------

struct RecoverOptions {
    double residual_tol = 1e-11;
    int max_iters = 80;
    std::optional<double> delta0; // contraction-radius gate; default 1/(4 C_p)
};

struct RecoverResult {
    MatrixField s;
    double lambda0;  // |s| / |A - A_ref| (measured inverse bound)
    double residual; // |e^s_dagger A_ref - A|_{L^2}
    int iters;
    double delta0_used;
};

// Solve e^s_dagger A_ref = A for s in Herm_0^perp by chord Newton with the
// fixed linearization L(s) = del_{A0} s - dbar_{A0} s inverted in mode space.
// frame_u: constant unitary with A_ref = u (A0-pattern) u^*; identity by default.
RecoverResult recover_hermitian(const FiberConnection& A, const FiberConnection& A_ref,
                                const SpectralData& sd,
                                const Eigen::MatrixXcd* frame_u = nullptr,
                                const RecoverOptions& opts = {});

// ---- flows -------------------------------------------------------------------------

struct FlowOptions {
    double tol = 1e-8;       // terminal |iLambda F|_{L^2}
    double t_max = 1e4;
    long max_steps = 2000000;
    double dt_init = 0.0;    // 0 -> 0.5 / |iLambda F|_{C^0}
    double dt_growth = 1.15;
    bool dealias = true;     // truncation of stage derivatives
    int dealias_modes = 0;   // kept modes; 0 -> N/3 (the 2/3 rule)
    int record_every = 50;
};

struct FlowRecord {
    long step;
    double time, dt;
    double ym_energy;
    double hym_residual; // |iLambda F|_{L^2}
    double dist_l2, dist_l21;
    double c0_s;
};

struct FlowResult {
    FiberConnection A;            // terminal connection
    MatrixField g;                // terminal gauge (KN flow only; empty for heat flow)
    std::vector<FlowRecord> trajectory;
    long steps = 0;
    double time = 0.0;
    double terminal_residual = 0.0;
    bool energy_monotone = true; // checked at every accepted step
};

// Kempf-Ness flow from g(0) = g0 (A(t) := g(t)_dagger A0 throughout).
FlowResult kempf_ness_flow(const MatrixField& g0, const FiberConnection& A0,
                           const FlowOptions& opts = {});

// Convenience: start from A_init = e^s_dagger A0 with s recovered first.
FlowResult kempf_ness_flow(const FiberConnection& A_init, const FiberConnection& A0,
                           const SpectralData& sd, const FlowOptions& opts = {});

// Direct Yang-Mills heat flow on the connection (cross-validates the KN path).
// Diagnostics distances are measured against A_ref when given.
FlowResult ym_heat_flow(const FiberConnection& A_init, const FlowOptions& opts = {},
                        const FiberConnection* A_ref = nullptr);

// ---- gauge fixing (Theorem 6.1 endpoint) ---------------------------------------------

struct GaugeFixCalibration {
    double C1;      // measured Moser constant
    double Lambda0; // measured inverse bound
    double C0;      // 2 C1 Lambda0
    double eps0;
};

double moser_constant(const std::vector<MatrixField>& samples,
                      const FiberConnection& A0, double eps0);

// Deterministic calibration on a seeded band-limited sample family.
GaugeFixCalibration calibrate_gauge_fix(const FiberConnection& A0,
                                        const SpectralData& sd, double eps0 = 1e-2,
                                        std::uint64_t seed = 12345, int nsamples = 32);

struct NormalizeResult {
    MatrixField s_prime;
    double c0_s_prime;
    double conn_residual; // |e^{s'}_dagger A0 - e^s_dagger A0|_{L^2}
    double c0_bound;      // the C0 in force
    Eigen::MatrixXcd u;   // alignment unitary
    double flow_terminal_residual;
};

// Mirror of the Theorem 6.1 proof: flow to the flat limit, align holonomies
// with a constant unitary, recover the bounded Hermitian representative.
NormalizeResult normalize_gauge(const MatrixField& s, const FiberConnection& A0,
                                const SpectralData& sd, double eps0,
                                const GaugeFixCalibration* calib = nullptr,
                                const FlowOptions& flow_opts = {});

// constant-unitary holonomy alignment (exposed for tests)
Eigen::MatrixXcd align_holonomies(const FiberConnection& A_flat,
                                  const SpectralData& sd, double tol = 1e-4);

// holonomy spectrum distance: max over both cycles of matched eigenvalue gaps
double holonomy_spectrum_distance(const FiberConnection& A, const FiberConnection& B);

} // namespace hymlab
