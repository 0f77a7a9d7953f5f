// spectral_data.hpp -- spectral data (n marked points per fiber) and the flat
// reference connections they determine.
//
//   q_i = theta_1^i - tau theta_2^i,   sum_i q_i = 0,   Q = diag(q_i)
//   d_{Xi_0} = d + 2 pi i (Theta_1 dy^1 + Theta_2 dy^2)
//   dbar part: dbar - pi Q / Im(tau) dzbar
//   holonomy around the y^k cycle: diag(e^{2 pi i theta_k^i})  (P-exp(+oint A))
//
// Lifts are reduced to the fundamental domain theta in [-1/2, 1/2)^2 and then
// balanced by one integer shift so the lift sum is exactly zero.

#pragma once

#include "fiber_grid.hpp"
#include "hessian_potential.hpp"
#include "semiflat.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hymlab {

struct FiberConnection {
    MatrixField a1, a2; // anti-Hermitian components along dy^1, dy^2
    const FiberGrid& grid() const { return a1.grid(); }
    int rank() const { return a1.rank(); }
};

enum class LiftPolicy { ReduceAndBalance, AsGiven };

class SpectralData {
  public:
    // Constant section q(b) = lifts; optional per-eigenvalue linear-in-w
    // coefficients give q_i(b) = lifts_i + c_i (w(b) - w(b0)).
    SpectralData(std::vector<complexd> lifts, complexd tau,
                 LiftPolicy policy = LiftPolicy::ReduceAndBalance);

    void set_linear_w(std::vector<complexd> coeffs,
                      std::shared_ptr<const HessianPotential> phi, BasePoint b0);
    void set_custom(std::function<std::vector<complexd>(const BasePoint&)> fn);

    int rank() const { return static_cast<int>(lifts_.size()); }
    complexd tau() const { return tau_; }
    const std::vector<complexd>& lifts() const { return lifts_; }
    const std::vector<double>& theta1() const { return theta1_; }
    const std::vector<double>& theta2() const { return theta2_; }

    complexd lift_sum() const;
    // minimal pairwise distance of the marked points mod Z + tau Z
    double min_gap() const;
    void require_distinct(double gap_tol = 1e-8) const;

    bool has_base_dependence() const { return constant_ == false; }
    std::vector<complexd> lifts_at(const BasePoint& b) const;
    // theta decomposition at b, using tau(phi, b) when base-dependent
    void theta_at(const HessianPotential& phi, const BasePoint& b,
                  std::vector<double>& th1, std::vector<double>& th2) const;

  private:
    std::vector<complexd> lifts_;
    std::vector<double> theta1_, theta2_;
    complexd tau_;
    bool constant_ = true;
    std::vector<complexd> wcoeffs_;
    std::shared_ptr<const HessianPotential> phi_;
    BasePoint b0_{};
    complexd w0_{};
    std::function<std::vector<complexd>(const BasePoint&)> custom_;
};

// theta from q = theta1 - tau theta2 (real-linear split; unique for Im tau > 0)
std::pair<double, double> theta_decompose(complexd q, complexd tau);

// ---- operations -------------------------------------------------------------

FiberConnection reference_connection(const SpectralData& sd, const FiberGrid& grid,
                                     bool allow_degenerate = false);

enum class Cycle { y1, y2 };

// Path-ordered exponential P-exp(+oint A) around the cycle at fixed value of
// the other coordinate; 4th-order Magnus, exact for constant connections.
Eigen::MatrixXcd holonomy(const FiberConnection& conn, Cycle cycle,
                          double other_coord = 0.0, int steps = 256);

// u = diag(e^{2 pi i (alpha_i y^1 + beta_i y^2)}) for integer shift pairs.
MatrixField lift_equivalence_gauge(const SpectralData& sd, const FiberGrid& grid,
                                   const std::vector<std::pair<int, int>>& shifts);

struct TripleResidual {
    double r_I, r_J, r_K;
};

// |F ^ omega_X| top-form coefficients at b for X = I, J_s, K with
// F = 2 pi i Theta_{ij} dx^i ^ dy^j, Theta_{ij} = d theta_j / d x^i by central
// differences of the section's theta decomposition.
TripleResidual hym_residual_triple(const HessianPotential& phi, const BasePoint& b,
                                   const SpectralData& sd, double s,
                                   double fd_step = 1e-4);

// Theta_{ij} matrices (diagonal) at b; exposed for the bubbling monitor.
std::array<Eigen::MatrixXcd, 4> section_theta_derivatives(
    const HessianPotential& phi, const BasePoint& b, const SpectralData& sd,
    double fd_step = 1e-4);

} // namespace hymlab
