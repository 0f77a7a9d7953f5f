// semiflat.hpp -- the hyperkaehler triple on chart x torus and the collapsing
// Kaehler family.
//
// Everything is expressed in the ordered frame (dx1, dx2, dy1, dy2); 2-forms
// are stored as antisymmetric 4x4 coefficient matrices W with
// omega(u,v) = u^T W v, complex structures as 4x4 matrices acting on column
// vectors, and compatibility is omega(u,v) = g(Xu, v).
//
//   g_s      = phi_ij (dx^i dx^j / s + s dy^i dy^j)
//   omega_I  = dx1^dx2 / s - s dy1^dy2
//   omega_J  = phi_ij dx^i ^ dy^j
//   omega_K  = -dx1^dy2 + dx2^dy1
//   I(d/dx^k) = -phi_k2 d/dx1 + phi_k1 d/dx2,  I(d/dy^k) = phi_k2 d/dy1 - phi_k1 d/dy2
//   J_s(d/dx^k) = (1/s) d/dy^k,  J_s(d/dy^k) = -s d/dx^k,  K = I J_s

#pragma once

#include "hessian_potential.hpp"

#include <Eigen/Dense>

namespace hymlab {

struct SemiFlatTriple {
    double s;
    Eigen::Matrix4d omega_I, omega_J, omega_K;
    Eigen::Matrix4d g;
    Eigen::Matrix4d I, J, K;
};

struct DegenerationParams {
    double t;
    double s;
    // s^2 = t/(1+t)
    static DegenerationParams from_t(double t) {
        if (t <= 0.0) throw NonpositiveScale("DegenerationParams: t must be > 0");
        return {t, std::sqrt(t / (1.0 + t))};
    }
    double relation_residual() const { return std::abs(s * s * (1.0 + t) - t); }
};

SemiFlatTriple triple_at(const HessianPotential& phi, const BasePoint& b, double s);

// Max over interior grid points (step h) and over the three forms of the
// numerical exterior-derivative coefficients; only x-derivatives contribute.
double closedness_residual(const HessianPotential& phi, double s, double h);

// (1+t) s omega_{I,s}; equals pi^* omega_B + t omega_SF componentwise.
Eigen::Matrix4d degeneration_form(const HessianPotential& phi, const BasePoint& b,
                                  const DegenerationParams& params);

// Coefficients of dz = dy2 + tau dy1 + y1 (dtau/dw) dw in (dx1,dx2,dy1,dy2),
// with dw = (1 + i phi_12) dx1 + i phi_22 dx2.
Eigen::Vector4cd dz_frame(const HessianPotential& phi, const BasePoint& b,
                          double y1, double fd_step = 1e-4);

// pi^* omega_B and omega_SF = omega_{I,1} as constant coefficient matrices.
Eigen::Matrix4d base_form();
Eigen::Matrix4d semiflat_form();

} // namespace hymlab
