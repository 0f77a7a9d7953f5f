// gauge_action.hpp -- complexified gauge action, curvature, energies, and the
// scalar curvature identity on the fiber.
//
// Sign conventions (fixed once, derived in tests/test_gauge_calculus.cpp):
//   fiber orientation is the complex one (dy^2 ^ dy^1 positive), so
//   iLambda_{omega_0}(F_12 dy^1^dy^2) = -i F_12 and star(dy^1^dy^2) = -1;
//   the Kempf-Ness moment map is mu = i F_12 and the flow g' g^{-1} = mu
//   decreases the Yang-Mills energy.
//   Delta_{g0} = 2 Im(tau) d_z d_zbar (half the metric trace Laplacian).

#pragma once

#include "spectral_data.hpp"

namespace hymlab {

struct GaugeTransform {
    MatrixField g;
    bool unitary = false;
    bool positive_hermitian = false;
};

struct CurvatureField {
    MatrixField F;        // coefficient of dy^1 ^ dy^2
    MatrixField lambda_F; // iLambda_{omega_0} F = -i F
};

// det(g) - 1 pointwise max (SL(n) check)
double det_deviation(const MatrixField& g);
// max pointwise |g* g - Id|
double unitary_deviation(const MatrixField& g);

// complex components of a connection: a = a_z dz + a_zbar dzbar
MatrixField conn_az(const FiberConnection& A);
MatrixField conn_azbar(const FiberConnection& A);
FiberConnection conn_from_complex(const MatrixField& bz, const MatrixField& bzbar);

// covariant derivatives of endomorphism fields
MatrixField cov_deriv_z(const FiberConnection& A, const MatrixField& f);
MatrixField cov_deriv_zbar(const FiberConnection& A, const MatrixField& f);
MatrixField cov_deriv_y1(const FiberConnection& A, const MatrixField& f);
MatrixField cov_deriv_y2(const FiberConnection& A, const MatrixField& f);

// sigma_dagger A per the complexified action; guard on pointwise condition
FiberConnection apply_complex_gauge(const MatrixField& sigma, const FiberConnection& A,
                                    double cond_guard = 1e8);
inline FiberConnection apply_complex_gauge(const GaugeTransform& sigma,
                                           const FiberConnection& A) {
    return apply_complex_gauge(sigma.g, A);
}

// e^s_dagger A0 = A0 + Upsilon(-s) del_{A0} s - Upsilon(s) dbar_{A0} s
// (independent code path from apply_complex_gauge; cross-validated in tests)
FiberConnection apply_hermitian_gauge(const MatrixField& s, const FiberConnection& A0);

CurvatureField curvature(const FiberConnection& A);

double ym_energy(const FiberConnection& A);

// L^2_1 norm of an endomorphism field against a background connection:
// sqrt(|f|^2 + |D_1 f|^2 + |D_2 f|^2)
double l21_norm(const MatrixField& f, const FiberConnection& background);

// distances between connections (plain component norms, dy^1 dy^2 measure)
double conn_l2_dist(const FiberConnection& A, const FiberConnection& B);
double conn_l21_dist(const FiberConnection& A, const FiberConnection& B,
                     const FiberConnection& background);

// max pointwise residual of
//   -Delta_{g0} Tr(e^{2s}) + |e^{-s} del_A e^{2s}|^2_{g0} = Tr(e^{2s} iLambda F_{e^s_dagger A})
// for flat A (NotFlat otherwise).
double curvature_identity_residual(const MatrixField& s, const FiberConnection& A);

// Delta_{g0} = 2 Im(tau) d_z d_zbar
MatrixField laplace_g0(const MatrixField& f);

// i * integral_E Tr(F) dy^1 dy^2 (line-bundle degree diagnostic; 0 for flat)
complexd degree_diagnostic(const FiberConnection& A);

} // namespace hymlab
