#include "gauge_action.hpp"

#include <cmath>

namespace hymlab {

double det_deviation(const MatrixField& g) {
    double worst = 0.0;
    for (int i = 0; i < g.N(); ++i)
        for (int j = 0; j < g.N(); ++j)
            worst = std::max(worst, std::abs(g.matrix_at(i, j).determinant() - 1.0));
    return worst;
}

double unitary_deviation(const MatrixField& g) {
    MatrixField d = g.adjoint() * g - MatrixField::identity(g.grid(), g.rank());
    return c0_norm(d);
}

MatrixField conn_az(const FiberConnection& A) {
    const complexd tau = A.grid().tau;
    const complexd den = complexd(0.0, 2.0 * tau.imag());
    MatrixField out = A.a1;
    out -= std::conj(tau) * A.a2;
    out *= 1.0 / den;
    return out;
}

MatrixField conn_azbar(const FiberConnection& A) {
    const complexd tau = A.grid().tau;
    const complexd den = complexd(0.0, 2.0 * tau.imag());
    MatrixField out = tau * A.a2;
    out -= A.a1;
    out *= 1.0 / den;
    return out;
}

FiberConnection conn_from_complex(const MatrixField& bz, const MatrixField& bzbar) {
    const complexd tau = bz.grid().tau;
    MatrixField b1 = tau * bz;
    b1 += std::conj(tau) * bzbar;
    MatrixField b2 = bz;
    b2 += bzbar;
    return {std::move(b1), std::move(b2)};
}

MatrixField cov_deriv_z(const FiberConnection& A, const MatrixField& f) {
    return deriv_z(f) + commutator(conn_az(A), f);
}

MatrixField cov_deriv_zbar(const FiberConnection& A, const MatrixField& f) {
    return deriv_zbar(f) + commutator(conn_azbar(A), f);
}

MatrixField cov_deriv_y1(const FiberConnection& A, const MatrixField& f) {
    return deriv_y1(f) + commutator(A.a1, f);
}

MatrixField cov_deriv_y2(const FiberConnection& A, const MatrixField& f) {
    return deriv_y2(f) + commutator(A.a2, f);
}

FiberConnection apply_complex_gauge(const MatrixField& sigma, const FiberConnection& A,
                                    double cond_guard) {
    const MatrixField si = sigma.inverse(cond_guard);
    const MatrixField ss = sigma.adjoint();
    const MatrixField ssi = si.adjoint(); // (sigma^*)^{-1}

    const MatrixField az = conn_az(A);
    const MatrixField azbar = conn_azbar(A);

    // B^{0,1} = sigma A^{0,1} sigma^{-1} - (dbar sigma) sigma^{-1}
    MatrixField bzbar = sigma * azbar * si - deriv_zbar(sigma) * si;
    // B^{1,0} = sigma^{*-1} A^{1,0} sigma^* + sigma^{*-1} (del sigma^*)
    MatrixField bz = ssi * az * ss + ssi * deriv_z(ss);

    return conn_from_complex(bz, bzbar);
}

FiberConnection apply_hermitian_gauge(const MatrixField& s, const FiberConnection& A0) {
    const MatrixField ds_z = cov_deriv_z(A0, s);
    const MatrixField ds_zbar = cov_deriv_zbar(A0, s);
    MatrixField ms = s;
    ms *= -1.0;
    const MatrixField dz_part = upsilon(ms, ds_z);
    MatrixField dzbar_part = upsilon(s, ds_zbar);
    dzbar_part *= -1.0;
    FiberConnection delta = conn_from_complex(dz_part, dzbar_part);
    return {A0.a1 + delta.a1, A0.a2 + delta.a2};
}

CurvatureField curvature(const FiberConnection& A) {
    MatrixField F = curl_y(A.a1, A.a2) + commutator(A.a1, A.a2);
    MatrixField lam = F;
    lam *= complexd(0.0, -1.0);
    return {std::move(F), std::move(lam)};
}

double ym_energy(const FiberConnection& A) {
    const double f = l2_norm(curvature(A).F);
    return f * f;
}

double l21_norm(const MatrixField& f, const FiberConnection& bg) {
    const double l2 = l2_norm(f);
    const double g1 = l2_norm(cov_deriv_y1(bg, f));
    const double g2 = l2_norm(cov_deriv_y2(bg, f));
    return std::sqrt(l2 * l2 + g1 * g1 + g2 * g2);
}

double conn_l2_dist(const FiberConnection& A, const FiberConnection& B) {
    const double d1 = l2_norm(A.a1 - B.a1);
    const double d2 = l2_norm(A.a2 - B.a2);
    return std::sqrt(d1 * d1 + d2 * d2);
}

double conn_l21_dist(const FiberConnection& A, const FiberConnection& B,
                     const FiberConnection& bg) {
    double acc = 0.0;
    for (int k = 0; k < 2; ++k) {
        const MatrixField d = (k == 0) ? A.a1 - B.a1 : A.a2 - B.a2;
        const double l2 = l2_norm(d);
        const double g1 = l2_norm(cov_deriv_y1(bg, d));
        const double g2 = l2_norm(cov_deriv_y2(bg, d));
        acc += l2 * l2 + g1 * g1 + g2 * g2;
    }
    return std::sqrt(acc);
}

MatrixField laplace_g0(const MatrixField& f) {
    MatrixField out = deriv_z(deriv_zbar(f));
    out *= 2.0 * f.grid().tau.imag();
    return out;
}

double curvature_identity_residual(const MatrixField& s, const FiberConnection& A) {
    const double flat = l2_norm(curvature(A).F);
    if (flat > 1e-8)
        throw NotFlat("curvature_identity_residual: base connection has |F| = " +
                      std::to_string(flat));

    MatrixField two_s = s;
    two_s *= 2.0;
    const MatrixField P = herm_exp(two_s);
    MatrixField minus_s = s;
    minus_s *= -1.0;
    const MatrixField em = herm_exp(minus_s);

    const MatrixField dP = cov_deriv_z(A, P);
    const MatrixField X = em * dP; // e^{-s} del_A e^{2s}, dz coefficient

    const FiberConnection As = apply_hermitian_gauge(s, A);
    const CurvatureField Fs = curvature(As);

    // scalar fields as rank-1 MatrixFields
    const int N = s.N(), n = s.rank();
    FiberGrid g = s.grid();
    MatrixField trP(g, 1);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            complexd tr{};
            const complexd* p = P.at(i, j);
            for (int r = 0; r < n; ++r) tr += p[r * n + r];
            *trP.at(i, j) = tr;
        }
    const MatrixField lapTrP = laplace_g0(trP);

    const double two_q = 2.0 * g.tau.imag();
    double worst = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double x2 = 0.0;
            const complexd* px = X.at(i, j);
            for (int e = 0; e < n * n; ++e) x2 += std::norm(px[e]);
            const complexd lhs = -(*lapTrP.at(i, j)) + two_q * x2;

            const complexd* pp = P.at(i, j);
            const complexd* pf = Fs.lambda_F.at(i, j);
            complexd rhs{};
            for (int r = 0; r < n; ++r)
                for (int k = 0; k < n; ++k) rhs += pp[r * n + k] * pf[k * n + r];
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    return worst;
}

complexd degree_diagnostic(const FiberConnection& A) {
    const CurvatureField C = curvature(A);
    const int N = A.grid().N, n = A.rank();
    complexd acc{};
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const complexd* p = C.F.at(i, j);
            for (int r = 0; r < n; ++r) acc += p[r * n + r];
        }
    return complexd(0.0, 1.0) * acc / (static_cast<double>(N) * N);
}

} // namespace hymlab
