#include "semiflat.hpp"

#include <cmath>

namespace hymlab {

namespace {

Eigen::Matrix4d wedge(int a, int b, double c) {
    Eigen::Matrix4d w = Eigen::Matrix4d::Zero();
    w(a, b) = c;
    w(b, a) = -c;
    return w;
}

} // namespace

Eigen::Matrix4d base_form() { return wedge(0, 1, 1.0); }

Eigen::Matrix4d semiflat_form() {
    return wedge(0, 1, 1.0) + wedge(2, 3, -1.0);
}

SemiFlatTriple triple_at(const HessianPotential& phi, const BasePoint& b, double s) {
    if (s <= 0.0) throw NonpositiveScale("triple_at: s must be > 0");
    phi.require_inside(b);
    const Hess2 H = phi.hess(b.x1, b.x2);
    const double p[2][2] = {{H.h11, H.h12}, {H.h12, H.h22}};

    SemiFlatTriple T;
    T.s = s;

    T.omega_I = wedge(0, 1, 1.0 / s) + wedge(2, 3, -s);

    T.omega_J = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            T.omega_J += wedge(i, 2 + j, p[i][j]);

    T.omega_K = wedge(0, 3, -1.0) + wedge(1, 2, 1.0);

    T.g = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            T.g(i, j) = p[i][j] / s;
            T.g(2 + i, 2 + j) = p[i][j] * s;
        }

    // columns are images of the frame vectors
    T.I = Eigen::Matrix4d::Zero();
    for (int k = 0; k < 2; ++k) {
        T.I(0, k) = -p[k][1];
        T.I(1, k) = p[k][0];
        T.I(2, 2 + k) = p[k][1];
        T.I(3, 2 + k) = -p[k][0];
    }

    T.J = Eigen::Matrix4d::Zero();
    for (int k = 0; k < 2; ++k) {
        T.J(2 + k, k) = 1.0 / s;
        T.J(k, 2 + k) = -s;
    }

    T.K = T.I * T.J;
    return T;
}

double closedness_residual(const HessianPotential& phi, double s, double h) {
    if (s <= 0.0) throw NonpositiveScale("closedness_residual: s must be > 0");
    const Domain& d = phi.domain();
    const int n1 = static_cast<int>(std::floor((d.x1_max - d.x1_min) / h)) - 1;
    const int n2 = static_cast<int>(std::floor((d.x2_max - d.x2_min) / h)) - 1;
    if (n1 < 3 || n2 < 3)
        throw StepTooLarge("closedness_residual: step too large for domain");

    auto forms_at = [&](double x1, double x2) {
        const SemiFlatTriple T = triple_at(phi, {x1, x2}, s);
        return std::array<Eigen::Matrix4d, 3>{T.omega_I, T.omega_J, T.omega_K};
    };

    double worst = 0.0;
    for (int i = 1; i <= n1; ++i) {
        for (int j = 1; j <= n2; ++j) {
            const double x1 = d.x1_min + i * h;
            const double x2 = d.x2_min + j * h;
            const auto fp1 = forms_at(x1 + h, x2), fm1 = forms_at(x1 - h, x2);
            const auto fp2 = forms_at(x1, x2 + h), fm2 = forms_at(x1, x2 - h);
            for (int f = 0; f < 3; ++f) {
                // d omega_{mu nu rho} = d_mu w_{nu rho} - d_nu w_{mu rho} + d_rho w_{mu nu};
                // coefficients depend on x only, so d_mu vanishes for mu >= 2.
                Eigen::Matrix4d dw[4];
                dw[0] = (fp1[f] - fm1[f]) / (2.0 * h);
                dw[1] = (fp2[f] - fm2[f]) / (2.0 * h);
                dw[2].setZero();
                dw[3].setZero();
                for (int mu = 0; mu < 4; ++mu)
                    for (int nu = mu + 1; nu < 4; ++nu)
                        for (int rho = nu + 1; rho < 4; ++rho) {
                            const double c = dw[mu](nu, rho) - dw[nu](mu, rho) +
                                             dw[rho](mu, nu);
                            worst = std::max(worst, std::abs(c));
                        }
            }
        }
    }
    return worst;
}

Eigen::Matrix4d degeneration_form(const HessianPotential& phi, const BasePoint& b,
                                  const DegenerationParams& params) {
    if (params.relation_residual() > 1e-12)
        throw NonpositiveScale("degeneration_form: inconsistent (t, s) pair");
    const SemiFlatTriple T = triple_at(phi, b, params.s);
    return (1.0 + params.t) * params.s * T.omega_I;
}

Eigen::Vector4cd dz_frame(const HessianPotential& phi, const BasePoint& b,
                          double y1, double fd_step) {
    phi.require_inside(b);
    const Hess2 H = phi.hess(b.x1, b.x2);
    const complexd tau = tau_at(phi, b).tau;
    const complexd tp = dtau_dw(phi, b, fd_step);
    Eigen::Vector4cd dz;
    dz(0) = y1 * tp * complexd(1.0, H.h12);
    dz(1) = y1 * tp * complexd(0.0, H.h22);
    dz(2) = tau;
    dz(3) = 1.0;
    return dz;
}

} // namespace hymlab
