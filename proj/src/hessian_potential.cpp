#include "hessian_potential.hpp"

#include <cmath>

namespace hymlab {

void HessianPotential::require_inside(const BasePoint& b) const {
    if (!domain().contains(b.x1, b.x2))
        throw DomainError(name() + ": point (" + std::to_string(b.x1) + ", " +
                          std::to_string(b.x2) + ") outside chart domain");
}

// ---- QuadraticPotential -----------------------------------------------------

QuadraticPotential::QuadraticPotential(double m11, double m12, double m22,
                                       Domain dom, std::string label)
    : m11_(m11), m12_(m12), m22_(m22), dom_(dom), label_(std::move(label)) {
    if (m22 <= 0.0 || m11 * m22 - m12 * m12 <= 0.0)
        throw DegenerateHessian(label_ + ": Hessian not positive definite");
}

double QuadraticPotential::eval(double x1, double x2) const {
    return 0.5 * (m11_ * x1 * x1 + 2.0 * m12_ * x1 * x2 + m22_ * x2 * x2);
}

std::array<double, 2> QuadraticPotential::grad(double x1, double x2) const {
    return {m11_ * x1 + m12_ * x2, m12_ * x1 + m22_ * x2};
}

Hess2 QuadraticPotential::hess(double, double) const {
    return {m11_, m12_, m22_};
}

Third2 QuadraticPotential::third(double, double) const {
    return {0.0, 0.0, 0.0, 0.0};
}

// ---- TauLinearPotential -----------------------------------------------------

TauLinearPotential::TauLinearPotential(double eps, double half_width)
    : eps_(eps),
      dom_{-half_width, half_width, -half_width, half_width} {}

// Invert x2 = v - eps(u^2 - v^2)/2 for v at fixed u = x1.
std::array<double, 2> TauLinearPotential::uv(double x1, double x2) const {
    const double u = x1;
    double v = x2;
    for (int it = 0; it < 50; ++it) {
        const double g = v - 0.5 * eps_ * (u * u - v * v) - x2;
        const double dg = 1.0 + eps_ * v;
        const double step = g / dg;
        v -= step;
        if (std::abs(step) < 1e-15) break;
    }
    return {u, v};
}

complexd TauLinearPotential::w_of(double x1, double x2) const {
    auto [u, v] = uv(x1, x2);
    return {u, v};
}

double TauLinearPotential::eval(double x1, double x2) const {
    auto [u, v] = uv(x1, x2);
    return 0.5 * u * u + 0.5 * v * v + eps_ * v * v * v / 3.0;
}

std::array<double, 2> TauLinearPotential::grad(double x1, double x2) const {
    auto [u, v] = uv(x1, x2);
    return {u * (1.0 + eps_ * v), v};
}

Hess2 TauLinearPotential::hess(double x1, double x2) const {
    auto [u, v] = uv(x1, x2);
    const double p = 1.0 + eps_ * v;
    return {p + eps_ * eps_ * u * u / p, eps_ * u / p, 1.0 / p};
}

Third2 TauLinearPotential::third(double x1, double x2) const {
    auto [u, v] = uv(x1, x2);
    const double p = 1.0 + eps_ * v;
    const double e2 = eps_ * eps_;
    return {3.0 * e2 * u / p - e2 * e2 * u * u * u / (p * p * p),
            eps_ / p - eps_ * e2 * u * u / (p * p * p),
            -e2 * u / (p * p * p),
            -eps_ / (p * p * p)};
}

std::shared_ptr<const HessianPotential>
make_potential(const std::string& name, double param) {
    const Domain unit{-2.5, 2.5, -2.5, 2.5};
    if (name == "identity")
        return std::make_shared<QuadraticPotential>(1.0, 0.0, 1.0, unit, "identity");
    if (name == "diagonal") {
        const double a = (param > 0.0) ? param : 2.0;
        return std::make_shared<QuadraticPotential>(a, 0.0, 1.0 / a, unit, "diagonal");
    }
    if (name == "tau_linear")
        return std::make_shared<TauLinearPotential>(param > 0.0 ? param : 0.1);
    throw ConfigError("unknown potential '" + name + "'");
}

// ---- operations ------------------------------------------------------------

FiberModulus tau_at(const HessianPotential& phi, const BasePoint& b) {
    phi.require_inside(b);
    const Hess2 H = phi.hess(b.x1, b.x2);
    if (H.h22 <= 0.0)
        throw DegenerateHessian(phi.name() + ": phi_22 <= 0");
    if (std::abs(H.det() - 1.0) > phi.ma_tolerance())
        throw DegenerateHessian(phi.name() + ": |det(hess) - 1| = " +
                                std::to_string(std::abs(H.det() - 1.0)) +
                                " exceeds tolerance");
    return {complexd(H.h12, 1.0) / H.h22};
}

std::pair<complexd, complexd>
holomorphic_coords(const HessianPotential& phi, const BasePoint& b) {
    phi.require_inside(b);
    const auto g = phi.grad(b.x1, b.x2);
    return {complexd(b.x1, g[1]), complexd(-b.x2, g[0])};
}

double cr_residual(const HessianPotential& phi,
                   const std::function<complexd(double, double)>& f,
                   double h) {
    const Domain& d = phi.domain();
    const int n1 = static_cast<int>(std::floor((d.x1_max - d.x1_min) / h)) - 1;
    const int n2 = static_cast<int>(std::floor((d.x2_max - d.x2_min) / h)) - 1;
    if (n1 < 3 || n2 < 3)
        throw StepTooLarge("cr_residual: fewer than 3 interior grid points at h = " +
                           std::to_string(h));
    double worst = 0.0;
    for (int i = 1; i <= n1; ++i) {
        for (int j = 1; j <= n2; ++j) {
            const double x1 = d.x1_min + i * h;
            const double x2 = d.x2_min + j * h;
            const complexd tau = tau_at(phi, {x1, x2}).tau;
            const complexd d1 = (f(x1 + h, x2) - f(x1 - h, x2)) / (2.0 * h);
            const complexd d2 = (f(x1, x2 + h) - f(x1, x2 - h)) / (2.0 * h);
            worst = std::max(worst, std::abs(0.5 * (d1 - std::conj(tau) * d2)));
        }
    }
    return worst;
}

complexd dtau_dw(const HessianPotential& phi, const BasePoint& b, double h) {
    const complexd tau = tau_at(phi, b).tau;
    const complexd t1 = (tau_at(phi, {b.x1 + h, b.x2}).tau -
                         tau_at(phi, {b.x1 - h, b.x2}).tau) / (2.0 * h);
    const complexd t2 = (tau_at(phi, {b.x1, b.x2 + h}).tau -
                         tau_at(phi, {b.x1, b.x2 - h}).tau) / (2.0 * h);
    return 0.5 * (t1 - tau * t2);
}

double monge_ampere_residual(const HessianPotential& phi, const BasePoint& b) {
    phi.require_inside(b);
    return std::abs(phi.hess(b.x1, b.x2).det() - 1.0);
}

} // namespace hymlab
