// hessian_potential.hpp -- Hessian potentials on an affine base chart.
//
// A potential phi(x1,x2) with det(Hess phi) = 1 seeds all base geometry:
//   tau  = (phi_12 + i)/phi_22          (fiber modulus, Im tau = 1/phi_22 > 0)
//   w    = x1 + i phi_2,  xi = -x2 + i phi_1   (holomorphic chart coordinates)
// Conventions follow the chart basis (dx1, dx2); derivatives are analytic
// for every built-in potential (the tau-linear one is exact in (u,v) with a
// scalar Newton inversion of the chart map).

#pragma once

#include "errors.hpp"

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <string>

namespace hymlab {

using complexd = std::complex<double>;

struct Domain {
    double x1_min, x1_max, x2_min, x2_max;
    bool contains(double x1, double x2) const {
        return x1 >= x1_min && x1 <= x1_max && x2 >= x2_min && x2 <= x2_max;
    }
};

struct BasePoint {
    double x1 = 0.0, x2 = 0.0;
};

struct FiberModulus {
    complexd tau;
};

// Symmetric 2x2 Hessian, entries phi_{ij}.
struct Hess2 {
    double h11, h12, h22;
    double det() const { return h11 * h22 - h12 * h12; }
};

// Symmetric third-derivative array phi_{ijk}; four independent entries.
struct Third2 {
    double d111, d112, d122, d222;
    double operator()(int i, int j, int k) const {
        const int s = i + j + k; // indices are 1-based
        switch (s) {
            case 3: return d111;
            case 4: return d112;
            case 5: return d122;
            default: return d222;
        }
    }
};

class HessianPotential {
  public:
    virtual ~HessianPotential() = default;

    virtual double eval(double x1, double x2) const = 0;
    virtual std::array<double, 2> grad(double x1, double x2) const = 0;
    virtual Hess2 hess(double x1, double x2) const = 0;
    virtual Third2 third(double x1, double x2) const = 0;

    virtual const Domain& domain() const = 0;
    virtual std::string name() const = 0;

    // Monge-Ampere gate used by tau_at; tighter for analytic potentials.
    virtual double ma_tolerance() const { return 1e-8; }

    void require_inside(const BasePoint& b) const;
};

// phi = x M x / 2 for constant SPD M with det 1 (covers the identity and
// diagonal (a, 1/a) families).
class QuadraticPotential final : public HessianPotential {
  public:
    QuadraticPotential(double m11, double m12, double m22, Domain dom,
                       std::string label);

    double eval(double x1, double x2) const override;
    std::array<double, 2> grad(double x1, double x2) const override;
    Hess2 hess(double x1, double x2) const override;
    Third2 third(double x1, double x2) const override;
    const Domain& domain() const override { return dom_; }
    std::string name() const override { return label_; }

  private:
    double m11_, m12_, m22_;
    Domain dom_;
    std::string label_;
};

// Nonconstant potential with holomorphic modulus tau(w) = i + eps*w.
// Chart map (u,v) -> (x1,x2) = (u, v - eps(u^2 - v^2)/2) is inverted by a
// scalar Newton iteration; phi = u^2/2 + v^2/2 + eps v^3/3 and all
// derivatives are exact in (u,v).  det Hess = 1 identically.
class TauLinearPotential final : public HessianPotential {
  public:
    explicit TauLinearPotential(double eps = 0.1, double chart_half_width = 0.3);

    double eval(double x1, double x2) const override;
    std::array<double, 2> grad(double x1, double x2) const override;
    Hess2 hess(double x1, double x2) const override;
    Third2 third(double x1, double x2) const override;
    const Domain& domain() const override { return dom_; }
    std::string name() const override { return "tau_linear"; }
    double ma_tolerance() const override { return 1e-5; }

    double eps() const { return eps_; }
    // w = u + iv at a chart point (exposed for oracles).
    complexd w_of(double x1, double x2) const;

  private:
    std::array<double, 2> uv(double x1, double x2) const;
    double eps_;
    Domain dom_;
};

std::shared_ptr<const HessianPotential>
make_potential(const std::string& name, double param = 0.0);

// ---- operations ------------------------------------------------------------

FiberModulus tau_at(const HessianPotential& phi, const BasePoint& b);

// (w, xi) at b.
std::pair<complexd, complexd>
holomorphic_coords(const HessianPotential& phi, const BasePoint& b);

// Max over interior h-grid points of |(0,1)-derivative of f| where
// d/dwbar = (1/2)(d/dx1 - conj(tau) d/dx2), central differences.
double cr_residual(const HessianPotential& phi,
                   const std::function<complexd(double, double)>& f,
                   double h);

// dtau/dw at b via central differences in the chart and the chain rule
// d/dw = (1/2)(d/dx1 - tau d/dx2).
complexd dtau_dw(const HessianPotential& phi, const BasePoint& b,
                 double h = 1e-4);

double monge_ampere_residual(const HessianPotential& phi, const BasePoint& b);

} // namespace hymlab
