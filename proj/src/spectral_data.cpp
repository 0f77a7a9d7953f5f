#include "spectral_data.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace hymlab {

namespace {
constexpr double kPi = 3.14159265358979323846;

// reduce to [-1/2, 1/2)
double wrap_half(double t) { return t - std::floor(t + 0.5); }
} // namespace

std::pair<double, double> theta_decompose(complexd q, complexd tau) {
    const double th2 = -q.imag() / tau.imag();
    const double th1 = q.real() + tau.real() * th2;
    return {th1, th2};
}

SpectralData::SpectralData(std::vector<complexd> lifts, complexd tau,
                           LiftPolicy policy)
    : lifts_(std::move(lifts)), tau_(tau) {
    if (lifts_.empty()) throw ConfigError("SpectralData: empty lift list");
    if (tau_.imag() <= 0.0) throw ConfigError("SpectralData: Im(tau) <= 0");

    const int n = rank();
    theta1_.resize(n);
    theta2_.resize(n);
    for (int i = 0; i < n; ++i)
        std::tie(theta1_[i], theta2_[i]) = theta_decompose(lifts_[i], tau_);

    if (policy == LiftPolicy::ReduceAndBalance) {
        for (int i = 0; i < n; ++i) {
            theta1_[i] = wrap_half(theta1_[i]);
            theta2_[i] = wrap_half(theta2_[i]);
        }
        // the reduced sums must be integers if the input points sum to 0 on E
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            s1 += theta1_[i];
            s2 += theta2_[i];
        }
        const double k1 = std::round(s1), k2 = std::round(s2);
        if (std::abs(s1 - k1) > 1e-10 || std::abs(s2 - k2) > 1e-10)
            throw ConfigError("SpectralData: lifts do not sum to 0 on the fiber "
                              "(residual " + std::to_string(std::abs(s1 - k1)) +
                              ", " + std::to_string(std::abs(s2 - k2)) + ")");
        theta1_[0] -= k1;
        theta2_[0] -= k2;
        for (int i = 0; i < n; ++i)
            lifts_[i] = theta1_[i] - tau_ * theta2_[i];
    }
}

void SpectralData::set_linear_w(std::vector<complexd> coeffs,
                                std::shared_ptr<const HessianPotential> phi,
                                BasePoint b0) {
    if (static_cast<int>(coeffs.size()) != rank())
        throw ConfigError("SpectralData: w-coefficient count != rank");
    complexd sum{};
    for (const auto& c : coeffs) sum += c;
    if (std::abs(sum) > 1e-12)
        throw ConfigError("SpectralData: w-coefficients must sum to 0");
    wcoeffs_ = std::move(coeffs);
    phi_ = std::move(phi);
    b0_ = b0;
    w0_ = holomorphic_coords(*phi_, b0_).first;
    constant_ = false;
    custom_ = nullptr;
}

void SpectralData::set_custom(std::function<std::vector<complexd>(const BasePoint&)> fn) {
    custom_ = std::move(fn);
    constant_ = false;
}

complexd SpectralData::lift_sum() const {
    complexd s{};
    for (const auto& q : lifts_) s += q;
    return s;
}

double SpectralData::min_gap() const {
    const int n = rank();
    if (n == 1) return std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const complexd d = lifts_[i] - lifts_[j];
            for (int a = -1; a <= 1; ++a)
                for (int b = -1; b <= 1; ++b)
                    gap = std::min(gap, std::abs(d - static_cast<double>(a) -
                                                 tau_ * static_cast<double>(b)));
        }
    return gap;
}

void SpectralData::require_distinct(double gap_tol) const {
    if (min_gap() <= gap_tol)
        throw NonDistinctPoints("spectral points not distinct (min gap " +
                                std::to_string(min_gap()) + ")");
}

std::vector<complexd> SpectralData::lifts_at(const BasePoint& b) const {
    if (constant_) return lifts_;
    if (custom_) return custom_(b);
    const complexd w = holomorphic_coords(*phi_, b).first;
    std::vector<complexd> out = lifts_;
    for (int i = 0; i < rank(); ++i) out[i] += wcoeffs_[i] * (w - w0_);
    return out;
}

void SpectralData::theta_at(const HessianPotential& phi, const BasePoint& b,
                            std::vector<double>& th1, std::vector<double>& th2) const {
    if (!constant_ && !custom_ && !wcoeffs_.empty() && !phi_)
        throw SectionNotDifferentiable("section has no evaluable base dependence");
    const complexd tau = tau_at(phi, b).tau;
    const auto q = lifts_at(b);
    th1.resize(rank());
    th2.resize(rank());
    for (int i = 0; i < rank(); ++i)
        std::tie(th1[i], th2[i]) = theta_decompose(q[i], tau);
}

// ---- operations ----------------------------------------------------------------

FiberConnection reference_connection(const SpectralData& sd, const FiberGrid& grid,
                                     bool allow_degenerate) {
    grid.validate();
    if (std::abs(grid.tau - sd.tau()) > 1e-12)
        throw ConfigError("reference_connection: grid tau does not match spectral data");
    if (!allow_degenerate && sd.rank() > 1) sd.require_distinct();

    const int n = sd.rank();
    Eigen::MatrixXcd m1 = Eigen::MatrixXcd::Zero(n, n);
    Eigen::MatrixXcd m2 = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        m1(i, i) = complexd(0.0, 2.0 * kPi * sd.theta1()[i]);
        m2(i, i) = complexd(0.0, 2.0 * kPi * sd.theta2()[i]);
    }
    return {MatrixField::constant(grid, m1), MatrixField::constant(grid, m2)};
}

namespace {

// Fourier interpolation of one connection component along a cycle: the field
// is reduced to 1-d mode sums at the fixed transverse coordinate.
class CycleSampler {
  public:
    CycleSampler(const MatrixField& comp, Cycle cycle, double other) {
        const MatrixField modes = to_modes(comp);
        const int N = comp.N(), n = comp.rank();
        n_ = n;
        N_ = N;
        rows_.assign(static_cast<size_t>(N) * n * n, complexd{});
        for (int k1 = 0; k1 < N; ++k1)
            for (int k2 = 0; k2 < N; ++k2) {
                const complexd* p = modes.at(k1, k2);
                int kl, kt; // kl: along the cycle, kt: transverse
                if (cycle == Cycle::y1) { kl = k1; kt = k2; }
                else { kl = k2; kt = k1; }
                const complexd ph =
                    std::exp(complexd(0.0, 2.0 * kPi * mode_of(kt, N) * other));
                complexd* row = rows_.data() + static_cast<size_t>(kl) * n * n;
                for (int e = 0; e < n * n; ++e) row[e] += p[e] * ph;
            }
    }

    Eigen::MatrixXcd at(double t) const {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n_, n_);
        for (int kl = 0; kl < N_; ++kl) {
            const complexd ph =
                std::exp(complexd(0.0, 2.0 * kPi * mode_of(kl, N_) * t));
            const complexd* row = rows_.data() + static_cast<size_t>(kl) * n_ * n_;
            for (int r = 0; r < n_; ++r)
                for (int c = 0; c < n_; ++c) m(r, c) += row[r * n_ + c] * ph;
        }
        return m;
    }

  private:
    int n_ = 0, N_ = 0;
    std::vector<complexd> rows_;
};

} // namespace

Eigen::MatrixXcd holonomy(const FiberConnection& conn, Cycle cycle,
                          double other_coord, int steps) {
    const MatrixField& comp = (cycle == Cycle::y1) ? conn.a1 : conn.a2;
    CycleSampler sampler(comp, cycle, other_coord);
    const int n = conn.rank();
    Eigen::MatrixXcd T = Eigen::MatrixXcd::Identity(n, n);
    const double h = 1.0 / steps;
    const double c1 = 0.5 - std::sqrt(3.0) / 6.0;
    const double c2 = 0.5 + std::sqrt(3.0) / 6.0;
    // parallel transport of d + A: T' = -A T; the holonomy is T(1)^{-1},
    // i.e. the reverse-ordered exponential of +A.  This matches both the
    // e^{2 pi i theta} values on diagonal connections and conjugation
    // covariance under periodic gauge transformations.
    for (int k = 0; k < steps; ++k) {
        const double t = k * h;
        const Eigen::MatrixXcd M1 = -sampler.at(t + c1 * h);
        const Eigen::MatrixXcd M2 = -sampler.at(t + c2 * h);
        Eigen::MatrixXcd omega =
            0.5 * h * (M1 + M2) +
            (std::sqrt(3.0) / 12.0) * h * h * (M2 * M1 - M1 * M2);
        T = omega.exp() * T;
    }
    return T.inverse();
}

MatrixField lift_equivalence_gauge(const SpectralData& sd, const FiberGrid& grid,
                                   const std::vector<std::pair<int, int>>& shifts) {
    const int n = sd.rank();
    if (static_cast<int>(shifts.size()) != n)
        throw NonIntegerShift("lift_equivalence_gauge: need one shift pair per point");
    long sa = 0, sb = 0;
    for (const auto& [a, b] : shifts) {
        sa += a;
        sb += b;
    }
    // rank 1 carries no trace-free constraint
    if (n > 1 && (sa != 0 || sb != 0))
        throw NonIntegerShift("lift_equivalence_gauge: shifts must sum to 0 to "
                              "preserve trace-freeness");
    MatrixField u(grid, n);
    const int N = grid.N;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double y1 = static_cast<double>(i) / N;
            const double y2 = static_cast<double>(j) / N;
            complexd* p = u.at(i, j);
            for (int r = 0; r < n; ++r)
                p[r * n + r] = std::exp(complexd(
                    0.0, 2.0 * kPi * (shifts[r].first * y1 + shifts[r].second * y2)));
        }
    return u;
}

std::array<Eigen::MatrixXcd, 4> section_theta_derivatives(
    const HessianPotential& phi, const BasePoint& b, const SpectralData& sd,
    double h) {
    const int n = sd.rank();
    std::vector<double> p1, p2, m1, m2;
    std::array<Eigen::MatrixXcd, 4> Theta; // (i,j) -> Theta[2*i + j], i,j in {0,1}
    for (auto& m : Theta) m = Eigen::MatrixXcd::Zero(n, n);

    // d theta_j / d x^1
    sd.theta_at(phi, {b.x1 + h, b.x2}, p1, p2);
    sd.theta_at(phi, {b.x1 - h, b.x2}, m1, m2);
    for (int k = 0; k < n; ++k) {
        Theta[0](k, k) = (p1[k] - m1[k]) / (2.0 * h);
        Theta[1](k, k) = (p2[k] - m2[k]) / (2.0 * h);
    }
    // d theta_j / d x^2
    sd.theta_at(phi, {b.x1, b.x2 + h}, p1, p2);
    sd.theta_at(phi, {b.x1, b.x2 - h}, m1, m2);
    for (int k = 0; k < n; ++k) {
        Theta[2](k, k) = (p1[k] - m1[k]) / (2.0 * h);
        Theta[3](k, k) = (p2[k] - m2[k]) / (2.0 * h);
    }
    return Theta;
}

TripleResidual hym_residual_triple(const HessianPotential& phi, const BasePoint& b,
                                   const SpectralData& sd, double s, double h) {
    const auto Theta = section_theta_derivatives(phi, b, sd, h);
    const SemiFlatTriple T = triple_at(phi, b, s);
    const int n = sd.rank();

    // F = 2 pi i Theta_{ij} dx^i ^ dy^j as matrix-valued antisymmetric coefficients
    // on the frame (dx1, dx2, dy1, dy2); F[a][b] with a < b.
    std::array<std::array<Eigen::MatrixXcd, 4>, 4> F;
    for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 4; ++c) F[a][c] = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const Eigen::MatrixXcd coef = complexd(0.0, 2.0 * kPi) * Theta[2 * i + j];
            F[i][2 + j] += coef;
            F[2 + j][i] -= coef;
        }

    auto wedge_top = [&](const Eigen::Matrix4d& W) {
        Eigen::MatrixXcd top = Eigen::MatrixXcd::Zero(n, n);
        // index pairs (a,b), complements (e,f), signature of (a,b,e,f)
        static const int pair[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        static const int comp[6][2] = {{2, 3}, {1, 3}, {1, 2}, {0, 3}, {0, 2}, {0, 1}};
        static const int sign[6] = {1, -1, 1, 1, -1, 1};
        for (int k = 0; k < 6; ++k) {
            const int a = pair[k][0], c = pair[k][1];
            const int e = comp[k][0], f = comp[k][1];
            top += sign[k] * F[a][c] * W(e, f);
        }
        return top;
    };

    auto fro = [](const Eigen::MatrixXcd& m) { return m.norm(); };
    return {fro(wedge_top(T.omega_I)), fro(wedge_top(T.omega_J)),
            fro(wedge_top(T.omega_K))};
}

} // namespace hymlab
