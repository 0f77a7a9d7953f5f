#include "flows.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hymlab {

namespace {
constexpr double kPi = 3.14159265358979323846;

complexd dzbar_symbol(complexd tau, int m, int nh) {
    return kPi * (tau * static_cast<double>(nh) - static_cast<double>(m)) /
           tau.imag();
}
} // namespace

// ---- Poincare constant -----------------------------------------------------------

PoincareEstimate poincare_constant(const SpectralData& sd, const FiberGrid& grid) {
    grid.validate();
    if (std::abs(grid.tau - sd.tau()) > 1e-12)
        throw ConfigError("poincare_constant: grid tau does not match spectral data");
    if (sd.rank() > 1) sd.require_distinct();

    const int n = sd.rank(), N = grid.N;
    const double q = grid.tau.imag();
    const auto& lifts = sd.lifts();

    double best = std::numeric_limits<double>::infinity();
    PoincareEstimate est{};
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const complexd qjk = lifts[j] - lifts[k];
            for (int b1 = 0; b1 < N; ++b1)
                for (int b2 = 0; b2 < N; ++b2) {
                    const int m = mode_of(b1, N), nh = mode_of(b2, N);
                    if (j == k && m == 0 && nh == 0) continue; // Herm_0^perp
                    const double mag =
                        std::abs(dzbar_symbol(grid.tau, m, nh) - kPi * qjk / q);
                    if (mag < best) {
                        best = mag;
                        est.entry_j = j;
                        est.entry_k = k;
                        est.mode_m = m;
                        est.mode_n = nh;
                    }
                }
        }
    est.lambda_min = best * dzbar_norm_factor(grid);
    if (est.lambda_min < 1e-12)
        throw DegenerateSpectralGap(
            "dbar_{A0} has (near-)kernel on Herm_0^perp: q_jk in the period lattice");
    est.c_p = 1.0 / est.lambda_min;
    return est;
}

// ---- Hermitian recovery ------------------------------------------------------------

namespace {

// Herm_0^perp projection, optionally in the (constant) u-frame.
MatrixField project_slice(const MatrixField& d, const Eigen::MatrixXcd* u) {
    if (!u) return project_herm_perp(traceless(hermitize(d)));
    const Eigen::MatrixXcd uu = *u;
    MatrixField conj_d(d.grid(), d.rank());
    for (int i = 0; i < d.N(); ++i)
        for (int j = 0; j < d.N(); ++j)
            conj_d.set_matrix(i, j, uu * d.matrix_at(i, j) * uu.adjoint());
    conj_d = project_herm_perp(traceless(hermitize(conj_d)));
    MatrixField out(d.grid(), d.rank());
    for (int i = 0; i < d.N(); ++i)
        for (int j = 0; j < d.N(); ++j)
            out.set_matrix(i, j, uu.adjoint() * conj_d.matrix_at(i, j) * uu);
    return out;
}

} // namespace

RecoverResult recover_hermitian(const FiberConnection& A, const FiberConnection& A_ref,
                                const SpectralData& sd,
                                const Eigen::MatrixXcd* frame_u,
                                const RecoverOptions& opts) {
    const FiberGrid& grid = A.grid();
    const int n = A.rank(), N = grid.N;
    const double q = grid.tau.imag();
    const auto& lifts = sd.lifts();

    const double dist0 = conn_l2_dist(A, A_ref);
    double delta0;
    if (opts.delta0) {
        delta0 = *opts.delta0;
    } else {
        delta0 = 0.25 / poincare_constant(sd, grid).c_p;
    }
    if (dist0 >= delta0)
        throw OutsideNeighborhood("recover_hermitian: |A - A_ref| = " +
                                  std::to_string(dist0) + " >= delta0 = " +
                                  std::to_string(delta0));

    MatrixField s(grid, n);
    double rnorm = dist0;
    int iters = 0;
    for (; iters < opts.max_iters; ++iters) {
        const FiberConnection As = apply_hermitian_gauge(s, A_ref);
        const FiberConnection r{A.a1 - As.a1, A.a2 - As.a2};
        rnorm = conn_l2_dist(A, As);
        if (rnorm < opts.residual_tol) break;
        if (rnorm > 10.0 * std::max(dist0, 1e-14))
            throw OutsideNeighborhood("recover_hermitian: Newton diverged");

        const MatrixField rz = to_modes(conn_az(r));
        const MatrixField rzbar = to_modes(conn_azbar(r));
        MatrixField dhat(grid, n);
        for (int b1 = 0; b1 < N; ++b1)
            for (int b2 = 0; b2 < N; ++b2) {
                const int m = mode_of(b1, N), nh = mode_of(b2, N);
                const complexd* pz = rz.at(b1, b2);
                const complexd* pzb = rzbar.at(b1, b2);
                complexd* pd = dhat.at(b1, b2);
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        const complexd qjk = lifts[j] - lifts[k];
                        const complexd sb =
                            dzbar_symbol(grid.tau, m, nh) - kPi * qjk / q;
                        const complexd sz = -std::conj(sb);
                        const double den = std::norm(sz) + std::norm(sb);
                        if (den < 1e-24) {
                            pd[j * n + k] = complexd{};
                            continue;
                        }
                        // least squares for L(d) = r over the (dz, dzbar) pair
                        pd[j * n + k] = (std::conj(sz) * pz[j * n + k] -
                                         std::conj(sb) * pzb[j * n + k]) / den;
                    }
            }
        MatrixField delta = project_slice(from_modes(dhat), frame_u);
        s += delta;
    }
    if (rnorm >= opts.residual_tol && rnorm >= 1e-9)
        throw OutsideNeighborhood("recover_hermitian: residual plateau at " +
                                  std::to_string(rnorm));
    RecoverResult res{std::move(s), 0.0, rnorm, iters, delta0};
    res.lambda0 = (dist0 > 0.0) ? l2_norm(res.s) / dist0 : 0.0;
    return res;
}

// ---- flows ------------------------------------------------------------------------

namespace {

MatrixField kn_moment(const CurvatureField& C) {
    MatrixField mu = C.F;
    mu *= complexd(0.0, 1.0);
    return mu;
}

// Fused evaluation of A = g_dagger A0, its curvature, and the stage
// derivative k = dealias(i F g) for constant diagonal A0 (the reference
// connections).  All hot state lives in plane-major layout (plane e
// contiguous), so the only transposes happen on diagnostics.
class KnKernel {
  public:
    explicit KnKernel(const FiberConnection& A0)
        : grid_(A0.grid()), n_(A0.rank()), tau_(A0.grid().tau), A0_(A0) {
        pts_ = static_cast<size_t>(grid_.N) * grid_.N;
        blk_ = n_ * n_;
        const MatrixField az = conn_az(A0);
        const MatrixField azb = conn_azbar(A0);
        az0_.resize(n_);
        azb0_.resize(n_);
        for (int r = 0; r < n_; ++r) {
            az0_[r] = az(0, 0, r, r);
            azb0_[r] = azb(0, 0, r, r);
        }
        fast_ = (n_ <= 8);
        for (int i = 0; i < grid_.N && fast_; ++i)
            for (int j = 0; j < grid_.N && fast_; ++j) {
                const complexd* pz = az.at(i, j);
                const complexd* pb = azb.at(i, j);
                for (int r = 0; r < n_ && fast_; ++r)
                    for (int c = 0; c < n_; ++c) {
                        const complexd ez = (r == c) ? az0_[r] : complexd{};
                        const complexd eb = (r == c) ? azb0_[r] : complexd{};
                        if (std::abs(pz[r * n_ + c] - ez) > 1e-13 ||
                            std::abs(pb[r * n_ + c] - eb) > 1e-13) {
                            fast_ = false;
                            break;
                        }
                    }
            }
        const size_t sz = pts_ * blk_;
        a1_.resize(sz);
        a2_.resize(sz);
        F_.resize(sz);
        t1_.resize(2 * sz);
        t2_.resize(2 * sz);
    }

    bool fast() const { return fast_; }
    const FiberGrid& grid() const { return grid_; }
    size_t state_size() const { return pts_ * blk_; }

    std::vector<complexd> pack(const MatrixField& f) const {
        std::vector<complexd> out(pts_ * blk_);
        plane_pack(f, out.data());
        return out;
    }
    MatrixField unpack(const std::vector<complexd>& planes) const {
        MatrixField out;
        plane_unpack(grid_, n_, planes.data(), out);
        return out;
    }

    FiberConnection connection() const {
        MatrixField m1, m2;
        plane_unpack(grid_, n_, a1_.data(), m1);
        plane_unpack(grid_, n_, a2_.data(), m2);
        return {std::move(m1), std::move(m2)};
    }
    MatrixField curvature_field() const {
        MatrixField f;
        plane_unpack(grid_, n_, F_.data(), f);
        return f;
    }
    double f_c0() const {
        double worst = 0.0;
        for (size_t i = 0; i < pts_; ++i) {
            double acc = 0.0;
            for (int e = 0; e < blk_; ++e) acc += std::norm(F_[e * pts_ + i]);
            worst = std::max(worst, acc);
        }
        return std::sqrt(worst);
    }

    void set_dealias_modes(int cut) { cut_ = cut; }

    // plane-major evaluation; energy = |F|_{L^2}^2
    void eval(const std::vector<complexd>& g, double* energy,
              std::vector<complexd>* k_out, bool do_dealias) {
        if (!fast_) {
            eval_generic(g, energy, k_out, do_dealias);
            return;
        }
        const int N = grid_.N, n = n_;
        const size_t pts = pts_;
        const int blk = blk_;

        // forward transform of g; then dbar(g) and del(g^*) mode arrays
        plane_fft(grid_, blk, -1, const_cast<complexd*>(g.data()), t1_.data());
        const auto& zb = spectral_table(grid_, SpectralSymbol::dzbar);
        const auto& zz = spectral_table(grid_, SpectralSymbol::dz);
        const double scale = 1.0 / static_cast<double>(pts);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const complexd* src = t1_.data() + (r * n + c) * pts;
                const complexd* srcT = t1_.data() + (c * n + r) * pts;
                complexd* d1 = t2_.data() + (r * n + c) * pts;
                complexd* d2 = t2_.data() + (blk + r * n + c) * pts;
                for (int k1 = 0; k1 < N; ++k1)
                    for (int k2 = 0; k2 < N; ++k2) {
                        const size_t k = static_cast<size_t>(k1) * N + k2;
                        const size_t kn = static_cast<size_t>((N - k1) % N) * N +
                                          (N - k2) % N;
                        d1[k] = zb[k] * src[k] * scale;
                        d2[k] = zz[k] * std::conj(srcT[kn]) * scale;
                    }
            }
        plane_fft(grid_, 2 * blk, 1, t2_.data(), t1_.data());
        const complexd* dbg = t1_.data();        // dbar g
        const complexd* dgs = t1_.data() + pts * blk; // del g^*

        // pointwise assembly of a1, a2
        const complexd tb = std::conj(tau_);
        complexd gp[64], gi[64], t[64], bz[64], bzb[64], gsi[64];
        for (size_t i = 0; i < pts; ++i) {
            for (int e = 0; e < blk; ++e) gp[e] = g[e * pts + i];
            invert_small(gp, gi, n);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c)
                    t[r * n + c] = gp[r * n + c] * azb0_[c] -
                                   dbg[(r * n + c) * pts + i];
            mul_small(t, gi, bzb, n);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    t[r * n + c] = az0_[r] * std::conj(gp[c * n + r]) +
                                   dgs[(r * n + c) * pts + i];
                    gsi[r * n + c] = std::conj(gi[c * n + r]);
                }
            mul_small(gsi, t, bz, n);
            for (int e = 0; e < blk; ++e) {
                a1_[e * pts + i] = tau_ * bz[e] + tb * bzb[e];
                a2_[e * pts + i] = bz[e] + bzb[e];
            }
        }

        // curl part of F in one combined transform
        std::copy(a1_.begin(), a1_.end(), t1_.begin());
        std::copy(a2_.begin(), a2_.end(), t1_.begin() + pts * blk);
        plane_fft(grid_, 2 * blk, -1, t1_.data(), t2_.data());
        const auto& d1t = spectral_table(grid_, SpectralSymbol::d1);
        const auto& d2t = spectral_table(grid_, SpectralSymbol::d2);
        for (int e = 0; e < blk; ++e) {
            const complexd* p1 = t2_.data() + e * pts;
            const complexd* p2 = t2_.data() + (blk + e) * pts;
            complexd* dst = t1_.data() + e * pts;
            for (size_t k = 0; k < pts; ++k)
                dst[k] = (d1t[k] * p2[k] - d2t[k] * p1[k]) * scale;
        }
        plane_fft(grid_, blk, 1, t1_.data(), F_.data());

        // commutator, energy, and the stage derivative
        double acc = 0.0;
        complexd aa[64], bb[64], comm[64], mu[64];
        for (size_t i = 0; i < pts; ++i) {
            for (int e = 0; e < blk; ++e) {
                aa[e] = a1_[e * pts + i];
                bb[e] = a2_[e * pts + i];
            }
            mul_small(aa, bb, comm, n);
            mul_small(bb, aa, t, n);
            for (int e = 0; e < blk; ++e) {
                const complexd f = F_[e * pts + i] + comm[e] - t[e];
                F_[e * pts + i] = f;
                acc += std::norm(f);
            }
            if (k_out) {
                for (int e = 0; e < blk; ++e) {
                    mu[e] = complexd(0.0, 1.0) * F_[e * pts + i];
                    gp[e] = g[e * pts + i];
                }
                mul_small(mu, gp, comm, n);
                for (int e = 0; e < blk; ++e) (*k_out)[e * pts + i] = comm[e];
            }
        }
        if (energy) *energy = acc / static_cast<double>(pts) * grid_.metric_area;

        if (k_out && do_dealias) {
            plane_fft(grid_, blk, -1, k_out->data(), t1_.data());
            const auto& mask = spectral_dealias_table(
                grid_, cut_ > 0 ? cut_ : grid_.N / 3);
            for (int e = 0; e < blk; ++e) {
                complexd* pk = t1_.data() + e * pts;
                for (size_t k = 0; k < pts; ++k) pk[k] *= mask[k] * scale;
            }
            plane_fft(grid_, blk, 1, t1_.data(), k_out->data());
        }
    }

  private:
    void eval_generic(const std::vector<complexd>& gplanes, double* energy,
                      std::vector<complexd>* k_out, bool do_dealias) {
        MatrixField g;
        plane_unpack(grid_, n_, gplanes.data(), g);
        FiberConnection A = apply_complex_gauge(g, A0_, 0.0);
        MatrixField F = curl_y(A.a1, A.a2) + commutator(A.a1, A.a2);
        if (energy) {
            const double f = l2_norm(F);
            *energy = f * f;
        }
        if (k_out) {
            MatrixField mu = F;
            mu *= complexd(0.0, 1.0);
            MatrixField k = mu * g;
            if (do_dealias) k = dealias_23(k);
            plane_pack(k, k_out->data());
        }
        plane_pack(A.a1, a1_.data());
        plane_pack(A.a2, a2_.data());
        plane_pack(F, F_.data());
    }

    static void mul_small(const complexd* a, const complexd* b, complexd* o, int n) {
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                complexd acc{};
                for (int k = 0; k < n; ++k) acc += a[r * n + k] * b[k * n + c];
                o[r * n + c] = acc;
            }
    }
    static void invert_small(const complexd* a, complexd* o, int n) {
        if (n == 1) {
            o[0] = 1.0 / a[0];
            return;
        }
        if (n == 2) {
            const complexd rdet = 1.0 / (a[0] * a[3] - a[1] * a[2]);
            o[0] = a[3] * rdet;
            o[1] = -a[1] * rdet;
            o[2] = -a[2] * rdet;
            o[3] = a[0] * rdet;
            return;
        }
        Eigen::MatrixXcd m(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) m(r, c) = a[r * n + c];
        const Eigen::MatrixXcd mi = m.partialPivLu().inverse();
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) o[r * n + c] = mi(r, c);
    }

    FiberGrid grid_;
    int n_;
    complexd tau_;
    FiberConnection A0_;
    size_t pts_ = 0;
    int blk_ = 0;
    int cut_ = 0;
    bool fast_ = false;
    std::vector<complexd> az0_, azb0_;
    std::vector<complexd> a1_, a2_, F_, t1_, t2_;
};

struct Diag {
    double energy, resid;
};

Diag diag_of(const CurvatureField& C) {
    const double f = l2_norm(C.F);
    return {f * f, f};
}

FlowRecord make_record(long step, double time, double dt, const Diag& d,
                       const FiberConnection& A, const FiberConnection* ref,
                       const MatrixField* g) {
    FlowRecord r{};
    r.step = step;
    r.time = time;
    r.dt = dt;
    r.ym_energy = d.energy;
    r.hym_residual = d.resid;
    if (ref) {
        r.dist_l2 = conn_l2_dist(A, *ref);
        r.dist_l21 = conn_l21_dist(A, *ref, *ref);
    }
    if (g) {
        MatrixField h = hermitize(g->adjoint() * (*g));
        MatrixField s = herm_log(h);
        s *= 0.5;
        r.c0_s = c0_norm(s);
    }
    return r;
}

} // namespace

FlowResult kempf_ness_flow(const MatrixField& g0, const FiberConnection& A0,
                           const FlowOptions& opts) {
    KnKernel ker(A0);
    if (opts.dealias_modes > 0) ker.set_dealias_modes(opts.dealias_modes);

    std::vector<complexd> g = ker.pack(g0);
    const size_t sz = ker.state_size();
    std::vector<complexd> k1(sz), k2(sz), k3(sz), k4(sz), kn(sz), g2(sz), gn(sz);
    double E = 0.0;
    ker.eval(g, &E, &k1, opts.dealias);
    Diag d{E, std::sqrt(E)};

    double dt = (opts.dt_init > 0.0) ? opts.dt_init
                                     : 0.5 / std::max(ker.f_c0(), 1e-12);
    double time = 0.0;
    long step = 0;

    FlowResult out;
    {
        const FiberConnection A = ker.connection();
        const MatrixField gm = ker.unpack(g);
        out.trajectory.push_back(make_record(0, 0.0, dt, d, A, &A0, &gm));
    }

    auto axpy = [sz](const std::vector<complexd>& x, double c,
                     const std::vector<complexd>& y, std::vector<complexd>& o) {
        for (size_t i = 0; i < sz; ++i) o[i] = x[i] + c * y[i];
    };

    while (d.resid >= opts.tol) {
        if (step >= opts.max_steps)
            throw MaxStepsExceeded("kempf_ness_flow: step limit at residual " +
                                   std::to_string(d.resid));
        if (time > opts.t_max)
            throw MaxStepsExceeded("kempf_ness_flow: t_max exceeded at residual " +
                                   std::to_string(d.resid));

        // k1 is cached from the accepted state
        axpy(g, 0.5 * dt, k1, g2);
        ker.eval(g2, nullptr, &k2, opts.dealias);
        axpy(g, 0.5 * dt, k2, g2);
        ker.eval(g2, nullptr, &k3, opts.dealias);
        axpy(g, dt, k3, g2);
        ker.eval(g2, nullptr, &k4, opts.dealias);

        for (size_t i = 0; i < sz; ++i)
            gn[i] = g[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        double En = 0.0;
        ker.eval(gn, &En, &kn, opts.dealias); // acceptance check + next k1

        if (En <= d.energy) {
            out.energy_monotone = out.energy_monotone && (En <= d.energy);
            std::swap(g, gn);
            std::swap(k1, kn);
            d = {En, std::sqrt(En)};
            time += dt;
            ++step;
            dt *= opts.dt_growth;
            if (opts.record_every > 0 && step % opts.record_every == 0) {
                const FiberConnection A = ker.connection();
                const MatrixField gm = ker.unpack(g);
                out.trajectory.push_back(make_record(step, time, dt, d, A, &A0, &gm));
            }
        } else {
            dt *= 0.5;
            if (dt < 1e-12)
                throw EnergyIncrease("kempf_ness_flow: dt underflow, energy "
                                     "cannot decrease further");
        }
    }

    ker.eval(g, &E, nullptr, false); // refresh terminal state
    d = {E, std::sqrt(E)};
    FiberConnection A = ker.connection();
    const MatrixField gm = ker.unpack(g);
    out.trajectory.push_back(make_record(step, time, dt, d, A, &A0, &gm));
    out.A = std::move(A);
    out.g = gm;
    out.steps = step;
    out.time = time;
    out.terminal_residual = d.resid;
    return out;
}

FlowResult kempf_ness_flow(const FiberConnection& A_init, const FiberConnection& A0,
                           const SpectralData& sd, const FlowOptions& opts) {
    const RecoverResult rec = recover_hermitian(A_init, A0, sd);
    return kempf_ness_flow(herm_exp(rec.s), A0, opts);
}

FlowResult ym_heat_flow(const FiberConnection& A_init, const FlowOptions& opts,
                        const FiberConnection* A_ref) {
    FiberConnection A = A_init;
    CurvatureField C = curvature(A);
    Diag d = diag_of(C);
    const complexd tau = A.grid().tau;

    double dt = (opts.dt_init > 0.0) ? opts.dt_init
                                     : 0.5 / std::max(c0_norm(C.F), 1e-12);
    double time = 0.0;
    long step = 0;

    FlowResult out;
    out.trajectory.push_back(make_record(0, 0.0, dt, d, A, A_ref, nullptr));

    // A' = del_A zeta - dbar_A zeta with zeta = i F (the heat flow -d*_A F_A)
    auto rhs = [&](const FiberConnection& As, const CurvatureField& Cs) {
        MatrixField zeta = kn_moment(Cs);
        MatrixField dz = cov_deriv_z(As, zeta);
        MatrixField dzb = cov_deriv_zbar(As, zeta);
        MatrixField b1 = tau * dz;
        b1 -= std::conj(tau) * dzb;
        MatrixField b2 = dz;
        b2 -= dzb;
        if (opts.dealias) {
            b1 = dealias_modes(b1, opts.dealias_modes);
            b2 = dealias_modes(b2, opts.dealias_modes);
        }
        return FiberConnection{std::move(b1), std::move(b2)};
    };
    auto axpy = [](FiberConnection a, double c, const FiberConnection& b) {
        a.a1 += complexd(c, 0.0) * b.a1;
        a.a2 += complexd(c, 0.0) * b.a2;
        return a;
    };

    while (d.resid >= opts.tol) {
        if (step >= opts.max_steps)
            throw MaxStepsExceeded("ym_heat_flow: step limit at residual " +
                                   std::to_string(d.resid));
        if (time > opts.t_max)
            throw MaxStepsExceeded("ym_heat_flow: t_max exceeded");

        FiberConnection k1 = rhs(A, C);
        FiberConnection A2 = axpy(A, 0.5 * dt, k1);
        FiberConnection k2 = rhs(A2, curvature(A2));
        FiberConnection A3 = axpy(A, 0.5 * dt, k2);
        FiberConnection k3 = rhs(A3, curvature(A3));
        FiberConnection A4 = axpy(A, dt, k3);
        FiberConnection k4 = rhs(A4, curvature(A4));

        FiberConnection An = axpy(A, dt / 6.0, k1);
        An = axpy(An, dt / 3.0, k2);
        An = axpy(An, dt / 3.0, k3);
        An = axpy(An, dt / 6.0, k4);

        CurvatureField Cn = curvature(An);
        const Diag dn = diag_of(Cn);
        if (dn.energy <= d.energy) {
            A = std::move(An);
            C = std::move(Cn);
            d = dn;
            time += dt;
            ++step;
            dt *= opts.dt_growth;
            if (opts.record_every > 0 && step % opts.record_every == 0)
                out.trajectory.push_back(
                    make_record(step, time, dt, d, A, A_ref, nullptr));
        } else {
            dt *= 0.5;
            if (dt < 1e-12)
                throw EnergyIncrease("ym_heat_flow: dt underflow");
        }
    }

    out.trajectory.push_back(make_record(step, time, dt, d, A, A_ref, nullptr));
    out.A = std::move(A);
    out.steps = step;
    out.time = time;
    out.terminal_residual = d.resid;
    return out;
}

// ---- holonomy alignment -------------------------------------------------------------

namespace {

double ang_dist(complexd a, complexd b) {
    return std::abs(std::arg(a * std::conj(b)));
}

} // namespace

Eigen::MatrixXcd align_holonomies(const FiberConnection& A_flat,
                                  const SpectralData& sd, double tol) {
    const int n = A_flat.rank();
    const Eigen::MatrixXcd H1 = holonomy(A_flat, Cycle::y1);
    const Eigen::MatrixXcd H2 = holonomy(A_flat, Cycle::y2);

    // commuting unitaries: diagonalize a generic real combination
    const Eigen::MatrixXcd M = H1 + 0.6180339887498949 * H2;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M);
    Eigen::MatrixXcd V = es.eigenvectors();

    std::vector<complexd> lam1(n), lam2(n);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXcd v = V.col(i).normalized();
        lam1[i] = (v.adjoint() * H1 * v)(0, 0);
        lam2[i] = (v.adjoint() * H2 * v)(0, 0);
    }

    std::vector<complexd> mu1(n), mu2(n);
    for (int i = 0; i < n; ++i) {
        mu1[i] = std::exp(complexd(0.0, 2.0 * kPi * sd.theta1()[i]));
        mu2[i] = std::exp(complexd(0.0, 2.0 * kPi * sd.theta2()[i]));
    }

    std::vector<int> perm(n), best_perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d1 = ang_dist(lam1[perm[i]], mu1[i]);
            const double d2 = ang_dist(lam2[perm[i]], mu2[i]);
            cost += d1 * d1 + d2 * d2;
        }
        if (cost < best) {
            best = cost;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        worst = std::max(worst, ang_dist(lam1[best_perm[i]], mu1[i]));
        worst = std::max(worst, ang_dist(lam2[best_perm[i]], mu2[i]));
    }
    if (worst > tol)
        throw AlignmentFailed("holonomy mismatch " + std::to_string(worst) +
                              " exceeds tolerance " + std::to_string(tol));

    Eigen::MatrixXcd u(n, n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXcd v = V.col(best_perm[i]).normalized();
        // deterministic phase: largest-modulus entry real positive
        int arg_max = 0;
        for (int r = 1; r < n; ++r)
            if (std::abs(v(r)) > std::abs(v(arg_max))) arg_max = r;
        v *= std::abs(v(arg_max)) / v(arg_max);
        u.col(i) = v;
    }
    // polar orthonormalization
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ph(u.adjoint() * u);
    const Eigen::MatrixXcd inv_sqrt =
        ph.eigenvectors() *
        ph.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
        ph.eigenvectors().adjoint();
    return u * inv_sqrt;
}

double holonomy_spectrum_distance(const FiberConnection& A, const FiberConnection& B) {
    double worst = 0.0;
    for (Cycle c : {Cycle::y1, Cycle::y2}) {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ea(holonomy(A, c), false);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eb(holonomy(B, c), false);
        const int n = static_cast<int>(ea.eigenvalues().size());
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double m = 0.0;
            for (int i = 0; i < n; ++i)
                m = std::max(m, std::abs(ea.eigenvalues()(perm[i]) -
                                         eb.eigenvalues()(i)));
            best = std::min(best, m);
        } while (std::next_permutation(perm.begin(), perm.end()));
        worst = std::max(worst, best);
    }
    return worst;
}

// ---- gauge fixing ---------------------------------------------------------------------

double moser_constant(const std::vector<MatrixField>& samples,
                      const FiberConnection& A0, double eps0) {
    (void)A0;
    double worst = 0.0;
    for (const auto& s : samples) {
        const double l2 = l2_norm(s);
        if (l2 <= 0.0) continue;
        const double c0 = c0_norm(s);
        worst = std::max(worst, std::max(c0 * c0, 1.0) / (l2 * (1.0 + eps0)));
    }
    return worst;
}

GaugeFixCalibration calibrate_gauge_fix(const FiberConnection& A0,
                                        const SpectralData& sd, double eps0,
                                        std::uint64_t seed, int nsamples) {
    const FiberGrid& grid = A0.grid();
    const int n = A0.rank();

    // C1: shape constant of the band-limited family at O(1) amplitude
    std::vector<MatrixField> samples;
    samples.reserve(nsamples);
    for (int i = 0; i < nsamples; ++i)
        samples.push_back(random_herm_perp(grid, n, 1.0, 2, seed + 1000 + i));
    const double C1 = moser_constant(samples, A0, eps0);

    // Lambda0: measured inverse bound of the recovery on small round trips
    double L0 = 0.0;
    for (int i = 0; i < std::min(nsamples, 8); ++i) {
        const MatrixField s0 =
            random_herm_perp(grid, n, 0.01, 2, seed + 2000 + i);
        const FiberConnection As = apply_hermitian_gauge(s0, A0);
        const RecoverResult rec = recover_hermitian(As, A0, sd);
        L0 = std::max(L0, rec.lambda0);
    }
    return {C1, L0, 2.0 * C1 * L0, eps0};
}

NormalizeResult normalize_gauge(const MatrixField& s, const FiberConnection& A0,
                                const SpectralData& sd, double eps0,
                                const GaugeFixCalibration* calib,
                                const FlowOptions& flow_opts) {
    const FiberConnection As = apply_hermitian_gauge(s, A0);
    const CurvatureField C = curvature(As);
    const double fc0 = c0_norm(C.F);
    if (fc0 > eps0)
        throw CurvatureTooLarge("normalize_gauge: |F|_{C^0} = " +
                                std::to_string(fc0) + " exceeds eps0 = " +
                                std::to_string(eps0));

    GaugeFixCalibration cal =
        calib ? *calib : calibrate_gauge_fix(A0, sd, eps0);

    FlowResult flow;
    try {
        flow = kempf_ness_flow(herm_exp(s), A0, flow_opts);
    } catch (const MaxStepsExceeded& e) {
        throw FlowFailed(std::string("normalize_gauge: ") + e.what());
    } catch (const EnergyIncrease& e) {
        throw FlowFailed(std::string("normalize_gauge: ") + e.what());
    }

    const Eigen::MatrixXcd u = align_holonomies(flow.A, sd);

    // Lemma 6.3 in the u-gauge: the Herm_0^perp slice is taken after
    // conjugating by u; the recovered s' satisfies e^{s'}_dagger A0 = As.
    const RecoverResult rec = recover_hermitian(As, A0, sd, &u);

    NormalizeResult out{rec.s, c0_norm(rec.s), rec.residual, cal.C0, u,
                        flow.terminal_residual};
    return out;
}

} // namespace hymlab
