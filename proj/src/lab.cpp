#include "lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

namespace hymlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---- scenario -----------------------------------------------------------------

Scenario scenario_from_config(const Config& cfg) {
    Scenario sc;
    sc.potential = cfg.get_string("potential", "name", sc.potential);
    sc.potential_param = cfg.get_number("potential", "param", sc.potential_param);
    {
        auto bp = cfg.get_number_list("potential", "base_point");
        if (bp.size() == 2) sc.base = {bp[0], bp[1]};
        else if (!bp.empty())
            throw ConfigError(cfg.origin() +
                              ": field [potential].base_point: expected two numbers");
    }

    if (cfg.has("spectral", "lifts")) sc.lifts = cfg.get_complex_list("spectral", "lifts");
    if (cfg.has("spectral", "w_coefficients"))
        sc.w_coefficients = cfg.get_complex_list("spectral", "w_coefficients");
    sc.rank = static_cast<int>(cfg.get_int("spectral", "rank",
                                           static_cast<long long>(sc.lifts.size())));

    sc.N = static_cast<int>(cfg.get_int("grid", "n", sc.N));

    sc.flow.tol = cfg.get_number("flow", "tol", sc.flow.tol);
    sc.flow.t_max = cfg.get_number("flow", "t_max", sc.flow.t_max);
    sc.flow.max_steps = cfg.get_int("flow", "max_steps", sc.flow.max_steps);
    sc.flow.dt_init = cfg.get_number("flow", "dt_init", sc.flow.dt_init);
    sc.flow.dt_growth = cfg.get_number("flow", "dt_growth", sc.flow.dt_growth);
    sc.flow.dealias = cfg.get_bool("flow", "dealias", sc.flow.dealias);
    sc.flow.record_every =
        static_cast<int>(cfg.get_int("flow", "record_every", sc.flow.record_every));

    sc.t0 = cfg.get_number("collapse", "t0", sc.t0);
    sc.t_count = static_cast<int>(cfg.get_int("collapse", "count", sc.t_count));
    sc.t_ratio = cfg.get_number("collapse", "ratio", sc.t_ratio);
    sc.amplitude = cfg.get_number("collapse", "amplitude", sc.amplitude);
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("collapse", "seed",
                                                     static_cast<long long>(sc.seed)));
    sc.seed_max_mode = static_cast<int>(
        cfg.get_int("collapse", "seed_max_mode", sc.seed_max_mode));
    sc.base_tol = cfg.get_number("collapse", "base_tol", sc.base_tol);
    sc.base_samples =
        static_cast<int>(cfg.get_int("collapse", "base_samples", sc.base_samples));

    sc.out_dir = cfg.get_string("output", "dir", sc.out_dir);
    sc.json = cfg.get_bool("output", "json", sc.json);

    if (sc.amplitude < 0.0)
        throw ConfigError("scenario: amplitude must be >= 0");
    if (sc.t0 <= 0.0 || sc.t_ratio <= 0.0 || sc.t_ratio >= 1.0)
        throw ConfigError("scenario: t-sequence must be positive decreasing");
    return sc;
}

LabSetup build_setup(const Scenario& sc) {
    auto phi = make_potential(sc.potential, sc.potential_param);
    const complexd tau = tau_at(*phi, sc.base).tau;
    FiberGrid grid{sc.N, tau, 1.0};
    grid.validate();

    SpectralData sd(sc.lifts, tau);
    if (!sc.w_coefficients.empty()) sd.set_linear_w(sc.w_coefficients, phi, sc.base);
    if (static_cast<int>(sc.lifts.size()) != sc.rank)
        throw ConfigError("scenario: rank does not match number of lifts");

    FiberConnection A0 = reference_connection(sd, grid);
    return {std::move(phi), sc.base, tau, grid, std::move(sd), std::move(A0)};
}

// ---- bubbling monitor --------------------------------------------------------------

BubblingRecord bubbling_monitor(const LabSetup& setup, const FiberConnection& A_fiber,
                                const BasePoint& sample, double t) {
    BubblingRecord rec{};
    rec.t = t;
    rec.x1 = sample.x1;
    rec.x2 = sample.x2;

    // the testbed family carries no dx-components, so the base block vanishes
    rec.f_base_c0 = 0.0;

    // fiber block: |dy^1^dy^2|_{g_X} = det(phi^{-1})^{1/2} = 1, so the
    // Frobenius C^0 norm is already the g_X norm
    const CurvatureField C = curvature(A_fiber);
    rec.f_fiber_c0 = c0_norm(C.F);
    rec.f_fiber_c0_over_t = rec.f_fiber_c0 / t;

    // mixed block from the section: kappa = 2 pi i Theta_{ij} dx^i ^ dy^j
    const auto Theta = section_theta_derivatives(*setup.potential, sample, setup.sd);
    const Hess2 H = setup.potential->hess(sample.x1, sample.x2);
    const double inv[2][2] = {{H.h22, -H.h12}, {-H.h12, H.h11}}; // det = 1
    double k2 = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int ip = 0; ip < 2; ++ip)
            for (int j = 0; j < 2; ++j)
                for (int jp = 0; jp < 2; ++jp) {
                    const complexd tr =
                        (Theta[2 * i + j] * Theta[2 * ip + jp].adjoint()).trace();
                    k2 += inv[i][ip] * inv[j][jp] * (4.0 * kPi * kPi) * tr.real();
                }
    rec.kappa_sq_c0 = k2;

    rec.m = rec.f_base_c0 + rec.f_fiber_c0_over_t + rec.kappa_sq_c0;
    rec.t_m = t * rec.m;
    return rec;
}

// ---- collapse experiment ---------------------------------------------------------------

int worker_threads(int jobs) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (const char* env = std::getenv("HYMLAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) hw = std::min(hw, cap);
    }
    return std::max(1, std::min(hw, jobs));
}

CollapseReport run_collapse_experiment(const Scenario& sc) {
    const LabSetup setup = build_setup(sc);
    const MatrixField s_star = random_herm_perp(setup.grid, sc.rank, sc.amplitude,
                                                sc.seed_max_mode, sc.seed);
    const MatrixField g0 = herm_exp(s_star);

    std::vector<BasePoint> samples;
    samples.push_back(setup.base);
    const Domain& dom = setup.potential->domain();
    const double r = 0.05 * std::min(dom.x1_max - dom.x1_min, dom.x2_max - dom.x2_min);
    for (int k = 1; k < sc.base_samples; ++k) {
        const double ang = 2.0 * kPi * (k - 1) / std::max(1, sc.base_samples - 1);
        BasePoint p{setup.base.x1 + r * std::cos(ang), setup.base.x2 + r * std::sin(ang)};
        p.x1 = std::clamp(p.x1, dom.x1_min + 2e-3, dom.x1_max - 2e-3);
        p.x2 = std::clamp(p.x2, dom.x2_min + 2e-3, dom.x2_max - 2e-3);
        samples.push_back(p);
    }

    CollapseReport rep;
    rep.s_star_c0 = c0_norm(s_star);
    rep.rows.resize(sc.t_count);

    std::atomic<int> next{0};
    auto work = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= sc.t_count) return;
            ConvergenceRow& row = rep.rows[i];
            row.t = sc.t0 * std::pow(sc.t_ratio, i);
            row.hym_tol = sc.base_tol * row.t;
            try {
                FlowOptions opts = sc.flow;
                opts.tol = row.hym_tol;
                opts.record_every = 0; // terminal diagnostics only
                const FlowResult res = kempf_ness_flow(g0, setup.A0, opts);
                row.dist_l2 = conn_l2_dist(res.A, setup.A0);
                row.dist_l21 = conn_l21_dist(res.A, setup.A0, setup.A0);
                const CurvatureField C = curvature(res.A);
                row.f_l2 = l2_norm(C.F);
                row.f_c0 = c0_norm(C.F);
                row.hol_dist = holonomy_spectrum_distance(res.A, setup.A0);
                row.flow_steps = res.steps;
                for (const auto& p : samples)
                    row.monitor.push_back(bubbling_monitor(setup, res.A, p, row.t));
                row.ok = true;
            } catch (const Error& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };
    const int nw = worker_threads(sc.t_count);
    std::vector<std::thread> pool;
    for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();

    // log-log slope of dist_l21 against terminal |F|_{L^2}
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto& row : rep.rows) {
        if (!row.ok || row.dist_l21 <= 0.0 || row.f_l2 <= 0.0) continue;
        const double x = std::log(row.f_l2), y = std::log(row.dist_l21);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++cnt;
    }
    rep.fitted_rate =
        (cnt >= 2) ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : 0.0;
    return rep;
}

// ---- report writers -----------------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

void write_collapse_csv(const CollapseReport& rep, const std::string& report_path,
                        const std::string& monitor_path) {
    std::ofstream out(report_path);
    if (!out) throw Error("cannot open " + report_path);
    out << "t,hym_tol,dist_l2,dist_l21,f_l2,f_c0,hol_dist,flow_steps,ok,error\n";
    for (const auto& r : rep.rows) {
        out << format_double(r.t) << ',' << format_double(r.hym_tol) << ','
            << format_double(r.dist_l2) << ',' << format_double(r.dist_l21) << ','
            << format_double(r.f_l2) << ',' << format_double(r.f_c0) << ','
            << format_double(r.hol_dist) << ',' << r.flow_steps << ','
            << (r.ok ? "1" : "0") << ',' << csv_quote(r.error) << "\n";
    }
    out << "# fitted_rate," << format_double(rep.fitted_rate) << "\n";

    std::ofstream mon(monitor_path);
    if (!mon) throw Error("cannot open " + monitor_path);
    mon << "t,x1,x2,f_base_c0,f_fiber_c0_over_t,kappa_sq_c0,m,t_m\n";
    for (const auto& r : rep.rows)
        for (const auto& b : r.monitor)
            mon << format_double(b.t) << ',' << format_double(b.x1) << ','
                << format_double(b.x2) << ',' << format_double(b.f_base_c0) << ','
                << format_double(b.f_fiber_c0_over_t) << ','
                << format_double(b.kappa_sq_c0) << ',' << format_double(b.m) << ','
                << format_double(b.t_m) << "\n";
}

void write_trajectory_csv(const std::vector<FlowRecord>& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    out << "step,time,dt,ym_energy,hym_residual,dist_l2,dist_l21,c0_s\n";
    for (const auto& r : traj)
        out << r.step << ',' << format_double(r.time) << ',' << format_double(r.dt)
            << ',' << format_double(r.ym_energy) << ','
            << format_double(r.hym_residual) << ',' << format_double(r.dist_l2)
            << ',' << format_double(r.dist_l21) << ',' << format_double(r.c0_s)
            << "\n";
}

// ---- 4d testbed ------------------------------------------------------------------------------

EnergyBookkeeping testbed_energy_constant_theta(
    const std::array<Eigen::MatrixXcd, 4>& Theta, double) {
    // |F|^2 dV picks up 1/(G T) from the metric and G T from the volume
    double f2 = 0.0;
    for (const auto& th : Theta) f2 += 4.0 * kPi * kPi * th.squaredNorm();

    const complexd i2pi(0.0, 2.0 * kPi);
    const Eigen::MatrixXcd F02 = i2pi * Theta[0]; // dx1 ^ dy1
    const Eigen::MatrixXcd F03 = i2pi * Theta[1];
    const Eigen::MatrixXcd F12 = i2pi * Theta[2];
    const Eigen::MatrixXcd F13 = i2pi * Theta[3];
    const double top_std = 2.0 * ((-(F02 * F13).trace() + (F03 * F12).trace()).real());
    EnergyBookkeeping bk{};
    bk.f_norm_sq = f2;
    bk.lam_f_norm_sq = 0.0;
    bk.chern = -top_std; // complex orientation
    bk.defect_rel = std::abs(bk.f_norm_sq - bk.lam_f_norm_sq - bk.chern) /
                    std::max(bk.f_norm_sq, 1e-300);
    return bk;
}

namespace {

// minimal 4d periodic matrix field on an (Nb, Nb, Nf, Nf) grid
struct Field4 {
    int Nb = 0, Nf = 0, n = 0;
    std::vector<complexd> a;

    Field4() = default;
    Field4(int nb, int nf, int rank)
        : Nb(nb), Nf(nf), n(rank),
          a(static_cast<size_t>(nb) * nb * nf * nf * rank * rank, complexd{}) {}

    size_t points() const { return a.size() / (n * n); }
    complexd* at(size_t p) { return a.data() + p * n * n; }
    const complexd* at(size_t p) const { return a.data() + p * n * n; }
};

Field4 pointwise(const Field4& x, const Field4& y,
                 void (*op)(const complexd*, const complexd*, complexd*, int)) {
    Field4 out(x.Nb, x.Nf, x.n);
    for (size_t p = 0; p < x.points(); ++p) op(x.at(p), y.at(p), out.at(p), x.n);
    return out;
}

void mul_op(const complexd* a, const complexd* b, complexd* o, int n) {
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            complexd acc{};
            for (int k = 0; k < n; ++k) acc += a[r * n + k] * b[k * n + c];
            o[r * n + c] = acc;
        }
}

Field4 mul(const Field4& x, const Field4& y) { return pointwise(x, y, mul_op); }

Field4 adj(const Field4& x) {
    Field4 out(x.Nb, x.Nf, x.n);
    for (size_t p = 0; p < x.points(); ++p) {
        const complexd* a = x.at(p);
        complexd* o = out.at(p);
        for (int r = 0; r < x.n; ++r)
            for (int c = 0; c < x.n; ++c) o[r * x.n + c] = std::conj(a[c * x.n + r]);
    }
    return out;
}

Field4 inv2(const Field4& x) {
    Field4 out(x.Nb, x.Nf, x.n);
    Eigen::MatrixXcd m(x.n, x.n);
    for (size_t p = 0; p < x.points(); ++p) {
        const complexd* a = x.at(p);
        for (int r = 0; r < x.n; ++r)
            for (int c = 0; c < x.n; ++c) m(r, c) = a[r * x.n + c];
        const Eigen::MatrixXcd mi = m.partialPivLu().inverse();
        complexd* o = out.at(p);
        for (int r = 0; r < x.n; ++r)
            for (int c = 0; c < x.n; ++c) o[r * x.n + c] = mi(r, c);
    }
    return out;
}

Field4 lin(const Field4& x, complexd cx, const Field4& y, complexd cy) {
    Field4 out(x.Nb, x.Nf, x.n);
    for (size_t i = 0; i < x.a.size(); ++i) out.a[i] = cx * x.a[i] + cy * y.a[i];
    return out;
}

Field4 scaled(Field4 x, complexd c) {
    for (auto& v : x.a) v *= c;
    return x;
}

// spectral differentiation matrix for one periodic axis
Eigen::MatrixXcd diff_matrix(int N) {
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(N, N);
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) {
            complexd acc{};
            for (int b = 0; b < N; ++b) {
                const double m = mode_of(b, N);
                acc += complexd(0.0, 2.0 * kPi * m) *
                       std::exp(complexd(0.0, 2.0 * kPi * b * (j - k) / N));
            }
            D(j, k) = acc / static_cast<double>(N);
        }
    return D;
}

// derivative along axis 0..3 of the (x1, x2, y1, y2) grid
Field4 deriv4(const Field4& f, int axis) {
    const int dims[4] = {f.Nb, f.Nb, f.Nf, f.Nf};
    const int N = dims[axis];
    static std::map<int, Eigen::MatrixXcd> cache;
    auto it = cache.find(N);
    if (it == cache.end()) it = cache.emplace(N, diff_matrix(N)).first;
    const Eigen::MatrixXcd& D = it->second;

    // strides in units of matrix blocks
    size_t stride[4];
    stride[3] = 1;
    stride[2] = static_cast<size_t>(f.Nf);
    stride[1] = static_cast<size_t>(f.Nf) * f.Nf;
    stride[0] = static_cast<size_t>(f.Nb) * f.Nf * f.Nf;
    const size_t total = f.points();
    const size_t s = stride[axis];
    const int blk = f.n * f.n;

    Field4 out(f.Nb, f.Nf, f.n);
    std::vector<bool> seen(total, false);
    std::vector<const complexd*> line(N);
    for (size_t p = 0; p < total; ++p) {
        if (seen[p]) continue;
        // p is the head of a line if stepping backwards would change a
        // different axis index; easier: mark the whole line from its head
        const size_t idx_along = (p / s) % N;
        if (idx_along != 0) continue;
        for (int i = 0; i < N; ++i) {
            const size_t q = p + static_cast<size_t>(i) * s;
            seen[q] = true;
            line[i] = f.at(q);
        }
        for (int i = 0; i < N; ++i) {
            complexd* o = out.at(p + static_cast<size_t>(i) * s);
            for (int k = 0; k < N; ++k) {
                const complexd d = D(i, k);
                const complexd* src = line[k];
                for (int e = 0; e < blk; ++e) o[e] += d * src[e];
            }
        }
    }
    return out;
}

double mean_frob_sq(const Field4& f) {
    double acc = 0.0;
    for (const auto& v : f.a) acc += std::norm(v);
    return acc / static_cast<double>(f.points());
}

} // namespace

EnergyBookkeeping testbed_energy_perturbed(const SpectralData& sd, int Nb, int Nf,
                                           double t, double amplitude,
                                           std::uint64_t seed) {
    if (std::abs(sd.tau() - complexd(0.0, 1.0)) > 1e-12)
        throw ConfigError("testbed_energy_perturbed: requires tau = i");
    const int n = sd.rank();

    // band-limited Hermitian 4d seed
    Field4 s(Nb, Nf, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int kb = 1, kf = 1;
    std::vector<std::array<int, 4>> modes;
    std::vector<Eigen::MatrixXcd> coeffs;
    for (int m1 = -kb; m1 <= kb; ++m1)
        for (int m2 = -kb; m2 <= kb; ++m2)
            for (int m3 = -kf; m3 <= kf; ++m3)
                for (int m4 = -kf; m4 <= kf; ++m4) {
                    Eigen::MatrixXcd c(n, n);
                    for (int r = 0; r < n; ++r)
                        for (int cc = 0; cc < n; ++cc)
                            c(r, cc) = complexd(gauss(rng), gauss(rng));
                    modes.push_back({m1, m2, m3, m4});
                    coeffs.push_back(c);
                }
    size_t p = 0;
    for (int i1 = 0; i1 < Nb; ++i1)
        for (int i2 = 0; i2 < Nb; ++i2)
            for (int i3 = 0; i3 < Nf; ++i3)
                for (int i4 = 0; i4 < Nf; ++i4, ++p) {
                    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
                    for (size_t km = 0; km < modes.size(); ++km) {
                        const auto& mm = modes[km];
                        const double ph =
                            2.0 * kPi *
                            (static_cast<double>(mm[0]) * i1 / Nb +
                             static_cast<double>(mm[1]) * i2 / Nb +
                             static_cast<double>(mm[2]) * i3 / Nf +
                             static_cast<double>(mm[3]) * i4 / Nf);
                        acc += coeffs[km] * std::exp(complexd(0.0, ph));
                    }
                    acc = 0.5 * (acc + acc.adjoint()).eval();
                    acc -= (acc.trace() / static_cast<double>(n)) *
                           Eigen::MatrixXcd::Identity(n, n);
                    complexd* dst = s.at(p);
                    for (int r = 0; r < n; ++r)
                        for (int cc = 0; cc < n; ++cc) dst[r * n + cc] = acc(r, cc);
                }
    // scale to requested amplitude
    double smax = 0.0;
    for (size_t q = 0; q < s.points(); ++q) {
        double v = 0.0;
        for (int e = 0; e < n * n; ++e) v += std::norm(s.at(q)[e]);
        smax = std::max(smax, std::sqrt(v));
    }
    if (smax > 0.0)
        for (auto& v : s.a) v *= amplitude / smax;

    // sigma = e^s pointwise
    Field4 sigma(Nb, Nf, n);
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
        Eigen::MatrixXcd m(n, n);
        for (size_t q = 0; q < s.points(); ++q) {
            const complexd* src = s.at(q);
            for (int r = 0; r < n; ++r)
                for (int cc = 0; cc < n; ++cc) m(r, cc) = src[r * n + cc];
            es.compute(m);
            const Eigen::MatrixXcd e = es.eigenvectors() *
                                       es.eigenvalues().array().exp().matrix().asDiagonal() *
                                       es.eigenvectors().adjoint();
            complexd* dst = sigma.at(q);
            for (int r = 0; r < n; ++r)
                for (int cc = 0; cc < n; ++cc) dst[r * n + cc] = e(r, cc);
        }
    }

    const Field4 sigma_inv = inv2(sigma);
    const Field4 sigma_st = adj(sigma);
    const Field4 sigma_st_inv = adj(sigma_inv);

    // w = x1 + i x2, z = y2 + i y1 (tau = i):
    // d_w = (d_x1 - i d_x2)/2, d_z = (d_y2 - i d_y1)/2
    const Field4 d1 = deriv4(sigma, 0), d2 = deriv4(sigma, 1);
    const Field4 d3 = deriv4(sigma, 2), d4 = deriv4(sigma, 3);
    const Field4 dw_s = lin(d1, 0.5, d2, complexd(0.0, -0.5));
    const Field4 dwb_s = lin(d1, 0.5, d2, complexd(0.0, 0.5));
    const Field4 dz_s = lin(d4, 0.5, d3, complexd(0.0, -0.5));
    const Field4 dzb_s = lin(d4, 0.5, d3, complexd(0.0, 0.5));

    const Field4 d1s = deriv4(sigma_st, 0), d2s = deriv4(sigma_st, 1);
    const Field4 d3s = deriv4(sigma_st, 2), d4s = deriv4(sigma_st, 3);
    const Field4 dw_ss = lin(d1s, 0.5, d2s, complexd(0.0, -0.5));
    const Field4 dz_ss = lin(d4s, 0.5, d3s, complexd(0.0, -0.5));

    // constant-section reference: xi_z = pi conj(Q), xi_zbar = -pi Q
    Field4 xi_z(Nb, Nf, n), xi_zb(Nb, Nf, n);
    for (size_t q = 0; q < xi_z.points(); ++q)
        for (int r = 0; r < n; ++r) {
            xi_z.at(q)[r * n + r] = kPi * std::conj(sd.lifts()[r]);
            xi_zb.at(q)[r * n + r] = -kPi * sd.lifts()[r];
        }

    // complexified action component by component
    const Field4 b_w = mul(sigma_st_inv, dw_ss);
    const Field4 b_wb = scaled(mul(dwb_s, sigma_inv), -1.0);
    const Field4 b_z =
        lin(mul(mul(sigma_st_inv, xi_z), sigma_st), 1.0, mul(sigma_st_inv, dz_ss), 1.0);
    const Field4 b_zb = lin(mul(mul(sigma, xi_zb), sigma_inv), 1.0,
                            mul(dzb_s, sigma_inv), -1.0);

    // real components c[0..3] along (dx1, dx2, dy1, dy2)
    std::array<Field4, 4> c;
    c[0] = lin(b_w, 1.0, b_wb, 1.0);
    c[1] = lin(b_w, complexd(0.0, 1.0), b_wb, complexd(0.0, -1.0));
    c[2] = lin(b_z, complexd(0.0, 1.0), b_zb, complexd(0.0, -1.0));
    c[3] = lin(b_z, 1.0, b_zb, 1.0);

    // curvature components F_ab = d_a c_b - d_b c_a + [c_a, c_b]
    std::array<std::array<Field4, 4>, 4> F;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
            Field4 f = lin(deriv4(c[b], a), 1.0, deriv4(c[a], b), -1.0);
            Field4 comm = lin(mul(c[a], c[b]), 1.0, mul(c[b], c[a]), -1.0);
            F[a][b] = lin(f, 1.0, comm, 1.0);
        }

    const double G = 1.0 + t, T = t;
    const double w[4] = {G, G, T, T};
    double f2 = 0.0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            f2 += mean_frob_sq(F[a][b]) / (w[a] * w[b]);
    f2 *= G * T; // volume factor

    // iLambda F = i (F_01 / G - F_23 / T)
    Field4 lam = lin(F[0][1], complexd(0.0, 1.0 / G), F[2][3], complexd(0.0, -1.0 / T));
    const double lam2 = mean_frob_sq(lam) * G * T;

    // Tr(F ^ F) against the complex orientation
    static const int pr[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    static const int cp[6][2] = {{2, 3}, {1, 3}, {1, 2}, {0, 3}, {0, 2}, {0, 1}};
    static const int sg[6] = {1, -1, 1, 1, -1, 1};
    double top = 0.0;
    for (int k = 0; k < 6; ++k) {
        const Field4& P = F[pr[k][0]][pr[k][1]];
        const Field4& Q = F[cp[k][0]][cp[k][1]];
        double acc = 0.0;
        for (size_t q = 0; q < P.points(); ++q) {
            const complexd* a = P.at(q);
            const complexd* b = Q.at(q);
            complexd tr{};
            for (int r = 0; r < n; ++r)
                for (int kk = 0; kk < n; ++kk) tr += a[r * n + kk] * b[kk * n + r];
            acc += tr.real();
        }
        top += sg[k] * acc / static_cast<double>(P.points());
    }

    EnergyBookkeeping bk{};
    bk.f_norm_sq = f2;
    bk.lam_f_norm_sq = lam2;
    bk.chern = -top;
    bk.defect_rel = std::abs(bk.f_norm_sq - bk.lam_f_norm_sq - bk.chern) /
                    std::max(bk.f_norm_sq, 1e-300);
    return bk;
}

} // namespace hymlab
