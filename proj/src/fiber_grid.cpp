#include "fiber_grid.hpp"

#include <json.hpp>

#include <fftw3.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <random>

namespace hymlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---- FFTW plan cache ---------------------------------------------------------

struct PlanKey {
    int N, n, sign;
    bool operator<(const PlanKey& o) const {
        return std::tie(N, n, sign) < std::tie(o.N, o.n, o.sign);
    }
};

// Transforms run on plane-contiguous scratch (entry-major interleaved fields
// are packed first); contiguous layouts are several times faster for FFTW's
// heuristic plans, and ESTIMATE planning keeps results run-to-run identical.
class FftEngine {
  public:
    struct Scratch {
        std::vector<complexd> a, b;
    };
    static Scratch& scratch(size_t need) {
        thread_local Scratch s;
        if (s.a.size() < need) {
            s.a.resize(need);
            s.b.resize(need);
        }
        return s;
    }

    static void pack(const complexd* in, complexd* out, int N, int blk) {
        const size_t pts = static_cast<size_t>(N) * N;
        for (int e = 0; e < blk; ++e)
            for (size_t i = 0; i < pts; ++i) out[e * pts + i] = in[i * blk + e];
    }
    static void unpack(const complexd* in, complexd* out, int N, int blk) {
        const size_t pts = static_cast<size_t>(N) * N;
        for (int e = 0; e < blk; ++e)
            for (size_t i = 0; i < pts; ++i) out[i * blk + e] = in[e * pts + i];
    }

    // contiguous plane-major transform: blk planes of N x N
    static void transform_packed(int N, int blk, int sign, complexd* in,
                                 complexd* out) {
        fftw_plan p = plan_for({N, blk, sign});
        fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in),
                         reinterpret_cast<fftw_complex*>(out));
    }

  private:
    static fftw_plan plan_for(const PlanKey& key) {
        static std::mutex mu;
        static std::map<PlanKey, fftw_plan> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        const size_t pts = static_cast<size_t>(key.N) * key.N;
        std::vector<complexd> a(pts * key.n), b(pts * key.n);
        int dims[2] = {key.N, key.N};
        fftw_plan p = fftw_plan_many_dft(
            2, dims, key.n, reinterpret_cast<fftw_complex*>(a.data()), nullptr, 1,
            static_cast<int>(pts), reinterpret_cast<fftw_complex*>(b.data()),
            nullptr, 1, static_cast<int>(pts), key.sign,
            FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw Error("FFTW plan creation failed");
        cache.emplace(key, p);
        return p;
    }
};

// ---- symbol tables -------------------------------------------------------------

using Symbol = SpectralSymbol;

struct SymbolKey {
    int N;
    Symbol kind;
    double tre, tim;
    int cut;
    bool operator<(const SymbolKey& o) const {
        return std::tie(N, kind, tre, tim, cut) <
               std::tie(o.N, o.kind, o.tre, o.tim, o.cut);
    }
};

const std::vector<complexd>& symbol_table(const FiberGrid& g, Symbol kind,
                                          int cut_override = 0) {
    static std::mutex mu;
    static std::map<SymbolKey, std::vector<complexd>> cache;
    SymbolKey key{g.N, kind, 0.0, 0.0, 0};
    if (kind == Symbol::dz || kind == Symbol::dzbar) {
        key.tre = g.tau.real();
        key.tim = g.tau.imag();
    }
    if (kind == Symbol::dealias)
        key.cut = (cut_override > 0) ? cut_override : g.N / 3;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    const int N = g.N;
    const double q = g.tau.imag();
    std::vector<complexd> tab(static_cast<size_t>(N) * N);
    const int cut = key.cut;
    for (int k1 = 0; k1 < N; ++k1) {
        const int m = mode_of(k1, N);
        for (int k2 = 0; k2 < N; ++k2) {
            const int nh = mode_of(k2, N);
            complexd v;
            switch (kind) {
                case Symbol::d1: v = complexd(0.0, 2.0 * kPi * m); break;
                case Symbol::d2: v = complexd(0.0, 2.0 * kPi * nh); break;
                case Symbol::dzbar:
                    v = kPi * (g.tau * static_cast<double>(nh) -
                               static_cast<double>(m)) / q;
                    break;
                case Symbol::dz:
                    v = -std::conj(kPi * (g.tau * static_cast<double>(nh) -
                                          static_cast<double>(m)) / q);
                    break;
                case Symbol::dealias:
                    v = (std::abs(m) <= cut && std::abs(nh) <= cut) ? 1.0 : 0.0;
                    break;
            }
            tab[static_cast<size_t>(k1) * N + k2] = v;
        }
    }
    return cache.emplace(key, std::move(tab)).first->second;
}

MatrixField apply_symbol(const MatrixField& f, Symbol kind) {
    const int N = f.N(), n = f.rank();
    const int blk = n * n;
    const size_t pts = static_cast<size_t>(N) * N;
    auto& sc = FftEngine::scratch(pts * blk);
    FftEngine::pack(f.data(), sc.a.data(), N, blk);
    FftEngine::transform_packed(N, blk, FFTW_FORWARD, sc.a.data(), sc.b.data());
    const auto& tab = symbol_table(f.grid(), kind);
    const double scale = 1.0 / (static_cast<double>(N) * N);
    for (int e = 0; e < blk; ++e) {
        complexd* plane = sc.b.data() + e * pts;
        for (size_t k = 0; k < pts; ++k) plane[k] *= tab[k] * scale;
    }
    FftEngine::transform_packed(N, blk, FFTW_BACKWARD, sc.b.data(), sc.a.data());
    MatrixField out(f.grid(), n);
    FftEngine::unpack(sc.a.data(), out.data(), N, blk);
    return out;
}


void check_same_shape(const MatrixField& a, const MatrixField& b, const char* who) {
    if (!a.grid().same_as(b.grid()) || a.rank() != b.rank())
        throw Error(std::string(who) + ": shape mismatch");
}

} // namespace

// ---- MatrixField ----------------------------------------------------------------

MatrixField MatrixField::constant(const FiberGrid& grid, const Eigen::MatrixXcd& m) {
    MatrixField f(grid, static_cast<int>(m.rows()));
    const int n = f.rank();
    for (int i = 0; i < grid.N; ++i)
        for (int j = 0; j < grid.N; ++j) {
            complexd* p = f.at(i, j);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) p[r * n + c] = m(r, c);
        }
    return f;
}

MatrixField MatrixField::identity(const FiberGrid& grid, int rank) {
    return constant(grid, Eigen::MatrixXcd::Identity(rank, rank));
}

Eigen::MatrixXcd MatrixField::matrix_at(int iy1, int iy2) const {
    Eigen::MatrixXcd m(n_, n_);
    const complexd* p = at(iy1, iy2);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) m(r, c) = p[r * n_ + c];
    return m;
}

void MatrixField::set_matrix(int iy1, int iy2, const Eigen::MatrixXcd& m) {
    complexd* p = at(iy1, iy2);
    for (int r = 0; r < n_; ++r)
        for (int c = 0; c < n_; ++c) p[r * n_ + c] = m(r, c);
}

MatrixField& MatrixField::operator+=(const MatrixField& o) {
    check_same_shape(*this, o, "operator+=");
    for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
}

MatrixField& MatrixField::operator-=(const MatrixField& o) {
    check_same_shape(*this, o, "operator-=");
    for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
}

MatrixField& MatrixField::operator*=(complexd c) {
    for (auto& v : a_) v *= c;
    return *this;
}

MatrixField operator*(const MatrixField& a, const MatrixField& b) {
    check_same_shape(a, b, "operator*");
    const int n = a.rank(), N = a.N();
    MatrixField out(a.grid(), n);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const complexd* pa = a.at(i, j);
            const complexd* pb = b.at(i, j);
            complexd* po = out.at(i, j);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    complexd acc{};
                    for (int k = 0; k < n; ++k) acc += pa[r * n + k] * pb[k * n + c];
                    po[r * n + c] = acc;
                }
        }
    return out;
}

MatrixField MatrixField::adjoint() const {
    MatrixField out(grid_, n_);
    for (int i = 0; i < grid_.N; ++i)
        for (int j = 0; j < grid_.N; ++j) {
            const complexd* p = at(i, j);
            complexd* po = out.at(i, j);
            for (int r = 0; r < n_; ++r)
                for (int c = 0; c < n_; ++c)
                    po[r * n_ + c] = std::conj(p[c * n_ + r]);
        }
    return out;
}

MatrixField MatrixField::inverse(double cond_guard) const {
    MatrixField out(grid_, n_);
    auto guard = [&](double norm_m, double norm_inv) {
        if (cond_guard > 0.0) {
            const double cond = norm_m * norm_inv;
            if (!(cond < cond_guard))
                throw IllConditioned("pointwise condition number " +
                                     std::to_string(cond) + " exceeds guard");
        }
    };
    if (n_ == 1) {
        for (size_t i = 0; i < a_.size(); ++i) {
            const complexd v = a_[i];
            if (v == complexd{}) throw IllConditioned("singular 1x1 entry");
            out.a_[i] = 1.0 / v;
            guard(std::abs(v), std::abs(out.a_[i]));
        }
        return out;
    }
    if (n_ == 2) {
        for (int i = 0; i < grid_.N; ++i)
            for (int j = 0; j < grid_.N; ++j) {
                const complexd* p = at(i, j);
                const complexd det = p[0] * p[3] - p[1] * p[2];
                if (det == complexd{}) throw IllConditioned("singular 2x2 entry");
                complexd* po = out.at(i, j);
                po[0] = p[3] / det;
                po[1] = -p[1] / det;
                po[2] = -p[2] / det;
                po[3] = p[0] / det;
                if (cond_guard > 0.0) {
                    double nm = 0.0, ni = 0.0;
                    for (int e = 0; e < 4; ++e) {
                        nm += std::norm(p[e]);
                        ni += std::norm(po[e]);
                    }
                    guard(std::sqrt(nm), std::sqrt(ni));
                }
            }
        return out;
    }
    Eigen::MatrixXcd m(n_, n_), inv(n_, n_);
    for (int i = 0; i < grid_.N; ++i)
        for (int j = 0; j < grid_.N; ++j) {
            m = matrix_at(i, j);
            inv = m.partialPivLu().inverse();
            guard(m.norm(), inv.norm());
            out.set_matrix(i, j, inv);
        }
    return out;
}

MatrixField commutator(const MatrixField& a, const MatrixField& b) {
    return a * b - b * a;
}

// ---- spectral operations ---------------------------------------------------------

MatrixField to_modes(const MatrixField& f) {
    const int N = f.N(), blk = f.rank() * f.rank();
    const size_t pts = static_cast<size_t>(N) * N;
    auto& sc = FftEngine::scratch(pts * blk);
    FftEngine::pack(f.data(), sc.a.data(), N, blk);
    FftEngine::transform_packed(N, blk, FFTW_FORWARD, sc.a.data(), sc.b.data());
    MatrixField out(f.grid(), f.rank());
    FftEngine::unpack(sc.b.data(), out.data(), N, blk);
    const double s = 1.0 / (static_cast<double>(N) * N);
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return out;
}

MatrixField from_modes(const MatrixField& c) {
    const int N = c.N(), blk = c.rank() * c.rank();
    const size_t pts = static_cast<size_t>(N) * N;
    auto& sc = FftEngine::scratch(pts * blk);
    FftEngine::pack(c.data(), sc.a.data(), N, blk);
    FftEngine::transform_packed(N, blk, FFTW_BACKWARD, sc.a.data(), sc.b.data());
    MatrixField out(c.grid(), c.rank());
    FftEngine::unpack(sc.b.data(), out.data(), N, blk);
    return out;
}

// curl: deriv_y1(a2) - deriv_y2(a1) with a single inverse transform
MatrixField curl_y(const MatrixField& a1, const MatrixField& a2) {
    const int N = a1.N(), n = a1.rank();
    const int blk = n * n;
    const size_t pts = static_cast<size_t>(N) * N;
    auto& sc = FftEngine::scratch(2 * pts * blk);
    FftEngine::pack(a1.data(), sc.a.data(), N, blk);
    FftEngine::pack(a2.data(), sc.a.data() + pts * blk, N, blk);
    FftEngine::transform_packed(N, 2 * blk, FFTW_FORWARD, sc.a.data(), sc.b.data());
    const auto& d1 = symbol_table(a1.grid(), Symbol::d1);
    const auto& d2 = symbol_table(a1.grid(), Symbol::d2);
    const double scale = 1.0 / (static_cast<double>(N) * N);
    for (int e = 0; e < blk; ++e) {
        const complexd* p1 = sc.b.data() + e * pts;
        const complexd* p2 = sc.b.data() + (blk + e) * pts;
        complexd* dst = sc.a.data() + e * pts;
        for (size_t k = 0; k < pts; ++k)
            dst[k] = (d1[k] * p2[k] - d2[k] * p1[k]) * scale;
    }
    FftEngine::transform_packed(N, blk, FFTW_BACKWARD, sc.a.data(), sc.b.data());
    MatrixField out(a1.grid(), n);
    FftEngine::unpack(sc.b.data(), out.data(), N, blk);
    return out;
}

void deriv_zbar_and_z_adjoint(const MatrixField& g, MatrixField& dzbar_g,
                              MatrixField& dz_gstar) {
    const int N = g.N(), n = g.rank();
    const int blk = n * n;
    const size_t pts = static_cast<size_t>(N) * N;
    auto& sc = FftEngine::scratch(2 * pts * blk);
    FftEngine::pack(g.data(), sc.a.data(), N, blk);
    FftEngine::transform_packed(N, blk, FFTW_FORWARD, sc.a.data(), sc.b.data());
    const auto& zb = symbol_table(g.grid(), Symbol::dzbar);
    const auto& zz = symbol_table(g.grid(), Symbol::dz);
    const double scale = 1.0 / (static_cast<double>(N) * N);
    // modes(g^*)(k) = adjoint of modes(g)(-k); plane e = r*n + c swaps to c*n + r
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            const complexd* src = sc.b.data() + (r * n + c) * pts;
            const complexd* srcT = sc.b.data() + (c * n + r) * pts;
            complexd* d1 = sc.a.data() + (r * n + c) * pts;
            complexd* d2 = sc.a.data() + (blk + r * n + c) * pts;
            for (int k1 = 0; k1 < N; ++k1)
                for (int k2 = 0; k2 < N; ++k2) {
                    const size_t k = static_cast<size_t>(k1) * N + k2;
                    const size_t kn = static_cast<size_t>((N - k1) % N) * N +
                                      (N - k2) % N;
                    d1[k] = zb[k] * src[k] * scale;
                    d2[k] = zz[k] * std::conj(srcT[kn]) * scale;
                }
        }
    FftEngine::transform_packed(N, 2 * blk, FFTW_BACKWARD, sc.a.data(), sc.b.data());
    if (dzbar_g.empty()) dzbar_g = MatrixField(g.grid(), n);
    if (dz_gstar.empty()) dz_gstar = MatrixField(g.grid(), n);
    FftEngine::unpack(sc.b.data(), dzbar_g.data(), N, blk);
    FftEngine::unpack(sc.b.data() + pts * blk, dz_gstar.data(), N, blk);
}

const std::vector<complexd>& spectral_table(const FiberGrid& g, SpectralSymbol kind) {
    return symbol_table(g, kind);
}

const std::vector<complexd>& spectral_dealias_table(const FiberGrid& g, int cut) {
    return symbol_table(g, SpectralSymbol::dealias, cut);
}

void plane_fft(const FiberGrid& g, int blk, int sign, complexd* in, complexd* out) {
    FftEngine::transform_packed(g.N, blk, sign, in, out);
}

void plane_pack(const MatrixField& f, complexd* out) {
    FftEngine::pack(f.data(), out, f.N(), f.rank() * f.rank());
}

void plane_unpack(const FiberGrid& g, int rank, const complexd* in, MatrixField& out) {
    if (out.empty()) out = MatrixField(g, rank);
    FftEngine::unpack(in, out.data(), g.N, rank * rank);
}

MatrixField deriv_y1(const MatrixField& f) { return apply_symbol(f, Symbol::d1); }
MatrixField deriv_y2(const MatrixField& f) { return apply_symbol(f, Symbol::d2); }
MatrixField deriv_z(const MatrixField& f) { return apply_symbol(f, Symbol::dz); }
MatrixField deriv_zbar(const MatrixField& f) { return apply_symbol(f, Symbol::dzbar); }
MatrixField dealias_23(const MatrixField& f) { return apply_symbol(f, Symbol::dealias); }

MatrixField dealias_modes(const MatrixField& f, int cut) {
    if (cut <= 0) return dealias_23(f);
    const int N = f.N(), blk = f.rank() * f.rank();
    const size_t pts = static_cast<size_t>(N) * N;
    auto& sc = FftEngine::scratch(pts * blk);
    FftEngine::pack(f.data(), sc.a.data(), N, blk);
    FftEngine::transform_packed(N, blk, FFTW_FORWARD, sc.a.data(), sc.b.data());
    const auto& tab = symbol_table(f.grid(), Symbol::dealias, cut);
    const double scale = 1.0 / (static_cast<double>(N) * N);
    for (int e = 0; e < blk; ++e) {
        complexd* plane = sc.b.data() + e * pts;
        for (size_t k = 0; k < pts; ++k) plane[k] *= tab[k] * scale;
    }
    FftEngine::transform_packed(N, blk, FFTW_BACKWARD, sc.b.data(), sc.a.data());
    MatrixField out(f.grid(), f.rank());
    FftEngine::unpack(sc.a.data(), out.data(), N, blk);
    return out;
}

MatrixField dbar(const MatrixField& f, const std::vector<complexd>& lifts) {
    const int n = f.rank();
    if (static_cast<int>(lifts.size()) != n)
        throw Error("dbar: lift count does not match rank");
    MatrixField out = deriv_zbar(f);
    const double q = f.grid().tau.imag();
    const int N = f.N();
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const complexd* p = f.at(i, j);
            complexd* po = out.at(i, j);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c)
                    po[r * n + c] -= kPi * (lifts[r] - lifts[c]) / q * p[r * n + c];
        }
    return out;
}

// ---- norms / projections ---------------------------------------------------------

double l2_norm(const MatrixField& f) {
    double acc = 0.0;
    for (size_t i = 0; i < f.size(); ++i) acc += std::norm(f.data()[i]);
    const double mean = acc / (static_cast<double>(f.N()) * f.N());
    return std::sqrt(mean * f.grid().metric_area);
}

complexd l2_inner(const MatrixField& f, const MatrixField& g) {
    check_same_shape(f, g, "l2_inner");
    complexd acc{};
    for (size_t i = 0; i < f.size(); ++i)
        acc += f.data()[i] * std::conj(g.data()[i]);
    return acc / (static_cast<double>(f.N()) * f.N()) * f.grid().metric_area;
}

double c0_norm(const MatrixField& f) {
    const int blk = f.rank() * f.rank();
    const size_t pts = f.size() / blk;
    double worst = 0.0;
    for (size_t p = 0; p < pts; ++p) {
        double acc = 0.0;
        for (int e = 0; e < blk; ++e) acc += std::norm(f.data()[p * blk + e]);
        worst = std::max(worst, acc);
    }
    return std::sqrt(worst);
}

MatrixField hermitize(const MatrixField& f) {
    MatrixField out = f;
    const int n = f.rank();
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j) {
            complexd* p = out.at(i, j);
            for (int r = 0; r < n; ++r)
                for (int c = r; c < n; ++c) {
                    const complexd v = 0.5 * (p[r * n + c] + std::conj(p[c * n + r]));
                    p[r * n + c] = v;
                    p[c * n + r] = std::conj(v);
                }
        }
    return out;
}

MatrixField traceless(const MatrixField& f) {
    MatrixField out = f;
    const int n = f.rank();
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j) {
            complexd* p = out.at(i, j);
            complexd tr{};
            for (int r = 0; r < n; ++r) tr += p[r * n + r];
            tr /= static_cast<double>(n);
            for (int r = 0; r < n; ++r) p[r * n + r] -= tr;
        }
    return out;
}

Eigen::VectorXcd diag_average(const MatrixField& f) {
    const int n = f.rank();
    Eigen::VectorXcd avg = Eigen::VectorXcd::Zero(n);
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j) {
            const complexd* p = f.at(i, j);
            for (int r = 0; r < n; ++r) avg(r) += p[r * n + r];
        }
    return avg / (static_cast<double>(f.N()) * f.N());
}

MatrixField project_herm_perp(const MatrixField& s) {
    MatrixField out = s;
    const Eigen::VectorXcd avg = diag_average(s);
    const int n = s.rank();
    for (int i = 0; i < s.N(); ++i)
        for (int j = 0; j < s.N(); ++j) {
            complexd* p = out.at(i, j);
            for (int r = 0; r < n; ++r) p[r * n + r] -= avg(r);
        }
    return out;
}

double herm_deviation(const MatrixField& f) {
    MatrixField d = f - f.adjoint();
    return c0_norm(d);
}

MatrixField random_matrix_field(const FiberGrid& grid, int rank, int max_mode,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixField modes(grid, rank);
    const int N = grid.N;
    for (int m = -max_mode; m <= max_mode; ++m)
        for (int nh = -max_mode; nh <= max_mode; ++nh) {
            const int k1 = (m + N) % N, k2 = (nh + N) % N;
            complexd* p = modes.at(k1, k2);
            for (int e = 0; e < rank * rank; ++e)
                p[e] = complexd(gauss(rng), gauss(rng));
        }
    return from_modes(modes);
}

MatrixField random_herm_perp(const FiberGrid& grid, int rank, double amplitude_c0,
                             int max_mode, std::uint64_t seed) {
    MatrixField s = project_herm_perp(
        traceless(hermitize(random_matrix_field(grid, rank, max_mode, seed))));
    const double c0 = c0_norm(s);
    if (c0 > 0.0) s *= complexd(amplitude_c0 / c0, 0.0);
    return s;
}

// ---- Hermitian functional calculus -------------------------------------------------

namespace {

template <typename Fn>
MatrixField herm_apply(const MatrixField& s, Fn fn) {
    const int n = s.rank();
    MatrixField out(s.grid(), n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
    for (int i = 0; i < s.N(); ++i)
        for (int j = 0; j < s.N(); ++j) {
            es.compute(s.matrix_at(i, j));
            Eigen::VectorXd lam = es.eigenvalues();
            Eigen::VectorXcd flam(n);
            for (int k = 0; k < n; ++k) flam(k) = fn(lam(k));
            out.set_matrix(i, j, es.eigenvectors() * flam.asDiagonal() *
                                     es.eigenvectors().adjoint());
        }
    return out;
}

} // namespace

MatrixField herm_exp(const MatrixField& s) {
    return herm_apply(s, [](double l) { return std::exp(l); });
}

MatrixField herm_log(const MatrixField& p) {
    return herm_apply(p, [](double l) {
        if (l <= 0.0) throw Error("herm_log: matrix not positive definite");
        return std::log(l);
    });
}

MatrixField herm_pow(const MatrixField& p, double a) {
    return herm_apply(p, [a](double l) {
        if (l <= 0.0) throw Error("herm_pow: matrix not positive definite");
        return std::pow(l, a);
    });
}

MatrixField upsilon(const MatrixField& s, const MatrixField& x) {
    check_same_shape(s, x, "upsilon");
    const int n = s.rank();
    MatrixField out(s.grid(), n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;
    auto psi = [](double t) {
        if (std::abs(t) < 1e-6) return 1.0 + t / 2.0 + t * t / 6.0;
        return std::expm1(t) / t;
    };
    for (int i = 0; i < s.N(); ++i)
        for (int j = 0; j < s.N(); ++j) {
            es.compute(s.matrix_at(i, j));
            const Eigen::MatrixXcd U = es.eigenvectors();
            const Eigen::VectorXd lam = es.eigenvalues();
            Eigen::MatrixXcd xh = U.adjoint() * x.matrix_at(i, j) * U;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) xh(r, c) *= psi(lam(r) - lam(c));
            out.set_matrix(i, j, U * xh * U.adjoint());
        }
    return out;
}

// ---- snapshots -----------------------------------------------------------------------

void write_snapshot(const std::string& path,
                    const std::vector<const MatrixField*>& fields,
                    const std::vector<complexd>& lifts,
                    const std::string& provenance) {
    if (fields.empty()) throw Error("write_snapshot: no fields");
    const int N = fields[0]->N(), n = fields[0]->rank();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_snapshot: cannot open " + path);
    const char magic[8] = {'H', 'Y', 'M', 'L', 'A', 'B', '1', '\0'};
    out.write(magic, 8);
    const std::uint32_t hdr[3] = {static_cast<std::uint32_t>(N),
                                  static_cast<std::uint32_t>(n),
                                  static_cast<std::uint32_t>(fields.size())};
    out.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
    for (const MatrixField* f : fields) {
        if (f->N() != N || f->rank() != n)
            throw Error("write_snapshot: inconsistent field shapes");
        out.write(reinterpret_cast<const char*>(f->data()),
                  static_cast<std::streamsize>(f->size() * sizeof(complexd)));
    }
    out.close();

    nlohmann::ordered_json side;
    side["tau"] = {fields[0]->grid().tau.real(), fields[0]->grid().tau.imag()};
    nlohmann::ordered_json jl = nlohmann::ordered_json::array();
    for (const auto& q : lifts) jl.push_back({q.real(), q.imag()});
    side["lifts"] = jl;
    side["provenance"] = provenance;
    std::ofstream sj(path + ".json");
    sj << side.dump(2) << "\n";
}

std::vector<MatrixField> read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_snapshot: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "HYMLAB1\0", 8) != 0)
        throw Error("read_snapshot: bad magic in " + path);
    std::uint32_t hdr[3];
    in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));

    FiberGrid grid;
    grid.N = static_cast<int>(hdr[0]);
    std::ifstream sj(path + ".json");
    if (sj) {
        nlohmann::json side;
        sj >> side;
        if (side.contains("tau"))
            grid.tau = complexd(side["tau"][0].get<double>(),
                                side["tau"][1].get<double>());
    }

    std::vector<MatrixField> fields;
    for (std::uint32_t f = 0; f < hdr[2]; ++f) {
        MatrixField m(grid, static_cast<int>(hdr[1]));
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(m.size() * sizeof(complexd)));
        if (!in) throw Error("read_snapshot: truncated file " + path);
        fields.push_back(std::move(m));
    }
    return fields;
}

} // namespace hymlab
