// fiber_grid.hpp -- discrete calculus on the torus fiber E = R^2/Z^2.
//
// Fields are N x N grids of n x n complex matrices sampled at y^k = i/N, with
// spectral (FFT) differentiation.  Fiber conventions used throughout:
//   z = y^2 + tau y^1,  dz = tau dy^1 + dy^2
//   d/dzbar acts on the plane wave e^{2 pi i (m y^1 + nh y^2)} by
//       pi (tau nh - m) / Im(tau)
//   d/dz by -conj of that symbol.
// The area form is dy^1 dy^2 (area 1); L^2 / C^0 norms use pointwise Frobenius
// norms.  The norm of dzbar in the tau-compatible flat fiber metric is
// sqrt(2 Im tau); it enters only where (0,1)-form norms are load-bearing
// (the Poincare constant).

#pragma once

#include "errors.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace hymlab {

using complexd = std::complex<double>;

struct FiberGrid {
    int N = 64;
    complexd tau{0.0, 1.0};
    double metric_area = 1.0;

    void validate() const {
        if (N < 8 || N % 2 != 0)
            throw ConfigError("FiberGrid: N must be even and >= 8");
        if (tau.imag() <= 0.0)
            throw ConfigError("FiberGrid: Im(tau) must be > 0");
    }
    bool same_as(const FiberGrid& o) const {
        return N == o.N && tau == o.tau;
    }
};

// integer mode of FFT bin k
inline int mode_of(int k, int N) { return (k < N / 2) ? k : k - N; }

class MatrixField {
  public:
    MatrixField() = default;
    MatrixField(const FiberGrid& grid, int rank)
        : grid_(grid), n_(rank),
          a_(static_cast<size_t>(grid.N) * grid.N * rank * rank, complexd{}) {
        grid_.validate();
    }

    static MatrixField constant(const FiberGrid& grid, const Eigen::MatrixXcd& m);
    static MatrixField identity(const FiberGrid& grid, int rank);

    const FiberGrid& grid() const { return grid_; }
    int N() const { return grid_.N; }
    int rank() const { return n_; }
    size_t size() const { return a_.size(); }
    bool empty() const { return a_.empty(); }

    complexd* data() { return a_.data(); }
    const complexd* data() const { return a_.data(); }

    complexd* at(int iy1, int iy2) {
        return a_.data() + (static_cast<size_t>(iy1) * grid_.N + iy2) * n_ * n_;
    }
    const complexd* at(int iy1, int iy2) const {
        return a_.data() + (static_cast<size_t>(iy1) * grid_.N + iy2) * n_ * n_;
    }
    complexd& operator()(int iy1, int iy2, int r, int c) {
        return at(iy1, iy2)[r * n_ + c];
    }
    const complexd& operator()(int iy1, int iy2, int r, int c) const {
        return at(iy1, iy2)[r * n_ + c];
    }

    Eigen::MatrixXcd matrix_at(int iy1, int iy2) const;
    void set_matrix(int iy1, int iy2, const Eigen::MatrixXcd& m);

    MatrixField& operator+=(const MatrixField& o);
    MatrixField& operator-=(const MatrixField& o);
    MatrixField& operator*=(complexd c);

    friend MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
    friend MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
    friend MatrixField operator*(complexd c, MatrixField a) { return a *= c; }

    // pointwise matrix product
    friend MatrixField operator*(const MatrixField& a, const MatrixField& b);

    MatrixField adjoint() const;
    MatrixField inverse(double cond_guard = 0.0) const;

  private:
    FiberGrid grid_;
    int n_ = 0;
    std::vector<complexd> a_;
};

MatrixField commutator(const MatrixField& a, const MatrixField& b);

// ---- spectral operations ----------------------------------------------------

// Fourier coefficients chat(m,nh) with f = sum chat e^{2 pi i(m y1 + nh y2)},
// stored in FFT bin order.
MatrixField to_modes(const MatrixField& f);
MatrixField from_modes(const MatrixField& c);

MatrixField deriv_y1(const MatrixField& f);
MatrixField deriv_y2(const MatrixField& f);
// deriv_y1(a2) - deriv_y2(a1) in one inverse transform
MatrixField curl_y(const MatrixField& a1, const MatrixField& a2);
// dzbar(g) and dz(g^*) from a single forward transform of g
void deriv_zbar_and_z_adjoint(const MatrixField& g, MatrixField& dzbar_g,
                              MatrixField& dz_gstar);

// ---- plane-major spectral access (hot loops) ---------------------------------
// Layout: blk planes of N*N values, plane e contiguous at [e * N * N].
// Exposed so flow kernels can run without per-call transposes.

enum class SpectralSymbol { d1, d2, dz, dzbar, dealias };

const std::vector<complexd>& spectral_table(const FiberGrid& g, SpectralSymbol kind);
// dealias mask keeping |m|, |nh| <= cut (cut <= N/3 is alias-safe for products)
const std::vector<complexd>& spectral_dealias_table(const FiberGrid& g, int cut);
void plane_fft(const FiberGrid& g, int blk, int sign, complexd* in, complexd* out);
void plane_pack(const MatrixField& f, complexd* out);
void plane_unpack(const FiberGrid& g, int rank, const complexd* in, MatrixField& out);
MatrixField deriv_z(const MatrixField& f);
MatrixField deriv_zbar(const MatrixField& f);
MatrixField dealias_23(const MatrixField& f);
MatrixField dealias_modes(const MatrixField& f, int cut); // cut <= 0 -> N/3

// Coupled (0,1)-derivative of an endomorphism field:
// dzbar f + [-pi Q / Im tau, f] with Q = diag(lifts).
MatrixField dbar(const MatrixField& f, const std::vector<complexd>& lifts);

inline double dzbar_norm_factor(const FiberGrid& g) {
    return std::sqrt(2.0 * g.tau.imag());
}

// ---- norms and projections --------------------------------------------------

double l2_norm(const MatrixField& f);
complexd l2_inner(const MatrixField& f, const MatrixField& g);
double c0_norm(const MatrixField& f);

MatrixField hermitize(const MatrixField& f);
MatrixField traceless(const MatrixField& f);
Eigen::VectorXcd diag_average(const MatrixField& f);
MatrixField project_herm_perp(const MatrixField& s);

double herm_deviation(const MatrixField& f); // max |f - f^*| pointwise

// deterministic band-limited random fields
MatrixField random_matrix_field(const FiberGrid& grid, int rank, int max_mode,
                                std::uint64_t seed);
MatrixField random_herm_perp(const FiberGrid& grid, int rank, double amplitude_c0,
                             int max_mode, std::uint64_t seed);

// ---- pointwise Hermitian functional calculus --------------------------------

MatrixField herm_exp(const MatrixField& s);           // e^s, s Hermitian
MatrixField herm_log(const MatrixField& p);           // log of positive Hermitian
MatrixField herm_pow(const MatrixField& p, double a); // p^a, p positive Hermitian

// Upsilon(s) X = ((e^{ad_s} - 1)/ad_s)(X) via the eigenbasis of s; the
// removable singularity uses a series for small gaps.
MatrixField upsilon(const MatrixField& s, const MatrixField& x);

// ---- binary snapshots --------------------------------------------------------
// header: magic "HYMLAB1\0", u32 N, u32 n, u32 field count; then row-major
// complex-double entries per field; JSON sidecar written next to the file.

void write_snapshot(const std::string& path,
                    const std::vector<const MatrixField*>& fields,
                    const std::vector<complexd>& lifts,
                    const std::string& provenance);
std::vector<MatrixField> read_snapshot(const std::string& path);

} // namespace hymlab
