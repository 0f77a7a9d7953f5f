// poincare_dense.hpp -- test-only dense oracle for the Poincare constant:
// the discretized dbar_{A0} on an explicit orthonormal basis of Herm_0^perp,
// smallest singular value by a dense normal-matrix eigensolve.  Independent of
// the mode-formula code path it cross-checks.
#pragma once

#include "flows.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace hymlab::testing {

// smallest singular value of dbar_{A0} on Herm_0^perp at grid resolution,
// via an explicit orthonormal basis and a dense normal-matrix eigensolve
inline double dense_poincare_lambda_min(const SpectralData& sd, const FiberGrid& grid) {
    const int N = grid.N, n = sd.rank();
    const size_t pts = static_cast<size_t>(N) * N;

    // orthonormal basis of Herm_0^perp (L^2 inner product, area 1):
    //  - per point, per pair j<k: sqrt(N^2/2)(e_jk + e_kj), sqrt(N^2/2) i(e_jk - e_kj)
    //  - trace-free diagonals: diag pattern d_m (orthonormal rows of the
    //    (n-1)-dim trace-free space) x zero-mean position basis
    std::vector<MatrixField> basis;
    const double scale_off = N / std::sqrt(2.0);
    for (size_t p = 0; p < pts; ++p) {
        const int i = static_cast<int>(p) / N, j = static_cast<int>(p) % N;
        for (int r = 0; r < n; ++r)
            for (int c = r + 1; c < n; ++c) {
                MatrixField re(grid, n), im(grid, n);
                re(i, j, r, c) = scale_off;
                re(i, j, c, r) = scale_off;
                im(i, j, r, c) = complexd(0.0, scale_off);
                im(i, j, c, r) = complexd(0.0, -scale_off);
                basis.push_back(std::move(re));
                basis.push_back(std::move(im));
            }
    }
    // zero-mean position basis: v_p = (delta_p - delta_{p+1})-chain,
    // orthonormalized by Gram-Schmidt in closed form (difference basis)
    // -- easier: take the N^2-1 vectors delta_p - delta_0 and orthonormalize.
    {
        Eigen::MatrixXd raw(pts, pts - 1);
        raw.setZero();
        for (size_t p = 1; p < pts; ++p) {
            raw(0, p - 1) = -1.0;
            raw(p, p - 1) = 1.0;
        }
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw)
                                      .householderQ() *
                                  Eigen::MatrixXd::Identity(pts, pts - 1);
        // trace-free diagonal patterns
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n - 1);
        for (int m = 0; m < n - 1; ++m) {
            for (int r = 0; r <= m; ++r) D(r, m) = 1.0;
            D(m + 1, m) = -(m + 1.0);
            D.col(m).normalize();
        }
        for (int m = 0; m < n - 1; ++m)
            for (size_t col = 0; col + 1 < pts; ++col) {
                MatrixField b(grid, n);
                for (size_t p = 0; p < pts; ++p) {
                    const int i = static_cast<int>(p) / N, j = static_cast<int>(p) % N;
                    for (int r = 0; r < n; ++r)
                        b(i, j, r, r) = Q(p, col) * D(r, m) * N;
                }
                basis.push_back(std::move(b));
            }
    }

    // columns of the operator in this basis, measured with the dzbar weight
    const double w = dzbar_norm_factor(grid);
    const size_t dim = basis.size();
    const size_t out_dim = 2 * pts * n * n;
    Eigen::MatrixXd M(out_dim, dim);
    for (size_t k = 0; k < dim; ++k) {
        const MatrixField d = dbar(basis[k], sd.lifts());
        for (size_t e = 0; e < pts * n * n; ++e) {
            M(2 * e, k) = w * d.data()[e].real() / N;
            M(2 * e + 1, k) = w * d.data()[e].imag() / N;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M.transpose() * M);
    return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}


} // namespace hymlab::testing
