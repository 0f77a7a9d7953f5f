// Semi-flat model: the hyperkaehler triple, closedness, the degeneration
// identity, and the dz frame.
//
// The wedge-square sign convention is verified here once and encoded: in the
// frame orientation dx1^dx2^dy1^dy2, every det-1 Hessian gives
//   omega_I^2 = omega_J^2 = omega_K^2 = -2  and  omega_X ^ omega_Y = 0 (X != Y)
// (all three squares equal; the mixed products vanish).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "semiflat.hpp"

#include <cmath>
#include <random>

using namespace hymlab;

namespace {

// top coefficient of a wedge of two antisymmetric coefficient matrices,
// relative to e0^e1^e2^e3 (local oracle, independent of library code)
double wedge_top(const Eigen::Matrix4d& A, const Eigen::Matrix4d& B) {
    static const int pair[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    static const int comp[6][2] = {{2, 3}, {1, 3}, {1, 2}, {0, 3}, {0, 2}, {0, 1}};
    static const int sign[6] = {1, -1, 1, 1, -1, 1};
    double top = 0.0;
    for (int k = 0; k < 6; ++k)
        top += sign[k] * A(pair[k][0], pair[k][1]) * B(comp[k][0], comp[k][1]);
    return top;
}

} // namespace

TEST_CASE("identity Hessian, s = 1: the standard quaternionic triple") {
    auto id = make_potential("identity");
    const SemiFlatTriple T = triple_at(*id, {0.0, 0.0}, 1.0);

    Eigen::Matrix4d wI = Eigen::Matrix4d::Zero();
    wI(0, 1) = 1.0;
    wI(1, 0) = -1.0;
    wI(2, 3) = -1.0;
    wI(3, 2) = 1.0;
    CHECK((T.omega_I - wI).norm() < 1e-15);

    const Eigen::Matrix4d id4 = Eigen::Matrix4d::Identity();
    CHECK((T.g - id4).norm() < 1e-15);
    CHECK((T.I * T.I + id4).norm() < 1e-15);
    CHECK((T.J * T.J + id4).norm() < 1e-15);
    CHECK((T.K * T.K + id4).norm() < 1e-15);
    CHECK((T.I * T.J - T.K).norm() < 1e-15);
    CHECK((T.J * T.I + T.K).norm() < 1e-15); // anticommute
}

TEST_CASE("quaternion relations and compatibility at random points") {
    auto phi = make_potential("tau_linear", 0.1);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(-0.25, 0.25);
    std::uniform_real_distribution<double> us(0.1, 2.0);
    std::uniform_real_distribution<double> uv(-1.0, 1.0);
    const Eigen::Matrix4d id4 = Eigen::Matrix4d::Identity();

    for (int k = 0; k < 50; ++k) {
        const BasePoint b{ux(rng), ux(rng)};
        const double s = us(rng);
        const SemiFlatTriple T = triple_at(*phi, b, s);

        CHECK((T.I * T.I + id4).norm() < 1e-12);
        CHECK((T.J * T.J + id4).norm() < 1e-12);
        CHECK((T.K - T.I * T.J).norm() < 1e-12);

        // omega_X(u,v) = g(Xu, v) for 100 random vector pairs
        for (int v = 0; v < 100; ++v) {
            Eigen::Vector4d a, c;
            for (int i = 0; i < 4; ++i) {
                a(i) = uv(rng);
                c(i) = uv(rng);
            }
            CHECK(std::abs(a.dot(T.omega_I * c) - (T.I * a).dot(T.g * c)) < 1e-12);
            CHECK(std::abs(a.dot(T.omega_J * c) - (T.J * a).dot(T.g * c)) < 1e-12);
            CHECK(std::abs(a.dot(T.omega_K * c) - (T.K * a).dot(T.g * c)) < 1e-12);
        }

        // g symmetric positive definite with det 1; forms antisymmetric
        CHECK((T.g - T.g.transpose()).norm() < 1e-13);
        CHECK(std::abs(T.g.determinant() - 1.0) < 1e-12);
        CHECK(T.g.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > 0.0);
        CHECK((T.omega_I + T.omega_I.transpose()).norm() < 1e-13);
        CHECK((T.omega_J + T.omega_J.transpose()).norm() < 1e-13);
        CHECK((T.omega_K + T.omega_K.transpose()).norm() < 1e-13);

        // wedge squares: all equal -2; mixed products vanish
        CHECK(wedge_top(T.omega_I, T.omega_I) == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(wedge_top(T.omega_J, T.omega_J) == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(wedge_top(T.omega_K, T.omega_K) == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(std::abs(wedge_top(T.omega_I, T.omega_J)) < 1e-12);
        CHECK(std::abs(wedge_top(T.omega_I, T.omega_K)) < 1e-12);
        CHECK(std::abs(wedge_top(T.omega_J, T.omega_K)) < 1e-12);
    }
}

TEST_CASE("nonpositive scale and domain errors") {
    auto id = make_potential("identity");
    CHECK_THROWS_AS(triple_at(*id, {0.0, 0.0}, 0.0), NonpositiveScale);
    CHECK_THROWS_AS(triple_at(*id, {0.0, 0.0}, -1.0), NonpositiveScale);
    CHECK_THROWS_AS(triple_at(*id, {9.0, 0.0}, 1.0), DomainError);
}

TEST_CASE("closedness residuals") {
    auto id = make_potential("identity");
    CHECK(closedness_residual(*id, 0.7, 1.0 / 16) == 0.0); // constant coefficients

    auto phi = make_potential("tau_linear", 0.1);
    const double r1 = closedness_residual(*phi, 0.7, 1.0 / 32);
    const double r2 = closedness_residual(*phi, 0.7, 1.0 / 64);
    // d omega_J vanishes by symmetry of thirds; the discrete residual is O(h^2)
    CHECK(r2 < 0.3 * r1);
    CHECK_THROWS_AS(closedness_residual(*phi, 0.7, 1.0), StepTooLarge);
}

TEST_CASE("degeneration identity (1+t) s omega_I = base + t SF") {
    auto phi = make_potential("tau_linear", 0.1);
    const BasePoint b{0.1, 0.2};

    for (double t : {1.0, 0.5, 0.25, 0.1, 0.01}) {
        const auto params = DegenerationParams::from_t(t);
        CHECK(params.relation_residual() < 1e-14);
        const Eigen::Matrix4d lhs = degeneration_form(*phi, b, params);
        const Eigen::Matrix4d rhs = base_form() + t * semiflat_form();
        CHECK((lhs - rhs).norm() < 1e-14);
    }

    CHECK(DegenerationParams::from_t(1.0).s == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(DegenerationParams::from_t(0.25).s == doctest::Approx(1.0 / std::sqrt(5.0)));

    // t -> 0 leaves the base form only
    const auto small = DegenerationParams::from_t(1e-8);
    CHECK((degeneration_form(*phi, b, small) - base_form()).norm() < 1e-7);

    CHECK_THROWS_AS(DegenerationParams::from_t(0.0), NonpositiveScale);
    CHECK_THROWS_AS(degeneration_form(*phi, b, DegenerationParams{0.5, 0.9}),
                    NonpositiveScale);
}

TEST_CASE("dz frame") {
    auto id = make_potential("identity");
    const Eigen::Vector4cd dz = dz_frame(*id, {0.3, 0.1}, 0.8);
    // constant tau: no dw term at any y1
    CHECK(std::abs(dz(0)) < 1e-12);
    CHECK(std::abs(dz(1)) < 1e-12);
    CHECK(std::abs(dz(2) - complexd(0.0, 1.0)) < 1e-12);
    CHECK(std::abs(dz(3) - 1.0) < 1e-15);

    auto phi = make_potential("tau_linear", 0.1);
    const BasePoint b{0.1, -0.05};
    const Eigen::Vector4cd dz0 = dz_frame(*phi, b, 0.0);
    CHECK(std::abs(dz0(0)) < 1e-12);
    CHECK(std::abs(dz0(1)) < 1e-12);

    // y1 = 0.5: dw-component = 0.5 * dtau/dw with dtau/dw = eps exactly
    const Eigen::Vector4cd dz5 = dz_frame(*phi, b, 0.5);
    const Hess2 H = phi->hess(b.x1, b.x2);
    const complexd expect_dx1 = 0.5 * 0.1 * complexd(1.0, H.h12);
    const complexd expect_dx2 = 0.5 * 0.1 * complexd(0.0, H.h22);
    CHECK(std::abs(dz5(0) - expect_dx1) < 1e-8);
    CHECK(std::abs(dz5(1) - expect_dx2) < 1e-8);
    CHECK(std::abs(dz5(2) - tau_at(*phi, b).tau) < 1e-14);
}
