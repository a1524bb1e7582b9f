#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "mscat/quadrature.hpp"
#include "mscat/specfun.hpp"

using namespace mscat;
using Catch::Approx;

TEST_CASE("spherical bessel j: closed-form values") {
    CHECK(sph_bessel_j(0, 0.0) == 1.0);
    CHECK(sph_bessel_j(3, 0.0) == 0.0);
    CHECK(sph_bessel_j(0, pi) == Approx(0.0).margin(1e-15));
    // l = 1 closed form sin x / x^2 - cos x / x
    const double x = 1.5;
    CHECK(sph_bessel_j(1, x) == Approx(std::sin(x) / (x * x) - std::cos(x) / x).epsilon(1e-14));
    CHECK_THROWS_AS(sph_bessel_j(0, -1.0), std::domain_error);
}

TEST_CASE("spherical bessel y: closed-form values and domain") {
    CHECK(sph_bessel_y(0, pi) == Approx(1.0 / pi).epsilon(1e-14));
    CHECK(sph_bessel_y(0, pi / 2.0) == Approx(0.0).margin(1e-16));
    const double x = 2.0;
    CHECK(sph_bessel_y(1, x) == Approx(-std::cos(x) / (x * x) - std::sin(x) / x).epsilon(1e-14));
    CHECK_THROWS_AS(sph_bessel_y(0, 0.0), std::domain_error);
    CHECK_THROWS_AS(sph_bessel_y(2, -0.5), std::domain_error);
}

TEST_CASE("bessel cross-product Wronskian j_l y_l' - j_l' y_l = 1/x^2") {
    for (int l = 0; l <= 6; ++l) {
        for (double x : {0.1, 0.37, 1.0, 2.9, 5.0, 11.3, 24.0, 50.0}) {
            const double w = sph_bessel_j(l, x) * sph_bessel_y_deriv(l, x) -
                             sph_bessel_j_deriv(l, x) * sph_bessel_y(l, x);
            CHECK(w == Approx(1.0 / (x * x)).epsilon(1e-10));
        }
    }
}

TEST_CASE("bessel recurrence f_{l-1} + f_{l+1} = (2l+1)/x f_l") {
    for (int l = 1; l <= 6; ++l) {
        for (double x : {0.1, 0.8, 3.3, 7.0, 20.0, 50.0}) {
            const double lhs_j = sph_bessel_j(l - 1, x) + sph_bessel_j(l + 1, x);
            const double rhs_j = (2.0 * l + 1.0) / x * sph_bessel_j(l, x);
            CHECK(lhs_j == Approx(rhs_j).epsilon(1e-10).margin(1e-300));
            const double lhs_y = sph_bessel_y(l - 1, x) + sph_bessel_y(l + 1, x);
            const double rhs_y = (2.0 * l + 1.0) / x * sph_bessel_y(l, x);
            CHECK(lhs_y == Approx(rhs_y).epsilon(1e-10));
        }
    }
}

TEST_CASE("spherical harmonics: fixed values") {
    const auto any = UnitDirection::from_angles(1.1, 2.3);
    CHECK(sph_harm({0, 0}, any).real() == Approx(1.0 / std::sqrt(four_pi)).epsilon(1e-14));
    CHECK(sph_harm({0, 0}, any).imag() == 0.0);

    const auto pole = UnitDirection::from_angles(0.0, 0.0);
    CHECK(sph_harm({1, 0}, pole).real() == Approx(std::sqrt(3.0 / four_pi)).epsilon(1e-14));

    // explicit l = 2, m = 1 closed form: -sqrt(15/8pi) sin th cos th e^{i phi}
    const double th = pi / 3.0, ph = 1.0;
    const auto n = UnitDirection::from_angles(th, ph);
    const cplx expected = -std::sqrt(15.0 / (8.0 * pi)) * std::sin(th) * std::cos(th) *
                          std::polar(1.0, ph);
    const cplx got = sph_harm({2, 1}, n);
    CHECK(std::abs(got - expected) < 1e-14);
}

TEST_CASE("spherical harmonics: conjugation symmetry Y_{l,-m} = (-1)^m conj Y_{l,m}") {
    const auto dirs = {UnitDirection::from_angles(0.3, 0.9), UnitDirection::from_angles(1.9, 4.4),
                       UnitDirection::from_cartesian(0.3, -0.8, 0.52)};
    for (const auto& n : dirs)
        for (int l = 0; l <= 5; ++l)
            for (int m = 1; m <= l; ++m) {
                const cplx lhs = sph_harm({l, -m}, n);
                const cplx rhs = (m % 2 == 0 ? 1.0 : -1.0) * std::conj(sph_harm({l, m}, n));
                CHECK(std::abs(lhs - rhs) < 1e-14);
            }
}

TEST_CASE("spherical harmonics: orthonormality by quadrature") {
    const SphereGrid grid(24, 24);
    for (int l = 0; l <= 4; ++l)
        for (int m = -l; m <= l; ++m)
            for (int lp = l; lp <= 4; ++lp)
                for (int mp = -lp; mp <= lp; ++mp) {
                    const cplx overlap = grid.integrate([&](const UnitDirection& n) {
                        return std::conj(sph_harm({lp, mp}, n)) * sph_harm({l, m}, n);
                    });
                    const double expected = (l == lp && m == mp) ? 1.0 : 0.0;
                    CHECK(std::abs(overlap - expected) < 1e-8);
                }
}

TEST_CASE("clebsch-gordan: fixed values and selection rules") {
    CHECK(clebsch_gordan(0, 0, 0, 0, 0, 0) == 1.0);
    // magnetic selection rule m1 = m + m2
    CHECK(clebsch_gordan(2, 1, 1, 1, 1, 1) == 0.0);
    CHECK(clebsch_gordan(1, 0, 1, 1, 1, 0) == 0.0);
    // triangle rule
    CHECK(clebsch_gordan(3, 0, 1, 0, 1, 0) == 0.0);
    // <1 0 1 0 | 0 0> = -1/sqrt(3)
    CHECK(clebsch_gordan(0, 0, 1, 0, 1, 0) == Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));
    // coupling with the trivial monopole
    for (int l = 0; l <= 4; ++l)
        for (int m = -l; m <= l; ++m) CHECK(clebsch_gordan(l, m, l, m, 0, 0) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("clebsch-gordan: completeness sum over couplings") {
    // sum_{l1} C^2 over all couplings of fixed (l m, l2 m2) equals 1
    for (int l = 0; l <= 3; ++l)
        for (int m = -l; m <= l; ++m)
            for (int l2 = 0; l2 <= 3; ++l2)
                for (int m2 = -l2; m2 <= l2; ++m2) {
                    double sum = 0.0;
                    for (int l1 = std::abs(l - l2); l1 <= l + l2; ++l1) {
                        const double c = clebsch_gordan(l1, m + m2, l, m, l2, m2);
                        sum += c * c;
                    }
                    CHECK(sum == Approx(1.0).epsilon(1e-12));
                }
}

TEST_CASE("gaunt_q: monopole coupling and parity rule") {
    for (int l = 0; l <= 4; ++l)
        for (int m = -l; m <= l; ++m)
            CHECK(gaunt_q(l, m, 0, 0, l, m) == Approx(std::sqrt(four_pi)).epsilon(1e-13));
    // l + l1 + l2 odd vanishes
    CHECK(gaunt_q(1, 0, 1, 0, 1, 0) == 0.0);
    CHECK(gaunt_q(2, 0, 1, 0, 0, 0) == 0.0);
    // magnetic selection rule
    CHECK(gaunt_q(2, 2, 1, 0, 1, 1) == 0.0);
}

TEST_CASE("gaunt_q equals 4pi times the triple-harmonic quadrature") {
    const SphereGrid grid(20, 20);
    double max_imag = 0.0;
    for (int l1 = 0; l1 <= 2; ++l1)
        for (int m1 = -l1; m1 <= l1; ++m1)
            for (int l2 = 0; l2 <= 2; ++l2)
                for (int m2 = -l2; m2 <= l2; ++m2)
                    for (int l = 0; l <= 2; ++l)
                        for (int m = -l; m <= l; ++m) {
                            const cplx integral = grid.integrate([&](const UnitDirection& n) {
                                return std::conj(sph_harm({l1, m1}, n)) * sph_harm({l2, m2}, n) *
                                       sph_harm({l, m}, n);
                            });
                            max_imag = std::max(max_imag, std::abs(integral.imag()));
                            CHECK(gaunt_q(l1, m1, l2, m2, l, m) ==
                                  Approx(four_pi * integral.real()).margin(1e-8));
                        }
    CHECK(max_imag < 1e-10); // the symbols are real
}

TEST_CASE("gaunt table matches direct evaluation") {
    const GauntTable table(2);
    for (int l = 0; l <= 2; ++l)
        for (int m = -l; m <= l; ++m)
            for (int l1 = 0; l1 <= 2; ++l1)
                for (int m1 = -l1; m1 <= l1; ++m1)
                    for (int l2 = std::abs(l1 - l); l2 <= l1 + l; ++l2)
                        CHECK(table.q(l, m, l1, m1, l2) == gaunt_q(l1, m1, l2, m1 - m, l, m));
}

TEST_CASE("unit direction: cartesian round trip and validation") {
    const auto n = UnitDirection::from_cartesian(1.0, -2.0, 0.5);
    double x = 0.0, y = 0.0, z = 0.0;
    n.to_cartesian(x, y, z);
    const double r = std::sqrt(1.0 + 4.0 + 0.25);
    CHECK(x == Approx(1.0 / r).epsilon(1e-14));
    CHECK(y == Approx(-2.0 / r).epsilon(1e-14));
    CHECK(z == Approx(0.5 / r).epsilon(1e-14));
    CHECK(std::hypot(n.sin_theta, n.cos_theta) == Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(UnitDirection::from_cartesian(0.0, 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(UnitDirection::from_angles(-0.1, 0.0), std::domain_error);
    // in-plane vectors keep cos(theta) exactly zero
    CHECK(UnitDirection::from_cartesian(0.3, -4.0, 0.0).cos_theta == 0.0);
}
