#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mscat/errors.hpp"

// Angular-momentum special functions: spherical Bessel functions j_l / y_l,
// complex spherical harmonics Y_lm, Clebsch-Gordan coefficients and the Gaunt
// symbols Q that couple channels on different centers.
//
// Phase convention (fixed here, used everywhere in the library): Y_lm carries
// the Condon-Shortley phase, i.e. Y_{l,-m} = (-1)^m conj(Y_{l,m}).
namespace mscat {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double four_pi = 4.0 * std::numbers::pi;

/// Largest orbital quantum number supported by the coupling coefficients.
inline constexpr int max_coupling_l = 20;

struct AngularIndex {
    int l = 0;
    int m = 0;
    bool valid() const { return l >= 0 && std::abs(m) <= l; }
};

/// Flat index over (l, m) pairs with l <= lmax: 0 <= lm_index < (lmax+1)^2.
constexpr int lm_index(int l, int m) { return l * l + l + m; }
constexpr int lm_count(int lmax) { return (lmax + 1) * (lmax + 1); }

/// A direction on the unit sphere. Stored as (cos th, sin th, phi) so that
/// directions built from Cartesian vectors with an exactly zero component
/// keep that zero exactly (the symmetry block structure relies on it).
struct UnitDirection {
    double cos_theta = 1.0;
    double sin_theta = 0.0; // >= 0
    double phi = 0.0;       // [0, 2 pi)

    static UnitDirection from_angles(double theta, double phi) {
        if (!(theta >= 0.0 && theta <= pi))
            throw std::domain_error("UnitDirection: theta outside [0, pi]");
        UnitDirection n;
        n.cos_theta = std::cos(theta);
        n.sin_theta = std::sin(theta);
        n.phi = wrap_phi(phi);
        return n;
    }

    static UnitDirection from_cartesian(double x, double y, double z) {
        const double r = std::sqrt(x * x + y * y + z * z);
        if (!(r > 0.0) || !std::isfinite(r))
            throw std::domain_error("UnitDirection: zero or non-finite vector");
        UnitDirection n;
        n.cos_theta = z / r;
        n.sin_theta = std::hypot(x, y) / r;
        n.phi = (x == 0.0 && y == 0.0) ? 0.0 : wrap_phi(std::atan2(y, x));
        return n;
    }

    double theta() const { return std::atan2(sin_theta, cos_theta); }

    void to_cartesian(double& x, double& y, double& z) const {
        x = sin_theta * std::cos(phi);
        y = sin_theta * std::sin(phi);
        z = cos_theta;
    }

private:
    static double wrap_phi(double p) {
        p = std::fmod(p, 2.0 * pi);
        if (p < 0.0) p += 2.0 * pi;
        return p;
    }
};

namespace detail {

// Ascending power series around x = 0. Terms decrease monotonically for
// x < l, so there is no cancellation; used below the turning point where
// upward recurrence would be unstable.
inline double sph_bessel_j_series(int l, double x) {
    double pref = 1.0;
    for (int m = 1; m <= l; ++m) pref *= x / (2.0 * m + 1.0);
    const double x2h = -0.5 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        term *= x2h / (k * (2.0 * l + 2.0 * k + 1.0));
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return pref * sum;
}

inline long double factorial_ld(int n) {
    static const auto table = [] {
        std::vector<long double> f(4 * max_coupling_l + 3, 1.0L);
        for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * static_cast<long double>(i);
        return f;
    }();
    return table[static_cast<std::size_t>(n)];
}

// <j1 m1 j2 m2 | J M> by the Racah sum. Factorials are exact in extended
// precision up to the supported cap; positive and negative terms are
// accumulated separately before the final subtraction.
inline double cg_racah(int j1, int m1, int j2, int m2, int J, int M) {
    if (j1 < 0 || j2 < 0 || J < 0) return 0.0;
    if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J) return 0.0;
    if (m1 + m2 != M) return 0.0;
    if (J < std::abs(j1 - j2) || J > j1 + j2) return 0.0;
    if (j1 > max_coupling_l || j2 > max_coupling_l || J > 2 * max_coupling_l)
        throw std::domain_error("clebsch_gordan: angular momentum above supported cap");

    const auto f = [](int n) { return factorial_ld(n); };
    const long double pref =
        sqrtl((2.0L * J + 1.0L) * f(j1 + j2 - J) * f(j1 - j2 + J) * f(-j1 + j2 + J) / f(j1 + j2 + J + 1)) *
        sqrtl(f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2));

    const int zmin = std::max({0, j2 - J - m1, j1 + m2 - J});
    const int zmax = std::min({j1 + j2 - J, j1 - m1, j2 + m2});
    long double pos = 0.0L, neg = 0.0L;
    for (int z = zmin; z <= zmax; ++z) {
        const long double t = 1.0L / (f(z) * f(j1 + j2 - J - z) * f(j1 - m1 - z) * f(j2 + m2 - z) *
                                      f(J - j2 + m1 + z) * f(J - j1 - m2 + z));
        if (z % 2 == 0)
            pos += t;
        else
            neg += t;
    }
    return static_cast<double>(pref * (pos - neg));
}

} // namespace detail

/// Regular spherical Bessel function j_l(x), x >= 0.
inline double sph_bessel_j(int l, double x) {
    if (l < 0 || x < 0.0) throw std::domain_error("sph_bessel_j: requires l >= 0 and x >= 0");
    if (x == 0.0) return l == 0 ? 1.0 : 0.0;
    const double j0 = std::sin(x) / x;
    if (l == 0) return j0;
    if (x < static_cast<double>(l)) return detail::sph_bessel_j_series(l, x);
    // Above the turning point upward recurrence is stable.
    double fm = j0;
    double fc = std::sin(x) / (x * x) - std::cos(x) / x;
    for (int m = 1; m < l; ++m) {
        const double fn = (2.0 * m + 1.0) / x * fc - fm;
        fm = fc;
        fc = fn;
    }
    return fc;
}

/// Irregular spherical Bessel function y_l(x), x > 0 (singular at the origin).
inline double sph_bessel_y(int l, double x) {
    if (l < 0) throw std::domain_error("sph_bessel_y: requires l >= 0");
    if (!(x > 0.0)) throw std::domain_error("sph_bessel_y: requires x > 0");
    double fm = -std::cos(x) / x;
    if (l == 0) return fm;
    double fc = -std::cos(x) / (x * x) - std::sin(x) / x;
    for (int m = 1; m < l; ++m) {
        const double fn = (2.0 * m + 1.0) / x * fc - fm;
        fm = fc;
        fc = fn;
    }
    return fc;
}

/// d/dx j_l(x) via j_l' = j_{l-1} - (l+1)/x j_l (and j_0' = -j_1).
inline double sph_bessel_j_deriv(int l, double x) {
    if (l == 0) return -sph_bessel_j(1, x);
    return sph_bessel_j(l - 1, x) - (l + 1.0) / x * sph_bessel_j(l, x);
}

inline double sph_bessel_y_deriv(int l, double x) {
    if (l == 0) return -sph_bessel_y(1, x);
    return sph_bessel_y(l - 1, x) - (l + 1.0) / x * sph_bessel_y(l, x);
}

/// j_l(x) for all l = 0..lmax in one pass (series per order below the
/// turning point, recurrence above).
inline std::vector<double> sph_bessel_j_all(int lmax, double x) {
    std::vector<double> out(static_cast<std::size_t>(lmax) + 1);
    for (int l = 0; l <= lmax; ++l) out[static_cast<std::size_t>(l)] = sph_bessel_j(l, x);
    return out;
}

inline std::vector<double> sph_bessel_y_all(int lmax, double x) {
    std::vector<double> out(static_cast<std::size_t>(lmax) + 1);
    double fm = -std::cos(x) / x;
    out[0] = fm;
    if (lmax == 0) return out;
    double fc = -std::cos(x) / (x * x) - std::sin(x) / x;
    out[1] = fc;
    for (int m = 1; m < lmax; ++m) {
        const double fn = (2.0 * m + 1.0) / x * fc - fm;
        fm = fc;
        fc = fn;
        out[static_cast<std::size_t>(m) + 1] = fc;
    }
    return out;
}

/// All Y_lm(n) for l <= lmax, indexed by lm_index(l, m). Normalized
/// associated Legendre recurrences; exact zeros at cos th = 0 propagate.
inline std::vector<cplx> sph_harm_all(int lmax, const UnitDirection& n) {
    const double c = n.cos_theta, s = n.sin_theta;
    std::vector<cplx> out(static_cast<std::size_t>(lm_count(lmax)));
    // plm[m][l-m] holds the normalized P~_l^m including Condon-Shortley phase.
    std::vector<std::vector<double>> plm(static_cast<std::size_t>(lmax) + 1);
    double pmm = 1.0 / std::sqrt(four_pi);
    for (int m = 0; m <= lmax; ++m) {
        if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
        auto& col = plm[static_cast<std::size_t>(m)];
        col.resize(static_cast<std::size_t>(lmax - m) + 1);
        col[0] = pmm;
        if (m < lmax) col[1] = std::sqrt(2.0 * m + 3.0) * c * pmm;
        for (int l = m + 2; l <= lmax; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
            const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m) /
                                       (4.0 * static_cast<double>(l - 1) * (l - 1) - 1.0));
            col[static_cast<std::size_t>(l - m)] =
                a * (c * col[static_cast<std::size_t>(l - m - 1)] - b * col[static_cast<std::size_t>(l - m - 2)]);
        }
    }
    for (int m = 0; m <= lmax; ++m) {
        const cplx eimp = std::polar(1.0, m * n.phi);
        const double sgn = (m % 2 == 0) ? 1.0 : -1.0;
        for (int l = m; l <= lmax; ++l) {
            const cplx y = plm[static_cast<std::size_t>(m)][static_cast<std::size_t>(l - m)] * eimp;
            out[static_cast<std::size_t>(lm_index(l, m))] = y;
            if (m > 0) out[static_cast<std::size_t>(lm_index(l, -m))] = sgn * std::conj(y);
        }
    }
    return out;
}

/// Complex spherical harmonic Y_lm(n), Condon-Shortley convention.
inline cplx sph_harm(const AngularIndex& idx, const UnitDirection& n) {
    if (!idx.valid()) throw std::domain_error("sph_harm: invalid (l, m)");
    return sph_harm_all(idx.l, n)[static_cast<std::size_t>(lm_index(idx.l, idx.m))];
}

/// Clebsch-Gordan coefficient C^{l1 m1}_{l m, l2 m2} = <l m, l2 m2 | l1 m1>.
/// Returns 0 outside the selection rules (m1 = m + m2 and triangle).
inline double clebsch_gordan(int l1, int m1, int l, int m, int l2, int m2) {
    return detail::cg_racah(l, m, l2, m2, l1, m1);
}

/// Gaunt symbol Q^{l1 m1}_{l2 m2, l m} = 4 pi Int conj(Y_{l1 m1}) Y_{l2 m2} Y_{l m} dOmega.
/// Real; zero unless m1 = m + m2, l + l1 + l2 is even and the triangle rule holds.
inline double gaunt_q(int l1, int m1, int l2, int m2, int l, int m) {
    if (l1 < 0 || l2 < 0 || l < 0) return 0.0;
    if (std::abs(m1) > l1 || std::abs(m2) > l2 || std::abs(m) > l) return 0.0;
    if (m1 != m + m2) return 0.0;
    if ((l + l1 + l2) % 2 != 0) return 0.0;
    if (l1 < std::abs(l - l2) || l1 > l + l2) return 0.0;
    const double pref = std::sqrt(four_pi * (2.0 * l2 + 1.0) * (2.0 * l + 1.0) / (2.0 * l1 + 1.0));
    return pref * clebsch_gordan(l1, 0, l, 0, l2, 0) * clebsch_gordan(l1, m1, l, m, l2, m2);
}

/// Precomputed Gaunt symbols for channel-matrix assembly: rows (l, m) and
/// columns (l1, m1) up to lmax, summation index l2 up to 2 lmax, with
/// m2 = m1 - m implied. Immutable after construction.
class GauntTable {
public:
    explicit GauntTable(int lmax) : lmax_(lmax), nlm_(lm_count(lmax)), nl2_(2 * lmax + 1) {
        table_.resize(static_cast<std::size_t>(nlm_) * nlm_ * nl2_, 0.0);
        for (int l = 0; l <= lmax; ++l)
            for (int m = -l; m <= l; ++m)
                for (int l1 = 0; l1 <= lmax; ++l1)
                    for (int m1 = -l1; m1 <= l1; ++m1)
                        for (int l2 = std::abs(l1 - l); l2 <= l1 + l; ++l2)
                            table_[flat(lm_index(l, m), lm_index(l1, m1), l2)] =
                                gaunt_q(l1, m1, l2, m1 - m, l, m);
    }

    int lmax() const { return lmax_; }

    /// Q^{l1 m1}_{l2, m1 - m, l m}
    double q(int l, int m, int l1, int m1, int l2) const {
        return table_[flat(lm_index(l, m), lm_index(l1, m1), l2)];
    }

private:
    std::size_t flat(int lm, int l1m1, int l2) const {
        return (static_cast<std::size_t>(lm) * nlm_ + static_cast<std::size_t>(l1m1)) * nl2_ +
               static_cast<std::size_t>(l2);
    }

    int lmax_;
    int nlm_;
    int nl2_;
    std::vector<double> table_;
};

} // namespace mscat
