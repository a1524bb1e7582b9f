#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mscat/specfun.hpp"

namespace mscat {

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Tricomi initial guess, then Newton.
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) {
                p0 = 1.0;
                p1 = t;
                for (int j = 2; j <= n; ++j) {
                    const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (t * p1 - p0) / (t * t - 1.0);
                break;
            }
        }
        x[static_cast<std::size_t>(i)] = t;
        w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    return {x, w};
}

/// Quadrature grid over the unit sphere: Gauss-Legendre in cos(theta) times
/// a uniform trapezoid in phi (exact for azimuthal modes |m| < n_phi).
struct SphereGrid {
    std::vector<UnitDirection> dirs;
    std::vector<double> weights; // include the full dOmega measure

    SphereGrid(int n_theta, int n_phi) {
        auto [xs, ws] = gauss_legendre(n_theta);
        dirs.reserve(static_cast<std::size_t>(n_theta) * n_phi);
        weights.reserve(dirs.capacity());
        const double wphi = 2.0 * pi / n_phi;
        for (int i = 0; i < n_theta; ++i) {
            const double c = xs[static_cast<std::size_t>(i)];
            const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
            for (int j = 0; j < n_phi; ++j) {
                UnitDirection n;
                n.cos_theta = c;
                n.sin_theta = s;
                n.phi = wphi * j;
                dirs.push_back(n);
                weights.push_back(ws[static_cast<std::size_t>(i)] * wphi);
            }
        }
    }

    /// Integrate f(n) over the sphere.
    template <class F>
    auto integrate(F&& f) const -> decltype(f(dirs[0]) * 1.0) {
        decltype(f(dirs[0]) * 1.0) acc{};
        for (std::size_t i = 0; i < dirs.size(); ++i) acc += weights[i] * f(dirs[i]);
        return acc;
    }
};

} // namespace mscat
