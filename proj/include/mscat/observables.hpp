#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mscat/errors.hpp"
#include "mscat/model.hpp"
#include "mscat/msm.hpp"
#include "mscat/quadrature.hpp"
#include "mscat/radial.hpp"
#include "mscat/specfun.hpp"
#include "mscat/units.hpp"

// Physical outputs: partial harmonics A(n), differential and integral cross
// sections, resonance extraction from phase branches, and reconstruction of
// the partial waves on a spatial grid.
namespace mscat {

/// Angular amplitude of a molecular partial wave,
/// A(n) = sum_ilm x_ilm exp(-i k n . a_i) Y_lm(n); the multi-center
/// generalization of a spherical harmonic. For an S-normalized mode the
/// sphere integral of |A|^2 is 1.
class PartialHarmonic {
public:
    PartialHarmonic(const Molecule& mol, const ChannelList& ch, const Mode& mode, double k)
        : mol_(&mol), ch_(&ch), x_(mode.x), k_(k) {
        lmax_ = 0;
        for (std::size_t i = 0; i < mol.size(); ++i) lmax_ = std::max(lmax_, ch.atom_lmax(i));
    }

    double k() const { return k_; }

    cplx operator()(const UnitDirection& n) const {
        double nx = 0.0, ny = 0.0, nz = 0.0;
        n.to_cartesian(nx, ny, nz);
        const auto ylm = sph_harm_all(lmax_, n);
        cplx acc = 0.0;
        for (std::size_t c = 0; c < ch_->size(); ++c) {
            const auto& channel = ch_->at(c);
            const Vec3& a = mol_->atom(channel.atom).pos;
            const double phase = -k_ * (nx * a.x + ny * a.y + nz * a.z);
            acc += x_(static_cast<Eigen::Index>(c)) * std::polar(1.0, phase) *
                   ylm[static_cast<std::size_t>(lm_index(channel.l, channel.m))];
        }
        return acc;
    }

private:
    const Molecule* mol_;
    const ChannelList* ch_;
    Eigen::VectorXcd x_;
    double k_;
    int lmax_;
};

inline PartialHarmonic partial_harmonic(const Molecule& mol, const ChannelList& ch, const Mode& mode,
                                        double k) {
    return PartialHarmonic(mol, ch, mode, k);
}

/// Sphere integral of |A(n)|^2 (Gauss-Legendre x uniform grid).
inline double partial_harmonic_norm(const PartialHarmonic& a, int n_theta = 50, int n_phi = 100) {
    const SphereGrid grid(n_theta, n_phi);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.dirs.size(); ++i) acc += grid.weights[i] * std::norm(a(grid.dirs[i]));
    return acc;
}

/// Differential cross section of one partial wave,
/// dsigma/dOmega = (4 pi / k^2) |A(n)|^2 sin^2(delta) (bohr^2/sr); its
/// sphere integral is the mode's term of the integral cross section.
inline double differential_xsec(const PartialHarmonic& a, double delta, const UnitDirection& n) {
    const double s = std::sin(delta);
    return four_pi / (a.k() * a.k()) * std::norm(a(n)) * s * s;
}

/// Orientation-averaged integral cross section at one energy with
/// per-symmetry partial sums; the total is the exact sum of the parts.
struct CrossSection {
    double energy = 0.0; // hartree
    double total = 0.0;  // bohr^2
    double aprime = 0.0;
    double adoubleprime = 0.0;
    double unlabeled = 0.0;
};

/// sigma = (4 pi / k^2) sum_n sin^2(delta_n), split by symmetry label.
inline CrossSection integral_xsec(const ModeSet& modes) {
    CrossSection cs;
    cs.energy = modes.energy;
    const double pref = four_pi / (modes.k * modes.k);
    for (const auto& mode : modes.modes) {
        const double s = std::sin(mode.delta);
        const double term = pref * s * s;
        switch (mode.symmetry) {
            case SymmetryLabel::APrime: cs.aprime += term; break;
            case SymmetryLabel::ADoublePrime: cs.adoubleprime += term; break;
            default: cs.unlabeled += term; break;
        }
    }
    cs.total = cs.aprime + cs.adoubleprime + cs.unlabeled;
    return cs;
}

/// A shape resonance: delta crosses pi/2 (mod pi). The width is absent for
/// crossings with non-positive slope.
struct ResonanceRecord {
    double energy = 0.0; // hartree
    double gamma = 0.0;  // hartree, valid when has_width
    bool has_width = false;
    SymmetryLabel symmetry = SymmetryLabel::None;
    int branch_id = 0;
};

/// A branch-continuous phase curve: grid samples plus a continuous
/// evaluator (consistently unwrapped) for root refinement off the grid.
struct BranchCurve {
    int id = 0;
    SymmetryLabel symmetry = SymmetryLabel::None;
    std::vector<double> energies; // hartree, ascending
    std::vector<double> delta;    // unwrapped
    std::function<double(double)> eval;
};

struct ResonanceSearch {
    std::vector<ResonanceRecord> records;
    std::vector<std::string> warnings;
};

namespace detail {

inline double bisect_level(const std::function<double(double)>& f, double level, double lo, double hi,
                           double f_lo, double tol) {
    const bool rising_through = f_lo < level;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < level) == rising_through)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Five-point centered first derivative on a locally refined stencil.
inline double stencil_slope(const std::function<double(double)>& f, double e, double h) {
    return (-f(e + 2.0 * h) + 8.0 * f(e + h) - 8.0 * f(e - h) + f(e - 2.0 * h)) / (12.0 * h);
}

} // namespace detail

/// Scan branch curves for crossings of pi/2 (mod pi). Positions are refined
/// by bisection to `tol` (hartree); widths Gamma = 2/delta'(E_res) use a
/// five-point stencil on a grid refined by `refine` around the crossing.
inline ResonanceSearch find_resonances(const std::vector<BranchCurve>& branches, double tol = 1e-6,
                                       int refine = 8) {
    ResonanceSearch out;
    for (const auto& br : branches) {
        if (br.energies.size() < 2 || !br.eval) continue;
        for (std::size_t i = 0; i + 1 < br.energies.size(); ++i) {
            const double d0 = br.delta[i], d1 = br.delta[i + 1];
            if (std::abs(d1 - d0) > 0.5 * pi)
                out.warnings.push_back("branch " + std::to_string(br.id) + ": phase jump " +
                                       std::to_string(std::abs(d1 - d0)) + " rad between grid points near E = " +
                                       std::to_string(hartree_to_ev(br.energies[i])) +
                                       " eV; refine the energy grid");
            const double lo = std::min(d0, d1), hi = std::max(d0, d1);
            // all levels pi/2 + n pi inside the gap; a sample exactly on the
            // level counts once, at the left end of the segment
            const int n_first = static_cast<int>(std::floor((lo - 0.5 * pi) / pi));
            for (int n = n_first; 0.5 * pi + n * pi <= hi; ++n) {
                const double level = 0.5 * pi + n * pi;
                const bool interior = level > lo && level < hi;
                const bool touches_left = d0 == level;
                if (!interior && !touches_left) continue;
                const double e_res =
                    touches_left
                        ? br.energies[i]
                        : detail::bisect_level(br.eval, level, br.energies[i], br.energies[i + 1], d0, tol);
                const double h = (br.energies[i + 1] - br.energies[i]) / refine;
                const double slope = detail::stencil_slope(br.eval, e_res, h);
                ResonanceRecord rec;
                rec.energy = e_res;
                rec.symmetry = br.symmetry;
                rec.branch_id = br.id;
                if (slope > 0.0) {
                    rec.gamma = 2.0 / slope;
                    rec.has_width = true;
                }
                out.records.push_back(rec);
            }
        }
    }
    return out;
}

/// Radial channel functions of one mode, deduplicated per (species, l):
/// w_il depends on the channel only through its species and l.
inline std::vector<RadialSolution> mode_radial_solutions(const Molecule& mol, const ChannelList& ch,
                                                         const Mode& mode, double k,
                                                         const std::vector<SpeciesPotential>& species,
                                                         const PhaseSlice& phases,
                                                         const NumerovOptions& opt = {}) {
    std::map<std::string, const AtomicPotential*> by_label;
    for (const auto& sp : species) by_label[sp.pot.species()] = &sp.pot;
    const auto w = w_coefficients(mode, mol, ch, phases);
    const double support = 1e-12 * mode.x.cwiseAbs().maxCoeff();

    std::map<std::pair<std::string, int>, RadialSolution> cache;
    std::vector<RadialSolution> out(ch.size());
    for (std::size_t c = 0; c < ch.size(); ++c) {
        if (std::abs(mode.x(static_cast<Eigen::Index>(c))) <= support) continue;
        const auto& channel = ch.at(c);
        const auto& label = mol.atom(channel.atom).species;
        const auto key = std::make_pair(label, channel.l);
        auto it = cache.find(key);
        if (it == cache.end()) {
            auto pot = by_label.find(label);
            if (pot == by_label.end())
                throw input_error("mode_radial_solutions: no potential for species " + label);
            it = cache.emplace(key, solve_inhomogeneous(*pot->second, channel.l, k, mode.delta, w[c], opt))
                     .first;
        }
        out[c] = it->second;
    }
    return out;
}

/// Evaluate the partial wave Psi(r) = sum x_ilm i^l psi_il(|r - a_i|)
/// Y_lm(dir(r - a_i)) at the given points. `radial` must hold a solution for
/// every channel the mode populates (see mode_radial_solutions). Points
/// closer to a nucleus than the radial mesh start fall back to the nearest
/// sample; `clamped_points` (optional) counts them.
inline std::vector<cplx> reconstruct_wave(const Molecule& mol, const ChannelList& ch, const Mode& mode,
                                          const std::vector<RadialSolution>& radial,
                                          const std::vector<Vec3>& points,
                                          std::size_t* clamped_points = nullptr) {
    if (radial.size() != ch.size())
        throw input_error("reconstruct_wave: need one radial solution slot per channel");
    const double support = 1e-12 * mode.x.cwiseAbs().maxCoeff();
    if (clamped_points) *clamped_points = 0;
    std::vector<cplx> out(points.size(), 0.0);
    for (std::size_t p = 0; p < points.size(); ++p) {
        cplx acc = 0.0;
        bool any_clamped = false;
        for (std::size_t c = 0; c < ch.size(); ++c) {
            const cplx xc = mode.x(static_cast<Eigen::Index>(c));
            if (std::abs(xc) <= support) continue;
            const auto& channel = ch.at(c);
            const Vec3 rel = points[p] - mol.atom(channel.atom).pos;
            const double rr = rel.norm();
            UnitDirection dir;
            if (rr > 0.0) dir = UnitDirection::from_cartesian(rel.x, rel.y, rel.z);
            bool clamped = false;
            const double psi = radial[c].eval(rr, &clamped);
            any_clamped = any_clamped || clamped || rr == 0.0;
            acc += xc * detail::unit_power(channel.l) * psi *
                   sph_harm(AngularIndex{channel.l, channel.m}, dir);
        }
        if (any_clamped && clamped_points) ++(*clamped_points);
        out[p] = acc;
    }
    return out;
}

} // namespace mscat
