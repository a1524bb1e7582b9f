#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mscat/errors.hpp"
#include "mscat/interp.hpp"
#include "mscat/parallel.hpp"
#include "mscat/specfun.hpp"
#include "mscat/units.hpp"

// One-dimensional radial physics: spherically averaged atomic potentials
// (static part -q(r)/r plus Hara free-electron-gas exchange), partial phase
// shifts by Numerov integration of u(r) = r psi(r), and the inhomogeneous
// radial equation used for partial-wave reconstruction.
namespace mscat {

/// Sampled radial profile: strictly increasing grid of radii (bohr), r > 0.
struct RadialTable {
    std::vector<double> r;
    std::vector<double> values;

    void validate(bool nonnegative = false) const {
        if (r.size() < 2 || r.size() != values.size())
            throw input_error("RadialTable: need >= 2 matching samples");
        if (!(r.front() > 0.0)) throw input_error("RadialTable: radii must be positive");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i > 0 && !(r[i] > r[i - 1])) throw input_error("RadialTable: grid must be strictly increasing");
            if (!std::isfinite(values[i])) throw input_error("RadialTable: non-finite sample");
            if (nonnegative && values[i] < 0.0) throw input_error("RadialTable: negative density sample");
        }
    }

    PchipCurve curve() const { return PchipCurve(r, values); }
};

/// V_st(r) = -q(r)/r from an interpolated effective-charge curve.
inline double static_potential(const PchipCurve& q, double r) { return -q(r) / r; }

inline double static_potential(const RadialTable& q, double r) { return -q.curve()(r) / r; }

/// Energy-dependent bracket of the Hara exchange potential,
/// 1/2 + (1 - eta^2)/(4 eta) ln|(1 + eta)/(1 - eta)|; positive for eta > 0.
inline double hara_bracket(double eta) {
    if (!(eta > 0.0)) throw std::domain_error("hara_bracket: eta must be positive");
    if (std::abs(eta - 1.0) < 1e-12) return 0.5;
    if (eta > 1e6) return 1.0 / (3.0 * eta * eta); // asymptote, avoids log cancellation
    return 0.5 + (1.0 - eta * eta) / (4.0 * eta) * std::log(std::abs((1.0 + eta) / (1.0 - eta)));
}

/// Hara local exchange potential (hartree) at local density rho (bohr^-3),
/// electron wavenumber k (bohr^-1), ionization energy I (hartree). Always <= 0.
inline double hara_exchange(double rho, double k, double I) {
    if (rho < 0.0) throw std::domain_error("hara_exchange: negative density");
    if (!(k > 0.0) || !(I > 0.0)) throw std::domain_error("hara_exchange: k and I must be positive");
    if (rho == 0.0) return 0.0;
    const double kf = std::cbrt(3.0 * pi * pi * rho);
    const double eta = std::sqrt(k * k + 2.0 * I + kf * kf) / kf;
    return -(2.0 / pi) * kf * hara_bracket(eta);
}

/// Tabulated species input: effective charge q(r) and angle-averaged
/// density rho(r) on a shared grid, plus the ionization energy.
struct SpeciesData {
    std::string label;
    double ionization = 0.0; // hartree
    std::vector<double> r;
    std::vector<double> q;
    std::vector<double> rho;
};

/// Parse a species data file: header `species <label> I_eV <value>`, then
/// rows `r q rho` (bohr, dimensionless, bohr^-3); `#` starts a comment.
inline SpeciesData parse_species(std::istream& in, const std::string& origin = "<species>") {
    SpeciesData sp;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    auto fail = [&](const std::string& msg) {
        throw input_error(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (!have_header) {
            if (first != "species") fail("expected header `species <label> I_eV <value>`");
            std::string key;
            double ion_ev = 0.0;
            if (!(ls >> sp.label >> key >> ion_ev) || key != "I_eV" || !(ion_ev > 0.0))
                fail("malformed species header");
            sp.ionization = ev_to_hartree(ion_ev);
            have_header = true;
            continue;
        }
        double r = 0.0, q = 0.0, rho = 0.0;
        std::istringstream row(line);
        if (!(row >> r >> q >> rho)) fail("expected row `r q rho`");
        std::string extra;
        if (row >> extra) fail("trailing fields in data row");
        sp.r.push_back(r);
        sp.q.push_back(q);
        sp.rho.push_back(rho);
    }
    if (!have_header) throw input_error(origin + ": missing species header");
    RadialTable{sp.r, sp.q}.validate();
    RadialTable{sp.r, sp.rho}.validate(/*nonnegative=*/true);
    return sp;
}

inline SpeciesData parse_species_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open species file: " + path);
    return parse_species(in, path);
}

/// Muffin-tin atomic potential: -q(r)/r + Hara exchange inside the cutoff
/// radius d, identically zero outside. Below the first tabulated radius the
/// effective charge and density are continued as constants.
class AtomicPotential {
public:
    AtomicPotential(const SpeciesData& sp, double cutoff)
        : label_(sp.label),
          ionization_(sp.ionization),
          cutoff_(cutoff),
          table_min_(sp.r.front()),
          q_(sp.r, sp.q),
          rho_(sp.r, sp.rho) {
        if (!(cutoff > 0.0)) throw input_error("AtomicPotential: cutoff radius must be positive");
        if (sp.r.back() < cutoff)
            throw input_error("AtomicPotential: species table for " + sp.label + " ends at r = " +
                              std::to_string(sp.r.back()) + " < cutoff " + std::to_string(cutoff));
    }

    const std::string& species() const { return label_; }
    double ionization() const { return ionization_; }
    double cutoff() const { return cutoff_; }

    double effective_charge(double r) const { return q_(std::max(r, table_min_)); }
    double density(double r) const { return rho_(std::max(r, table_min_)); }

    double static_part(double r) const {
        if (r > cutoff_) return 0.0;
        return -effective_charge(r) / r;
    }

    /// Full potential at electron wavenumber k.
    double v(double r, double k) const {
        if (r > cutoff_) return 0.0;
        return static_part(r) + hara_exchange(density(r), k, ionization_);
    }

private:
    std::string label_;
    double ionization_;
    double cutoff_;
    double table_min_;
    PchipCurve q_;
    PchipCurve rho_;
};

struct NumerovOptions {
    double step = 2.0e-3; // target step; the effective step also satisfies h <= d/2000
    int n_steps = 0;      // exact number of grid intervals (0 = derive from `step`)
};

namespace detail {

struct RadialMesh {
    double h = 0.0;
    int n = 0; // grid points r_i = (i + 1) h, i = 0..n-1; r_{n-1} = d
    double r(int i) const { return h * (i + 1); }
};

inline RadialMesh make_mesh(double d, const NumerovOptions& opt) {
    RadialMesh mesh;
    int n = opt.n_steps;
    if (n <= 0) {
        const double target = std::min(opt.step, d / 2000.0);
        n = static_cast<int>(std::ceil(d / target));
    }
    if (n < 8) throw numerical_error("radial mesh: fewer than 8 points");
    mesh.n = n;
    mesh.h = d / n;
    if (!(mesh.h > 1e-12))
        throw numerical_error("radial mesh: step underflow (d = " + std::to_string(d) + ")");
    return mesh;
}

/// Numerov march for u'' = f(r) u + s(r) on a uniform grid. `s` may be empty.
inline std::vector<double> numerov_march(const std::vector<double>& f, const std::vector<double>& s,
                                         double u0, double u1, double h) {
    const double c = h * h / 12.0;
    std::vector<double> u(f.size());
    u[0] = u0;
    u[1] = u1;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
        double num = 2.0 * u[i] * (1.0 + 5.0 * c * f[i]) - u[i - 1] * (1.0 - c * f[i - 1]);
        if (!s.empty()) num += c * (s[i + 1] + 10.0 * s[i] + s[i - 1]);
        u[i + 1] = num / (1.0 - c * f[i + 1]);
        if (!std::isfinite(u[i + 1]))
            throw numerical_error("radial integration diverged at r = " + std::to_string(h * (i + 2)));
        if (s.empty() && std::abs(u[i + 1]) > 1e250) {
            for (std::size_t j = 0; j <= i + 1; ++j) u[j] *= 1e-250;
        }
    }
    return u;
}

struct FreeCoeffs {
    double A = 0.0; // coefficient of j_l(kr)
    double B = 0.0; // coefficient of y_l(kr)
};

/// Decompose (psi(d), psi'(d)) over the free pair (j_l, y_l).
inline FreeCoeffs match_free(double u_d, double du_d, double d, int l, double k) {
    const double psi = u_d / d;
    const double dpsi = du_d / d - u_d / (d * d);
    const double x = k * d;
    const double j = sph_bessel_j(l, x), y = sph_bessel_y(l, x);
    const double jp = k * sph_bessel_j_deriv(l, x), yp = k * sph_bessel_y_deriv(l, x);
    const double w = j * yp - y * jp; // = 1/(k d^2)
    return {(psi * yp - dpsi * y) / w, (dpsi * j - psi * jp) / w};
}

/// Endpoint derivative u'(d) for u'' = f u + s using the exactly known
/// second derivative at the nodes: a one-sided Taylor relation solved for
/// u'. O(h^4) truncation, and the roundoff amplification is a single 1/h
/// (a pure finite-difference stencil of this order would be far noisier).
inline double end_derivative(const std::vector<double>& u, const std::vector<double>& f,
                             const std::vector<double>& s, double h) {
    const std::size_t n = u.size() - 1;
    const double fd = f[n];
    const double fp = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    const double fpp = (f[n] - 2.0 * f[n - 1] + f[n - 2]) / (h * h);
    const double sd = s.empty() ? 0.0 : s[n];
    const double sp = s.empty() ? 0.0 : (3.0 * s[n] - 4.0 * s[n - 1] + s[n - 2]) / (2.0 * h);
    const double spp = s.empty() ? 0.0 : (s[n] - 2.0 * s[n - 1] + s[n - 2]) / (h * h);
    const double u2 = fd * u[n] + sd;
    double up = (u[n] - u[n - 1]) / h + 0.5 * h * u2;
    for (int it = 0; it < 3; ++it) {
        const double u3 = fp * u[n] + fd * up + sp;
        const double u4 = fpp * u[n] + 2.0 * fp * up + fd * u2 + spp;
        up = (u[n] - u[n - 1]) / h + 0.5 * h * u2 - h * h / 6.0 * u3 + h * h * h / 24.0 * u4;
    }
    return up;
}

/// Series seeds u = r^{l+1} (1 + b r + a r^2) with the Coulomb-like local
/// behavior of V fitted from the first two mesh points. Scaled by
/// r_1^-(l+1) (the overall amplitude is arbitrary).
template <class VF>
inline std::pair<double, double> regular_seeds(const VF& V, const RadialMesh& mesh, int l, double k) {
    const double r1 = mesh.r(0), r2 = mesh.r(1);
    const double v1 = V(r1), v2 = V(r2);
    const double cm1 = (v1 - v2) / (1.0 / r1 - 1.0 / r2);
    const double c0 = v1 - cm1 / r1;
    const double b = cm1 / (l + 1.0);
    const double a = (2.0 * cm1 * b + 2.0 * c0 - k * k) / (4.0 * l + 6.0);
    const double u1 = 1.0 + b * r1 + a * r1 * r1;
    const double u2 = std::pow(r2 / r1, l + 1) * (1.0 + b * r2 + a * r2 * r2);
    return {u1, u2};
}

struct IntegratedChannel {
    RadialMesh mesh; // ends exactly at d; the potential kink is never crossed
    std::vector<double> u;
    std::vector<double> f; // l(l+1)/r^2 + 2V - k^2 at the nodes
    FreeCoeffs coeffs;
};

template <class VF>
std::vector<double> radial_f(const VF& V, const RadialMesh& mesh, int l, double k) {
    std::vector<double> f(static_cast<std::size_t>(mesh.n));
    for (int i = 0; i < mesh.n; ++i) {
        const double r = mesh.r(i);
        f[static_cast<std::size_t>(i)] = l * (l + 1.0) / (r * r) + 2.0 * V(r) - k * k;
    }
    return f;
}

template <class VF>
inline IntegratedChannel integrate_regular(const VF& V, double d, int l, double k,
                                           const NumerovOptions& opt) {
    const RadialMesh mesh = make_mesh(d, opt);
    auto f = radial_f(V, mesh, l, k);
    const auto [u0, u1] = regular_seeds(V, mesh, l, k);
    auto u = numerov_march(f, {}, u0, u1, mesh.h);
    const auto coeffs = match_free(u.back(), end_derivative(u, f, {}, mesh.h), d, l, k);
    return {mesh, std::move(u), std::move(f), coeffs};
}

/// Fold into the principal branch (-pi/2, pi/2].
inline double principal_phase(double delta) {
    while (delta > 0.5 * pi) delta -= pi;
    while (delta <= -0.5 * pi) delta += pi;
    return delta;
}

} // namespace detail

/// Scattering phase shift delta_l(k) of a spherically symmetric potential
/// V(r) that vanishes beyond r = d. Outward Numerov integration of
/// u = r psi with regular boundary behavior, matched to the free solutions
/// at d. Principal branch (-pi/2, pi/2].
template <class VF>
double atomic_phase(const VF& V, double d, int l, double k, const NumerovOptions& opt = {}) {
    if (!(k > 0.0)) throw std::domain_error("atomic_phase: k must be positive");
    if (l < 0) throw std::domain_error("atomic_phase: l must be non-negative");
    const auto ch = detail::integrate_regular(V, d, l, k, opt);
    return detail::principal_phase(std::atan2(-ch.coeffs.B, ch.coeffs.A));
}

inline double atomic_phase(const AtomicPotential& pot, int l, double k, const NumerovOptions& opt = {}) {
    return atomic_phase([&](double r) { return pot.v(r, k); }, pot.cutoff(), l, k, opt);
}

/// Radial channel function psi(r) on its integration mesh, with the
/// asymptotic decomposition psi = A j_l(kr) + B y_l(kr) valid beyond d.
struct RadialSolution {
    int l = 0;
    double h = 0.0;
    std::vector<double> r;
    std::vector<double> psi;
    double d = 0.0;
    double k = 0.0;
    double delta = 0.0; // asymptotic phase: (A, B) = amp (cos delta, -sin delta)
    double A = 1.0;
    double B = 0.0;

    double free_form(double rr) const { return A * sph_bessel_j(l, k * rr) + B * sph_bessel_y(l, k * rr); }

    /// Evaluate psi at radius rr: 4-point interpolation on the mesh inside d,
    /// the analytic free form beyond, nearest-sample fallback below the mesh.
    double eval(double rr, bool* clamped = nullptr) const {
        if (clamped) *clamped = false;
        if (rr > d) return free_form(rr);
        if (rr < r.front()) {
            if (clamped) *clamped = true;
            return psi.front();
        }
        // uniform mesh: r[i] = (i+1) h
        const auto n = static_cast<std::ptrdiff_t>(r.size());
        std::ptrdiff_t i = static_cast<std::ptrdiff_t>(rr / h) - 2;
        i = std::clamp<std::ptrdiff_t>(i, 0, n - 4); // 4-point window start
        double out = 0.0;
        for (std::ptrdiff_t a = i; a < i + 4; ++a) {
            double w = 1.0;
            for (std::ptrdiff_t b = i; b < i + 4; ++b)
                if (b != a) w *= (rr - r[static_cast<std::size_t>(b)]) /
                                 (r[static_cast<std::size_t>(a)] - r[static_cast<std::size_t>(b)]);
            out += w * psi[static_cast<std::size_t>(a)];
        }
        return out;
    }
};

/// Solve the inhomogeneous radial equation (H - k^2/2) psi = -w V(r) j_l(kr)
/// for the channel function of a molecular mode: the particular solution and
/// the regular homogeneous solution are combined so that the irregular
/// asymptotic content equals -sin(delta). For mode-consistent (delta, w) the
/// result carries asymptotics cos(delta) j_l - sin(delta) y_l; when the
/// irregular component is unreachable (V = 0) the regular solution with unit
/// amplitude is returned and the reported phase falls back accordingly.
template <class VF>
RadialSolution solve_inhomogeneous(const VF& V, double d, int l, double k, double delta, double w,
                                   const NumerovOptions& opt = {}) {
    if (!(k > 0.0)) throw std::domain_error("solve_inhomogeneous: k must be positive");
    const auto reg = detail::integrate_regular(V, d, l, k, opt);
    const auto& mesh = reg.mesh;

    std::vector<double> u(reg.u.size(), 0.0);
    detail::FreeCoeffs part{0.0, 0.0};
    if (w != 0.0) {
        std::vector<double> s(static_cast<std::size_t>(mesh.n), 0.0);
        for (int i = 0; i < mesh.n; ++i) {
            const double r = mesh.r(i);
            s[static_cast<std::size_t>(i)] = 2.0 * w * r * V(r) * sph_bessel_j(l, k * r);
        }
        u = detail::numerov_march(reg.f, s, 0.0, 0.0, mesh.h);
        part = detail::match_free(u.back(), detail::end_derivative(u, reg.f, s, mesh.h), d, l, k);
    }

    // Set the irregular asymptotic strength to exactly -sin(delta); for
    // mode-consistent (delta, w) the regular strength then comes out as
    // cos(delta) and the asymptotics are exactly the normalized free form.
    // When the potential is too weak to produce irregular content (the
    // regular solution's B sits at the integration noise floor) the wave is
    // a free regular one; return it with unit amplitude, which forces the
    // reported phase to 0.
    const double reg_amp = std::hypot(reg.coeffs.A, reg.coeffs.B);
    double alpha = 0.0;
    if (std::abs(reg.coeffs.B) > 1e-8 * reg_amp)
        alpha = (-std::sin(delta) - part.B) / reg.coeffs.B;
    else
        alpha = (reg.coeffs.A > 0.0 ? 1.0 : -1.0) / reg_amp;

    RadialSolution sol;
    sol.l = l;
    sol.h = mesh.h;
    sol.d = d;
    sol.k = k;
    sol.A = part.A + alpha * reg.coeffs.A;
    sol.B = part.B + alpha * reg.coeffs.B;
    sol.delta = std::atan2(-sol.B, sol.A);
    sol.r.resize(static_cast<std::size_t>(mesh.n));
    sol.psi.resize(static_cast<std::size_t>(mesh.n));
    for (int i = 0; i < mesh.n; ++i) {
        const double r = mesh.r(i);
        sol.r[static_cast<std::size_t>(i)] = r;
        sol.psi[static_cast<std::size_t>(i)] =
            (u[static_cast<std::size_t>(i)] + alpha * reg.u[static_cast<std::size_t>(i)]) / r;
    }
    return sol;
}

inline RadialSolution solve_inhomogeneous(const AtomicPotential& pot, int l, double k, double delta,
                                          double w, const NumerovOptions& opt = {}) {
    return solve_inhomogeneous([&](double r) { return pot.v(r, k); }, pot.cutoff(), l, k, delta, w, opt);
}

/// Atomic phases of one energy point: per species label, delta_l for l = 0..L.
struct PhaseSlice {
    std::map<std::string, std::vector<double>> delta;

    double get(const std::string& species, int l) const {
        auto it = delta.find(species);
        if (it == delta.end() || l < 0 || static_cast<std::size_t>(l) >= it->second.size())
            throw input_error("PhaseSlice: no phase for species " + species + ", l = " + std::to_string(l));
        return it->second[static_cast<std::size_t>(l)];
    }
};

/// Atomic partial phases delta_{il}(E) on a shared energy grid, unwrapped in
/// energy so each (species, l) curve is continuous.
struct PhaseTable {
    std::vector<double> energies; // hartree, ascending
    std::map<std::string, std::vector<std::vector<double>>> delta; // label -> [l][ie]

    PhaseSlice slice(std::size_t ie) const {
        PhaseSlice s;
        for (const auto& [label, per_l] : delta) {
            auto& v = s.delta[label];
            v.reserve(per_l.size());
            for (const auto& curve : per_l) v.push_back(curve[ie]);
        }
        return s;
    }
};

struct SpeciesPotential {
    AtomicPotential pot;
    int lmax = 1;
};

/// Shift by a multiple of pi to land nearest `ref`.
inline double unwrap_phase(double delta, double ref) {
    return delta + pi * std::round((ref - delta) / pi);
}

/// Compute delta_{il}(E) for every species and l <= lmax over the energy grid
/// (hartree). Parallel across (species, l); unwrapped along energy.
inline PhaseTable compute_phase_table(const std::vector<SpeciesPotential>& species,
                                      const std::vector<double>& energies,
                                      const NumerovOptions& opt = {}) {
    if (energies.empty()) throw input_error("compute_phase_table: empty energy grid");
    for (std::size_t i = 0; i < energies.size(); ++i)
        if (!(energies[i] > 0.0) || (i > 0 && !(energies[i] > energies[i - 1])))
            throw input_error("compute_phase_table: energies must be positive and ascending");

    PhaseTable table;
    table.energies = energies;
    std::vector<std::pair<const SpeciesPotential*, int>> jobs;
    for (const auto& sp : species) {
        auto& per_l = table.delta[sp.pot.species()];
        per_l.assign(static_cast<std::size_t>(sp.lmax) + 1, std::vector<double>(energies.size(), 0.0));
        for (int l = 0; l <= sp.lmax; ++l) jobs.emplace_back(&sp, l);
    }
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto& [sp, l] = jobs[j];
        auto& curve = table.delta[sp->pot.species()][static_cast<std::size_t>(l)];
        for (std::size_t ie = 0; ie < energies.size(); ++ie) {
            const double k = wavenumber(energies[ie]);
            double dl = atomic_phase(sp->pot, l, k, opt);
            if (ie > 0) dl = unwrap_phase(dl, curve[ie - 1]);
            curve[ie] = dl;
        }
    });
    return table;
}

/// Atomic phases at a single (possibly off-grid) energy.
inline PhaseSlice compute_phase_slice(const std::vector<SpeciesPotential>& species, double energy,
                                      const NumerovOptions& opt = {}) {
    PhaseSlice s;
    const double k = wavenumber(energy);
    for (const auto& sp : species) {
        auto& v = s.delta[sp.pot.species()];
        v.resize(static_cast<std::size_t>(sp.lmax) + 1);
        for (int l = 0; l <= sp.lmax; ++l) v[static_cast<std::size_t>(l)] = atomic_phase(sp.pot, l, k, opt);
    }
    return s;
}

} // namespace mscat
