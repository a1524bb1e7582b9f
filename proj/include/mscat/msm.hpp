#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "mscat/errors.hpp"
#include "mscat/model.hpp"
#include "mscat/parallel.hpp"
#include "mscat/radial.hpp"
#include "mscat/specfun.hpp"
#include "mscat/units.hpp"

// The multiple-scattering core: assembly of the channel matrices S and N,
// the generalized hermitian eigenproblem N|x> = lambda S|x> for the
// molecular partial phases (lambda = cot delta), w-coefficients, and branch
// tracking of the phases across an energy scan.
namespace mscat {

struct ChannelMatrix {
    Eigen::MatrixXcd m;
    double k = 0.0;
};

/// Relative spectral floor used by the energy-scan pipeline when plain
/// Cholesky hits the roundoff-singular regime of S (see SolveOptions).
inline constexpr double default_overlap_floor = 1e-13;

namespace detail {

inline cplx unit_power(int n) {
    static const cplx table[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    return table[n % 4];
}

/// Off-diagonal block structure shared by S and N; `radial` supplies
/// j_{l2}(k R) or y_{l2}(k R).
template <class RadialF>
Eigen::MatrixXcd assemble_offdiag(const Molecule& mol, const ChannelList& ch, double k,
                                  const GauntTable& gaunt, const RadialF& radial) {
    const auto n = static_cast<Eigen::Index>(ch.size());
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t i = 0; i < mol.size(); ++i) {
        for (std::size_t j = 0; j < mol.size(); ++j) {
            if (i == j) continue;
            const double R = mol.pair_distance(i, j);
            const UnitDirection dir = mol.pair_direction(i, j);
            const int l2max = ch.atom_lmax(i) + ch.atom_lmax(j);
            const auto rad = radial(l2max, k * R);
            const auto ylm = sph_harm_all(l2max, dir);
            for (int l = 0; l <= ch.atom_lmax(i); ++l)
                for (int m = -l; m <= l; ++m) {
                    const auto row = static_cast<Eigen::Index>(ch.flat(i, l, m));
                    for (int l1 = 0; l1 <= ch.atom_lmax(j); ++l1)
                        for (int m1 = -l1; m1 <= l1; ++m1) {
                            const auto col = static_cast<Eigen::Index>(ch.flat(j, l1, m1));
                            const int m2 = m1 - m;
                            cplx acc = 0.0;
                            for (int l2 = std::abs(l1 - l); l2 <= l1 + l; ++l2) {
                                if (std::abs(m2) > l2) continue;
                                const double q = gaunt.q(l, m, l1, m1, l2);
                                if (q == 0.0) continue;
                                acc += unit_power(l2) * q * rad[static_cast<std::size_t>(l2)] *
                                       ylm[static_cast<std::size_t>(lm_index(l2, m2))];
                            }
                            out(row, col) = acc;
                        }
                }
        }
    }
    return out;
}

inline int max_lmax(const Molecule& mol, const ChannelList& ch) {
    int lmax = 0;
    for (std::size_t i = 0; i < mol.size(); ++i) lmax = std::max(lmax, ch.atom_lmax(i));
    return lmax;
}

/// Lower-triangular Cholesky factor of a hermitian positive definite matrix;
/// reports the offending pivot index on failure.
inline Eigen::MatrixXcd cholesky_lower(const Eigen::MatrixXcd& s) {
    const Eigen::Index n = s.rows();
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double diag = std::real(s(j, j));
        for (Eigen::Index t = 0; t < j; ++t) diag -= std::norm(L(j, t));
        if (!(diag > 0.0) || !std::isfinite(diag))
            throw numerical_error("overlap matrix S is not positive definite: Cholesky pivot " +
                                  std::to_string(j) + " = " + std::to_string(diag));
        L(j, j) = std::sqrt(diag);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            cplx acc = s(i, j);
            for (Eigen::Index t = 0; t < j; ++t) acc -= L(i, t) * std::conj(L(j, t));
            L(i, j) = acc / std::real(L(j, j));
        }
    }
    return L;
}

} // namespace detail

/// Gaunt table sized for a channel list (rows/cols up to L, sum index 2L).
inline GauntTable make_gaunt_table(const Molecule& mol, const ChannelList& ch) {
    return GauntTable(detail::max_lmax(mol, ch));
}

/// Overlap-type channel matrix S (Gram matrix of the translated regular
/// waves): identity on atom-diagonal blocks, regular propagators j_{l2}
/// between sites. Hermitian and positive definite.
inline ChannelMatrix assemble_S(const Molecule& mol, const ChannelList& ch, double k,
                                const GauntTable& gaunt) {
    if (!(k > 0.0)) throw std::domain_error("assemble_S: k must be positive");
    ChannelMatrix out;
    out.k = k;
    out.m = detail::assemble_offdiag(mol, ch, k, gaunt,
                                     [](int lmax, double x) { return sph_bessel_j_all(lmax, x); });
    out.m += Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(ch.size()),
                                        static_cast<Eigen::Index>(ch.size()));
    return out;
}

inline ChannelMatrix assemble_S(const Molecule& mol, const ChannelList& ch, double k) {
    return assemble_S(mol, ch, k, make_gaunt_table(mol, ch));
}

/// Channel matrix N: cot(delta_il) on the diagonal, irregular propagators
/// y_{l2} between sites. Hermitian.
inline ChannelMatrix assemble_N(const Molecule& mol, const ChannelList& ch, double k,
                                const PhaseSlice& phases, const GauntTable& gaunt) {
    if (!(k > 0.0)) throw std::domain_error("assemble_N: k must be positive");
    ChannelMatrix out;
    out.k = k;
    out.m = detail::assemble_offdiag(mol, ch, k, gaunt,
                                     [](int lmax, double x) { return sph_bessel_y_all(lmax, x); });
    for (std::size_t c = 0; c < ch.size(); ++c) {
        const auto& channel = ch.at(c);
        const auto& species = mol.atom(channel.atom).species;
        const double delta = phases.get(species, channel.l);
        const double s = std::sin(delta);
        if (std::abs(s) < 1e-12)
            throw numerical_error("atomic phase for species " + species + ", l = " +
                                  std::to_string(channel.l) + " is 0 (mod pi) at k = " + std::to_string(k) +
                                  "; cot(delta) diverges — shift the energy grid");
        out.m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = std::cos(delta) / s;
    }
    return out;
}

inline ChannelMatrix assemble_N(const Molecule& mol, const ChannelList& ch, double k,
                                const PhaseSlice& phases) {
    return assemble_N(mol, ch, k, phases, make_gaunt_table(mol, ch));
}

/// One molecular partial wave at fixed energy.
struct Mode {
    double lambda = 0.0; // cot(delta)
    double delta = 0.0;  // arccot(lambda) in (0, pi)
    Eigen::VectorXcd x;  // S-normalized: <x|S|x> = 1
    SymmetryLabel symmetry = SymmetryLabel::None;
};

struct ModeSet {
    double energy = 0.0; // hartree
    double k = 0.0;
    std::vector<Mode> modes; // ascending lambda
};

namespace detail {

inline double mode_delta_from_lambda(double lambda) { return std::atan2(1.0, lambda); }

/// Classify a vector by its support on A'/A'' channels; None when mixed.
inline SymmetryLabel classify(const Eigen::VectorXcd& x, const ChannelList& ch, double tol = 1e-8) {
    if (!ch.planar()) return SymmetryLabel::None;
    double na = 0.0, nb = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        const double a = std::abs(x(c));
        if (ch.label(static_cast<std::size_t>(c)) == SymmetryLabel::APrime)
            na = std::max(na, a);
        else
            nb = std::max(nb, a);
    }
    const double scale = std::max(na, nb);
    if (nb <= tol * scale) return SymmetryLabel::APrime;
    if (na <= tol * scale) return SymmetryLabel::ADoublePrime;
    return SymmetryLabel::None;
}

/// Within clusters of numerically degenerate eigenvalues the eigenvectors
/// are rotated onto pure symmetry components (planar molecules) and
/// re-orthonormalized in the S metric by modified Gram-Schmidt.
inline void purify_degenerate(std::vector<Mode>& modes, const Eigen::MatrixXcd& s,
                              const ChannelList& ch) {
    const std::size_t n = modes.size();
    std::size_t a = 0;
    while (a < n) {
        std::size_t b = a + 1;
        while (b < n &&
               std::abs(modes[b].lambda - modes[b - 1].lambda) < 1e-9 * (1.0 + std::abs(modes[b].lambda)))
            ++b;
        if (b - a > 1) {
            std::vector<Eigen::VectorXcd> candidates;
            for (std::size_t i = a; i < b; ++i) {
                if (ch.planar() && classify(modes[i].x, ch) == SymmetryLabel::None) {
                    Eigen::VectorXcd va = modes[i].x, vb = modes[i].x;
                    for (Eigen::Index c = 0; c < va.size(); ++c) {
                        if (ch.label(static_cast<std::size_t>(c)) == SymmetryLabel::APrime)
                            vb(c) = 0.0;
                        else
                            va(c) = 0.0;
                    }
                    candidates.push_back(std::move(va));
                    candidates.push_back(std::move(vb));
                } else {
                    candidates.push_back(modes[i].x);
                }
            }
            std::vector<Eigen::VectorXcd> kept;
            for (auto& v : candidates) {
                if (kept.size() == b - a) break;
                Eigen::VectorXcd u = v;
                for (const auto& w : kept) u -= (w.adjoint() * s * u).value() * w;
                const double nrm = std::sqrt(std::abs((u.adjoint() * s * u).value()));
                if (nrm > 1e-6) kept.push_back(u / nrm);
            }
            if (kept.size() == b - a)
                for (std::size_t i = a; i < b; ++i) modes[i].x = kept[i - a];
        }
        a = b;
    }
}

} // namespace detail

struct SolveOptions {
    /// Relative floor applied to the spectrum of S when the plain Cholesky
    /// reduction fails. 0 disables the fallback: a numerically singular S
    /// then raises the singular-overlap error. The channel basis of compact
    /// multi-center molecules is redundant at low k (the translated waves
    /// are band-limited on the k-sphere), which drives the smallest
    /// eigenvalues of S to the roundoff floor; modes in that near-null
    /// space carry |lambda| ~ 1/floor and are scattering-inert.
    double overlap_floor = 0.0;
    bool* used_floor = nullptr; // set when the fallback path was taken
};

namespace detail {

struct BlockSolution {
    Eigen::VectorXd lambda;
    Eigen::MatrixXcd x;
};

/// Generalized hermitian eigensolve of one (sub)pencil: Cholesky reduction,
/// with a spectral-floor fallback for a roundoff-singular overlap.
inline BlockSolution solve_pencil(const Eigen::MatrixXcd& s, const Eigen::MatrixXcd& n,
                                  const SolveOptions& opt) {
    BlockSolution out;
    try {
        const Eigen::MatrixXcd L = cholesky_lower(s);
        const auto lower = L.triangularView<Eigen::Lower>();
        Eigen::MatrixXcd M = lower.solve(n);
        M = lower.solve(M.adjoint()).adjoint();
        M = 0.5 * (M + M.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
        if (es.info() != Eigen::Success) throw numerical_error("hermitian eigensolver failed to converge");
        out.lambda = es.eigenvalues();
        out.x = L.adjoint().triangularView<Eigen::Upper>().solve(es.eigenvectors());
    } catch (const numerical_error&) {
        if (!(opt.overlap_floor > 0.0)) throw;
        // Spectral reduction with a floored overlap spectrum. Modes caught by
        // the floor live in the numerical null space of S; they come out with
        // |lambda| ~ 1/floor, i.e. delta ~ 0 (mod pi), and are scattering-inert.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sd(s);
        if (sd.info() != Eigen::Success) throw numerical_error("eigendecomposition of S failed");
        const double tau = opt.overlap_floor * sd.eigenvalues().maxCoeff();
        const Eigen::VectorXd root = sd.eigenvalues().cwiseMax(tau).cwiseSqrt();
        const Eigen::MatrixXcd basis = sd.eigenvectors() * root.cwiseInverse().asDiagonal();
        Eigen::MatrixXcd M = basis.adjoint() * n * basis;
        M = 0.5 * (M + M.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
        if (es.info() != Eigen::Success) throw numerical_error("hermitian eigensolver failed to converge");
        out.lambda = es.eigenvalues();
        out.x = basis * es.eigenvectors();
        if (opt.used_floor) *opt.used_floor = true;
    }
    return out;
}

} // namespace detail

/// Solve N|x> = lambda S|x> by Cholesky reduction and a hermitian
/// eigensolve; eigenvectors come back S-normalized. Planar molecules are
/// solved per symmetry block (S and N are exactly block-diagonal in the
/// A'/A'' channel split), so every mode carries an exact symmetry label.
inline ModeSet solve_modes(const ChannelMatrix& S, const ChannelMatrix& N, const ChannelList& ch,
                           const SolveOptions& opt = {}) {
    ModeSet out;
    out.k = S.k;
    out.energy = 0.5 * S.k * S.k;
    const Eigen::Index n = S.m.rows();

    std::vector<std::pair<SymmetryLabel, std::vector<Eigen::Index>>> blocks;
    if (ch.planar()) {
        blocks.push_back({SymmetryLabel::APrime, {}});
        blocks.push_back({SymmetryLabel::ADoublePrime, {}});
        for (Eigen::Index c = 0; c < n; ++c) {
            const bool aprime = ch.label(static_cast<std::size_t>(c)) == SymmetryLabel::APrime;
            blocks[aprime ? 0 : 1].second.push_back(c);
        }
    } else {
        blocks.push_back({SymmetryLabel::None, {}});
        for (Eigen::Index c = 0; c < n; ++c) blocks[0].second.push_back(c);
    }

    for (const auto& [label, idx] : blocks) {
        if (idx.empty()) continue;
        const auto nb = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXcd sb(nb, nb), nbm(nb, nb);
        for (Eigen::Index a = 0; a < nb; ++a)
            for (Eigen::Index b = 0; b < nb; ++b) {
                sb(a, b) = S.m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
                nbm(a, b) = N.m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            }
        const auto sol = detail::solve_pencil(sb, nbm, opt);
        for (Eigen::Index i = 0; i < nb; ++i) {
            Mode mode;
            mode.lambda = sol.lambda(i);
            mode.delta = detail::mode_delta_from_lambda(mode.lambda);
            mode.symmetry = label;
            mode.x = Eigen::VectorXcd::Zero(n);
            for (Eigen::Index a = 0; a < nb; ++a)
                mode.x(idx[static_cast<std::size_t>(a)]) = sol.x(a, i);
            out.modes.push_back(std::move(mode));
        }
    }
    std::stable_sort(out.modes.begin(), out.modes.end(),
                     [](const Mode& a, const Mode& b) { return a.lambda < b.lambda; });
    detail::purify_degenerate(out.modes, S.m, ch);
    return out;
}

/// Per-channel w coefficients of one mode: w_il = sin(delta)(cot(delta_il) -
/// cot(delta)) on channels the mode populates, 0 elsewhere (in particular,
/// all zero for a single-atom molecule where delta = delta_il).
inline std::vector<double> w_coefficients(const Mode& mode, const Molecule& mol, const ChannelList& ch,
                                          const PhaseSlice& phases) {
    std::vector<double> w(ch.size(), 0.0);
    const double sin_delta = 1.0 / std::sqrt(1.0 + mode.lambda * mode.lambda);
    const double support = 1e-12 * mode.x.cwiseAbs().maxCoeff();
    for (std::size_t c = 0; c < ch.size(); ++c) {
        if (std::abs(mode.x(static_cast<Eigen::Index>(c))) <= support) continue;
        const auto& channel = ch.at(c);
        const double delta_il = phases.get(mol.atom(channel.atom).species, channel.l);
        const double cot_il = std::cos(delta_il) / std::sin(delta_il);
        w[c] = sin_delta * (cot_il - mode.lambda);
    }
    return w;
}

/// One phase branch followed through the energy scan.
struct Branch {
    int id = 0;
    SymmetryLabel symmetry = SymmetryLabel::None;
    std::vector<std::size_t> mode_index; // per energy: index into ModeSet.modes
    std::vector<double> lambda;
    std::vector<double> delta; // unwrapped, continuous in energy
};

struct EnergyScan {
    std::vector<double> energies; // hartree
    std::vector<ModeSet> modes;   // per energy
    std::vector<Branch> branches;
    std::vector<std::string> warnings;
};

/// Solve the eigenproblem on every grid energy (in parallel) and associate
/// modes at adjacent energies into continuous branches by maximal
/// S-overlap within each symmetry block; near-ties fall back to eigenvalue
/// proximity and are reported as warnings.
inline EnergyScan scan_energies(const Molecule& mol, const ChannelList& ch,
                                const PhaseTable& phases) {
    EnergyScan scan;
    scan.energies = phases.energies;
    const std::size_t ne = scan.energies.size();
    const std::size_t nmodes = ch.size();
    scan.modes.resize(ne);
    std::vector<Eigen::MatrixXcd> s_matrices(ne);
    const GauntTable gaunt = make_gaunt_table(mol, ch);

    std::vector<char> floored(ne, 0);
    parallel_for(ne, [&](std::size_t ie) {
        const double k = wavenumber(scan.energies[ie]);
        const auto S = assemble_S(mol, ch, k, gaunt);
        const auto N = assemble_N(mol, ch, k, phases.slice(ie), gaunt);
        SolveOptions opt;
        opt.overlap_floor = default_overlap_floor;
        bool used = false;
        opt.used_floor = &used;
        scan.modes[ie] = solve_modes(S, N, ch, opt);
        floored[ie] = used ? 1 : 0;
        s_matrices[ie] = S.m;
    });
    for (std::size_t ie = 0; ie < ne; ++ie)
        if (floored[ie])
            scan.warnings.push_back("overlap matrix numerically singular at E = " +
                                    std::to_string(hartree_to_ev(scan.energies[ie])) +
                                    " eV; spectral floor applied (near-null modes are scattering-inert)");

    // branch_of[ie][mode index] = branch id
    std::vector<std::vector<int>> branch_of(ne, std::vector<int>(nmodes, -1));
    scan.branches.resize(nmodes);
    for (std::size_t b = 0; b < nmodes; ++b) {
        auto& br = scan.branches[b];
        br.id = static_cast<int>(b);
        br.symmetry = scan.modes[0].modes[b].symmetry;
        br.mode_index.resize(ne);
        br.lambda.resize(ne);
        br.delta.resize(ne);
        br.mode_index[0] = b;
        br.lambda[0] = scan.modes[0].modes[b].lambda;
        br.delta[0] = scan.modes[0].modes[b].delta;
        branch_of[0][b] = static_cast<int>(b);
    }

    for (std::size_t ie = 0; ie + 1 < ne; ++ie) {
        const auto& cur = scan.modes[ie];
        const auto& nxt = scan.modes[ie + 1];
        Eigen::MatrixXcd xc(static_cast<Eigen::Index>(nmodes), static_cast<Eigen::Index>(nmodes));
        Eigen::MatrixXcd xn(static_cast<Eigen::Index>(nmodes), static_cast<Eigen::Index>(nmodes));
        for (std::size_t m = 0; m < nmodes; ++m) {
            xc.col(static_cast<Eigen::Index>(m)) = cur.modes[m].x;
            xn.col(static_cast<Eigen::Index>(m)) = nxt.modes[m].x;
        }
        const Eigen::MatrixXd overlap = (xc.adjoint() * s_matrices[ie + 1] * xn).cwiseAbs();

        std::vector<bool> used(nmodes, false);
        for (std::size_t n = 0; n < nmodes; ++n) {
            const int b = branch_of[ie][n];
            // best and runner-up among unused candidates of the same symmetry
            std::ptrdiff_t best = -1, second = -1;
            for (std::size_t m = 0; m < nmodes; ++m) {
                if (used[m]) continue;
                if (nxt.modes[m].symmetry != cur.modes[n].symmetry) continue;
                const double o = overlap(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
                if (best < 0 || o > overlap(static_cast<Eigen::Index>(n), best)) {
                    second = best;
                    best = static_cast<std::ptrdiff_t>(m);
                } else if (second < 0 || o > overlap(static_cast<Eigen::Index>(n), second)) {
                    second = static_cast<std::ptrdiff_t>(m);
                }
            }
            if (best < 0) {
                // fall back to any unused mode (symmetry classification failed)
                for (std::size_t m = 0; m < nmodes && best < 0; ++m)
                    if (!used[m]) best = static_cast<std::ptrdiff_t>(m);
            } else if (second >= 0) {
                const double o1 = overlap(static_cast<Eigen::Index>(n), best);
                const double o2 = overlap(static_cast<Eigen::Index>(n), second);
                if (std::abs(o1 - o2) < 1e-3) {
                    const double l_ref = cur.modes[n].lambda;
                    const double d1 = std::abs(nxt.modes[static_cast<std::size_t>(best)].lambda - l_ref);
                    const double d2 = std::abs(nxt.modes[static_cast<std::size_t>(second)].lambda - l_ref);
                    if (d2 < d1) best = second;
                    scan.warnings.push_back("ambiguous branch association at E = " +
                                            std::to_string(hartree_to_ev(scan.energies[ie + 1])) +
                                            " eV (branch " + std::to_string(b) +
                                            "); tie broken by eigenvalue proximity");
                }
            }
            used[static_cast<std::size_t>(best)] = true;
            branch_of[ie + 1][static_cast<std::size_t>(best)] = b;
            auto& br = scan.branches[static_cast<std::size_t>(b)];
            br.mode_index[ie + 1] = static_cast<std::size_t>(best);
            br.lambda[ie + 1] = nxt.modes[static_cast<std::size_t>(best)].lambda;
            br.delta[ie + 1] =
                unwrap_phase(nxt.modes[static_cast<std::size_t>(best)].delta, br.delta[ie]);
        }
    }
    return scan;
}

} // namespace mscat
