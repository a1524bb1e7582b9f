// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mscat/csvio.hpp"
#include "mscat/msm.hpp"
#include "mscat/observables.hpp"

namespace fs = std::filesystem;
using namespace mscat;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int id, const std::string& name, bool pass, const std::string& detail, double seconds) {
    std::printf("[%s] criterion %d: %s (%s, %.2f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    if (!pass) ++failures;
}

double mod_pi_dist(double a, double b) {
    double d = std::fmod(a - b, pi);
    if (d > 0.5 * pi) d -= pi;
    if (d < -0.5 * pi) d += pi;
    return std::abs(d);
}

Molecule uracil() {
    return parse_molecule(read_file(std::string(MSCAT_DATA_DIR) + "/uracil.mol"), "uracil.mol");
}

std::vector<SpeciesPotential> uracil_species(const Molecule& mol, int lmax = 1) {
    std::map<std::string, double> radius;
    for (const auto& a : mol.atoms()) radius[a.species] = a.radius;
    std::vector<SpeciesPotential> out;
    for (const auto& label : mol.species_labels())
        out.push_back(
            {AtomicPotential(parse_species_file(std::string(MSCAT_DATA_DIR) + "/species/" + label + ".dat"),
                             radius[label]),
             lmax});
    return out;
}

// ---- criterion 1 ---------------------------------------------------------
void criterion_1() {
    Timer t;
    std::vector<Atom> atoms(2);
    atoms[0] = {"X1", "X", 0.2, {0.0, 0.0, 0.0}};
    atoms[1] = {"X2", "X", 0.2, {2.0, 0.0, 0.0}};
    const Molecule mol(atoms);
    LMap lmap;
    lmap.default_l = 0;
    const ChannelList ch(mol, lmap);
    const double k = pi / 2.0; // kR = pi
    PhaseSlice slice;
    slice.delta["X"] = {pi / 4.0}; // cot = 1
    const auto modes = solve_modes(assemble_S(mol, ch, k), assemble_N(mol, ch, k, slice), ch);

    double max_err = 1e300;
    bool vectors_ok = false;
    if (modes.modes.size() == 2) {
        max_err = std::max(std::abs(modes.modes[0].lambda - (1.0 - 1.0 / pi)),
                           std::abs(modes.modes[1].lambda - (1.0 + 1.0 / pi)));
        const cplx r0 = modes.modes[0].x(1) / modes.modes[0].x(0);
        const cplx r1 = modes.modes[1].x(1) / modes.modes[1].x(0);
        vectors_ok = std::abs(r0 - cplx(-1.0)) < 1e-9 && std::abs(r1 - cplx(1.0)) < 1e-9;
    }
    const double sec = t.seconds();
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max |lambda err| = %.2e, eigenvectors (1,+-1): %s", max_err,
                  vectors_ok ? "yes" : "no");
    report(1, "two-scatterer analytic eigenpairs", max_err < 1e-10 && vectors_ok && sec < 1.0, detail, sec);
}

// ---- criterion 2 ---------------------------------------------------------
void criterion_2() {
    Timer t;
    std::vector<Atom> one{{"A1", "A", 0.5, {0.4, -1.0, 0.25}}};
    const Molecule mol(one);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> phase(-1.45, 1.45), kdist(0.1, 1.6);
    double worst = 0.0;
    for (int lmax = 0; lmax <= 2; ++lmax) {
        LMap lmap;
        lmap.default_l = lmax;
        const ChannelList ch(mol, lmap);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> deltas;
            for (int l = 0; l <= lmax; ++l) {
                double d = phase(rng);
                if (std::abs(std::sin(d)) < 1e-3) d += 0.5;
                deltas.push_back(d);
            }
            PhaseSlice slice;
            slice.delta["A"] = deltas;
            const double k = kdist(rng);
            const auto modes = solve_modes(assemble_S(mol, ch, k), assemble_N(mol, ch, k, slice), ch);
            for (const auto& mode : modes.modes) {
                double best = 1e300;
                for (double d : deltas) best = std::min(best, mod_pi_dist(mode.delta, d));
                worst = std::max(worst, best);
            }
        }
    }
    const double sec = t.seconds();
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max |delta_mol - delta_atom| = %.2e over 150 solves", worst);
    report(2, "single-atom equivalence", worst < 1e-12 && sec < 5.0, detail, sec);
}

// ---- criterion 3 ---------------------------------------------------------
void criterion_3() {
    Timer t;
    auto exact = [](double v0, double d, double k) {
        const double kap = std::sqrt(k * k + 2.0 * v0);
        return std::atan2(k * std::tan(kap * d), kap) - k * d;
    };
    double worst = 0.0;
    int combos = 0;
    for (double v0 : {0.3, 0.8, 1.5, 3.0, 5.0})
        for (double d : {1.0, 2.0})
            for (double k : {0.3, 0.9}) {
                const double got = atomic_phase([&](double) { return -v0; }, d, 0, k);
                worst = std::max(worst, mod_pi_dist(got, exact(v0, d, k)));
                ++combos;
            }
    // convergence order across one step halving, three representative wells;
    // coarse meshes keep truncation above the recurrence roundoff floor
    double min_order = 1e300;
    for (const auto& [v0, d, k] : std::vector<std::tuple<double, double, double>>{
             {5.0, 2.0, 0.5}, {3.0, 1.5, 0.8}, {1.5, 2.0, 0.4}}) {
        NumerovOptions coarse, fine;
        coarse.n_steps = 80;
        fine.n_steps = 160;
        const double ref = exact(v0, d, k);
        const double e1 = mod_pi_dist(atomic_phase([&](double) { return -v0; }, d, 0, k, coarse), ref);
        const double e2 = mod_pi_dist(atomic_phase([&](double) { return -v0; }, d, 0, k, fine), ref);
        min_order = std::min(min_order, std::log2(e1 / e2));
    }
    const double sec = t.seconds();
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max phase error = %.2e over %d combos, observed order >= %.2f",
                  worst, combos, min_order);
    report(3, "square-well phase accuracy and order", worst < 1e-6 && min_order >= 3.8 && sec < 10.0,
           detail, sec);
}

// ---- criterion 4 ---------------------------------------------------------
void criterion_4() {
    Timer t;
    const SphereGrid grid(24, 24);
    const int lcap = 3;
    // precompute Y tables per grid point
    std::vector<std::vector<cplx>> ytab(grid.dirs.size());
    for (std::size_t p = 0; p < grid.dirs.size(); ++p) ytab[p] = sph_harm_all(lcap, grid.dirs[p]);

    double worst = 0.0;
    bool rules_exact = true;
    for (int l1 = 0; l1 <= lcap; ++l1)
        for (int m1 = -l1; m1 <= l1; ++m1)
            for (int l2 = 0; l2 <= lcap; ++l2)
                for (int m2 = -l2; m2 <= l2; ++m2)
                    for (int l = 0; l <= lcap; ++l)
                        for (int m = -l; m <= l; ++m) {
                            cplx integral = 0.0;
                            for (std::size_t p = 0; p < grid.dirs.size(); ++p)
                                integral += grid.weights[p] *
                                            std::conj(ytab[p][static_cast<std::size_t>(lm_index(l1, m1))]) *
                                            ytab[p][static_cast<std::size_t>(lm_index(l2, m2))] *
                                            ytab[p][static_cast<std::size_t>(lm_index(l, m))];
                            const double q = gaunt_q(l1, m1, l2, m2, l, m);
                            worst = std::max(worst, std::abs(q - four_pi * integral.real()));
                            const bool selection = (m1 == m + m2) && ((l + l1 + l2) % 2 == 0) &&
                                                   (l1 >= std::abs(l - l2)) && (l1 <= l + l2);
                            if (!selection && q != 0.0) rules_exact = false;
                        }
    const double sec = t.seconds();
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max |Q - 4pi*quadrature| = %.2e, selection rules exact: %s",
                  worst, rules_exact ? "yes" : "no");
    report(4, "gaunt/clebsch correctness", worst < 1e-8 && rules_exact && sec < 30.0, detail, sec);
}

// ---- criterion 5 ---------------------------------------------------------
void criterion_5() {
    Timer t;
    const auto mol = uracil();
    LMap lmap;
    const ChannelList ch(mol, lmap);
    const auto species = uracil_species(mol);
    std::vector<double> energies;
    for (int i = 0; i < 20; ++i) energies.push_back(ev_to_hartree(0.1 + (10.0 - 0.1) * i / 19.0));
    const auto table = compute_phase_table(species, energies);
    const GauntTable gaunt = make_gaunt_table(mol, ch);

    double worst_herm = 0.0, worst_cross = 0.0, worst_norm = 0.0, worst_quad = 0.0;
    double worst_norm_phys = 0.0, worst_quad_phys = 0.0; // modes with |lambda| < 1e6
    int posdef_failures = 0, split_failures = 0, eigen_count_failures = 0;
    double min_eig_rel = 1e300;
    std::vector<double> posdef_fail_energies, norm_fail_energies;

    for (std::size_t ie = 0; ie < energies.size(); ++ie) {
        const double k = wavenumber(energies[ie]);
        const auto S = assemble_S(mol, ch, k, gaunt);
        const auto N = assemble_N(mol, ch, k, table.slice(ie), gaunt);
        worst_herm = std::max({worst_herm, (S.m - S.m.adjoint()).cwiseAbs().maxCoeff(),
                               (N.m - N.m.adjoint()).cwiseAbs().maxCoeff()});
        for (std::size_t a = 0; a < ch.size(); ++a)
            for (std::size_t b = 0; b < ch.size(); ++b)
                if (ch.label(a) != ch.label(b))
                    worst_cross = std::max(
                        {worst_cross, std::abs(S.m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))),
                         std::abs(N.m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)))});

        bool posdef = true;
        try {
            detail::cholesky_lower(S.m);
        } catch (const numerical_error&) {
            posdef = false;
            ++posdef_failures;
            posdef_fail_energies.push_back(hartree_to_ev(energies[ie]));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(S.m, Eigen::EigenvaluesOnly);
        min_eig_rel = std::min(min_eig_rel, es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff());

        SolveOptions opt;
        opt.overlap_floor = default_overlap_floor;
        const auto modes = solve_modes(S, N, ch, opt);
        if (modes.modes.size() != 48) ++eigen_count_failures;
        int aprime = 0, adouble = 0;
        double norm_err_here = 0.0;
        for (const auto& mode : modes.modes) {
            if (mode.symmetry == SymmetryLabel::APrime) ++aprime;
            if (mode.symmetry == SymmetryLabel::ADoublePrime) ++adouble;
            const double norm = std::real((mode.x.adjoint() * S.m * mode.x).value());
            norm_err_here = std::max(norm_err_here, std::abs(norm - 1.0));
            const auto A = partial_harmonic(mol, ch, mode, k);
            const double quad_err = std::abs(partial_harmonic_norm(A) - 1.0);
            worst_quad = std::max(worst_quad, quad_err);
            if (std::abs(mode.lambda) < 1e6) {
                worst_norm_phys = std::max(worst_norm_phys, std::abs(norm - 1.0));
                worst_quad_phys = std::max(worst_quad_phys, quad_err);
            }
        }
        if (aprime != 36 || adouble != 12) ++split_failures;
        if (norm_err_here > 1e-6) norm_fail_energies.push_back(hartree_to_ev(energies[ie]));
        worst_norm = std::max(worst_norm, norm_err_here);
        (void)posdef;
    }

    const double sec = t.seconds();
    const bool herm_ok = worst_herm < 1e-10;
    const bool cross_ok = worst_cross < 1e-12;
    const bool posdef_ok = posdef_failures == 0;
    const bool counts_ok = eigen_count_failures == 0 && split_failures == 0;
    const bool norm_ok = worst_norm < 1e-6;
    const bool quad_ok = worst_quad < 1e-6;

    std::printf("    criterion 5 sub-items:\n");
    std::printf("      [%s] hermiticity: max |M - M^+| = %.2e (< 1e-10)\n", herm_ok ? "PASS" : "FAIL",
                worst_herm);
    std::printf("      [%s] S positive definite (all Cholesky pivots > 0): %d of 20 energies fail",
                posdef_ok ? "PASS" : "FAIL", posdef_failures);
    if (!posdef_fail_energies.empty()) {
        std::printf(" (E =");
        for (double e : posdef_fail_energies) std::printf(" %.2f", e);
        std::printf(" eV)");
    }
    std::printf("; min eig / max eig = %.1e: the channel basis is numerically\n"
                "             redundant at these wavenumbers, so S is singular at working precision\n",
                min_eig_rel);
    std::printf("      [%s] 48 real eigenvalues at every energy, 36/12 A'/A'' split\n",
                counts_ok ? "PASS" : "FAIL");
    std::printf("      [%s] exact A'/A'' block decoupling: max cross term = %.2e (< 1e-12)\n",
                cross_ok ? "PASS" : "FAIL", worst_cross);
    std::printf("      [%s] <x|S|x> = 1 within 1e-6 for all modes: max dev = %.2e", norm_ok ? "PASS" : "FAIL",
                worst_norm);
    if (!norm_fail_energies.empty()) {
        std::printf(" (fails at %zu energies; near-null-space modes cannot be S-normalized in\n"
                    "             double precision, and they are scattering-inert)",
                    norm_fail_energies.size());
    }
    std::printf("\n");
    std::printf("      [%s] sphere quadrature of |A|^2 = 1 within 1e-6 for all modes: max dev = %.2e\n",
                quad_ok ? "PASS" : "FAIL", worst_quad);
    std::printf("      (info) restricted to scattering-relevant modes (|lambda| < 1e6): "
                "max |<x|S|x> - 1| = %.2e, max |quad - 1| = %.2e\n",
                worst_norm_phys, worst_quad_phys);

    char detail[64];
    std::snprintf(detail, sizeof(detail), "see sub-items above");
    report(5, "uracil structural invariants",
           herm_ok && cross_ok && posdef_ok && counts_ok && norm_ok && quad_ok && sec < 60.0, detail, sec);
}

// ---- criterion 6 ---------------------------------------------------------
void criterion_6() {
    Timer t;
    const double e_res_ev[3] = {1.2, 2.2, 6.7};
    const double gamma_ev[3] = {1.1, 0.3, 1.5};
    double max_de = 0.0, max_dg = 0.0;
    std::size_t found_count = 0;
    for (int i = 0; i < 3; ++i) {
        const double er = ev_to_hartree(e_res_ev[i]), g = ev_to_hartree(gamma_ev[i]);
        BranchCurve br;
        br.id = i;
        br.symmetry = SymmetryLabel::APrime;
        auto bw = [=](double e) { return std::atan2(0.5 * g, er - e); };
        for (int j = 0; j < 90; ++j) {
            br.energies.push_back(ev_to_hartree(0.2 + (9.0 - 0.2) * j / 89.0));
            br.delta.push_back(bw(br.energies.back()));
        }
        br.eval = bw;
        const auto found = find_resonances({br});
        if (found.records.size() == 1 && found.records[0].has_width) {
            ++found_count;
            max_de = std::max(max_de, std::abs(hartree_to_ev(found.records[0].energy) - e_res_ev[i]));
            max_dg = std::max(max_dg,
                              std::abs(hartree_to_ev(found.records[0].gamma) - gamma_ev[i]) / gamma_ev[i]);
        }
    }
    const double sec = t.seconds();
    char detail[96];
    std::snprintf(detail, sizeof(detail), "recovered %zu/3, max |dE| = %.1e eV, max |dG|/G = %.1e",
                  found_count, max_de, max_dg);
    report(6, "resonance extractor on synthetic Breit-Wigner branches",
           found_count == 3 && max_de < 1e-3 && max_dg < 1e-2 && sec < 1.0, detail, sec);
}

// ---- criterion 7 ---------------------------------------------------------
void criterion_7() {
    Timer t;
    const fs::path out = fs::temp_directory_path() / "mscat_acceptance_run";
    fs::remove_all(out);
    fs::create_directories(out);
    const std::string common = std::string("--molecule ") + MSCAT_DATA_DIR + "/uracil.mol --species-dir " +
                               MSCAT_DATA_DIR + "/species --emin 0.1 --emax 10 --n 100 --out " +
                               out.string() + " >/dev/null 2>/dev/null";
    bool ran = true;
    for (const auto* stage : {"phases", "scatter", "xsec", "resonances"}) {
        const int rc = std::system((std::string(MSCAT_CLI_PATH) + " " + stage + " " + common).c_str());
        ran = ran && WEXITSTATUS(rc) == 0;
    }

    bool sigma_ok = false, smooth_ok = false, additive_ok = false, resonance_ok = false;
    if (ran) {
        std::istringstream xin(read_file(out / "xsec.csv"));
        std::string line;
        std::getline(xin, line);
        std::vector<double> sigma;
        additive_ok = true;
        while (std::getline(xin, line)) {
            std::istringstream ls(line);
            std::string e, tot, ap, app;
            std::getline(ls, e, ',');
            std::getline(ls, tot, ',');
            std::getline(ls, ap, ',');
            std::getline(ls, app, ',');
            sigma.push_back(std::stod(tot));
            additive_ok = additive_ok && tot == format_float(std::stod(ap) + std::stod(app));
        }
        sigma_ok = sigma.size() == 100;
        smooth_ok = true;
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            sigma_ok = sigma_ok && std::isfinite(sigma[i]) && sigma[i] > 0.0;
            if (i > 0) {
                const double rel = std::abs(sigma[i] - sigma[i - 1]) / std::max(sigma[i], sigma[i - 1]);
                smooth_ok = smooth_ok && rel < 0.6;
            }
        }

        // resonance records exist and carry the symmetry of their branch
        std::map<std::string, std::string> branch_symmetry;
        std::istringstream min(read_file(out / "molecular_phases.csv"));
        std::getline(min, line);
        while (std::getline(min, line)) {
            std::istringstream ls(line);
            std::string id, sym;
            std::getline(ls, id, ',');
            std::getline(ls, sym, ',');
            branch_symmetry[id] = sym;
        }
        std::istringstream rin(read_file(out / "resonances.csv"));
        std::getline(rin, line);
        int records = 0;
        resonance_ok = true;
        while (std::getline(rin, line)) {
            std::istringstream ls(line);
            std::string sym, e, g, id;
            std::getline(ls, sym, ',');
            std::getline(ls, e, ',');
            std::getline(ls, g, ',');
            std::getline(ls, id, ',');
            ++records;
            resonance_ok = resonance_ok && (sym == "Aprime" || sym == "Adoubleprime") &&
                           branch_symmetry.count(id) && branch_symmetry[id] == sym;
        }
        resonance_ok = resonance_ok && records > 0;
    }
    const double sec = t.seconds();
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "pipeline ran: %s, sigma positive: %s, smooth: %s, additivity row-exact: %s, "
                  "labeled resonance records: %s",
                  ran ? "yes" : "no", sigma_ok ? "yes" : "no", smooth_ok ? "yes" : "no",
                  additive_ok ? "yes" : "no", resonance_ok ? "yes" : "no");
    report(7, "end-to-end uracil pipeline on bundled model fixtures",
           ran && sigma_ok && smooth_ok && additive_ok && resonance_ok, detail, sec);
    fs::remove_all(out);
}

// ---- criterion 8 ---------------------------------------------------------
void criterion_8() {
    Timer t;
    const SphereGrid grid(50, 100);
    double worst = 0.0;

    auto check_modes = [&](const Molecule& mol, const ChannelList& ch, const ModeSet& modes) {
        for (const auto& mode : modes.modes) {
            const auto A = partial_harmonic(mol, ch, mode, modes.k);
            double integral = 0.0;
            for (std::size_t i = 0; i < grid.dirs.size(); ++i)
                integral += grid.weights[i] * differential_xsec(A, mode.delta, grid.dirs[i]);
            const double s = std::sin(mode.delta);
            const double expected = four_pi / (modes.k * modes.k) * s * s;
            worst = std::max(worst, std::abs(integral - expected));
        }
    };

    std::vector<Atom> atoms(2);
    atoms[0] = {"X1", "X", 0.2, {0.0, 0.0, 0.0}};
    atoms[1] = {"X2", "X", 0.2, {2.0, 0.0, 0.0}};
    const Molecule dimer(atoms);
    LMap lmap0;
    lmap0.default_l = 0;
    const ChannelList ch0(dimer, lmap0);
    PhaseSlice slice0;
    slice0.delta["X"] = {pi / 4.0};
    const double k0 = pi / 2.0;
    check_modes(dimer, ch0, solve_modes(assemble_S(dimer, ch0, k0), assemble_N(dimer, ch0, k0, slice0), ch0));

    const auto mol = uracil();
    LMap lmap;
    const ChannelList ch(mol, lmap);
    const auto species = uracil_species(mol);
    const double e = ev_to_hartree(7.5);
    const auto slice = compute_phase_slice(species, e);
    const double k = wavenumber(e);
    SolveOptions opt;
    opt.overlap_floor = default_overlap_floor;
    check_modes(mol, ch, solve_modes(assemble_S(mol, ch, k), assemble_N(mol, ch, k, slice), ch, opt));

    const double sec = t.seconds();
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max |int dsigma/dOmega - (4pi/k^2) sin^2 delta| = %.2e", worst);
    report(8, "differential/integral cross-section convention consistency", worst < 1e-6 && sec < 60.0,
           detail, sec);
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
