#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mscat/errors.hpp"
#include "mscat/specfun.hpp"

// Molecular geometry and channel bookkeeping: molecule file parsing,
// effective-radius validation, the flat ordering of scattering channels
// (atom, l, m), and reflection-symmetry labels for planar molecules.
namespace mscat {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

struct Atom {
    std::string label;   // element + index, e.g. C1
    std::string species; // element part of the label
    double radius = 0.0; // effective (muffin-tin) radius d_i, bohr
    Vec3 pos;            // bohr
};

/// Coincident or grossly nested spheres are rejected at parse time; the
/// bond-length radius conventions commonly used for the effective radii can
/// overlap neighbouring spheres slightly, so mild overlap is left to
/// validate_radii to report.
inline constexpr double gross_overlap_limit = 0.5;   // bohr
inline constexpr double overlap_tolerance = 1e-6;    // bohr, strict non-overlap slack
inline constexpr double planarity_tolerance = 1e-8;  // bohr, |z| below this counts as in-plane

class Molecule {
public:
    explicit Molecule(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw input_error("Molecule: needs at least one atom");
        for (const auto& a : atoms_)
            if (!(a.radius > 0.0)) throw input_error("Molecule: atom " + a.label + " has non-positive radius");
    }

    std::size_t size() const { return atoms_.size(); }
    const Atom& atom(std::size_t i) const { return atoms_[i]; }
    const std::vector<Atom>& atoms() const { return atoms_; }

    Vec3 pair_vector(std::size_t i, std::size_t j) const { return atoms_[i].pos - atoms_[j].pos; }
    double pair_distance(std::size_t i, std::size_t j) const { return pair_vector(i, j).norm(); }

    UnitDirection pair_direction(std::size_t i, std::size_t j) const {
        const Vec3 v = pair_vector(i, j);
        return UnitDirection::from_cartesian(v.x, v.y, v.z);
    }

    bool is_planar() const {
        for (const auto& a : atoms_)
            if (std::abs(a.pos.z) >= planarity_tolerance) return false;
        return true;
    }

    /// Distinct species labels in order of first appearance.
    std::vector<std::string> species_labels() const {
        std::vector<std::string> out;
        for (const auto& a : atoms_) {
            bool seen = false;
            for (const auto& s : out) seen = seen || (s == a.species);
            if (!seen) out.push_back(a.species);
        }
        return out;
    }

private:
    std::vector<Atom> atoms_;
};

namespace detail {

inline std::string shortest_repr(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Parse a molecule file: optional `units bohr` header, then rows
/// `label d x y [z]` (z defaults to 0); `#` starts a comment.
inline Molecule parse_molecule(std::istream& in, const std::string& origin = "<molecule>") {
    std::vector<Atom> atoms;
    std::string line;
    int lineno = 0;
    bool first_content = true;
    auto fail = [&](const std::string& msg) {
        throw input_error(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string label;
        if (!(ls >> label)) continue;
        if (first_content && label == "units") {
            std::string unit;
            if (!(ls >> unit) || unit != "bohr") fail("only `units bohr` is supported");
            first_content = false;
            continue;
        }
        first_content = false;
        Atom a;
        a.label = label;
        for (char c : label) {
            if (std::isalpha(static_cast<unsigned char>(c)))
                a.species.push_back(c);
            else
                break;
        }
        if (a.species.empty()) fail("atom label `" + label + "` has no element prefix");
        double d = 0.0, x = 0.0, y = 0.0, z = 0.0;
        if (!(ls >> d >> x >> y)) fail("expected `label d x y [z]`");
        if (!(ls >> z)) z = 0.0;
        std::string extra;
        if (ls >> extra) fail("trailing fields after atom row");
        if (!(d > 0.0)) fail("radius of " + label + " must be positive");
        a.radius = d;
        a.pos = {x, y, z};
        atoms.push_back(std::move(a));
    }
    if (atoms.empty()) throw input_error(origin + ": no atoms");
    for (std::size_t i = 0; i < atoms.size(); ++i)
        for (std::size_t j = i + 1; j < atoms.size(); ++j) {
            const double dist = (atoms[i].pos - atoms[j].pos).norm();
            const double sum = atoms[i].radius + atoms[j].radius;
            if (dist < sum - gross_overlap_limit)
                throw input_error(origin + ": spheres of " + atoms[i].label + " and " + atoms[j].label +
                                  " overlap grossly (distance " + std::to_string(dist) + ", radii sum " +
                                  std::to_string(sum) + "); check the effective radii");
        }
    try {
        return Molecule(std::move(atoms));
    } catch (const input_error& e) {
        throw input_error(origin + ": " + e.what());
    }
}

inline Molecule parse_molecule(const std::string& text, const std::string& origin = "<molecule>") {
    std::istringstream in(text);
    return parse_molecule(in, origin);
}

/// Canonical text form; parse(serialize(m)) reproduces m exactly and
/// serialize is a fixed point on files already in canonical form.
inline std::string serialize_molecule(const Molecule& m) {
    std::string out = "units bohr\n";
    for (const auto& a : m.atoms()) {
        out += a.label;
        out += ' ';
        out += detail::shortest_repr(a.radius);
        out += ' ';
        out += detail::shortest_repr(a.pos.x);
        out += ' ';
        out += detail::shortest_repr(a.pos.y);
        if (a.pos.z != 0.0) {
            out += ' ';
            out += detail::shortest_repr(a.pos.z);
        }
        out += '\n';
    }
    return out;
}

struct RadiusViolation {
    std::size_t i = 0, j = 0;
    double distance = 0.0;
    double radius_sum = 0.0;
    double overlap() const { return radius_sum - distance; }
};

/// All pairs whose spheres overlap by more than the strict tolerance.
inline std::vector<RadiusViolation> validate_radii(const Molecule& m) {
    std::vector<RadiusViolation> out;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            const double dist = m.pair_distance(i, j);
            const double sum = m.atom(i).radius + m.atom(j).radius;
            if (dist < sum - overlap_tolerance) out.push_back({i, j, dist, sum});
        }
    return out;
}

/// Pairs whose sphere radii nearly add up to the pair distance — the
/// touching-sphere condition used to choose effective radii from bonds.
/// Informational, not an error.
inline std::vector<RadiusViolation> bonded_pairs(const Molecule& m, double tol = 0.05) {
    std::vector<RadiusViolation> out;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            const double dist = m.pair_distance(i, j);
            const double sum = m.atom(i).radius + m.atom(j).radius;
            if (std::abs(dist - sum) <= tol) out.push_back({i, j, dist, sum});
        }
    return out;
}

enum class SymmetryLabel { APrime, ADoublePrime, None };

inline const char* to_string(SymmetryLabel s) {
    switch (s) {
        case SymmetryLabel::APrime: return "Aprime";
        case SymmetryLabel::ADoublePrime: return "Adoubleprime";
        default: return "none";
    }
}

inline SymmetryLabel symmetry_from_string(const std::string& s) {
    if (s == "Aprime") return SymmetryLabel::APrime;
    if (s == "Adoubleprime") return SymmetryLabel::ADoublePrime;
    if (s == "none") return SymmetryLabel::None;
    throw input_error("unknown symmetry label: " + s);
}

/// Reflection z -> -z multiplies Y_lm by (-1)^{l+m}: channels with l + m
/// even are A' (symmetric), odd are A''.
inline SymmetryLabel channel_parity(int l, int m) {
    return ((l + m) % 2 == 0) ? SymmetryLabel::APrime : SymmetryLabel::ADoublePrime;
}

/// Per-species angular momentum truncation with a global default.
struct LMap {
    int default_l = 1;
    std::map<std::string, int> per_species;

    int for_species(const std::string& label) const {
        auto it = per_species.find(label);
        return it == per_species.end() ? default_l : it->second;
    }
};

/// Deterministic flat ordering of scattering channels: atoms in file order,
/// then l ascending, then m from -l to l.
class ChannelList {
public:
    struct Channel {
        std::size_t atom = 0;
        int l = 0;
        int m = 0;
    };

    ChannelList(const Molecule& m, const LMap& lmap) : planar_(m.is_planar()) {
        offsets_.reserve(m.size() + 1);
        offsets_.push_back(0);
        lmax_.reserve(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const int L = lmap.for_species(m.atom(i).species);
            if (L < 0) throw input_error("ChannelList: negative lmax for species " + m.atom(i).species);
            lmax_.push_back(L);
            for (int l = 0; l <= L; ++l)
                for (int mm = -l; mm <= l; ++mm) channels_.push_back({i, l, mm});
            offsets_.push_back(channels_.size());
        }
    }

    std::size_t size() const { return channels_.size(); }
    const Channel& at(std::size_t flat) const { return channels_[flat]; }
    int atom_lmax(std::size_t atom) const { return lmax_[atom]; }
    std::size_t atom_offset(std::size_t atom) const { return offsets_[atom]; }
    bool planar() const { return planar_; }

    std::size_t flat(std::size_t atom, int l, int m) const {
        return offsets_[atom] + static_cast<std::size_t>(lm_index(l, m));
    }

    /// A'/A'' for planar molecules, None otherwise.
    SymmetryLabel label(std::size_t flat_index) const {
        if (!planar_) return SymmetryLabel::None;
        const auto& c = channels_[flat_index];
        return channel_parity(c.l, c.m);
    }

private:
    std::vector<Channel> channels_;
    std::vector<std::size_t> offsets_;
    std::vector<int> lmax_;
    bool planar_ = false;
};

} // namespace mscat
