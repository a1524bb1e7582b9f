#pragma once

#include <cmath>

// Atomic (Hartree) units everywhere inside the library: energies in hartree,
// lengths in bohr, wavenumbers in bohr^-1. Electron-volts appear only at I/O
// boundaries.
namespace mscat {

inline constexpr double ev_per_hartree = 27.2114;

constexpr double ev_to_hartree(double ev) { return ev / ev_per_hartree; }
constexpr double hartree_to_ev(double ha) { return ha * ev_per_hartree; }

/// k = sqrt(2E) for a free electron of energy E (hartree).
inline double wavenumber(double energy_hartree) { return std::sqrt(2.0 * energy_hartree); }

} // namespace mscat
