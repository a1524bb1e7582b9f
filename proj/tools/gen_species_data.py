#!/usr/bin/env python3
"""Generate the bundled model species tables (data/species/*.dat).

These are smooth analytic stand-ins for ab initio atomic data: a screened
effective charge q(r) = Z exp(-r/a) and an exponential angle-averaged
electron density normalized to Z electrons. They are meant to exercise the
full pipeline with physically plausible magnitudes, not to reproduce any
particular quantum-chemistry calculation.
"""

import math
import os

IONIZATION_EV = 8.35  # molecular ionization energy used by the exchange model

# element: (Z, screening length a, density scale b), lengths in bohr.
# Screening lengths for the heavy atoms sit ~15% above the Thomas-Fermi
# estimate, which gives the fixture pipeline a resonance-rich phase structure
# in the 0.1-10 eV window (both symmetries, narrow and broad widths).
SPECIES = {
    "H": (1, 0.8853, 0.75),
    "C": (6, 0.5604, 0.55),
    "N": (7, 0.5323, 0.52),
    "O": (8, 0.5091, 0.50),
}

R_MIN, R_MAX, N_POINTS = 0.001, 2.2, 441


def grid():
    ratio = (R_MAX / R_MIN) ** (1.0 / (N_POINTS - 1))
    return [R_MIN * ratio**i for i in range(N_POINTS)]


def main():
    out_dir = os.path.join(os.path.dirname(__file__), "..", "data", "species")
    os.makedirs(out_dir, exist_ok=True)
    for label, (z, a, b) in SPECIES.items():
        rho0 = z / (8.0 * math.pi * b**3)
        lines = [f"species {label} I_eV {IONIZATION_EV}"]
        lines.append("# r_bohr q rho_bohr^-3  (model data: q = Z exp(-r/a), rho = Z exp(-r/b)/(8 pi b^3))")
        for r in grid():
            q = z * math.exp(-r / a)
            rho = rho0 * math.exp(-r / b)
            lines.append(f"{r:.12g} {q:.12g} {rho:.12g}")
        path = os.path.join(out_dir, f"{label}.dat")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
