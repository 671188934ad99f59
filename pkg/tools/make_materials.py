"""Regenerate src/nucinv/data/materials.yaml.

Needs the `periodictable` package (Henke/CXRO atomic scattering factors),
which is not a runtime dependency of nucinv. Run from the repository root:

    python3 tools/make_materials.py > src/nucinv/data/materials.yaml
"""

from __future__ import annotations

import periodictable as pt
from periodictable import xsf

ENERGIES = {"57Fe": 14.4125, "193Pt": 1.642, "119Sn": 23.880, "169Tm": 8.4103, "187Os": 9.756}

# name -> (formula, natural-abundance density g/cm^3)
MATERIALS = {
    "Pt": ("Pt", 21.45),
    "Pd": ("Pd", 12.02),
    "C": ("C", 2.0),
    "57Fe": ("Fe[57]", 7.874),
    "193Pt": ("Pt[193]", 21.45),
    "119Sn": ("Sn[119]", 7.31),
    "169Tm": ("Tm[169]", 9.32),
    "187Os": ("Os[187]", 22.59),
}


def main():
    print(f"# generated by tools/make_materials.py with periodictable {pt.__version__}")
    print("# n = 1 - delta + i beta; densities in g/cm^3 at natural abundance (isotopes scaled by mass)")
    print("energies_kev:")
    for iso, e in ENERGIES.items():
        print(f"  {iso}: {e}")
    print("materials:")
    for name, (formula, rho) in MATERIALS.items():
        print(f"  {name}:")
        print(f"    formula: '{formula}'")
        print(f"    natural_density: {rho}")
        print("    constants:")
        for iso, e in ENERGIES.items():
            n = xsf.index_of_refraction(formula, natural_density=rho, energy=e)
            print(f"      {iso}: {{delta: {1 - n.real:.6e}, beta: {-n.imag:.6e}}}")


if __name__ == "__main__":
    main()
