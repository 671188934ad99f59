"""Fit the single-mode cavity parameters of the Pt/C/57Fe/C/Pt reference cavity.

Writes src/nucinv/data/paper_cavity.yaml. Run from the repository root.
"""

from __future__ import annotations

import math
from pathlib import Path

import yaml

from nucinv.cavity import Layer, LayerStack, nuclear_resonance
from nucinv.requirements import fit_stack, load_isotopes, materials_for, mode_angles

LAYOUT = [("Pt", 2.6), ("C", 7.9), ("57Fe", 1.5), ("C", 9.3), ("Pt", None)]


def main():
    iso = load_isotopes()["57Fe"]
    mats = materials_for(iso.name)
    res = nuclear_resonance(iso.number_density, iso.energy_kev, iso.gamma, iso.alpha[0], iso.f_lm, iso.i_ground, iso.i_excited)
    layers = tuple(
        Layer(name, d, mats[name]["delta"], mats[name]["beta"], res if name == iso.material else None) for name, d in LAYOUT
    )
    stack = LayerStack(layers, iso.energy_kev)
    modes = mode_angles(stack)
    fit = fit_stack(stack, iso.gamma, float(modes[0]), float(modes[1]))
    doc = {
        "description": "single-mode fit of Pt(2.6 nm)/C(7.9 nm)/57Fe(1.5 nm)/C(9.3 nm)/Pt at 14.4125 keV",
        "layout": [{"material": m, "thickness_nm": d} for m, d in LAYOUT],
        "units": "rates in rad/fs, angles in mrad",
        "theta0": fit.theta0,
        "kappa": fit.kappa,
        "kappa_r": fit.kappa_r,
        "g_sqrt_n": fit.g_sqrt_n,
        "gamma": fit.gamma,
        "sign": fit.sign,
        "residual": fit.residual,
    }
    out = Path(__file__).resolve().parents[1] / "src" / "nucinv" / "data" / "paper_cavity.yaml"
    out.write_text("# generated by tools/fit_paper_cavity.py\n" + yaml.safe_dump(doc, sort_keys=False))
    print(yaml.safe_dump(doc, sort_keys=False))
    print("kappa [meV]", fit.kappa * 658.2119569, "kappa_r/kappa", fit.kappa_r / fit.kappa, "gsqrtN/gamma", fit.g_sqrt_n / fit.gamma,
          "halfwidth/gamma", fit.g_sqrt_n**2 * 2 / 3 / fit.kappa / 2 / fit.gamma * 2 / math.sqrt(1) / 2)


if __name__ == "__main__":
    main()
