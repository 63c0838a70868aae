"""Rotational levels of the bundled molecules and the trap frequency that
brings the zig-zag mode onto a chosen rotational transition.

Run from the repository root:  python demos/01_levels_and_resonance.py
"""
import numpy as np

from rotcool.config import bundled_molecules
from rotcool.coupling import coupling_table, find_resonances
from rotcool.rotor import build_rotor_block, find_level
from rotcool.trap import normal_modes, three_ion_chain

mols = bundled_molecules()
pd = mols["propanediol"]

print(f"{pd.name}: A, B, C = {pd.A}, {pd.B}, {pd.C} MHz")
for J in range(4):
    row = ", ".join(f"{lev.label} {lev.energy:10.3f}" for lev in build_rotor_block(pd, J).levels)
    print(f"  J={J}: {row}")

# The near-degenerate K-doublet 3_31 / 3_30 sits at a few MHz, right where a
# radial zig-zag mode of a Yb+ / molecule / Yb+ crystal can be tuned.
j1, _ = find_level(pd, "3_31")
j2, _ = find_level(pd, "3_30")
print(f"\n3_31 -> 3_30: {j2.energy - j1.energy:.6f} MHz")

chain = three_ion_chain(172.0, pd.mass)
recs = [r for r in find_resonances(pd, chain, np.linspace(0.1, 20, 400), Jmax=3) if r.pair == "3_31-3_30"]
for r in recs:
    print(f"resonant at radial frequency {r.omega_z:.6f} MHz, b_m = {r.b_m:.3e}, "
          f"prefactor {r.prefactor:.4f} kHz/D")
    ms = normal_modes(three_ion_chain(172.0, pd.mass, 1.0, r.omega_z))
    tab = coupling_table(pd, ms, "zigzag", "3_31", "3_30")
    print("  coupling per |M| (kHz):", {M: round(v, 4) for M, v in tab.items()})

# A near-symmetric central ion barely moves in the zig-zag mode, which is why
# the prefactor is small for a molecule lighter than the atoms.
print("\nzig-zag vector:", np.round(normal_modes(chain).mode("zigzag").vector, 6))
