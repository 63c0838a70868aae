"""Prefactor landscape over molecule mass and radial trap frequency.

Scans a 200 x 200 grid (70-270 u, 0.1-20 MHz) for a Yb+ / molecule / Yb+
chain and lists where the zig-zag mode crosses a dipole-allowed transition of
each bundled molecule.  Takes a few seconds.
"""
import time

import numpy as np

from rotcool.config import bundled_molecules
from rotcool.coupling import scan_resonances
from rotcool.trap import three_ion_chain

mols = list(bundled_molecules().values())
masses = np.linspace(70, 270, 200)
wz = np.linspace(0.1, 20, 200)

t0 = time.perf_counter()
res = scan_resonances(mols, three_ion_chain(172.0, 100.0), wz, masses, Jmax=8, jobs=4)
print(f"scan took {time.perf_counter() - t0:.1f} s; "
      f"{res.stable.sum()} of {res.stable.size} grid points are stable")

vals = res.stable_prefactors()
print("prefactor percentiles (kHz/D) 5/50/95:", np.round(np.percentile(vals, [5, 50, 95]), 3))

for m in mols:
    recs = sorted((r for r in res.resonances if r.molecule == m.name), key=lambda r: r.omega_z)
    print(f"\n{m.name} ({m.mass} u): {len(recs)} resonances")
    for r in recs[:6]:
        print(f"  {r.pair:10s} at {r.omega_z:7.3f} MHz  prefactor {r.prefactor:8.3f} kHz/D  "
              f"max coupling {r.max_coupling:8.3f} kHz")
