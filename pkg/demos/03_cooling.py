"""Sideband cooling of the 3_31 / 3_30 pair of protonated propanediol.

Each |M| block is cooled independently: two sideband-cooled atoms, one
phonon mode truncated at two quanta and the rotor pair.  The secular model is
used here so the whole demo runs in seconds; pass ``--full`` to keep the
fast-rotating terms (about a quarter of a minute per block).
"""
import sys

import numpy as np

from rotcool.config import load_config
from rotcool.lindblad import CompositeSpace, propagate

full = "--full" in sys.argv
cfg = load_config(preset="propanediol-depletion")
space = CompositeSpace(2, 2)
print(f"state space {space.dims} -> dimension {space.dim}; "
      f"{'full' if full else 'secular'} propagation over {cfg.cooling.duration} ms")

rho0 = space.product_state([1.0, 0.0, 0.0], [0.5, 0.5])  # phonon ground, rotor mixed
for M in (0, 1, 2, 3):
    p = cfg.cooling.replace(coupling=cfg.couplings.get(M, 0.0))
    tr = propagate(rho0, p, space, record_every=0.5, secular=not full)
    rot = tr.rotor_populations()
    marks = ", ".join(f"{t:.1f} ms: {x:.2e}" for t, x in zip(tr.times[::4], rot[::4, 1]))
    print(f"|M|={M} (coupling {p.coupling} kHz)  3_30 population  {marks}")

# Each |M| block swaps its upper-rotor population into the phonon mode, and
# the atoms then remove it.  M=0 has no coupling and keeps its population.
