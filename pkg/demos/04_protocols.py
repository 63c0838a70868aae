"""Microwave-assisted protocols built on the cooling step.

Depletion: alternate a pi pulse 2_21 -> 3_30 with cooling, so population
funnels into 3_31.  Polarization impurity (eps_z) slows it down, and pure z
leaves a floor.

Single-state: after depletion, sigma+ pulses 3_31 -> 3_30 walk the M ladder
up to |3_31, M=3>.  An admixture of sigma- (eps_minus) pushes the other way.
"""
import numpy as np

from rotcool.config import load_config
from rotcool.protocol import run_depletion_protocol, run_single_state_protocol

cfg = load_config(preset="propanediol-depletion")
args = (cfg.molecule, cfg.cooling, cfg.couplings)

print("depletion protocol, cooling error per iteration")
for eps in (0.0, 0.25, 1.0):
    tr = run_depletion_protocol(*args, eps, iterations=10, secular=True)
    print(f"  eps_z={eps:4.2f}: " + " ".join(f"{e:.3f}" for e in tr.errors))

print("\nsingle-state protocol, 1 - P(3_31, M=3) after 60 iterations")
for eps in (0.0, 0.01, 0.05, 0.10):
    tr = run_single_state_protocol(*args, eps, iterations=60, every=3, secular=True)
    k = tr.iterations_to(1e-3)
    print(f"  eps_minus={eps:4.2f}: final {tr.final_error:.2e}"
          + (f", below 1e-3 from iteration {k}" if k is not None else ""))

best = run_single_state_protocol(*args, 0.0, iterations=60, every=3, secular=True)
top = np.argsort(best.populations[-1])[::-1][:3]
print("\nlargest final populations:", [(best.labels[i], round(float(best.populations[-1][i]), 5)) for i in top])
