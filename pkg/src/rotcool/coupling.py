"""Dipole-phonon coupling: prefactor, M-resolved couplings, dressed states and resonance scans.

Unit convention
---------------
The coupling prefactor of mode ``p`` is

    E0 = |b_m| sqrt(hbar w_p^3 M_rot / 2) / e            [V/m]

i.e. the field amplitude seen by the molecule per unit ``(a + a^dagger)``.
Multiplying by a dipole moment gives an energy; we divide that energy by
Planck's constant ``h`` so that ``E0 * mu[D]`` is an ordinary frequency,
reported in kHz.  Hence :func:`prefactor` returns kHz per Debye and all
total couplings are ordinary frequencies in kHz.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .constants import AMU, DEBYE, E_CHARGE, H_PLANCK, HBAR, TWO_PI
from .rotor import MoleculeSpec, dipole_element, find_level, transition_table
from .trap import ZigzagModel, molecule_displacement

# kHz per Debye for b_m = 1, w_p = 2 pi * 1 MHz, M_rot = 1 u
_PREFACTOR_UNIT = np.sqrt(HBAR * (TWO_PI * 1e6) ** 3 * AMU / 2) / E_CHARGE * DEBYE / H_PLANCK / 1e3


class CouplingError(ValueError):
    pass


def prefactor_value(b_m, mode_freq, mass):
    """Prefactor in kHz/D from ``b_m``, mode frequency (MHz) and molecular mass (u)."""
    return np.abs(b_m) * _PREFACTOR_UNIT * np.sqrt(np.asarray(mode_freq, dtype=float) ** 3 * mass)


def prefactor(modes, label, mass=None):
    """Coupling prefactor (kHz per Debye) of mode ``label`` of a :class:`NormalModeSet`.

    ``mass`` defaults to the mass of the molecule in the chain.
    """
    if mass is None:
        mass = modes.chain.particles[modes.chain.molecule_index].mass
    if mass <= 0:
        raise CouplingError("molecular mass must be positive")
    b = molecule_displacement(modes, label)
    return float(prefactor_value(b, modes.mode(label).frequency, mass))


def splitting(total_coupling, n_phonon):
    """Dressed-state splitting ``sqrt(n) * E~0`` (same units as ``total_coupling``)."""
    n = int(n_phonon)
    if n != n_phonon or n < 0:
        raise CouplingError("phonon number must be a non-negative integer")
    if n == 0:
        return 0.0
    return float(np.sqrt(n) * abs(total_coupling))


@dataclass(frozen=True)
class DipolePhononCoupling:
    mode_freq: float  # MHz
    prefactor: float  # kHz/D
    j1: tuple  # (RotLevel, M), lower
    j2: tuple  # (RotLevel, M), upper
    matrix_element: complex  # D
    total_coupling: float  # kHz
    detuning: float  # kHz, |E(j2) - E(j1) - w_p|


def coupling_for(spec, modes, label, lower, upper, M, axis=None, per_debye=False):
    """M-resolved total coupling between ``(lower, M)`` and ``(upper, M')``.

    The field axis is ``z`` for radial modes and ``x`` for axial modes.  For
    ``x`` the partner sublevel with the larger element among ``M' = M +- 1`` is
    used.
    """
    mode = modes.mode(label)
    if axis is None:
        axis = "z" if mode.axis == "radial" else "x"
    lo, _ = find_level(spec, lower)
    hi, _ = find_level(spec, upper)
    E0 = prefactor(modes, label, spec.mass)
    if axis == "z":
        Mp = M
    else:
        cands = [Mq for Mq in (M - 1, M + 1) if abs(Mq) <= hi.J]
        Mp = max(cands, key=lambda Mq: abs(dipole_element(spec, (hi, Mq), (lo, M), axis, per_debye)))
    elem = dipole_element(spec, (hi, Mp), (lo, M), axis, per_debye)
    return DipolePhononCoupling(
        mode.frequency, E0, (lo, M), (hi, Mp), elem, float(abs(E0 * elem)),
        abs(hi.energy - lo.energy - mode.frequency) * 1e3)


def coupling_table(spec, modes, label, lower, upper, per_debye=False):
    """Total couplings (kHz) for ``M = 0..J_lower`` on a radial mode."""
    lo, _ = find_level(spec, lower)
    return {M: coupling_for(spec, modes, label, lower, upper, M, per_debye=per_debye).total_coupling
            for M in range(0, lo.J + 1)}


@dataclass(frozen=True)
class DressedPair:
    """Resonant dressed states over the bare basis ``[|n, j1>, |n-1, j2>]``."""

    n_phonon: int
    j1: object
    j2: object
    basis: tuple
    plus: np.ndarray
    minus: np.ndarray
    energies: tuple  # (E+, E-) relative to the bare degenerate energy

    def phonon_expectation(self, which="plus"):
        v = self.plus if which == "plus" else self.minus
        n = np.array([self.n_phonon, self.n_phonon - 1])
        return float(np.sum(np.abs(v) ** 2 * n))


def dressed_states(n_phonon, j1, j2, total_coupling=1.0):
    """Symmetric and antisymmetric dressed states of a resonant pair."""
    n = int(n_phonon)
    if n < 1:
        raise CouplingError("dressed states need n >= 1")
    s = 1 / np.sqrt(2)
    dE = splitting(total_coupling, n)
    return DressedPair(n, j1, j2, ((n, j1), (n - 1, j2)),
                       np.array([s, s]), np.array([s, -s]), (dE, -dE))


# -- scans ---------------------------------------------------------------------

@dataclass(frozen=True)
class ResonanceRecord:
    molecule: str
    mass: float
    omega_z: float  # MHz, radial trap frequency at resonance
    mode_freq: float  # MHz
    lower: object
    upper: object
    transition_freq: float  # MHz
    b_m: float
    prefactor: float  # kHz/D
    max_coupling: float  # kHz, prefactor times the largest z element

    @property
    def pair(self):
        return f"{self.lower.label}-{self.upper.label}"


@dataclass
class ScanResult:
    masses: np.ndarray
    omega_z: np.ndarray
    mode_freq: np.ndarray  # (n_mass, n_wz)
    b_m: np.ndarray
    prefactor: np.ndarray  # kHz/D, nan where unstable
    stable: np.ndarray
    resonances: list = field(default_factory=list)

    def stable_prefactors(self):
        return self.prefactor[self.stable]


def _find_roots(model, wz, fz, stable, target, tol_mhz):
    roots = []
    g = fz - target
    for i in range(len(wz) - 1):
        if not (stable[i] and stable[i + 1]):
            continue
        if g[i] == 0:
            roots.append(wz[i])
            continue
        if np.sign(g[i]) == np.sign(g[i + 1]):
            continue

        def f(w):
            return float(model.evaluate(w)[0]) - target

        # bracket the crossing in w_z, then tighten until the mode frequency is within 1 Hz
        w = brentq(f, wz[i], wz[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
        if abs(f(w)) <= tol_mhz:
            roots.append(w)
    return roots


def find_resonances(spec, chain, omega_z, Jmax=6, tolerance_khz=1e-3, axis="z", per_debye=None):
    """Radial trap frequencies at which the zig-zag mode matches a transition.

    Transitions come from :func:`transition_table` and must be active on
    ``axis``.  Crossings of (zig-zag frequency - transition frequency) are
    located on the ``omega_z`` grid and refined by root finding; a crossing
    is kept if the refined mismatch is within ``tolerance_khz``.
    """
    if per_debye is None:
        per_debye = not spec.has_dipole
    chain = chain.with_molecule_mass(spec.mass)
    model = ZigzagModel(chain)
    wz = np.sort(np.asarray(omega_z, dtype=float))
    fz, _, stable = model.evaluate(wz)
    if not np.any(stable):
        return []
    fmin, fmax = np.nanmin(fz), np.nanmax(fz)
    out = []
    for tr in transition_table(spec, Jmax, per_debye=per_debye):
        if not tr.active(axis) or not (fmin <= tr.frequency <= fmax):
            continue
        for w in _find_roots(model, wz, fz, stable, tr.frequency, tolerance_khz * 1e-3):
            f, b, _ = model.evaluate(w)
            E0 = float(prefactor_value(b, f, spec.mass))
            out.append(ResonanceRecord(spec.name, spec.mass, float(w), float(f), tr.lower, tr.upper,
                                       tr.frequency, float(b), E0, E0 * np.sqrt(tr.strength[axis])))
    out.sort(key=lambda r: (r.omega_z, r.transition_freq))
    return out


def prefactor_grid(chain, masses, omega_z):
    """Zig-zag frequency, ``b_m``, prefactor and stability on a (mass, w_z) grid."""
    masses = np.asarray(masses, dtype=float)
    wz = np.asarray(omega_z, dtype=float)
    shape = (len(masses), len(wz))
    freq, bm, stable = np.empty(shape), np.empty(shape), np.empty(shape, dtype=bool)
    for i, m in enumerate(masses):
        freq[i], bm[i], stable[i] = ZigzagModel(chain.with_molecule_mass(m)).evaluate(wz)
    E0 = np.where(stable, prefactor_value(np.nan_to_num(bm), np.nan_to_num(freq), masses[:, None]), np.nan)
    return freq, bm, E0, stable


def scan_resonances(molecules, chain, omega_z, masses, Jmax=6, tolerance_khz=1e-3, jobs=1):
    """Prefactor grid over (mass, w_z) plus resonance records for each molecule.

    ``molecules`` is a list of :class:`MoleculeSpec`; a bare number is taken
    as a mass-only entry (no resonances).  ``jobs > 1`` evaluates molecules
    in a thread pool.
    """
    freq, bm, E0, stable = prefactor_grid(chain, masses, omega_z)
    specs = [m for m in molecules if isinstance(m, MoleculeSpec)]

    def one(spec):
        return find_resonances(spec, chain, omega_z, Jmax, tolerance_khz)

    if jobs > 1 and len(specs) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            found = list(ex.map(one, specs))
    else:
        found = [one(s) for s in specs]
    res = [r for lst in found for r in lst]
    return ScanResult(np.asarray(masses, float), np.asarray(omega_z, float), freq, bm, E0, stable, res)
