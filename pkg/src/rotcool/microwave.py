"""Coherent microwave driving of rotational sublevels.

The field ``E(t) = E0 f(t) Re[e exp(-i w t)]`` with complex unit polarization
``e`` couples ``(level, M)`` states through ``mu . e``.  Within the
rotating-wave approximation only upward transitions ``i -> j`` whose Bohr
frequency is within ``w/2`` of the carrier are kept, with amplitude

    <j| H |i> = (Omega_0 f(t) / 2) <j| mu . e |i> exp(-i w t)

where ``Omega_0`` is the peak Rabi rate per Debye (``rabi`` in kHz, ordinary
frequency), so a transition with element ``d`` (Debye) has Rabi frequency
``rabi * |d|``.  Time is in microseconds.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from math import erf, pi, sqrt

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .constants import TWO_PI
from .rotor import RotorError, dipole_element, find_level, polarization_vector

log = logging.getLogger(__name__)


class PulseError(ValueError):
    """Invalid pulse or pulse design request."""


def normalize_polarization(pol):
    e = polarization_vector(pol)
    n = np.linalg.norm(e)
    if n < 1e-14:
        raise PulseError("polarization vector is zero")
    return e / n


def imperfect_polarization(base, fraction, admixed, convention="intensity"):
    """Mix ``admixed`` into ``base`` polarization.

    ``intensity``: amplitudes ``sqrt(1-eps)`` and ``sqrt(eps)``; ``amplitude``:
    amplitudes ``1-eps`` and ``eps``.  The result is renormalized.
    """
    if not 0.0 <= fraction <= 1.0:
        raise PulseError("admixture fraction must lie in [0, 1]")
    e1, e2 = normalize_polarization(base), normalize_polarization(admixed)
    if convention == "intensity":
        w1, w2 = sqrt(1 - fraction), sqrt(fraction)
    elif convention == "amplitude":
        w1, w2 = 1 - fraction, fraction
    else:
        raise PulseError(f"unknown polarization mixing convention {convention!r}")
    return normalize_polarization(w1 * e1 + w2 * e2)


@dataclass(frozen=True)
class PulseSpec:
    carrier: float  # MHz
    polarization: tuple  # complex 3-vector (x, y, z)
    rabi: float = 10.0  # kHz per Debye at the envelope peak
    envelope: str = "flattop"  # "flattop" or "gaussian"
    duration: float = 100.0  # us
    ramp_fraction: float = 0.1  # per side, flat-top only
    area: float = pi
    label: str = ""

    def __post_init__(self):
        e = normalize_polarization(self.polarization)
        object.__setattr__(self, "polarization", tuple(complex(x) for x in e))
        if self.envelope not in ("flattop", "gaussian"):
            raise PulseError(f"unknown envelope {self.envelope!r}")
        if self.duration < 0 or self.rabi < 0:
            raise PulseError("duration and Rabi rate must be non-negative")
        if not 0 <= self.ramp_fraction <= 0.5:
            raise PulseError("ramp fraction must lie in [0, 0.5]")

    @property
    def e(self):
        return np.array(self.polarization)

    def envelope_area(self):
        """``int f(t) dt`` in us (peak normalized to 1)."""
        return envelope_area(self.envelope, self.duration, self.ramp_fraction)

    def slices(self, n_ramp=64, n_gauss=2000):
        """Piecewise-constant representation ``[(dt, f)]`` of the envelope."""
        T = self.duration
        if T == 0:
            return []
        if self.envelope == "gaussian":
            sig = T / 6
            dt = T / n_gauss
            t = (np.arange(n_gauss) + 0.5) * dt - T / 2
            return [(dt, float(np.exp(-x * x / (2 * sig * sig)))) for x in t]
        r = self.ramp_fraction * T
        out = []
        if r > 0:
            dt = r / n_ramp
            up = [(dt, float(np.sin(pi * (k + 0.5) / (2 * n_ramp)) ** 2)) for k in range(n_ramp)]
            out = up + [(T - 2 * r, 1.0)] + up[::-1]
        else:
            out = [(T, 1.0)]
        return out


def envelope_area(envelope, duration, ramp_fraction=0.1):
    if envelope == "gaussian":
        sig = duration / 6
        return sig * sqrt(2 * pi) * erf(3 / sqrt(2))
    return duration * (1 - ramp_fraction)


@dataclass
class RotorSubspace:
    """Set of rotational sublevels ``(level, M)`` with precomputed dipole matrices.

    Parameters
    ----------
    spec : MoleculeSpec
    levels : list
        Level labels (``"3_31"``), key tuples or RotLevel objects; all M
        sublevels of each level are included.
    """

    spec: object
    levels: list
    states: list = field(init=False)
    energies: np.ndarray = field(init=False)
    dipoles: dict = field(init=False, repr=False)

    def __post_init__(self):
        lv = [find_level(self.spec, l)[0] for l in self.levels]
        self.levels = lv
        self.states = [(l, M) for l in lv for M in range(-l.J, l.J + 1)]
        self.energies = np.array([l.energy for l, _ in self.states])
        n = len(self.states)
        self.dipoles = {}
        for ax in "xyz":
            D = np.zeros((n, n), dtype=complex)
            for i, si in enumerate(self.states):
                for j, sj in enumerate(self.states):
                    D[i, j] = dipole_element(self.spec, si, sj, ax)
            self.dipoles[ax] = D
        self._cache = {}

    @property
    def dim(self):
        return len(self.states)

    def index(self, level, M):
        lev = find_level(self.spec, level)[0]
        for i, (l, m) in enumerate(self.states):
            if l.key == lev.key and m == M:
                return i
        raise RotorError(f"state ({lev.label}, M={M}) not in subspace")

    def level_indices(self, level):
        lev = find_level(self.spec, level)[0]
        idx = [i for i, (l, _) in enumerate(self.states) if l.key == lev.key]
        if not idx:
            raise RotorError(f"level {lev.label} not in subspace")
        return idx

    def labels(self):
        return [f"{l.label},{M}" for l, M in self.states]

    def mu_dot(self, e):
        """Matrix of ``mu . e`` (no conjugation of ``e``)."""
        e = np.asarray(e, dtype=complex)
        return e[0] * self.dipoles["x"] + e[1] * self.dipoles["y"] + e[2] * self.dipoles["z"]

    def element(self, upper, lower, e):
        return self.mu_dot(e)[upper, lower]

    def drive_operator(self, pulse):
        """Upward RWA coupling matrix ``C[j, i] = <j|mu.e|i>`` for kept transitions."""
        E = self.energies
        bohr = E[:, None] - E[None, :]  # E_j - E_i
        keep = (bohr > 0) & (np.abs(bohr - pulse.carrier) <= pulse.carrier / 2)
        return np.where(keep, self.mu_dot(pulse.e), 0.0), keep

    def unitary(self, pulses):
        """Propagator for one pulse or a list of simultaneous pulses (cached)."""
        if isinstance(pulses, PulseSpec):
            pulses = [pulses]
        key = tuple(pulses)
        if key not in self._cache:
            self._cache[key] = _pulse_unitary(self, list(pulses))
        return self._cache[key]


def _ladder(keep):
    """Photon numbers ``n_i`` with ``n_j = n_i + 1`` along kept edges, or None."""
    n = keep.shape[0]
    num = [None] * n
    for s in range(n):
        if num[s] is not None:
            continue
        num[s] = 0
        q = deque([s])
        while q:
            i = q.popleft()
            for j in range(n):
                for d, linked in ((1, keep[j, i]), (-1, keep[i, j])):
                    if not linked:
                        continue
                    if num[j] is None:
                        num[j] = num[i] + d
                        q.append(j)
                    elif num[j] != num[i] + d:
                        return None
    return np.array(num)


def _merge_tones(pulses):
    """Combine simultaneous tones with equal carrier and envelope into one."""
    p0 = pulses[0]
    for p in pulses[1:]:
        if (p.carrier, p.envelope, p.duration, p.ramp_fraction) != (p0.carrier, p0.envelope,
                                                                  p0.duration, p0.ramp_fraction):
            return None
    field_vec = sum(p.rabi * p.e for p in pulses)
    amp = float(np.linalg.norm(field_vec))
    if amp == 0:
        return PulseSpec(p0.carrier, p0.polarization, 0.0, p0.envelope, p0.duration, p0.ramp_fraction)
    return PulseSpec(p0.carrier, tuple(field_vec / amp), amp, p0.envelope, p0.duration,
                     p0.ramp_fraction)


def _pulse_unitary(sub, pulses):
    n = sub.dim
    merged = _merge_tones(pulses)
    for p in pulses:
        if p.rabi * 1e-3 > 0.1 * p.carrier:
            log.warning("peak Rabi rate not small compared with carrier %.4g MHz; RWA questionable", p.carrier)
    if merged is not None:
        C, keep = sub.drive_operator(merged)
        num = _ladder(keep)
        if num is not None:
            W = TWO_PI * merged.rabi * 1e-3
            V = 0.5 * W * (C + C.conj().T)
            E = sub.energies - num * merged.carrier
            U = np.eye(n, dtype=complex)
            # each connected component in its own ladder frame; the result is
            # returned in the interaction picture of the free rotor, where
            # uncoupled states do not evolve
            for idx in _components(keep):
                if len(idx) == 1:
                    continue
                ix = np.ix_(idx, idx)
                h0 = TWO_PI * (E[idx] - E[idx].mean())
                Uc = np.eye(len(idx), dtype=complex)
                for dt, f in merged.slices():
                    Uc = expm(-1j * (np.diag(h0) + f * V[ix]) * dt) @ Uc
                U[ix] = np.exp(1j * h0 * merged.duration)[:, None] * Uc
            return U
    return _pulse_unitary_ode(sub, pulses)


def _components(keep):
    n = keep.shape[0]
    link = keep | keep.T
    seen = np.zeros(n, dtype=bool)
    out = []
    for s in range(n):
        if seen[s]:
            continue
        comp, q = [], deque([s])
        seen[s] = True
        while q:
            i = q.popleft()
            comp.append(i)
            for j in np.nonzero(link[i])[0]:
                if not seen[j]:
                    seen[j] = True
                    q.append(j)
        out.append(sorted(comp))
    return out


def _pulse_unitary_ode(sub, pulses):
    """Interaction-picture propagation for incommensurate simultaneous tones."""
    n = sub.dim
    E = sub.energies
    parts = []
    T = max(p.duration for p in pulses)
    for p in pulses:
        C, keep = sub.drive_operator(p)
        bohr = E[:, None] - E[None, :]
        parts.append((p, 0.5 * TWO_PI * p.rabi * 1e-3 * C, TWO_PI * np.where(keep, bohr - p.carrier, 0.0)))

    def envelope(p, t):
        if t > p.duration:
            return 0.0
        if p.envelope == "gaussian":
            s = p.duration / 6
            return float(np.exp(-(t - p.duration / 2) ** 2 / (2 * s * s)))
        r = p.ramp_fraction * p.duration
        if r > 0 and t < r:
            return float(np.sin(pi * t / (2 * r)) ** 2)
        if r > 0 and t > p.duration - r:
            return float(np.sin(pi * (p.duration - t) / (2 * r)) ** 2)
        return 1.0

    def H(t):
        out = np.zeros((n, n), dtype=complex)
        for p, A, det in parts:
            f = envelope(p, t)
            if f:
                X = f * A * np.exp(1j * det * t)
                out += X + X.conj().T
        return out

    def rhs(t, y):
        return (-1j * H(t) @ y.reshape(n, n)).ravel()

    fastest = max((np.max(np.abs(d)) for _, _, d in parts), default=0.0)
    max_step = min(T / 50, TWO_PI / fastest / 20) if fastest > 0 else T / 50
    sol = solve_ivp(rhs, (0.0, T), np.eye(n, dtype=complex).ravel(), method="DOP853",
                    rtol=1e-10, atol=1e-12, max_step=max_step)
    if sol.status != 0:
        raise PulseError(f"pulse integration failed: {sol.message}")
    U = sol.y[:, -1].reshape(n, n)
    # remove the integrator's tiny non-unitarity
    u, _, vh = np.linalg.svd(U)
    return u @ vh


def propagate_pulse(state, pulse, subspace):
    """Apply a pulse (or a list of simultaneous pulses) to a state of ``subspace``.

    ``state`` is a density matrix or a population vector; populations are
    treated as an incoherent mixture and the populations after the pulse are
    returned.
    """
    U = subspace.unitary(pulse)
    s = np.asarray(state)
    if s.ndim == 1:
        rho = U @ np.diag(s.astype(complex)) @ U.conj().T
        return np.real(np.diag(rho))
    return U @ s @ U.conj().T


def design_pi_pulse(subspace, lower, upper, polarization, rabi=10.0, envelope="flattop",
                    ramp_fraction=0.1, area=pi, label=""):
    """Pulse resonant with ``lower -> upper`` (each ``(level, M)``) of the given area.

    Raises :class:`PulseError` when the transition element vanishes for the
    chosen polarization.
    """
    e = normalize_polarization(polarization)
    i = subspace.index(*lower)
    j = subspace.index(*upper)
    d = subspace.element(j, i, e)
    Ei, Ej = subspace.energies[i], subspace.energies[j]
    if Ej <= Ei:
        raise PulseError("upper state must lie above the lower state")
    li, lj = subspace.states[i][0], subspace.states[j][0]
    if abs(d) < 1e-12:
        raise PulseError(f"vanishing element <{lj.label},{upper[1]}| mu.e |{li.label},{lower[1]}>")
    if rabi <= 0:
        raise PulseError("peak Rabi rate must be positive")
    omega = TWO_PI * rabi * 1e-3 * abs(d)
    unit_area = envelope_area(envelope, 1.0, ramp_fraction)
    duration = area / (omega * unit_area)
    return PulseSpec(Ej - Ei, tuple(e), rabi, envelope, duration, ramp_fraction, area, label)
