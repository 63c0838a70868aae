"""Sympathetic sideband cooling of one resonant rotational transition.

The model space is ``atom_1 x ... x atom_N x phonon x rotor`` with two-level
atoms (``g=0``, ``e=1``), phonon numbers ``0..n_max`` of the resonant mode and
the rotor pair ``(j1, j2)`` where ``j1`` is the lower level.  In the interaction
picture with respect to the free mode, rotor and atoms the Hamiltonian is

    H(t) = sum_i (Omega/2) e^{i(Delta t + phi_i)} s+_i [1 + i eta b_i (a e^{i w t} + a^dag e^{-i w t})] + h.c.
           + E (a |j2><j1| + a^dag |j1><j2|)

with ``Delta = -w`` (red sideband) by default.  Time is in microseconds and all
angular frequencies in rad/us.  Input frequencies are ordinary frequencies
(``Omega/2pi`` and ``w/2pi`` in MHz, ``E`` in kHz); the decay rate ``gamma`` is
a rate in 1/us.

Full propagation uses the Floquet structure of ``H(t)``: the one-period
superoperator is integrated once and raised to integer powers.  The secular
mode keeps only the resonant red-sideband and dipole-phonon terms, which makes
the generator time independent.
"""

import itertools
import logging
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .constants import TWO_PI

log = logging.getLogger(__name__)


class PropagationError(RuntimeError):
    def __init__(self, message, time_us=None):
        if time_us is not None:
            message = f"{message} at t = {time_us * 1e-3:.6g} ms"
        super().__init__(message)
        self.time_us = time_us


@dataclass(frozen=True)
class CompositeSpace:
    atom_count: int = 2
    n_max: int = 2

    def __post_init__(self):
        if self.atom_count < 0 or self.n_max < 0:
            raise ValueError("atom_count and n_max must be non-negative")

    @property
    def dims(self):
        return (2,) * self.atom_count + (self.n_max + 1, 2)

    @property
    def dim(self):
        return int(np.prod(self.dims))

    def index(self, atoms, n, j):
        """Flat index of ``|a_1..a_N, n, j>`` (atoms as a sequence of 0/1, j in {0, 1})."""
        return int(np.ravel_multi_index(tuple(atoms) + (n, j), self.dims))

    def unravel(self, idx):
        t = np.unravel_index(idx, self.dims)
        return tuple(int(x) for x in t[:-2]), int(t[-2]), int(t[-1])

    def labels(self):
        return [self.unravel(i) for i in range(self.dim)]

    def _embed(self, ops):
        """Kronecker product with identity on factors not in ``ops`` (dict factor -> matrix)."""
        mats = [ops.get(k, np.eye(d)) for k, d in enumerate(self.dims)]
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    def sigma_minus(self, i):
        return self._embed({i: np.array([[0, 1], [0, 0]], dtype=complex)})

    def annihilation(self):
        a = np.diag(np.sqrt(np.arange(1, self.n_max + 1)), 1).astype(complex)
        return self._embed({self.atom_count: a})

    def rotor_lower_to_upper(self):
        # |j2><j1|
        return self._embed({self.atom_count + 1: np.array([[0, 0], [1, 0]], dtype=complex)})

    def product_state(self, phonon, rotor, atoms=None):
        """Density matrix ``atoms x phonon x rotor``.

        ``phonon`` and ``rotor`` are population vectors or density matrices;
        atoms default to all ground.
        """
        def dm(x, d):
            x = np.asarray(x, dtype=complex)
            return np.diag(x) if x.ndim == 1 else x
        parts = []
        for k in range(self.atom_count):
            a = 0 if atoms is None else atoms[k]
            parts.append(np.diag([1.0 - a, float(a)]).astype(complex))
        parts += [dm(phonon, self.n_max + 1), dm(rotor, 2)]
        out = parts[0]
        for p in parts[1:]:
            out = np.kron(out, p)
        return out

    def reduced(self, rho, keep):
        """Partial trace keeping factor indices in ``keep`` (sorted)."""
        d = self.dims
        n = len(d)
        t = np.asarray(rho).reshape(d + d)
        letters = "abcdefghijklmnopqrstuvw"
        ket = list(letters[:n])
        bra = [c if k not in keep else c.upper() for k, c in enumerate(ket)]
        out = "".join(ket[k] for k in keep) + "".join(bra[k] for k in keep)
        r = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
        dk = int(np.prod([d[k] for k in keep]))
        return r.reshape(dk, dk)


@dataclass(frozen=True)
class CoolingParams:
    """Sideband-cooling parameters.

    rabi, mode_freq and detuning are ordinary frequencies in MHz (the angular
    Rabi frequency is ``2 pi * rabi``); coupling is in kHz; gamma is a decay
    rate in 1/us; duration in ms.  ``detuning=None`` means the red sideband
    ``-mode_freq``.
    """

    rabi: float = 0.2
    gamma: float = 0.1
    eta: float = 0.012
    b: tuple = (1.0, 1.0)
    coupling: float = 0.0
    mode_freq: float = 8.8175
    detuning: float | None = None
    phases: tuple = (0.0, 0.0)
    duration: float = 8.0
    jump: str = "independent"
    normalization: str = "rate"

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "phases", tuple(float(x) for x in self.phases))
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if self.rabi < 0 or self.eta < 0 or self.duration < 0:
            raise ValueError("rabi, eta and duration must be non-negative")
        if self.mode_freq <= 0:
            raise ValueError("mode frequency must be positive")
        if len(self.phases) != len(self.b):
            raise ValueError("need one laser phase per atom")
        if self.jump not in ("independent", "collective"):
            raise ValueError(f"unknown jump convention {self.jump!r}")
        if self.normalization not in ("rate", "amplitude"):
            raise ValueError(f"unknown jump normalization {self.normalization!r}")
        if self.eta > 0.3:
            warnings.warn("Lamb-Dicke parameter above 0.3; first-order expansion is questionable")

    @property
    def atom_count(self):
        return len(self.b)

    @property
    def delta(self):
        return -self.mode_freq if self.detuning is None else self.detuning

    def replace(self, **kw):
        return replace(self, **kw)


def laser_phases(positions_um, wavelength_nm=411.0):
    """Laser phases ``k x_0i`` (rad) at the given equilibrium positions."""
    k = TWO_PI / (wavelength_nm * 1e-3)
    return tuple(float((k * x) % TWO_PI) for x in positions_um)


# -- Hamiltonian ---------------------------------------------------------------

def hamiltonian_terms(space, params):
    """Fourier components ``{frequency (rad/us): operator}`` with ``H(t) = sum_f e^{i f t} H_f``."""
    if space.atom_count != params.atom_count:
        raise ValueError("atom count of space and parameters differ")
    W = TWO_PI * params.rabi
    w = TWO_PI * params.mode_freq
    D = TWO_PI * params.delta
    a = space.annihilation()
    ad = a.conj().T
    terms = {}

    def add(f, op):
        key = round(f, 12)
        terms[key] = terms.get(key, 0) + op
        keyc = round(-f, 12)
        terms[keyc] = terms.get(keyc, 0) + op.conj().T

    for i in range(space.atom_count):
        sp = space.sigma_minus(i).conj().T
        c = 0.5 * W * np.exp(1j * params.phases[i])
        add(D, c * sp)
        s = 1j * params.eta * params.b[i] * c
        add(D + w, s * sp @ a)
        add(D - w, s * sp @ ad)
    E = TWO_PI * params.coupling * 1e-3
    up = space.rotor_lower_to_upper()
    hdp = E * (a @ up + ad @ up.conj().T)
    terms[0.0] = terms.get(0.0, 0) + hdp
    return {f: np.asarray(op, dtype=complex) for f, op in terms.items() if np.any(op != 0) or f == 0.0}


def build_interaction_hamiltonian(space, params, t):
    """``H(t)`` at time ``t`` (us) as a dense Hermitian matrix (rad/us)."""
    H = np.zeros((space.dim, space.dim), dtype=complex)
    for f, op in hamiltonian_terms(space, params).items():
        H += np.exp(1j * f * t) * op
    return H


def secular_hamiltonian(space, params):
    """Time-independent resonant part: red sideband plus dipole-phonon term.

    A residual detuning ``delta = Delta + w`` of the red sideband is handled
    in a frame rotating with the atoms, where it appears as ``delta |e><e|``.
    """
    W = TWO_PI * params.rabi
    delta = TWO_PI * (params.delta + params.mode_freq)
    a = space.annihilation()
    H = np.zeros((space.dim, space.dim), dtype=complex)
    for i in range(space.atom_count):
        sm = space.sigma_minus(i)
        sp = sm.conj().T
        s = 1j * params.eta * params.b[i] * 0.5 * W * np.exp(1j * params.phases[i])
        red = s * sp @ a
        H += red + red.conj().T + delta * sp @ sm
    E = TWO_PI * params.coupling * 1e-3
    up = space.rotor_lower_to_upper()
    H += E * (a @ up + a.conj().T @ up.conj().T)
    return H


def jump_operators(space, params):
    rate = params.gamma if params.normalization == "rate" else params.gamma**2
    sms = [space.sigma_minus(i) for i in range(space.atom_count)]
    if params.jump == "collective":
        return [np.sqrt(rate) * sum(sms)] if sms else []
    return [np.sqrt(rate) * s for s in sms]


# -- superoperators (column-stacking vec) ----------------------------------------

def _comm_super(H):
    I = np.eye(H.shape[0])
    return -1j * (np.kron(I, H) - np.kron(H.T, I))


def _dissipator(Ls, d):
    I = np.eye(d)
    D = np.zeros((d * d, d * d), dtype=complex)
    for L in Ls:
        LdL = L.conj().T @ L
        D += np.kron(L.conj(), L) - 0.5 * np.kron(I, LdL) - 0.5 * np.kron(LdL.T, I)
    return D


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, d):
    return np.asarray(v).reshape(d, d, order="F")


def liouvillian_terms(space, params):
    terms = {f: _comm_super(op) for f, op in hamiltonian_terms(space, params).items()}
    terms[0.0] = terms.get(0.0, 0) + _dissipator(jump_operators(space, params), space.dim)
    return terms


def secular_liouvillian(space, params):
    return _comm_super(secular_hamiltonian(space, params)) + _dissipator(jump_operators(space, params), space.dim)


def _base_frequency(freqs, w):
    """Common fundamental (rad/us) of the Fourier frequencies, or None if not commensurate."""
    q = 1
    for f in freqs:
        r = Fraction(f / w).limit_denominator(16)
        if abs(float(r) - f / w) > 1e-12:
            return None
        q = np.lcm(q, r.denominator)
    return w / q


# -- propagation ---------------------------------------------------------------

@dataclass
class Trajectory:
    space: CompositeSpace
    times: np.ndarray  # ms
    populations: np.ndarray  # (n_times, dim) diagonal populations
    trace: np.ndarray
    purity: np.ndarray
    final_state: np.ndarray = field(repr=False, default=None)

    def rotor_populations(self):
        """(n_times, 2) populations of (j1, j2)."""
        p = self.populations.reshape((len(self.times),) + self.space.dims)
        return p.sum(axis=tuple(range(1, self.space.atom_count + 2)))

    def phonon_populations(self):
        p = self.populations.reshape((len(self.times),) + self.space.dims)
        ax = tuple(range(1, self.space.atom_count + 1)) + (self.space.atom_count + 2,)
        return p.sum(axis=ax)

    def ground_atom_populations(self):
        """(n_times, n_max+1, 2) populations P(n, j) with all atoms in the ground state."""
        p = self.populations.reshape((len(self.times),) + self.space.dims)
        return p[(slice(None),) + (0,) * self.space.atom_count]


def check_state(rho, t_us=None, trace_tol=1e-8, herm_tol=1e-10, pos_tol=1e-8, expected_trace=1.0):
    """Raise :class:`PropagationError` if ``rho`` is not a valid (sub)normalized state."""
    if not np.all(np.isfinite(rho)):
        raise PropagationError("non-finite density matrix", t_us)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise PropagationError(f"density matrix not Hermitian (deviation {herm:.2e})", t_us)
    tr = np.trace(rho).real
    if abs(tr - expected_trace) > trace_tol:
        raise PropagationError(f"trace drifted to {tr:.12g}", t_us)
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if ev[0] < -pos_tol:
        raise PropagationError(f"negative eigenvalue {ev[0]:.3e}", t_us)


def _integrate(terms, Y0, t0, t1, max_step, rtol, atol):
    """Integrate ``dY/dt = L(t) Y`` for a matrix (or vector) ``Y``."""
    freqs = np.array(list(terms))
    Ls = [sparse.csr_matrix(terms[f]) for f in freqs]  # Liouvillian terms are very sparse
    shape = Y0.shape

    def rhs(t, y):
        Y = y.reshape(shape)
        out = np.zeros(shape, dtype=complex)
        for c, L in zip(np.exp(1j * freqs * t), Ls):
            out += c * (L @ Y)
        return out.ravel()

    if t1 <= t0:
        return Y0.copy()
    sol = solve_ivp(rhs, (t0, t1), Y0.ravel(), method="DOP853", rtol=rtol, atol=atol,
                    max_step=max_step)
    if sol.status != 0:
        raise PropagationError(f"integrator failed: {sol.message}", sol.t[-1] if len(sol.t) else t0)
    return sol.y[:, -1].reshape(shape)


@lru_cache(maxsize=64)
def _period_map(space, params, rtol, atol):
    terms = liouvillian_terms(space, params)
    w = TWO_PI * params.mode_freq
    base = _base_frequency([f for f in terms if f != 0], w)
    if base is None:
        return None, None, terms
    T = TWO_PI / base
    d2 = space.dim**2
    P = _integrate(terms, np.eye(d2, dtype=complex), 0.0, T, T / 20, rtol, atol)
    P.setflags(write=False)
    return T, P, terms


class Propagator:
    """Stroboscopic propagator for a fixed space and parameter set.

    Parameters
    ----------
    space, params
        Model definition.
    secular : bool
        Use the time-independent secular generator.
    rtol, atol : float
        Integrator tolerances for the one-period map (full mode).
    """

    def __init__(self, space, params, secular=False, rtol=1e-12, atol=1e-14):
        self.space, self.params, self.secular = space, params, secular
        self.rtol, self.atol = rtol, atol
        if secular:
            self.L = secular_liouvillian(space, params)
        else:
            self.T, self.P, self.terms = _period_map(space, params, rtol, atol)
            if self.P is None:
                log.warning("Fourier frequencies not commensurate; integrating directly")

    def step_map(self, dt_us):
        """Superoperator for ``[0, dt]`` (only valid from a period boundary in full mode)."""
        d2 = self.space.dim**2
        if self.secular:
            return expm(self.L * dt_us)
        if self.P is None:
            return _integrate(self.terms, np.eye(d2, dtype=complex), 0.0, dt_us,
                              TWO_PI / (TWO_PI * self.params.mode_freq) / 20, self.rtol, self.atol)
        n, r = divmod(dt_us, self.T)
        n = int(n)
        if self.T - r < 1e-12 * self.T:
            n, r = n + 1, 0.0
        M = np.linalg.matrix_power(self.P, n)
        if r > 1e-15:
            M = _integrate(self.terms, np.eye(d2, dtype=complex), 0.0, r, self.T / 20,
                           self.rtol, self.atol) @ M
        return M

    def evolve(self, rho0, times_ms):
        """States at ``times_ms`` (ascending, starting at or after 0)."""
        d = self.space.dim
        times_us = np.asarray(times_ms, dtype=float) * 1e3
        v = vec(rho0).astype(complex)
        out = []
        if self.secular or self.P is None:
            t_prev = 0.0
            cache = {}
            for t in times_us:
                dt = t - t_prev
                key = round(dt, 9)
                if key not in cache:
                    cache[key] = self.step_map(dt)
                v = cache[key] @ v
                out.append(unvec(v, d))
                t_prev = t
            return out
        # stroboscopic: keep the state at period boundaries, then add the partial period
        n_prev = 0
        for t in times_us:
            n, r = divmod(t, self.T)
            n = int(n)
            if self.T - r < 1e-12 * self.T:
                n, r = n + 1, 0.0
            k = n - n_prev
            if k > 0:
                v = np.linalg.matrix_power(self.P, k) @ v if k > 64 else _apply_power(self.P, v, k)
            n_prev = n
            w = v
            if r > 1e-15:
                w = _integrate(self.terms, v, 0.0, r, self.T / 20, self.rtol, self.atol)
            out.append(unvec(w, d))
        return out


def _apply_power(P, v, k):
    for _ in range(k):
        v = P @ v
    return v


def propagate(rho0, params, space=None, record_every=0.1, secular=False, check=True, **kw):
    """Lindblad evolution over ``params.duration`` with records every ``record_every`` ms.

    Returns a :class:`Trajectory`.  Every recorded state is checked for
    trace, Hermiticity and positivity; a violation raises
    :class:`PropagationError` with the time stamp.
    """
    space = space or CompositeSpace(params.atom_count)
    rho0 = np.asarray(rho0, dtype=complex)
    tr0 = np.trace(rho0).real
    if check:
        check_state(rho0, 0.0, expected_trace=tr0)
    nrec = max(1, int(round(params.duration / record_every)))
    times = np.linspace(0.0, params.duration, nrec + 1)
    states = [rho0] + Propagator(space, params, secular, **kw).evolve(rho0, times[1:])
    pops, trace, purity = [], [], []
    for t, rho in zip(times, states):
        if check:
            check_state(rho, t * 1e3, expected_trace=tr0)
        pops.append(np.real(np.diag(rho)))
        trace.append(np.trace(rho).real)
        purity.append(np.real(np.vdot(rho, rho)))
    return Trajectory(space, times, np.array(pops), np.array(trace), np.array(purity), states[-1])


# -- one cooling step per M block ------------------------------------------------

@lru_cache(maxsize=256)
def _cooling_map(space, params, secular, rtol, atol):
    prop = Propagator(space, params, secular, rtol, atol)
    return prop.step_map(params.duration * 1e3)


def cooling_map(space, params, secular=False, rtol=1e-12, atol=1e-14):
    """Superoperator of one complete cooling step (cached)."""
    S = _cooling_map(space, params, bool(secular), rtol, atol)
    S.setflags(write=False)
    return S


def cool_block(space, params, phonon, rotor, secular=False):
    """Cool one M block from atoms-ground x ``phonon`` x ``rotor``.

    ``rotor`` is a 2x2 (possibly unnormalized) density matrix over (j1, j2).
    Returns the reduced phonon populations and the reduced 2x2 rotor state.
    """
    rho0 = space.product_state(phonon, rotor)
    rho = unvec(cooling_map(space, params, secular) @ vec(rho0), space.dim)
    na = space.atom_count
    return np.real(np.diag(space.reduced(rho, [na]))), space.reduced(rho, [na + 1])


def cool_one_step(distribution, params, couplings, n_max=2, secular=False):
    """One cooling step applied independently to each M block.

    Parameters
    ----------
    distribution : dict
        ``M -> (n_max+1, 2)`` array of populations P(n, j) with ``j`` in
        ``(j1, j2)``; diagonal in the bare basis.
    couplings : dict
        ``M -> total coupling (kHz)``.  Blocks with zero coupling are left
        unchanged.

    Returns
    -------
    dict with the same layout.
    """
    space = CompositeSpace(params.atom_count, n_max)
    out = {}
    for M, P in distribution.items():
        P = np.asarray(P, dtype=float)
        if P.shape != (n_max + 1, 2):
            raise ValueError(f"block M={M} must have shape {(n_max + 1, 2)}")
        E = float(couplings.get(M, couplings.get(abs(M), 0.0)))
        if E == 0.0:
            out[M] = P.copy()
            continue
        rho0 = np.zeros((space.dim, space.dim), dtype=complex)
        for n, j in itertools.product(range(n_max + 1), range(2)):
            i = space.index((0,) * space.atom_count, n, j)
            rho0[i, i] = P[n, j]
        S = cooling_map(space, params.replace(coupling=abs(E)), secular)
        rho = unvec(S @ vec(rho0), space.dim)
        pops = np.real(np.diag(rho)).reshape(space.dims)
        out[M] = pops.sum(axis=tuple(range(space.atom_count)))
    return out
