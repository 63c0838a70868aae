"""Equilibrium positions and normal modes of a linear chain of trapped ions.

Positions are in micrometres and frequencies are ordinary frequencies in MHz.
Mode vectors are eigenvectors of the mass-weighted Hessian, so the entries
``b_i`` of a mode satisfy ``sum_i b_i^(p) b_i^(q) = delta_pq``.  Only one
radial direction is modelled (the two radial directions are degenerate).

Two conventions relate the quoted trap frequencies to the individual
particles:

``pseudopotential``
    particle ``i`` has axial frequency ``w_x sqrt(q_i m_ref / (q_ref m_i))``
    (equal DC spring constant per unit charge) and radial frequency
    ``w_z q_i m_ref / (q_ref m_i)`` (RF pseudopotential);
``none``
    every particle has ``w_x`` and ``w_z``.

``m_ref`` is the mass of the first particle of the reference kind.
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import AMU, COULOMB_K, TWO_PI


class TrapError(ValueError):
    """Invalid chain definition or unknown mode."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class StructuralInstabilityError(RuntimeError):
    """A normal mode has imaginary frequency (e.g. the zig-zag transition)."""

    def __init__(self, label, eigenvalue):
        super().__init__(f"mode {label} is unstable (omega^2 = {eigenvalue:.4g} in trap units)")
        self.label = label
        self.eigenvalue = eigenvalue


@dataclass(frozen=True)
class Particle:
    mass: float  # u
    charge: float = 1.0  # e
    kind: str = "atom"  # "atom" or "molecule"


@dataclass(frozen=True)
class IonChainSpec:
    particles: tuple
    axial_freq: float  # MHz
    radial_freq: float  # MHz
    ref_species: str = "atom"
    scaling: str = "pseudopotential"

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))
        if len(self.particles) < 2:
            raise TrapError("need at least two particles")
        if any(p.charge <= 0 or p.mass <= 0 for p in self.particles):
            raise TrapError("masses and charges must be positive")
        if self.scaling not in ("pseudopotential", "none"):
            raise TrapError(f"unknown scaling convention {self.scaling!r}")
        if not any(p.kind == self.ref_species for p in self.particles):
            raise TrapError(f"no particle of reference kind {self.ref_species!r}")
        if self.axial_freq <= 0 or self.radial_freq <= 0:
            raise TrapError("trap frequencies must be positive")

    @property
    def ref_index(self):
        return next(i for i, p in enumerate(self.particles) if p.kind == self.ref_species)

    @property
    def molecule_index(self):
        idx = [i for i, p in enumerate(self.particles) if p.kind == "molecule"]
        if len(idx) != 1:
            raise TrapError(f"expected exactly one molecule in the chain, found {len(idx)}")
        return idx[0]

    @property
    def masses(self):
        return np.array([p.mass for p in self.particles], dtype=float)

    @property
    def charges(self):
        return np.array([p.charge for p in self.particles], dtype=float)

    def single_particle_freqs(self, radial_freq=None):
        """Per-particle (axial, radial) frequencies in MHz."""
        wz = self.radial_freq if radial_freq is None else radial_freq
        m, q = self.masses, self.charges
        r = self.ref_index
        if self.scaling == "pseudopotential":
            ratio = (q / q[r]) * (m[r] / m)
            return self.axial_freq * np.sqrt(ratio), wz * ratio
        n = len(m)
        return np.full(n, float(self.axial_freq)), np.full(n, float(wz))

    def replace(self, **changes):
        kw = dict(particles=self.particles, axial_freq=self.axial_freq, radial_freq=self.radial_freq,
                  ref_species=self.ref_species, scaling=self.scaling)
        kw.update(changes)
        return IonChainSpec(**kw)

    def with_molecule_mass(self, mass):
        parts = [Particle(mass, p.charge, p.kind) if p.kind == "molecule" else p for p in self.particles]
        return self.replace(particles=parts)


def three_ion_chain(atom_mass, molecule_mass, axial_freq=1.0, radial_freq=10.0,
                    ref_species="atom", scaling="pseudopotential"):
    """Atom - molecule - atom chain."""
    return IonChainSpec(
        (Particle(atom_mass, 1.0, "atom"), Particle(molecule_mass, 1.0, "molecule"),
         Particle(atom_mass, 1.0, "atom")),
        axial_freq, radial_freq, ref_species, scaling)


def _scales(chain):
    """Reference mass (kg), spring constant (N/m) and Coulomb length (m)."""
    r = chain.ref_index
    m_ref = chain.masses[r] * AMU
    w_ax = chain.single_particle_freqs()[0][r]
    k_ref = m_ref * (TWO_PI * w_ax * 1e6) ** 2
    ell = (COULOMB_K / k_ref) ** (1.0 / 3.0)
    return m_ref, k_ref, ell


def _energy_grad_hess(u, kappa, q):
    d = u[:, None] - u[None, :]
    qq = q[:, None] * q[None, :]
    np.fill_diagonal(d, 1.0)
    inv = 1.0 / np.abs(d)
    np.fill_diagonal(inv, 0.0)
    energy = 0.5 * np.sum(kappa * u**2) + 0.5 * np.sum(qq * inv)
    grad = kappa * u - np.sum(qq * np.sign(d) * inv**2, axis=1)
    off = -2.0 * qq * inv**3
    np.fill_diagonal(off, 0.0)
    hess = off + np.diag(kappa - off.sum(axis=1))
    return energy, grad, hess


def equilibrium_positions(chain, tol=1e-12, max_iter=200):
    """Axial equilibrium positions in micrometres (ordering as in ``chain``)."""
    _, _, ell = _scales(chain)
    kappa = _axial_kappa(chain)
    return _equilibrium_dimensionless(kappa, chain.charges, tol, max_iter) * ell * 1e6


def _axial_kappa(chain):
    w_ax = chain.single_particle_freqs()[0]
    r = chain.ref_index
    return (chain.masses / chain.masses[r]) * (w_ax / w_ax[r]) ** 2


def _radial_kappa(chain, radial_freq=None):
    w_ax, w_rad = chain.single_particle_freqs(radial_freq)
    r = chain.ref_index
    return (chain.masses / chain.masses[r]) * (w_rad / w_ax[r]) ** 2


def _equilibrium_dimensionless(kappa, q, tol, max_iter):
    n = len(kappa)
    # equal-mass small-N spacing as a starting guess
    u = (np.arange(n) - (n - 1) / 2) * 1.2 * n ** (-0.4) * (q.mean() / kappa.mean()) ** (1 / 3)
    energy, grad, hess = _energy_grad_hess(u, kappa, q)
    for _ in range(max_iter):
        res = np.max(np.abs(grad))
        if res < tol:
            return u
        step = np.linalg.solve(hess, -grad)
        if np.any(np.linalg.eigvalsh(hess) <= 0) or not np.all(np.isfinite(step)):
            step = -grad
        t = 1.0
        while True:
            trial = u + t * step
            if np.all(np.diff(trial) > 0):
                e_t, g_t, h_t = _energy_grad_hess(trial, kappa, q)
                if e_t <= energy + 1e-14 * abs(energy) or t < 1e-12:
                    break
            t *= 0.5
            if t < 1e-16:
                raise ConvergenceError("line search failed for equilibrium positions", res)
        u, energy, grad, hess = trial, e_t, g_t, h_t
    raise ConvergenceError("equilibrium Newton iteration did not converge", np.max(np.abs(grad)))


def _radial_coulomb(u, q):
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, 1.0)
    c = q[:, None] * q[None, :] / np.abs(d) ** 3
    np.fill_diagonal(c, 0.0)
    return c - np.diag(c.sum(axis=1))


@dataclass(frozen=True)
class NormalMode:
    axis: str  # "axial" or "radial"
    frequency: float  # MHz
    vector: np.ndarray  # mass-weighted, unit norm
    label: str


@dataclass(frozen=True)
class NormalModeSet:
    chain: IonChainSpec
    equilibria: np.ndarray  # um
    modes: tuple = field(default_factory=tuple)

    def mode(self, label):
        for m in self.modes:
            if m.label == label:
                return m
        raise TrapError(f"unknown mode label {label!r}; have {[m.label for m in self.modes]}")

    def by_axis(self, axis):
        return [m for m in self.modes if m.axis == axis]


def _fix_sign(v):
    v = np.array(v, dtype=float)
    for x in v:
        if abs(x) > 1e-9:
            return v if x > 0 else -v
    return v


def is_alternating(v, tol=1e-12):
    s = np.sign(np.where(np.abs(v) > tol, v, 0.0))
    return bool(np.all(s != 0) and np.all(s[1:] == -s[:-1]))


def _zigzag_index(vectors):
    """Index (column) of the radial mode with alternating signs, or None."""
    cands = [i for i in range(vectors.shape[1]) if is_alternating(vectors[:, i])]
    if not cands:
        return None
    n = vectors.shape[0]
    alt = (-1.0) ** np.arange(n)
    return max(cands, key=lambda i: abs(alt @ vectors[:, i]))


def _diagonalize(K, masses_rel, axis, w_unit):
    s = 1.0 / np.sqrt(masses_rel)
    Kw = K * np.outer(s, s)
    Kw = 0.5 * (Kw + Kw.T)
    lam, vec = np.linalg.eigh(Kw)
    labels = [f"{axis}-{i + 1}" for i in range(len(lam))]
    if axis == "radial":
        z = _zigzag_index(vec)
        if z is not None:
            labels[z] = "zigzag"
    for i, l in enumerate(lam):
        if l <= 0:
            raise StructuralInstabilityError(labels[i], l)
    return [NormalMode(axis, float(w_unit * np.sqrt(l)), _fix_sign(vec[:, i]), labels[i])
            for i, l in enumerate(lam)]


def normal_modes(chain, tol=1e-12):
    """Axial and radial normal modes at the equilibrium configuration."""
    _, _, ell = _scales(chain)
    q = chain.charges
    kappa = _axial_kappa(chain)
    u = _equilibrium_dimensionless(kappa, q, tol, 200)
    _, _, K_ax = _energy_grad_hess(u, kappa, q)
    K_rad = np.diag(_radial_kappa(chain)) + _radial_coulomb(u, q)
    mr = chain.masses / chain.masses[chain.ref_index]
    w_unit = chain.single_particle_freqs()[0][chain.ref_index]
    modes = _diagonalize(K_ax, mr, "axial", w_unit) + _diagonalize(K_rad, mr, "radial", w_unit)
    return NormalModeSet(chain, u * ell * 1e6, tuple(modes))


def molecule_displacement(modes, label="zigzag"):
    """Molecule entry ``b_m`` of the mass-weighted vector of mode ``label``."""
    return float(modes.mode(label).vector[modes.chain.molecule_index])


class ZigzagModel:
    """Radial zig-zag mode as a function of the radial trap frequency.

    The axial equilibrium does not depend on the radial frequency, so it is
    solved once at construction.
    """

    def __init__(self, chain):
        self.chain = chain
        q = chain.charges
        u = _equilibrium_dimensionless(_axial_kappa(chain), q, 1e-12, 200)
        self._coulomb = _radial_coulomb(u, q)
        mr = chain.masses / chain.masses[chain.ref_index]
        self._s = 1.0 / np.sqrt(mr)
        self._w_unit = chain.single_particle_freqs()[0][chain.ref_index]
        self._mol = chain.molecule_index

    def evaluate(self, radial_freqs):
        """Zig-zag frequency (MHz), molecule entry ``b_m`` and stability flag.

        Points without a stable alternating mode get ``nan``.
        """
        wz = np.atleast_1d(np.asarray(radial_freqs, dtype=float))
        chain, s = self.chain, self._s
        kap = np.array([_radial_kappa(chain, w) for w in wz.ravel()])
        n = len(s)
        K = (kap[:, :, None] * np.eye(n)[None] + self._coulomb[None]) * np.outer(s, s)[None]
        lam, vec = np.linalg.eigh(K)
        freq = np.full(wz.size, np.nan)
        bm = np.full(wz.size, np.nan)
        stable = np.zeros(wz.size, dtype=bool)
        for i in range(wz.size):
            z = _zigzag_index(vec[i])
            if z is None or np.any(lam[i] <= 0):
                continue
            freq[i] = self._w_unit * np.sqrt(lam[i, z])
            bm[i] = _fix_sign(vec[i][:, z])[self._mol]
            stable[i] = True
        shape = np.shape(radial_freqs)
        return freq.reshape(shape), bm.reshape(shape), stable.reshape(shape)


def radial_zigzag_scan(chain, radial_freqs):
    """Zig-zag frequency, ``b_m`` and stability over a radial-frequency grid."""
    return ZigzagModel(chain).evaluate(radial_freqs)
