"""Rigid asymmetric-top levels and space-frame dipole matrix elements.

The Hamiltonian ``A Ja^2 + B Jb^2 + C Jc^2`` is set up in representation I^r
(a along the symmetric-top z axis) over ``|J, K>``, ``K = -J..J``, and
diagonalized per Wang symmetry block so that near-degenerate K doublets are
separated exactly.  Energies and rotational constants are in MHz.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .angular import BODY_SPH, SPACE_CART, k_factor_matrix, m_factor


class RotorError(ValueError):
    """Invalid molecule constants or unknown rotational level."""


@dataclass(frozen=True)
class MoleculeSpec:
    """Rigid-rotor molecular input record.

    Masses in u, rotational constants in MHz, dipole components in Debye.
    A dipole component of ``None`` means "not tabulated"; coupling code then
    works per Debye of ``mu_a``.
    """

    name: str
    mass: float
    A: float
    B: float
    C: float
    mu_a: float | None = None
    mu_b: float | None = None
    mu_c: float | None = None

    def __post_init__(self):
        if not self.mass > 0:
            raise RotorError(f"{self.name}: mass must be positive")
        if not (self.A >= self.B >= self.C > 0):
            raise RotorError(f"{self.name}: require A >= B >= C > 0, got {self.A}, {self.B}, {self.C}")

    @property
    def has_dipole(self):
        return any(mu is not None for mu in (self.mu_a, self.mu_b, self.mu_c))

    def dipole(self, per_debye=False):
        """Body-frame dipole ``(mu_a, mu_b, mu_c)`` with missing entries as 0.

        If no component is tabulated (or ``per_debye``), a unit ``mu_a`` is used.
        """
        if per_debye or not self.has_dipole:
            return (1.0, 0.0, 0.0)
        return tuple(0.0 if mu is None else float(mu) for mu in (self.mu_a, self.mu_b, self.mu_c))


@dataclass(frozen=True, order=True)
class RotLevel:
    J: int
    Ka: int
    Kc: int
    energy: float = field(compare=False)

    @property
    def label(self):
        return f"{self.J}_{self.Ka}{self.Kc}"

    @property
    def key(self):
        return (self.J, self.Ka, self.Kc)

    def __str__(self):
        return self.label


def canonical_labels(J):
    """(Ka, Kc) pairs in ascending-energy order for A > B > C."""
    return [((i + 1) // 2, J - i // 2) for i in range(2 * J + 1)]


def hamiltonian_matrix(A, B, C, J):
    """Symmetric-top-basis matrix of ``A Ja^2 + B Jb^2 + C Jc^2`` (rows ``K = -J..J``)."""
    n = 2 * J + 1
    jj = J * (J + 1)
    H = np.zeros((n, n))
    for i, K in enumerate(range(-J, J + 1)):
        H[i, i] = 0.5 * (B + C) * (jj - K * K) + A * K * K
        if i + 2 < n:
            off = 0.25 * (B - C) * np.sqrt((jj - K * (K + 1)) * (jj - (K + 1) * (K + 2)))
            H[i, i + 2] = H[i + 2, i] = off
    return H


def _wang_blocks(J):
    """Orthogonal Wang transform and index groups of the four symmetry blocks."""
    n = 2 * J + 1
    W = np.zeros((n, n))
    groups = {}
    col = 0
    for K in range(0, J + 1):
        for sign in ((+1,) if K == 0 else (+1, -1)):
            if K == 0:
                W[J, col] = 1.0
            else:
                W[J + K, col] = 1 / np.sqrt(2)
                W[J - K, col] = sign / np.sqrt(2)
            groups.setdefault((K % 2, sign), []).append(col)
            col += 1
    return W, list(groups.values())


@dataclass(frozen=True)
class RotorBlock:
    """Eigenlevels of one J block; ``eigenvectors[:, i]`` belongs to ``levels[i]``."""

    J: int
    levels: tuple
    eigenvectors: np.ndarray
    hamiltonian: np.ndarray

    def level(self, Ka, Kc):
        for i, lev in enumerate(self.levels):
            if lev.Ka == Ka and lev.Kc == Kc:
                return i
        raise RotorError(f"no level {self.J}_{Ka}{Kc}")


def build_rotor_block(spec, J):
    J = int(J)
    if J < 0:
        raise RotorError("J must be non-negative")
    return _build_rotor_block(spec.A, spec.B, spec.C, J)


def _wang_matrix(H, J):
    """``W.T @ H @ W`` assembled entry by entry (no rounding from 1/sqrt(2))."""
    cols = [(K, sg) for K in range(J + 1) for sg in ((+1,) if K == 0 else (+1, -1))]
    n = len(cols)
    Hw = np.zeros((n, n))
    for a, (K, s) in enumerate(cols):
        for b, (L, t) in enumerate(cols):
            if s != t:
                continue
            if K == 0 and L == 0:
                v = H[J, J]
            elif K == 0 or L == 0:
                v = np.sqrt(2.0) * H[J + K, J + L]
            else:
                v = H[J + K, J + L] + s * H[J + K, J - L]
            Hw[a, b] = v
    return Hw


@lru_cache(maxsize=512)
def _build_rotor_block(A, B, C, J):
    H = hamiltonian_matrix(A, B, C, J)
    W, groups = _wang_blocks(J)
    Hw = _wang_matrix(H, J)
    vals, vecs = [], []
    for g in groups:
        w, v = np.linalg.eigh(Hw[np.ix_(g, g)])
        for i in range(len(g)):
            full = np.zeros(2 * J + 1)
            full[g] = v[:, i]
            vals.append(w[i])
            vecs.append(W @ full)
    order = np.argsort(vals, kind="stable")
    V = np.array(vecs).T[:, order]
    for i in range(V.shape[1]):
        j = np.argmax(np.abs(V[:, i]))
        if V[j, i] < 0:
            V[:, i] = -V[:, i]
    V.setflags(write=False)
    H.setflags(write=False)
    levels = tuple(RotLevel(J, Ka, Kc, float(vals[o])) for (Ka, Kc), o in zip(canonical_labels(J), order))
    return RotorBlock(J, levels, V, H)


def find_level(spec, label):
    """Resolve ``(J, Ka, Kc)`` or ``"J_KaKc"`` to ``(RotLevel, eigenvector)``."""
    if isinstance(label, RotLevel):
        label = label.key
    if isinstance(label, str):
        try:
            J, kk = label.split("_")
            J, Ka, Kc = int(J), int(kk[: len(kk) // 2]), int(kk[len(kk) // 2:])
        except ValueError:
            raise RotorError(f"cannot parse level label {label!r}") from None
    else:
        J, Ka, Kc = (int(x) for x in label)
    if J < 0 or not (0 <= Ka <= J and 0 <= Kc <= J and Ka + Kc in (J, J + 1)):
        raise RotorError(f"unknown level {J}_{Ka}{Kc}")
    block = build_rotor_block(spec, J)
    i = block.level(Ka, Kc)
    return block.levels[i], block.eigenvectors[:, i]


POLARIZATIONS = {
    "x": np.array([1, 0, 0], dtype=complex),
    "y": np.array([0, 1, 0], dtype=complex),
    "z": np.array([0, 0, 1], dtype=complex),
    "sigma+": np.array([1, 1j, 0]) / np.sqrt(2),
    "sigma-": np.array([1, -1j, 0]) / np.sqrt(2),
}


def polarization_vector(pol):
    """Complex unit 3-vector over (x, y, z) from a preset name or a vector."""
    if isinstance(pol, str):
        try:
            return POLARIZATIONS[pol.replace("σ", "sigma").lower()]
        except KeyError:
            raise RotorError(f"unknown polarization {pol!r}") from None
    e = np.asarray(pol, dtype=complex)
    if e.shape != (3,):
        raise RotorError("polarization must be a 3-vector over (x, y, z)")
    return e


def _space_weights(e):
    # mu . e = sum_m w_m mu_m (space spherical components)
    w = {-1: 0j, 0: 0j, 1: 0j}
    for beta, eb in zip("xyz", e):
        for m, u in SPACE_CART[beta].items():
            w[m] += eb * u
    return w


def _body_weights(mu):
    w = {-1: 0j, 0: 0j, 1: 0j}
    for alpha, ma in zip("abc", mu):
        for k, v in BODY_SPH[alpha].items():
            w[k] += ma * v
    return w


def reduced_elements(spec, bra_level, ket_level, per_debye=False):
    """Body-contracted K factors ``{m-independent, k summed}`` between two levels.

    Returns ``g`` with ``g = sum_k mu_k <c'| K-factor_k |c>`` so that
    ``<bra, M'| mu_m |ket, M> = m_factor(J', M', J, M, m) * g``.
    """
    lb, cb = find_level(spec, bra_level)
    lk, ck = find_level(spec, ket_level)
    if abs(lb.J - lk.J) > 1:
        return 0j
    bw = _body_weights(spec.dipole(per_debye))
    g = 0j
    for k, wk in bw.items():
        if wk != 0:
            g += wk * (cb @ k_factor_matrix(lb.J, lk.J, k) @ ck)
    return g


def dipole_element(spec, bra, ket, polarization, per_debye=False):
    """``<bra| mu . e |ket>`` in Debye.

    ``bra`` and ``ket`` are ``(level, M)`` with level a label, key tuple or
    RotLevel; ``polarization`` is ``'x'``, ``'y'``, ``'z'``, ``'sigma+'``,
    ``'sigma-'`` or a complex 3-vector (not conjugated).
    """
    (bl, Mb), (kl, Mk) = bra, ket
    lb, _ = find_level(spec, bl)
    lk, _ = find_level(spec, kl)
    if abs(Mb) > lb.J or abs(Mk) > lk.J:
        raise RotorError("|M| > J")
    if abs(lb.J - lk.J) > 1:
        return 0j
    m = Mb - Mk
    if abs(m) > 1:
        return 0j
    w = _space_weights(polarization_vector(polarization))[m]
    if w == 0:
        return 0j
    return w * m_factor(lb.J, Mb, lk.J, Mk, m) * reduced_elements(spec, lb, lk, per_debye)


@dataclass(frozen=True)
class Transition:
    lower: RotLevel
    upper: RotLevel
    frequency: float  # MHz
    strength: dict  # axis -> max_M |<upper, M'| mu_axis |lower, M>|^2 in D^2

    def active(self, axis, threshold=1e-20):
        return self.strength[axis] > threshold


def transition_table(spec, Jmax, per_debye=False, threshold=1e-20):
    """All dipole-allowed level pairs with ``J <= Jmax`` and positive frequency."""
    if Jmax < 1:
        raise RotorError("Jmax must be >= 1")
    levels = [lev for J in range(Jmax + 1) for lev in build_rotor_block(spec, J).levels]
    out = []
    for i, lo in enumerate(levels):
        for hi in levels:
            if hi.energy <= lo.energy or abs(hi.J - lo.J) > 1:
                continue
            g = reduced_elements(spec, hi, lo, per_debye)
            if abs(g) ** 2 <= threshold:
                continue
            strength = {}
            for axis in ("x", "y", "z"):
                w = _space_weights(POLARIZATIONS[axis])
                best = 0.0
                for M in range(-lo.J, lo.J + 1):
                    for m, wm in w.items():
                        Mp = M + m
                        if wm == 0 or abs(Mp) > hi.J:
                            continue
                        best = max(best, abs(wm * m_factor(hi.J, Mp, lo.J, M, m) * g) ** 2)
                strength[axis] = best
            if max(strength.values()) > threshold:
                out.append(Transition(lo, hi, hi.energy - lo.energy, strength))
    out.sort(key=lambda t: t.frequency)
    return out
