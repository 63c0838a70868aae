"""Wigner 3j symbols and direction-cosine matrix elements in the symmetric-top basis.

Symmetric-top kets are ``|J, K, M>`` with ``K`` the projection on the body
``a`` axis and ``M`` the projection on the space-fixed ``z`` axis.  Phases
follow Condon-Shortley; rotation matrices follow Zare (active z-y-z Euler
rotations), so that

    <J' K' M'| D^1*_{m k} |J K M>
        = (-1)^(M'-K') sqrt((2J+1)(2J'+1)) (J 1 J'; M m -M') (J 1 J'; K k -K')

Cartesian space axes ``x, y, z`` and body axes ``a, b, c`` (with ``a`` along
the symmetric-top quantization axis) are expanded into spherical components.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np


class AngularMomentumError(ValueError):
    """Invalid angular-momentum quantum numbers."""


@dataclass(frozen=True)
class SymTopKet:
    J: int
    K: int
    M: int

    def __post_init__(self):
        if self.J < 0 or abs(self.K) > self.J or abs(self.M) > self.J:
            raise AngularMomentumError(f"invalid symmetric-top ket {self}")


def _twice(x):
    """Return 2*x as an int, rejecting values that are not half-integers."""
    t = 2 * Fraction(x).limit_denominator(2)
    if t.denominator != 1 or abs(float(t) - 2 * float(x)) > 1e-9:
        raise AngularMomentumError(f"{x!r} is not an integer or half-integer")
    return int(t)


@lru_cache(maxsize=200_000)
def _wigner3j_twice(tj1, tj2, tj3, tm1, tm2, tm3):
    # all arguments are doubled quantum numbers
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        if tj < 0:
            raise AngularMomentumError("negative angular momentum")
        if abs(tm) > tj:
            raise AngularMomentumError("|m| > j")
        if (tj - tm) % 2:
            raise AngularMomentumError("j and m must both be integer or both half-integer")
    if tm1 + tm2 + tm3 != 0:
        return 0.0
    if tj3 < abs(tj1 - tj2) or tj3 > tj1 + tj2 or (tj1 + tj2 + tj3) % 2:
        return 0.0

    # integer combinations entering the Racah sum
    a = (tj1 + tj2 - tj3) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tj3 - tj2 + tm1) // 2
    e = (tj3 - tj1 - tm2) // 2
    kmin = max(0, -d, -e)
    kmax = min(a, b, c)

    s = 0
    for k in range(kmin, kmax + 1):
        term = Fraction(1, factorial(k) * factorial(a - k) * factorial(b - k)
                        * factorial(c - k) * factorial(d + k) * factorial(e + k))
        s += -term if k % 2 else term
    if s == 0:
        return 0.0

    pref2 = Fraction(
        factorial(a) * factorial((tj1 - tj2 + tj3) // 2) * factorial((-tj1 + tj2 + tj3) // 2),
        factorial((tj1 + tj2 + tj3) // 2 + 1),
    )
    for tj, tm in ((tj1, tm1), (tj2, tm2), (tj3, tm3)):
        pref2 *= factorial((tj + tm) // 2) * factorial((tj - tm) // 2)

    phase = -1 if ((tj1 - tj2 - tm3) // 2) % 2 else 1
    sign = phase * (1 if s > 0 else -1)
    return sign * sqrt(pref2 * s * s)


def wigner3j(j1, j2, j3, m1, m2, m3):
    """Wigner 3j symbol ``(j1 j2 j3; m1 m2 m3)``.

    Integer or half-integer arguments.  Returns 0 when the triangle rule or
    ``m1 + m2 + m3 = 0`` is violated; raises :class:`AngularMomentumError`
    for negative ``j`` or ``|m| > j``.
    """
    return _wigner3j_twice(_twice(j1), _twice(j2), _twice(j3),
                           _twice(m1), _twice(m2), _twice(m3))


_SQ2 = 1 / np.sqrt(2)

# Cartesian component = sum_m SPACE_CART[axis][m] * spherical component m
SPACE_CART = {
    "x": {-1: _SQ2, +1: -_SQ2},
    "y": {-1: 1j * _SQ2, +1: 1j * _SQ2},
    "z": {0: 1.0},
}

# spherical component k = sum_alpha BODY_SPH[alpha][k] * Cartesian component alpha,
# with the a axis along the symmetric-top quantization axis and b, c along x, y
BODY_SPH = {
    "a": {0: 1.0},
    "b": {-1: _SQ2, +1: -_SQ2},
    "c": {-1: -1j * _SQ2, +1: -1j * _SQ2},
}


def spherical_direction_cosine(bra, ket, m, k):
    """``<bra| D^1*_{m k} |ket>`` for spherical components ``m, k`` in {-1, 0, 1}."""
    if bra.M != ket.M + m or bra.K != ket.K + k:
        return 0.0
    if abs(bra.J - ket.J) > 1:
        return 0.0
    phase = -1 if (bra.M - bra.K) % 2 else 1
    return (phase * sqrt((2 * ket.J + 1) * (2 * bra.J + 1))
            * wigner3j(ket.J, 1, bra.J, ket.M, m, -bra.M)
            * wigner3j(ket.J, 1, bra.J, ket.K, k, -bra.K))


def _expand(axis, table, kind):
    if isinstance(axis, str):
        try:
            return table[axis]
        except KeyError:
            raise AngularMomentumError(f"unknown {kind} axis {axis!r}") from None
    if axis not in (-1, 0, 1):
        raise AngularMomentumError(f"spherical {kind} component must be -1, 0 or 1")
    return {int(axis): 1.0}


def direction_cosine(bra, ket, space_axis, body_axis):
    """Direction-cosine element ``<bra| R_{space, body} |ket>``.

    ``space_axis`` is ``'x'``, ``'y'``, ``'z'`` or a spherical component;
    ``body_axis`` is ``'a'``, ``'b'``, ``'c'`` or a spherical component.
    Cartesian ``y`` (or ``c``) elements may be complex.
    """
    sp = _expand(space_axis, SPACE_CART, "space")
    bd = _expand(body_axis, BODY_SPH, "body")
    val = 0j
    for m, um in sp.items():
        if bra.M - ket.M != m:
            continue
        for k, vk in bd.items():
            if bra.K - ket.K != k:
                continue
            val += um * vk * spherical_direction_cosine(bra, ket, m, k)
    if val.imag == 0:
        return val.real
    return val


def direction_cosine_matrix(J_bra, J_ket, space_axis, body_axis, M_bra=None, M_ket=None):
    """Dense ``<J' K' M'| R |J K M>`` block over all K (and M unless fixed).

    Rows/columns are ordered ``K = -J..J`` (outer) when M is fixed; otherwise
    the index is ``(M, K)`` with M outer.  Returned as complex ndarray.
    """
    Ms_bra = range(-J_bra, J_bra + 1) if M_bra is None else [M_bra]
    Ms_ket = range(-J_ket, J_ket + 1) if M_ket is None else [M_ket]
    rows = [(M, K) for M in Ms_bra for K in range(-J_bra, J_bra + 1)]
    cols = [(M, K) for M in Ms_ket for K in range(-J_ket, J_ket + 1)]
    out = np.zeros((len(rows), len(cols)), dtype=complex)
    for i, (Mb, Kb) in enumerate(rows):
        bra = SymTopKet(J_bra, Kb, Mb)
        for j, (Mk, Kk) in enumerate(cols):
            if abs(Mb - Mk) > 1 or abs(Kb - Kk) > 1:
                continue
            out[i, j] = direction_cosine(bra, SymTopKet(J_ket, Kk, Mk), space_axis, body_axis)
    return out


def m_factor(J_bra, M_bra, J_ket, M_ket, m):
    """Space-frame (M-dependent) factor of the direction-cosine element.

    Together with :func:`k_factor_matrix` this factorizes
    ``<J'K'M'|D^1*_{mk}|JKM> = m_factor * k_factor``.
    """
    if M_bra != M_ket + m:
        return 0.0
    phase = -1 if M_bra % 2 else 1
    return phase * wigner3j(J_ket, 1, J_bra, M_ket, m, -M_bra)


@lru_cache(maxsize=4096)
def _k_factor_matrix(J_bra, J_ket, k):
    out = np.zeros((2 * J_bra + 1, 2 * J_ket + 1))
    if abs(J_bra - J_ket) > 1:
        return out
    norm = sqrt((2 * J_ket + 1) * (2 * J_bra + 1))
    for K in range(-J_ket, J_ket + 1):
        Kb = K + k
        if abs(Kb) > J_bra:
            continue
        phase = -1 if Kb % 2 else 1
        out[Kb + J_bra, K + J_ket] = phase * norm * wigner3j(J_ket, 1, J_bra, K, k, -Kb)
    out.setflags(write=False)
    return out


def k_factor_matrix(J_bra, J_ket, k):
    """Body-frame factor ``[K', K]`` (rows ``K' = -J'..J'``, columns ``K = -J..J``)."""
    return _k_factor_matrix(int(J_bra), int(J_ket), int(k))
