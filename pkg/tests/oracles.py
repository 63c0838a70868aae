"""Independent reference implementations used only by the tests."""

from fractions import Fraction
from math import factorial

import numpy as np


def _fact(x):
    # x is a Fraction with denominator 1; None signals a negative argument
    if x.denominator != 1 or x < 0:
        return None
    return factorial(int(x))


def racah_3j_exact(j1, j2, j3, m1, m2, m3):
    """Exact 3j symbol as ``(sign, value**2)`` by brute-force Racah summation.

    Arguments may be ints, Fractions or half-integer floats.  The sum runs over
    every ``k`` up to ``j1 + j2 + j3`` and drops terms with negative factorials.
    """
    j1, j2, j3, m1, m2, m3 = (Fraction(x).limit_denominator(2) for x in (j1, j2, j3, m1, m2, m3))
    if m1 + m2 + m3 != 0:
        return 0, Fraction(0)
    if not abs(j1 - j2) <= j3 <= j1 + j2 or (j1 + j2 + j3).denominator != 1:
        return 0, Fraction(0)
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if abs(m) > j or (j - m).denominator != 1:
            return 0, Fraction(0)
    tri = Fraction(_fact(j1 + j2 - j3) * _fact(j1 - j2 + j3) * _fact(-j1 + j2 + j3),
                   _fact(j1 + j2 + j3 + 1))
    norm = tri
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        norm *= _fact(j + m) * _fact(j - m)
    s = Fraction(0)
    for k in range(int(j1 + j2 + j3) + 1):
        args = (k, j3 - j2 + k + m1, j3 - j1 + k - m2, j1 + j2 - j3 - k, j1 - k - m1, j2 - k + m2)
        fs = [_fact(Fraction(a)) for a in args]
        if any(f is None for f in fs):
            continue
        s += Fraction((-1) ** k, int(np.prod([f for f in fs], dtype=object)))
    if s == 0:
        return 0, Fraction(0)
    phase = -1 if int(j1 - j2 - m3) % 2 else 1
    return phase * (1 if s > 0 else -1), norm * s * s


def racah_3j(j1, j2, j3, m1, m2, m3):
    sign, sq = racah_3j_exact(j1, j2, j3, m1, m2, m3)
    return sign * float(sq) ** 0.5


def half_integers(jmax):
    return [Fraction(k, 2) for k in range(int(2 * jmax) + 1)]


def projections(j):
    return [-j + k for k in range(int(2 * j) + 1)]


def asym_top_j1(A, B, C):
    """Closed-form J=1 energies keyed by label."""
    return {"1_01": B + C, "1_11": A + C, "1_10": A + B}


def asym_top_j2(A, B, C):
    """Closed-form J=2 energies (standard textbook results)."""
    r = np.sqrt((B - C) ** 2 + (A - C) * (A - B))
    return {
        "2_02": 2 * (A + B + C) - 2 * r,
        "2_12": A + B + 4 * C,
        "2_11": A + 4 * B + C,
        "2_21": 4 * A + B + C,
        "2_20": 2 * (A + B + C) + 2 * r,
    }


def equal_mass_three_ion(axial, radial):
    """Closed-form normal-mode frequencies of three equal ions."""
    ax = np.array([1.0, np.sqrt(3.0), np.sqrt(29.0 / 5.0)]) * axial
    rad = np.sort([radial, np.sqrt(radial**2 - axial**2), np.sqrt(radial**2 - 12.0 / 5.0 * axial**2)])
    return ax, rad
