import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import half_integers, projections, racah_3j
from rotcool.angular import (AngularMomentumError, SymTopKet, direction_cosine,
                             direction_cosine_matrix, k_factor_matrix, m_factor,
                             spherical_direction_cosine, wigner3j)


def all_3j_args(jmax):
    J = half_integers(jmax)
    for j1, j2, j3 in itertools.product(J, J, J):
        if (j1 + j2 + j3).denominator != 1:
            continue
        for m1, m2 in itertools.product(projections(j1), projections(j2)):
            m3 = -m1 - m2
            if abs(m3) <= j3:
                yield j1, j2, j3, m1, m2, m3


def test_against_exact_racah_all_j_up_to_5():
    worst = 0.0
    count = 0
    for args in all_3j_args(5):
        worst = max(worst, abs(wigner3j(*args) - racah_3j(*args)))
        count += 1
    assert count > 10_000
    assert worst < 1e-12


@pytest.mark.parametrize("args, expected", [
    ((1, 1, 0, 0, 0, 0), -1 / np.sqrt(3)),
    ((1, 1, 1, 1, -1, 0), 1 / np.sqrt(6)),
    ((0.5, 0.5, 1, 0.5, -0.5, 0), 1 / np.sqrt(6)),
    ((2, 1, 1, 0, 0, 0), np.sqrt(2 / 15)),
    ((3, 2, 1, 0, 0, 0), -np.sqrt(3 / 35)),
])
def test_tabulated_values(args, expected):
    assert wigner3j(*args) == pytest.approx(expected, abs=1e-15)


def test_sympy_spot_checks():
    from sympy import Rational, N
    from sympy.physics.wigner import wigner_3j
    rng = np.random.default_rng(7)
    args = list(all_3j_args(4))
    for i in rng.choice(len(args), 300, replace=False):
        a = args[i]
        ref = float(N(wigner_3j(*(Rational(x.numerator, x.denominator) for x in map(Fraction, a))), 30))
        assert wigner3j(*a) == pytest.approx(ref, abs=1e-14)


def test_selection_rules_give_zero():
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0  # triangle
    assert wigner3j(1, 1, 1, 1, 0, 0) == 0.0  # m sum
    assert wigner3j(1, 1, 1, 0, 0, 0) == 0.0  # odd J sum with all m = 0


@pytest.mark.parametrize("bad", [(-1, 1, 1, 0, 0, 0), (1, 1, 1, 2, -2, 0), (1, 0.5, 1, 0, 0, 0),
                                 (0.3, 1, 1, 0, 0, 0)])
def test_invalid_arguments_raise(bad):
    with pytest.raises(AngularMomentumError):
        wigner3j(*bad)


jm = st.integers(0, 8).flatmap(lambda t: st.tuples(st.just(t / 2), st.integers(0, t).map(lambda k: -t / 2 + k)))


@settings(max_examples=200, deadline=None)
@given(jm, jm, st.integers(0, 16))
def test_symmetries(a, b, t3):
    (j1, m1), (j2, m2) = a, b
    j3 = t3 / 2
    m3 = -m1 - m2
    if abs(m3) > j3 or (j3 - m3) % 1:
        return
    v = wigner3j(j1, j2, j3, m1, m2, m3)
    sgn = (-1) ** int(round(j1 + j2 + j3))
    assert wigner3j(j2, j3, j1, m2, m3, m1) == pytest.approx(v, abs=1e-14)  # cyclic
    assert wigner3j(j2, j1, j3, m2, m1, m3) == pytest.approx(sgn * v, abs=1e-14)  # odd permutation
    assert wigner3j(j1, j2, j3, -m1, -m2, -m3) == pytest.approx(sgn * v, abs=1e-14)


@pytest.mark.parametrize("j1, j2", [(1, 1), (1.5, 2), (2, 3), (0.5, 2.5)])
def test_orthogonality(j1, j2):
    # sum over m1, m2 of (2 j3 + 1) 3j * 3j = delta_{j3 j3'} delta_{m3 m3'}
    j3s = [abs(j1 - j2) + k for k in range(int(j1 + j2 - abs(j1 - j2)) + 1)]
    for j3, j3p in itertools.product(j3s, j3s):
        for m3 in projections(Fraction(j3).limit_denominator(2)):
            s = 0.0
            for m1 in projections(Fraction(j1).limit_denominator(2)):
                m2 = -m1 - m3
                if abs(m2) > j2 or abs(m3) > j3p:
                    continue
                s += wigner3j(j1, j2, j3, m1, m2, m3) * wigner3j(j1, j2, j3p, m1, m2, m3)
            assert (2 * j3 + 1) * s == pytest.approx(1.0 if j3 == j3p else 0.0, abs=1e-13)


# -- direction cosines against explicit Euler-angle quadrature -----------------------

def _wigner_small_d(j, mp, m, beta):
    # explicit Wigner formula
    from math import factorial
    out = 0.0
    for s in range(0, 2 * j + 1):
        a, b, c, d = j + m - s, s, mp - m + s, j - mp - s
        if min(a, b, c, d) < 0:
            continue
        out += ((-1) ** (mp - m + s) * np.cos(beta / 2) ** (2 * j + m - mp - 2 * s)
                * np.sin(beta / 2) ** (mp - m + 2 * s) / (factorial(a) * factorial(b) * factorial(c) * factorial(d)))
    return out * np.sqrt(factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m))


def _D(j, mp, m, angles):
    a, b, g = angles
    return np.exp(-1j * mp * a) * _wigner_small_d(j, mp, m, b) * np.exp(-1j * m * g)


def _rotation(angles):
    a, b, g = angles
    def Rz(t):
        return np.array([[np.cos(t), -np.sin(t), 0], [np.sin(t), np.cos(t), 0], [0, 0, 1]])
    def Ry(t):
        return np.array([[np.cos(t), 0, np.sin(t)], [0, 1, 0], [-np.sin(t), 0, np.cos(t)]])
    return Rz(a) @ Ry(b) @ Rz(g)


def _quadrature_element(bra, ket, space, body, n=(12, 10, 12)):
    """<bra| R_{space, body} |ket> with psi_JKM = sqrt((2J+1)/8pi^2) conj(D^J_MK)."""
    xs, wb = np.polynomial.legendre.leggauss(n[1])
    alphas = np.arange(n[0]) * 2 * np.pi / n[0]
    gammas = np.arange(n[2]) * 2 * np.pi / n[2]
    si = "xyz".index(space)
    bj = {"a": 2, "b": 0, "c": 1}[body]  # a along the top axis, b along x, c along y
    tot = 0j
    for a in alphas:
        for x, w in zip(xs, wb):
            for g in gammas:
                ang = (a, np.arccos(x), g)
                tot += w * _rotation(ang)[si, bj] * _D(bra.J, bra.M, bra.K, ang) * np.conj(
                    _D(ket.J, ket.M, ket.K, ang))
    vol = (2 * np.pi / n[0]) * (2 * np.pi / n[2])
    return tot * vol * np.sqrt((2 * bra.J + 1) * (2 * ket.J + 1)) / (8 * np.pi**2)


@pytest.mark.parametrize("space", "xyz")
@pytest.mark.parametrize("body", "abc")
def test_direction_cosines_match_quadrature(space, body):
    kets = [SymTopKet(J, K, M) for J in (0, 1, 2) for K in range(-J, J + 1) for M in range(-J, J + 1)]
    rng = np.random.default_rng(3)
    pairs = [(kets[i], kets[j]) for i, j in rng.integers(0, len(kets), (40, 2))]
    pairs += [(SymTopKet(1, 1, 0), SymTopKet(1, 0, 0)), (SymTopKet(2, 1, 1), SymTopKet(1, 0, 0))]
    for bra, ket in pairs:
        ref = _quadrature_element(bra, ket, space, body)
        assert direction_cosine(bra, ket, space, body) == pytest.approx(ref, abs=1e-10)


def test_factorization_into_m_and_k_parts():
    for Jb, Jk in [(1, 1), (2, 1), (1, 2), (3, 3), (3, 2)]:
        for m, k in itertools.product((-1, 0, 1), repeat=2):
            K = k_factor_matrix(Jb, Jk, k)
            for Mk, Kk in itertools.product(range(-Jk, Jk + 1), repeat=2):
                Mb, Kb = Mk + m, Kk + k
                if abs(Mb) > Jb or abs(Kb) > Jb:
                    continue
                full = spherical_direction_cosine(SymTopKet(Jb, Kb, Mb), SymTopKet(Jk, Kk, Mk), m, k)
                assert m_factor(Jb, Mb, Jk, Mk, m) * K[Kb + Jb, Kk + Jk] == pytest.approx(full, abs=1e-14)


@pytest.mark.parametrize("J", [1, 2, 3])
def test_direction_cosines_are_orthogonal_within_j_manifolds(J):
    # sum_F R_Fg R_Fg' = delta_gg' as an operator: sum over all intermediate J' (J-1..J+1)
    for g, gp in itertools.product("abc", repeat=2):
        acc = 0
        for Jm in range(max(0, J - 1), J + 2):
            for F in "xyz":
                A = direction_cosine_matrix(Jm, J, F, g)
                B = direction_cosine_matrix(Jm, J, F, gp)
                acc = acc + A.conj().T @ B
        expect = np.eye(acc.shape[0]) if g == gp else np.zeros_like(acc)
        assert np.allclose(acc, expect, atol=1e-12)


def test_matrix_with_fixed_m():
    full = direction_cosine_matrix(2, 1, "z", "a")
    fixed = direction_cosine_matrix(2, 1, "z", "a", M_bra=1, M_ket=1)
    # M outer: rows for M'=1 start at (1+2)*5, columns for M=1 at (1+1)*3
    assert np.allclose(fixed, full[15:20, 6:9])
