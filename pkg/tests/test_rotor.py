import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import asym_top_j1, asym_top_j2
from rotcool.config import bundled_molecules
from rotcool.rotor import (MoleculeSpec, RotorError, build_rotor_block, canonical_labels,
                           dipole_element, find_level, polarization_vector, reduced_elements,
                           transition_table)

MOLS = bundled_molecules()
PD = MOLS["propanediol"]
GLU = MOLS["glutamine"]


def energy(spec, label):
    return find_level(spec, label)[0].energy


@pytest.mark.parametrize("key", sorted(MOLS))
def test_j1_closed_forms_exact(key):
    s = MOLS[key]
    got = {lev.label: lev.energy for lev in build_rotor_block(s, 1).levels}
    assert got == asym_top_j1(s.A, s.B, s.C)  # integer constants: bit-exact
    assert build_rotor_block(s, 0).levels[0].energy == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 2e4), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_j1_j2_closed_forms_random_constants(A, fb, fc):
    B = A * fb
    C = B * fc
    s = MoleculeSpec("t", 10.0, A, B, C)
    for J, ref in ((1, asym_top_j1(A, B, C)), (2, asym_top_j2(A, B, C))):
        got = {lev.label: lev.energy for lev in build_rotor_block(s, J).levels}
        for lab, e in ref.items():
            assert got[lab] == pytest.approx(e, rel=1e-13, abs=1e-12 * A)


def test_labels_follow_energy_order_and_limits():
    assert canonical_labels(2) == [(0, 2), (1, 2), (1, 1), (2, 1), (2, 0)]
    for J in range(6):
        e = [lev.energy for lev in build_rotor_block(PD, J).levels]
        assert np.all(np.diff(e) >= 0)
    # prolate limit: pairs with equal Ka collapse
    s = MoleculeSpec("prolate", 1, 5000.0, 1000.0, 1000.0 - 1e-6)
    lv = {lev.label: lev.energy for lev in build_rotor_block(s, 3).levels}
    assert lv["3_31"] == pytest.approx(lv["3_30"], abs=1e-4)
    assert lv["3_30"] == pytest.approx(3 * 4 * 1000 + 9 * 4000, rel=1e-9)


def test_block_trace_and_eigenvectors():
    for J in range(5):
        b = build_rotor_block(PD, J)
        assert sum(lev.energy for lev in b.levels) == pytest.approx(np.trace(b.hamiltonian), rel=1e-12)
        V = b.eigenvectors
        assert np.allclose(V.T @ V, np.eye(2 * J + 1), atol=1e-12)
        assert np.allclose(V.T @ b.hamiltonian @ V, np.diag([lev.energy for lev in b.levels]), atol=1e-8)


def test_resonant_splittings_frozen():
    assert energy(PD, "3_30") - energy(PD, "3_31") == pytest.approx(8.817471643080353, rel=1e-12)
    assert energy(GLU, "2_20") - energy(GLU, "2_21") == pytest.approx(3.3782724076663726, rel=1e-12)
    assert energy(GLU, "3_21") - energy(GLU, "3_22") == pytest.approx(16.851413707056054, rel=1e-12)


@pytest.mark.parametrize("label", ["0_00", "1_10", "2_21", "3_31", "4_22"])
def test_dipole_sum_rule(label):
    # sum_f |<f|mu_z|i>|^2 averaged over M equals |mu|^2 / 3
    lev, _ = find_level(PD, label)
    tot = 0.0
    for J in range(max(0, lev.J - 1), lev.J + 2):
        for other in build_rotor_block(PD, J).levels:
            for M in range(-lev.J, lev.J + 1):
                for Mp in range(-J, J + 1):
                    tot += abs(dipole_element(PD, (other, Mp), (lev, M), "z")) ** 2
    assert tot / (2 * lev.J + 1) == pytest.approx(sum(mu**2 for mu in PD.dipole()) / 3, rel=1e-12)


def test_selection_rules():
    assert dipole_element(PD, ("3_30", 0), ("3_31", 0), "z") == 0  # Delta J = 0, M = 0
    assert dipole_element(PD, ("3_30", 2), ("3_31", 0), "sigma+") == 0
    assert dipole_element(PD, ("3_30", 1), ("3_31", 0), "z") == 0
    assert dipole_element(PD, ("3_30", 1), ("3_31", 0), "sigma+") != 0
    assert dipole_element(PD, ("3_30", 1), ("3_31", 0), "sigma-") == 0
    assert reduced_elements(PD, "3_30", "1_10") == 0
    # the a-dipole links 3_31 and 3_30; pure b/c components do not
    only_b = MoleculeSpec("b", 77, PD.A, PD.B, PD.C, mu_b=1.0)
    assert abs(reduced_elements(only_b, "3_30", "3_31")) < 1e-12
    assert abs(reduced_elements(PD, "3_30", "3_31")) > 0.1


def test_m_linear_law_for_q_branch():
    base = dipole_element(PD, ("3_30", 1), ("3_31", 1), "z")
    for M in range(-3, 4):
        assert dipole_element(PD, ("3_30", M), ("3_31", M), "z") == pytest.approx(M * base, rel=1e-13)


def test_hermiticity():
    for pol in ("x", "y", "z"):
        a = dipole_element(PD, ("2_21", 1), ("3_30", 0), pol)
        b = dipole_element(PD, ("3_30", 0), ("2_21", 1), pol)
        assert a == pytest.approx(np.conj(b), abs=1e-14)


def test_transition_table():
    tab = transition_table(PD, 3)
    freqs = [t.frequency for t in tab]
    assert freqs == sorted(freqs)
    low = tab[0]
    assert (low.lower.label, low.upper.label) == ("3_31", "3_30")
    assert low.active("z") and low.strength["z"] == pytest.approx(
        abs(dipole_element(PD, ("3_30", 3), ("3_31", 3), "z")) ** 2, rel=1e-12)


def test_per_debye_when_untabulated():
    s = MOLS["chdbri"]
    assert not s.has_dipole and s.dipole() == (1.0, 0.0, 0.0)
    assert PD.dipole(per_debye=True) == (1.0, 0.0, 0.0)


@pytest.mark.parametrize("bad", ["3_40", "x", "2_3", (1, 2, 0), "-1_00"])
def test_unknown_levels(bad):
    with pytest.raises(RotorError):
        find_level(PD, bad)


def test_bad_spec_and_polarization():
    with pytest.raises(RotorError):
        MoleculeSpec("bad", 10, 1.0, 2.0, 0.5)
    with pytest.raises(RotorError):
        MoleculeSpec("bad", 0, 3.0, 2.0, 1.0)
    with pytest.raises(RotorError):
        polarization_vector("diagonal")
    with pytest.raises(RotorError):
        dipole_element(PD, ("1_10", 2), ("1_01", 0), "z")
