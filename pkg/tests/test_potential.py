"""Tests for the potential-matrix classifier and entrywise transforms.

Hand-inverted 2x2 matrices give exact expectations; the killed-walk
matrices from the lattice module supply a family of true potentials for
the preservation properties.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenpot import (
    KilledGreenMatrix,
    LatticeSet,
    classify,
    cmp_inequality,
    hadamard_exp,
    hadamard_power,
    is_inverse_m_matrix,
    killed_green_matrix,
    random_potential,
    sample_cmp,
)

NOT_POTENTIAL = [[1.0, 2.0], [2.0, 1.0]]  # inverse has positive off-diagonal


def test_two_point_killed_matrix_is_potential():
    # inverse of [[16,4],[4,16]]/15 is [[1,-1/4],[-1/4,1]]
    lat = LatticeSet.from_points(2, [(0, 0), (1, 0)])
    u = killed_green_matrix(lat).entries
    report = is_inverse_m_matrix(u)
    assert report.is_potential is True
    assert report.nonsingular and not report.unreliable
    assert report.max_offdiag_of_inverse == pytest.approx(-0.25, rel=1e-12)
    assert report.min_row_sum_of_inverse == pytest.approx(0.75, rel=1e-12)


def test_swapped_dominance_is_not_potential():
    report = is_inverse_m_matrix(NOT_POTENTIAL)
    assert report.is_potential is False
    assert report.max_offdiag_of_inverse == pytest.approx(2 / 3, rel=1e-12)


def test_identity_and_diagonal_are_potentials():
    assert is_inverse_m_matrix(np.eye(4)).is_potential is True
    assert is_inverse_m_matrix(np.diag([2.0, 0.5, 1.5])).is_potential is True


def test_singular_matrix_reported_nonsingular_false():
    report = is_inverse_m_matrix(np.ones((3, 3)))
    assert report.nonsingular is False
    assert report.is_potential is False
    assert math.isnan(report.max_offdiag_of_inverse)


def test_nearly_singular_matrix_marked_unreliable():
    u = [[1.0, 1.0], [1.0, 1.0 + 1e-14]]
    report = is_inverse_m_matrix(u)
    assert report.unreliable is True
    assert report.is_potential is None
    assert report.condition > 1e12


def test_input_validation():
    with pytest.raises(ValueError):
        is_inverse_m_matrix([[1.0, -0.1], [0.2, 1.0]])  # negative entry
    with pytest.raises(ValueError):
        is_inverse_m_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        is_inverse_m_matrix(np.zeros((0, 0)))


def test_report_json_maps_nan_to_null():
    report = is_inverse_m_matrix(np.ones((3, 3)))
    obj = json.loads(report.to_json())
    assert obj["max_offdiag_of_inverse"] is None
    assert obj["is_potential"] is False


def test_cmp_functional_hand_value():
    # Uv = (1.2, 0.3), only the first coordinate exceeds 1
    assert cmp_inequality(NOT_POTENTIAL, (-0.2, 0.7)) == pytest.approx(-0.04, rel=1e-12)
    # nonnegative v against the identity can never violate
    assert cmp_inequality(np.eye(2), (0.5, 2.0)) == pytest.approx(1.0 * 2.0, rel=1e-12)


def test_sample_cmp_finds_violation_for_non_potential():
    value, witness = sample_cmp(NOT_POTENTIAL, trials=10_000, seed=7)
    assert value < -1e-3
    # the returned vector really is a certificate
    assert cmp_inequality(NOT_POTENTIAL, witness) == pytest.approx(value, rel=1e-12)
    # random directions alone suffice, without the adversarial candidates
    value2, _ = sample_cmp(NOT_POTENTIAL, trials=10_000, seed=7, include_adversarial=False)
    assert value2 < -1e-3


def test_sample_cmp_nonnegative_on_potentials():
    lat = LatticeSet.from_points(2, [(0, 0), (1, 0), (0, 1), (1, 1)])
    u = killed_green_matrix(lat).entries
    value, _ = sample_cmp(u, trials=5_000, seed=11)
    scale = float(np.max(np.abs(u)))
    assert value >= -1e-10 * scale


def test_sample_cmp_reproducible():
    v1, w1 = sample_cmp(NOT_POTENTIAL, trials=500, seed=3)
    v2, w2 = sample_cmp(NOT_POTENTIAL, trials=500, seed=3)
    assert v1 == v2
    assert np.array_equal(w1, w2)
    with pytest.raises(ValueError):
        sample_cmp(NOT_POTENTIAL, trials=0, seed=3)


def test_classify_attaches_sampling_fields():
    report = classify(NOT_POTENTIAL, trials=2_000, seed=5)
    assert report.is_potential is False
    assert report.cmp_inequality_min is not None and report.cmp_inequality_min < 0
    assert report.trials == 2_000 and report.seed == 5
    bare = classify(NOT_POTENTIAL)
    assert bare.cmp_inequality_min is None and bare.trials == 0


def test_hadamard_power_identity_and_values():
    u = np.array([[4.0, 1.0], [1.0, 4.0]])
    assert np.array_equal(hadamard_power(u, 1.0), u)
    assert np.array_equal(hadamard_power(u, 2.0), u * u)
    assert np.allclose(hadamard_power(u, 1.5), [[8.0, 1.0], [1.0, 8.0]])
    with pytest.raises(ValueError):
        hadamard_power(u, 0.5)


def test_hadamard_exp_values():
    u = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = hadamard_exp(u, 2.0)
    assert np.allclose(out, [[math.e**2, 1.0], [1.0, math.e**2]])
    with pytest.raises(ValueError):
        hadamard_exp(u, 0.0)
    with pytest.raises(ValueError):
        hadamard_exp(u, -1.0)


def test_hadamard_exp_of_diagonal_is_potential():
    # exp maps zero off-diagonals to ones; the result stays a potential
    # for positive diagonal entries
    for a, b in [(0.5, 0.5), (1.0, 2.0), (3.0, 0.1)]:
        out = hadamard_exp(np.diag([a, b]), 1.0)
        assert is_inverse_m_matrix(out).is_potential is True


@given(seed=st.integers(min_value=0, max_value=500))
@settings(max_examples=20, deadline=None)
def test_power_preserves_potentials_2d(seed):
    u = random_potential(2, (2, 8), seed).entries
    for beta in (1.0, 1.5, 2.0, 3.0):
        report = is_inverse_m_matrix(hadamard_power(u, beta))
        assert report.is_potential is True, f"beta={beta}"


@given(seed=st.integers(min_value=501, max_value=900))
@settings(max_examples=15, deadline=None)
def test_exp_preserves_potentials_2d(seed):
    u = random_potential(2, (2, 8), seed).entries
    for alpha in (0.1, 0.5, 1.0):
        report = is_inverse_m_matrix(hadamard_exp(u, alpha))
        assert report.is_potential is True, f"alpha={alpha}"


@given(c=st.floats(min_value=0.01, max_value=100.0), seed=st.integers(0, 200))
@settings(max_examples=20, deadline=None)
def test_potential_class_closed_under_positive_scaling(c, seed):
    u = random_potential(2, (2, 6), seed).entries
    assert is_inverse_m_matrix(c * u).is_potential is True


def test_random_potential_reproducible_and_in_range():
    a = random_potential(2, (3, 10), seed=42)
    b = random_potential(2, (3, 10), seed=42)
    assert isinstance(a, KilledGreenMatrix)
    assert np.array_equal(a.lattice.points, b.lattice.points)
    assert np.allclose(a.entries, b.entries, rtol=0, atol=0)
    assert 3 <= len(a.lattice) <= 10
    assert (0, 0) in a.lattice
    with pytest.raises(ValueError):
        random_potential(2, (5, 3), seed=1)


def test_random_potential_sets_are_connected():
    for seed in (1, 2, 3):
        lat = random_potential(3, (6, 12), seed).lattice
        pts = {tuple(p) for p in lat.points}
        seen = {next(iter(sorted(pts)))}
        frontier = list(seen)
        eye = np.eye(3, dtype=int)
        while frontier:
            p = frontier.pop()
            for e in np.vstack([eye, -eye]):
                q = tuple(np.add(p, e))
                if q in pts and q not in seen:
                    seen.add(q)
                    frontier.append(q)
        assert seen == pts
