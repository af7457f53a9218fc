"""Tests for the closed-form kernels and ball integrals.

Reference values are either exact closed forms (Newton's theorem gives
several ball integrals in elementary terms) or independent brute-force
cubature; the two routes are kept separate from the implementation under
test.
"""

import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from greenpot import (
    KernelSpec,
    QuadratureError,
    ball_kernel_integral,
    disk_green_2d,
    free_green,
    green_constant,
    kernel_eval,
    riesz_params,
    volume_bound,
)

# closed forms: Gamma(d/2-1) / (2 pi^(d/2)) collapses for small d
EXACT_CONSTANTS = {
    3: 0.15915494309189535,  # 1 / (2 pi)
    4: 0.05066059182116889,  # 1 / (2 pi^2)
    5: 0.025330295910584444,  # 1 / (4 pi^2)
}


@pytest.mark.parametrize("d,expected", sorted(EXACT_CONSTANTS.items()))
def test_green_constant_small_dimensions(d, expected):
    assert green_constant(d) == pytest.approx(expected, rel=1e-14)


def test_green_constant_rejects_low_dimension():
    with pytest.raises(ValueError):
        green_constant(2)


def test_free_green_point_values():
    # distance 2 in d=3: C(3) / 2 = 1 / (4 pi)
    assert free_green(3, (0, 0, 0), (2, 0, 0)) == pytest.approx(0.07957747154594767, rel=1e-14)
    assert free_green(3, (1, 1, 1), (1, 1, 1)) == math.inf


@given(
    d=st.integers(min_value=3, max_value=5),
    x=st.lists(st.floats(-3, 3), min_size=5, max_size=5),
    y=st.lists(st.floats(-3, 3), min_size=5, max_size=5),
)
def test_free_green_symmetry_and_positivity(d, x, y):
    a, b = tuple(x[:d]), tuple(y[:d])
    g = free_green(d, a, b)
    assert g == free_green(d, b, a)
    assert g > 0


def test_free_green_scaling_law():
    # homogeneity of degree 2 - d
    for d in (3, 4, 5):
        x = np.array([0.3, -1.0, 0.7, 0.2, 0.1])[:d]
        y = np.array([1.1, 0.4, -0.2, 0.9, -0.5])[:d]
        lam = 1.7
        assert free_green(d, lam * x, lam * y) == pytest.approx(
            lam ** (2 - d) * free_green(d, x, y), rel=1e-12
        )


def _disk_green_complex(radius, x, y):
    """Independent route: complex cross-ratio form of the disk kernel."""
    zx = complex(x[0], x[1]) / radius
    zy = complex(y[0], y[1]) / radius
    return math.log(abs(1 - zx.conjugate() * zy) / abs(zx - zy)) / math.pi


def test_disk_green_matches_complex_form():
    cases = [
        (1.0, (0.2, 0.0), (-0.3, 0.1)),
        (2.0, (0.3, 0.4), (-0.5, 0.2)),
        (0.5, (0.1, -0.2), (0.05, 0.3)),
    ]
    for radius, x, y in cases:
        assert disk_green_2d(radius, x, y) == pytest.approx(
            _disk_green_complex(radius, x, y), rel=1e-12
        )


def test_disk_green_center_value():
    # at the center the kernel reduces to log(R/|y|)/pi
    assert disk_green_2d(1.0, (0, 0), (0.5, 0)) == pytest.approx(
        0.2206356001526516, rel=1e-14
    )
    assert disk_green_2d(1.0, (0.5, 0), (0, 0)) == pytest.approx(
        0.2206356001526516, rel=1e-14
    )


def test_disk_green_vanishes_at_boundary():
    val = disk_green_2d(1.0, (0.2, 0.0), (1 - 1e-9, 0.0))
    assert 0 < val < 1e-8


def test_disk_green_rejects_exterior_points():
    with pytest.raises(ValueError):
        disk_green_2d(1.0, (0.2, 0.0), (1.0, 0.0))
    with pytest.raises(ValueError):
        disk_green_2d(1.0, (1.5, 0.0), (0.2, 0.0))


@st.composite
def _disk_pairs(draw):
    def pt():
        r = draw(st.floats(0, 0.95))
        t = draw(st.floats(0, 2 * math.pi))
        return (r * math.cos(t), r * math.sin(t))

    x, y = pt(), pt()
    assume(math.dist(x, y) > 1e-6)
    return x, y


@given(_disk_pairs())
def test_disk_green_symmetric_and_positive(pair):
    x, y = pair
    g = disk_green_2d(1.0, x, y)
    assert g == pytest.approx(disk_green_2d(1.0, y, x), rel=1e-10)
    assert g > 0


@given(_disk_pairs())
def test_disk_green_monotone_in_radius(pair):
    x, y = pair
    assert disk_green_2d(1.0, x, y) < disk_green_2d(2.0, x, y)


def test_kernel_spec_validation():
    KernelSpec(d=3, base="free", transform="power", param=2.0)
    KernelSpec(d=2, base="disk", transform="exp", param=1.0, radius=1.0)
    with pytest.raises(ValueError):
        KernelSpec(d=2, base="free", transform="power", param=1.0)
    with pytest.raises(ValueError):
        KernelSpec(d=3, base="free", transform="power", param=0.5)
    with pytest.raises(ValueError):
        KernelSpec(d=3, base="free", transform="power", param=3.0)  # >= d/(d-2)
    with pytest.raises(ValueError):
        KernelSpec(d=3, base="free", transform="exp", param=1.0)
    with pytest.raises(ValueError):
        KernelSpec(d=2, base="disk", transform="exp", param=7.0, radius=1.0)  # >= 2 pi
    with pytest.raises(ValueError):
        KernelSpec(d=2, base="disk", transform="power", param=1.0)  # missing radius
    with pytest.raises(ValueError):
        KernelSpec(d=3, base="free", transform="power", param=1.0, radius=1.0)


def test_kernel_spec_json_round_trip():
    specs = [
        KernelSpec(d=3, base="free", transform="power", param=1.5),
        KernelSpec(d=2, base="disk", transform="exp", param=3.0, radius=2.0),
        KernelSpec(d=2, base="disk", transform="power", param=4.0, radius=1.0),
    ]
    for spec in specs:
        assert KernelSpec.from_json(spec.to_json()) == spec


def test_kernel_eval_applies_transform():
    spec = KernelSpec(d=3, base="free", transform="power", param=2.0)
    x, y = (0.0, 0.0, 0.0), (1.0, 1.0, 0.0)
    assert kernel_eval(spec, x, y) == pytest.approx(free_green(3, x, y) ** 2, rel=1e-14)
    spec2 = KernelSpec(d=2, base="disk", transform="exp", param=3.0, radius=1.0)
    x2, y2 = (0.2, 0.0), (-0.3, 0.1)
    assert kernel_eval(spec2, x2, y2) == pytest.approx(
        math.exp(3.0 * disk_green_2d(1.0, x2, y2)), rel=1e-14
    )


def test_riesz_params_closed_forms():
    p = riesz_params(3, 2.0)
    assert p.alpha == pytest.approx(1.0, rel=1e-14)
    assert p.coefficient == pytest.approx(math.sqrt(2) / 4, rel=1e-13)
    p = riesz_params(3, 1.0)
    assert p.alpha == pytest.approx(2.0, rel=1e-14)
    assert p.coefficient == pytest.approx(1.0, rel=1e-13)
    # Gamma factors cancel at beta = 1.5, d = 3: coefficient is 2^(-3/4)
    p = riesz_params(3, 1.5)
    assert p.alpha == pytest.approx(1.5, rel=1e-14)
    assert p.coefficient == pytest.approx(2.0 ** -0.75, rel=1e-13)


@given(d=st.integers(min_value=3, max_value=6), beta=st.floats(1.0, 1.4))
def test_riesz_params_in_valid_range(d, beta):
    p = riesz_params(d, beta)
    assert 0 < p.alpha <= 2
    assert p.coefficient > 0


def test_riesz_params_rejects_out_of_range():
    with pytest.raises(ValueError):
        riesz_params(3, 0.5)
    with pytest.raises(ValueError):
        riesz_params(3, 3.0)
    with pytest.raises(ValueError):
        riesz_params(2, 1.0)


def test_ball_integral_newton_exact_values():
    # Newton's theorem: the potential of a ball at an exterior point equals
    # volume / distance, so several integrals have elementary closed forms.
    spec = KernelSpec(d=3, base="free", transform="power", param=1.0)
    # centered: C(3) * 4 pi * R^2 / 2 = R^2
    assert ball_kernel_integral(spec, (0, 0, 0), (0, 0, 0), 1.0) == pytest.approx(1.0, rel=1e-10)
    assert ball_kernel_integral(spec, (0, 0, 0), (0, 0, 0), 0.8) == pytest.approx(0.64, rel=1e-10)
    # exterior source at distance 2: C(3) * vol(B) / 2 = 1/3
    assert ball_kernel_integral(spec, (0, 0, 0), (2, 0, 0), 1.0) == pytest.approx(
        1.0 / 3.0, rel=1e-10
    )


def test_ball_integral_squared_kernel_exact_value():
    # spherical-cap slicing gives the squared kernel in closed form:
    # (1 - (3/4) log 3) / (2 pi) for a unit ball at distance 2
    spec = KernelSpec(d=3, base="free", transform="power", param=2.0)
    assert ball_kernel_integral(spec, (0, 0, 0), (2, 0, 0), 1.0) == pytest.approx(
        0.02801776087962292, rel=1e-9
    )


def _brute_ball_integral(spec, x, center, r, m=60):
    """Midpoint cubature over the bounding box, for cross-checks only."""
    d = spec.d
    axes = [np.linspace(c - r, c + r, m, endpoint=False) + r / m for c in center]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([a.reshape(-1) for a in mesh], axis=1)
    inside = np.linalg.norm(pts - np.asarray(center), axis=1) < r
    vals = [kernel_eval(spec, x, p) for p in pts[inside]]
    return float(np.sum(vals)) * (2 * r / m) ** d


def test_ball_integral_matches_brute_cubature_free():
    spec = KernelSpec(d=3, base="free", transform="power", param=1.5)
    x, center, r = (0.0, 0.0, 0.0), (2.0, 0.0, 0.0), 1.0
    ref = _brute_ball_integral(spec, x, center, r, m=48)
    got = ball_kernel_integral(spec, x, center, r)
    assert got == pytest.approx(ref, rel=5e-3)


def test_ball_integral_matches_brute_cubature_disk():
    spec = KernelSpec(d=2, base="disk", transform="exp", param=3.0, radius=2.0)
    x, center, r = (0.1, 0.0), (0.5, 0.3), 0.6
    ref = _brute_ball_integral(spec, x, center, r, m=400)
    got = ball_kernel_integral(spec, x, center, r)
    assert got == pytest.approx(ref, rel=5e-3)


def test_ball_integral_disk_power_with_interior_singularity():
    spec = KernelSpec(d=2, base="disk", transform="power", param=2.0, radius=2.0)
    x = (0.2, 0.1)
    ref = _brute_ball_integral(spec, x, (0.2, 0.1), 0.5, m=600)
    got = ball_kernel_integral(spec, x, (0.2, 0.1), 0.5)
    assert got == pytest.approx(ref, rel=1e-2)


def test_ball_integral_centered_source_singular_but_integrable():
    spec = KernelSpec(d=3, base="free", transform="power", param=2.9)
    val = ball_kernel_integral(spec, (0, 0, 0), (0, 0, 0), 1.0)
    # closed form: C^beta * S(3) * R^p / p with p = 3 - 2.9
    c = green_constant(3)
    assert val == pytest.approx(c ** 2.9 * 4 * math.pi / 0.1, rel=1e-10)


def test_ball_integral_monotone_in_radius():
    spec = KernelSpec(d=3, base="free", transform="power", param=1.2)
    vals = [ball_kernel_integral(spec, (0, 0, 0), (2, 0, 0), r) for r in (0.3, 0.6, 1.0)]
    assert vals[0] < vals[1] < vals[2]


def test_ball_integral_validates_disk_geometry():
    spec = KernelSpec(d=2, base="disk", transform="power", param=1.0, radius=1.0)
    with pytest.raises(ValueError):
        ball_kernel_integral(spec, (0, 0), (0.8, 0), 0.5)  # ball pokes out
    with pytest.raises(ValueError):
        ball_kernel_integral(spec, (1.2, 0), (0, 0), 0.5)  # source outside


def test_volume_bound_closed_forms():
    assert volume_bound(3, 2.0, 1.0) == pytest.approx(1 / math.pi, rel=1e-13)
    assert volume_bound(3, 1.0, 1.0) == pytest.approx(1.0, rel=1e-13)


def test_volume_bound_dominates_ball_integrals():
    # any ball of the given diameter, any source in it
    spec = KernelSpec(d=3, base="free", transform="power", param=2.0)
    bound = volume_bound(3, 2.0, 2.0)
    for x in [(0, 0, 0), (0.5, 0, 0), (0.9, 0.3, 0)]:
        val = ball_kernel_integral(spec, x, (0, 0, 0), 1.0)
        assert val <= bound * (1 + 1e-9)


def test_volume_bound_rejects_out_of_range():
    with pytest.raises(ValueError):
        volume_bound(2, 1.0, 1.0)
    with pytest.raises(ValueError):
        volume_bound(3, 0.9, 1.0)
    with pytest.raises(ValueError):
        volume_bound(3, 1.0, -1.0)
