"""Potential-matrix tests and entrywise (Hadamard) transforms.

A nonnegative nonsingular matrix is a potential when its inverse is a
row diagonally dominant M-matrix: off-diagonal entries nonpositive and
row sums nonnegative.  The complete-maximum-principle functional
``sum_j ((Uv)_j - 1)^+ v_j`` is nonnegative for every ``v`` exactly on
potentials (for symmetric ``U``), which gives a second, inversion-free
route to the same class.  Entrywise powers ``U^(beta)`` with
``beta >= 1`` and entrywise exponentials ``exp(alpha U)`` with
``alpha > 0`` stay inside the class.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .lattice import LatticeSet, KilledGreenMatrix, killed_green_matrix, unit_steps

__all__ = [
    "PotentialReport",
    "is_inverse_m_matrix",
    "cmp_inequality",
    "sample_cmp",
    "classify",
    "hadamard_power",
    "hadamard_exp",
    "random_potential",
]

DEFAULT_TOL = 1e-8
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class PotentialReport:
    """Outcome of the inverse M-matrix test, optionally with CMP sampling.

    ``is_potential`` is ``None`` when the inversion was too ill-conditioned
    to decide (``unreliable`` set).  ``cmp_inequality_min`` is ``None``
    unless CMP sampling ran.
    """

    nonsingular: bool
    max_offdiag_of_inverse: float
    min_row_sum_of_inverse: float
    is_potential: bool | None
    unreliable: bool = False
    condition: float = math.nan
    cmp_inequality_min: float | None = None
    trials: int = 0
    seed: int | None = None

    def to_json(self) -> str:
        obj = asdict(self)
        for k, v in obj.items():
            if isinstance(v, float) and math.isnan(v):
                obj[k] = None
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _check_square_nonneg(u) -> np.ndarray:
    a = np.asarray(u, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError("expected a nonempty square matrix")
    if np.any(a < 0):
        raise ValueError("matrix must be entrywise nonnegative")
    return a


def is_inverse_m_matrix(u, tol: float = DEFAULT_TOL) -> PotentialReport:
    """Test whether a nonnegative matrix is a nonsingular potential.

    Inverts ``u`` and checks that all off-diagonal entries of the inverse
    are ``<= tol * scale`` and all row sums are ``>= -tol * scale``, where
    ``scale`` is the largest magnitude in the inverse.  Condition numbers
    beyond 1e12 mark the report unreliable instead of deciding.
    """
    a = _check_square_nonneg(u)
    try:
        inv = np.linalg.inv(a)
        cond = float(np.linalg.cond(a))
    except np.linalg.LinAlgError:
        return PotentialReport(
            nonsingular=False,
            max_offdiag_of_inverse=math.nan,
            min_row_sum_of_inverse=math.nan,
            is_potential=False,
        )
    if not math.isfinite(cond) or cond > CONDITION_LIMIT:
        return PotentialReport(
            nonsingular=cond < math.inf,
            max_offdiag_of_inverse=math.nan,
            min_row_sum_of_inverse=math.nan,
            is_potential=None,
            unreliable=True,
            condition=cond,
        )
    scale = float(np.max(np.abs(inv)))
    mask = ~np.eye(a.shape[0], dtype=bool)
    max_off = float(np.max(inv[mask])) if a.shape[0] > 1 else 0.0
    min_row = float(np.min(inv.sum(axis=1)))
    ok = max_off <= tol * scale and min_row >= -tol * scale
    return PotentialReport(
        nonsingular=True,
        max_offdiag_of_inverse=max_off,
        min_row_sum_of_inverse=min_row,
        is_potential=bool(ok),
        condition=cond,
    )


def cmp_inequality(u, v) -> float:
    """Complete-maximum-principle functional ``sum_j ((Uv)_j - 1)^+ v_j``."""
    a = np.asarray(u, dtype=float)
    w = np.asarray(v, dtype=float)
    excess = np.clip(a @ w - 1.0, 0.0, None)
    return float(excess @ w)


def _adversarial(u: np.ndarray) -> np.ndarray:
    """Sign vectors and scaled inverse rows, the natural CMP violators."""
    m = u.shape[0]
    cands = [np.eye(m), -np.eye(m)]
    try:
        inv = np.linalg.inv(u)
    except np.linalg.LinAlgError:
        inv = None
    if inv is not None:
        for c in (0.5, 1.0, 1.5, 2.0):
            cands.append(c * inv)
            cands.append(-c * inv)
    return np.vstack(cands)


def sample_cmp(u, trials: int, seed: int, include_adversarial: bool = True):
    """Minimize the CMP functional over random and adversarial directions.

    Draws `trials` standard-normal vectors (plus signed indicator vectors
    and scaled rows of the inverse when available) and returns the pair
    ``(min_value, argmin_vector)``.
    """
    a = _check_square_nonneg(u)
    if trials < 1:
        raise ValueError("trials must be positive")
    m = a.shape[0]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    vs = rng.standard_normal((trials, m))
    if include_adversarial:
        vs = np.vstack([vs, _adversarial(a)])
    excess = np.clip(vs @ a.T - 1.0, 0.0, None)
    values = np.einsum("ij,ij->i", excess, vs)
    k = int(np.argmin(values))
    return float(values[k]), vs[k].copy()


def classify(u, trials: int = 0, seed: int = 0, tol: float = DEFAULT_TOL) -> PotentialReport:
    """Inverse M-matrix test plus optional CMP sampling in one report."""
    report = is_inverse_m_matrix(u, tol=tol)
    if trials <= 0:
        return report
    value, _ = sample_cmp(u, trials=trials, seed=seed)
    return PotentialReport(
        nonsingular=report.nonsingular,
        max_offdiag_of_inverse=report.max_offdiag_of_inverse,
        min_row_sum_of_inverse=report.min_row_sum_of_inverse,
        is_potential=report.is_potential,
        unreliable=report.unreliable,
        condition=report.condition,
        cmp_inequality_min=value,
        trials=trials,
        seed=seed,
    )


def hadamard_power(u, beta: float) -> np.ndarray:
    """Entrywise power ``u ** beta`` for ``beta >= 1``."""
    if beta < 1:
        raise ValueError("entrywise powers below 1 are not potential-preserving")
    return _check_square_nonneg(u) ** beta


def hadamard_exp(u, alpha: float) -> np.ndarray:
    """Entrywise exponential ``exp(alpha * u)`` for ``alpha > 0``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return np.exp(alpha * _check_square_nonneg(u))


def random_potential(d: int, size_range: tuple[int, int], seed: int) -> KilledGreenMatrix:
    """Killed Green matrix of a random connected lattice set.

    The set is grown by collecting the distinct points of a simple random
    walk started at the origin until the target size is reached, so it is
    connected by construction.
    """
    lo, hi = size_range
    if not 1 <= lo <= hi:
        raise ValueError("size_range must satisfy 1 <= lo <= hi")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    size = int(rng.integers(lo, hi + 1))
    steps = unit_steps(d)
    pos = np.zeros(d, dtype=np.int64)
    points = {tuple(pos)}
    while len(points) < size:
        pos = pos + steps[rng.integers(0, 2 * d)]
        points.add(tuple(pos))
    return killed_green_matrix(LatticeSet.from_points(d, sorted(points)))
