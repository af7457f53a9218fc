"""Green functions of the simple random walk on Z^d.

Whole-space values for ``d >= 3`` and the planar potential kernel are
computed from the continuous-time representation

    g(0, x) = int_0^inf prod_j e^(-t/d) I_{x_j}(t/d) dt,

which is the lattice Fourier integral with the angular variables reduced
to modified Bessel functions.  The substitution ``t = A/u^2`` turns the
algebraic tail into a smooth integrand, so adaptive quadrature reaches
full double precision.  Killed Green matrices on finite index sets are
obtained by direct linear solves against the one-step transition matrix.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, sparse
from scipy.linalg import solve
from scipy.sparse.linalg import splu
from scipy.special import ive

from .kernels import green_constant

__all__ = [
    "LatticeSet",
    "KilledGreenMatrix",
    "whole_space_green",
    "potential_kernel_2d",
    "potential_kernel_constant",
    "decay_constant",
    "killed_green_matrix",
    "killed_green_via_kernel",
    "exit_distribution",
    "EXACT_RANGE",
]

logger = logging.getLogger(__name__)

# lattice vectors with sup-norm beyond this use the continuum asymptote
EXACT_RANGE = 16

# additive constant of the planar potential-kernel asymptote
POTENTIAL_KERNEL_CONSTANT = (2.0 * np.euler_gamma + math.log(8.0)) / math.pi


def potential_kernel_constant() -> float:
    """Limit of ``a(x) - (2/pi) log|x|`` for the planar walk."""
    return POTENTIAL_KERNEL_CONSTANT


def _lex_sorted(points: np.ndarray) -> np.ndarray:
    order = np.lexsort(tuple(points[:, k] for k in range(points.shape[1] - 1, -1, -1)))
    return points[order]


@dataclass(frozen=True)
class LatticeSet:
    """A finite subset of Z^d with lexicographically ordered points."""

    d: int
    points: np.ndarray
    _index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise ValueError(f"points must have shape (m, {self.d})")
        pts = _lex_sorted(pts)
        index = {tuple(p): i for i, p in enumerate(pts)}
        if len(index) != len(pts):
            raise ValueError("duplicate lattice points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_points(cls, d: int, points) -> "LatticeSet":
        arr = np.asarray(list(points), dtype=np.int64).reshape(-1, d)
        return cls(d=d, points=arr)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, point) -> bool:
        return tuple(int(c) for c in point) in self._index

    def index_of(self, point) -> int:
        key = tuple(int(c) for c in point)
        if key not in self._index:
            raise KeyError(f"{key} is not in the lattice set")
        return self._index[key]

    def to_json(self) -> str:
        return json.dumps(
            {"d": self.d, "points": self.points.tolist()},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "LatticeSet":
        obj = json.loads(text)
        return cls.from_points(int(obj["d"]), obj["points"])


_STEPS_CACHE: dict[int, np.ndarray] = {}


def unit_steps(d: int) -> np.ndarray:
    """The 2d signed unit vectors of Z^d."""
    if d not in _STEPS_CACHE:
        steps = np.zeros((2 * d, d), dtype=np.int64)
        for j in range(d):
            steps[2 * j, j] = 1
            steps[2 * j + 1, j] = -1
        _STEPS_CACHE[d] = steps
    return _STEPS_CACHE[d]


# ---------------------------------------------------------------------------
# whole-space values


def _bessel_product(ns, z):
    out = ive(ns[0], z)
    for n in ns[1:]:
        out = out * ive(n, z)
    return out


def _time_integral(f, peak: float) -> float:
    """Integrate ``f`` over (0, inf) with an exact algebraic-tail substitution."""
    cut = max(30.0, 4.0 * peak)
    pts = [peak] if 0.0 < peak < cut else None
    head, _ = integrate.quad(f, 0.0, cut, points=pts, epsabs=1e-13, epsrel=1e-11, limit=300)
    tail, _ = integrate.quad(
        lambda u: f(cut / (u * u)) * 2.0 * cut / u**3,
        0.0,
        1.0,
        epsabs=1e-13,
        epsrel=1e-11,
        limit=300,
    )
    return head + tail


_GREEN_CACHE: dict[tuple, float] = {}


def _green_exact(d: int, key: tuple) -> float:
    if key not in _GREEN_CACHE:
        ns = np.asarray(key, dtype=float)
        peak = float(np.dot(ns, ns))
        _GREEN_CACHE[key] = _time_integral(lambda t: float(np.prod(ive(ns, t / d))), peak)
    return _GREEN_CACHE[key]


def _canonical(x) -> tuple:
    arr = np.abs(np.asarray(x, dtype=np.int64))
    return tuple(sorted(int(c) for c in arr))


def whole_space_green(d: int, x, exact_range: int = EXACT_RANGE) -> float:
    """Expected visits to ``x`` by the walk started at 0, for ``d >= 3``.

    Values with ``|x|_inf <= exact_range`` come from the Bessel integral
    (cached, accurate to well beyond 8 significant digits); beyond that
    the asymptote ``d C(d) |x|^(2-d)`` is used.

    Parameters
    ----------
    d : int
        Dimension, at least 3.
    x : array_like of int
        Lattice point.
    exact_range : int
        Sup-norm radius of the exactly evaluated cache.

    Returns
    -------
    float
    """
    if d < 3:
        raise ValueError("whole-space Green function requires d >= 3 (transience)")
    key = _canonical(x)
    if len(key) != d:
        raise ValueError(f"expected a lattice point of dimension {d}")
    if key[-1] > exact_range:
        r = math.sqrt(sum(c * c for c in key))
        return d * green_constant(d) * r ** (2 - d)
    return _green_exact(d, key)


_POTENTIAL_CACHE: dict[tuple, float] = {}

# beyond this sup-norm radius the planar kernel uses its log asymptote
POTENTIAL_EXACT_RANGE = 256


def potential_kernel_2d(x, exact_range: int = POTENTIAL_EXACT_RANGE) -> float:
    """Potential kernel ``a(x)`` of the planar simple random walk.

    ``a(0) = 0``; elsewhere computed from the compensated Bessel integral
    ``int_0^inf (e^-t I_0(t/2)^2 - e^-t I_{x_1}(t/2) I_{x_2}(t/2)) dt``.
    Points with ``|x|_inf > exact_range`` use the asymptote
    ``(2/pi) log|x| + (2 gamma + log 8)/pi``.
    """
    key = _canonical(x)
    if len(key) != 2:
        raise ValueError("potential kernel is defined on Z^2")
    if key == (0, 0):
        return 0.0
    if key[-1] > exact_range:
        r = math.sqrt(key[0] ** 2 + key[1] ** 2)
        return (2.0 / math.pi) * math.log(r) + POTENTIAL_KERNEL_CONSTANT
    if key not in _POTENTIAL_CACHE:
        ns = np.asarray(key, dtype=float)

        def f(t):
            z = t / 2.0
            return float(ive(0.0, z) * ive(0.0, z) - ive(ns[0], z) * ive(ns[1], z))

        _POTENTIAL_CACHE[key] = _time_integral(f, float(np.dot(ns, ns)))
    return _POTENTIAL_CACHE[key]


_DECAY_CACHE: dict[int, float] = {}


def decay_constant(d: int, scan_range: int = 8) -> float:
    """Uniform constant with ``g(0, x) <= c |x|^(2-d)`` for ``x != 0``.

    Estimated once as the maximum of ``g(0, x) |x|^(d-2)`` over the scanned
    cube and frozen for the session; the maximum sits at the unit vectors
    and the scanned ratios decrease toward ``d C(d)``, so the scan radius
    is not critical.
    """
    if d not in _DECAY_CACHE:
        best = 0.0
        for key in _scan_keys(d, scan_range):
            r2 = sum(c * c for c in key)
            if r2 == 0:
                continue
            best = max(best, _green_exact(d, key) * r2 ** ((d - 2) / 2.0))
        _DECAY_CACHE[d] = best
        logger.info("decay constant for d=%d frozen at %.12g (scan range %d)", d, best, scan_range)
    return _DECAY_CACHE[d]


def _scan_keys(d: int, top: int):
    seen = set()
    for idx in np.ndindex(*([top + 1] * d)):
        seen.add(tuple(sorted(idx)))
    return sorted(seen)


# ---------------------------------------------------------------------------
# killed Green matrices


@dataclass(frozen=True)
class KilledGreenMatrix:
    """Green matrix of the walk killed outside a finite set.

    ``entries[i, j]`` is the expected number of visits to ``lattice.points[j]``
    before leaving the set, starting from ``lattice.points[i]``.
    """

    lattice: LatticeSet
    entries: np.ndarray

    @property
    def d(self) -> int:
        return self.lattice.d

    def entry(self, x, y) -> float:
        return float(self.entries[self.lattice.index_of(x), self.lattice.index_of(y)])

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "points": self.lattice.points.tolist(),
                "entries": [float(v) for v in self.entries.reshape(-1)],
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "KilledGreenMatrix":
        obj = json.loads(text)
        lattice = LatticeSet.from_points(int(obj["d"]), obj["points"])
        m = len(lattice)
        entries = np.asarray(obj["entries"], dtype=float).reshape(m, m)
        return cls(lattice=lattice, entries=entries)


def _transition_coo(lattice: LatticeSet):
    pts = lattice.points
    d = lattice.d
    rows, cols = [], []
    for step in unit_steps(d):
        for i, p in enumerate(pts):
            j = lattice._index.get(tuple(p + step))
            if j is not None:
                rows.append(i)
                cols.append(j)
    return np.asarray(rows), np.asarray(cols)


DENSE_LIMIT = 5000
SYMMETRY_TOL = 1e-10


def killed_green_matrix(lattice: LatticeSet, dense_limit: int = DENSE_LIMIT) -> KilledGreenMatrix:
    """Solve ``(I - P) G = I`` for the walk restricted to `lattice`.

    ``P`` keeps probability ``1/(2d)`` on nearest-neighbor pairs inside the
    set; mass stepping outside is killed.  Dense Cholesky is used up to
    `dense_limit` points and a sparse LU factorization beyond.

    Returns
    -------
    KilledGreenMatrix
        Symmetric matrix with unit-dominated diagonal (every diagonal
        entry is at least 1).
    """
    m = len(lattice)
    if m == 0:
        raise ValueError("lattice set is empty")
    rows, cols = _transition_coo(lattice)
    q = 1.0 / (2 * lattice.d)
    if m <= dense_limit:
        a = np.eye(m)
        if len(rows):
            np.subtract.at(a, (rows, cols), q)
        g = solve(a, np.eye(m), assume_a="pos")
    else:
        data = np.concatenate([np.ones(m), -q * np.ones(len(rows))])
        r = np.concatenate([np.arange(m), rows])
        c = np.concatenate([np.arange(m), cols])
        lu = splu(sparse.csc_matrix((data, (r, c)), shape=(m, m)))
        g = np.empty((m, m))
        block = 512
        for lo in range(0, m, block):
            hi = min(lo + block, m)
            rhs = np.zeros((m, hi - lo))
            rhs[np.arange(lo, hi), np.arange(hi - lo)] = 1.0
            g[:, lo:hi] = lu.solve(rhs)
    skew = np.max(np.abs(g - g.T))
    scale = np.max(np.abs(g))
    if skew > SYMMETRY_TOL * scale:
        raise RuntimeError(f"killed Green solve asymmetric beyond tolerance: {skew / scale:.3e}")
    g = (g + g.T) / 2.0
    return KilledGreenMatrix(lattice=lattice, entries=g)


def outer_boundary(lattice: LatticeSet) -> LatticeSet:
    """Points outside the set adjacent to it (possible exit positions)."""
    seen = set()
    for p in lattice.points:
        for step in unit_steps(lattice.d):
            q = tuple(p + step)
            if q not in lattice._index:
                seen.add(q)
    return LatticeSet.from_points(lattice.d, sorted(seen))


def exit_distribution(lattice: LatticeSet, start, green: KilledGreenMatrix | None = None) -> dict:
    """Exact law of the first point visited outside the set.

    Computed from the killed Green row: the chance of exiting at a
    boundary point is the visit count of each inner neighbor times the
    single-step probability.
    """
    if green is None:
        green = killed_green_matrix(lattice)
    row = green.entries[lattice.index_of(start)]
    q = 1.0 / (2 * lattice.d)
    law: dict[tuple, float] = {}
    for i, p in enumerate(lattice.points):
        for step in unit_steps(lattice.d):
            out = tuple(p + step)
            if out not in lattice._index:
                law[out] = law.get(out, 0.0) + row[i] * q
    return law


def killed_green_via_kernel(lattice: LatticeSet, x, y, exit_law: dict) -> float:
    """Killed Green value from whole-space data and an exit law.

    For ``d >= 3`` this is ``g(x - y) - sum_z g(z - y) exit_law[z]``; in
    the plane the potential kernel takes the role of ``g`` with the
    opposite sign: ``sum_z a(z - y) exit_law[z] - a(x - y)``.

    Parameters
    ----------
    lattice : LatticeSet
        Index set the walk is killed outside of.
    x, y : array_like of int
        Points of the set.
    exit_law : dict
        Map from boundary points to probabilities (exact or estimated);
        must be a sub-probability vector.
    """
    if x not in lattice or y not in lattice:
        raise ValueError("x and y must belong to the lattice set")
    total = 0.0
    for prob in exit_law.values():
        if prob < 0:
            raise ValueError("exit law has a negative weight")
        total += prob
    if total > 1 + 1e-9:
        raise ValueError("exit law weights exceed 1")
    px = np.asarray(x, dtype=np.int64)
    py = np.asarray(y, dtype=np.int64)
    d = lattice.d
    if d >= 3:
        acc = whole_space_green(d, px - py)
        for z, prob in exit_law.items():
            acc -= prob * whole_space_green(d, np.asarray(z, dtype=np.int64) - py)
        return acc
    acc = -potential_kernel_2d(px - py)
    for z, prob in exit_law.items():
        acc += prob * potential_kernel_2d(np.asarray(z, dtype=np.int64) - py)
    return acc
