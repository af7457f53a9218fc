"""Discretized Green operators on grid-approximated domains.

The operator matrix over a grid set carries entries

    h^d * (scale * g_E(z_i, z_j))^beta    with scale = n^(d/2-1) / d^(d/2)

(or ``h^d exp(alpha * scale * g_E)`` in the plane), where ``g_E`` is the
killed Green matrix of the integer grid set and ``h = sqrt(d/n)``.  With
the whole-space Green function in place of ``g_E`` the same weights give
the free-space operator.  Applying the matrix row at the rounded grid
point to shifted samples of ``F`` discretizes the continuum kernel
integral; the grid functional ``sum_x (op F(x) - 1)^+ F(x) h^d`` is
nonnegative because the entry matrix is a symmetric potential.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .domains import Ball, GridSpec, exterior_grid, grid_points, round_to_grid
from .kernels import KernelSpec, ball_kernel_integral, sphere_surface
from .lattice import (
    EXACT_RANGE,
    LatticeSet,
    decay_constant,
    killed_green_matrix,
    whole_space_green,
)

__all__ = [
    "DiscreteOperator",
    "ConvergenceReport",
    "BallIndicator",
    "ResourceLimitError",
    "assemble",
    "apply_operator",
    "cmp_functional",
    "converge",
    "equicontinuity_cap",
    "oscillation",
]

MAX_POINTS = 20000


class ResourceLimitError(RuntimeError):
    """A request exceeded the configured storage limits."""


@dataclass(frozen=True)
class BallIndicator:
    """Indicator function of an open Euclidean ball."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def __call__(self, pts):
        arr = np.atleast_2d(np.asarray(pts, dtype=float))
        delta = arr - np.asarray(self.center)
        out = (np.einsum("ij,ij->i", delta, delta) < self.radius**2).astype(float)
        return out if np.asarray(pts).ndim == 2 else float(out[0])


def _check_transform(transform, d: int, free: bool):
    kind, param = transform
    if free and d < 3:
        raise ValueError("free-space operators require d >= 3")
    if kind == "power":
        if param < 1:
            raise ValueError("power transform requires param >= 1")
        if free and param >= d / (d - 2):
            raise ValueError("free-space operators require power < d/(d-2)")
    elif kind == "exp":
        if d != 2:
            raise ValueError("exp transform is only defined in the plane")
        if not 0 < param < 2 * math.pi:
            raise ValueError("exp transform requires 0 < param < 2*pi")
    else:
        raise ValueError(f"unknown transform {kind!r}")
    return kind, float(param)


@dataclass(frozen=True)
class DiscreteOperator:
    """Grid Green operator: index set, entry matrix, and provenance."""

    grid: GridSpec
    lattice: LatticeSet
    matrix: np.ndarray
    transform: tuple
    domain: object = None  # None marks the free-space operator

    @property
    def d(self) -> int:
        return self.grid.d


def _green_scale(d: int, n: int) -> float:
    return n ** (d / 2.0 - 1.0) / d ** (d / 2.0)


def _free_entries(lattice: LatticeSet, exact_range: int) -> np.ndarray:
    pts = lattice.points
    span = int(np.max(pts, axis=0).max() - np.min(pts, axis=0).min()) if len(pts) else 0
    d = lattice.d
    table = np.empty((span + 1,) * d)
    for idx in np.ndindex(*table.shape):
        table[idx] = whole_space_green(d, idx, exact_range=exact_range)
    diffs = [np.abs(pts[:, None, k] - pts[None, :, k]) for k in range(d)]
    return table[tuple(diffs)]


def assemble(
    grid: GridSpec,
    transform,
    domain=None,
    free_region=None,
    include_points=(),
    max_points: int = MAX_POINTS,
    exact_range: int = EXACT_RANGE,
) -> DiscreteOperator:
    """Build the operator matrix over a domain grid or a free-space window.

    Parameters
    ----------
    grid : GridSpec
    transform : tuple
        ``("power", beta)`` with ``beta >= 1`` or ``("exp", alpha)`` with
        ``0 < alpha < 2*pi`` (plane only).  Free-space powers must stay
        below ``d/(d-2)``.
    domain : optional
        Killed operator over ``grid_points(domain, grid)``; must produce a
        nonempty set.
    free_region : optional
        Free-space operator (``d >= 3``) over the exterior grid of the
        region, which covers every support point of functions living in
        the region even after sub-spacing shifts.
    include_points : iterable, optional
        Extra continuum points whose rounded grid points join the index
        set of a free-space operator, so rows at query points away from
        the support exist.
    max_points : int
        Dense-storage cap; larger index sets raise ResourceLimitError.
    """
    if (domain is None) == (free_region is None):
        raise ValueError("exactly one of domain and free_region is required")
    free = domain is None
    kind, param = _check_transform(transform, grid.d, free)
    if free:
        if grid.d < 3:
            raise ValueError("free-space operators require d >= 3")
        lattice = exterior_grid(free_region, grid)
        extra = [round_to_grid(p, grid) for p in include_points]
        extra = [z for z in extra if z not in lattice]
        if extra:
            lattice = LatticeSet.from_points(grid.d, np.vstack([lattice.points, extra]))
    else:
        if include_points:
            raise ValueError("include_points applies to free-space operators only")
        lattice = grid_points(domain, grid)
        if len(lattice) == 0:
            raise ValueError("domain grid is empty at this resolution")
    if len(lattice) > max_points:
        raise ResourceLimitError(f"{len(lattice)} grid points exceed the cap of {max_points}")
    if free:
        green = _free_entries(lattice, exact_range)
    else:
        green = killed_green_matrix(lattice).entries
    scaled = green * _green_scale(grid.d, grid.n)
    weight = grid.h**grid.d
    if kind == "power":
        entries = weight * scaled**param
    else:
        entries = weight * np.exp(param * scaled)
    return DiscreteOperator(grid=grid, lattice=lattice, matrix=entries,
                            transform=(kind, param), domain=domain)


def _eval_on_points(f, pts: np.ndarray) -> np.ndarray:
    if isinstance(f, np.ndarray):
        raise TypeError("expected a callable; got an array")
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape == (len(pts),):
            return vals
    except Exception:
        pass
    return np.asarray([float(f(p)) for p in pts], dtype=float)


def apply_operator(op: DiscreteOperator, f, x) -> float:
    """Operator value at ``x``: the matrix row at the rounded grid point
    applied to ``F`` sampled on the grid shifted by the rounding offset."""
    z = round_to_grid(x, op.grid)
    if z not in op.lattice:
        raise ValueError("x rounds to a grid point outside the operator's index set")
    h = op.grid.h
    shift = np.asarray(x, dtype=float) - h * z
    samples = _eval_on_points(f, op.lattice.points * h + shift)
    return float(op.matrix[op.lattice.index_of(z)] @ samples)


def _grid_values(op: DiscreteOperator, f) -> np.ndarray:
    if isinstance(f, np.ndarray):
        if f.shape != (len(op.lattice),):
            raise ValueError("grid function has the wrong length")
        return np.asarray(f, dtype=float)
    return _eval_on_points(f, op.lattice.points * op.grid.h)


def cmp_functional(op: DiscreteOperator, f) -> float:
    """Discrete CMP functional ``h^d sum_x (opF(x) - 1)^+ F(x)``.

    `f` may be a callable on continuum points or a vector over the grid.
    Nonnegative whenever the entry matrix is a potential, which holds for
    every operator assembled from true walk Green data.
    """
    values = _grid_values(op, f)
    excess = np.clip(op.matrix @ values - 1.0, 0.0, None)
    return float((excess @ values) * op.grid.h**op.grid.d)


def equicontinuity_cap(d: int, beta: float, support_radius: float) -> float:
    """Uniform modulus constant of the free-space operator family.

    Numerically computed version of the diagonal-plus-tail bound: the
    diagonal contributes ``g(0,0)^beta d^((d/2)(1-beta))``; the rest is
    ``c3`` times the largest Riesz mass of the support inflated by two
    sup-norm lattice cells, bounded here through an enclosing ball.
    """
    if d < 3:
        raise ValueError("requires d >= 3")
    if not 1 <= beta < d / (d - 2):
        raise ValueError("requires 1 <= beta < d/(d-2)")
    g00 = whole_space_green(d, (0,) * d)
    diag = g00**beta * d ** ((d / 2.0) * (1.0 - beta))
    c3 = (decay_constant(d) / d) ** beta * (1.0 + math.sqrt(d) / 2.0) ** (beta * (d - 2))
    rho = support_radius + 2.0 * d  # ball around the sup-norm dilation
    s = beta * (d - 2)
    sup_mass = sphere_surface(d) * rho ** (d - s) / (d - s)
    return diag + c3 * sup_mass


def oscillation(f, center, radius: float, h: float, delta: float, d: int) -> float:
    """Oscillation of ``F`` at scale `delta`, sampled on a 4x finer grid.

    Max-minus-min over sliding sup-norm windows of width ``2 delta`` on a
    grid of spacing ``h/4`` covering the ball around `center`.
    """
    fine = h / 4.0
    half = int(math.ceil((radius + delta) / fine)) + 1
    axes = [np.arange(-half, half + 1) * fine + c for c in np.asarray(center, dtype=float)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    vals = _eval_on_points(f, pts).reshape(mesh[0].shape)
    k = max(1, int(round(delta / fine)))
    hi = ndimage.maximum_filter(vals, size=2 * k + 1, mode="nearest")
    lo = ndimage.minimum_filter(vals, size=2 * k + 1, mode="nearest")
    return float(np.max(hi - lo))


@dataclass(frozen=True)
class ConvergenceReport:
    """Discrete values along a refinement sequence against a reference."""

    d: int
    levels: tuple  # grid sizes n
    values: tuple
    reference: float
    provenance: str

    def __post_init__(self):
        if len(self.levels) != len(self.values) or len(self.levels) < 1:
            raise ValueError("levels and values must align and be nonempty")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must increase strictly")

    @property
    def abs_errors(self) -> tuple:
        return tuple(abs(v - self.reference) for v in self.values)

    @property
    def rel_errors(self) -> tuple:
        ref = abs(self.reference)
        return tuple(e / ref for e in self.abs_errors)

    @property
    def rates(self) -> tuple:
        """Log-ratio of successive errors per log-refinement (None on first level)."""
        errs = self.abs_errors
        out = [None]
        for k in range(1, len(errs)):
            if errs[k] > 0 and errs[k - 1] > 0:
                out.append(math.log(errs[k - 1] / errs[k]) / math.log(self.levels[k] / self.levels[k - 1]))
            else:
                out.append(None)
        return tuple(out)

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "levels": list(self.levels),
                "values": list(self.values),
                "reference": self.reference,
                "provenance": self.provenance,
                "abs_errors": list(self.abs_errors),
                "rel_errors": list(self.rel_errors),
                "rates": list(self.rates),
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def csv_rows(self):
        header = ["n", "value", "reference", "abs_err", "rel_err", "rate"]
        rows = []
        for n, v, a, r, q in zip(self.levels, self.values, self.abs_errors, self.rel_errors, self.rates):
            rows.append([n, v, self.reference, a, r, "" if q is None else q])
        return header, rows


def _disk_point_value(domain, transform, x, y, grid: GridSpec) -> float:
    lattice = grid_points(domain, grid)
    if len(lattice) == 0:
        raise ValueError("domain grid is empty at this resolution")
    zx, zy = round_to_grid(x, grid), round_to_grid(y, grid)
    if zx not in lattice or zy not in lattice:
        raise ValueError("a target point rounds outside the domain grid")
    green = killed_green_matrix(lattice)
    value = green.entry(zx, zy) * _green_scale(grid.d, grid.n)
    kind, param = transform
    return value**param if kind == "power" else math.exp(param * value)


def converge(domain, transform, x, target, levels: int, base: int) -> ConvergenceReport:
    """Refinement study of a discrete kernel value or operator value.

    Parameters
    ----------
    domain
        Continuum domain for killed quantities, or ``None`` for the
        free-space operator.
    transform : tuple
        ``("power", beta)`` or ``("exp", alpha)``.
    x : array_like
        Evaluation point.
    target
        A point ``y`` for pointwise kernel convergence on a planar disk,
        or a `BallIndicator` for operator values; the continuum reference
        is the transformed disk kernel or the ball kernel integral.
    levels : int
        Number of grids ``n = base * 9^k``, ``k = 0 .. levels-1``.
    base : int
        Coarsest grid size.
    """
    if levels < 1 or base < 1:
        raise ValueError("levels and base must be positive")
    kind, param = transform
    pointwise = not isinstance(target, BallIndicator)
    if pointwise:
        if not isinstance(domain, Ball) or domain.d != 2 or any(domain.center):
            raise ValueError("pointwise kernel convergence needs a planar disk about 0")
        spec = KernelSpec(d=2, base="disk", transform=kind, param=param, radius=domain.radius)
        reference = kernels.kernel_eval(spec, x, target)
        provenance = "disk kernel, reflected-point formula"
        d = 2
    else:
        if domain is None:
            d = len(np.asarray(x, dtype=float))
            spec = KernelSpec(d=d, base="free", transform=kind, param=param)
        else:
            if not isinstance(domain, Ball) or domain.d != 2 or any(domain.center):
                raise ValueError("operator references exist for free space or a planar disk about 0")
            d = 2
            spec = KernelSpec(d=2, base="disk", transform=kind, param=param, radius=domain.radius)
        reference = ball_kernel_integral(spec, x, target.center, target.radius)
        provenance = "ball kernel integral, adaptive quadrature"
    ns, values = [], []
    for k in range(levels):
        grid = GridSpec(d=d, n=base * 9**k)
        if pointwise:
            values.append(_disk_point_value(domain, transform, x, target, grid))
        elif domain is not None:
            op = assemble(grid, transform, domain=domain)
            values.append(apply_operator(op, target, x))
        else:
            region = Ball(center=target.center, radius=target.radius)
            op = assemble(grid, transform, free_region=region, include_points=[x])
            values.append(apply_operator(op, target, x))
        ns.append(grid.n)
    return ConvergenceReport(d=d, levels=tuple(ns), values=tuple(values),
                             reference=reference, provenance=provenance)
