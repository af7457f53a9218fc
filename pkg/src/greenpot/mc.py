"""Monte Carlo estimators: walk exits, subordinators, occupation integrals.

Walk routines simulate the simple random walk on the integer lattice and
estimate exit laws, visit counts, and the boundary term of the killed
Green decomposition.  Subordinator routines sample the one-sided stable
laws normalized to the Laplace exponent ``lambda^(alpha/2)``; the plain
Brownian case ``alpha = 2`` uses deterministic time increments.  The
Riesz occupation estimator runs Brownian motion at independent stable
time increments and accumulates a Riemann sum of indicator hits; its
truncation error carries a rigorous bound through the uniform density
cap ``(2 pi)^(-d/2) E[eta_t^(-d/2)]`` of the subordinated process.

Trials are processed in fixed-size blocks with per-block derived
generators and reduced in block order, so estimates are bit-identical
for a given (seed, stream) at any GREENPOT_THREADS setting.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .domains import GridSpec, grid_points, round_to_grid
from .kernels import riesz_params
from .lattice import LatticeSet, potential_kernel_2d, unit_steps, whole_space_green

__all__ = [
    "RngStream",
    "McEstimate",
    "StepBudgetError",
    "sample_exit",
    "exit_statistics",
    "estimate_boundary_term",
    "sample_half_stable",
    "sample_stable_increment",
    "estimate_riesz_potential",
    "riesz_tail_bound",
    "thread_count",
]

STEP_BUDGET = 10**8
TRIAL_CHUNK = 8192  # fixed so reductions are identical at any thread count


class StepBudgetError(RuntimeError):
    """A walk exceeded its step budget before exiting."""


def thread_count() -> int:
    """Worker cap from GREENPOT_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("GREENPOT_THREADS", "1")))
    except ValueError:
        return 1


def _map_blocks(worker, nblocks: int) -> list:
    workers = thread_count()
    if workers == 1 or nblocks == 1:
        return [worker(b) for b in range(nblocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(nblocks)))


def _block_sizes(trials: int):
    return [min(TRIAL_CHUNK, trials - b * TRIAL_CHUNK)
            for b in range((trials + TRIAL_CHUNK - 1) // TRIAL_CHUNK)]


@dataclass(frozen=True)
class RngStream:
    """Reproducible random source: (seed, stream) fixes every draw.

    Distinct stream indices give statistically independent generators
    through the seed-sequence spawning mechanism.
    """

    seed: int
    stream: int = 0
    algorithm: str = "pcg64"

    def __post_init__(self):
        if self.algorithm != "pcg64":
            raise ValueError(f"unsupported rng algorithm {self.algorithm!r}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> np.random.Generator:
        """Independent generator for a numbered block of trials."""
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream, index))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int
    tail_bound: float | None = None

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("an estimate needs at least 2 trials")

    def to_json(self) -> str:
        obj = {"mean": self.mean, "stderr": self.stderr,
               "trials": self.trials, "seed": self.seed}
        if self.tail_bound is not None:
            obj["tail_bound"] = self.tail_bound
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _estimate(total: float, total_sq: float, trials: int, seed: int,
              tail_bound=None) -> McEstimate:
    mean = total / trials
    var = max(0.0, (total_sq - trials * mean * mean) / (trials - 1))
    return McEstimate(mean=mean, stderr=math.sqrt(var / trials), trials=trials,
                      seed=seed, tail_bound=tail_bound)


def _as_generator(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


# ---------------------------------------------------------------- walks

class _WalkContext:
    """Packed-key membership tables shared by all trial blocks."""

    def __init__(self, lattice: LatticeSet):
        pts = lattice.points
        self.d = lattice.d
        self.lo = pts.min(axis=0) - 2
        self.width = int((pts.max(axis=0) - self.lo).max()) + 3
        raw = self._pack(pts)
        order = np.argsort(raw)
        self.keys = raw[order]
        self.to_lattice_index = order  # sorted-key slot -> lattice row
        self.steps = unit_steps(self.d)

    def _pack(self, points: np.ndarray) -> np.ndarray:
        shifted = points - self.lo
        keys = shifted[:, 0].astype(np.int64)
        for k in range(1, points.shape[1]):
            keys = keys * self.width + shifted[:, k]
        return keys

    def walk_block(self, start: np.ndarray, trials: int, gen: np.random.Generator,
                   step_budget: int, counts: np.ndarray | None = None) -> np.ndarray:
        """Walk `trials` paths from `start` until each exits; returns exits.

        When `counts` (trials x set size) is given, tallies per-trial
        visit counts, start included.
        """
        pos = np.tile(start, (trials, 1))
        exits = np.empty((trials, self.d), dtype=np.int64)
        active = np.arange(trials)
        if counts is not None:
            first = int(np.searchsorted(self.keys, self._pack(start[None, :])[0]))
            counts[:, self.to_lattice_index[first]] += 1
        spent = 0
        while len(active):
            if spent >= step_budget:
                raise StepBudgetError(f"{len(active)} walks still active at the step budget")
            pos = pos + self.steps[gen.integers(0, len(self.steps), size=len(active))]
            key = self._pack(pos)
            idx = np.searchsorted(self.keys, key)
            inside = (idx < len(self.keys)) & (self.keys[np.minimum(idx, len(self.keys) - 1)] == key)
            if not inside.all():
                out = ~inside
                exits[active[out]] = pos[out]
                active, pos, idx = active[inside], pos[inside], idx[inside]
            if counts is not None and len(active):
                np.add.at(counts, (active, self.to_lattice_index[idx]), 1)
            spent += 1
        return exits


def sample_exit(lattice: LatticeSet, start, rng: RngStream,
                step_budget: int = STEP_BUDGET):
    """Run one simple walk from `start` until it leaves the set.

    Returns ``(exit_point, visits)`` where `visits` counts time spent at
    each lattice point (ordered as ``lattice.points``, start included).
    """
    if start not in lattice:
        raise ValueError("start must belong to the lattice set")
    ctx = _WalkContext(lattice)
    counts = np.zeros((1, len(lattice)), dtype=np.int64)
    exits = ctx.walk_block(np.asarray(start, dtype=np.int64), 1, _as_generator(rng),
                           step_budget, counts)
    return tuple(int(c) for c in exits[0]), counts[0]


def exit_statistics(lattice: LatticeSet, start, trials: int, rng: RngStream,
                    step_budget: int = STEP_BUDGET):
    """Mean visit counts with standard errors, plus the empirical exit law.

    Returns ``(mean_visits, stderr_visits, exit_law)``; arrays align with
    ``lattice.points``; the exit law maps integer exit points to
    relative frequencies.
    """
    if start not in lattice:
        raise ValueError("start must belong to the lattice set")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    ctx = _WalkContext(lattice)
    start_arr = np.asarray(start, dtype=np.int64)
    sizes = _block_sizes(trials)

    def worker(b):
        counts = np.zeros((sizes[b], len(lattice)), dtype=np.int64)
        exits = ctx.walk_block(start_arr, sizes[b], rng.child(b), step_budget, counts)
        return (counts.sum(axis=0).astype(float),
                (counts.astype(float) ** 2).sum(axis=0), exits)

    total = np.zeros(len(lattice))
    total_sq = np.zeros(len(lattice))
    exit_counts: dict = {}
    for part_sum, part_sq, exits in _map_blocks(worker, len(sizes)):
        total += part_sum
        total_sq += part_sq
        for row in exits:
            key = tuple(int(c) for c in row)
            exit_counts[key] = exit_counts.get(key, 0) + 1
    mean = total / trials
    var = np.maximum(0.0, (total_sq - trials * mean**2) / (trials - 1))
    return mean, np.sqrt(var / trials), {k: v / trials for k, v in sorted(exit_counts.items())}


def _green_at_differences(d: int, diffs: np.ndarray) -> np.ndarray:
    uniq, inverse = np.unique(diffs, axis=0, return_inverse=True)
    if d == 2:
        vals = np.array([potential_kernel_2d(row) for row in uniq])
    else:
        vals = np.array([whole_space_green(d, row) for row in uniq])
    return vals[inverse]


def estimate_boundary_term(domain, grid: GridSpec, x, y, trials: int, rng: RngStream,
                           step_budget: int = STEP_BUDGET) -> McEstimate:
    """Walk-exit estimate of the boundary term in the killed-kernel split.

    For ``d >= 3`` this is the mean of the scaled whole-space kernel at
    (exit, y(n)), which subtracted from the scaled free kernel gives the
    killed value.  In the plane the compensated-kernel combination
    ``(a(exit - y(n)) - a(x(n) - y(n))) / 2`` is itself the estimate of
    the killed disk kernel.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    lattice = grid_points(domain, grid)
    if len(lattice) == 0:
        raise ValueError("domain grid is empty at this resolution")
    u = round_to_grid(x, grid)
    v = round_to_grid(y, grid)
    if u not in lattice or v not in lattice:
        raise ValueError("x and y must round to interior grid points")
    if np.array_equal(u, v):
        raise ValueError("x and y round to the same grid point")
    d = grid.d
    scale = grid.n ** (d / 2.0 - 1.0) / d ** (d / 2.0)
    a_uv = potential_kernel_2d(u - v) if d == 2 else None
    ctx = _WalkContext(lattice)
    sizes = _block_sizes(trials)

    def worker(b):
        exits = ctx.walk_block(u, sizes[b], rng.child(b), step_budget)
        if d == 2:
            vals = 0.5 * (_green_at_differences(2, np.abs(exits - v)) - a_uv)
        else:
            vals = scale * _green_at_differences(d, np.abs(exits - v))
        return float(vals.sum()), float((vals**2).sum())

    parts = _map_blocks(worker, len(sizes))
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    return _estimate(total, total_sq, trials, rng.seed)


# --------------------------------------------------------- subordinators

def sample_half_stable(t: float, rng, size=None):
    """Passage-time draw of the normalized 1/2-stable subordinator.

    ``eta_t = t^2 / (2 Z^2)`` with Z standard normal; the Laplace
    transform is ``exp(-t sqrt(lambda))``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    gen = _as_generator(rng)
    z = gen.standard_normal(size)
    while np.any(z == 0.0):  # probability-zero guard
        z = np.where(z == 0.0, gen.standard_normal(size), z)
    return t**2 / (2.0 * z**2)


def _kanter(rho: float, gen: np.random.Generator, size):
    theta = gen.uniform(0.0, math.pi, size)
    while np.any(theta == 0.0):
        theta = np.where(theta == 0.0, gen.uniform(0.0, math.pi, size), theta)
    w = gen.exponential(1.0, size)
    a = (np.sin(rho * theta) ** rho * np.sin((1.0 - rho) * theta) ** (1.0 - rho)
         / np.sin(theta)) ** (1.0 / (1.0 - rho))
    return (a / w) ** ((1.0 - rho) / rho)


def sample_stable_increment(alpha: float, dt: float, rng, size=None):
    """Increment of the alpha/2-stable subordinator over time `dt`.

    Exponential-uniform (Kanter) draw of the positive stable law with
    Laplace exponent ``lambda^(alpha/2)``, scaled by ``dt^(2/alpha)``.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return dt ** (2.0 / alpha) * _kanter(alpha / 2.0, _as_generator(rng), size)


# ------------------------------------------------------ Riesz potential

def riesz_tail_bound(d: int, beta: float, radius: float, horizon: float) -> float:
    """Truncation bound D * integral_T^inf P(X_t in ball) dt.

    Uses the uniform density cap of the subordinated process, so the
    bound holds for every start point and ball position.
    """
    params = riesz_params(d, beta)
    alpha = params.alpha
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    vol = math.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0) * radius**d
    inv_moment = gamma(d / alpha) / ((alpha / 2.0) * gamma(d / 2.0))
    time_integral = (alpha / (d - alpha)) * horizon ** (-(d - alpha) / alpha)
    return params.coefficient * vol * (2.0 * math.pi) ** (-d / 2.0) * inv_moment * time_integral


def estimate_riesz_potential(d: int, beta: float, indicator, x, time_step: float,
                             horizon: float, trials: int, rng: RngStream,
                             tail_tolerance: float | None = None) -> McEstimate:
    """Occupation-time estimate of the power kernel potential at `x`.

    Simulates Brownian motion at the random times of an independent
    alpha/2-stable subordinator (deterministic times when beta = 1),
    forms the Riemann sum ``D * time_step * sum_k F(X_k)`` up to the
    horizon, and reports mean, stderr, and the rigorous tail bound.
    """
    params = riesz_params(d, beta)
    if time_step <= 0 or horizon < time_step:
        raise ValueError("need 0 < time_step <= horizon")
    if trials < 2:
        raise ValueError("need at least 2 trials")
    nsteps = int(round(horizon / time_step))
    bound = riesz_tail_bound(d, beta, float(indicator.radius), nsteps * time_step)
    if tail_tolerance is not None and bound > tail_tolerance:
        raise ValueError(f"horizon too small: tail bound {bound:.3g} exceeds "
                         f"{tail_tolerance:.3g}")
    x_arr = np.asarray(x, dtype=float)
    sizes = _block_sizes(trials)

    def worker(b):
        gen = rng.child(b)
        shape = (sizes[b], nsteps)
        if params.alpha == 2.0:
            eta = np.full(shape, time_step)
        else:
            eta = sample_stable_increment(params.alpha, time_step, gen, shape)
        moves = gen.standard_normal(shape + (d,)) * np.sqrt(eta)[..., None]
        paths = np.cumsum(moves, axis=1) + x_arr
        hits = np.asarray(indicator(paths.reshape(-1, d)), dtype=float).reshape(shape)
        vals = params.coefficient * time_step * hits.sum(axis=1)
        return float(vals.sum()), float((vals**2).sum())

    parts = _map_blocks(worker, len(sizes))
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    return _estimate(total, total_sq, trials, rng.seed, tail_bound=bound)
