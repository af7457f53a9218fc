"""Continuum Green kernels and their entrywise transforms.

Free-space kernel of Brownian motion in dimension ``d >= 3``, the killed
kernel of a planar disk, pointwise power/exponential transforms, the
normalization constants of the equivalent Riesz representation, and
adaptive quadrature of kernel integrals over Euclidean balls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gamma

__all__ = [
    "KernelSpec",
    "RieszParams",
    "QuadratureError",
    "green_constant",
    "sphere_surface",
    "free_green",
    "disk_green_2d",
    "kernel_eval",
    "riesz_params",
    "ball_kernel_integral",
    "volume_bound",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def green_constant(d: int) -> float:
    """Normalization ``Gamma(d/2 - 1) / (2 pi^(d/2))`` of the free-space kernel."""
    if d < 3:
        raise ValueError("free-space kernel requires d >= 3")
    return gamma(d / 2.0 - 1.0) / (2.0 * math.pi ** (d / 2.0))


def sphere_surface(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    if d < 1:
        raise ValueError("d must be positive")
    return 2.0 * math.pi ** (d / 2.0) / gamma(d / 2.0)


def _as_point(x, d: int) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.shape != (d,):
        raise ValueError(f"expected a point of dimension {d}, got shape {p.shape}")
    return p


def free_green(d: int, x, y) -> float:
    """Free-space kernel ``C(d) |x - y|^(2-d)`` for ``d >= 3``.

    Returns ``inf`` on the diagonal.
    """
    px, py = _as_point(x, d), _as_point(y, d)
    r = float(np.linalg.norm(px - py))
    if r == 0.0:
        return math.inf
    return green_constant(d) * r ** (2 - d)


def disk_green_2d(radius: float, x, y) -> float:
    """Killed Brownian kernel of the open disk of given radius about 0.

    Uses the reflected-point formula; the pole at ``x = 0`` is replaced by
    its analytic limit ``(1/pi) log(radius / |y|)``.  Both arguments must
    lie strictly inside the disk.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    px, py = _as_point(x, 2), _as_point(y, 2)
    rx, ry = float(np.linalg.norm(px)), float(np.linalg.norm(py))
    if rx >= radius or ry >= radius:
        raise ValueError("both points must lie strictly inside the disk")
    if np.array_equal(px, py):
        return math.inf
    # exchange so the analytic x=0 limit also covers y=0
    if rx == 0.0:
        px, py, rx, ry = py, px, ry, rx
    if ry == 0.0:
        return math.log(radius / rx) / math.pi
    # |y| |x - y*| with y* = R^2 y / |y|^2, folded so tiny |y| cannot overflow
    scaled = ry * px - radius**2 * (py / ry)
    return (
        -math.log(float(np.linalg.norm(px - py)))
        + math.log(float(np.linalg.norm(scaled)))
        - math.log(radius)
    ) / math.pi


@dataclass(frozen=True)
class KernelSpec:
    """A base Green kernel together with an entrywise transform.

    Parameters
    ----------
    d : int
        Space dimension.  The free-space base requires ``d >= 3``, the
        disk base requires ``d == 2``.
    base : str
        ``"free"`` or ``"disk"``.
    transform : str
        ``"power"`` (exponent ``param >= 1``) or ``"exp"`` (rate
        ``param > 0``).  Exponential transforms are only admissible for
        the disk base with ``0 < param < 2*pi``; powers of the free-space
        base require ``param < d / (d - 2)``.
    param : float
        Transform parameter (the power, or the exponential rate).
    radius : float, optional
        Disk radius, required and positive for the disk base.
    """

    d: int
    base: str
    transform: str
    param: float
    radius: float | None = None

    def __post_init__(self):
        if self.base not in ("free", "disk"):
            raise ValueError(f"unknown base kernel {self.base!r}")
        if self.transform not in ("power", "exp"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.base == "free":
            if self.d < 3:
                raise ValueError("free-space base requires d >= 3")
            if self.radius is not None:
                raise ValueError("free-space base takes no radius")
        else:
            if self.d != 2:
                raise ValueError("disk base requires d == 2")
            if self.radius is None or self.radius <= 0:
                raise ValueError("disk base requires a positive radius")
        if self.transform == "power":
            if self.param < 1:
                raise ValueError("power transform requires param >= 1")
            if self.base == "free" and self.param >= self.d / (self.d - 2):
                raise ValueError("power transform of the free-space base requires param < d/(d-2)")
        else:
            if self.base != "disk":
                raise ValueError("exp transform is only defined for the disk base")
            if not 0 < self.param < 2 * math.pi:
                raise ValueError("exp transform requires 0 < param < 2*pi")

    def to_json(self) -> str:
        base = "free" if self.base == "free" else {"disk": self.radius}
        return json.dumps(
            {"d": self.d, "base": base, "transform": {self.transform: self.param}},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "KernelSpec":
        obj = json.loads(text)
        base = obj["base"]
        radius = None
        if isinstance(base, dict):
            (base, radius), = base.items()
        (transform, param), = obj["transform"].items()
        return cls(d=int(obj["d"]), base=base, transform=transform, param=float(param), radius=radius)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate the transformed kernel of `spec` at a pair of points."""
    if spec.base == "free":
        value = free_green(spec.d, x, y)
    else:
        value = disk_green_2d(spec.radius, x, y)
    if spec.transform == "power":
        return value**spec.param
    return math.exp(spec.param * value)


@dataclass(frozen=True)
class RieszParams:
    """Parameters of the Riesz representation of a free-space kernel power."""

    d: int
    beta: float
    alpha: float
    coefficient: float


def riesz_params(d: int, beta: float) -> RieszParams:
    """Riesz index and subordination coefficient for the beta-power kernel.

    The beta-th power of the free-space kernel in R^d is a constant
    multiple of the Riesz kernel of index ``alpha = d - beta (d - 2)``;
    the returned coefficient is the multiple in front of the expected
    occupation of the subordinated Brownian motion.
    """
    if d < 3:
        raise ValueError("requires d >= 3")
    if not 1 <= beta < d / (d - 2):
        raise ValueError("requires 1 <= beta < d/(d-2)")
    alpha = d - beta * (d - 2)
    coefficient = (
        green_constant(d) ** beta
        * gamma(alpha / 2.0)
        * 2 ** (alpha / 2.0)
        * math.pi ** (d / 2.0)
        / gamma((d - alpha) / 2.0)
    )
    return RieszParams(d=d, beta=beta, alpha=alpha, coefficient=coefficient)


def _chord(a: float, r: float, mu: float):
    """Entry/exit parameters of the ray ``t -> x + t w`` through a sphere.

    ``a`` is the distance from ``x`` to the center, ``r`` the sphere radius
    and ``mu`` the cosine of the angle between ``w`` and the outward
    direction ``x - center``.  Returns ``(t0, t1)`` with ``t0 <= t1``; the
    chord is empty when ``t1 <= 0``.
    """
    disc = r * r - a * a * (1.0 - mu * mu)
    if disc <= 0.0:
        return 0.0, 0.0
    root = math.sqrt(disc)
    return -a * mu - root, -a * mu + root


def _ball_power_integral(d: int, s: float, a: float, r: float, tol: float) -> float:
    """Integral of ``|x - y|^(-s)`` over a ball of radius r, |x - center| = a.

    Exact radial integration along rays from ``x`` absorbs the singularity;
    the remaining polar integral is smooth except for a kink where rays
    become tangent to the sphere.
    """
    p = d - s
    if p <= 0:
        raise ValueError("kernel power is not integrable over the ball")
    if a == 0.0:
        return sphere_surface(d) * r**p / p

    def polar(theta: float) -> float:
        t0, t1 = _chord(a, r, math.cos(theta))
        if t1 <= 0.0:
            return 0.0
        t0 = max(t0, 0.0)
        return (t1**p - t0**p) / p * math.sin(theta) ** (d - 2)

    pts = None
    if a > r:
        pts = [math.acos(max(-1.0, -math.sqrt(1.0 - (r / a) ** 2)))]
    val, err = integrate.quad(polar, 0.0, math.pi, points=pts, epsabs=1e-300, epsrel=tol, limit=200)
    val *= sphere_surface(d - 1)
    if err * sphere_surface(d - 1) > 10 * tol * max(abs(val), 1e-300):
        raise QuadratureError("polar quadrature did not converge")
    return val


def _disk_ball_integral(spec: KernelSpec, x: np.ndarray, center: np.ndarray, r: float, tol: float) -> float:
    """Planar quadrature of a transformed disk kernel over a disk B(center, r)."""
    a = float(np.linalg.norm(x - center))
    u = (x - center) / a if a > 0 else np.array([1.0, 0.0])
    # strongest radial blow-up at the source: log^beta is tamed by the
    # jacobian alone, exp(alpha g) ~ t^(-alpha/pi) needs a power substitution
    sing = spec.param / math.pi if spec.transform == "exp" else 0.0
    q = max(1, math.ceil(2.0 / (2.0 - sing)))

    def radial(theta: float) -> float:
        w = math.cos(theta) * u + math.sin(theta) * np.array([-u[1], u[0]])
        mu = float(np.dot(w, u))
        t0, t1 = _chord(a, r, mu)
        if t1 <= 0.0:
            return 0.0
        t0 = max(t0, 0.0)

        def f(v: float) -> float:
            t = t1 * v**q
            if t <= t0:
                return 0.0
            val = kernel_eval(spec, x + t * w, x) if t > 0 else 0.0
            return val * t * q * t1 * v ** (q - 1)

        lo = (t0 / t1) ** (1.0 / q) if t0 > 0 else 0.0
        val, _ = integrate.quad(f, lo, 1.0, epsabs=1e-14, epsrel=tol * 0.1, limit=200)
        return val

    val, err = integrate.quad(radial, 0.0, 2 * math.pi, epsabs=1e-300, epsrel=tol, limit=200)
    if err > 10 * tol * max(abs(val), 1e-300):
        raise QuadratureError("angular quadrature did not converge")
    return val


def ball_kernel_integral(spec: KernelSpec, x, center, r: float, tol: float = 1e-8) -> float:
    """Integral of the transformed kernel ``y -> k(x, y)`` over ``B(center, r)``.

    Parameters
    ----------
    spec : KernelSpec
        Kernel to integrate.  For the disk base the ball must lie inside
        the disk.
    x : array_like
        Source point; may lie inside, on, or outside the ball.
    center, r
        Ball center and radius, ``r > 0``.
    tol : float
        Relative tolerance of the quadrature.

    Returns
    -------
    float
    """
    if r <= 0:
        raise ValueError("ball radius must be positive")
    px, pc = _as_point(x, spec.d), _as_point(center, spec.d)
    if spec.base == "free":
        s = spec.param * (spec.d - 2)
        a = float(np.linalg.norm(px - pc))
        return green_constant(spec.d) ** spec.param * _ball_power_integral(spec.d, s, a, r, tol)
    if float(np.linalg.norm(pc)) + r >= spec.radius:
        raise ValueError("ball must lie inside the disk")
    if float(np.linalg.norm(px)) >= spec.radius:
        raise ValueError("source point must lie inside the disk")
    return _disk_ball_integral(spec, px, pc, r, tol)


def volume_bound(d: int, beta: float, diameter: float) -> float:
    """Closed-form bound on the beta-power kernel mass of a bounded set.

    Equals the integral of ``C(d)^beta |y|^(beta(2-d))`` over a ball whose
    radius is the diameter of the set:
    ``C(d)^beta S(d) R^(d - beta(d-2)) / (d - beta(d-2))``.
    """
    if d < 3:
        raise ValueError("requires d >= 3")
    if not 1 <= beta < d / (d - 2):
        raise ValueError("requires 1 <= beta < d/(d-2)")
    if diameter < 0:
        raise ValueError("diameter must be nonnegative")
    p = d - beta * (d - 2)
    return green_constant(d) ** beta * sphere_surface(d) * diameter**p / p
