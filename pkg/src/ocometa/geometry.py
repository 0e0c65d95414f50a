"""Convex action sets with closed-form Euclidean projections.

Three shapes are supported (box, ball, probability simplex) plus the
homothetic shrink ``(1 - alpha/r) K + (alpha/r) c`` of any of them.  Every
domain knows an interior point ``c``, a radius ``r`` such that the ball
``B_r(c)`` intersected with the affine hull lies inside the set, its
diameter, and an orthonormal basis of the direction space of its affine hull.

Projections accept a single point of shape ``(d,)`` or a batch ``(n, d)``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any, Mapping

import numpy as np

MEMBERSHIP_TOL = 1e-9

# Points this close to the set are returned unchanged by ``project``.  This is
# what makes projection exactly idempotent for shapes whose projection formula
# involves rounding (ball rescaling, simplex thresholding, shrink maps).
_SNAP = 1e-12


class DomainError(ValueError):
    """Raised for malformed domain descriptions or invalid shrink parameters."""


def _as_points(x, d):
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (d,) or arr.ndim > 2:
        raise DomainError(f"expected points of dimension {d}, got shape {arr.shape}")
    return arr


class ConvexDomain(ABC):
    """A compact convex set ``K`` in ``R^d``.

    Attributes
    ----------
    ambient_dim : int
    interior_center : ndarray
        The point ``c``.
    interior_radius : float
        ``r > 0`` with ``B_r(c) ∩ aff(K) ⊆ K``.
    diameter : float
    hull_basis : ndarray of shape (k, d)
        Orthonormal rows spanning ``aff(K) - x``.
    """

    ambient_dim: int
    interior_center: np.ndarray
    interior_radius: float
    diameter: float
    hull_basis: np.ndarray

    @property
    def hull_dim(self) -> int:
        return self.hull_basis.shape[0]

    @abstractmethod
    def _project(self, x: np.ndarray) -> np.ndarray:
        """Projection of a batch ``(n, d)``; no snapping."""

    @abstractmethod
    def _inside(self, x: np.ndarray, slack: float) -> np.ndarray:
        """Row-wise membership test of a batch with an absolute slack."""

    @abstractmethod
    def linear_minimizer(self, g) -> np.ndarray:
        """``argmin_{y in K} <g, y>`` for a vector or a batch of vectors."""

    @abstractmethod
    def farthest_distance(self, p, ord: int = 2) -> float:
        """Upper bound on ``max_{y in K} ||y - p||_ord`` (exact for ``ord=2``)."""

    def _project_point(self, x: np.ndarray) -> np.ndarray:
        return self._project(x[None])[0]

    def _inside_point(self, x: np.ndarray, slack: float) -> bool:
        return bool(self._inside(x[None], slack)[0])

    def project(self, x) -> np.ndarray:
        """Euclidean projection onto the set."""
        arr = _as_points(x, self.ambient_dim)
        if arr.ndim == 1:
            return arr if self._inside_point(arr, _SNAP) else self._project_point(arr)
        return np.where(self._inside(arr, _SNAP)[:, None], arr, self._project(arr))

    def contains(self, x, tol: float = MEMBERSHIP_TOL):
        """True iff ``||x - project(x)|| <= tol`` (row-wise for batches)."""
        if tol < 0:
            raise DomainError("tol must be non-negative")
        arr = _as_points(x, self.ambient_dim)
        diff = arr - self.project(arr)
        if arr.ndim == 1:
            return math.sqrt(float(diff @ diff)) <= tol
        return np.linalg.norm(diff, axis=-1) <= tol

    def shrink(self, alpha: float) -> "ShrunkDomain":
        return ShrunkDomain(self, alpha)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Points of ``K`` drawn by projecting a Gaussian cloud around ``c``.

        Not uniform; meant for property checks that need a spread of members
        including boundary points.
        """
        n = 1 if size is None else size
        coords = rng.normal(scale=self.diameter / 2, size=(n, self.hull_dim))
        pts = self.project(self.interior_center + coords @ self.hull_basis)
        return pts if size is not None else pts[0]

    def max_norm(self) -> float:
        return self.farthest_distance(np.zeros(self.ambient_dim))


class Box(ConvexDomain):
    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box: lo and hi must be vectors of equal length")
        if not np.all(lo < hi):
            raise DomainError("box: every coordinate needs lo < hi")
        self.lo, self.hi = lo, hi
        self.ambient_dim = lo.size
        self.interior_center = (lo + hi) / 2
        self.interior_radius = float(np.min(hi - lo) / 2)
        self.diameter = float(np.linalg.norm(hi - lo))
        self.hull_basis = np.eye(self.ambient_dim)

    def project(self, x) -> np.ndarray:
        # clipping is exactly idempotent, no snapping needed
        arr = _as_points(x, self.ambient_dim)
        return np.clip(arr, self.lo, self.hi)

    def _project(self, x):
        return np.clip(x, self.lo, self.hi)

    def _inside_point(self, x, slack):
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def _inside(self, x, slack):
        return np.all((x >= self.lo - slack) & (x <= self.hi + slack), axis=-1)

    def linear_minimizer(self, g):
        g = np.asarray(g, dtype=float)
        return np.where(g > 0, self.lo, np.where(g < 0, self.hi, self.interior_center))

    def farthest_distance(self, p, ord=2):
        p = np.asarray(p, dtype=float)
        corner = np.where(np.abs(p - self.lo) > np.abs(p - self.hi), self.lo, self.hi)
        return float(np.linalg.norm(corner - p, ord=ord))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class Ball(ConvexDomain):
    def __init__(self, center, radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.ndim != 1:
            raise DomainError("ball: center must be a vector")
        if not radius > 0:
            raise DomainError(f"ball: radius must be positive, got {radius}")
        self.center = center
        self.radius = float(radius)
        self.ambient_dim = center.size
        self.interior_center = center.copy()
        self.interior_radius = self.radius
        self.diameter = 2 * self.radius
        self.hull_basis = np.eye(self.ambient_dim)

    def _project(self, x):
        diff = x - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        scale = np.where(norm > self.radius, self.radius / np.where(norm > 0, norm, 1.0), 1.0)
        return self.center + diff * scale

    def _inside(self, x, slack):
        return np.linalg.norm(x - self.center, axis=-1) <= self.radius + slack

    def _project_point(self, x):
        diff = x - self.center
        norm = math.sqrt(float(diff @ diff))
        return self.center + diff * (self.radius / norm) if norm > self.radius else x

    def _inside_point(self, x, slack):
        diff = x - self.center
        return math.sqrt(float(diff @ diff)) <= self.radius + slack

    def linear_minimizer(self, g):
        g = np.asarray(g, dtype=float)
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
        safe = np.where(norm > 0, norm, 1.0)
        return self.center - self.radius * g / safe

    def farthest_distance(self, p, ord=2):
        p = np.asarray(p, dtype=float)
        if ord == 2:
            return float(np.linalg.norm(p - self.center) + self.radius)
        # Hölder: ||z||_1 <= sqrt(d) ||z||_2
        return float(np.linalg.norm(p - self.center, ord=ord) + self.radius * math.sqrt(self.ambient_dim))

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Sort-and-threshold projection of the rows of ``x`` onto the simplex."""
    x = np.atleast_2d(x)
    n = x.shape[1]
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(x.shape[0]), rho] / (rho + 1)
    return np.maximum(x - theta[:, None], 0.0)


class Simplex(ConvexDomain):
    """The probability simplex ``{x >= 0, sum x = 1}`` in ``R^dim``."""

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 2:
            raise DomainError(f"simplex: dim must be an integer >= 2, got {dim}")
        n = int(dim)
        self.dim = n
        self.ambient_dim = n
        self.interior_center = np.full(n, 1.0 / n)
        # distance from the barycenter to a facet, measured inside the hull
        self.interior_radius = 1.0 / math.sqrt(n * (n - 1))
        self.diameter = math.sqrt(2.0)
        _, _, vt = np.linalg.svd(np.ones((1, n)))
        self.hull_basis = vt[1:]
        self.vertices = np.eye(n)

    def _project(self, x):
        return project_simplex(x)

    def _inside(self, x, slack):
        return (np.min(x, axis=-1) >= -slack) & (np.abs(np.sum(x, axis=-1) - 1.0) <= slack)

    def linear_minimizer(self, g):
        g = np.asarray(g, dtype=float)
        return self.vertices[np.argmin(g, axis=-1)]

    def farthest_distance(self, p, ord=2):
        p = np.asarray(p, dtype=float)
        return float(np.max(np.linalg.norm(self.vertices - p, ord=ord, axis=1)))

    def __repr__(self):
        return f"Simplex(dim={self.dim})"


class ShrunkDomain(ConvexDomain):
    """The set ``(1 - alpha/r) K + (alpha/r) c`` for a base domain ``K``."""

    def __init__(self, base: ConvexDomain, alpha: float):
        r = base.interior_radius
        if alpha < 0:
            raise DomainError("shrink parameter must be non-negative")
        if alpha >= r:
            raise DomainError(f"shrink parameter exceeds interior radius (alpha={alpha}, r={r})")
        self.base = base
        self.alpha = float(alpha)
        self.scale = 1.0 - alpha / r
        self.ambient_dim = base.ambient_dim
        self.interior_center = base.interior_center.copy()
        self.interior_radius = self.scale * r
        self.diameter = self.scale * base.diameter
        self.hull_basis = base.hull_basis
        self._offset = (1.0 - self.scale) * base.interior_center

    def to_base(self, x):
        return (np.asarray(x, dtype=float) - self._offset) / self.scale

    def from_base(self, z):
        return self.scale * np.asarray(z, dtype=float) + self._offset

    def _project(self, x):
        # a homothety scales all distances uniformly, so it commutes with argmin
        return self.from_base(self.base.project(self.to_base(x)))

    def _inside(self, x, slack):
        return self.base._inside(self.to_base(x), slack / self.scale)

    def _project_point(self, x):
        return self.from_base(self.base.project(self.to_base(x)))

    def _inside_point(self, x, slack):
        return self.base._inside_point((x - self._offset) / self.scale, slack / self.scale)

    def linear_minimizer(self, g):
        return self.from_base(self.base.linear_minimizer(g))

    def farthest_distance(self, p, ord=2):
        return self.scale * self.base.farthest_distance(self.to_base(p), ord=ord)

    def __repr__(self):
        return f"ShrunkDomain({self.base!r}, alpha={self.alpha})"


def build_domain(spec: Mapping[str, Any]) -> ConvexDomain:
    """Construct a domain from a mapping such as ``{"type": "ball", "radius": 1}``.

    Box accepts ``lo``/``hi`` vectors, or scalars together with ``dim``.
    Ball accepts ``center`` and ``radius``, or ``dim`` and ``radius`` (origin).
    Simplex takes ``dim``.
    """
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise DomainError("domain: missing field 'type'")
    kind = spec["type"]
    dim = spec.get("dim")
    if kind == "box":
        for key in ("lo", "hi"):
            if key not in spec:
                raise DomainError(f"box: missing field '{key}'")
        lo, hi = spec["lo"], spec["hi"]
        if np.ndim(lo) == 0 and np.ndim(hi) == 0:
            if dim is None:
                raise DomainError("box: scalar 'lo'/'hi' require field 'dim'")
            lo, hi = np.full(int(dim), float(lo)), np.full(int(dim), float(hi))
        return Box(lo, hi)
    if kind == "ball":
        if "radius" not in spec:
            raise DomainError("ball: missing field 'radius'")
        center = spec.get("center")
        if center is None:
            if dim is None:
                raise DomainError("ball: need field 'center' or 'dim'")
            center = np.zeros(int(dim))
        return Ball(center, float(spec["radius"]))
    if kind == "simplex":
        if dim is None:
            raise DomainError("simplex: missing field 'dim'")
        return Simplex(dim)
    raise DomainError(f"domain: unknown type {kind!r}")


def sample_unit_sphere(domain: ConvexDomain, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform unit vector(s) in the direction space of ``aff(K)``."""
    n = 1 if size is None else size
    z = rng.standard_normal((n, domain.hull_dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    v = z @ domain.hull_basis
    return v if size is not None else v[0]


def sample_unit_ball(domain: ConvexDomain, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform vector(s) in the unit ball of the direction space of ``aff(K)``."""
    n = 1 if size is None else size
    v = sample_unit_sphere(domain, rng, n)
    v *= rng.uniform(size=(n, 1)) ** (1.0 / domain.hull_dim)
    return v if size is not None else v[0]
