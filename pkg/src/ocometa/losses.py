"""Loss functions, quadratic surrogates, query oracles and gradient estimators.

Every loss evaluates on a single point ``(d,)`` or a batch ``(n, d)``.  The
gradient methods return the minimum-norm subgradient at kinks.
"""

from __future__ import annotations

import math
from typing import Any, Mapping

import numpy as np

from .geometry import MEMBERSHIP_TOL, ConvexDomain, sample_unit_ball


class LossError(ValueError):
    pass


class LossFunction:
    """Base class.  Subclasses set ``mu`` (strong convexity) and implement
    ``value``, ``gradient``, ``bound`` and ``lipschitz``."""

    mu: float = 0.0
    convex: bool = True

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def bound(self, domain: ConvexDomain) -> float:
        """``M0`` with ``|f| <= M0`` on ``domain``."""
        raise NotImplementedError

    def lipschitz(self, domain: ConvexDomain) -> float:
        """``M1``, a Lipschitz constant on ``domain``."""
        raise NotImplementedError

    def quadratic_form(self):
        """``(s, b, c)`` with ``f(y) = s/2 ||y||^2 + <b, y> + c``, or None."""
        return None

    def subgradient(self, x, mu: float = 0.0) -> np.ndarray:
        """A ``mu``-subgradient at ``x``.

        The gradient of a ``mu'``-strongly convex function is a
        ``mu``-subgradient for every ``mu <= mu'``; larger ``mu`` has none.
        """
        if mu < 0:
            raise LossError("mu must be non-negative")
        if mu > self.mu + 1e-12:
            raise LossError(f"no {mu}-subgradient: function is only {self.mu}-strongly convex")
        return self.gradient(x)

    def __call__(self, x):
        return self.value(x)


class LinearLoss(LossFunction):
    """``f(y) = <slope, y> + offset``."""

    def __init__(self, slope, offset: float = 0.0):
        self.slope = np.atleast_1d(np.asarray(slope, dtype=float))
        self.offset = float(offset)

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.slope + self.offset

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.slope.copy()
        return np.broadcast_to(self.slope, x.shape).copy()

    def bound(self, domain):
        lo = self.value(domain.linear_minimizer(self.slope))
        hi = self.value(domain.linear_minimizer(-self.slope))
        return float(max(abs(lo), abs(hi)))

    def lipschitz(self, domain):
        return float(np.linalg.norm(self.slope))

    def quadratic_form(self):
        return 0.0, self.slope, self.offset

    def __repr__(self):
        return f"LinearLoss(slope={self.slope.tolist()}, offset={self.offset})"


class QuadraticLoss(LossFunction):
    """``f(y) = curvature/2 ||y - center||^2 + offset``."""

    def __init__(self, center, curvature: float, offset: float = 0.0):
        if curvature < 0:
            raise LossError("curvature must be non-negative")
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.curvature = float(curvature)
        self.mu = self.curvature
        self.offset = float(offset)

    def value(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        return 0.5 * self.curvature * np.sum(diff * diff, axis=-1) + self.offset

    def gradient(self, x):
        return self.curvature * (np.asarray(x, dtype=float) - self.center)

    def bound(self, domain):
        far = domain.farthest_distance(self.center)
        return 0.5 * self.curvature * far**2 + abs(self.offset)

    def lipschitz(self, domain):
        return self.curvature * domain.farthest_distance(self.center)

    def quadratic_form(self):
        s = self.curvature
        return s, -s * self.center, 0.5 * s * float(self.center @ self.center) + self.offset

    def __repr__(self):
        return f"QuadraticLoss(center={self.center.tolist()}, curvature={self.curvature})"


class AbsLoss(LossFunction):
    """``f(y) = scale / sqrt(d) * ||y - center||_1``; ``scale``-Lipschitz."""

    def __init__(self, center, scale: float = 1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.scale = float(scale)
        self._coef = self.scale / math.sqrt(self.center.size)

    def value(self, x):
        return self._coef * np.sum(np.abs(np.asarray(x, dtype=float) - self.center), axis=-1)

    def gradient(self, x):
        return self._coef * np.sign(np.asarray(x, dtype=float) - self.center)

    def bound(self, domain):
        return self._coef * domain.farthest_distance(self.center, ord=1)

    def lipschitz(self, domain):
        return self.scale

    def __repr__(self):
        return f"AbsLoss(center={self.center.tolist()}, scale={self.scale})"


class NormLoss(LossFunction):
    """``f(y) = scale * ||y - center||``."""

    def __init__(self, center, scale: float = 1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.scale = float(scale)

    def value(self, x):
        return self.scale * np.linalg.norm(np.asarray(x, dtype=float) - self.center, axis=-1)

    def gradient(self, x):
        diff = np.asarray(x, dtype=float) - self.center
        norm = np.linalg.norm(diff, axis=-1, keepdims=True)
        return self.scale * np.where(norm > 0, diff / np.where(norm > 0, norm, 1.0), 0.0)

    def bound(self, domain):
        return self.scale * domain.farthest_distance(self.center)

    def lipschitz(self, domain):
        return self.scale

    def __repr__(self):
        return f"NormLoss(center={self.center.tolist()}, scale={self.scale})"


class QuadraticSurrogate(LossFunction):
    """``q(y) = <slope, y - anchor> + mu/2 ||y - anchor||^2``."""

    def __init__(self, anchor, slope, mu: float):
        self.anchor = np.atleast_1d(np.asarray(anchor, dtype=float))
        self.slope = np.atleast_1d(np.asarray(slope, dtype=float))
        self.mu = float(mu)

    def value(self, y):
        diff = np.asarray(y, dtype=float) - self.anchor
        return diff @ self.slope + 0.5 * self.mu * np.sum(diff * diff, axis=-1)

    def gradient(self, y):
        return self.slope + self.mu * (np.asarray(y, dtype=float) - self.anchor)

    def bound(self, domain):
        far = domain.farthest_distance(self.anchor)
        return float(np.linalg.norm(self.slope)) * far + 0.5 * self.mu * far**2

    def lipschitz(self, domain):
        return float(np.linalg.norm(self.slope)) + self.mu * domain.farthest_distance(self.anchor)

    def quadratic_form(self):
        x, o, s = self.anchor, self.slope, self.mu
        return s, o - s * x, -float(o @ x) + 0.5 * s * float(x @ x)

    def __repr__(self):
        return f"QuadraticSurrogate(anchor={self.anchor.tolist()}, slope={self.slope.tolist()}, mu={self.mu})"


def quadratize(x, o, mu: float) -> QuadraticSurrogate:
    """The ``mu``-quadratization of a loss at ``x`` with ``mu``-subgradient ``o``."""
    if mu < 0:
        raise LossError("mu must be non-negative")
    return QuadraticSurrogate(x, o, mu)


# -- noise and oracles -------------------------------------------------------


class Noise:
    """Mean-zero bounded additive noise.

    ``uniform`` draws from ``[-width/2, width/2]``; ``bounded-gaussian`` draws
    ``N(0, sigma^2)`` clipped symmetrically to ``[-clip, clip]``.  Vector
    observations get independent noise per coordinate.
    """

    def __init__(self, kind: str = "none", width: float = 0.0, sigma: float = 0.0, clip: float | None = None):
        if kind not in ("none", "uniform", "bounded-gaussian"):
            raise LossError(f"unknown noise type {kind!r}")
        if kind == "uniform" and not (0 <= width < math.inf):
            raise LossError("uniform noise needs a finite width >= 0")
        if kind == "bounded-gaussian" and (clip is None or not (0 <= clip < math.inf)):
            raise LossError("bounded-gaussian noise needs a finite clip (unbounded noise makes the oracle bound infinite)")
        self.kind = kind
        self.width = float(width)
        self.sigma = float(sigma)
        self.clip = None if clip is None else float(clip)

    @classmethod
    def parse(cls, spec: Mapping[str, Any] | str | None) -> "Noise":
        if spec is None or spec == "none":
            return cls()
        if isinstance(spec, Noise):
            return spec
        spec = dict(spec)
        kind = spec.pop("type", "none")
        return cls(kind, **spec)

    @property
    def stochastic(self) -> bool:
        if self.kind == "uniform":
            return self.width > 0
        if self.kind == "bounded-gaussian":
            return self.sigma > 0 and self.clip > 0
        return False

    def magnitude(self) -> float:
        """Largest absolute value of a single noise coordinate."""
        if self.kind == "uniform":
            return self.width / 2
        if self.kind == "bounded-gaussian":
            return self.clip
        return 0.0

    def sample(self, rng: np.random.Generator, shape=()):
        if self.kind == "uniform":
            return rng.uniform(-self.width / 2, self.width / 2, size=shape)
        if self.kind == "bounded-gaussian":
            return np.clip(rng.normal(0.0, self.sigma, size=shape), -self.clip, self.clip)
        return np.zeros(shape) if shape else 0.0

    def __repr__(self):
        return f"Noise({self.kind!r}, width={self.width}, sigma={self.sigma}, clip={self.clip})"


class QueryOracle:
    """A (possibly stochastic) oracle for a loss.

    ``order`` is 0 for value oracles and 1 for gradient oracles; ``bound`` is
    the radius of a ball containing every observation.
    """

    order: int
    kind: str
    bound: float

    def __init__(self, f: LossFunction, noise: Noise, bound: float):
        self.f = f
        self.noise = noise
        self.bound = float(bound)
        self.kind = "stochastic" if noise.stochastic else "deterministic"

    @property
    def deterministic(self) -> bool:
        return self.kind == "deterministic"


class ValueOracle(QueryOracle):
    order = 0

    def __call__(self, x, rng: np.random.Generator | None = None):
        val = float(self.f.value(x))
        if self.noise.stochastic:
            val += float(self.noise.sample(rng))
        return val


class GradientOracle(QueryOracle):
    order = 1

    def __init__(self, f: LossFunction, noise: Noise, bound: float, mu: float = 0.0):
        super().__init__(f, noise, bound)
        self.mu = float(mu)

    def __call__(self, x, rng: np.random.Generator | None = None):
        g = self.f.subgradient(x, self.mu)
        if self.noise.stochastic:
            g = g + self.noise.sample(rng, g.shape)
        return g


def make_value_oracle(f: LossFunction, noise=None, *, domain: ConvexDomain) -> ValueOracle:
    noise = Noise.parse(noise)
    return ValueOracle(f, noise, f.bound(domain) + noise.magnitude())


def make_gradient_oracle(f: LossFunction, mu: float = 0.0, noise=None, *, domain: ConvexDomain) -> GradientOracle:
    noise = Noise.parse(noise)
    f.subgradient(domain.interior_center, mu)  # rejects mu above the strong convexity
    bound = f.lipschitz(domain) + noise.magnitude() * math.sqrt(domain.ambient_dim)
    return GradientOracle(f, noise, bound, mu)


# -- smoothing and estimators ------------------------------------------------


def smoothed_eval(f: LossFunction, domain: ConvexDomain, delta: float, x, n: int, rng: np.random.Generator):
    """Monte-Carlo estimate of ``E_v f(x + delta v)`` over the unit ball of the
    hull direction space.  Returns ``(mean, standard_error)``."""
    if n < 1:
        raise LossError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    if delta == 0:
        return float(f.value(x)), 0.0
    pts = x + delta * sample_unit_ball(domain, rng, n)
    if not np.all(domain.contains(pts, MEMBERSHIP_TOL)):
        raise LossError("smoothing query left the domain; is x in the shrunk set with delta <= alpha?")
    vals = f.value(pts)
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return float(np.mean(vals)), se


def one_point_estimate(k: int, delta: float, obs: float, v) -> np.ndarray:
    """``(k / delta) * obs * v``."""
    if not delta > 0:
        raise LossError("delta must be positive")
    return (k / delta) * obs * np.asarray(v, dtype=float)


def two_point_estimate(k: int, delta: float, f_plus: float, f_minus: float, v) -> np.ndarray:
    """``k / (2 delta) * (f_plus - f_minus) * v``."""
    if not delta > 0:
        raise LossError("delta must be positive")
    return (k / (2 * delta)) * (f_plus - f_minus) * np.asarray(v, dtype=float)


def almost_lipschitz_bound(M0: float, alpha: float, x, y) -> float:
    """``2 M0 / alpha * ||x - y||``, valid for convex ``|f| <= M0`` with
    ``x`` in the ``alpha``-shrunk set and ``y`` in the full set."""
    if not alpha > 0:
        raise LossError("alpha must be positive")
    return 2.0 * M0 / alpha * float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
