"""Wrappers that turn one agent into another.

``fts``       full-information first order  -> semi-bandit
``restrict``  any agent                     -> same agent on the shrunk set
``fotzo``     first order                   -> zeroth order (full information)
``stb``       semi-bandit                   -> bandit
``fotzo_2p``  first order                   -> deterministic two-point zeroth order

Wrappers shrink the base agent's domain in place (``base.rebind``), so a base
agent instance belongs to exactly one wrapper.  Randomness for the smoothing
directions comes from the agent stream handed to ``reset``.
"""

from __future__ import annotations

import numpy as np

from .agents import Agent, AgentError
from .geometry import sample_unit_sphere
from .losses import one_point_estimate, two_point_estimate


class MetaError(AgentError):
    pass


class DerivedOracle:
    """Oracle handed to a base agent; answers from a function of the query."""

    def __init__(self, fn, order: int, kind: str, bound: float):
        self.fn = fn
        self.order = order
        self.kind = kind
        self.bound = bound

    def __call__(self, y):
        return self.fn(np.asarray(y, dtype=float))


def _require_first_order(base: Agent, name: str):
    if base.order != 1:
        raise MetaError(f"{name} needs a first-order base agent, got a {base.feedback_kind} zeroth-order agent")


class Wrapper(Agent):
    def __init__(self, base: Agent):
        super().__init__(base.domain)
        self.base = base
        self.deterministic = base.deterministic

    def _inner_domain(self, domain):
        return domain

    def rebind(self, domain):
        inner = self._inner_domain(domain)
        self.domain = domain
        self.base.rebind(inner)

    def reset(self, rng=None):
        super().reset(rng)
        self.base.reset(rng)

    def _check_params(self, domain, alpha: float, delta: float):
        r = domain.interior_radius
        if not delta > 0:
            raise MetaError(f"{type(self).__name__}: smoothing parameter delta must be positive")
        if delta > alpha:
            raise MetaError(f"{type(self).__name__}: needs delta <= alpha (delta={delta}, alpha={alpha})")
        if alpha >= r:
            raise MetaError(f"{type(self).__name__}: shrink parameter exceeds interior radius (alpha={alpha}, r={r})")


class FTS(Wrapper):
    """Plays the base action, queries the real oracle once there, and answers
    every base query with the gradient of the quadratic surrogate
    ``<o, y - x> + mu/2 ||y - x||^2``."""

    order = 1
    trivial_query = True

    def __init__(self, base: Agent, mu: float = 0.0):
        _require_first_order(base, "fts")
        if mu < 0:
            raise MetaError("fts: mu must be non-negative")
        super().__init__(base)
        self.mu = float(mu)

    def act(self):
        self.x = self.base.act()
        return self.x

    def feedback(self, oracle):
        x, mu = self.x, self.mu
        o = np.asarray(oracle(x), dtype=float)
        bound = oracle.bound + mu * self.domain.diameter
        self.base.feedback(DerivedOracle(lambda y: o + mu * (y - x), 1, "deterministic", bound))


class Restrict(Wrapper):
    """Runs the base agent on ``(1 - alpha/r) K + (alpha/r) c``."""

    def __init__(self, base: Agent, alpha: float):
        super().__init__(base)
        self.alpha = float(alpha)
        self.rebind(self.domain)
        self.order = base.order
        self.trivial_query = base.trivial_query
        self.requires_deterministic_oracle = base.requires_deterministic_oracle

    def _inner_domain(self, domain):
        return domain.shrink(self.alpha)

    def act(self):
        return self.base.act()

    def feedback(self, oracle):
        self.base.feedback(oracle)


class FOTZO(Wrapper):
    """Each base query ``y`` becomes one value query at ``y + delta v`` and is
    answered with ``(k / delta) o v``.  The played action is the base action."""

    order = 0
    trivial_query = False

    def __init__(self, base: Agent, alpha: float, delta: float):
        _require_first_order(base, "fotzo")
        super().__init__(base)
        self.alpha, self.delta = float(alpha), float(delta)
        self.k = self.domain.hull_dim
        self.rebind(self.domain)
        self.deterministic = False

    def _inner_domain(self, domain):
        self._check_params(domain, self.alpha, self.delta)
        return domain.shrink(self.alpha)

    def act(self):
        return self.base.act()

    def feedback(self, oracle):
        k, delta, rng, dom = self.k, self.delta, self.rng, self.domain

        def estimate(y):
            v = sample_unit_sphere(dom, rng)
            return one_point_estimate(k, delta, oracle(y + delta * v), v)

        self.base.feedback(DerivedOracle(estimate, 1, "stochastic", k / delta * oracle.bound))


class STB(Wrapper):
    """Plays ``x + delta v`` for the base action ``x`` and feeds the base the
    one-point estimate ``(k / delta) o v`` built from the single observation."""

    order = 0
    trivial_query = True

    def __init__(self, base: Agent, alpha: float, delta: float):
        if base.order != 1 or not base.trivial_query:
            raise MetaError(f"stb needs a semi-bandit base agent, got {base.feedback_kind} (order {base.order})")
        super().__init__(base)
        self.alpha, self.delta = float(alpha), float(delta)
        self.k = self.domain.hull_dim
        self.rebind(self.domain)
        self.deterministic = False

    def _inner_domain(self, domain):
        self._check_params(domain, self.alpha, self.delta)
        return domain.shrink(self.alpha)

    def act(self):
        self.x = self.base.act()
        self.v = sample_unit_sphere(self.domain, self.rng)
        self.played = self.x + self.delta * self.v
        return self.played

    def feedback(self, oracle):
        o = oracle(self.played)
        est = one_point_estimate(self.k, self.delta, o, self.v)
        x = self.x

        def answer(y):
            if not np.array_equal(y, x):
                raise MetaError("stb: semi-bandit base queried a point other than its action")
            return est

        self.base.feedback(DerivedOracle(answer, 1, "stochastic", self.k / self.delta * oracle.bound))


class FOTZO2P(Wrapper):
    """Each base query ``y`` becomes two value queries at ``y +- delta v`` and is
    answered with the two-point estimate.  Needs a deterministic oracle."""

    order = 0
    trivial_query = False
    requires_deterministic_oracle = True

    def __init__(self, base: Agent, delta: float, lipschitz: float | None = None):
        _require_first_order(base, "fotzo_2p")
        super().__init__(base)
        self.delta = float(delta)
        self.k = self.domain.hull_dim
        self.lipschitz = lipschitz
        self.rebind(self.domain)
        self.deterministic = False

    def _inner_domain(self, domain):
        r = domain.interior_radius
        if not 0 < self.delta < r:
            raise MetaError(f"fotzo_2p: needs 0 < delta < r (delta={self.delta}, r={r})")
        return domain.shrink(self.delta)

    def feedback(self, oracle):
        if getattr(oracle, "kind", "deterministic") != "deterministic":
            raise MetaError("fotzo_2p needs a deterministic value oracle")
        k, delta, rng, dom = self.k, self.delta, self.rng, self.domain

        def estimate(y):
            v = sample_unit_sphere(dom, rng)
            return two_point_estimate(k, delta, oracle(y + delta * v), oracle(y - delta * v), v)

        bound = k * self.lipschitz if self.lipschitz is not None else k / delta * oracle.bound
        self.base.feedback(DerivedOracle(estimate, 1, "stochastic", bound))

    def act(self):
        return self.base.act()


def fts(base: Agent, mu: float = 0.0) -> FTS:
    return FTS(base, mu)


def restrict(base: Agent, alpha: float) -> Restrict:
    return Restrict(base, alpha)


def fotzo(base: Agent, alpha: float, delta: float) -> FOTZO:
    return FOTZO(base, alpha, delta)


def stb(base: Agent, alpha: float, delta: float) -> STB:
    return STB(base, alpha, delta)


def fotzo_2p(base: Agent, delta: float, lipschitz: float | None = None) -> FOTZO2P:
    return FOTZO2P(base, delta, lipschitz)
