"""Online learners.

An agent plays one action per round and then runs its query policy against
the round's oracle.  ``feedback`` receives the oracle as a callable and may
call it any number of times; a *trivial* query policy calls it exactly once,
at the action it just played.

    x = agent.act()
    agent.feedback(oracle)   # oracle(y) -> observation
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import MEMBERSHIP_TOL, ConvexDomain


class AgentError(ValueError):
    pass


class Agent:
    """Base class for learners and meta-algorithm wrappers.

    Attributes
    ----------
    domain : ConvexDomain
        The set actions and queries are drawn from.
    order : int
        1 if the agent consumes gradient observations, 0 for values.
    trivial_query : bool
        True if the agent queries once per round, at its own action.
    deterministic : bool
        True if the agent never draws from its random stream.
    requires_deterministic_oracle : bool
    """

    order = 1
    trivial_query = True
    deterministic = True
    requires_deterministic_oracle = False

    def __init__(self, domain: ConvexDomain):
        self.domain = domain
        self.rng = None

    @property
    def feedback_kind(self) -> str:
        if not self.trivial_query:
            return "full-information"
        return "semi-bandit" if self.order == 1 else "bandit"

    def rebind(self, domain: ConvexDomain) -> None:
        """Replace the action set; used by wrappers that shrink the domain."""
        self.domain = domain

    def reset(self, rng: np.random.Generator | None = None) -> None:
        self.rng = rng

    def act(self) -> np.ndarray:
        raise NotImplementedError

    def feedback(self, oracle) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``eta_t`` for projected gradient descent.

    ``convex``: ``D / (M1 sqrt(t))``; ``strongly_convex``: ``1 / (mu t)``;
    ``fixed``: constant ``eta``.
    """

    kind: str
    D: float | None = None
    M1: float | None = None
    mu: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.kind == "convex":
            if not (self.D and self.D > 0 and self.M1 and self.M1 > 0):
                raise AgentError("convex schedule needs D > 0 and M1 > 0")
        elif self.kind == "strongly_convex":
            if not (self.mu and self.mu > 0):
                raise AgentError("strongly_convex schedule needs mu > 0")
        elif self.kind == "fixed":
            if not (self.eta and self.eta > 0):
                raise AgentError("fixed schedule needs eta > 0")
        else:
            raise AgentError(f"unknown schedule kind {self.kind!r}")

    def __call__(self, t: int) -> float:
        if self.kind == "convex":
            return self.D / (self.M1 * math.sqrt(t))
        if self.kind == "strongly_convex":
            return 1.0 / (self.mu * t)
        return self.eta


@dataclass(frozen=True)
class OgdState:
    current: np.ndarray
    schedule: StepSchedule
    domain: ConvexDomain
    t: int = 1


def ogd_step(state: OgdState, o) -> OgdState:
    """One projected step ``x <- project(x - eta_t o)``."""
    o = np.asarray(o, dtype=float)
    if not np.isfinite(o).all():
        raise AgentError(f"non-finite gradient observation {o}")
    nxt = state.domain.project(state.current - state.schedule(state.t) * o)
    return OgdState(nxt, state.schedule, state.domain, state.t + 1)


class OGD(Agent):
    """Projected online gradient descent with semi-bandit feedback."""

    def __init__(self, domain: ConvexDomain, schedule: StepSchedule, x0=None):
        super().__init__(domain)
        self.schedule = schedule
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float)
        if self.x0 is not None and not domain.contains(self.x0, MEMBERSHIP_TOL):
            raise AgentError(f"initial point {self.x0} is not in the domain")
        self.state = None

    def rebind(self, domain):
        super().rebind(domain)
        self.state = None

    def reset(self, rng=None):
        super().reset(rng)
        if self.x0 is None:
            start = self.domain.interior_center.copy()
        else:
            # an explicit start may fall outside a shrunk domain
            start = self.domain.project(self.x0)
        self.state = OgdState(start, self.schedule, self.domain)

    def act(self):
        return self.state.current

    def feedback(self, oracle):
        self.state = ogd_step(self.state, oracle(self.state.current))


def build_ogd(domain: ConvexDomain, schedule: StepSchedule, x0=None) -> OGD:
    return OGD(domain, schedule, x0)


def hedge_update(weights, losses, beta: float) -> np.ndarray:
    """Exponential weights: ``w_i <- w_i exp(-beta l_i)``, renormalized."""
    losses = np.asarray(losses, dtype=float)
    logits = np.log(weights) - beta * (losses - losses.min())
    w = np.exp(logits - logits.max())
    return w / w.sum()


def ader_grid(T: int) -> int:
    return math.ceil(0.5 * math.log2(T)) + 1


class Ader(Agent):
    """Expert-aggregation learner for dynamic regret.

    Runs ``N = ceil(log2(T) / 2) + 1`` OGD experts with step sizes
    ``2^(i-1) D / (M1 sqrt(T))`` and combines them with exponential weights on
    the linearized scores ``<o_i, x_i - x>``, where ``o_i`` is the gradient
    observed at expert ``i``'s point and ``x`` the combined action.  Each round
    queries the oracle at every expert point, so the query policy is
    non-trivial.
    """

    trivial_query = False

    def __init__(self, domain: ConvexDomain, T: int, M1: float):
        if T < 2:
            raise AgentError("Ader needs a horizon T >= 2")
        if not M1 > 0:
            raise AgentError("Ader needs M1 > 0")
        super().__init__(domain)
        self.T = int(T)
        self.M1 = float(M1)
        self.n_experts = ader_grid(self.T)
        self._configure()

    def _configure(self):
        D = self.domain.diameter
        eta1 = D / (self.M1 * math.sqrt(self.T))
        self.step_sizes = eta1 * 2.0 ** np.arange(self.n_experts)
        self.hedge_rate = math.sqrt(8 * math.log(self.n_experts) / self.T) / (self.M1 * D)
        self.experts = None

    def rebind(self, domain):
        super().rebind(domain)
        self._configure()

    def reset(self, rng=None):
        super().reset(rng)
        c = self.domain.interior_center.copy()
        self.experts = [OgdState(c, StepSchedule("fixed", eta=float(eta)), self.domain) for eta in self.step_sizes]
        self.weights = np.full(self.n_experts, 1.0 / self.n_experts)
        self.x = None
        # running totals for the exponential-weights guarantee
        self.mixture_loss = 0.0
        self.expert_losses = np.zeros(self.n_experts)
        self.range_sq_sum = 0.0

    def act(self):
        pts = np.array([e.current for e in self.experts])
        self.x = self.domain.project(self.weights @ pts)
        return self.x

    def feedback(self, oracle):
        grads = [np.asarray(oracle(e.current), dtype=float) for e in self.experts]
        scores = np.array([g @ (e.current - self.x) for g, e in zip(grads, self.experts)])
        self.mixture_loss += float(self.weights @ scores)
        self.expert_losses += scores
        self.range_sq_sum += float(scores.max() - scores.min()) ** 2
        self.weights = hedge_update(self.weights, scores, self.hedge_rate)
        self.experts = [ogd_step(e, g) for e, g in zip(self.experts, grads)]

    def hedge_regret(self) -> float:
        """Cumulative mixture score minus the best expert's cumulative score."""
        return self.mixture_loss - float(self.expert_losses.min())

    def hedge_bound(self) -> float:
        """``ln N / beta + beta / 8 * sum_t range_t^2`` (Hoeffding)."""
        beta = self.hedge_rate
        return math.log(self.n_experts) / beta + beta * self.range_sq_sum / 8


def build_ader(domain: ConvexDomain, T: int, M1: float) -> Ader:
    return Ader(domain, T, M1)
