"""Adversaries, the repeated game, and regret measurement.

Rounds are numbered from 1.  An adversary's ``choose(t, actions, rng)``
receives the actions ``x_1..x_t`` played so far (the current one included)
and the oracle random stream, and returns the round's loss and oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Sequence

import numpy as np

from .geometry import MEMBERSHIP_TOL, ConvexDomain, sample_unit_sphere
from .losses import (
    AbsLoss,
    GradientOracle,
    LinearLoss,
    LossFunction,
    Noise,
    NormLoss,
    QuadraticLoss,
    ValueOracle,
    one_point_estimate,
    quadratize,
    two_point_estimate,
)


class GameAborted(RuntimeError):
    pass


class AdversaryError(ValueError):
    pass


def as_generator(stream):
    """``(Generator, seed_or_None)`` from a seed, a Generator or None."""
    if isinstance(stream, np.random.Generator):
        return stream, None
    return np.random.default_rng(stream), stream


def same_domain(a: ConvexDomain, b: ConvexDomain) -> bool:
    return a is b or repr(a) == repr(b)


# -- adversaries -------------------------------------------------------------


class Adversary:
    """Base adversary.

    Subclasses implement ``loss(t, actions)``; the oracle is built around it
    from ``oracle_order`` and ``noise``.  ``M0``/``M1`` bound the values and
    Lipschitz constants of every loss it can emit, ``mu`` their common strong
    convexity.
    """

    oblivious = True
    weakly_adaptive = True
    name = "adversary"

    def __init__(self, domain: ConvexDomain, oracle_order: int = 1, noise=None, mu: float = 0.0):
        if oracle_order not in (0, 1):
            raise AdversaryError("oracle order must be 0 or 1")
        self.domain = domain
        self.oracle_order = oracle_order
        self.noise = Noise.parse(noise)
        self.mu = float(mu)
        self.M0 = 0.0
        self.M1 = 0.0

    @property
    def oracle_kind(self) -> str:
        return "stochastic" if self.noise.stochastic else "deterministic"

    @property
    def oracle_bound(self) -> float:
        if self.oracle_order == 0:
            return self.M0 + self.noise.magnitude()
        return self.M1 + self.noise.magnitude() * math.sqrt(self.domain.ambient_dim)

    def loss(self, t: int, actions: Sequence[np.ndarray]) -> LossFunction:
        raise NotImplementedError

    def oracle_for(self, f: LossFunction):
        if self.oracle_order == 0:
            return ValueOracle(f, self.noise, self.oracle_bound)
        return GradientOracle(f, self.noise, self.oracle_bound, self.mu)

    def choose(self, t: int, actions: Sequence[np.ndarray], rng=None):
        f = self.loss(t, actions)
        return f, self.oracle_for(f)


class SequenceAdversary(Adversary):
    """Oblivious adversary replaying a fixed list of losses."""

    name = "sequence"

    def __init__(self, domain, losses: Sequence[LossFunction], oracle_order=1, noise=None, mu=None, comparators=None):
        losses = list(losses)
        if not losses:
            raise AdversaryError("empty loss sequence")
        if mu is None:
            mu = min(f.mu for f in losses)
        super().__init__(domain, oracle_order, noise, mu)
        self.losses = losses
        self.M0 = max(f.bound(domain) for f in losses)
        self.M1 = max(f.lipschitz(domain) for f in losses)
        self.comparators = None if comparators is None else np.asarray(comparators, dtype=float)
        self._oracles = [self.oracle_for(f) for f in losses]

    @property
    def horizon(self) -> int:
        return len(self.losses)

    def loss(self, t, actions):
        return self.losses[t - 1]

    def choose(self, t, actions, rng=None):
        return self.losses[t - 1], self._oracles[t - 1]

    def comparator_sequence(self) -> np.ndarray:
        """The drift path ``u_t`` the losses were built around, if any."""
        if self.comparators is None:
            raise AdversaryError(f"{self.name} adversary has no reference comparator sequence")
        return self.comparators


class SignFollower(Adversary):
    """Fully adaptive: ``f_t(y) = M1 / sqrt(d) <sign(x_t), y>``."""

    oblivious = False
    weakly_adaptive = False
    name = "sign-follower"

    def __init__(self, domain, M1: float = 1.0, oracle_order=1, noise=None):
        super().__init__(domain, oracle_order, noise, 0.0)
        self.scale = float(M1) / math.sqrt(domain.ambient_dim)
        self.M1 = float(M1)
        self.M0 = float(M1) * domain.max_norm()

    def loss(self, t, actions):
        return LinearLoss(self.scale * np.sign(actions[-1]))


class LinearizedAdversary(Adversary):
    """Replaces each loss of a first-order adversary by its quadratization at
    the current action, with the deterministic gradient oracle.  The slope is
    whatever the base oracle would return at ``x_t``, drawn from the oracle
    stream exactly as a semi-bandit agent's single query would be."""

    oblivious = False
    weakly_adaptive = False
    name = "linearized"

    def __init__(self, base: Adversary, mu: float = 0.0):
        if base.oracle_order != 1:
            raise AdversaryError("linearize_adversary needs a first-order base adversary")
        if mu < 0 or mu > base.mu + 1e-12:
            raise AdversaryError(f"mu must lie in [0, {base.mu}] for this adversary")
        super().__init__(base.domain, 1, None, mu)
        self.base = base
        self.M1 = base.oracle_bound + mu * base.domain.diameter
        self.M0 = self.M1 * base.domain.diameter

    def choose(self, t, actions, rng=None):
        _, Q = self.base.choose(t, actions, rng)
        x = actions[-1]
        q = quadratize(x, Q(x, rng), self.mu)
        return q, GradientOracle(q, Noise(), self.M1, 0.0)


class SmoothedAdversary(Adversary):
    """First-order surrogate of a zeroth-order oblivious adversary.

    Answers a gradient query at ``x`` with the one-point estimate
    ``(k/delta) Q_t(x + delta v) v`` (or the two-point estimate), drawing
    ``v`` from its own stream ``v_rng``.  Run against the base agent on the
    shrunk set, it reproduces what a ``stb``/``fotzo``/``fotzo_2p`` wrapper
    feeds that agent when ``v_rng`` replays the wrapper's agent stream.
    """

    name = "smoothed"

    def __init__(self, base: Adversary, shrunk: ConvexDomain, delta: float, v_rng, two_point: bool = False):
        if base.oracle_order != 0:
            raise AdversaryError("smoothing needs a zeroth-order base adversary")
        super().__init__(shrunk, 1, None, base.mu)
        self.base = base
        self.delta = float(delta)
        self.v_rng = v_rng
        self.two_point = two_point
        self.k = base.domain.hull_dim
        self.M0 = base.M0
        self.M1 = self.k * base.M1 if two_point else self.k / self.delta * base.oracle_bound

    @property
    def oracle_kind(self):
        return "stochastic"

    def choose(self, t, actions, rng=None):
        f, Q = self.base.choose(t, actions, rng)
        return f, _SmoothedOracle(Q, self.base.domain, self.k, self.delta, self.v_rng, self.two_point, self.M1)


class _SmoothedOracle:
    order = 1
    kind = "stochastic"

    def __init__(self, Q, domain, k, delta, v_rng, two_point, bound):
        self.Q, self.domain, self.k, self.delta = Q, domain, k, delta
        self.v_rng, self.two_point, self.bound = v_rng, two_point, bound

    def __call__(self, x, rng=None):
        k, delta, Q = self.k, self.delta, self.Q
        v = sample_unit_sphere(self.domain, self.v_rng)
        if self.two_point:
            return two_point_estimate(k, delta, Q(x + delta * v, rng), Q(x - delta * v, rng), v)
        return one_point_estimate(k, delta, Q(x + delta * v, rng), v)


def _drift_centers(domain: ConvexDomain, T: int, path_length: float, radius: float, rng) -> np.ndarray:
    """Centers moving along a circle (or a segment when the hull is
    one-dimensional) of the given radius about ``c`` with total arc length
    ``path_length``; chord lengths make the realized path length at most that."""
    k = domain.hull_dim
    coef = np.linalg.qr(rng.standard_normal((k, min(k, 2))))[0].T
    dirs = coef @ domain.hull_basis
    s = np.linspace(0.0, 1.0, T) if T > 1 else np.zeros(1)
    c = domain.interior_center
    if k >= 2:
        theta0 = rng.uniform(0, 2 * np.pi)
        theta = theta0 + (path_length / radius) * s
        return c + radius * (np.cos(theta)[:, None] * dirs[0] + np.sin(theta)[:, None] * dirs[1])
    # triangle wave on [-radius, radius]
    travel = path_length * s
    phase = np.mod(travel, 4 * radius)
    pos = np.where(phase < 2 * radius, phase - radius, 3 * radius - phase)
    return c + pos[:, None] * dirs[0]


def _oracle_params(spec):
    oracle = dict(spec.get("oracle", {}) or {})
    return int(oracle.get("order", 1)), Noise.parse(oracle.get("noise"))


def _loss_from_spec(spec: Mapping[str, Any], domain: ConvexDomain) -> LossFunction:
    kind = spec.get("type")
    d = domain.ambient_dim
    center = np.asarray(spec.get("center", domain.interior_center), dtype=float)
    if kind == "linear":
        return LinearLoss(np.broadcast_to(np.asarray(spec["slope"], dtype=float), (d,)), spec.get("offset", 0.0))
    if kind == "quadratic":
        return QuadraticLoss(center, float(spec.get("curvature", 1.0)), spec.get("offset", 0.0))
    if kind == "abs":
        return AbsLoss(center, float(spec.get("scale", 1.0)))
    if kind == "norm":
        return NormLoss(center, float(spec.get("scale", 1.0)))
    raise AdversaryError(f"unknown loss type {kind!r}")


def build_adversary(spec: Mapping[str, Any], domain: ConvexDomain, T: int, seed=None) -> Adversary:
    """Construct an adversary from a mapping.

    Types: ``linear-random`` (``M1``, ``bias``), ``quadratic-drift``
    (``curvature``, ``path_length``, ``radius``), ``abs-drift`` (``M1``,
    ``path_length``, ``radius``), ``fixed`` (``loss: {...}``),
    ``sign-follower`` (``M1``).  ``oracle: {order, noise}`` selects the
    feedback; ``mu`` the strong convexity the gradient oracle certifies.
    """
    kind = spec.get("type")
    rng = np.random.default_rng(seed)
    order, noise = _oracle_params(spec)
    d = domain.ambient_dim
    if kind == "linear-random":
        M1 = float(spec.get("M1", 1.0))
        bias = spec.get("bias", 0.0)
        if np.ndim(bias) == 0:
            u = rng.standard_normal(d)
            bias = float(bias) * u / np.linalg.norm(u)
        bias = np.asarray(bias, dtype=float)
        spread = M1 - np.linalg.norm(bias)
        if spread < 0:
            raise AdversaryError("linear-random: |bias| exceeds M1")
        z = rng.standard_normal((T, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        z *= rng.uniform(size=(T, 1)) ** (1.0 / d)
        slopes = bias + spread * z
        adv = SequenceAdversary(domain, [LinearLoss(a) for a in slopes], order, noise, 0.0)
    elif kind in ("quadratic-drift", "abs-drift"):
        radius = float(spec.get("radius", domain.interior_radius / 2))
        if not 0 <= radius < domain.interior_radius:
            raise AdversaryError(f"{kind}: radius must lie in [0, r)")
        P = float(spec.get("path_length", 1.0))
        if radius == 0 and P > 0:
            raise AdversaryError(f"{kind}: positive path_length needs radius > 0")
        centers = _drift_centers(domain, T, P, radius, rng) if radius > 0 else np.tile(domain.interior_center, (T, 1))
        if kind == "quadratic-drift":
            curv = float(spec.get("curvature", 1.0))
            losses = [QuadraticLoss(m, curv) for m in centers]
            mu = float(spec.get("mu", curv))
        else:
            losses = [AbsLoss(m, float(spec.get("M1", 1.0))) for m in centers]
            mu = 0.0
        adv = SequenceAdversary(domain, losses, order, noise, mu, comparators=centers)
    elif kind in ("fixed", "fixed-repeat"):
        f = _loss_from_spec(spec.get("loss", {"type": "quadratic"}), domain)
        adv = SequenceAdversary(domain, [f] * T, order, noise, spec.get("mu", f.mu))
    elif kind == "sign-follower":
        adv = SignFollower(domain, float(spec.get("M1", 1.0)), order, noise)
    else:
        raise AdversaryError(f"unknown adversary type {kind!r}")
    adv.name = kind
    return adv


def linearize_adversary(base: Adversary, mu: float = 0.0) -> LinearizedAdversary:
    return LinearizedAdversary(base, mu)


# -- the game ----------------------------------------------------------------


class RoundOracle:
    """The oracle an agent sees during one round: checks that every query lies
    in the domain, rejects non-finite observations, and records the exchange."""

    __slots__ = ("Q", "rng", "domain", "log", "order", "kind", "bound")

    def __init__(self, Q, rng, domain, log):
        self.Q, self.rng, self.domain, self.log = Q, rng, domain, log
        self.order = Q.order
        self.kind = Q.kind
        self.bound = Q.bound

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if not self.domain.contains(y, MEMBERSHIP_TOL):
            raise GameAborted(f"query {y} lies outside the domain {self.domain!r}")
        obs = self.Q(y, self.rng)
        if not np.all(np.isfinite(obs)):
            raise GameAborted(f"non-finite observation {obs} at {y}")
        if self.log is not None:
            self.log.append((y, obs))
        return obs


@dataclass
class GameTranscript:
    actions: np.ndarray
    true_losses: np.ndarray
    losses: list
    queries: list | None
    domain: ConvexDomain
    seeds: tuple = (None, None)

    @property
    def T(self) -> int:
        return len(self.losses)


def run_game(agent, adversary: Adversary, T: int, agent_rng=None, oracle_rng=None, record_queries: bool = True) -> GameTranscript:
    """Play ``T`` rounds: act, let the adversary choose, run the query policy."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not same_domain(agent.domain, adversary.domain):
        raise GameAborted(f"agent domain {agent.domain!r} differs from adversary domain {adversary.domain!r}")
    if agent.order != adversary.oracle_order:
        raise GameAborted(f"agent consumes order-{agent.order} feedback but the oracle is order {adversary.oracle_order}")
    if agent.requires_deterministic_oracle and adversary.oracle_kind != "deterministic":
        raise GameAborted("agent requires a deterministic oracle but the adversary's is stochastic")
    horizon = getattr(adversary, "horizon", None)
    if horizon is not None and horizon < T:
        raise GameAborted(f"adversary only defines {horizon} rounds")

    agent_gen, agent_seed = as_generator(agent_rng)
    oracle_gen, oracle_seed = as_generator(oracle_rng)
    domain = adversary.domain
    agent.reset(agent_gen)

    actions = np.empty((T, domain.ambient_dim))
    true_losses = np.empty(T)
    losses = []
    queries = [] if record_queries else None
    history = []
    for t in range(1, T + 1):
        x = np.asarray(agent.act(), dtype=float)
        if not domain.contains(x, MEMBERSHIP_TOL):
            raise GameAborted(f"round {t}: action {x} lies outside the domain {domain!r}")
        history.append(x)
        f, Q = adversary.choose(t, history, oracle_gen)
        log = [] if (record_queries or agent.trivial_query) else None
        agent.feedback(RoundOracle(Q, oracle_gen, domain, log))
        if agent.trivial_query and (len(log) != 1 or not np.array_equal(log[0][0], x)):
            raise GameAborted(f"round {t}: agent declares a trivial query policy but queried {[q for q, _ in log]}")
        actions[t - 1] = x
        true_losses[t - 1] = f.value(x)
        losses.append(f)
        if record_queries:
            queries.append(log)
    return GameTranscript(actions, true_losses, losses, queries, domain, (agent_seed, oracle_seed))


# -- comparators and regret --------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 2000
    restarts: int = 8
    tol: float = 1e-6
    grid: int = 401
    grid_budget: float = 2e7
    seed: int = 0


class ComparatorResult(NamedTuple):
    point: np.ndarray
    value: float
    converged: bool
    method: str


class _LossSum:
    """Vectorized ``sum_t f_t`` over a batch of points, grouping losses by type."""

    def __init__(self, losses):
        quad = [f.quadratic_form() for f in losses]
        self.exact = all(q is not None for q in quad)
        self.convex = all(f.convex for f in losses)
        self.s, self.b, self.c = 0.0, 0.0, 0.0
        abs_c, abs_w, norm_c, norm_w, rest = [], [], [], [], []
        for f, q in zip(losses, quad):
            if q is not None:
                self.s += q[0]
                self.b = self.b + q[1]
                self.c += q[2]
            elif isinstance(f, AbsLoss):
                abs_c.append(f.center)
                abs_w.append(f._coef)
            elif isinstance(f, NormLoss):
                norm_c.append(f.center)
                norm_w.append(f.scale)
            else:
                rest.append(f)
        self.abs_c, self.abs_w = np.array(abs_c), np.array(abs_w)
        self.norm_c, self.norm_w = np.array(norm_c), np.array(norm_w)
        self.rest = rest

    def value(self, U):
        U = np.atleast_2d(U)
        out = 0.5 * self.s * np.sum(U * U, axis=1) + U @ np.broadcast_to(self.b, U.shape[1:]) + self.c
        if self.abs_w.size:
            out = out + np.abs(U[:, None, :] - self.abs_c[None]).sum(axis=2) @ self.abs_w
        if self.norm_w.size:
            out = out + np.linalg.norm(U[:, None, :] - self.norm_c[None], axis=2) @ self.norm_w
        for f in self.rest:
            out = out + f.value(U)
        return out

    def gradient(self, U):
        U = np.atleast_2d(U)
        g = self.s * U + self.b
        if self.abs_w.size:
            g = g + np.einsum("t,rtd->rd", self.abs_w, np.sign(U[:, None, :] - self.abs_c[None]))
        if self.norm_w.size:
            diff = U[:, None, :] - self.norm_c[None]
            nrm = np.linalg.norm(diff, axis=2, keepdims=True)
            unit = np.where(nrm > 0, diff / np.where(nrm > 0, nrm, 1.0), 0.0)
            g = g + np.einsum("t,rtd->rd", self.norm_w, unit)
        for f in self.rest:
            g = g + f.gradient(U)
        return g


def _minimize_quadratic_form(s, b, domain):
    b = np.broadcast_to(np.asarray(b, dtype=float), (domain.ambient_dim,))
    if s > 0:
        return domain.project(-b / s)
    return domain.linear_minimizer(b)


def comparator_solve(losses: Sequence[LossFunction], domain: ConvexDomain, solver_cfg: SolverConfig | None = None) -> ComparatorResult:
    """Minimize ``sum_t f_t(u)`` over ``u`` in the domain.

    Sums of linear and isotropic quadratic losses are minimized in closed form.
    Anything else goes through multi-start projected subgradient descent with
    iterate averaging, cross-checked on a grid when the hull has at most two
    dimensions.
    """
    cfg = solver_cfg or SolverConfig()
    total = _LossSum(losses)
    if not total.convex:
        warnings.warn("non-convex losses: comparator is a local minimum and regret is approximate")
    if total.exact:
        u = _minimize_quadratic_form(total.s, total.b, domain)
        return ComparatorResult(u, float(total.value(u)[0]), True, "closed-form")

    rng = np.random.default_rng(cfg.seed)
    starts = np.vstack([domain.interior_center, domain.sample(rng, max(cfg.restarts - 1, 0))]) if cfg.restarts > 1 else domain.interior_center[None]
    U = starts
    vals = total.value(U)
    best_u, best_v = U.copy(), vals.copy()
    avg, wsum = np.zeros_like(U), 0.0
    D = domain.diameter
    converged = False
    last = best_v.min()
    for j in range(1, cfg.iterations + 1):
        g = total.gradient(U)
        gn = np.linalg.norm(g, axis=1, keepdims=True)
        step = D / math.sqrt(j)
        U = domain.project(U - step * g / np.where(gn > 0, gn, 1.0))
        w = 1.0 / math.sqrt(j)
        avg = avg + w * U
        wsum += w
        for cand in (U, avg / wsum):
            v = total.value(cand)
            better = v < best_v
            best_v = np.where(better, v, best_v)
            best_u[better] = cand[better]
        if j % 100 == 0:
            cur = best_v.min()
            if abs(last - cur) <= cfg.tol:
                converged = True
                break
            last = cur
    i = int(np.argmin(best_v))
    u, v, method = best_u[i], float(best_v[i]), "subgradient"

    if domain.hull_dim <= 2:
        k = domain.hull_dim
        n_losses = len(losses)
        per_axis = cfg.grid
        while per_axis > 11 and per_axis**k * n_losses > cfg.grid_budget:
            per_axis = (per_axis - 1) // 2 + 1
        ticks = np.linspace(-D, D, per_axis)
        mesh = np.stack(np.meshgrid(*([ticks] * k), indexing="ij"), axis=-1).reshape(-1, k)
        pts = domain.interior_center + mesh @ domain.hull_basis
        pts = pts[domain.contains(pts, MEMBERSHIP_TOL)]
        if len(pts):
            gv = np.concatenate([total.value(chunk) for chunk in np.array_split(pts, max(1, len(pts) // 2048))])
            gi = int(np.argmin(gv))
            if gv[gi] < v:
                u, v, method = pts[gi], float(gv[gi]), "grid"
    u, v = _polish(total, domain, u, v)
    return ComparatorResult(u, v, converged, method)


def _polish(total, domain, u, v, rounds: int = 150):
    """Normalized subgradient steps from ``u`` on shrinking length scales."""
    cur = u[None]
    for scale in domain.diameter * 10.0 ** -np.arange(2, 7):
        cur = u[None]
        for j in range(1, rounds + 1):
            g = total.gradient(cur)
            gn = float(np.linalg.norm(g))
            if gn == 0:
                break
            cur = domain.project(cur - scale / math.sqrt(j) * g / gn)
            val = float(total.value(cur)[0])
            if val < v:
                u, v = cur[0].copy(), val
    return u, v


@dataclass
class RegretReport:
    static_regret: float
    comparator_argmin: Any
    interval: tuple
    dynamic_regret: float | None = None
    adaptive_regret: float | None = None
    adaptive_interval: tuple | None = None
    exact: bool = True
    notes: list = field(default_factory=list)


def _check_interval(T, interval):
    a, b = interval if interval is not None else (1, T)
    if not 1 <= a <= b <= T:
        raise ValueError(f"interval must satisfy 1 <= a <= b <= T={T}, got {(a, b)}")
    return a, b


def static_regret(transcript: GameTranscript, domain: ConvexDomain | None = None, interval=None, solver_cfg=None) -> RegretReport:
    """``sum_{t=a}^b f_t(x_t) - min_u sum_{t=a}^b f_t(u)``.

    When the comparator comes from the iterative solver without converging,
    the value is a lower bound on the regret and ``exact`` is False.
    """
    domain = domain or transcript.domain
    a, b = _check_interval(transcript.T, interval)
    res = comparator_solve(transcript.losses[a - 1 : b], domain, solver_cfg)
    value = float(np.sum(transcript.true_losses[a - 1 : b]) - res.value)
    report = RegretReport(value, res.point, (a, b), exact=res.converged)
    if not res.converged:
        report.notes.append("comparator solver did not converge: static regret is a lower bound")
    return report


def dynamic_regret(transcript: GameTranscript, u_seq, interval=None, domain: ConvexDomain | None = None) -> float:
    """``sum f_t(x_t) - sum f_t(u_t)`` for a fixed comparator sequence."""
    domain = domain or transcript.domain
    a, b = _check_interval(transcript.T, interval)
    u = np.asarray(u_seq, dtype=float)
    if u.ndim == 1:
        u = np.tile(u, (transcript.T, 1))
    if len(u) < b:
        raise ValueError("comparator sequence shorter than the interval")
    u = u[a - 1 : b]
    if not np.all(domain.contains(u, MEMBERSHIP_TOL)):
        raise ValueError("comparator sequence leaves the domain")
    comp = sum(float(f.value(ut)) for f, ut in zip(transcript.losses[a - 1 : b], u))
    return float(np.sum(transcript.true_losses[a - 1 : b]) - comp)


def full_dynamic_regret(transcript: GameTranscript, domain: ConvexDomain | None = None, interval=None, solver_cfg=None) -> float:
    """Regret against the per-round minimizers (comparator set ``K^T``)."""
    domain = domain or transcript.domain
    a, b = _check_interval(transcript.T, interval)
    comp = sum(comparator_solve([f], domain, solver_cfg).value for f in transcript.losses[a - 1 : b])
    return float(np.sum(transcript.true_losses[a - 1 : b]) - comp)


class AdaptiveResult(NamedTuple):
    value: float
    interval: tuple
    exact: bool


def _dyadic_endpoints(T):
    starts = sorted({1} | {2**j + 1 for j in range(int(math.log2(T)) + 1) if 2**j + 1 <= T})
    ends = sorted({T} | {2**j for j in range(int(math.log2(T)) + 1) if 2**j <= T})
    return starts, ends


def adaptive_regret(transcript: GameTranscript, domain: ConvexDomain | None = None, solver_cfg=None, cap: int = 2**12, generic_cap: int = 64) -> AdaptiveResult:
    """``max_{a <= b}`` of interval static regret, with its argmax interval.

    The scan over all intervals is exact up to ``T = cap`` for linear and
    quadratic losses (prefix sums, closed-form minimizers) and up to
    ``generic_cap`` otherwise.  Longer games scan dyadic endpoints only and
    report ``exact=False``: the value is then a lower bound.
    """
    domain = domain or transcript.domain
    T = transcript.T
    forms = [f.quadratic_form() for f in transcript.losses]
    closed = all(q is not None for q in forms)
    Lc = np.concatenate([[0.0], np.cumsum(transcript.true_losses)])

    if closed:
        d = domain.ambient_dim
        S = np.concatenate([[0.0], np.cumsum([q[0] for q in forms])])
        B = np.vstack([np.zeros(d), np.cumsum([np.broadcast_to(q[1], (d,)) for q in forms], axis=0)])
        C = np.concatenate([[0.0], np.cumsum([q[2] for q in forms])])

        def scan(a, ends):
            ends = np.asarray(ends)
            s = S[ends] - S[a - 1]
            bb = B[ends] - B[a - 1]
            cc = C[ends] - C[a - 1]
            pos = s > 0
            u = np.empty_like(bb)
            if pos.any():
                u[pos] = domain.project(-bb[pos] / s[pos, None])
            if (~pos).any():
                u[~pos] = domain.linear_minimizer(bb[~pos])
            comp = 0.5 * s * np.sum(u * u, axis=1) + np.sum(bb * u, axis=1) + cc
            return Lc[ends] - Lc[a - 1] - comp
    else:

        def scan(a, ends):
            return np.array([Lc[b] - Lc[a - 1] - comparator_solve(transcript.losses[a - 1 : b], domain, solver_cfg).value for b in ends])

    exact = T <= (cap if closed else generic_cap)
    if exact:
        starts = range(1, T + 1)
    else:
        starts, dy_ends = _dyadic_endpoints(T)
    best, arg = -math.inf, (1, T)
    for a in starts:
        ends = np.arange(a, T + 1) if exact else [e for e in dy_ends if e >= a]
        if len(ends) == 0:
            continue
        vals = scan(a, ends)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), (a, int(ends[i]))
    return AdaptiveResult(best, arg, exact)


def path_length(u_seq) -> float:
    """``sum_t ||u_t - u_{t+1}||``."""
    u = np.asarray(u_seq, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if len(u) < 1:
        raise ValueError("empty sequence")
    return float(np.sum(np.linalg.norm(np.diff(u, axis=0), axis=1)))
