"""Invariant suites run by ``ocometa check``.

Each suite returns a :class:`SuiteResult` holding named boolean checks and
the measured quantities behind them.  ``fault`` injects a known defect so a
suite can be shown to detect it; the only fault so far is
``delta-gt-alpha``, which lets smoothing queries use ``delta = 2 alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agents import OGD, Ader, StepSchedule
from .arena import (
    SequenceAdversary,
    SignFollower,
    build_adversary,
    linearize_adversary,
    run_game,
    static_regret,
)
from .geometry import Ball, Box, Simplex, sample_unit_ball, sample_unit_sphere
from .losses import (
    AbsLoss,
    LinearLoss,
    NormLoss,
    QuadraticLoss,
    almost_lipschitz_bound,
    make_gradient_oracle,
    make_value_oracle,
    one_point_estimate,
    quadratize,
    smoothed_eval,
    two_point_estimate,
)
from .meta import fts

FAULTS = ("delta-gt-alpha",)


@dataclass
class SuiteResult:
    name: str
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    def check(self, label: str, ok, **metrics):
        self.checks[label] = bool(ok)
        for key, val in metrics.items():
            self.metrics[f"{label}.{key}"] = val
        return bool(ok)

    def failures(self):
        return [k for k, ok in self.checks.items() if not ok]


def _domains():
    return {
        "box": Box([0.0, 0.0], [1.0, 1.0]),
        "ball": Ball([0.0, 0.0], 1.0),
        "simplex": Simplex(3),
    }


def _cloud(domain, rng, n, spread=2.0):
    """Points scattered around the domain, most of them outside it."""
    coords = rng.normal(scale=spread * domain.diameter, size=(n, domain.ambient_dim))
    return domain.interior_center + coords


# -- geometry ----------------------------------------------------------------


def suite_projection(seed=0, fault=None) -> SuiteResult:
    res = SuiteResult("projection")
    rng = np.random.default_rng(seed)
    for name, dom in _domains().items():
        x = _cloud(dom, rng, 1000)
        p = dom.project(x)
        y = dom.sample(rng, 1000)
        worst = float(np.max(np.sum((x - p) * (y - p), axis=1)))
        res.check(f"{name}.optimality", worst <= 1e-9, worst=worst)
        res.check(f"{name}.idempotent", np.array_equal(dom.project(p), p))
        res.check(f"{name}.member", np.all(dom.contains(p)))
        spread = float(np.max(np.linalg.norm(y[:, None] - y[None, :200], axis=2)))
        res.check(f"{name}.diameter", spread <= dom.diameter + 1e-12, spread=spread)
        gram = dom.hull_basis @ dom.hull_basis.T
        res.check(f"{name}.orthonormal", np.max(np.abs(gram - np.eye(dom.hull_dim))) <= 1e-10)
        v = sample_unit_sphere(dom, rng, 1000)
        ring = dom.interior_center + dom.interior_radius * v
        res.check(f"{name}.inner-ball", np.all(dom.contains(ring)))
    return res


def suite_shrink(seed=0, fault=None) -> SuiteResult:
    res = SuiteResult("shrink")
    rng = np.random.default_rng(seed)
    for name, dom in _domains().items():
        r = dom.interior_radius
        a1, a2 = 0.2 * r, 0.6 * r
        inner, outer = dom.shrink(a2), dom.shrink(a1)
        pts = inner.sample(rng, 1000)
        res.check(f"{name}.nesting", np.all(outer.contains(pts)))
        res.check(f"{name}.inside-base", np.all(dom.contains(pts)))
        x = dom.sample(rng, 1000)
        mapped = (1 - a2 / r) * x + (a2 / r) * dom.interior_center
        res.check(f"{name}.homothety", np.all(inner.contains(mapped)))
        cloud = _cloud(dom, rng, 100)
        res.check(f"{name}.alpha0-identity", np.allclose(dom.shrink(0.0).project(cloud), dom.project(cloud), atol=1e-12))
    box = Box([0.0, 0.0], [1.0, 1.0]).shrink(0.25)
    corners = box.project(np.array([[-5.0, -5.0], [5.0, 5.0]]))
    res.check("box-example", np.allclose(corners, [[0.25, 0.25], [0.75, 0.75]]))
    return res


def query_safety_ratio(fault=None) -> float:
    return 2.0 if fault == "delta-gt-alpha" else 1.0


def suite_query_safety(seed=0, fault=None) -> SuiteResult:
    """``x + delta v`` stays in ``K`` for ``x`` in the alpha-shrunk set."""
    res = SuiteResult("query-safety")
    rng = np.random.default_rng(seed)
    ratio = query_safety_ratio(fault)
    for name, dom in _domains().items():
        r = dom.interior_radius
        for frac in (0.1, 0.5, 0.9):
            alpha = frac * r
            delta = min(ratio * alpha, 0.999 * r) if ratio > 1 else alpha
            shrunk = dom.shrink(alpha)
            # boundary-heavy sample of the shrunk set
            x = shrunk.project(_cloud(shrunk, rng, 10_000, spread=0.5))
            v = sample_unit_sphere(dom, rng, 10_000)
            bad = int(np.sum(~dom.contains(x + delta * v, 1e-9)))
            res.check(f"{name}.alpha={frac}r", bad == 0, violations=bad)
    return res


def suite_sampler(seed=0, fault=None) -> SuiteResult:
    res = SuiteResult("sampler")
    rng = np.random.default_rng(seed)
    n = 100_000
    for name, dom in _domains().items():
        k = dom.hull_dim
        v = sample_unit_sphere(dom, rng, n)
        res.check(f"{name}.unit", np.max(np.abs(np.linalg.norm(v, axis=1) - 1)) <= 1e-12)
        coords = v @ dom.hull_basis.T
        res.check(f"{name}.in-hull", np.max(np.abs(v - coords @ dom.hull_basis)) <= 1e-12)
        mean_norm = float(np.linalg.norm(v.mean(axis=0)))
        res.check(f"{name}.mean", mean_norm <= 0.02, value=mean_norm)
        cov_err = float(np.max(np.abs(coords.T @ coords / n - np.eye(k) / k)))
        res.check(f"{name}.isotropy", cov_err <= 0.01, value=cov_err)
        b = sample_unit_ball(dom, rng, n)
        m2 = float(np.mean(np.sum(b * b, axis=1)))
        res.check(f"{name}.ball-moment", abs(m2 - k / (k + 2)) <= 0.01, value=m2, expected=k / (k + 2))
        res.check(f"{name}.ball-radius", np.max(np.linalg.norm(b, axis=1)) <= 1 + 1e-12)
    return res


# -- losses, oracles, estimators ----------------------------------------------


def suite_losses(seed=0, fault=None) -> SuiteResult:
    """Bounds, Lipschitz constants, mu-subgradients and quadratization dominance."""
    res = SuiteResult("losses")
    rng = np.random.default_rng(seed)
    dom = Ball([0.0, 0.0], 1.0)
    losses = {
        "linear": LinearLoss([0.6, -0.8], 0.1),
        "quadratic": QuadraticLoss([0.3, -0.2], 2.0),
        "abs": AbsLoss([0.1, 0.4], 1.0),
        "norm": NormLoss([-0.5, 0.0], 1.0),
    }
    x, y = dom.sample(rng, 1000), dom.sample(rng, 1000)
    for name, f in losses.items():
        fx, fy = f.value(x), f.value(y)
        res.check(f"{name}.M0", np.max(np.abs(fx)) <= f.bound(dom) + 1e-12)
        lip = np.abs(fx - fy) <= f.lipschitz(dom) * np.linalg.norm(x - y, axis=1) + 1e-12
        res.check(f"{name}.M1", np.all(lip))
        o = np.array([f.subgradient(xi, f.mu) for xi in x])
        gap = fy - fx - (np.sum(o * (y - x), axis=1) + f.mu / 2 * np.sum((y - x) ** 2, axis=1))
        res.check(f"{name}.mu-subgradient", np.min(gap) >= -1e-9, worst=float(np.min(gap)))
        if f.mu > 0:
            worst = math.inf
            for xi in x[:50]:
                q = quadratize(xi, f.subgradient(xi, f.mu), f.mu)
                worst = min(worst, float(np.min((q.value(xi) - q.value(y)) - (f.value(xi) - f.value(y)))))
            res.check(f"{name}.quadratization-dominance", worst >= -1e-9, worst=worst)
    return res


def suite_oracles(seed=0, fault=None) -> SuiteResult:
    res = SuiteResult("oracles")
    rng = np.random.default_rng(seed)
    dom = Ball([0.0, 0.0], 1.0)
    f = QuadraticLoss([0.3, -0.2], 1.0)
    x = np.array([0.5, 0.1])
    n = 100_000
    for noise in ({"type": "uniform", "width": 0.2}, {"type": "bounded-gaussian", "sigma": 0.1, "clip": 0.25}):
        Q0 = make_value_oracle(f, noise, domain=dom)
        obs = np.array([Q0(x, rng) for _ in range(n)])
        se = obs.std(ddof=1) / math.sqrt(n)
        res.check(f"value.{noise['type']}.unbiased", abs(obs.mean() - f.value(x)) <= 4 * se)
        res.check(f"value.{noise['type']}.bounded", np.max(np.abs(obs)) <= Q0.bound)
        Q1 = make_gradient_oracle(f, 0.5, noise, domain=dom)
        obs = np.array([Q1(x, rng) for _ in range(n)])
        se = obs.std(axis=0, ddof=1) / math.sqrt(n)
        res.check(f"gradient.{noise['type']}.unbiased", np.all(np.abs(obs.mean(axis=0) - f.subgradient(x, 0.5)) <= 4 * se))
        res.check(f"gradient.{noise['type']}.bounded", np.max(np.linalg.norm(obs, axis=1)) <= Q1.bound)
    Q = make_value_oracle(f, None, domain=dom)
    res.check("deterministic.repeat", Q(x, rng) == Q(x, rng) == f.value(x))
    return res


def _fd_smoothed_gradient(f, dom, delta, x, h, n, seed):
    """Central differences of the Monte-Carlo smoothed function, with common
    random numbers across the two sides; returns (gradient, standard error)
    in ambient coordinates."""
    grad, se2 = np.zeros(dom.ambient_dim), np.zeros(dom.ambient_dim)
    for b in dom.hull_basis:
        plus, _ = smoothed_eval(f, dom, delta, x + h * b, n, np.random.default_rng(seed))
        minus, _ = smoothed_eval(f, dom, delta, x - h * b, n, np.random.default_rng(seed))
        V = sample_unit_ball(dom, np.random.default_rng(seed), n)
        diffs = (f.value(x + h * b + delta * V) - f.value(x - h * b + delta * V)) / (2 * h)
        grad += (plus - minus) / (2 * h) * b
        se2 += (np.std(diffs, ddof=1) / math.sqrt(n)) ** 2 * b**2
    return grad, np.sqrt(se2)


def suite_estimators(seed=0, fault=None, n=100_000) -> SuiteResult:
    """One-point mean against finite differences of the smoothed function,
    and the norm bounds of both estimators."""
    res = SuiteResult("estimators")
    rng = np.random.default_rng(seed)
    dom = Ball([0.0, 0.0], 1.0)
    k = dom.hull_dim
    delta, alpha, h = 0.2, 0.3, 0.01
    f = NormLoss([0.2, -0.1], 1.0)
    Q = make_value_oracle(f, {"type": "uniform", "width": 0.2}, domain=dom)
    shrunk = dom.shrink(alpha)
    pts = shrunk.sample(rng, 5)
    worst_z = 0.0
    for i, x in enumerate(pts):
        V = sample_unit_sphere(dom, rng, n)
        obs = f.value(x + delta * V) + Q.noise.sample(rng, n)
        est = (k / delta) * obs[:, None] * V
        mean = est.mean(axis=0)
        se_mc = est.std(axis=0, ddof=1) / math.sqrt(n)
        fd, se_fd = _fd_smoothed_gradient(f, dom, delta, x, h, n, seed + 1000 + i)
        z = np.abs(mean - fd) / np.sqrt(se_mc**2 + se_fd**2)
        worst_z = max(worst_z, float(z.max()))
        res.check(f"one-point-unbiased.point{i}", np.all(z <= 4), z=float(z.max()))
        norms = np.linalg.norm(est, axis=1)
        res.check(f"one-point-bound.point{i}", np.all(norms <= k / delta * Q.bound + 1e-12), violations=int(np.sum(norms > k / delta * Q.bound + 1e-12)))
    res.metrics["one-point-unbiased.worst_z"] = worst_z

    # two-point estimator on a Lipschitz function, queries anywhere in K_delta
    g = AbsLoss([0.1, 0.3], 1.0)
    M1 = g.lipschitz(dom)
    kd = dom.shrink(delta)
    X = kd.project(_cloud(kd, rng, n, spread=0.5))
    V = sample_unit_sphere(dom, rng, n)
    est = (k / (2 * delta)) * (g.value(X + delta * V) - g.value(X - delta * V))[:, None] * V
    viol = int(np.sum(np.linalg.norm(est, axis=1) > k * M1 + 1e-12))
    res.check("two-point-bound", viol == 0, violations=viol, draws=n)
    # spot-check the scalar helpers against the vectorized formulas
    res.check("helpers", np.allclose(one_point_estimate(k, delta, 0.3, V[0]), k / delta * 0.3 * V[0])
              and np.allclose(two_point_estimate(k, delta, 0.5, 0.1, V[0]), k / (2 * delta) * 0.4 * V[0]))
    return res


def suite_smoothing(seed=0, fault=None) -> SuiteResult:
    res = SuiteResult("smoothing")
    rng = np.random.default_rng(seed)
    dom = Ball([0.0, 0.0], 1.0)
    n = 20_000
    delta, alpha = 0.1, 0.2
    shrunk = dom.shrink(alpha)
    lipschitz = {"abs": AbsLoss([0.2, 0.1], 1.0), "norm": NormLoss([0.0, 0.3], 1.0), "linear": LinearLoss([0.3, 0.4])}
    for name, f in lipschitz.items():
        worst = -math.inf
        for x in shrunk.sample(rng, 20):
            fh, se = smoothed_eval(f, dom, delta, x, n, rng)
            worst = max(worst, abs(fh - f.value(x)) - (delta * f.lipschitz(dom) + 4 * se))
        res.check(f"lipschitz.{name}", worst <= 0, slack=worst)
    # convex bounded case, bound 2 M0 delta / alpha
    f = QuadraticLoss([0.5, 0.0], 1.0)
    M0 = f.bound(dom)
    worst = -math.inf
    for x in shrunk.sample(rng, 20):
        fh, se = smoothed_eval(f, dom, delta, x, n, rng)
        worst = max(worst, abs(fh - f.value(x)) - (2 * M0 * delta / alpha + 4 * se))
    res.check("convex-bounded", worst <= 0, slack=worst)
    # squared norm: closed form |x|^2 + delta^2 k / (k + 2)
    sq = QuadraticLoss([0.0, 0.0], 2.0)
    x = np.array([0.3, -0.4])
    fh, se = smoothed_eval(sq, dom, delta, x, 100_000, rng)
    res.check("squared-norm-moment", abs(fh - (0.25 + delta**2 / 2)) <= 4 * se, value=fh)
    # almost-Lipschitz property for f = |x| on the unit ball
    nf = NormLoss([0.0, 0.0], 1.0)
    xs, ys = shrunk.sample(rng, 1000), dom.sample(rng, 1000)
    M0 = nf.bound(dom)
    ok = all(abs(nf.value(a) - nf.value(b)) <= almost_lipschitz_bound(M0, alpha, a, b) + 1e-12 for a, b in zip(xs, ys))
    res.check("almost-lipschitz", ok)
    return res


# -- game-level equivalences ---------------------------------------------------


def _ogd(domain, eta=None, T=None, M1=1.0):
    if eta is not None:
        return OGD(domain, StepSchedule("fixed", eta=eta))
    return OGD(domain, StepSchedule("convex", D=domain.diameter, M1=M1))


def suite_replay(seed=0, fault=None, T=500) -> SuiteResult:
    """A deterministic agent cannot tell a fully adaptive adversary from the
    oblivious replay of the losses it produced."""
    res = SuiteResult("replay")
    for name, dom in (("ball", Ball([0.0, 0.0], 1.0)), ("box", Box([-1.0, -1.0], [1.0, 1.0]))):
        adaptive = SignFollower(dom, 1.0)
        tr = run_game(_ogd(dom), adaptive, T, seed, seed + 1)
        replay = SequenceAdversary(dom, tr.losses)
        tr2 = run_game(_ogd(dom), replay, T, seed + 2, seed + 3)
        res.check(f"{name}.actions", np.array_equal(tr.actions, tr2.actions))
        r1, r2 = static_regret(tr).static_regret, static_regret(tr2).static_regret
        res.check(f"{name}.regret", r1 == r2, regret=r1)
    return res


def _intervals(T, rng, n=40):
    pairs = {(1, T), (1, 1), (T, T)}
    while len(pairs) < n:
        a, b = sorted(rng.integers(1, T + 1, size=2))
        pairs.add((int(a), int(b)))
    return sorted(pairs)


def suite_coupling(seed=0, fault=None, T=400) -> SuiteResult:
    """Semi-bandit agents see the same observations against an adversary and
    against its quadratization; interval regret can only grow."""
    res = SuiteResult("coupling")
    rng = np.random.default_rng(seed)
    dom = Ball([0.0, 0.0], 1.0)
    cases = {
        "quadratic-exact": ({"type": "quadratic-drift", "curvature": 1.0, "path_length": 1.0}, 1.0),
        "abs-exact": ({"type": "abs-drift", "M1": 1.0, "path_length": 1.0}, 0.0),
        "quadratic-noisy": ({"type": "quadratic-drift", "curvature": 1.0, "path_length": 1.0, "oracle": {"noise": {"type": "uniform", "width": 0.5}}}, 0.5),
    }
    for name, (spec, mu) in cases.items():
        base = build_adversary(spec, dom, T, seed)
        tr = run_game(_ogd(dom, M1=base.oracle_bound), base, T, seed, seed + 7)
        lin = linearize_adversary(base, mu)
        tr_lin = run_game(_ogd(dom, M1=base.oracle_bound), lin, T, seed, seed + 7)
        res.check(f"{name}.actions", np.array_equal(tr.actions, tr_lin.actions))
        if base.noise.stochastic:
            continue  # the ordering needs exact subgradients
        worst = math.inf
        for a, b in _intervals(T, rng):
            gap = static_regret(tr_lin, interval=(a, b)).static_regret - static_regret(tr, interval=(a, b)).static_regret
            worst = min(worst, gap)
        res.check(f"{name}.interval-ordering", worst >= -1e-6, worst=worst)
    return res


def suite_fts_identity(seed=0, fault=None, T=300) -> SuiteResult:
    """Against losses that already are quadratizations at the played point,
    FTS changes nothing, bitwise."""
    res = SuiteResult("fts-identity")
    dom = Ball([0.0, 0.0], 1.0)

    def pair(make_agent, make_adv, mu):
        plain = run_game(make_agent(), make_adv(), T, seed, seed + 1)
        wrapped = run_game(fts(make_agent(), mu), make_adv(), T, seed, seed + 1)
        return plain.actions, wrapped.actions

    for mu in (0.0, 0.5, 2.0):
        spec = {"type": "quadratic-drift", "curvature": max(mu, 1.0), "path_length": 1.0}
        base = build_adversary(spec, dom, T, seed)
        # each emitted loss is <o, y - x_t> + mu/2 |y - x_t|^2 with x_t the action
        make_adv = lambda: linearize_adversary(base, mu)
        M1 = make_adv().M1
        for name, make_agent in (("ogd", lambda: _ogd(dom, M1=M1)), ("ader", lambda: Ader(dom, T, M1))):
            a, b = pair(make_agent, make_adv, mu)
            res.check(f"{name}.mu={mu}", np.array_equal(a, b), gap=float(np.max(np.abs(a - b))))
    # plain strongly convex quadratics are not of that form: o + mu (y - x) and
    # mu (y - m) agree for a multi-query learner only up to rounding
    mu = 0.5
    adv = build_adversary({"type": "quadratic-drift", "curvature": mu, "path_length": 1.0}, dom, T, seed)
    a, b = pair(lambda: Ader(dom, T, adv.oracle_bound), lambda: adv, mu)
    gap = float(np.max(np.abs(a - b)))
    res.check("ader.plain-quadratic", gap <= 1e-9, gap=gap)
    return res


def suite_rates(seed=0, fault=None, seeds=32) -> SuiteResult:
    from .rates import EXPERIMENTS, evaluate

    res = SuiteResult("rates")
    for exp in EXPERIMENTS:
        out = evaluate(exp, seeds=seeds, master_seed=seed)
        res.check(exp.name, out.passed, slope=out.slope, r2=out.r2, growth=out.growth)
    return res


SUITES = {
    "projection": suite_projection,
    "shrink": suite_shrink,
    "query-safety": suite_query_safety,
    "sampler": suite_sampler,
    "losses": suite_losses,
    "oracles": suite_oracles,
    "estimators": suite_estimators,
    "smoothing": suite_smoothing,
    "replay": suite_replay,
    "coupling": suite_coupling,
    "fts-identity": suite_fts_identity,
    "rates": suite_rates,
}
# slow statistical sweeps run only when asked for by name
OPT_IN = ("rates",)
DEFAULT_SUITES = [name for name in SUITES if name not in OPT_IN]


def run_suites(names=None, seed=0, fault=None):
    for name in names or DEFAULT_SUITES:
        yield SUITES[name](seed=seed, fault=fault)
