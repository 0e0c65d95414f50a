"""Config-driven experiments: stacks of wrappers, horizon x seed sweeps,
aggregates and log-log slope fits.

A config is a nested mapping (loaded from YAML by the CLI)::

    domain:    {type: ball, dim: 2, radius: 1}
    adversary: {type: linear-random, M1: 1, oracle: {order: 1, noise: none}}
    agent:     {type: ogd, schedule: {kind: convex}}
    stack:     [stb, ogd]            # outermost first, base learner last
    regime:    convex                # selects the paper-default couplings
    T:         [256, 512, 1024, 2048]
    seeds:     {count: 32, master_seed: 0}
    regret:    [static]

Wrapper parameters are given inline, e.g. ``{stb: {alpha: 0.1, delta: 0.1}}``;
the string ``paper-default`` (also the default) is resolved per horizon.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import meta
from .agents import Ader, AgentError, OGD, StepSchedule
from .arena import (
    AdversaryError,
    GameAborted,
    SolverConfig,
    adaptive_regret,
    build_adversary,
    dynamic_regret,
    full_dynamic_regret,
    run_game,
    static_regret,
)
from .geometry import DomainError, build_domain
from .losses import LossError

BASE_AGENTS = ("ogd", "ader")
WRAPPERS = ("fts", "restrict", "fotzo", "stb", "fotzo_2p")
REGRET_KINDS = ("static", "dynamic", "full_dynamic", "adaptive")
REGIMES = ("convex", "strongly_convex")
PAPER_DEFAULT = "paper-default"


class ConfigError(ValueError):
    """A config field is missing or invalid; the message names the field."""


def paper_default(wrapper: str, T: int, regime: str) -> float:
    """Default smoothing/shrink parameter for a horizon ``T``."""
    if wrapper == "fotzo_2p":
        return 1.0 / T
    if regime == "strongly_convex":
        return 1.0 / math.sqrt(T * math.log(T))
    return T ** -0.25


# -- config ------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    domain: dict
    adversary: dict
    agent: dict
    stack: list = field(default_factory=list)
    regime: str = "convex"
    T: list = field(default_factory=lambda: [1000])
    seeds: int = 1
    master_seed: int = 0
    regret: list = field(default_factory=lambda: ["static"])
    solver: dict = field(default_factory=dict)
    adaptive_cap: int = 2**12
    timing: bool = False

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("config: expected a mapping at the top level")
        for key in ("domain", "adversary"):
            if not isinstance(raw.get(key), Mapping):
                raise ConfigError(f"{key}: required mapping is missing")
        stack = list(raw.get("stack") or [])
        agent = dict(raw.get("agent") or {})
        if stack and _entry_name(stack[-1]) in BASE_AGENTS:
            name, params = _split_entry(stack.pop())
            if agent.get("type", name) != name:
                raise ConfigError(f"stack: base learner {name!r} disagrees with agent.type {agent['type']!r}")
            agent = {**params, **agent, "type": name}
        agent.setdefault("type", "ogd")
        if agent["type"] not in BASE_AGENTS:
            raise ConfigError(f"agent.type: unknown learner {agent['type']!r} (expected one of {BASE_AGENTS})")
        for entry in stack:
            name = _entry_name(entry)
            if name not in WRAPPERS:
                raise ConfigError(f"stack: unknown wrapper {name!r} (expected one of {WRAPPERS})")

        Ts = raw.get("T", 1000)
        Ts = [Ts] if np.ndim(Ts) == 0 else list(Ts)
        try:
            Ts = [int(t) for t in Ts]
        except (TypeError, ValueError):
            raise ConfigError("T: horizons must be integers") from None
        if not Ts or min(Ts) < 1:
            raise ConfigError("T: horizons must be positive")
        if Ts != sorted(set(Ts)):
            raise ConfigError("T: horizon list must be strictly ascending")

        seeds = raw.get("seeds", 1)
        if isinstance(seeds, Mapping):
            count, master = seeds.get("count", 1), seeds.get("master_seed", 0)
        else:
            count, master = seeds, raw.get("master_seed", 0)
        if int(count) < 1:
            raise ConfigError("seeds.count: need at least one seed")

        regret = raw.get("regret", ["static"])
        regret = [regret] if isinstance(regret, str) else list(regret)
        for kind in regret:
            if kind not in REGRET_KINDS:
                raise ConfigError(f"regret: unknown kind {kind!r} (expected one of {REGRET_KINDS})")
        regime = raw.get("regime", "convex")
        if regime not in REGIMES:
            raise ConfigError(f"regime: expected one of {REGIMES}, got {regime!r}")

        cfg = cls(
            domain=dict(raw["domain"]),
            adversary=dict(raw["adversary"]),
            agent=agent,
            stack=stack,
            regime=regime,
            T=Ts,
            seeds=int(count),
            master_seed=int(master),
            regret=regret,
            solver=dict(raw.get("solver") or {}),
            adaptive_cap=int(raw.get("adaptive_cap", 2**12)),
            timing=bool(raw.get("timing", False)),
        )
        cfg.validate()
        return cfg

    def to_mapping(self) -> dict:
        return {
            "domain": self.domain,
            "adversary": self.adversary,
            "agent": self.agent,
            "stack": self.stack,
            "regime": self.regime,
            "T": self.T,
            "seeds": {"count": self.seeds, "master_seed": self.master_seed},
            "regret": self.regret,
            "solver": self.solver,
            "adaptive_cap": self.adaptive_cap,
            "timing": self.timing,
        }

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig(**self.solver)
        except TypeError as exc:
            raise ConfigError(f"solver: {exc}") from None

    def validate(self) -> None:
        """Build every horizon's game once (without playing it) so parameter
        rules such as ``delta <= alpha < r`` are checked per ``T``."""
        self.solver_config()
        for T in self.T:
            build_cell(self, T, 0)


def _entry_name(entry) -> str:
    if isinstance(entry, str):
        return entry
    if isinstance(entry, Mapping) and len(entry) == 1:
        return next(iter(entry))
    raise ConfigError(f"stack: entries are names or single-key mappings, got {entry!r}")


def _split_entry(entry):
    name = _entry_name(entry)
    params = {} if isinstance(entry, str) else dict(entry[name] or {})
    return name, params


# -- building a game ---------------------------------------------------------


def cell_seeds(master_seed: int, T: int, seed_idx: int):
    """Independent (adversary, agent, oracle) seed sequences for one cell."""
    return np.random.SeedSequence([master_seed, T, seed_idx]).spawn(3)


def _param(params, key, wrapper, T, regime, default=PAPER_DEFAULT):
    val = params.get(key, default)
    if val == PAPER_DEFAULT:
        return paper_default(wrapper, T, regime)
    try:
        return float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"stack.{wrapper}.{key}: expected a number or {PAPER_DEFAULT!r}, got {val!r}") from None


def _resolve_stack(cfg: ExperimentConfig, T: int, adversary):
    """Numeric wrapper parameters (outermost first) and the gradient bound the
    base learner ends up seeing."""
    resolved = []
    k = adversary.domain.hull_dim
    D = adversary.domain.diameter
    bound = adversary.oracle_bound
    for entry in cfg.stack:
        name, params = _split_entry(entry)
        unknown = set(params) - {"alpha", "delta", "mu", "lipschitz"}
        if unknown:
            raise ConfigError(f"stack.{name}: unknown parameters {sorted(unknown)}")
        if name == "fts":
            mu = params.get("mu", 0.0)
            mu = adversary.mu if mu == "auto" else float(mu)
            resolved.append((name, {"mu": mu}))
            bound = bound + mu * D
        elif name == "restrict":
            if "alpha" not in params:
                raise ConfigError("stack.restrict.alpha: required")
            resolved.append((name, {"alpha": _param(params, "alpha", name, T, cfg.regime)}))
        elif name in ("fotzo", "stb"):
            delta = _param(params, "delta", name, T, cfg.regime)
            alpha = _param(params, "alpha", name, T, cfg.regime)
            resolved.append((name, {"alpha": alpha, "delta": delta}))
            bound = k / delta * bound
        elif name == "fotzo_2p":
            delta = _param(params, "delta", name, T, cfg.regime)
            lip = float(params.get("lipschitz", adversary.M1))
            resolved.append((name, {"delta": delta, "lipschitz": lip}))
            bound = k * lip
    return resolved, bound


def _schedule(spec, domain, bound, adversary) -> StepSchedule:
    spec = dict(spec or {})
    kind = spec.pop("kind", "convex")
    auto = {"D": domain.diameter, "M1": bound, "mu": adversary.mu}
    args = {key: (auto[key] if val in ("auto", None) else val) for key, val in spec.items()}
    if kind == "convex":
        args.setdefault("D", auto["D"])
        args.setdefault("M1", auto["M1"])
    elif kind == "strongly_convex":
        args.setdefault("mu", auto["mu"])
    try:
        return StepSchedule(kind, **args)
    except (TypeError, AgentError) as exc:
        raise ConfigError(f"agent.schedule: {exc}") from None


def build_agent(cfg: ExperimentConfig, T: int, adversary):
    resolved, bound = _resolve_stack(cfg, T, adversary)
    domain = adversary.domain
    spec = dict(cfg.agent)
    kind = spec.pop("type")
    try:
        if kind == "ogd":
            unknown = set(spec) - {"schedule", "x0"}
            if unknown:
                raise ConfigError(f"agent: unknown fields {sorted(unknown)}")
            agent = OGD(domain, _schedule(spec.get("schedule"), domain, bound, adversary), spec.get("x0"))
        else:
            M1 = spec.get("M1", "auto")
            agent = Ader(domain, T, bound if M1 == "auto" else float(M1))
        for name, params in reversed(resolved):
            agent = getattr(meta, name)(agent, **params)
    except (AgentError, DomainError) as exc:
        raise ConfigError(f"stack: {exc}") from None
    return agent


def build_cell(cfg: ExperimentConfig, T: int, seed_idx: int):
    """Domain, adversary, agent and the agent/oracle seed sequences of one cell."""
    adv_ss, agent_ss, oracle_ss = cell_seeds(cfg.master_seed, T, seed_idx)
    try:
        domain = build_domain(cfg.domain)
    except DomainError as exc:
        raise ConfigError(f"domain: {exc}") from None
    try:
        adversary = build_adversary(cfg.adversary, domain, T, adv_ss)
    except (AdversaryError, LossError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"adversary: {exc}") from None
    agent = build_agent(cfg, T, adversary)
    if agent.order != adversary.oracle_order:
        raise ConfigError(
            f"adversary.oracle.order: the stack consumes order-{agent.order} feedback, the oracle is order {adversary.oracle_order}"
        )
    if agent.requires_deterministic_oracle and adversary.oracle_kind != "deterministic":
        raise ConfigError("adversary.oracle.noise: fotzo_2p needs a deterministic value oracle (noise: none)")
    if "dynamic" in cfg.regret and getattr(adversary, "comparators", None) is None:
        raise ConfigError(f"regret: dynamic regret needs a drifting adversary, {adversary.name!r} has no reference path")
    return domain, adversary, agent, agent_ss, oracle_ss


# -- running -----------------------------------------------------------------


@dataclass
class CellResult:
    T: int
    seed: int
    values: dict
    runtime_ms: float | None
    error: str | None = None
    transcript: Any = None
    extras: dict = field(default_factory=dict)


def measure(transcript, adversary, kinds, solver_cfg, adaptive_cap=2**12):
    values, extras = {}, {}
    for kind in kinds:
        if kind == "static":
            rep = static_regret(transcript, solver_cfg=solver_cfg)
            values[kind] = rep.static_regret
            extras["comparator"] = rep.comparator_argmin.tolist()
            extras["comparator_converged"] = rep.exact
        elif kind == "dynamic":
            u = adversary.comparator_sequence()[: transcript.T]
            values[kind] = dynamic_regret(transcript, u)
        elif kind == "full_dynamic":
            values[kind] = full_dynamic_regret(transcript, solver_cfg=solver_cfg)
        elif kind == "adaptive":
            res = adaptive_regret(transcript, solver_cfg=solver_cfg, cap=adaptive_cap)
            values[kind] = res.value
            extras["adaptive_interval"] = list(res.interval)
            extras["adaptive_exact"] = res.exact
    return values, extras


def run_cell(cfg: ExperimentConfig, T: int, seed_idx: int, keep_transcript: bool = False) -> CellResult:
    _, adversary, agent, agent_ss, oracle_ss = build_cell(cfg, T, seed_idx)
    start = time.perf_counter()
    try:
        tr = run_game(
            agent,
            adversary,
            T,
            np.random.default_rng(agent_ss),
            np.random.default_rng(oracle_ss),
            record_queries=keep_transcript,
        )
        values, extras = measure(tr, adversary, cfg.regret, cfg.solver_config(), cfg.adaptive_cap)
    except (GameAborted, AgentError, LossError) as exc:
        return CellResult(T, seed_idx, {}, None, f"{type(exc).__name__}: {exc}")
    elapsed = (time.perf_counter() - start) * 1e3 if cfg.timing else None
    return CellResult(T, seed_idx, values, elapsed, None, tr if keep_transcript else None, extras)


def _cell_task(args):
    raw, T, idx = args
    return run_cell(ExperimentConfig.from_mapping(raw), T, idx)


def sweep(cfg: ExperimentConfig, jobs: int = 1, progress=None) -> list:
    """Run every ``(T, seed)`` cell; results come back sorted by cell key."""
    tasks = [(cfg.to_mapping(), T, i) for T in cfg.T for i in range(cfg.seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = []
        for T, i in ((T, i) for _, T, i in tasks):
            results.append(run_cell(cfg, T, i))
            if progress is not None:
                progress(results[-1])
    return sorted(results, key=lambda r: (r.T, r.seed))


def sweep_rows(cfg: ExperimentConfig, results) -> list:
    """Flat ``(T, seed, regret_kind, value, runtime_ms)`` rows; failed cells
    carry a NaN value."""
    rows = []
    for res in results:
        for kind in cfg.regret:
            rows.append((res.T, res.seed, kind, res.values.get(kind, math.nan), res.runtime_ms))
    return rows


# -- aggregates and slopes ---------------------------------------------------


class SlopeFitError(ValueError):
    pass


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


def fit_slope(points) -> SlopeFit:
    """Ordinary least squares through ``(log2 T, log2 regret)`` points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise SlopeFitError("fit_slope needs at least 3 (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise SlopeFitError("fit_slope: non-finite coordinates")
    x, y = pts[:, 0], pts[:, 1]
    sxx = np.sum((x - x.mean()) ** 2)
    if sxx <= 1e-12 * max(1.0, float(np.abs(x).max())) ** 2:
        raise SlopeFitError("fit_slope: degenerate abscissae (all x equal)")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((y - intercept - slope * x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return SlopeFit(slope, intercept, r2)


def fit_rate(Ts, means) -> SlopeFit:
    """Slope of ``log2 mean`` against ``log2 T``; refuses non-positive means."""
    Ts = np.asarray(Ts, dtype=float)
    means = np.asarray(means, dtype=float)
    bad = [int(T) for T, m in zip(Ts, means) if not m > 0]
    if bad:
        raise SlopeFitError(f"mean regret is not positive at T={bad}; a log-log fit is undefined")
    return fit_slope(np.column_stack([np.log2(Ts), np.log2(means)]))


@dataclass
class Aggregate:
    T: int
    regret_kind: str
    n: int
    failed: int
    mean: float
    se: float
    p90: float


def aggregate(rows) -> list:
    """Per ``(T, kind)`` mean, standard error ``sd / sqrt(n)`` and 0.9-quantile
    over the seeds that finished."""
    groups: dict = {}
    for T, seed, kind, value, _rt in rows:
        groups.setdefault((T, kind), []).append((seed, value))
    out = []
    for (T, kind), vals in sorted(groups.items()):
        # sum in seed order so the result does not depend on row order
        arr = np.asarray([v for _, v in sorted(vals, key=lambda sv: sv[0])], dtype=float)
        ok = arr[np.isfinite(arr)]
        n = ok.size
        mean = float(ok.mean()) if n else math.nan
        se = float(ok.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        p90 = float(np.quantile(ok, 0.9)) if n else math.nan
        out.append(Aggregate(T, kind, n, int(arr.size - n), mean, se, p90))
    return out


def slope_by_kind(aggs) -> dict:
    """``{kind: SlopeFit or error message}`` over the aggregated means."""
    kinds = sorted({a.regret_kind for a in aggs})
    fits = {}
    for kind in kinds:
        sel = [a for a in aggs if a.regret_kind == kind]
        try:
            fits[kind] = fit_rate([a.T for a in sel], [a.mean for a in sel])
        except SlopeFitError as exc:
            fits[kind] = str(exc)
    return fits
