"""Rate experiments: log-log regret slopes of the standard stacks.

Each experiment is a sweep config plus the window its fitted slope should
fall in.  All run on the unit disc with ``T = 2^8 .. 2^13``.  Every
stochastic oracle uses the same noise, uniform on ``[-0.5, 0.5]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .experiment import ExperimentConfig, SlopeFitError, aggregate, fit_rate, sweep, sweep_rows

HORIZONS = [2**k for k in range(8, 14)]
DISC = {"type": "ball", "dim": 2, "radius": 1.0}
NOISE = {"type": "uniform", "width": 1.0}

# minimizer frozen at distance 1/2 from the center
_FROZEN = {"type": "quadratic-drift", "curvature": 1.0, "path_length": 0.0, "radius": 0.5}
_DRIFT = {"type": "quadratic-drift", "curvature": 1.0, "path_length": 2.0, "radius": 0.5}
_STRONG = {"type": "ogd", "schedule": {"kind": "strongly_convex"}}


@dataclass
class RateExperiment:
    name: str
    description: str
    config: dict
    kind: str
    slope_window: tuple
    min_r2: float | None = None
    max_growth: float | None = None  # regret(2^13) / regret(2^10)

    def build(self, seeds: int = 32, master_seed: int = 0, horizons=None) -> ExperimentConfig:
        raw = {
            "domain": DISC,
            "T": list(horizons or HORIZONS),
            "seeds": {"count": seeds, "master_seed": master_seed},
            "regret": [self.kind],
            **self.config,
        }
        return ExperimentConfig.from_mapping(raw)


@dataclass
class RateOutcome:
    experiment: RateExperiment
    Ts: list
    means: list
    ses: list
    slope: float | None
    r2: float | None
    growth: float | None
    checks: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    def summary(self) -> str:
        if self.error:
            return f"{self.experiment.name}: {self.error}"
        parts = [f"slope={self.slope:.3f} in [{self.experiment.slope_window[0]}, {self.experiment.slope_window[1]}]"]
        if self.experiment.min_r2 is not None:
            parts.append(f"r2={self.r2:.3f} >= {self.experiment.min_r2}")
        if self.experiment.max_growth is not None:
            parts.append(f"growth={self.growth:.3f} <= {self.experiment.max_growth}")
        return f"{self.experiment.name}: " + ", ".join(parts)


EXPERIMENTS = [
    RateExperiment(
        "ogd-convex",
        "OGD, zero-mean random linear losses, exact gradients",
        {"adversary": {"type": "linear-random", "M1": 1.0}, "agent": {"type": "ogd", "schedule": {"kind": "convex"}}},
        "static",
        (0.40, 0.60),
        min_r2=0.95,
    ),
    RateExperiment(
        "ogd-strongly-convex",
        "OGD with 1/(mu t) steps, frozen quadratic, noisy gradients",
        {"adversary": {**_FROZEN, "oracle": {"order": 1, "noise": NOISE}}, "agent": _STRONG, "regime": "strongly_convex"},
        "static",
        (-float("inf"), 0.20),
        max_growth=1.5,
    ),
    RateExperiment(
        "stb-ogd-convex",
        "STB(OGD), biased random linear losses, noisy values",
        {
            "adversary": {"type": "linear-random", "M1": 1.0, "bias": 0.5, "oracle": {"order": 0, "noise": NOISE}},
            "agent": {"type": "ogd", "schedule": {"kind": "convex"}},
            "stack": ["stb"],
        },
        "static",
        (0.65, 0.85),
    ),
    RateExperiment(
        "stb-ogd-strongly-convex",
        "STB(OGD) with 1/(mu t) steps, frozen quadratic, noisy values",
        {"adversary": {**_FROZEN, "oracle": {"order": 0, "noise": NOISE}}, "agent": _STRONG, "stack": ["stb"], "regime": "strongly_convex"},
        "static",
        (0.45, 0.70),
    ),
    RateExperiment(
        "fotzo2p-ogd-convex",
        "FOTZO-2P(OGD), zero-mean random linear losses, exact values",
        {"adversary": {"type": "linear-random", "M1": 1.0, "oracle": {"order": 0}}, "agent": {"type": "ogd", "schedule": {"kind": "convex"}}, "stack": ["fotzo_2p"]},
        "static",
        (0.40, 0.60),
    ),
    RateExperiment(
        "fotzo2p-ogd-strongly-convex",
        "FOTZO-2P(OGD) with 1/(mu t) steps, frozen quadratic, exact values",
        {"adversary": {**_FROZEN, "oracle": {"order": 0}}, "agent": _STRONG, "stack": ["fotzo_2p"], "regime": "strongly_convex"},
        "static",
        (-float("inf"), 0.20),
        max_growth=1.5,
    ),
    RateExperiment(
        "fts-ader-dynamic",
        "FTS(Ader), drifting quadratic with path length 2, noisy gradients",
        {"adversary": {**_DRIFT, "oracle": {"order": 1, "noise": NOISE}}, "agent": {"type": "ader"}, "stack": ["fts"]},
        "dynamic",
        (0.40, 0.65),
    ),
    RateExperiment(
        "stb-fts-ader-dynamic",
        "STB(FTS(Ader)), drifting quadratic with path length 2, noisy values",
        {"adversary": {**_DRIFT, "oracle": {"order": 0, "noise": NOISE}}, "agent": {"type": "ader"}, "stack": ["stb", "fts"]},
        "dynamic",
        (0.65, 0.90),
    ),
]

BY_NAME = {e.name: e for e in EXPERIMENTS}


def evaluate(exp: RateExperiment, seeds: int = 32, master_seed: int = 0, jobs: int = 1, horizons=None) -> RateOutcome:
    cfg = exp.build(seeds, master_seed, horizons)
    aggs = [a for a in aggregate(sweep_rows(cfg, sweep(cfg, jobs))) if a.regret_kind == exp.kind]
    Ts = [a.T for a in aggs]
    means = [a.mean for a in aggs]
    ses = [a.se for a in aggs]
    try:
        fit = fit_rate(Ts, means)
    except SlopeFitError as exc:
        return RateOutcome(exp, Ts, means, ses, None, None, None, error=str(exc))
    lo, hi = exp.slope_window
    growth = None
    checks = {"slope": lo <= fit.slope <= hi}
    if exp.min_r2 is not None:
        checks["r2"] = fit.r2 >= exp.min_r2
    if exp.max_growth is not None:
        by_T = dict(zip(Ts, means))
        growth = by_T[max(Ts)] / by_T[max(Ts) // 8] if max(Ts) // 8 in by_T else None
        checks["growth"] = growth is not None and growth <= exp.max_growth
    return RateOutcome(exp, Ts, means, ses, fit.slope, fit.r2, growth, checks)
