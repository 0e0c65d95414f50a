import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocometa.experiment import (
    ConfigError,
    ExperimentConfig,
    SlopeFitError,
    aggregate,
    build_cell,
    fit_rate,
    fit_slope,
    paper_default,
    run_cell,
    sweep,
    sweep_rows,
)
from ocometa.meta import FOTZO2P, STB

BASE = {
    "domain": {"type": "ball", "dim": 2, "radius": 1.0},
    "adversary": {"type": "linear-random", "M1": 1.0},
    "agent": {"type": "ogd"},
    "T": [256],
    "seeds": {"count": 2, "master_seed": 0},
}


def cfg(**over):
    return ExperimentConfig.from_mapping({**BASE, **over})


# -- slope fits ----------------------------------------------------------------


def test_fit_slope_examples():
    f = fit_slope([(8, 4), (10, 5), (12, 6)])
    assert math.isclose(f.slope, 0.5) and math.isclose(f.r2, 1.0)
    f = fit_slope([(8, 6), (10, 7.5), (12, 9)])
    assert math.isclose(f.slope, 0.75) and math.isclose(f.r2, 1.0)
    f = fit_slope([(8, 3), (10, 3), (12, 3)])
    assert f.slope == 0.0 and f.r2 == 1.0


def test_fit_slope_errors():
    with pytest.raises(SlopeFitError):
        fit_slope([(8, 1), (10, 2)])
    with pytest.raises(SlopeFitError, match="degenerate"):
        fit_slope([(8, 1), (8, 2), (8, 3)])
    with pytest.raises(SlopeFitError, match="not positive"):
        fit_rate([256, 512, 1024], [1.0, -0.5, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(-5, 5))
def test_fit_rate_recovers_power_laws(p, logc):
    Ts = [2**k for k in range(8, 14)]
    fit = fit_rate(Ts, [2**logc * T**p for T in Ts])
    assert math.isclose(fit.slope, p, abs_tol=1e-9) and math.isclose(fit.intercept, logc, abs_tol=1e-7)


def test_fit_matches_numpy_polyfit():
    rng = np.random.default_rng(0)
    x = np.arange(8, 14, dtype=float)
    y = 0.6 * x + rng.normal(0, 0.3, x.size)
    f = fit_slope(np.column_stack([x, y]))
    slope, intercept = np.polyfit(x, y, 1)
    assert math.isclose(f.slope, slope) and math.isclose(f.intercept, intercept)
    assert math.isclose(f.r2, np.corrcoef(x, y)[0, 1] ** 2)


# -- aggregates ----------------------------------------------------------------


def test_aggregate_statistics():
    vals = [1.0, 2.0, 3.0, 4.0, 10.0]
    rows = [(256, i, "static", v, None) for i, v in enumerate(vals)] + [(256, 5, "static", math.nan, None)]
    (a,) = aggregate(rows)
    assert a.n == 5 and a.failed == 1
    assert math.isclose(a.mean, 4.0)
    assert math.isclose(a.se, np.std(vals, ddof=1) / math.sqrt(5))
    assert math.isclose(a.p90, np.quantile(vals, 0.9))


def test_aggregate_order_independent():
    rng = np.random.default_rng(1)
    rows = [(T, s, "static", float(rng.uniform()), None) for T in (256, 512) for s in range(6)]
    shuffled = [rows[i] for i in rng.permutation(len(rows))]
    assert aggregate(rows) == aggregate(shuffled)


# -- config ------------------------------------------------------------------


def test_paper_defaults():
    assert paper_default("stb", 256, "convex") == 0.25
    assert math.isclose(paper_default("stb", 1024, "strongly_convex"), 1 / math.sqrt(1024 * math.log(1024)))
    assert paper_default("fotzo_2p", 512, "convex") == 1 / 512


def test_paper_default_resolved_per_horizon():
    c = cfg(adversary={"type": "linear-random", "oracle": {"order": 0}}, stack=["stb", "ogd"], T=[256, 4096])
    for T, want in ((256, 0.25), (4096, 0.125)):
        agent = build_cell(c, T, 0)[2]
        assert isinstance(agent, STB) and agent.delta == want == agent.alpha


def test_stack_base_moves_into_agent():
    c = cfg(adversary={"type": "linear-random", "oracle": {"order": 0}}, stack=["fotzo_2p", "ogd"], agent=None)
    assert c.agent["type"] == "ogd" and c.stack == ["fotzo_2p"]
    assert isinstance(build_cell(c, 256, 0)[2], FOTZO2P)


@pytest.mark.parametrize(
    "over, field",
    [
        ({"stack": [{"stb": {"alpha": 1.5, "delta": 0.1}}], "adversary": {"type": "linear-random", "oracle": {"order": 0}}}, "interior radius"),
        ({"stack": [{"stb": {"alpha": 0.1, "delta": 0.2}}], "adversary": {"type": "linear-random", "oracle": {"order": 0}}}, "delta <= alpha"),
        ({"stack": ["fotzo_2p"], "adversary": {"type": "linear-random", "oracle": {"order": 0, "noise": {"type": "uniform", "width": 1}}}}, "deterministic"),
        ({"stack": ["stb"]}, "oracle.order"),
        ({"stack": ["wobble"]}, "stack"),
        ({"agent": {"type": "ftrl"}}, "agent.type"),
        ({"T": [512, 256]}, "T"),
        ({"T": [0]}, "T"),
        ({"regret": ["total"]}, "regret"),
        ({"regret": ["dynamic"]}, "dynamic"),
        ({"regime": "smooth"}, "regime"),
        ({"domain": {"type": "ball", "dim": 2, "radius": -1}}, "domain"),
        ({"adversary": {"type": "nope"}}, "adversary"),
        ({"solver": {"iters": 5}}, "solver"),
        ({"seeds": {"count": 0}}, "seeds"),
    ],
)
def test_config_errors(over, field):
    with pytest.raises(ConfigError, match=field):
        cfg(**over)


def test_config_round_trip():
    c = cfg(stack=["fts"], agent={"type": "ader"}, regret=["static", "adaptive"])
    assert ExperimentConfig.from_mapping(c.to_mapping()) == c


# -- cells and sweeps ----------------------------------------------------------


def test_cell_is_deterministic_and_seeds_differ():
    c = cfg()
    a, b, other = run_cell(c, 256, 0), run_cell(c, 256, 0), run_cell(c, 256, 1)
    assert a.values == b.values and a.values != other.values
    assert a.runtime_ms is None


def test_sweep_row_count():
    c = cfg(T=[2**8, 2**9, 2**10, 2**11], seeds={"count": 4, "master_seed": 3})
    rows = sweep_rows(c, sweep(c))
    assert len(rows) == 16
    assert [(r[0], r[1]) for r in rows] == [(T, s) for T in c.T for s in range(4)]


def test_sweep_rows_multiply_by_kinds():
    c = cfg(T=[256, 512], regret=["static", "adaptive", "full_dynamic"])
    assert len(sweep_rows(c, sweep(c))) == 2 * 2 * 3


def test_adding_seeds_keeps_existing_cells():
    small = sweep(cfg(seeds={"count": 2, "master_seed": 7}))
    big = sweep(cfg(seeds={"count": 4, "master_seed": 7}))
    assert [r.values for r in small] == [r.values for r in big[:2]]


def test_failed_cell_is_recorded(monkeypatch):
    from ocometa import experiment
    from ocometa.arena import GameAborted

    def boom(*a, **k):
        raise GameAborted("round 3: forced")

    monkeypatch.setattr(experiment, "run_game", boom)
    c = cfg()
    res = sweep(c)
    assert all(r.error and "forced" in r.error for r in res)
    rows = sweep_rows(c, res)
    assert all(math.isnan(r[3]) for r in rows)
    assert aggregate(rows)[0].failed == 2


def test_timing_optional():
    assert run_cell(cfg(timing=True), 256, 0).runtime_ms > 0
