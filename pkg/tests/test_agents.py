import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ocometa.agents import (
    Ader,
    AgentError,
    OgdState,
    StepSchedule,
    ader_grid,
    build_ader,
    build_ogd,
    hedge_update,
    ogd_step,
)
from ocometa.arena import SequenceAdversary, build_adversary, run_game
from ocometa.geometry import Ball, Box
from ocometa.losses import QuadraticLoss

SEGMENT = Box([-1.0], [1.0])
UNIT = Box([0.0], [1.0])


def drive(agent, grads):
    agent.reset(np.random.default_rng(0))
    xs = []
    for g in grads:
        xs.append(agent.act().copy())
        agent.feedback(lambda y, g=g: np.atleast_1d(np.asarray(g, dtype=float)))
    return np.array(xs)


def test_ogd_clamps_at_boundary():
    agent = build_ogd(SEGMENT, StepSchedule("fixed", eta=0.5), x0=[0.0])
    assert np.allclose(drive(agent, [1.0] * 5)[:, 0], [0, -0.5, -1, -1, -1])


def test_ogd_zero_gradients_stay_put():
    agent = build_ogd(Ball([0, 0], 1), StepSchedule("convex", D=2, M1=1), x0=[0.3, 0.1])
    assert np.all(drive(agent, [[0.0, 0.0]] * 10) == [0.3, 0.1])


def test_schedules():
    assert StepSchedule("convex", D=2, M1=1)(4) == 1.0
    assert math.isclose(StepSchedule("strongly_convex", mu=2)(5), 0.1)
    assert StepSchedule("fixed", eta=0.3)(100) == 0.3
    for bad in (dict(kind="convex", D=0, M1=1), dict(kind="strongly_convex", mu=0), dict(kind="fixed"), dict(kind="adagrad")):
        with pytest.raises(AgentError):
            StepSchedule(**bad)


def test_ogd_step_examples():
    fixed = StepSchedule("fixed", eta=0.25)
    assert ogd_step(OgdState(np.array([0.1]), fixed, UNIT), [1.0]).current[0] == 0.0
    assert ogd_step(OgdState(np.array([0.5]), fixed, UNIT), [1.0]).current[0] == 0.25
    st5 = OgdState(np.array([0.5]), StepSchedule("strongly_convex", mu=2), UNIT, t=5)
    nxt = ogd_step(st5, [1.0])
    assert math.isclose(nxt.current[0], 0.4) and nxt.t == 6


def test_ogd_step_rejects_non_finite():
    st0 = OgdState(np.array([0.5]), StepSchedule("fixed", eta=0.1), UNIT)
    for bad in ([np.nan], [np.inf]):
        with pytest.raises(AgentError):
            ogd_step(st0, bad)


def test_ogd_x0_outside_domain():
    with pytest.raises(AgentError):
        build_ogd(UNIT, StepSchedule("fixed", eta=0.1), x0=[2.0])


def test_ogd_default_start_is_center():
    agent = build_ogd(Box([0, 2], [1, 4]), StepSchedule("fixed", eta=0.1))
    agent.reset()
    assert np.array_equal(agent.act(), [0.5, 3.0])
    assert agent.feedback_kind == "semi-bandit" and agent.deterministic


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16))
def test_ogd_determinism(seed):
    grads = np.random.default_rng(seed).standard_normal((50, 2))
    a = drive(build_ogd(Ball([0, 0], 1), StepSchedule("convex", D=2, M1=3)), grads)
    b = drive(build_ogd(Ball([0, 0], 1), StepSchedule("convex", D=2, M1=3)), grads)
    assert np.array_equal(a, b)


def test_ogd_strongly_convex_descent():
    x_star = np.array([0.3, -0.2])
    f = QuadraticLoss(x_star, 2.0)  # ||x - x*||^2
    K = Box([-1, -1], [1, 1])
    agent = build_ogd(K, StepSchedule("strongly_convex", mu=2.0))
    tr = run_game(agent, SequenceAdversary(K, [f] * 1000), 1000)
    dist = np.linalg.norm(tr.actions - x_star, axis=1)
    assert np.linalg.norm(agent.act() - x_star) <= 0.05
    assert dist[-1] <= 0.05 and dist[-1] <= dist[0]


# -- Ader --------------------------------------------------------------------


def test_ader_grid_and_initial_weights():
    assert ader_grid(1024) == 6
    a = build_ader(Ball([0, 0], 1), 1024, 1.0)
    a.reset()
    assert a.n_experts == 6
    assert np.allclose(a.weights, np.full(6, 1 / 6))
    assert np.allclose(a.step_sizes, 2 / math.sqrt(1024) * 2.0 ** np.arange(6))
    assert math.isclose(a.hedge_rate, math.sqrt(8 * math.log(6) / 1024) / 2)
    assert a.feedback_kind == "full-information"


def test_ader_needs_horizon():
    with pytest.raises(AgentError):
        build_ader(SEGMENT, 1, 1.0)
    with pytest.raises(AgentError):
        Ader(SEGMENT, 10, 0.0)


def test_hedge_arithmetic():
    w = hedge_update(np.array([0.5, 0.5]), [0.0, 1.0], 1.0)
    assert np.allclose(w, [1 / (1 + math.e**-1), math.e**-1 / (1 + math.e**-1)])
    assert np.allclose(w, [0.731, 0.269], atol=5e-4)


def test_hedge_shift_invariant_and_stable():
    w = np.array([0.2, 0.3, 0.5])
    assert np.allclose(hedge_update(w, [1, 2, 3], 0.7), hedge_update(w, [1001, 1002, 1003], 0.7))
    assert np.all(np.isfinite(hedge_update(w, [0, 1e6, 2e6], 10.0)))


def test_ader_queries_every_expert():
    K = Ball([0, 0], 1)
    adv = build_adversary({"type": "quadratic-drift", "path_length": 1.0, "radius": 0.5}, K, 64, seed=0)
    tr = run_game(build_ader(K, 64, adv.M1), adv, 64)
    assert all(len(q) == ader_grid(64) for q in tr.queries)


@pytest.mark.parametrize("seed", range(5))
def test_ader_hedge_guarantee(seed):
    # Hoeffding form of the exponential-weights bound, checked exactly on every run
    K = Ball([0, 0], 1)
    T = 512
    adv = build_adversary({"type": "quadratic-drift", "path_length": 3.0, "radius": 0.5, "oracle": {"noise": {"type": "uniform", "width": 1.0}}}, K, T, seed=seed)
    agent = build_ader(K, T, adv.oracle_bound)
    run_game(agent, adv, T, agent_rng=seed, oracle_rng=seed + 100)
    assert agent.hedge_regret() <= agent.hedge_bound() + 1e-9


def test_ader_tracks_a_moving_minimizer():
    K = Ball([0, 0], 1)
    T = 2048
    adv = build_adversary({"type": "quadratic-drift", "path_length": 2.0, "radius": 0.5}, K, T, seed=1)
    tr = run_game(build_ader(K, T, adv.M1), adv, T)
    gap = np.linalg.norm(tr.actions[T // 2 :] - adv.comparator_sequence()[T // 2 :], axis=1)
    assert gap.mean() <= 0.1
