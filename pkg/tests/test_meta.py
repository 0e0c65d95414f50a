import numpy as np
import pytest

from ocometa import meta
from ocometa.agents import Agent, StepSchedule, build_ader, build_ogd
from ocometa.arena import GameAborted, SmoothedAdversary, build_adversary, linearize_adversary, run_game, static_regret
from ocometa.geometry import Ball, Box, sample_unit_sphere
from ocometa.losses import LinearLoss
from ocometa.meta import MetaError, fotzo, fotzo_2p, fts, restrict, stb

DISC = Ball([0.0, 0.0], 1.0)
SQUARE = Box([0.0, 0.0], [1.0, 1.0])
NOISE = {"type": "uniform", "width": 1.0}


class Spy(Agent):
    """Plays a fixed point and queries a fixed list of points."""

    def __init__(self, domain, x, queries=None, order=1):
        super().__init__(domain)
        self.x = np.asarray(x, dtype=float)
        self.queries = queries
        self.order = order
        self.trivial_query = queries is None
        self.seen = []

    def act(self):
        return self.x

    def feedback(self, oracle):
        for y in self.queries if self.queries is not None else [self.x]:
            self.seen.append(np.asarray(oracle(np.asarray(y, dtype=float))))


class FakeOracle:
    def __init__(self, fn, order=1, kind="deterministic", bound=10.0):
        self.fn, self.order, self.kind, self.bound = fn, order, kind, bound
        self.calls = []

    def __call__(self, y):
        self.calls.append(np.array(y))
        return self.fn(np.asarray(y))


def ogd(domain=DISC, M1=1.0):
    return build_ogd(domain, StepSchedule("convex", D=domain.diameter, M1=M1))


@pytest.fixture
def fixed_direction(monkeypatch):
    monkeypatch.setattr(meta, "sample_unit_sphere", lambda dom, rng: np.array([0.0, 1.0]))


# -- examples ----------------------------------------------------------------


def test_fts_surrogate_gradient():
    spy = Spy(Ball([0, 0], 2.0), [0, 0], queries=[[1, 1]])
    w = fts(spy, mu=1.0)
    w.reset()
    w.act()
    real = FakeOracle(lambda y: np.array([1.0, 0.0]))
    w.feedback(real)
    assert np.allclose(spy.seen[0], [2.0, 1.0])
    assert len(real.calls) == 1 and np.array_equal(real.calls[0], [0, 0])


def test_fts_mu_zero_answers_constant():
    spy = Spy(DISC, [0.1, 0.2], queries=[[0, 0], [0.5, -0.5], [0.1, 0.2]])
    w = fts(spy, mu=0.0)
    w.reset()
    w.act()
    w.feedback(FakeOracle(lambda y: np.array([3.0, -1.0])))
    assert all(np.array_equal(s, [3.0, -1.0]) for s in spy.seen)
    assert w.feedback_kind == "semi-bandit"


def test_fts_queries_even_if_base_does_not():
    spy = Spy(DISC, [0, 0], queries=[])
    w = fts(spy)
    w.reset()
    w.act()
    real = FakeOracle(lambda y: np.zeros(2))
    w.feedback(real)
    assert len(real.calls) == 1


def test_fotzo_example(fixed_direction):
    spy = Spy(SQUARE, [0.5, 0.5], queries=[[0.5, 0.5]])
    w = fotzo(spy, alpha=0.1, delta=0.1)
    w.reset()
    w.act()
    real = FakeOracle(lambda y: 0.3, order=0)
    w.feedback(real)
    assert np.allclose(spy.seen[0], [0.0, 6.0])
    assert np.allclose(real.calls[0], [0.5, 0.6])
    assert w.feedback_kind == "full-information" and w.order == 0


def test_stb_example(fixed_direction):
    spy = Spy(SQUARE, [0.5, 0.5])
    w = stb(spy, alpha=0.1, delta=0.1)
    w.reset()
    assert np.allclose(w.act(), [0.5, 0.6])
    w.feedback(FakeOracle(lambda y: 0.3, order=0))
    assert np.allclose(spy.seen[0], [0.0, 6.0])
    assert w.feedback_kind == "bandit"


@pytest.mark.parametrize("delta", [1e-4, 0.01, 0.3])
def test_fotzo_2p_example(monkeypatch, delta):
    monkeypatch.setattr(meta, "sample_unit_sphere", lambda dom, rng: np.array([1.0, 0.0]))
    spy = Spy(DISC, [0.0, 0.0], queries=[[0.1, 0.1]])
    w = fotzo_2p(spy, delta)
    w.reset()
    w.act()
    f = LinearLoss([2.0, 0.0])
    w.feedback(FakeOracle(lambda y: float(f(y)), order=0))
    assert np.allclose(spy.seen[0], [4.0, 0.0])


def test_restrict_zero_is_identity():
    adv = build_adversary({"type": "linear-random", "oracle": {"noise": NOISE}}, DISC, 200, seed=0)
    a = run_game(ogd(), adv, 200, agent_rng=1, oracle_rng=2)
    b = run_game(restrict(ogd(), 0.0), adv, 200, agent_rng=1, oracle_rng=2)
    assert np.array_equal(a.actions, b.actions)


def test_restrict_keeps_actions_in_shrunk_set():
    adv = build_adversary({"type": "linear-random", "M1": 5.0}, DISC, 200, seed=0)
    tr = run_game(restrict(ogd(M1=0.5), 0.4), adv, 200)
    assert np.all(np.linalg.norm(tr.actions, axis=1) <= 0.6 + 1e-12)


# -- legality ----------------------------------------------------------------


def test_parameter_rules():
    with pytest.raises(MetaError, match="exceeds interior radius"):
        stb(ogd(), alpha=1.0, delta=0.5)
    with pytest.raises(MetaError, match="delta <= alpha"):
        stb(ogd(), alpha=0.1, delta=0.2)
    with pytest.raises(MetaError, match="delta <= alpha"):
        fotzo(ogd(), alpha=0.1, delta=0.2)
    with pytest.raises(MetaError):
        fotzo(ogd(), alpha=0.1, delta=0.0)
    with pytest.raises(MetaError):
        fotzo_2p(ogd(), 1.0)
    with pytest.raises(Exception, match="exceeds interior radius"):
        restrict(ogd(), 1.0)
    with pytest.raises(MetaError):
        fts(ogd(), mu=-1.0)


def test_composition_legality_matrix():
    ader = build_ader(DISC, 64, 1.0)
    with pytest.raises(MetaError, match="semi-bandit"):
        stb(ader, 0.1, 0.1)
    with pytest.raises(MetaError):
        stb(stb(ogd(), 0.1, 0.1), 0.1, 0.1)
    for wrap in (lambda b: fts(b), lambda b: fotzo(b, 0.1, 0.1), lambda b: fotzo_2p(b, 0.1)):
        with pytest.raises(MetaError, match="first-order"):
            wrap(stb(ogd(), 0.1, 0.1))
    assert fts(build_ader(DISC, 64, 1.0)).feedback_kind == "semi-bandit"
    assert stb(fts(build_ader(DISC, 64, 1.0)), 0.1, 0.1).feedback_kind == "bandit"
    assert fotzo(ogd(), 0.1, 0.1).feedback_kind == "full-information"
    assert fotzo_2p(ogd(), 0.1).requires_deterministic_oracle


def test_fotzo_2p_rejects_stochastic_oracle():
    adv = build_adversary({"type": "linear-random", "oracle": {"order": 0, "noise": NOISE}}, DISC, 10, seed=0)
    with pytest.raises(GameAborted, match="deterministic"):
        run_game(fotzo_2p(ogd(), 0.1), adv, 10)
    w = fotzo_2p(Spy(DISC, [0, 0], queries=[[0, 0]]), 0.1)
    w.reset(np.random.default_rng(0))
    w.act()
    with pytest.raises(MetaError):
        w.feedback(FakeOracle(lambda y: 0.0, order=0, kind="stochastic"))


def test_stb_rejects_off_action_query():
    spy = Spy(DISC, [0.0, 0.0], queries=[[0.1, 0.0]])
    spy.trivial_query = True  # claims semi-bandit, queries elsewhere
    w = stb(spy, 0.2, 0.2)
    w.reset(np.random.default_rng(0))
    w.act()
    with pytest.raises(MetaError):
        w.feedback(FakeOracle(lambda y: 0.0, order=0))


def test_fotzo_2p_queries_in_domain_and_bounded():
    T = 300
    adv = build_adversary({"type": "abs-drift", "M1": 1.0, "path_length": 1.0, "radius": 0.5, "oracle": {"order": 0}}, DISC, T, seed=3)
    w = fotzo_2p(ogd(M1=2.0), 1 / T, lipschitz=adv.M1)
    seen = []
    orig = w.base.feedback

    def spy_feedback(oracle):
        orig(lambda y: seen.append(oracle(y)) or seen[-1])

    w.base.feedback = spy_feedback
    tr = run_game(w, adv, T, agent_rng=0)
    queries = np.array([q for rnd in tr.queries for q, _ in rnd])
    assert len(queries) == 2 * T and np.all(DISC.contains(queries, 1e-9))
    assert max(np.linalg.norm(g) for g in seen) <= 2 * adv.M1 + 1e-9


# -- paired runs against the surrogate adversary ---------------------------------


def _v_stream(seed, T, domain):
    rng = np.random.default_rng(seed)
    return np.array([sample_unit_sphere(domain, rng) for _ in range(T)])


@pytest.mark.parametrize("seed", range(3))
def test_stb_trajectory_equivalence(seed):
    T, a = 400, 0.2
    adv = build_adversary({"type": "linear-random", "oracle": {"order": 0, "noise": NOISE}}, DISC, T, seed=seed)
    w = stb(ogd(M1=2 / a * adv.oracle_bound), a, a)
    bandit = run_game(w, adv, T, agent_rng=10 + seed, oracle_rng=20 + seed)
    shrunk = w.base.domain
    sur_adv = SmoothedAdversary(adv, shrunk, a, np.random.default_rng(10 + seed))
    base = build_ogd(shrunk, w.base.schedule)
    surrogate = run_game(base, sur_adv, T, agent_rng=99, oracle_rng=20 + seed)
    v = _v_stream(10 + seed, T, DISC)
    assert np.array_equal(bandit.actions, surrogate.actions + a * v)
    bandit_obs = np.array([rnd[0][1] for rnd in bandit.queries])
    estimates = np.array([rnd[0][1] for rnd in surrogate.queries])
    assert np.array_equal((2 / a) * bandit_obs[:, None] * v, estimates)


@pytest.mark.parametrize("make_base", [lambda: ogd(M1=20.0), lambda: build_ader(DISC, 200, 20.0)])
def test_fotzo_trajectory_equivalence(make_base):
    T, a = 200, 0.25
    adv = build_adversary({"type": "quadratic-drift", "path_length": 1.0, "radius": 0.5, "oracle": {"order": 0, "noise": NOISE}}, DISC, T, seed=4)
    w = fotzo(make_base(), a, a)
    real = run_game(w, adv, T, agent_rng=5, oracle_rng=6)
    shrunk = w.base.domain
    base = make_base()
    base.rebind(shrunk)
    surrogate = run_game(base, SmoothedAdversary(adv, shrunk, a, np.random.default_rng(5)), T, agent_rng=7, oracle_rng=6)
    assert np.array_equal(real.actions, surrogate.actions)


def test_fotzo_2p_trajectory_equivalence():
    T = 256
    delta = 1 / T
    adv = build_adversary({"type": "linear-random", "oracle": {"order": 0}}, DISC, T, seed=8)
    w = fotzo_2p(ogd(M1=2.0), delta)
    real = run_game(w, adv, T, agent_rng=9)
    shrunk = w.base.domain
    sur = SmoothedAdversary(adv, shrunk, delta, np.random.default_rng(9), two_point=True)
    surrogate = run_game(build_ogd(shrunk, w.base.schedule), sur, T)
    assert np.array_equal(real.actions, surrogate.actions)


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0])
def test_fts_trajectory_equivalence(mu):
    T = 256
    adv = build_adversary({"type": "quadratic-drift", "path_length": 2.0, "radius": 0.5, "oracle": {"noise": NOISE}}, DISC, T, seed=11)
    M1 = adv.oracle_bound + mu * DISC.diameter
    real = run_game(fts(build_ader(DISC, T, M1), mu), adv, T, oracle_rng=12)
    lin = run_game(build_ader(DISC, T, M1), linearize_adversary(adv, mu), T, oracle_rng=12)
    assert np.array_equal(real.actions, lin.actions)


@pytest.mark.parametrize(
    "spec",
    [
        {"type": "linear-random", "oracle": {"order": 0, "noise": NOISE}},
        {"type": "abs-drift", "M1": 1.0, "path_length": 2.0, "radius": 0.5, "oracle": {"order": 0}},
    ],
)
def test_stb_penalty_accounting(spec):
    T = 300
    a = T ** -0.25
    adv = build_adversary(spec, DISC, T, seed=13)
    w = stb(ogd(M1=2 / a * adv.oracle_bound), a, a)
    bandit = run_game(w, adv, T, agent_rng=14, oracle_rng=15)
    shrunk = w.base.domain
    surrogate = run_game(
        build_ogd(shrunk, w.base.schedule), SmoothedAdversary(adv, shrunk, a, np.random.default_rng(14)), T, oracle_rng=15
    )
    gap = static_regret(bandit).static_regret - static_regret(surrogate).static_regret
    D, r = DISC.diameter, DISC.interior_radius
    assert gap <= (3 + 2 * D * a / (r * a)) * a * adv.M1 * T + 1e-6
