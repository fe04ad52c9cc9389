"""Self-play training engines.

``train_population`` runs the perturbation-based population method: every
iteration evaluates all n x n pairings, picks for each agent the hardest
opponent in the population (``select_opponents``) and updates ``x_i`` against
it by descent and ``y_i`` by ascent. ``train_baseline`` implements the three
heuristic opponent rules (latest, best past, random past) on a single pair.
``train_single_theory`` is the single-agent variant with a duality-gap stop
test, adaptive step size and growing sample sizes.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import PayoffEstimate, estimate_payoff, exact_gradient, gae_advantages, reinforce_gradient
from .evaluation import equilibrium_distance
from .games import MatrixGame, Soccer, make_env, matrix_payoff, rollout_batch
from .optim import (
    LRSchedule,
    RmsProp,
    TheoryConfig,
    adaptive_lr,
    clip_grad_norm,
    project_simplex,
    sample_size_schedule,
)
from .policies import PROB_FLOOR, SimplexPolicy, TabularSoftmaxPolicy, ValueTable

__all__ = [
    "TrainConfig",
    "AgentState",
    "IterationMetrics",
    "TrainResult",
    "GapRecord",
    "rng_stream",
    "init_agent",
    "evaluate_population",
    "select_opponents",
    "inner_update",
    "train_population",
    "train_baseline",
    "train",
    "train_single_theory",
    "simplex_grid",
    "per_iteration_episodes",
]

log = logging.getLogger(__name__)

METHODS = ("ours", "latest", "best_past", "random_past")
MODES = ("exact_grad", "policy_grad")

# First element of every derived seed key; keeps streams for different purposes apart.
_INIT, _EVAL, _UPD_X, _UPD_Y, _PICK, _CHAMP = range(6)


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key)``; the same key always gives the same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass
class TrainConfig:
    game: str = "matching_pennies"
    method: str = "ours"
    mode: str = "exact_grad"
    n: int = 4
    N: int = 100
    l: int = 1
    m_k: int = 1024
    m_eval: int | None = None
    optimizer: str = "sgd"
    lr: float = 0.03
    lr_schedule: str = "constant"
    max_grad_norm: float | None = None
    rms_alpha: float = 0.99
    gamma: float = 1.0
    lam: float = 0.95
    entropy_coef: float = 0.0
    env_options: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    reuse_eval_rollouts: bool = False
    max_episodes_per_agent: int | None = None
    init: str = "dirichlet"
    init_points: list | None = None
    keep_checkpoints: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        env = self.make_env()
        if self.mode == "exact_grad" and not isinstance(env, MatrixGame):
            raise ValueError("exact_grad mode needs a matrix game")
        for name in ("n", "N", "l", "m_k", "threads"):
            if getattr(self, name) < (0 if name == "l" else 1):
                raise ValueError(f"{name} must be positive")
        if self.method != "ours" and self.n != 1:
            raise ValueError(f"baseline {self.method!r} trains a single pair; set n = 1")
        if self.m_eval is not None and self.m_eval < 1:
            raise ValueError("m_eval must be positive")
        if self.optimizer not in ("sgd", "rmsprop"):
            raise ValueError(f"optimizer must be 'sgd' or 'rmsprop', got {self.optimizer!r}")
        if self.reuse_eval_rollouts:
            raise ValueError("reuse_eval_rollouts is not supported; evaluation rollouts never update policies")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.init not in ("dirichlet", "uniform", "points"):
            raise ValueError(f"unknown init {self.init!r}")
        LRSchedule(self.lr, self.lr_schedule, self.N)

    def make_env(self):
        return make_env(self.game, **dict(self.env_options))

    @property
    def eval_samples(self) -> int:
        return self.m_eval if self.m_eval is not None else self.m_k


@dataclass
class AgentState:
    """One population member: a policy per side, value tables and optimizer state."""

    x: object
    y: object
    vx: ValueTable | None = None
    vy: ValueTable | None = None
    opt: dict = field(default_factory=dict)

    def copy(self) -> "AgentState":
        return AgentState(
            self.x.copy(), self.y.copy(),
            None if self.vx is None else self.vx.copy(),
            None if self.vy is None else self.vy.copy(),
            {k: v.copy() for k, v in self.opt.items()},
        )


@dataclass
class IterationMetrics:
    k: int
    agent: int
    episodes_per_agent: int
    E_hat: float
    opponent_v: int
    opponent_u: int
    self_selected_x: bool
    self_selected_y: bool
    distance_to_nash: float

    FIELDS = ("k", "agent", "episodes_per_agent", "E_hat", "opponent_v", "opponent_u",
              "self_selected_x", "self_selected_y", "distance_to_nash")


@dataclass
class TrainResult:
    agents: list[AgentState]
    metrics: list[IterationMetrics]
    checkpoints: list[tuple[int, int, AgentState]]
    phase: list[tuple[int, int, np.ndarray, np.ndarray]]
    episodes_per_agent: list[int]
    iterations: int
    champion_log: list[tuple[int, float]] = field(default_factory=list)

    def self_selection_frequency(self) -> float:
        picks = [m.self_selected_x for m in self.metrics] + [m.self_selected_y for m in self.metrics]
        return float(np.mean(picks)) if picks else float("nan")


def init_agent(cfg: TrainConfig, env, i: int) -> AgentState:
    if isinstance(env, MatrixGame):
        rows, cols = env.shape
        if cfg.init == "points":
            x, y = cfg.init_points[i]
            return AgentState(SimplexPolicy(x), SimplexPolicy(y))
        if cfg.init == "uniform":
            return AgentState(SimplexPolicy(np.full(rows, 1 / rows)), SimplexPolicy(np.full(cols, 1 / cols)))
        rng = rng_stream(cfg.seed, _INIT, i)
        return AgentState(SimplexPolicy(rng.dirichlet(np.ones(rows))), SimplexPolicy(rng.dirichlet(np.ones(cols))))
    return AgentState(
        TabularSoftmaxPolicy.zeros(env.obs_count, env.n_actions_x),
        TabularSoftmaxPolicy.zeros(env.obs_count, env.n_actions_y),
        ValueTable.zeros(env.obs_count),
        ValueTable.zeros(env.obs_count),
    )


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# Evaluation and opponent selection
# ---------------------------------------------------------------------------


def _estimate(env, x, y, m: int, rng, gamma: float, exact: bool) -> PayoffEstimate:
    if exact:
        return PayoffEstimate(matrix_payoff(env, x.p, y.p), 1, env.reward_bound)
    if isinstance(env, MatrixGame):
        a = x.sample_batch(np.zeros(m, dtype=np.int64), rng)
        b = y.sample_batch(np.zeros(m, dtype=np.int64), rng)
        r = env.payoff[a, b]
        return PayoffEstimate(float(r.mean()), m, env.reward_bound, float(r.var(ddof=1)) if m > 1 else 0.0)
    return estimate_payoff(rollout_batch(env, x, y, m, rng, gamma), env.reward_bound)


def evaluate_population(agents: list[AgentState], env, m: int, seed: int, k: int, exact: bool = False,
                        gamma: float = 1.0, threads: int = 1) -> list[list[PayoffEstimate]]:
    """``out[i][j]`` estimates f(x_i, y_j) from ``m`` fresh episodes."""
    n = len(agents)
    pairs = [(i, j) for i in range(n) for j in range(n)]

    def one(ij):
        i, j = ij
        rng = None if exact else rng_stream(seed, _EVAL, k, i, j)
        return _estimate(env, agents[i].x, agents[j].y, m, rng, gamma, exact)

    flat = _map(one, pairs, threads)
    return [flat[i * n : (i + 1) * n] for i in range(n)]


def select_opponents(evals, i: int) -> tuple[int, int]:
    """Hardest opponents for agent ``i``: ``(argmax_j f(x_i, y_j), argmin_j f(x_j, y_i))``.

    Ties go to the lowest index.
    """
    F = np.array([[float(e) for e in row] for row in evals])
    return int(np.argmax(F[i, :])), int(np.argmin(F[:, i]))


# ---------------------------------------------------------------------------
# Inner policy updates
# ---------------------------------------------------------------------------


def _apply_step(params, grad, lr, sign, cfg: TrainConfig, opt: dict, key: str, project: bool):
    if cfg.optimizer == "rmsprop":
        state = opt.setdefault(key, RmsProp(cfg.rms_alpha))
        out = state.step(params, grad, lr, sign)
    else:
        out = params - sign * lr * grad
    return project_simplex(out) if project else out


def _a2c_grads(policy: TabularSoftmaxPolicy, values: ValueTable, trajs, side: str, cfg: TrainConfig):
    obs, acts, adv, ret = [], [], [], []
    for t in trajs:
        own = -t.rewards if side == "x" else t.rewards
        a = gae_advantages(t, values, cfg.gamma, cfg.lam, rewards=own)
        obs.append(t.obs)
        acts.append(t.actions_x if side == "x" else t.actions_y)
        adv.append(a)
        ret.append(a + values(t.obs))
    obs, acts = np.concatenate(obs), np.concatenate(acts)
    adv, ret = np.concatenate(adv), np.concatenate(ret)
    m = len(trajs)

    pi = policy.probs(obs)
    contrib = -pi * adv[:, None]
    contrib[np.arange(len(acts)), acts] += adv
    if cfg.entropy_coef:
        logp = np.log(np.maximum(pi, PROB_FLOOR))
        H = -(pi * logp).sum(axis=1, keepdims=True)
        contrib += cfg.entropy_coef * (-pi * (logp + H))
    g_pi = np.zeros_like(policy.logits)
    np.add.at(g_pi, obs, contrib / m)
    g_v = np.zeros_like(values.v)
    np.add.at(g_v, obs, (values(obs) - ret) / m)
    return g_pi, g_v


def inner_update(agent: AgentState, side: str, opponent, env, cfg: TrainConfig, k: int,
                 rng: np.random.Generator) -> AgentState:
    """``l`` updates of one side of ``agent`` against a frozen opponent policy.

    ``x`` descends on f and ``y`` ascends. Returns a new AgentState; the input
    is left untouched.
    """
    agent = agent.copy()
    lr = LRSchedule(cfg.lr, cfg.lr_schedule, cfg.N)(k)
    exact = cfg.mode == "exact_grad"
    for _ in range(cfg.l):
        learner = agent.x if side == "x" else agent.y
        if isinstance(env, MatrixGame):
            sign = 1 if side == "x" else -1
            if exact:
                gx, gy = exact_gradient(env, learner.p if side == "x" else opponent.p,
                                        opponent.p if side == "x" else learner.p)
                g = gx if side == "x" else gy
            else:
                px, py = (learner, opponent) if side == "x" else (opponent, learner)
                a = px.sample_batch(np.zeros(cfg.m_k, dtype=np.int64), rng)
                b = py.sample_batch(np.zeros(cfg.m_k, dtype=np.int64), rng)
                r = env.payoff[a, b]
                acts = a if side == "x" else b
                g = np.bincount(acts, weights=r, minlength=learner.n_actions) / cfg.m_k
                g = g / np.maximum(learner.p, PROB_FLOOR)
            if cfg.max_grad_norm is not None:
                (g,), _ = clip_grad_norm([g], cfg.max_grad_norm)
            new = SimplexPolicy(_apply_step(learner.p, g, lr, sign, cfg, agent.opt, side, True))
        else:
            values = agent.vx if side == "x" else agent.vy
            px, py = (learner, opponent) if side == "x" else (opponent, learner)
            trajs = rollout_batch(env, px, py, cfg.m_k, rng, cfg.gamma)
            g_pi, g_v = _a2c_grads(learner, values, trajs, side, cfg)
            if cfg.max_grad_norm is not None:
                (g_pi,), _ = clip_grad_norm([g_pi], cfg.max_grad_norm)
                (g_v,), _ = clip_grad_norm([g_v], cfg.max_grad_norm)
            # ascend on the learner's own return; descend on value error
            new = TabularSoftmaxPolicy(_apply_step(learner.logits, g_pi, lr, -1, cfg, agent.opt, side, False))
            new_v = ValueTable(_apply_step(values.v, g_v, lr, 1, cfg, agent.opt, "v" + side, False))
            if side == "x":
                agent.vx = new_v
            else:
                agent.vy = new_v
        if side == "x":
            agent.x = new
        else:
            agent.y = new
    return agent


def _update_rng(cfg: TrainConfig, purpose: int, k: int, i: int):
    # exact steps draw nothing; skip the stream construction
    return None if cfg.mode == "exact_grad" else rng_stream(cfg.seed, purpose, k, i)


def per_iteration_episodes(cfg: TrainConfig) -> int:
    """Environment episodes charged to each agent per iteration."""
    if cfg.mode == "exact_grad":
        return 0
    updates = 2 * cfg.l * cfg.m_k
    if cfg.method == "ours":
        return cfg.n * cfg.eval_samples + updates
    if cfg.method == "best_past":
        return updates + cfg.eval_samples
    return updates


def _iterations(cfg: TrainConfig) -> int:
    per = per_iteration_episodes(cfg)
    if cfg.max_episodes_per_agent is None or per == 0:
        return cfg.N
    return min(cfg.N, cfg.max_episodes_per_agent // per)


def _distance(env, a: AgentState) -> float:
    if isinstance(env, MatrixGame):
        return equilibrium_distance(a.x.p, a.y.p, env)
    return float("nan")


def _phase_row(env, k, i, a: AgentState):
    if isinstance(env, MatrixGame):
        return (k, i, a.x.p.copy(), a.y.p.copy())
    return None


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def train_population(cfg: TrainConfig, callback=None) -> TrainResult:
    """Population self-play with adversarial opponent selection.

    ``callback(k, agents, metrics)`` is called with the iteration-k snapshot
    and the metrics recorded so far before each update, and once more with the
    final agents (k = iterations).
    """
    if cfg.method != "ours":
        raise ValueError("train_population runs method 'ours'; use train_baseline for the heuristics")
    env = cfg.make_env()
    exact = cfg.mode == "exact_grad"
    agents = [init_agent(cfg, env, i) for i in range(cfg.n)]
    per = per_iteration_episodes(cfg)
    iters = _iterations(cfg)
    metrics, checkpoints, phase = [], [], []
    for k in range(iters):
        if cfg.keep_checkpoints:
            checkpoints.extend((k, i, a.copy()) for i, a in enumerate(agents))
        phase.extend(r for i, a in enumerate(agents) if (r := _phase_row(env, k, i, a)))
        if callback:
            callback(k, agents, metrics)
        evals = evaluate_population(agents, env, cfg.eval_samples, cfg.seed, k, exact, cfg.gamma, cfg.threads)
        picks = [select_opponents(evals, i) for i in range(cfg.n)]

        def update(i):
            v, u = picks[i]
            a = inner_update(agents[i], "x", agents[v].y, env, cfg, k, _update_rng(cfg, _UPD_X, k, i))
            return inner_update(a, "y", agents[u].x, env, cfg, k, _update_rng(cfg, _UPD_Y, k, i))

        new_agents = _map(update, list(range(cfg.n)), cfg.threads)
        for i, (v, u) in enumerate(picks):
            metrics.append(IterationMetrics(
                k, i, (k + 1) * per, float(evals[i][v]) - float(evals[u][i]), v, u, v == i, u == i,
                _distance(env, agents[i]),
            ))
        agents = new_agents
    if cfg.keep_checkpoints:
        checkpoints.extend((iters, i, a.copy()) for i, a in enumerate(agents))
    phase.extend(r for i, a in enumerate(agents) if (r := _phase_row(env, iters, i, a)))
    if callback:
        callback(iters, agents, metrics)
    return TrainResult(agents, metrics, checkpoints, phase, [iters * per] * cfg.n, iters)


def _champion_score(env, new: AgentState, champ: AgentState, cfg: TrainConfig, k: int) -> float:
    """Score of ``new`` against ``champ``; wins count 1, draws 1/2."""
    if cfg.mode == "exact_grad":
        return 0.5 + 0.25 * (matrix_payoff(env, champ.x.p, new.y.p) - matrix_payoff(env, new.x.p, champ.y.p))
    m = cfg.eval_samples
    first = (m + 1) // 2
    rng = rng_stream(cfg.seed, _CHAMP, k)
    score = 0.0
    if isinstance(env, MatrixGame):
        for px, py, sgn, cnt in ((new.x, champ.y, -1, first), (champ.x, new.y, 1, m - first)):
            if cnt:
                r = env.payoff[px.sample_batch(np.zeros(cnt, dtype=np.int64), rng),
                               py.sample_batch(np.zeros(cnt, dtype=np.int64), rng)]
                score += float((np.sign(sgn * r) + 1).sum() / 2)
        return score / m
    for px, py, sgn, cnt in ((new.x, champ.y, -1, first), (champ.x, new.y, 1, m - first)):
        if cnt:
            rets = np.array([t.discounted_return() for t in rollout_batch(env, px, py, cnt, rng, cfg.gamma)])
            score += float((np.sign(sgn * rets) + 1).sum() / 2)
    return score / m


def train_baseline(cfg: TrainConfig, rule: str | None = None, callback=None) -> TrainResult:
    """Single-pair self-play with a heuristic opponent rule.

    ``latest``: train against the partner's current policy.
    ``best_past``: train against a kept champion, replaced when the new agent
    scores strictly above 0.5 against it.
    ``random_past``: train against a uniformly drawn past snapshot.
    """
    rule = rule or cfg.method
    if rule not in METHODS[1:]:
        raise ValueError(f"unknown baseline rule {rule!r}")
    cfg = replace(cfg, method=rule, n=1)
    env = cfg.make_env()
    agent = init_agent(cfg, env, 0)
    history = [agent.copy()]
    champion, champion_k = agent.copy(), 0
    champion_log: list[tuple[int, float]] = []
    per = per_iteration_episodes(cfg)
    iters = _iterations(cfg)
    metrics, checkpoints, phase = [], [], []
    for k in range(iters):
        if cfg.keep_checkpoints:
            checkpoints.append((k, 0, agent.copy()))
        if (r := _phase_row(env, k, 0, agent)):
            phase.append(r)
        if callback:
            callback(k, [agent], metrics)
        if rule == "latest":
            vk, uk = k, k
            opp_y, opp_x = agent.y, agent.x
        elif rule == "best_past":
            vk = uk = champion_k
            opp_y, opp_x = champion.y, champion.x
        else:
            pick = rng_stream(cfg.seed, _PICK, k)
            vk, uk = int(pick.integers(0, k + 1)), int(pick.integers(0, k + 1))
            opp_y, opp_x = history[vk].y, history[uk].x
        dist = _distance(env, agent)
        new = inner_update(agent, "x", opp_y, env, cfg, k, _update_rng(cfg, _UPD_X, k, 0))
        new = inner_update(new, "y", opp_x, env, cfg, k, _update_rng(cfg, _UPD_Y, k, 0))
        if rule == "best_past":
            score = _champion_score(env, new, champion, cfg, k)
            if score > 0.5:
                champion, champion_k = new.copy(), k + 1
                champion_log.append((k + 1, score))
        metrics.append(IterationMetrics(k, 0, (k + 1) * per, float("nan"), vk, uk, vk == k, uk == k, dist))
        agent = new
        if rule == "random_past":
            history.append(agent.copy())
    if cfg.keep_checkpoints:
        checkpoints.append((iters, 0, agent.copy()))
    if (r := _phase_row(env, iters, 0, agent)):
        phase.append(r)
    if callback:
        callback(iters, [agent], metrics)
    return TrainResult([agent], metrics, checkpoints, phase, [iters * per], iters, champion_log)


def train(cfg: TrainConfig, callback=None) -> TrainResult:
    if cfg.method == "ours":
        return train_population(cfg, callback)
    return train_baseline(cfg, cfg.method, callback)


# ---------------------------------------------------------------------------
# Single-agent variant with stop test
# ---------------------------------------------------------------------------


@dataclass
class GapRecord:
    k: int
    E_hat: float
    u_index: int
    v_index: int
    eta: float
    m_k: int
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    gx: np.ndarray
    gy: np.ndarray
    f_xy: float
    f_xv: float
    f_uy: float


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """All points of the probability simplex whose coordinates are multiples of ``step``."""
    n = round(1 / step)
    if not math.isclose(n * step, 1.0):
        raise ValueError("step must divide 1")
    pts = []

    def rec(prefix, left, slots):
        if slots == 1:
            pts.append(prefix + [left])
            return
        for c in range(left + 1):
            rec(prefix + [c], left - c, slots - 1)

    rec([], n, dim)
    return np.array(pts, dtype=float) / n


def train_single_theory(game: MatrixGame, cfg: TheoryConfig, x0, y0, cand_x, cand_y,
                        mode: str = "exact_grad", max_iter: int = 10_000, seed: int = 0,
                        m_override: int | None = None):
    """Perturbation self-play of one pair until the estimated gap is at most 3 eps.

    The candidate sets always include the pair's own current policies, so the
    estimated perturbations satisfy f(x, v) >= f(x, y) >= f(u, y). Step sizes
    follow ``adaptive_lr``; in ``policy_grad`` mode, each iteration uses
    ``sample_size_schedule(k)`` episodes per estimate unless ``m_override``.

    Returns ``(x_bar, y_bar, records, stopped)``.
    """
    cand_x = np.asarray(cand_x, dtype=float)
    cand_y = np.asarray(cand_y, dtype=float)
    if not (np.all(np.isfinite(cand_x)) and np.all(np.isfinite(cand_y))):
        raise ValueError("candidate sets must be finite")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    M = game.payoff
    x, y = np.asarray(x0, dtype=float), np.asarray(y0, dtype=float)
    records: list[GapRecord] = []
    for k in range(max_iter):
        Cx = np.vstack([cand_x, x])
        Cy = np.vstack([cand_y, y])
        if mode == "exact_grad":
            m_k = 0
            f_row = Cy @ (M.T @ x)          # f(x, c) for c in Cy
            f_col = Cx @ (M @ y)            # f(c, y) for c in Cx
        else:
            m_k = m_override or sample_size_schedule(k, cfg)
            rng = rng_stream(seed, _EVAL, k)
            px = SimplexPolicy(x)
            py = SimplexPolicy(y)
            f_xy = _estimate(game, px, py, m_k, rng, 1.0, False).mean
            f_row = np.array([_estimate(game, px, SimplexPolicy(c), m_k, rng, 1.0, False).mean for c in cand_y] + [f_xy])
            f_col = np.array([_estimate(game, SimplexPolicy(c), py, m_k, rng, 1.0, False).mean for c in cand_x] + [f_xy])
        vi, ui = int(np.argmax(f_row)), int(np.argmin(f_col))
        v, u = Cy[vi], Cx[ui]
        E_hat = float(f_row[vi] - f_col[ui])
        if E_hat <= 3 * cfg.eps:
            records.append(GapRecord(k, E_hat, ui, vi, 0.0, m_k, x, y, u, v, np.zeros_like(x), np.zeros_like(y),
                                     float(f_row[-1]), float(f_row[vi]), float(f_col[ui])))
            return x, y, records, True
        if mode == "exact_grad":
            gx, gy = M @ v, M.T @ u
        else:
            rng = rng_stream(seed, _UPD_X, k)
            gx = _pg_simplex(game, SimplexPolicy(x), SimplexPolicy(v), "x", m_k, rng)
            gy = _pg_simplex(game, SimplexPolicy(u), SimplexPolicy(y), "y", m_k, rng)
        eta = adaptive_lr(E_hat, cfg.eps, float(gx @ gx), float(gy @ gy), cfg.alpha)
        records.append(GapRecord(k, E_hat, ui, vi, eta, m_k, x, y, u, v, gx, gy,
                                 float(f_row[-1]), float(f_row[vi]), float(f_col[ui])))
        x = project_simplex(x - eta * gx)
        y = project_simplex(y + eta * gy)
    return x, y, records, False


def _pg_simplex(game: MatrixGame, px: SimplexPolicy, py: SimplexPolicy, side: str, m: int, rng) -> np.ndarray:
    zeros = np.zeros(m, dtype=np.int64)
    a, b = px.sample_batch(zeros, rng), py.sample_batch(zeros, rng)
    r = game.payoff[a, b]
    learner, acts = (px, a) if side == "x" else (py, b)
    return np.bincount(acts, weights=r, minlength=learner.n_actions) / m / np.maximum(learner.p, PROB_FLOOR)
