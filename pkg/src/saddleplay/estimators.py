"""Monte-Carlo payoff estimates, policy gradients and GAE advantages."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .games import MatrixGame, Trajectory
from .policies import PROB_FLOOR, SimplexPolicy, TabularSoftmaxPolicy, ValueTable

__all__ = [
    "PayoffEstimate",
    "GradientEstimate",
    "estimate_payoff",
    "hoeffding_radius",
    "exact_gradient",
    "reinforce_gradient",
    "gae_advantages",
]


@dataclass(frozen=True)
class PayoffEstimate:
    mean: float
    m: int
    R: float
    var: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("an estimate needs at least one sample")

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.m)

    def __float__(self) -> float:
        return self.mean


def hoeffding_radius(R: float, m: int, delta: float) -> float:
    """Half-width ``t`` with P(|mean - f| > t) <= delta for returns in [-R, R]."""
    return R * math.sqrt(2.0 * math.log(2.0 / delta) / m)


def estimate_payoff(trajectories: list[Trajectory], R: float | None = None) -> PayoffEstimate:
    """Average discounted Player-2 return over the trajectories."""
    if not trajectories:
        raise ValueError("cannot estimate a payoff from zero trajectories")
    gammas = {t.gamma for t in trajectories}
    if len(gammas) != 1:
        raise ValueError(f"trajectories mix discount factors {sorted(gammas)}")
    returns = np.array([t.discounted_return() for t in trajectories])
    bound = float(np.abs(returns).max()) if R is None else float(R)
    var = float(returns.var(ddof=1)) if len(returns) > 1 else 0.0
    return PayoffEstimate(float(returns.mean()), len(returns), bound, var)


def exact_gradient(game: MatrixGame, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``x^T M y``: ``(M y, M^T x)``."""
    M = game.payoff
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != (M.shape[0],) or y.shape != (M.shape[1],):
        raise ValueError(f"strategy shapes {x.shape}, {y.shape} do not fit a {M.shape} game")
    return M @ y, M.T @ x


@dataclass(frozen=True)
class GradientEstimate:
    """Sample-mean gradient with per-component sample variance of the summands."""

    g: np.ndarray
    m: int
    var: np.ndarray

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.var / self.m)


def reinforce_gradient(trajectories: list[Trajectory], policy, q_estimates, side: str = "x") -> GradientEstimate:
    """Score-function estimate ``1/m sum_i sum_t grad log pi(a_t|s_t) Q_t``.

    ``side`` picks which player's actions in the trajectories belong to
    ``policy``. ``q_estimates`` holds one array per trajectory (or, for
    one-step games, one scalar per trajectory).
    """
    m = len(trajectories)
    if m == 0:
        raise ValueError("empty trajectory batch")
    if side not in ("x", "y"):
        raise ValueError("side must be 'x' or 'y'")
    if len(q_estimates) != m:
        raise ValueError("need one Q estimate sequence per trajectory")
    qs = [np.atleast_1d(np.asarray(q, dtype=float)) for q in q_estimates]
    acts = [t.actions_x if side == "x" else t.actions_y for t in trajectories]

    if isinstance(policy, SimplexPolicy):
        per_traj = np.zeros((m, policy.n_actions))
        for i, (a, q) in enumerate(zip(acts, qs)):
            np.add.at(per_traj[i], a, q)
        pa = policy.p
        if np.any(pa[np.concatenate(acts)] <= 0):
            raise ValueError("log-probability gradient of a zero-probability action")
        per_traj /= np.maximum(pa, PROB_FLOOR)
        var = per_traj.var(axis=0, ddof=1) if m > 1 else np.zeros(policy.n_actions)
        return GradientEstimate(per_traj.mean(axis=0), m, var)

    if isinstance(policy, TabularSoftmaxPolicy):
        total = np.zeros_like(policy.logits)
        sq = np.zeros_like(policy.logits)
        scratch = np.zeros_like(policy.logits)
        for t, a, q in zip(trajectories, acts, qs):
            g = _softmax_score_sum(policy, t.obs, a, q, scratch)
            total += g
            sq += g * g
            scratch[t.obs] = 0.0
        mean = total / m
        var = (sq - m * mean * mean) / (m - 1) if m > 1 else np.zeros_like(mean)
        return GradientEstimate(mean, m, np.maximum(var, 0.0))

    raise TypeError(f"cannot differentiate {type(policy).__name__}")


def _softmax_score_sum(policy: TabularSoftmaxPolicy, obs, actions, weights, out: np.ndarray) -> np.ndarray:
    """Accumulate ``sum_t w_t (onehot(a_t) - pi(.|s_t))`` into the rows of ``out``."""
    pi = policy.probs(obs)
    contrib = -pi * weights[:, None]
    contrib[np.arange(len(actions)), actions] += weights
    np.add.at(out, obs, contrib)
    return out


def gae_advantages(trajectory: Trajectory, values: ValueTable | np.ndarray, gamma: float, lam: float,
                   rewards: np.ndarray | None = None) -> np.ndarray:
    """Generalised advantage estimates with ``V(terminal) = 0``.

    ``rewards`` overrides the trajectory's Player-2 rewards (pass the negated
    rewards when the learner is Player 1).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    r = trajectory.rewards if rewards is None else np.asarray(rewards, dtype=float)
    v = values(trajectory.obs) if isinstance(values, ValueTable) else np.asarray(values, dtype=float)
    v_next = np.append(v[1:], 0.0)
    delta = r + gamma * v_next - v
    adv = np.empty_like(delta)
    acc = 0.0
    for t in range(len(delta) - 1, -1, -1):
        acc = delta[t] + gamma * lam * acc
        adv[t] = acc
    return adv
