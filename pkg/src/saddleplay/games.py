"""Two-player zero-sum environments: matrix games and 6x9 grid-world soccer.

Every environment reports a single scalar reward ``r`` per step, the utility
of Player 2 (the ``y`` side). Player 1 (the ``x`` side) receives ``-r``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "MatrixGame",
    "MATCHING_PENNIES",
    "SKEWED_MATCHING_PENNIES",
    "ROCK_PAPER_SCISSORS",
    "EXTENDED_MATCHING_PENNIES",
    "MATRIX_GAMES",
    "matrix_payoff",
    "matrix_sample",
    "Soccer",
    "SoccerState",
    "SOCCER_PRESETS",
    "soccer_reset",
    "soccer_step",
    "Trajectory",
    "rollout",
    "rollout_batch",
    "rule_policy",
    "make_env",
    "ENV_IDS",
]


def _check_strategy(p, n: int, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] != n:
        raise ValueError(f"{name} has shape {p.shape}, expected ({n},)")
    return p


@dataclass(frozen=True)
class MatrixGame:
    """One-shot matrix game; ``payoff[a][b]`` is Player 2's reward."""

    name: str
    table: tuple[tuple[Fraction, ...], ...]
    obs_count: int = field(default=1, init=False)

    def __post_init__(self):
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.table)
        if not rows or any(len(r) != len(rows[0]) for r in rows) or not rows[0]:
            raise ValueError("payoff must be a non-empty rectangular matrix")
        object.__setattr__(self, "table", rows)
        M = np.array([[float(v) for v in row] for row in rows])
        M.flags.writeable = False
        object.__setattr__(self, "_payoff", M)

    @property
    def payoff(self) -> np.ndarray:
        return self._payoff

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.table), len(self.table[0])

    @property
    def n_actions_x(self) -> int:
        return self.shape[0]

    @property
    def n_actions_y(self) -> int:
        return self.shape[1]

    @property
    def reward_bound(self) -> float:
        return float(np.abs(self._payoff).max())

    @property
    def time_limit(self) -> int:
        return 1

    def negated(self) -> "MatrixGame":
        """The same game with the opposite sign convention."""
        return MatrixGame(self.name + "_negated", tuple(tuple(-v for v in r) for r in self.table))


def _game(name: str, rows: Sequence[Sequence[str]]) -> MatrixGame:
    return MatrixGame(name, tuple(tuple(Fraction(v) for v in r) for r in rows))


# Player-2 entries transcribed from the published payoff tables.
MATCHING_PENNIES = _game("matching_pennies", [["-1", "1"], ["1", "-1"]])
SKEWED_MATCHING_PENNIES = _game("skewed_mp", [["-2", "0"], ["1", "-2"]])
ROCK_PAPER_SCISSORS = _game("rps", [["0", "1", "-1"], ["-1", "0", "1"], ["1", "-1", "0"]])
EXTENDED_MATCHING_PENNIES = _game("extended_mp", [["-1", "1", "-1/2"], ["1", "-1", "1/2"]])

MATRIX_GAMES = {
    g.name: g
    for g in (MATCHING_PENNIES, SKEWED_MATCHING_PENNIES, ROCK_PAPER_SCISSORS, EXTENDED_MATCHING_PENNIES)
}


def matrix_payoff(game: MatrixGame, x, y) -> float:
    """Expected Player-2 utility ``x^T M y``."""
    rows, cols = game.shape
    x = _check_strategy(x, rows, "x")
    y = _check_strategy(y, cols, "y")
    return float(x @ game.payoff @ y)


def matrix_sample(game: MatrixGame, x, y, rng: np.random.Generator) -> tuple[int, int, float]:
    rows, cols = game.shape
    x = _check_strategy(x, rows, "x")
    y = _check_strategy(y, cols, "y")
    a = int(rng.choice(rows, p=x))
    b = int(rng.choice(cols, p=y))
    return a, b, float(game.table[a][b])


# ---------------------------------------------------------------------------
# Grid-world soccer
# ---------------------------------------------------------------------------

ROWS, COLS = 6, 9
N_CELLS = ROWS * COLS
N_OBS = N_CELLS * N_CELLS * 2
UP, DOWN, LEFT, RIGHT, NOOP = range(5)
ACTION_NAMES = ("up", "down", "left", "right", "noop")
_DR = np.array([-1, 1, 0, 0, 0])
_DC = np.array([0, 0, -1, 1, 0])

SOCCER_PRESETS = {
    "default": {"time_limit": 100, "goal_rows": (2, 3)},
    "short": {"time_limit": 50, "goal_rows": (2, 3)},
}


@dataclass(frozen=True)
class SoccerState:
    posA: int
    posB: int
    ballA: bool
    t: int = 0

    def __post_init__(self):
        for p in (self.posA, self.posB):
            if not 0 <= p < N_CELLS:
                raise ValueError(f"cell index {p} out of range")
        if self.posA == self.posB:
            raise ValueError("players cannot share a cell")

    @property
    def observation(self) -> int:
        return encode_obs(self.posA, self.posB, self.ballA)


def encode_obs(posA, posB, ballA):
    return (posA * N_CELLS + posB) * 2 + ballA


def decode_obs(obs):
    obs = np.asarray(obs)
    ballA = (obs % 2).astype(bool)
    pair = obs // 2
    return pair // N_CELLS, pair % N_CELLS, ballA


@dataclass(frozen=True)
class Soccer:
    """6x9 soccer; team A (Player 1, ``x``) attacks the right edge, B the left."""

    time_limit: int = 100
    goal_rows: tuple[int, ...] = (2, 3)
    name: str = "soccer"

    n_actions_x = 5
    n_actions_y = 5
    obs_count = N_OBS
    reward_bound = 1.0

    def __post_init__(self):
        if self.time_limit < 1:
            raise ValueError("time_limit must be positive")
        if not self.goal_rows or any(not 0 <= r < ROWS for r in self.goal_rows):
            raise ValueError(f"goal_rows must lie in 0..{ROWS - 1}")
        object.__setattr__(self, "goal_rows", tuple(sorted(self.goal_rows)))

    @classmethod
    def preset(cls, key: str = "default", **overrides) -> "Soccer":
        cfg = dict(SOCCER_PRESETS[key])
        cfg.update(overrides)
        return cls(time_limit=int(cfg["time_limit"]), goal_rows=tuple(cfg["goal_rows"]))

    def reset_batch(self, m: int, rng: np.random.Generator):
        # A starts in columns 0-3, B in columns 5-8.
        half = COLS // 2
        ra, ca = rng.integers(0, ROWS, m), rng.integers(0, half, m)
        rb, cb = rng.integers(0, ROWS, m), rng.integers(COLS - half, COLS, m)
        ballA = rng.random(m) < 0.5
        return ra * COLS + ca, rb * COLS + cb, ballA

    def transition(self, posA, posB, ballA, aA, aB, a_first):
        """Deterministic move resolution given the move order.

        Works elementwise on arrays. Returns ``(posA, posB, ballA, reward)``
        where reward is +1 if B scored, -1 if A scored, else 0.
        """
        posA, posB = np.array(posA, dtype=np.int64), np.array(posB, dtype=np.int64)
        ballA = np.array(ballA, dtype=bool)
        aA, aB = np.asarray(aA, dtype=np.int64), np.asarray(aB, dtype=np.int64)
        a_first = np.asarray(a_first, dtype=bool)
        goal_row_set = np.zeros(ROWS, dtype=bool)
        goal_row_set[list(self.goal_rows)] = True

        reward = np.zeros(np.broadcast(posA, posB).shape)
        alive = np.ones(reward.shape, dtype=bool)
        for mover_is_a in (a_first, ~a_first):
            pos_m = np.where(mover_is_a, posA, posB)
            pos_o = np.where(mover_is_a, posB, posA)
            holds = np.where(mover_is_a, ballA, ~ballA)
            act = np.where(mover_is_a, aA, aB)
            r, c = np.divmod(pos_m, COLS)
            nr, nc = r + _DR[act], c + _DC[act]
            exit_col = np.where(mover_is_a, COLS, -1)
            goal = alive & holds & (nc == exit_col) & goal_row_set[r]
            inside = (nr >= 0) & (nr < ROWS) & (nc >= 0) & (nc < COLS)
            target = np.where(inside, nr * COLS + nc, pos_m)
            blocked = target == pos_o
            new_pos = np.where(blocked | ~alive, pos_m, target)
            steal = alive & blocked & ~holds
            posA = np.where(mover_is_a, new_pos, posA)
            posB = np.where(mover_is_a, posB, new_pos)
            ballA = np.where(steal, mover_is_a, ballA)
            reward = np.where(goal, np.where(mover_is_a, -1.0, 1.0), reward)
            alive = alive & ~goal
        return posA, posB, ballA, reward


def soccer_reset(rng: np.random.Generator, env: Soccer | None = None) -> SoccerState:
    env = env or Soccer()
    posA, posB, ballA = env.reset_batch(1, rng)
    return SoccerState(int(posA[0]), int(posB[0]), bool(ballA[0]), 0)


class TerminalStateError(RuntimeError):
    """Raised when stepping an episode that has already ended."""


def soccer_step(
    s: SoccerState, aA: int, aB: int, rng: np.random.Generator, env: Soccer | None = None
) -> tuple[SoccerState, float, bool]:
    env = env or Soccer()
    if s.t >= env.time_limit:
        raise TerminalStateError(f"state at t={s.t} is past the time limit {env.time_limit}")
    if aA not in range(5) or aB not in range(5):
        raise ValueError(f"actions must be in 0..4, got {(aA, aB)}")
    a_first = rng.random() < 0.5
    posA, posB, ballA, r = env.transition(s.posA, s.posB, s.ballA, aA, aB, a_first)
    r = float(r)
    t = s.t + 1
    done = r != 0.0 or t >= env.time_limit
    nxt = SoccerState(int(posA), int(posB), bool(ballA), t)
    return nxt, r, done


def rule_policy(s: SoccerState | int, side: str = "A") -> int:
    """Greedy scripted player: carry the ball to goal, otherwise chase."""
    if isinstance(s, SoccerState):
        obs = s.observation
    else:
        obs = int(s)
    return int(rule_actions(np.array([obs]), side)[0])


def rule_actions(obs, side: str, goal_rows: tuple[int, ...] = (2, 3)) -> np.ndarray:
    posA, posB, ballA = decode_obs(obs)
    if side == "A":
        me, opp, mine, exit_dir = posA, posB, ballA, RIGHT
    elif side == "B":
        me, opp, mine, exit_dir = posB, posA, ~ballA, LEFT
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    r, c = np.divmod(me, COLS)
    ro, co = np.divmod(opp, COLS)
    lo, hi = min(goal_rows), max(goal_rows)
    attack = np.where(r < lo, DOWN, np.where(r > hi, UP, exit_dir))
    chase = np.where(
        r < ro, DOWN, np.where(r > ro, UP, np.where(c < co, RIGHT, np.where(c > co, LEFT, NOOP)))
    )
    return np.where(mine, attack, chase).astype(np.int64)


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """One episode: observations, both players' actions and Player-2 rewards."""

    obs: np.ndarray
    actions_x: np.ndarray
    actions_y: np.ndarray
    rewards: np.ndarray
    gamma: float = 1.0
    horizon: int = 1

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def steps(self):
        return list(zip(self.obs.tolist(), zip(self.actions_x.tolist(), self.actions_y.tolist()), self.rewards.tolist()))

    def discounted_return(self) -> float:
        disc = self.gamma ** np.arange(len(self.rewards))
        return float(disc @ self.rewards)


# A sampler maps (observations, rng) -> actions. Policies expose ``sample_batch``.
Sampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def _sampler(policy) -> Sampler:
    if hasattr(policy, "sample_batch"):
        return policy.sample_batch
    if callable(policy):
        return policy
    raise TypeError(f"{policy!r} cannot act")


def rollout_batch(env, policy_x, policy_y, m: int, rng: np.random.Generator, gamma: float = 1.0) -> list[Trajectory]:
    """Play ``m`` independent episodes in lockstep."""
    if m < 1:
        raise ValueError("m must be >= 1")
    sx, sy = _sampler(policy_x), _sampler(policy_y)
    if isinstance(env, MatrixGame):
        obs = np.zeros(m, dtype=np.int64)
        a = np.asarray(sx(obs, rng), dtype=np.int64)
        b = np.asarray(sy(obs, rng), dtype=np.int64)
        r = env.payoff[a, b]
        return [
            Trajectory(obs[i : i + 1], a[i : i + 1], b[i : i + 1], r[i : i + 1], gamma, 1)
            for i in range(m)
        ]
    T = env.time_limit
    posA, posB, ballA = env.reset_batch(m, rng)
    obs_buf = np.zeros((T, m), dtype=np.int64)
    ax_buf = np.zeros((T, m), dtype=np.int64)
    ay_buf = np.zeros((T, m), dtype=np.int64)
    r_buf = np.zeros((T, m))
    length = np.full(m, T)
    alive = np.ones(m, dtype=bool)
    for t in range(T):
        obs = encode_obs(posA, posB, ballA)
        aA = np.asarray(sx(obs, rng), dtype=np.int64)
        aB = np.asarray(sy(obs, rng), dtype=np.int64)
        a_first = rng.random(m) < 0.5
        nA, nB, nball, r = env.transition(posA, posB, ballA, aA, aB, a_first)
        obs_buf[t], ax_buf[t], ay_buf[t] = obs, aA, aB
        r_buf[t] = np.where(alive, r, 0.0)
        ended = alive & (r != 0.0)
        length[ended] = t + 1
        alive &= ~ended
        posA, posB, ballA = np.where(alive, nA, posA), np.where(alive, nB, posB), np.where(alive, nball, ballA)
        if not alive.any():
            break
    return [
        Trajectory(obs_buf[: length[i], i].copy(), ax_buf[: length[i], i].copy(), ay_buf[: length[i], i].copy(),
                   r_buf[: length[i], i].copy(), gamma, T)
        for i in range(m)
    ]


def rollout(env, policy_x, policy_y, rng: np.random.Generator, T: int | None = None, gamma: float = 1.0) -> Trajectory:
    """Play a single episode. ``T`` overrides the environment's time limit."""
    if T is not None and not isinstance(env, MatrixGame):
        env = Soccer(time_limit=T, goal_rows=env.goal_rows)
    return rollout_batch(env, policy_x, policy_y, 1, rng, gamma)[0]


ENV_IDS = tuple(MATRIX_GAMES) + ("soccer",)


def make_env(env_id: str, **preset):
    """Build an environment from its string id.

    Soccer accepts ``preset``, ``time_limit`` and ``goal_rows``. Matrix games
    accept ``orientation``: ``"table"`` (default) or ``"caption"``, the latter
    flipping the sign of every payoff.
    """
    if env_id in MATRIX_GAMES:
        orientation = preset.pop("orientation", "table")
        if preset:
            raise ValueError(f"matrix game {env_id!r} takes no preset keys {sorted(preset)}")
        if orientation == "table":
            return MATRIX_GAMES[env_id]
        if orientation == "caption":
            return MATRIX_GAMES[env_id].negated()
        raise ValueError(f"orientation must be 'table' or 'caption', got {orientation!r}")
    if env_id == "soccer":
        key = preset.pop("preset", "default")
        return Soccer.preset(key, **preset)
    raise KeyError(f"unknown environment id {env_id!r}; choose from {', '.join(ENV_IDS)}")
