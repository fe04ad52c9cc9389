"""Ground truth and scoring: Nash oracle, equilibrium distance, tournaments, Elo."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .games import MatrixGame, rollout_batch

__all__ = [
    "NashSolution",
    "nash_oracle",
    "optimal_vertices",
    "equilibrium_distance",
    "duality_gap_true",
    "Agent",
    "MatchRecord",
    "run_tournament",
    "elo_expected_score",
    "EloTable",
    "fit_elo",
    "payoff_matrix_from_results",
    "winrate_tables",
]

log = logging.getLogger(__name__)

MAX_ORACLE_DIM = 6


# ---------------------------------------------------------------------------
# Exact equilibrium of a matrix game
# ---------------------------------------------------------------------------


def _solve_exact(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """Gauss-Jordan over the rationals; None if singular."""
    n = len(A)
    M = [row[:] + [rhs] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def _player_vertices(P: list[list[Fraction]]) -> tuple[Fraction, list[tuple[Fraction, ...]]]:
    """Optimal vertices for the player choosing rows of ``P`` to minimise
    the maximum column payoff ``max_b (P^T p)_b``.

    Enumerates square systems: support ``S`` of ``p`` and an equally sized set
    ``K`` of columns held at a common level ``v``. A feasible solution has
    ``p >= 0`` and every column payoff ``<= v``; the optimal ones attain the
    smallest ``v``.
    """
    rows, cols = len(P), len(P[0])
    found: list[tuple[Fraction, tuple[Fraction, ...]]] = []
    for size in range(1, min(rows, cols) + 1):
        for S in itertools.combinations(range(rows), size):
            for K in itertools.combinations(range(cols), size):
                # unknowns: p_s for s in S, then v
                A = [[P[s][k] for s in S] + [Fraction(-1)] for k in K]
                A.append([Fraction(1)] * size + [Fraction(0)])
                sol = _solve_exact(A, [Fraction(0)] * size + [Fraction(1)])
                if sol is None or any(p < 0 for p in sol[:size]):
                    continue
                p = [Fraction(0)] * rows
                for s, val in zip(S, sol[:size]):
                    p[s] = val
                v = sol[size]
                if all(sum(p[a] * P[a][c] for a in range(rows)) <= v for c in range(cols)):
                    found.append((v, tuple(p)))
    best = min(v for v, _ in found)
    verts = []
    for v, p in found:
        if v == best and p not in verts:
            verts.append(p)
    return best, verts


def optimal_vertices(game: MatrixGame):
    """Exact value and the vertex sets of both players' optimal strategies.

    Returns ``(value, x_vertices, y_vertices)`` with ``value`` the Player-2
    utility at equilibrium. The equilibrium set is the product of the convex
    hulls of the two vertex lists.
    """
    rows, cols = game.shape
    if max(rows, cols) > MAX_ORACLE_DIM:
        raise ValueError(f"oracle supports games up to {MAX_ORACLE_DIM}x{MAX_ORACLE_DIM}, got {rows}x{cols}")
    M = [list(r) for r in game.table]
    # x minimises max_b (M^T x)_b; y maximises min_a (M y)_a, i.e. minimises max_a (-M y)_a.
    vx, xs = _player_vertices(M)
    negMT = [[-M[a][b] for a in range(rows)] for b in range(cols)]
    vy, ys = _player_vertices(negMT)
    if vx != -vy:
        raise ArithmeticError(f"minimax values disagree: {vx} vs {-vy}")
    return vx, xs, ys


@dataclass(frozen=True)
class NashSolution:
    x: tuple[Fraction, ...]
    y: tuple[Fraction, ...]
    value: Fraction
    exact: bool = True

    @property
    def player1_value(self) -> Fraction:
        return -self.value

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([float(v) for v in self.x]), np.array([float(v) for v in self.y])


def _support_key(p):
    return (sum(1 for v in p if v != 0), tuple(i for i, v in enumerate(p) if v != 0))


def nash_oracle(game: MatrixGame) -> NashSolution:
    """An exact equilibrium: the optimal vertex of smallest support for each side."""
    value, xs, ys = optimal_vertices(game)
    x = min(xs, key=_support_key)
    y = min(ys, key=_support_key)
    M = game.table
    rows, cols = game.shape
    # Saddle check against every pure deviation, in exact arithmetic.
    col_pay = [sum(x[a] * M[a][b] for a in range(rows)) for b in range(cols)]
    row_pay = [sum(M[a][b] * y[b] for b in range(cols)) for a in range(rows)]
    if max(col_pay) > value or min(row_pay) < value:
        raise ArithmeticError("oracle output failed the saddle check")
    return NashSolution(x, y, value, True)


def _sq_dist_to_hull(p: np.ndarray, verts: np.ndarray) -> float:
    if len(verts) == 1:
        return float(((p - verts[0]) ** 2).sum())
    if len(verts) == 2:
        a, b = verts
        d = b - a
        t = np.clip((p - a) @ d / (d @ d), 0.0, 1.0)
        return float(((p - (a + t * d)) ** 2).sum())
    from scipy.optimize import minimize

    k = len(verts)
    res = minimize(
        lambda w: float(((w @ verts - p) ** 2).sum()),
        np.full(k, 1.0 / k),
        jac=lambda w: 2 * verts @ (w @ verts - p),
        bounds=[(0, 1)] * k,
        constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    return float(res.fun)


_VERTEX_CACHE: dict = {}


def equilibrium_distance(x, y, game: MatrixGame) -> float:
    """Squared L2 distance from ``(x, y)`` to the game's equilibrium set."""
    key = (game.name, game.table)
    if key not in _VERTEX_CACHE:
        _, xs, ys = optimal_vertices(game)
        _VERTEX_CACHE[key] = (
            np.array([[float(v) for v in p] for p in xs]),
            np.array([[float(v) for v in p] for p in ys]),
        )
    xv, yv = _VERTEX_CACHE[key]
    return _sq_dist_to_hull(np.asarray(x, dtype=float), xv) + _sq_dist_to_hull(np.asarray(y, dtype=float), yv)


def duality_gap_true(game: MatrixGame, x, y) -> float:
    """``max_b f(x, e_b) - min_a f(e_a, y)``; zero exactly at equilibria."""
    M = game.payoff
    return float((M.T @ np.asarray(x, dtype=float)).max() - (M @ np.asarray(y, dtype=float)).min())


# ---------------------------------------------------------------------------
# Tournaments
# ---------------------------------------------------------------------------


@dataclass
class Agent:
    """A competitor: one policy per side, plus an id."""

    id: str
    x: object
    y: object
    env_id: str = ""


@dataclass
class MatchRecord:
    agent_a: str
    agent_b: str
    wins_a: int
    wins_b: int
    draws: int
    matches: int
    # Mean Player-2 reward with A as Player 1 (x) and with A as Player 2 (y).
    payoff_a_as_x: float = float("nan")
    payoff_a_as_y: float = float("nan")

    def __post_init__(self):
        if min(self.wins_a, self.wins_b, self.draws) < 0:
            raise ValueError("negative counts")
        if self.wins_a + self.wins_b + self.draws != self.matches:
            raise ValueError("wins and draws must add up to the match count")

    @property
    def score_a(self) -> float:
        return (self.wins_a + 0.5 * self.draws) / self.matches

    def to_dict(self) -> dict:
        return asdict(self)


def run_tournament(agents: list[Agent], env, matches_per_pair: int, rng_for, include_self: bool = False,
                   gamma: float = 1.0, threads: int = 1) -> list[MatchRecord]:
    """Round robin; each pair splits its matches evenly across side assignments.

    ``rng_for(i, j, side)`` must return the generator for pair ``(i, j)`` with
    agent ``i`` as Player 1 when ``side == 0``; deriving streams per pair keeps
    the result independent of evaluation order and of ``threads``.
    """
    if matches_per_pair < 1:
        raise ValueError("matches_per_pair must be positive")
    env_ids = {a.env_id for a in agents if a.env_id}
    if len(env_ids) > 1:
        raise ValueError(f"agents come from different environments: {sorted(env_ids)}")
    first = (matches_per_pair + 1) // 2
    second = matches_per_pair - first
    pairs = list(itertools.combinations_with_replacement(range(len(agents)), 2) if include_self
                 else itertools.combinations(range(len(agents)), 2))

    def play(ij):
        i, j = ij
        A, B = agents[i], agents[j]
        wins_a = wins_b = draws = 0
        pay_x = pay_y = float("nan")
        if first:
            rets = np.array([t.discounted_return() for t in rollout_batch(env, A.x, B.y, first, rng_for(i, j, 0), gamma)])
            wins_a += int((rets < 0).sum())
            wins_b += int((rets > 0).sum())
            draws += int((rets == 0).sum())
            pay_x = float(rets.mean())
        if second:
            rets = np.array([t.discounted_return() for t in rollout_batch(env, B.x, A.y, second, rng_for(i, j, 1), gamma)])
            wins_a += int((rets > 0).sum())
            wins_b += int((rets < 0).sum())
            draws += int((rets == 0).sum())
            pay_y = float(rets.mean())
        return MatchRecord(A.id, B.id, wins_a, wins_b, draws, matches_per_pair, pay_x, pay_y)

    if threads <= 1:
        return [play(ij) for ij in pairs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(play, pairs))


# ---------------------------------------------------------------------------
# Elo
# ---------------------------------------------------------------------------

_ELO_SCALE = math.log(10) / 400.0


def elo_expected_score(r_a: float, r_b: float) -> float:
    """Expected score of A: ``1 / (1 + 10 ** ((r_b - r_a) / 400))``."""
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


@dataclass
class EloTable:
    ratings: dict[str, float]
    anchor: str
    iterations: int
    log_likelihood: float
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "ratings": self.ratings,
            "metadata": {
                "anchor": self.anchor,
                "iterations": self.iterations,
                "log_likelihood": self.log_likelihood,
                "converged": self.converged,
            },
        }


def _components(ids: list[str], edges: list[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(len(ids)))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for a, b in edges:
        parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for u in range(len(ids)):
        groups.setdefault(find(u), []).append(u)
    return list(groups.values())


def fit_elo(results: list[MatchRecord], anchor: str, tol: float = 1e-6, max_iter: int = 200,
            prior_draws: float = 0.0) -> EloTable:
    """Maximum-likelihood Elo ratings with draws scored as half wins.

    Newton's method on the log-likelihood with the anchor pinned at 0; stops
    once the gradient's sup-norm falls below ``tol``. ``prior_draws`` adds
    that many virtual draws to every observed pairing, which keeps ratings
    finite when one side never scores.
    """
    if not results:
        raise ValueError("no match results to fit")
    ids = sorted({r.agent_a for r in results} | {r.agent_b for r in results})
    if anchor not in ids:
        raise ValueError(f"anchor {anchor!r} did not play")
    idx = {a: k for k, a in enumerate(ids)}
    n = len(ids)
    S = np.zeros((n, n))  # S[a, b]: score of a against b
    N = np.zeros((n, n))
    for rec in results:
        a, b = idx[rec.agent_a], idx[rec.agent_b]
        if a == b:
            continue
        s = rec.wins_a + 0.5 * rec.draws + 0.5 * prior_draws
        tot = rec.matches + prior_draws
        S[a, b] += s
        S[b, a] += tot - s
        N[a, b] += tot
        N[b, a] += tot

    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if N[a, b] > 0]
    comps = _components(ids, edges)
    pinned = []
    for comp in comps:
        if idx[anchor] in comp:
            pinned.append(idx[anchor])
        else:
            pinned.append(comp[0])
            log.warning("comparison graph is disconnected; anchoring %s at 0 for its component",
                        ids[comp[0]])
    free = np.array([u for u in range(n) if u not in pinned], dtype=int)

    def loglik_grad_hess(r):
        diff = (r[:, None] - r[None, :]) * _ELO_SCALE
        p = 1.0 / (1.0 + np.exp(-diff))
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.where(N > 0, S * np.log(p) + (N - S) * np.log1p(-p), 0.0)
        ll = float(np.nansum(np.triu(ll, 1) + np.tril(ll, -1)) / 2.0)
        grad = _ELO_SCALE * (S - N * p).sum(axis=1)
        w = N * p * (1 - p) * _ELO_SCALE**2
        H = w - np.diag(w.sum(axis=1))
        return ll, grad, H

    r = np.zeros(n)
    ll, grad, H = loglik_grad_hess(r)
    it = 0
    converged = free.size == 0 or np.abs(grad[free]).max() < tol
    while not converged and it < max_iter:
        it += 1
        Hf = H[np.ix_(free, free)]
        try:
            step = np.linalg.solve(Hf, -grad[free])
        except np.linalg.LinAlgError:
            step = grad[free] * 32.0
        t = 1.0
        while True:
            cand = r.copy()
            cand[free] += t * step
            ll_new, g_new, H_new = loglik_grad_hess(cand)
            if ll_new >= ll - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        r, ll, grad, H = cand, ll_new, g_new, H_new
        converged = np.abs(grad[free]).max() < tol
    if not converged:
        log.warning("Elo fit stopped after %d iterations without converging", it)
    ratings = {a: float(r[idx[a]]) for a in ids}
    ratings[anchor] = 0.0
    return EloTable(ratings, anchor, it, ll, bool(converged))


# ---------------------------------------------------------------------------
# Win-rate tables
# ---------------------------------------------------------------------------


def payoff_matrix_from_results(results: list[MatchRecord], ids: list[str]) -> np.ndarray:
    """``F[r, c]`` = mean Player-2 reward of ``x`` of agent r against ``y`` of agent c."""
    pos = {a: k for k, a in enumerate(ids)}
    F = np.full((len(ids), len(ids)), np.nan)
    for rec in results:
        a, b = pos.get(rec.agent_a), pos.get(rec.agent_b)
        if a is None or b is None:
            continue
        if a == b:
            vals = [v for v in (rec.payoff_a_as_x, rec.payoff_a_as_y) if not math.isnan(v)]
            F[a, a] = float(np.mean(vals)) if vals else np.nan
            continue
        F[a, b] = rec.payoff_a_as_x
        F[b, a] = rec.payoff_a_as_y
    return F


def _mean_ci(vals: list[float]) -> tuple[float, float]:
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0:
        return float("nan"), float("nan")
    half = 1.96 * vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else 0.0
    return float(vals.mean()), float(half)


def winrate_tables(results, groupings: dict[str, list]):
    """Group-averaged win-rates with normal-approximation 95% half-widths.

    ``results`` is either a list of MatchRecord (then ``groupings`` lists
    agent ids) or a payoff matrix ``F`` (then ``groupings`` lists row
    indices), where ``F[r, c]`` is the mean Player-2 reward with agent r's
    ``x`` against agent c's ``y``. Returns ``(symmetric, one_sided)``, each a
    dict ``{(row_group, col_group): (mean, half_width)}`` where
    symmetric win(col vs row) = ((F[row, col] - F[col, row]) / 2) * 0.5 + 0.5
    and one-sided win(y of col vs x of row) = F[row, col] * 0.5 + 0.5.
    """
    if isinstance(results, (list, tuple)) and (not results or isinstance(results[0], MatchRecord)):
        ids = sorted({a for members in groupings.values() for a in members})
        pos = {a: k for k, a in enumerate(ids)}
        F = payoff_matrix_from_results(list(results), ids)
        groupings = {g: [pos[a] for a in members] for g, members in groupings.items()}
    else:
        F = results
    F = np.asarray(F, dtype=float)
    sym, one = {}, {}
    for gr, rows in groupings.items():
        for gc, cols in groupings.items():
            s_vals, o_vals = [], []
            for r in rows:
                for c in cols:
                    if not math.isnan(F[r, c]):
                        o_vals.append(F[r, c] * 0.5 + 0.5)
                    if r != c and not (math.isnan(F[r, c]) or math.isnan(F[c, r])):
                        s_vals.append((F[r, c] - F[c, r]) / 2 * 0.5 + 0.5)
            sym[(gr, gc)] = _mean_ci(s_vals)
            one[(gr, gc)] = _mean_ci(o_vals)
    return sym, one
