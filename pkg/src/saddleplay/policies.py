"""Policies: simplex strategies, tabular softmax tables, value tables, checkpoints."""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .games import rule_actions

__all__ = [
    "PROB_FLOOR",
    "SimplexPolicy",
    "TabularSoftmaxPolicy",
    "ValueTable",
    "RulePolicy",
    "UniformPolicy",
    "action_distribution",
    "sample_action",
    "log_prob_gradient",
    "entropy",
    "entropy_gradient",
    "softmax",
    "save_checkpoint",
    "load_checkpoint",
]

# Probabilities are floored here before logs and reciprocals.
PROB_FLOOR = 1e-8


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling, one uniform draw per row."""
    probs = np.atleast_2d(probs)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    return np.minimum((cdf <= u[:, None]).sum(axis=1), probs.shape[1] - 1)


@dataclass
class SimplexPolicy:
    """Directly parameterised mixed strategy for a one-shot game."""

    p: np.ndarray
    kind: str = field(default="simplex", init=False)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).copy()
        if self.p.ndim != 1 or np.any(self.p < 0) or abs(self.p.sum() - 1.0) > 1e-9:
            raise ValueError(f"not a point on the simplex: {self.p}")

    @property
    def params(self) -> np.ndarray:
        return self.p

    @property
    def n_actions(self) -> int:
        return self.p.shape[0]

    def probs(self, obs) -> np.ndarray:
        obs = np.asarray(obs)
        if np.any(obs != 0):
            raise IndexError("a simplex policy has a single observation 0")
        return np.broadcast_to(self.p, obs.shape + self.p.shape)

    def sample_batch(self, obs, rng: np.random.Generator) -> np.ndarray:
        obs = np.asarray(obs)
        cdf = np.cumsum(self.p)
        u = rng.random(obs.shape[0]) * cdf[-1]
        return np.minimum(np.searchsorted(cdf, u, side="right"), self.n_actions - 1)

    def score(self, actions: np.ndarray) -> np.ndarray:
        """Per-sample score vectors, shape (len(actions), n_actions)."""
        actions = np.asarray(actions)
        pa = self.p[actions]
        if np.any(pa <= 0):
            raise ValueError("log-probability gradient of a zero-probability action")
        out = np.zeros((actions.shape[0], self.n_actions))
        out[np.arange(actions.shape[0]), actions] = 1.0 / np.maximum(pa, PROB_FLOOR)
        return out

    def copy(self) -> "SimplexPolicy":
        return SimplexPolicy(self.p.copy())


@dataclass
class TabularSoftmaxPolicy:
    """One logit row per observation; actions ~ softmax(logits[obs])."""

    logits: np.ndarray
    kind: str = field(default="tabular_softmax", init=False)

    @classmethod
    def zeros(cls, n_obs: int, n_actions: int = 5) -> "TabularSoftmaxPolicy":
        return cls(np.zeros((n_obs, n_actions)))

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=float)
        if self.logits.ndim != 2:
            raise ValueError("logits must be a 2-D table")

    @property
    def params(self) -> np.ndarray:
        return self.logits

    @property
    def n_actions(self) -> int:
        return self.logits.shape[1]

    def probs(self, obs) -> np.ndarray:
        obs = np.asarray(obs)
        if np.any((obs < 0) | (obs >= self.logits.shape[0])):
            raise IndexError(f"observation out of range 0..{self.logits.shape[0] - 1}")
        return softmax(self.logits[obs])

    def sample_batch(self, obs, rng: np.random.Generator) -> np.ndarray:
        return _categorical(self.probs(np.asarray(obs)), rng)

    def copy(self) -> "TabularSoftmaxPolicy":
        return TabularSoftmaxPolicy(self.logits.copy())


@dataclass
class ValueTable:
    v: np.ndarray
    kind: str = field(default="value_table", init=False)

    @classmethod
    def zeros(cls, n_obs: int) -> "ValueTable":
        return cls(np.zeros(n_obs))

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)

    @property
    def params(self) -> np.ndarray:
        return self.v

    def __call__(self, obs) -> np.ndarray:
        return self.v[obs]

    def copy(self) -> "ValueTable":
        return ValueTable(self.v.copy())


class RulePolicy:
    """Scripted soccer player for side ``"A"`` or ``"B"``; deterministic."""

    kind = "rule"

    def __init__(self, side: str, goal_rows: tuple[int, ...] = (2, 3)):
        self.side = side
        self.goal_rows = tuple(goal_rows)

    def sample_batch(self, obs, rng=None) -> np.ndarray:
        return rule_actions(np.asarray(obs), self.side, self.goal_rows)

    def probs(self, obs) -> np.ndarray:
        obs = np.asarray(obs)
        out = np.zeros(obs.shape + (5,))
        np.put_along_axis(out, self.sample_batch(obs)[..., None], 1.0, axis=-1)
        return out


class UniformPolicy:
    """Uniformly random actions."""

    kind = "uniform"

    def __init__(self, n_actions: int = 5):
        self.n_actions = n_actions

    def sample_batch(self, obs, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.n_actions, np.asarray(obs).shape[0])

    def probs(self, obs) -> np.ndarray:
        obs = np.asarray(obs)
        return np.full(obs.shape + (self.n_actions,), 1.0 / self.n_actions)


def action_distribution(policy, observation) -> np.ndarray:
    return np.array(policy.probs(np.asarray(observation)), dtype=float)


def sample_action(policy, observation, rng: np.random.Generator) -> int:
    return int(policy.sample_batch(np.array([observation]), rng)[0])


def log_prob_gradient(policy, observation, action: int) -> np.ndarray:
    """Gradient of ``log pi(action | observation)`` w.r.t. the policy parameters."""
    if isinstance(policy, SimplexPolicy):
        return policy.score(np.array([action]))[0]
    if isinstance(policy, TabularSoftmaxPolicy):
        pi = policy.probs(observation)
        if pi[action] <= 0:
            raise ValueError("log-probability gradient of a zero-probability action")
        g = np.zeros_like(policy.logits)
        g[observation] = -pi
        g[observation, action] += 1.0
        return g
    raise TypeError(f"no parameters to differentiate for {type(policy).__name__}")


def entropy(policy, observation) -> float:
    p = action_distribution(policy, observation)
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def entropy_gradient(policy: TabularSoftmaxPolicy, observation) -> np.ndarray:
    """d H(softmax(logits[s])) / d logits, as a full table."""
    p = policy.probs(observation)
    logp = np.log(np.maximum(p, PROB_FLOOR))
    h = -(p * logp).sum()
    g = np.zeros_like(policy.logits)
    g[observation] = -p * (logp + h)
    return g


# ---------------------------------------------------------------------------
# Checkpoints
#
# Layout: b"SPCK" | u32 format version | u32 header length | UTF-8 JSON header
# | raw little-endian float64 arrays in header order. No timestamps, so equal
# inputs give equal bytes.
# ---------------------------------------------------------------------------

_MAGIC = b"SPCK"
CHECKPOINT_VERSION = 1
_KINDS = {"simplex": SimplexPolicy, "tabular_softmax": TabularSoftmaxPolicy, "value_table": ValueTable}


def save_checkpoint(path, parts: dict, metadata: dict | None = None) -> None:
    """Write named policies/value tables plus metadata to ``path``."""
    entries, blobs = [], []
    for name, obj in parts.items():
        if obj.kind not in _KINDS:
            raise TypeError(f"cannot checkpoint a {obj.kind!r} policy")
        arr = np.ascontiguousarray(obj.params, dtype="<f8")
        entries.append({"name": name, "kind": obj.kind, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps({"parts": entries, "metadata": metadata or {}}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(header)) + header)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> tuple[dict, dict]:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12 : 12 + hlen])
    offset = 12 + hlen
    parts = {}
    for e in header["parts"]:
        n = int(np.prod(e["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(e["shape"]).astype(float)
        offset += 8 * n
        parts[e["name"]] = _KINDS[e["kind"]](arr)
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes after payload")
    return parts, header["metadata"]
