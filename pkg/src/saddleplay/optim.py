"""Parameter updates: projected SGD, RmsProp, the adaptive step and sample sizes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "project_simplex",
    "sgd_step",
    "RmsProp",
    "rmsprop_step",
    "clip_grad_norm",
    "adaptive_lr",
    "DegenerateStepError",
    "TheoryConfig",
    "sample_size_schedule",
    "eval_sample_size",
    "pg_sample_size",
    "LRSchedule",
]


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or not np.all(np.isfinite(v)):
        raise ValueError("expected a finite 1-D vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def sgd_step(params, grad, lr: float, sign: int = 1, projector=project_simplex) -> np.ndarray:
    """``project(params - sign * lr * grad)``; sign +1 descends, -1 ascends."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    out = np.asarray(params, dtype=float) - sign * lr * np.asarray(grad, dtype=float)
    return projector(out) if projector is not None else out


def clip_grad_norm(grads, max_norm: float | None):
    """Scale a list of arrays so their joint L2 norm is at most ``max_norm``."""
    if max_norm is None:
        return grads, float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if total > max_norm:
        scale = max_norm / total
        grads = [g * scale for g in grads]
    return grads, total


@dataclass
class RmsProp:
    """RmsProp with squared-gradient accumulator ``acc``."""

    alpha: float = 0.99
    eps: float = 1e-8
    acc: np.ndarray | None = None

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float, sign: int = 1) -> np.ndarray:
        if self.acc is None:
            self.acc = np.zeros_like(params, dtype=float)
        self.acc = self.alpha * self.acc + (1.0 - self.alpha) * grad * grad
        return params - sign * lr * grad / np.sqrt(self.acc + self.eps)

    def copy(self) -> "RmsProp":
        return RmsProp(self.alpha, self.eps, None if self.acc is None else self.acc.copy())


def rmsprop_step(state: RmsProp, params, grad, lr: float, sign: int = 1):
    """Functional form: returns ``(state', params')`` without touching ``state``."""
    new = state.copy()
    out = new.step(np.asarray(params, dtype=float), np.asarray(grad, dtype=float), lr, sign)
    return new, out


@dataclass
class LRSchedule:
    """``constant`` or ``linear_to_zero`` over ``total`` iterations."""

    lr: float
    kind: str = "constant"
    total: int = 1

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.kind not in ("constant", "linear_to_zero"):
            raise ValueError(f"unknown lr schedule {self.kind!r}")

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.lr
        return self.lr * max(0.0, 1.0 - k / max(self.total, 1))


class DegenerateStepError(ArithmeticError):
    """Adaptive step undefined: both gradient norms vanish while the gap is open."""


def adaptive_lr(E_hat: float, eps: float, gx_norm_sq: float, gy_norm_sq: float, alpha: float = 1.0) -> float:
    denom = gx_norm_sq + gy_norm_sq
    if alpha == 0:
        return 0.0
    if denom <= 0:
        raise DegenerateStepError(f"zero gradients with estimated gap {E_hat} > 2*eps")
    return alpha * (E_hat - 2 * eps) / denom


@dataclass(frozen=True)
class TheoryConfig:
    """Constants of the convergence theorem (see ``sample_size_schedule``)."""

    R: float = 1.0
    B: float = 1.0
    D: float = 2.0
    d: int = 2
    eps: float = 0.02
    delta: float = 0.1
    alpha: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("R", "B", "D", "eps", "delta", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.alpha > 2:
            raise ValueError("alpha must lie in (0, 2]")
        if self.D < 1:
            raise ValueError("D must be >= 1")
        if self.d <= 1:
            raise ValueError("d must exceed 1")
        if self.delta >= 1:
            raise ValueError("delta must be < 1")


def sample_size_schedule(k: int, cfg: TheoryConfig) -> int:
    """m_k = ceil(2 R^2 B^2 D^2 / eps^2 * ln(2 d 2^k / delta))."""
    lead = 2.0 * cfg.R**2 * cfg.B**2 * cfg.D**2 / cfg.eps**2
    return math.ceil(lead * (math.log(2 * cfg.d / cfg.delta) + k * math.log(2)))


def eval_sample_size(R: float, eps: float, delta: float) -> int:
    """Episodes for a payoff estimate within ``eps`` w.p. ``1 - delta`` (Hoeffding)."""
    return math.ceil(2.0 * R**2 / eps**2 * math.log(2.0 / delta))


def pg_sample_size(R: float, B: float, d: int, eps: float, delta: float) -> int:
    """Episodes for an eps-accurate (sup-norm) policy gradient w.p. ``1 - delta``."""
    return math.ceil(2.0 * R**2 * B**2 / eps**2 * math.log(2.0 * d / delta))
