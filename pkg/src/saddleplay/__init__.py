"""Perturbation-based population self-play for two-player zero-sum games.

Modules: ``games`` (matrix games and grid soccer), ``policies``,
``estimators``, ``optim``, ``selfplay`` (training loops), ``evaluation``
(Nash oracle, tournaments, Elo) and ``cli``.
"""
from .evaluation import equilibrium_distance, fit_elo, nash_oracle, run_tournament
from .games import MATRIX_GAMES, Soccer, make_env
from .selfplay import TrainConfig, train, train_baseline, train_population, train_single_theory

__version__ = "0.1.0"

__all__ = [
    "MATRIX_GAMES",
    "Soccer",
    "make_env",
    "nash_oracle",
    "equilibrium_distance",
    "run_tournament",
    "fit_elo",
    "TrainConfig",
    "train",
    "train_population",
    "train_baseline",
    "train_single_theory",
]
