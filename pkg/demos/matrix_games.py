"""
Matrix games: population self-play against the latest-agent baseline
=====================================================================

Four agents trained jointly pick each other as opponents by the
argmax/argmin rule. A single pair trained against its own latest copy
spirals around the equilibrium instead.
"""

#%%
import numpy as np

from saddleplay import make_env, nash_oracle, train, TrainConfig

#%%
# The exact equilibria first
# --------------------------
for gid in ("matching_pennies", "skewed_mp", "rps", "extended_mp"):
    sol = nash_oracle(make_env(gid))
    print(gid, [str(v) for v in sol.x], [str(v) for v in sol.y], "P1 value", str(sol.player1_value))

#%%
# Exact gradients, eta = 0.03
# ---------------------------
ours = train(TrainConfig(game="matching_pennies", n=4, N=2000, lr=0.03, seed=0, keep_checkpoints=False))
latest = train(TrainConfig(game="matching_pennies", method="latest", n=1, N=2000, lr=0.03, seed=0,
                           keep_checkpoints=False))

d_ours = np.array([[m.distance_to_nash for m in ours.metrics if m.agent == i] for i in range(4)])
d_latest = np.array([m.distance_to_nash for m in latest.metrics])
for k in (0, 250, 500, 1000, 1999):
    print(f"k={k:4d}  ours max {d_ours[:, k].max():.2e}   latest {d_latest[k]:.3f}")

#%%
# Phase portrait data (P(heads) for each side), every 200 iterations
# -------------------------------------------------------------------
for k, i, px, py in ours.phase[::800]:
    print(k, i, np.round(px, 3), np.round(py, 3))

#%%
# Sampled gradients on rock-paper-scissors
# ----------------------------------------
pg = train(TrainConfig(game="rps", mode="policy_grad", n=4, N=2000, m_k=1024, seed=0, keep_checkpoints=False))
final = [m.distance_to_nash for m in pg.metrics if m.k == pg.iterations - 1]
print("rps policy-gradient distances at the end:", np.round(final, 4))
print("episodes per agent:", pg.episodes_per_agent[-1])
