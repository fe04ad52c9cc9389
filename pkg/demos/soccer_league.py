"""
Soccer: training every opponent-selection rule and rating the checkpoints
=========================================================================

Usage: python3 demos/soccer_league.py [episodes_per_agent] [seeds]

Each method trains under the same per-agent episode budget, then the final
agents of every method, the initial agent and two scripted players meet in a
round robin. Ratings are anchored at the initial (uniform) agent.
With 32000 episodes and 3 seeds this takes roughly half an hour on one core.
"""

#%%
import sys

import numpy as np

from saddleplay.evaluation import Agent, fit_elo, run_tournament
from saddleplay.policies import RulePolicy, UniformPolicy
from saddleplay.selfplay import TrainConfig, rng_stream, train

budget = int(sys.argv[1]) if len(sys.argv) > 1 else 8000
seeds = int(sys.argv[2]) if len(sys.argv) > 2 else 1
base = dict(game="soccer", mode="policy_grad", m_k=32, l=10, gamma=0.97, lam=0.95, entropy_coef=0.01, lr=0.1,
            optimizer="rmsprop", max_grad_norm=1.0, max_episodes_per_agent=budget, N=10_000)
methods = [("ours", 2), ("latest", 1), ("best_past", 1), ("random_past", 1)]

#%%
# Train, play, rate
# -----------------
finals = {m: [] for m, _ in methods}
for seed in range(seeds):
    agents = [Agent("rule", RulePolicy("A"), RulePolicy("B"), "soccer"),
              Agent("random", UniformPolicy(), UniformPolicy(), "soccer")]
    last = {}
    for method, n in methods:
        res = train(TrainConfig(method=method, n=n, seed=seed, **base))
        for k, i, a in res.checkpoints:
            if k == res.iterations or (k == 0 and method == "ours" and i == 0):
                agents.append(Agent(f"{method}/{i}/{k}", a.x, a.y, "soccer"))
        last[method] = [f"{method}/{i}/{res.iterations}" for i in range(n)]
        print(f"seed {seed} {method}: {res.iterations} iterations, {res.episodes_per_agent[-1]} episodes per agent")
    env = TrainConfig(**base).make_env()
    results = run_tournament(agents, env, 400, lambda i, j, s: rng_stream(seed, 99, i, j, s))
    elo = fit_elo(results, "ours/0/0", prior_draws=1.0)
    for m, ids in last.items():
        finals[m].append(np.mean([elo.ratings[i] for i in ids]))
    print(seed, {m: round(v[-1], 1) for m, v in finals.items()}, "rule", round(elo.ratings["rule"]))

#%%
print("mean final Elo:", {m: round(float(np.mean(v)), 1) for m, v in finals.items()})
