"""How outcome clustering hurts a win probability model.

Every play of a game shares that game's single win/loss outcome.  Here we
hold the number of rows fixed at zeta * T and vary K, the number of plays
kept per game: K = 1 keeps one play from each of zeta * T games, K = T
keeps every play of zeta games.  More plays per game means fewer
independent outcomes, and the fitted model's RMSE against the exact win
probability rises.
"""

# %%
import numpy as np

from rwfootball.experiments import Cell, bias_by_state, fit_replicates, run_campaign
from rwfootball.gbt import BoostConfig
from rwfootball.game import GameConfig
from rwfootball.oracle import build_wp_table

# A single boosting configuration keeps this demo to a couple of minutes.
estimator = BoostConfig(max_depth=4, learning_rate=0.1)
zeta, M, seed = 64, 6, 11

# %% RMSE, squared bias and variance as a function of K.
Ks = (1, 4, 14, 56)
reports = run_campaign([Cell(zeta, K) for K in Ks], M=M, estimator=estimator, seed=seed,
                       n_test_games=5000)
print(f"zeta={zeta}: {int(zeta * 56)} rows per training set, {M} replicates")
print(" K   games   bias^2     variance   rmse (+- 2 se)")
for K, r in zip(Ks, reports):
    print(f"{K:2d}  {round(zeta * 56 / K):6d}  {r.bias_sq[0]:.2e}  {r.variance[0]:.2e}  "
          f"{r.rmse[0]:.4f} +- {2 * r.rmse[1]:.4f}")

# %% Where the fully clustered model goes wrong: bias at midfield by time and score.
table = build_wp_table(GameConfig())
models = fit_replicates(Cell(zeta, 56), M, estimator, seed)
rows = bias_by_state(models, table, x_fixed=2)
early = np.mean([abs(r["bias_mean"]) for r in rows if r["t"] <= 10])
late = np.mean([abs(r["bias_mean"]) for r in rows if r["t"] >= 47])
print(f"mean |bias| at midfield: plays 1-10 {early:.4f}, plays 47-56 {late:.4f}")
