"""Effective sample size of clustered play-by-play data.

A dataset of zeta full games has zeta * T rows but only zeta outcomes.  We
trace RMSE against zeta for that clustered family and for the family with
one play from each of zeta * T independent games, smooth both with a
biexponential in log4(zeta), and ask how many independent games give the
same accuracy as zeta clustered ones.  Both families have zeta * T rows
at index zeta, so zeta' / zeta is the fraction of rows that are effectively
independent.
"""

# %%
from rwfootball.ess import ExtrapolationError, effective_sample_size, fit_biexponential
from rwfootball.experiments import family_cell, run_campaign
from rwfootball.gbt import BoostConfig

estimator = BoostConfig(max_depth=4, learning_rate=0.1)
zetas = (16, 32, 64, 128, 256, 512)
M, seed = 4, 3

# %% Accuracy curves for the two families.
cells = [family_cell(f, z, 56) for z in zetas for f in ("clustered", "independent")]
reports = run_campaign(cells, M=M, estimator=estimator, seed=seed, n_test_games=5000)
curves = {"clustered": [], "independent": []}
for r in reports:
    curves[r.cell.family].append((r.cell.zeta, r.rmse[0]))
for fam, pts in curves.items():
    print(fam.ljust(12), "  ".join(f"{z}:{v:.4f}" for z, v in pts))

# %% Smooth and solve.
fit_T = fit_biexponential(curves["clustered"])
fit_1 = fit_biexponential(curves["independent"])
print("clustered fit   a1, b1, a2, b2 =", [round(p, 4) for p in fit_T.params])
print("independent fit a1, b1, a2, b2 =", [round(p, 4) for p in fit_1.params])
for z in zetas:
    try:
        res = effective_sample_size(fit_1, fit_T, z)
        print(f"zeta={z:4d}: as accurate as independent data at zeta'={res.zeta_prime:7.2f} "
              f"({100 * res.ratio:.0f}% of nominal)")
    except ExtrapolationError as err:
        print(f"zeta={z:4d}: {err}")
