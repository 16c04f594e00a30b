"""Bootstrap intervals for win probability, and how often they cover.

Three resamplers build 90% intervals from models fit to resampled data:
rows (standard), whole games (cluster), and games then rows within each
game (randomized cluster).  Because rows of a game share an outcome, the
row bootstrap underestimates the spread.  Resampling only a fraction phi
of the games widens the intervals further.
"""

# %%
from rwfootball.bootstrap import BootstrapScheme, run_coverage_campaign
from rwfootball.gbt import BoostConfig

estimator = BoostConfig(max_depth=4, learning_rate=0.1)
schemes = [
    BootstrapScheme("standard", 1.0, B=25),
    BootstrapScheme("cluster", 1.0, B=25),
    BootstrapScheme("randomized_cluster", 1.0, B=25),
    BootstrapScheme("randomized_cluster", 0.35, B=25),
]

# %% Coverage and width over a few simulated training sets of 64 full games.
camp = run_coverage_campaign(schemes, zeta=64, M=4, estimator=estimator, seed=5, n_test_games=5000)
print("scheme               phi    coverage         width")
for s, r in zip(camp.schemes, camp.reports):
    (c, c2), (w, w2) = r.coverage_mean_2se, r.width_mean_2se
    print(f"{s.kind:<20} {s.phi:<5}  {c:.3f} +- {c2:.3f}  {w:.3f} +- {w2:.3f}")

# %% Coverage by true win probability for the narrowest-fraction scheme.
print("true wp bin   coverage")
for b in camp.bins[-1]:
    print(f"[{b.lo:.1f}, {b.hi:.1f})   {b.coverage:.3f}  (n={b.count})")
