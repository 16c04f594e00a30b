"""Random walk football and its exact win probability.

The ball sits on yardlines 1..L-1.  Each play moves it one step toward
either end zone with equal odds; reaching an end zone scores a touchdown
and the ball goes back to midfield.  After T plays the leader wins and a
tie is settled by a coin.  Because the rules are this simple, the win
probability of every state (t, x, s) can be computed exactly by backward
recursion, which is what makes the later experiments possible: every
fitted model can be scored against the truth.
"""

# %%
import numpy as np

from rwfootball import GameConfig, GameState, build_wp_table, simulate_game
from rwfootball.oracle import mc_estimate_wp

game = GameConfig(L=4, T=56)
rng = np.random.default_rng(7)

# %% One simulated game, play by play.
trace = simulate_game(game, rng)
print("first ten (t, x, s):", [(p.t, p.x, p.s) for p in trace.plays[:10]])
print("final score differential", trace.final_s, "-> team one wins" if trace.y else "-> team one loses")

# %% The exact table.
table = build_wp_table(game)
print("table shape (t, x, s):", table.values.shape)
print("kickoff, tied:              wp(1, 2, 0)  =", table.lookup(1, 2, 0))
print("one score up at kickoff:    wp(1, 2, 1)  =", round(float(table.lookup(1, 2, 1)), 4))
print("one score up, last play:    wp(56, 2, 1) =", round(float(table.lookup(56, 2, 1)), 4))
print("tied, one step from scoring, last play: wp(56, 1, 0) =", float(table.lookup(56, 1, 0)))

# A lead is worth more the later it is held.
for t in (1, 15, 29, 43, 56):
    print(f"t={t:2d}  wp(x=2, s=+1) = {table.lookup(t, 2, 1):.4f}")

# %% Monte Carlo agrees with the recursion.
for state in (GameState(1, 2, 0), GameState(30, 1, -1), GameState(50, 3, 2)):
    p, se = mc_estimate_wp(game, state, 200_000, rng)
    exact = float(table.lookup(state.t, state.x, state.s))
    print(f"{state}: exact {exact:.4f}  simulated {p:.4f} +- {2 * se:.4f}")
