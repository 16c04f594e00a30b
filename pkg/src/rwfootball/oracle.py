"""Exact win probability by backward induction, plus a Monte Carlo check."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .game import GameConfig, GameState, play_out

__all__ = ["WpTable", "build_wp_table", "wp_lookup", "mc_estimate_wp", "write_table_csv"]

# refuse tables above this many cells (about 800 MB of float64)
MAX_CELLS = 100_000_000


@dataclass(frozen=True)
class WpTable:
    """Dense ``wp(t, x, s)`` for t in 1..T+1, x in 1..L-1, s in -T..T.

    ``values[t - 1, x - 1, s + T]`` holds the probability.  The array is
    marked read-only.
    """

    config: GameConfig
    values: np.ndarray

    def __getitem__(self, key):
        t, x, s = key
        return wp_lookup(self, t, x, s)

    def in_domain(self, t, x, s) -> np.ndarray:
        c = self.config
        t, x, s = np.asarray(t), np.asarray(x), np.asarray(s)
        return (1 <= t) & (t <= c.T + 1) & (1 <= x) & (x <= c.L - 1) & (np.abs(s) <= c.T)

    def lookup(self, t, x, s) -> np.ndarray:
        """Vectorized lookup; raises if any state is out of domain."""
        t, x, s = np.asarray(t), np.asarray(x), np.asarray(s)
        ok = self.in_domain(t, x, s)
        if not np.all(ok):
            bad = np.argwhere(~np.atleast_1d(ok))[0][0]
            tb, xb, sb = (np.atleast_1d(a)[bad] for a in (t, x, s))
            raise KeyError(f"state (t={tb}, x={xb}, s={sb}) outside the table domain")
        return self.values[t - 1, x - 1, s + self.config.T]


def build_wp_table(config: GameConfig) -> WpTable:
    """Fill the table from the terminal layer ``t = T + 1`` backwards.

    From position 1 a left move scores for team one and restarts at
    midfield; from ``L - 1`` a right move scores for team two.  Scores just
    outside ``[-T, T]`` are padded with 1 and 0: a lead of ``T + 1`` at any
    ``t >= 2`` cannot be overturned in the at most ``T - 1`` remaining plays.
    """
    L, T = config.L, config.T
    cells = (T + 1) * (L - 1) * (2 * T + 1)
    if cells > MAX_CELLS:
        raise MemoryError(f"table with {cells} cells exceeds the {MAX_CELLS} limit")
    n_s = 2 * T + 1
    mid = config.midfield - 1
    wp = np.empty((T + 1, L - 1, n_s))
    s_vals = np.arange(-T, T + 1)
    wp[T] = np.where(s_vals > 0, 1.0, np.where(s_vals < 0, 0.0, 0.5))[None, :]
    for k in range(T, 0, -1):
        nxt = wp[k]
        # score-shifted midfield rows, padded at the ends
        up = np.append(nxt[mid, 1:], 1.0)  # s + 1
        down = np.insert(nxt[mid, :-1], 0, 0.0)  # s - 1
        left = np.vstack([up[None, :], nxt[:-1]])  # value after moving to x - 1
        right = np.vstack([nxt[1:], down[None, :]])  # value after moving to x + 1
        wp[k - 1] = 0.5 * left + 0.5 * right
    wp.setflags(write=False)
    return WpTable(config, wp)


def wp_lookup(table: WpTable, t: int, x: int, s: int) -> float:
    """Exact win probability of a single state."""
    return float(table.lookup(t, x, s))


def mc_estimate_wp(
    config: GameConfig, state: GameState, n: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Mean win indicator over ``n`` simulated completions, and its standard error."""
    if n < 1:
        raise ValueError("n must be >= 1")
    y = play_out(config, state, n, rng)
    p = float(y.mean())
    return p, float(np.sqrt(p * (1.0 - p) / n))


def write_table_csv(table: WpTable, path) -> int:
    """Write ``t,x,s,wp`` rows; returns the number of rows written."""
    c = table.config
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "s", "wp"])
        for t in range(1, c.T + 2):
            for x in range(1, c.L):
                row = table.values[t - 1, x - 1]
                for s in range(-c.T, c.T + 1):
                    w.writerow([t, x, s, repr(float(row[s + c.T]))])
                    n += 1
    return n
