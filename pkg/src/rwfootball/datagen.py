"""Observational play-by-play datasets with controlled outcome dependence.

A dataset keeps ``K`` randomly chosen plays from each of ``G`` simulated
games, so every kept play of a game carries that game's single win/loss
draw.  With ``G = round(zeta * T / K)`` the row count stays near
``zeta * T`` whatever ``K`` is.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .game import GameConfig, simulate_games
from .oracle import WpTable

__all__ = [
    "round_half_up",
    "DatasetSpec",
    "PlayDataset",
    "generate_dataset",
    "generate_test_sets",
    "write_dataset_csv",
    "read_dataset_csv",
]

COLUMNS = ("game_id", "t", "x", "s", "y", "true_wp")


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class DatasetSpec:
    """How to build one dataset.

    ``games`` overrides the default game count ``round(zeta * T / K)``; it
    is how the fixed-``G`` families (e.g. ``G = zeta, K = 1``) are expressed.
    """

    zeta: float
    K: int
    L: int = 4
    T: int = 56
    games: int | None = None

    def __post_init__(self):
        if self.K != int(self.K) or not 1 <= self.K <= self.T:
            raise ValueError(f"K must be an integer in 1..T={self.T}, got {self.K}")
        if self.G < 1:
            raise ValueError(f"spec yields G={self.G} games; need at least one")

    @property
    def config(self) -> GameConfig:
        return GameConfig(self.L, self.T)

    @property
    def G(self) -> int:
        if self.games is not None:
            return int(self.games)
        return round_half_up(self.zeta * self.T / self.K)

    @property
    def n_rows(self) -> int:
        return self.G * self.K


@dataclass(eq=False)
class PlayDataset:
    """Column-oriented rows ``(game_id, t, x, s, y, true_wp)``.

    Rows of one game are contiguous and sorted by ``t``.
    """

    game_id: np.ndarray
    t: np.ndarray
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    true_wp: np.ndarray
    spec: DatasetSpec | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.y)

    def equals(self, other: "PlayDataset") -> bool:
        """Row-for-row identical columns (the ``DatasetSpec`` is not compared)."""
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in COLUMNS)

    @property
    def n_games(self) -> int:
        return len(np.unique(self.game_id))

    @property
    def features(self) -> np.ndarray:
        """``(n, 3)`` integer matrix of ``(t, x, s)``."""
        return np.column_stack([self.t, self.x, self.s])

    def take(self, rows, game_id=None) -> "PlayDataset":
        """Row subset (with repeats allowed), optionally relabelling games."""
        rows = np.asarray(rows)
        return PlayDataset(
            self.game_id[rows] if game_id is None else np.asarray(game_id, dtype=np.int64),
            self.t[rows], self.x[rows], self.s[rows], self.y[rows], self.true_wp[rows],
            self.spec,
        )

    def game_slices(self) -> tuple[np.ndarray, np.ndarray]:
        """Start offsets and lengths of each contiguous game block."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        change = np.flatnonzero(np.diff(self.game_id)) + 1
        starts = np.concatenate([[0], change])
        lengths = np.diff(np.concatenate([starts, [len(self)]]))
        return starts, lengths


def _choose_plays(G: int, T: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """``(G, K)`` sorted distinct play columns per game."""
    if K == T:
        return np.broadcast_to(np.arange(T), (G, T))
    if K == 1:
        return rng.integers(0, T, size=(G, 1))
    keys = rng.random((G, T))
    cols = np.argpartition(keys, K - 1, axis=1)[:, :K]
    return np.sort(cols, axis=1)


def generate_dataset(spec: DatasetSpec, table: WpTable, rng: np.random.Generator) -> PlayDataset:
    cfg = spec.config
    if table.config != cfg:
        raise ValueError(f"table built for {table.config}, dataset needs {cfg}")
    G, K = spec.G, spec.K
    batch = simulate_games(cfg, G, rng)
    cols = _choose_plays(G, cfg.T, K, rng)
    gidx = np.repeat(np.arange(G, dtype=np.int64), K)
    cflat = np.ascontiguousarray(cols).reshape(-1)
    t = cflat + 1
    x = batch.x[gidx, cflat]
    s = batch.s[gidx, cflat]
    y = batch.y[gidx]
    return PlayDataset(gidx, t, x, s, y, table.lookup(t, x, s), spec)


def generate_test_sets(
    count: int, games: int, table: WpTable, rng: np.random.Generator
) -> list[PlayDataset]:
    """``count`` independent one-play-per-game evaluation sets."""
    cfg = table.config
    spec = DatasetSpec(zeta=games / cfg.T, K=1, L=cfg.L, T=cfg.T, games=games)
    return [generate_dataset(spec, table, rng) for _ in range(count)]


def write_dataset_csv(data: PlayDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in zip(data.game_id.tolist(), data.t.tolist(), data.x.tolist(),
                       data.s.tolist(), data.y.tolist(), data.true_wp.tolist()):
            w.writerow([*row[:5], repr(row[5])])


def read_dataset_csv(path, spec: DatasetSpec | None = None) -> PlayDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected header {header}; want {','.join(COLUMNS)}")
        rows = list(reader)
    ints = np.array([r[:5] for r in rows], dtype=np.int64).reshape(-1, 5)
    wp = np.array([float(r[5]) for r in rows], dtype=np.float64)
    return PlayDataset(*(ints[:, i].copy() for i in range(5)), wp, spec)
