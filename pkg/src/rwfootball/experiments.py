"""Bias-variance campaigns against the exact oracle.

For one data-generating cell, ``M`` training sets are drawn and one model
is fit to each.  Model ``m`` is scored on test set ``m`` by its squared
bias against the true win probability and by its spread around the mean
prediction of all ``M`` models at the same test states.

Seed layout (see :mod:`rwfootball.seeding`)::

    (seed, "test", m)              test set m, shared by every cell
    (seed, "train", cell.key, m)   training set m of a cell
    (seed, "fit", cell.key, m)     validation split and boosting draws
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cache import Cache, content_key
from .datagen import DatasetSpec, PlayDataset, generate_dataset, generate_test_sets
from .game import GameConfig
from .gbt import BoostedModel, estimator_to_list, fit_estimator
from .oracle import WpTable, build_wp_table
from .parallel import pmap
from .seeding import derive_rng
from .tables import write_csv

__all__ = [
    "Cell",
    "FAMILIES",
    "family_cell",
    "ReplicateResult",
    "ExperimentReport",
    "make_test_sets",
    "fit_replicates",
    "predict_on_tests",
    "bias_variance",
    "bias_variance_from_predictions",
    "summarize",
    "run_campaign",
    "bias_by_state",
    "write_vs_K_csv",
    "write_vs_zeta_csv",
    "write_bias_by_state_csv",
]

DEFAULT_K_GRID = (1, 2, 4, 7, 8, 14, 28, 56)
DEFAULT_TEST_GAMES = 10_000

# dataset families compared as a function of zeta
FAMILIES = {
    "clustered": "G=zeta, K=T",
    "one_per_game": "G=zeta, K=1",
    "independent": "G=zeta*T, K=1",
}


@dataclass(frozen=True)
class Cell:
    """One training-data configuration of a campaign."""

    zeta: float
    K: int
    games: int | None = None
    family: str = ""

    @property
    def key(self) -> str:
        return f"{self.family}|zeta={float(self.zeta)!r}|K={self.K}|G={self.games}"

    def spec(self, game: GameConfig) -> DatasetSpec:
        return DatasetSpec(self.zeta, self.K, game.L, game.T, self.games)


def family_cell(family: str, zeta: float, T: int) -> Cell:
    if family == "clustered":
        return Cell(zeta, T, int(zeta), family)
    if family == "one_per_game":
        return Cell(zeta, 1, int(zeta), family)
    if family == "independent":
        return Cell(zeta, 1, int(round(zeta * T)), family)
    raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")


@dataclass(frozen=True)
class ReplicateResult:
    m: int
    bias_sq: float
    variance: float
    rmse: float


def _mean_se(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        return float(v.mean()), float("nan")
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v)))


@dataclass
class ExperimentReport:
    """Mean and standard error of the replicate metrics of one cell."""

    cell: Cell
    game: GameConfig
    M: int
    estimator: list = field(default_factory=list)
    replicates: list[ReplicateResult] = field(default_factory=list)

    def stat(self, name: str) -> tuple[float, float]:
        return _mean_se([getattr(r, name) for r in self.replicates])

    @property
    def bias_sq(self):
        return self.stat("bias_sq")

    @property
    def variance(self):
        return self.stat("variance")

    @property
    def rmse(self):
        return self.stat("rmse")

    def metric_row(self) -> list:
        return [*self.bias_sq, *self.variance, *self.rmse]


def make_test_sets(table: WpTable, M: int, seed: int, n_games: int = DEFAULT_TEST_GAMES):
    return [generate_test_sets(1, n_games, table, derive_rng(seed, "test", m))[0] for m in range(M)]


def _fit_task(args) -> BoostedModel:
    cell, m, estimator, seed, game, cache_root = args
    cache = Cache(cache_root)
    key = content_key({
        "what": "replicate-model", "seed": seed, "cell": cell.key, "m": m,
        "L": game.L, "T": game.T, "estimator": estimator_to_list(estimator),
    })
    model = cache.get_model(key)
    if model is not None:
        return model
    table = build_wp_table(game)
    data = generate_dataset(cell.spec(game), table, derive_rng(seed, "train", cell.key, m))
    model = fit_estimator(data, estimator, derive_rng(seed, "fit", cell.key, m), seed)
    cache.put_model(key, model)
    return model


def fit_replicates(
    cell: Cell, M: int, estimator, seed: int, game: GameConfig = GameConfig(),
    workers: int = 1, cache_root=None,
) -> list[BoostedModel]:
    """Fit the ``M`` replicate models of a cell (in replicate order)."""
    tasks = [(cell, m, estimator, seed, game, cache_root) for m in range(M)]
    return pmap(_fit_task, tasks, workers)


def predict_on_tests(models: Sequence[BoostedModel], tests: Sequence[PlayDataset]) -> list[np.ndarray]:
    """Prediction matrix of shape ``(len(models), len(test_m))`` for every test set."""
    feats = [t.features for t in tests]
    U, inv = np.unique(np.vstack(feats), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    P = np.vstack([mdl.predict_proba(U) for mdl in models])
    out, lo = [], 0
    for f in feats:
        out.append(P[:, inv[lo:lo + len(f)]])
        lo += len(f)
    return out


def bias_variance_from_predictions(preds: Sequence[np.ndarray], truths: Sequence[np.ndarray]):
    """Replicate metrics from per-test-set prediction matrices.

    ``preds[m]`` has one row per model; row ``m`` is the model scored on
    test set ``m`` and the column means are the cross-model average.
    """
    M = len(preds)
    if M < 2:
        raise ValueError("variance needs at least two replicate models")
    results = []
    for m in range(M):
        pm = np.asarray(preds[m], dtype=float)
        if pm.shape[0] != M:
            raise ValueError(f"test set {m}: expected predictions from {M} models, got {pm.shape[0]}")
        own = pm[m]
        center = pm.mean(axis=0)
        b2 = float(np.mean((np.asarray(truths[m]) - own) ** 2))
        var = float(np.mean((own - center) ** 2))
        results.append(ReplicateResult(m, b2, var, float(np.sqrt(b2 + var))))
    return results


def bias_variance(models, tests, table: WpTable | None = None):
    """Per-replicate squared bias, variance and RMSE.

    Truth comes from each test row's stored ``true_wp``; pass ``table`` to
    look it up from the oracle instead.
    """
    if len(models) != len(tests):
        raise ValueError("models and test sets must be index-aligned")
    preds = predict_on_tests(models, tests)
    if table is None:
        truths = [t.true_wp for t in tests]
    else:
        truths = [table.lookup(t.t, t.x, t.s) for t in tests]
    return bias_variance_from_predictions(preds, truths)


def summarize(cell, game, M, estimator, replicates) -> ExperimentReport:
    return ExperimentReport(cell, game, M, estimator_to_list(estimator), list(replicates))


def run_campaign(
    cells: Sequence[Cell], M: int, estimator, seed: int, game: GameConfig = GameConfig(),
    n_test_games: int = DEFAULT_TEST_GAMES, workers: int = 1, cache_root=None,
    tests: Sequence[PlayDataset] | None = None,
) -> list[ExperimentReport]:
    """Fit, evaluate and aggregate every cell against one shared set of tests."""
    if M < 2:
        raise ValueError("a campaign needs M >= 2 replicates")
    if not cells:
        raise ValueError("empty grid")
    table = build_wp_table(game)
    if tests is None:
        tests = make_test_sets(table, M, seed, n_test_games)
    reports = []
    for cell in cells:
        models = fit_replicates(cell, M, estimator, seed, game, workers, cache_root)
        reps = bias_variance(models, tests)
        reports.append(summarize(cell, game, M, estimator, reps))
    return reports


def bias_by_state(
    models: Sequence[BoostedModel], table: WpTable, x_fixed: int = 2,
    times: Sequence[int] | None = None, scores: Sequence[int] = (-2, -1, 0, 1, 2),
) -> list[dict]:
    """Signed bias ``mean_m(wp_hat_m - wp)`` and its standard error on a (t, s) grid."""
    cfg = table.config
    times = list(range(1, cfg.T + 1)) if times is None else list(times)
    tt, ss = np.meshgrid(times, list(scores), indexing="ij")
    tt, ss = tt.ravel(), ss.ravel()
    xx = np.full_like(tt, x_fixed)
    truth = table.lookup(tt, xx, ss)
    P = np.vstack([m.predict_proba(np.column_stack([tt, xx, ss])) for m in models])
    err = P - truth[None, :]
    mean = err.mean(axis=0)
    se = err.std(axis=0, ddof=1) / np.sqrt(len(models)) if len(models) > 1 else np.full(len(tt), np.nan)
    return [
        {"t": int(t), "s": int(s), "x": int(x_fixed), "bias_mean": float(b), "bias_se": float(e)}
        for t, s, b, e in zip(tt, ss, mean, se)
    ]


METRIC_COLUMNS = ["bias2_mean", "bias2_se", "var_mean", "var_se", "rmse_mean", "rmse_se"]


def write_vs_K_csv(reports: Sequence[ExperimentReport], path) -> None:
    write_csv(path, ["K", *METRIC_COLUMNS], ([r.cell.K, *r.metric_row()] for r in reports))


def write_vs_zeta_csv(reports: Sequence[ExperimentReport], path) -> None:
    write_csv(path, ["family", "zeta", *METRIC_COLUMNS],
              ([r.cell.family, r.cell.zeta, *r.metric_row()] for r in reports))


def write_bias_by_state_csv(rows: Sequence[dict], path) -> None:
    cols = ["t", "s", "x", "bias_mean", "bias_se"]
    write_csv(path, cols, ([r[c] for c in cols] for r in rows))
