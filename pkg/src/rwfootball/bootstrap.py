"""Bootstrap confidence intervals for win probability and their coverage.

Three resamplers, each with a resample fraction ``phi`` (``phi = 1`` is the
ordinary bootstrap):

* ``standard``: ``round(N * phi)`` rows drawn with replacement.
* ``cluster``: ``round(G * phi)`` games drawn with replacement, each
  bringing all its rows.
* ``randomized_cluster``: games drawn as in ``cluster``, then within each
  drawn game as many rows as it has, drawn with replacement.

Intervals are order statistics of the ``B`` bootstrap predictions, widened
to 0 or 1 when the point estimate is extreme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datagen import PlayDataset
from .gbt import BoostedModel, fit_estimator
from .parallel import pmap
from .tables import write_csv

__all__ = [
    "KINDS",
    "BootstrapScheme",
    "IntervalSet",
    "CoverageReport",
    "BinCoverage",
    "resample",
    "fit_bootstrap_ensemble",
    "order_statistic_ranks",
    "intervals_from_predictions",
    "build_intervals",
    "evaluate_coverage",
    "binned_coverage",
    "aggregate_binned",
    "write_coverage_csv",
    "write_binned_csv",
    "CoverageCampaign",
    "run_coverage_campaign",
]

KINDS = ("standard", "cluster", "randomized_cluster")
LOW_CUT = 0.025
HIGH_CUT = 0.975


@dataclass(frozen=True)
class BootstrapScheme:
    kind: str = "randomized_cluster"
    phi: float = 1.0
    B: int = 101

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bootstrap kind {self.kind!r}; choose from {KINDS}")
        if not 0.0 < self.phi <= 1.0:
            raise ValueError("fraction must be in (0,1]")
        if self.B < 2:
            raise ValueError("B must be >= 2")

    @property
    def key(self) -> str:
        return f"{self.kind}|phi={float(self.phi)!r}|B={self.B}"


def _count(n: int, phi: float) -> int:
    k = int(math.floor(n * phi + 0.5))
    if k == 0:
        raise ValueError(f"fraction too small for dataset: round({n} * {phi}) = 0")
    return k


def resample(data: PlayDataset, scheme: BootstrapScheme, rng: np.random.Generator) -> PlayDataset:
    """One bootstrap dataset.

    Cluster schemes give every drawn game a fresh id ``0..g-1`` (a game drawn
    twice becomes two games).  The standard scheme keeps original game ids,
    so the validation split inside a fit still separates whole games.
    """
    if len(data) == 0:
        raise ValueError("cannot resample an empty dataset")
    if scheme.kind == "standard":
        rows = rng.integers(0, len(data), size=_count(len(data), scheme.phi))
        order = np.lexsort((data.t[rows], data.game_id[rows]))
        return data.take(rows[order])

    starts, lengths = data.game_slices()
    g = _count(len(starts), scheme.phi)
    chosen = rng.integers(0, len(starts), size=g)
    lens = lengths[chosen]
    new_id = np.repeat(np.arange(g, dtype=np.int64), lens)
    offsets = np.repeat(starts[chosen], lens)
    if scheme.kind == "cluster":
        within = np.arange(lens.sum()) - np.repeat(np.cumsum(lens) - lens, lens)
        return data.take(offsets + within, game_id=new_id)
    within = rng.integers(0, np.repeat(lens, lens))
    rows = offsets + within
    # keep rows of each new game ordered by t
    order = np.lexsort((data.t[rows], new_id))
    return data.take(rows[order], game_id=new_id[order])


def _replicate_task(args) -> BoostedModel:
    data, scheme, estimator, rng = args
    return fit_estimator(resample(data, scheme, rng), estimator, rng)


def fit_bootstrap_ensemble(
    data: PlayDataset, scheme: BootstrapScheme, estimator, rng: np.random.Generator,
    workers: int = 1,
) -> list[BoostedModel]:
    """``B`` resample-and-fit replicates, each on its own spawned stream."""
    tasks = [(data, scheme, estimator, child) for child in rng.spawn(scheme.B)]
    return pmap(_replicate_task, tasks, workers)


def order_statistic_ranks(B: int, alpha: float) -> tuple[int, int]:
    """1-based nearest-rank bounds ``ceil(a/2 (B+1))`` and ``floor((1-a/2)(B+1))``.

    For ``B = 101`` and ``alpha = 0.10`` these are the 6th and 96th values.
    """
    lo = math.ceil(alpha / 2 * (B + 1) - 1e-9)
    hi = math.floor((1 - alpha / 2) * (B + 1) + 1e-9)
    lo = min(max(lo, 1), B)
    hi = min(max(hi, lo), B)
    return lo, hi


@dataclass
class IntervalSet:
    lower: np.ndarray
    upper: np.ndarray
    point: np.ndarray

    def __len__(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


def intervals_from_predictions(preds: np.ndarray, point: np.ndarray, alpha: float = 0.10) -> IntervalSet:
    """Order-statistic intervals from a ``(B, n)`` prediction matrix."""
    preds = np.asarray(preds, dtype=float)
    B = preds.shape[0]
    if B < 2:
        raise ValueError("need at least two bootstrap replicates")
    lo_r, hi_r = order_statistic_ranks(B, alpha)
    srt = np.sort(preds, axis=0)
    lower = srt[lo_r - 1].copy()
    upper = srt[hi_r - 1].copy()
    point = np.asarray(point, dtype=float)
    lower[point < LOW_CUT] = 0.0
    upper[point > HIGH_CUT] = 1.0
    return IntervalSet(np.clip(lower, 0.0, 1.0), np.clip(upper, 0.0, 1.0), point)


def build_intervals(ensemble: Sequence[BoostedModel], point_model: BoostedModel, states,
                    alpha: float = 0.10) -> IntervalSet:
    """Intervals at ``states`` (an ``(n, 3)`` array of ``t, x, s``)."""
    states = np.asarray(states)
    U, inv = np.unique(states, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    P = np.vstack([m.predict_proba(U) for m in ensemble])
    iv = intervals_from_predictions(P, point_model.predict_proba(U), alpha)
    return IntervalSet(iv.lower[inv], iv.upper[inv], iv.point[inv])


@dataclass
class CoverageReport:
    """Per-simulation coverage and mean width, with their aggregates."""

    coverage: np.ndarray
    width: np.ndarray
    bins: list = field(default_factory=list)

    @staticmethod
    def combine(reports: Sequence["CoverageReport"]) -> "CoverageReport":
        return CoverageReport(
            np.concatenate([r.coverage for r in reports]),
            np.concatenate([r.width for r in reports]),
        )

    @property
    def M(self) -> int:
        return len(self.coverage)

    @staticmethod
    def _mean_2se(v):
        v = np.asarray(v, dtype=float)
        se = v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else float("nan")
        return float(v.mean()), float(2 * se)

    @property
    def coverage_mean_2se(self):
        return self._mean_2se(self.coverage)

    @property
    def width_mean_2se(self):
        return self._mean_2se(self.width)


def evaluate_coverage(intervals: IntervalSet, test: PlayDataset) -> CoverageReport:
    """Fraction of test rows whose true wp is inside its closed interval, and mean width."""
    if len(intervals) != len(test):
        raise ValueError("need one interval per test row")
    inside = (intervals.lower <= test.true_wp) & (test.true_wp <= intervals.upper)
    return CoverageReport(np.array([inside.mean()]), np.array([intervals.width.mean()]))


@dataclass(frozen=True)
class BinCoverage:
    lo: float
    hi: float
    count: int
    coverage: float
    se: float


def _bin_index(wp: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, wp, side="right") - 1
    # the last bin is closed on the right
    return np.where(wp == edges[-1], len(edges) - 2, idx)


def binned_coverage(intervals: IntervalSet, test: PlayDataset, edges=None) -> list[BinCoverage]:
    """Coverage within bins of true wp; bins are ``[lo, hi)`` except the last.

    Empty bins are left out.  ``se`` is the binomial standard error.
    """
    edges = np.arange(11) / 10 if edges is None else np.asarray(edges, dtype=float)
    if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must increase from 0 to 1")
    wp = test.true_wp
    inside = (intervals.lower <= wp) & (wp <= intervals.upper)
    idx = _bin_index(wp, edges)
    out = []
    for k in range(len(edges) - 1):
        sel = idx == k
        n = int(sel.sum())
        if n == 0:
            continue
        c = float(inside[sel].mean())
        out.append(BinCoverage(float(edges[k]), float(edges[k + 1]), n, c, math.sqrt(c * (1 - c) / n)))
    return out


def aggregate_binned(per_sim: Sequence[Sequence[BinCoverage]]) -> list[BinCoverage]:
    """Average per-bin coverage over simulations; ``se`` is across simulations.

    ``count`` is the total number of rows pooled into the bin.
    """
    groups: dict[tuple[float, float], list[BinCoverage]] = {}
    for sim in per_sim:
        for b in sim:
            groups.setdefault((b.lo, b.hi), []).append(b)
    out = []
    for (lo, hi), bs in sorted(groups.items()):
        c = np.array([b.coverage for b in bs])
        se = float(c.std(ddof=1) / np.sqrt(len(c))) if len(c) > 1 else bs[0].se
        out.append(BinCoverage(lo, hi, int(sum(b.count for b in bs)), float(c.mean()), se))
    return out


def write_coverage_csv(rows: Sequence[tuple[BootstrapScheme, CoverageReport]], path) -> None:
    header = ["scheme", "phi", "B", "coverage_mean", "coverage_2se", "width_mean", "width_2se"]
    write_csv(path, header, (
        [s.kind, s.phi, s.B, *r.coverage_mean_2se, *r.width_mean_2se] for s, r in rows
    ))


def write_binned_csv(bins: Sequence[BinCoverage], path) -> None:
    write_csv(path, ["bin_lo", "bin_hi", "coverage", "se"],
              ([b.lo, b.hi, b.coverage, b.se] for b in bins))


# -- coverage campaigns ------------------------------------------------------

@dataclass
class CoverageCampaign:
    """Coverage results per scheme, in the order the schemes were given."""

    schemes: list[BootstrapScheme]
    reports: list[CoverageReport]
    bins: list[list[BinCoverage]]

    def report(self, scheme: BootstrapScheme) -> CoverageReport:
        return self.reports[self.schemes.index(scheme)]


def _point_task(args):
    from .cache import Cache, content_key
    from .datagen import generate_dataset
    from .experiments import family_cell
    from .oracle import build_wp_table
    from .seeding import derive_rng

    m, zeta, estimator, seed, game, cache_root = args
    cell = family_cell("clustered", zeta, game.T)
    cache = Cache(cache_root)
    key = content_key({"what": "boot-point-model", "seed": seed, "cell": cell.key, "m": m,
                       "L": game.L, "T": game.T, "estimator": _est_list(estimator)})
    model = cache.get_model(key)
    if model is None:
        data = generate_dataset(cell.spec(game), build_wp_table(game), derive_rng(seed, "boot-train", m))
        model = fit_estimator(data, estimator, derive_rng(seed, "boot-point", m), seed)
        cache.put_model(key, model)
    return model


def _member_task(args):
    from .cache import Cache, content_key
    from .datagen import generate_dataset
    from .experiments import family_cell
    from .oracle import build_wp_table
    from .seeding import derive_rng

    m, b, scheme, zeta, member, seed, game, states, cache_root = args
    cell = family_cell("clustered", zeta, game.T)
    cache = Cache(cache_root)
    key = content_key({"what": "boot-member-pred", "seed": seed, "cell": cell.key, "m": m, "b": b,
                       "scheme": scheme.key, "L": game.L, "T": game.T, "member": _est_list(member),
                       "states": content_key(states.tolist())})
    pred = cache.get_array(key)
    if pred is None:
        data = generate_dataset(cell.spec(game), build_wp_table(game), derive_rng(seed, "boot-train", m))
        rng = derive_rng(seed, "boot", scheme.key, m, b)
        model = fit_estimator(resample(data, scheme, rng), member, rng)
        pred = model.predict_proba(states)
        cache.put_array(key, pred)
    return pred


def _member_estimator(mode: str, estimator, point):
    from .gbt import FixedRounds

    if mode == "refit":
        return FixedRounds.from_model(point)
    if mode == "resplit":
        return point.config
    if mode == "retune":
        return estimator
    raise ValueError(f"unknown member mode {mode!r}")


def _est_list(estimator):
    from .gbt import estimator_to_list
    return estimator_to_list(estimator)


def run_coverage_campaign(
    schemes: Sequence[BootstrapScheme], zeta: float, M: int, estimator, seed: int,
    game=None, n_test_games: int = 10_000, alpha: float = 0.10, edges=None,
    members: str = "refit", workers: int = 1, cache_root=None,
) -> CoverageCampaign:
    """Bootstrap coverage of ``M`` simulated clustered datasets (``G = zeta, K = T``).

    Simulation ``m`` fits one point model to its training set (tuned over
    ``estimator`` if that is a grid, early-stopped on half the games).
    ``members`` says how each bootstrap dataset is fit:

    ``"refit"``
        the point model's hyperparameters and round count, boosted on the
        whole resample;
    ``"resplit"``
        the point model's hyperparameters, with a fresh validation split
        and early stopping inside the resample;
    ``"retune"``
        the full ``estimator`` (grid search) on every resample.

    Every scheme is scored on test set ``m`` of the shared test sets.
    """
    from .experiments import make_test_sets
    from .game import GameConfig
    from .oracle import build_wp_table

    game = GameConfig() if game is None else game
    schemes = list(schemes)
    if not schemes:
        raise ValueError("no bootstrap schemes given")
    table = build_wp_table(game)
    tests = make_test_sets(table, M, seed, n_test_games)
    uniq = [np.unique(t.features, axis=0, return_inverse=True) for t in tests]
    points = pmap(_point_task, [(m, zeta, estimator, seed, game, cache_root) for m in range(M)], workers)
    tasks = []
    for si, scheme in enumerate(schemes):
        for m in range(M):
            member = _member_estimator(members, estimator, points[m])
            U = uniq[m][0]
            tasks += [(m, b, scheme, zeta, member, seed, game, U, cache_root) for b in range(scheme.B)]
    preds = pmap(_member_task, tasks, workers)

    reports, bins, pos = [], [], 0
    for scheme in schemes:
        sims, sim_bins = [], []
        for m in range(M):
            U, inv = uniq[m]
            inv = inv.reshape(-1)
            P = np.vstack(preds[pos:pos + scheme.B])
            pos += scheme.B
            iv = intervals_from_predictions(P, points[m].predict_proba(U), alpha)
            iv = IntervalSet(iv.lower[inv], iv.upper[inv], iv.point[inv])
            sims.append(evaluate_coverage(iv, tests[m]))
            sim_bins.append(binned_coverage(iv, tests[m], edges))
        combined = CoverageReport.combine(sims)
        combined.bins = aggregate_binned(sim_bins)
        reports.append(combined)
        bins.append(combined.bins)
    return CoverageCampaign(schemes, reports, bins)
