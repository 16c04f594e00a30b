import math
from collections import Counter

import numpy as np
import pytest

from rwfootball.bootstrap import (
    BootstrapScheme,
    IntervalSet,
    aggregate_binned,
    binned_coverage,
    build_intervals,
    evaluate_coverage,
    fit_bootstrap_ensemble,
    intervals_from_predictions,
    order_statistic_ranks,
    resample,
    run_coverage_campaign,
    write_binned_csv,
    write_coverage_csv,
)
from rwfootball.datagen import DatasetSpec, PlayDataset, generate_dataset
from rwfootball.gbt import BoostConfig
from rwfootball.tables import read_csv

SMOKE = BoostConfig(max_depth=3, max_rounds=40, early_stopping_rounds=10)


def tiny(truths):
    n = len(truths)
    z = np.zeros(n, dtype=np.int64)
    return PlayDataset(np.arange(n), z + 1, z + 2, z, z, np.asarray(truths, dtype=float))


def rows_of(data, g):
    sel = data.game_id == g
    return sorted(zip(data.t[sel].tolist(), data.x[sel].tolist(), data.s[sel].tolist(), data.y[sel].tolist()))


@pytest.fixture(scope="module")
def clustered(table):
    return generate_dataset(DatasetSpec(16, 8), table, np.random.default_rng(3))


def test_scheme_validation():
    with pytest.raises(ValueError, match=r"fraction must be in \(0,1\]"):
        BootstrapScheme("cluster", 0.0)
    with pytest.raises(ValueError):
        BootstrapScheme("cluster", 1.2)
    with pytest.raises(ValueError):
        BootstrapScheme("cluster", 1.0, B=1)
    with pytest.raises(ValueError):
        BootstrapScheme("block", 1.0)


def test_standard_row_count():
    data = tiny(np.linspace(0.1, 0.9, 10))
    out = resample(data, BootstrapScheme("standard", 1.0), np.random.default_rng(0))
    assert len(out) == 10
    assert set(out.true_wp.tolist()) <= set(data.true_wp.tolist())


def test_fractional_game_count():
    G = 4101
    data = PlayDataset(np.arange(G), np.ones(G, int), np.full(G, 2), np.zeros(G, int),
                       np.zeros(G, int), np.full(G, 0.5))
    for kind in ("cluster", "randomized_cluster"):
        out = resample(data, BootstrapScheme(kind, 0.35), np.random.default_rng(1))
        assert out.n_games == 1435
        assert len(out) == 1435


def test_fraction_too_small():
    with pytest.raises(ValueError, match="fraction too small for dataset"):
        resample(tiny([0.5, 0.5]), BootstrapScheme("cluster", 0.1), np.random.default_rng(0))


def test_cluster_integrity(clustered):
    out = resample(clustered, BootstrapScheme("cluster", 1.0), np.random.default_rng(5))
    originals = {tuple(rows_of(clustered, g)) for g in np.unique(clustered.game_id)}
    assert out.n_games == clustered.n_games
    for g in np.unique(out.game_id):
        assert tuple(rows_of(out, g)) in originals
        assert len(np.unique(out.y[out.game_id == g])) == 1


def test_randomized_cluster_rows_stay_in_one_game(clustered):
    out = resample(clustered, BootstrapScheme("randomized_cluster", 0.5), np.random.default_rng(6))
    assert out.n_games == 56  # round(112 * 0.5)
    starts, lengths = out.game_slices()
    assert np.all(lengths == 8)
    for g in np.unique(out.game_id):
        mine = Counter(rows_of(out, g))
        assert len(np.unique(out.y[out.game_id == g])) == 1
        assert any(set(mine) <= set(rows_of(clustered, h)) for h in np.unique(clustered.game_id))
        assert np.all(np.diff(out.t[out.game_id == g]) >= 0)


def test_phi_one_shares_code_path(clustered):
    # fractional phi=1 is the plain scheme: the same draws give the same data
    a = resample(clustered, BootstrapScheme("cluster", 1.0), np.random.default_rng(2))
    b = resample(clustered, BootstrapScheme("cluster", 1.0, B=7), np.random.default_rng(2))
    assert a.equals(b)


def test_order_statistic_ranks():
    assert order_statistic_ranks(101, 0.10) == (6, 96)
    assert order_statistic_ranks(51, 0.10) == (3, 49)


def test_arithmetic_sequence_interval():
    preds = (0.01 * np.arange(101))[:, None]
    rng = np.random.default_rng(0)
    iv = intervals_from_predictions(rng.permutation(preds), np.array([0.5]))
    assert iv.lower[0] == pytest.approx(0.05, abs=1e-15)
    assert iv.upper[0] == pytest.approx(0.95, abs=1e-15)


def test_widening_rule():
    preds = np.tile(np.linspace(0.005, 0.03, 101)[:, None], (1, 3))
    iv = intervals_from_predictions(preds, np.array([0.01, 0.5, 0.99]))
    assert iv.lower[0] == 0.0 and iv.lower[1] > 0
    assert iv.upper[2] == 1.0 and iv.upper[1] < 1


def test_identical_predictions_degenerate():
    iv = intervals_from_predictions(np.full((101, 1), 0.3), np.array([0.3]))
    assert iv.lower[0] == iv.upper[0] == 0.3


def test_coverage_hand_example():
    iv = IntervalSet(np.array([0.2, 0.6, 0.85]), np.array([0.4, 0.7, 1.0]), np.full(3, 0.5))
    rep = evaluate_coverage(iv, tiny([0.3, 0.5, 0.9]))
    assert rep.coverage[0] == pytest.approx(2 / 3, abs=1e-15)
    assert rep.width[0] == pytest.approx(0.15, abs=1e-15)


def test_full_and_zero_width_intervals():
    truth = np.array([0.1, 0.4, 0.8])
    rep = evaluate_coverage(IntervalSet(np.zeros(3), np.ones(3), truth), tiny(truth))
    assert rep.coverage[0] == 1.0 and rep.width[0] == 1.0
    rep = evaluate_coverage(IntervalSet(truth, truth.copy(), truth), tiny(truth))
    assert rep.coverage[0] == 1.0 and rep.width[0] == 0.0


def test_binned_coverage():
    truth = np.array([0.1, 0.2, 0.3, 0.6, 0.7, 1.0])
    full = IntervalSet(np.zeros(6), np.ones(6), truth)
    bins = binned_coverage(full, tiny(truth), edges=[0.0, 0.5, 1.0])
    assert [b.count for b in bins] == [3, 3]
    assert all(b.coverage == 1.0 for b in bins)
    default = binned_coverage(full, tiny(truth))
    assert [(b.lo, b.hi) for b in default][-1] == (0.9, 1.0)
    assert len(default) == 6  # empty bins are omitted
    agg = aggregate_binned([bins, bins])
    assert [b.count for b in agg] == [6, 6]


def test_ensemble_smoke_and_determinism(clustered, table):
    scheme = BootstrapScheme("randomized_cluster", 1.0, B=2)
    a = fit_bootstrap_ensemble(clustered, scheme, SMOKE, np.random.default_rng(11))
    b = fit_bootstrap_ensemble(clustered, scheme, SMOKE, np.random.default_rng(11), workers=2)
    assert len(a) == 2
    states = clustered.features
    pa = np.vstack([m.predict_proba(states) for m in a])
    pb = np.vstack([m.predict_proba(states) for m in b])
    assert np.array_equal(pa, pb)
    assert np.any(pa[0] != pa[1])
    iv = build_intervals(a, a[0], states)
    assert np.all(iv.lower <= iv.upper)


def test_coverage_campaign_smoke(tmp_path):
    schemes = [BootstrapScheme("standard", 1.0, 5), BootstrapScheme("randomized_cluster", 0.5, 5)]
    camp = run_coverage_campaign(schemes, zeta=8, M=2, estimator=SMOKE, seed=4, n_test_games=300)
    for r in camp.reports:
        assert r.M == 2
        assert np.all((0 <= r.coverage) & (r.coverage <= 1))
        assert np.all((0 <= r.width) & (r.width <= 1))
    write_coverage_csv(list(zip(camp.schemes, camp.reports)), tmp_path / "c.csv")
    rows = read_csv(tmp_path / "c.csv")
    assert [r["scheme"] for r in rows] == ["standard", "randomized_cluster"]
    write_binned_csv(camp.bins[1], tmp_path / "b.csv")
    assert list(read_csv(tmp_path / "b.csv")[0]) == ["bin_lo", "bin_hi", "coverage", "se"]


def test_coverage_campaign_worker_invariance():
    schemes = [BootstrapScheme("cluster", 1.0, 3)]
    a = run_coverage_campaign(schemes, 8, 2, SMOKE, seed=12, n_test_games=200, workers=1)
    b = run_coverage_campaign(schemes, 8, 2, SMOKE, seed=12, n_test_games=200, workers=2)
    assert np.array_equal(a.reports[0].coverage, b.reports[0].coverage)
    assert np.array_equal(a.reports[0].width, b.reports[0].width)


def test_smaller_fraction_widens_on_average(table):
    # one-sided check over repeated seeds
    widths = {1.0: [], 0.35: []}
    for seed in range(3):
        camp = run_coverage_campaign(
            [BootstrapScheme("randomized_cluster", phi, 11) for phi in widths],
            zeta=16, M=2, estimator=SMOKE, seed=100 + seed, n_test_games=300)
        for phi, rep in zip(widths, camp.reports):
            widths[phi].append(rep.width.mean())
    assert np.mean(widths[0.35]) > np.mean(widths[1.0])
