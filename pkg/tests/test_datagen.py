import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwfootball.datagen import (
    DatasetSpec,
    generate_dataset,
    generate_test_sets,
    read_dataset_csv,
    round_half_up,
    write_dataset_csv,
)


def check_structure(d, spec, table):
    starts, lengths = d.game_slices()
    assert len(starts) == spec.G == d.n_games
    assert np.all(lengths == spec.K)
    assert len(d) == spec.G * spec.K
    for a, n in zip(starts, lengths):
        block = slice(a, a + n)
        assert len(np.unique(d.y[block])) == 1
        assert np.all(np.diff(d.t[block]) > 0)
    assert np.array_equal(d.true_wp, table.lookup(d.t, d.x, d.s))
    assert d.t.min() >= 1 and d.t.max() <= spec.T
    assert d.x.min() >= 1 and d.x.max() <= spec.L - 1


def test_single_full_game(table, rng):
    spec = DatasetSpec(zeta=1, K=56)
    d = generate_dataset(spec, table, rng)
    assert len(d) == 56 and d.n_games == 1
    assert np.array_equal(d.t, np.arange(1, 57))
    assert d.x[0] == 2 and d.s[0] == 0
    check_structure(d, spec, table)


def test_three_plays_per_game_counts(table, rng):
    spec = DatasetSpec(zeta=100, K=3)
    assert spec.G == 1867
    d = generate_dataset(spec, table, rng)
    assert len(d) == 5601
    check_structure(d, spec, table)


def test_full_scale_independent_shape():
    spec = DatasetSpec(zeta=4101, K=1)
    assert spec.G == 229_656 and spec.n_rows == 229_656


def test_round_half_up():
    assert round_half_up(2.5) == 3 and round_half_up(1866.5) == 1867 and round_half_up(0.49) == 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 40), st.integers(1, 56))
def test_nominal_size_within_K(zeta, K):
    spec = DatasetSpec(zeta=zeta, K=K)
    assert abs(spec.n_rows - zeta * 56) <= K


def test_k_greater_than_t_rejected():
    with pytest.raises(ValueError):
        DatasetSpec(zeta=10, K=57)
    with pytest.raises(ValueError):
        DatasetSpec(zeta=10, K=0)


def test_k1_rows_come_from_distinct_games(table, rng):
    d = generate_dataset(DatasetSpec(zeta=20, K=1), table, rng)
    assert len(np.unique(d.game_id)) == len(d)


@pytest.mark.parametrize("K", [2, 7, 30])
def test_structure_intermediate_K(table, rng, K):
    spec = DatasetSpec(zeta=10, K=K)
    check_structure(generate_dataset(spec, table, rng), spec, table)


def test_subsample_is_uniform_over_plays(table, rng):
    d = generate_dataset(DatasetSpec(zeta=400, K=4), table, rng)
    counts = np.bincount(d.t, minlength=57)[1:]
    expected = len(d) / 56
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < 100  # 55 dof; p ~ 2e-4


def test_outcomes_independent_across_games(table, rng):
    d = generate_dataset(DatasetSpec(zeta=2000, K=2, games=20_000), table, rng)
    y = d.y.reshape(-1, 2)
    # within a game: identical; across neighbouring games: uncorrelated
    assert np.all(y[:, 0] == y[:, 1])
    a, b = y[:-1:2, 0], y[1::2, 0]
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 4 / np.sqrt(len(a))


def test_test_sets(table, rng):
    sets = generate_test_sets(3, 500, table, rng)
    assert len(sets) == 3
    for s in sets:
        assert len(s) == 500 and s.n_games == 500
        idx = rng.choice(len(s), 100, replace=False)
        assert np.array_equal(s.true_wp[idx], table.lookup(s.t[idx], s.x[idx], s.s[idx]))
    one = generate_test_sets(1, 1, table, rng)
    assert len(one) == 1 and len(one[0]) == 1


def test_table_mismatch_rejected(rng):
    from rwfootball.game import GameConfig
    from rwfootball.oracle import build_wp_table

    with pytest.raises(ValueError):
        generate_dataset(DatasetSpec(zeta=1, K=1), build_wp_table(GameConfig(4, 10)), rng)


def test_same_stream_same_dataset(table):
    spec = DatasetSpec(zeta=5, K=3)
    a = generate_dataset(spec, table, np.random.default_rng(5))
    b = generate_dataset(spec, table, np.random.default_rng(5))
    assert a.equals(b)


def test_csv_round_trip_is_exact(table, rng, tmp_path):
    d = generate_dataset(DatasetSpec(zeta=3, K=5), table, rng)
    path = tmp_path / "d.csv"
    write_dataset_csv(d, path)
    assert path.read_text().splitlines()[0] == "game_id,t,x,s,y,true_wp"
    back = read_dataset_csv(path)
    assert back.equals(d)
    write_dataset_csv(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()
