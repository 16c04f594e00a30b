import numpy as np
import pytest

from rwfootball.game import GameConfig, GameState
from rwfootball.oracle import build_wp_table, mc_estimate_wp, wp_lookup, write_table_csv

from oracles import enumerate_wp


def test_terminal_layer(table):
    T = table.config.T
    for x in (1, 2, 3):
        assert wp_lookup(table, T + 1, x, 2) == 1.0
        assert wp_lookup(table, T + 1, x, 0) == 0.5
        assert wp_lookup(table, T + 1, x, -1) == 0.0


def test_symmetric_state_is_half(table):
    for t in range(1, table.config.T + 2):
        assert wp_lookup(table, t, 2, 0) == 0.5


def test_last_play_by_hand(table):
    T = table.config.T
    assert wp_lookup(table, T, 1, 0) == 0.75
    assert wp_lookup(table, T, 3, 0) == 0.25


@pytest.mark.parametrize("state", [(0, 2, 0), (58, 2, 0), (1, 0, 0), (1, 4, 0), (1, 2, 57), (1, 2, -57)])
def test_out_of_domain_is_an_error(table, state):
    with pytest.raises(KeyError):
        wp_lookup(table, *state)


def test_recursion_residual_is_zero(table):
    L, T = table.config.L, table.config.T
    v = table.values
    for t in range(1, T + 1):
        for x in range(1, L):
            for s in range(-T + 1, T):
                nxt = v[t]
                left = nxt[L // 2 - 1, s + 1 + T] if x == 1 else nxt[x - 2, s + T]
                right = nxt[L // 2 - 1, s - 1 + T] if x == L - 1 else nxt[x, s + T]
                assert v[t - 1, x - 1, s + T] == 0.5 * left + 0.5 * right


def test_antisymmetry_and_score_monotonicity(table):
    v = table.values
    assert np.abs(v + v[:, ::-1, ::-1] - 1.0).max() <= 1e-12
    assert np.diff(v, axis=2).min() >= -1e-12
    assert v.min() >= 0.0 and v.max() <= 1.0


def test_field_position_monotonicity_empirical(table):
    # not a contract; smaller x is closer to team one's scoring end
    assert np.diff(table.values, axis=1).max() <= 1e-12


@pytest.mark.parametrize("T", [1, 2, 5, 8])
@pytest.mark.parametrize("L", [2, 4, 6])
def test_matches_enumeration_small(L, T):
    tb = build_wp_table(GameConfig(L, T))
    for t in range(1, T + 2):
        assert np.abs(tb.values[t - 1] - enumerate_wp(L, T, t)).max() <= 1e-12


def test_table_is_read_only(table):
    with pytest.raises(ValueError):
        table.values[0, 0, 0] = 1.0


def test_absurd_size_is_rejected():
    with pytest.raises(MemoryError):
        build_wp_table(GameConfig(L=2000, T=5000))


def test_mc_matches_dp_at_a_few_states(table, rng):
    cfg = table.config
    for st in [GameState(1, 2, 0), GameState(cfg.T, 1, 0), GameState(30, 3, 1)]:
        p, se = mc_estimate_wp(cfg, st, 200_000, rng)
        assert abs(p - wp_lookup(table, st.t, st.x, st.s)) <= 4 * max(se, 1e-3)


def test_mc_dominant_lead(table, rng):
    p, se = mc_estimate_wp(table.config, GameState(table.config.T, 2, 5), 10_000, rng)
    assert p == 1.0 and se == 0.0


def test_csv_export(tmp_path):
    tb = build_wp_table(GameConfig(4, 3))
    n = write_table_csv(tb, tmp_path / "wp.csv")
    lines = (tmp_path / "wp.csv").read_text().splitlines()
    assert lines[0] == "t,x,s,wp"
    assert n == len(lines) - 1 == 4 * 3 * 7
    t, x, s, wp = lines[1].split(",")
    assert float(wp) == wp_lookup(tb, int(t), int(x), int(s))
