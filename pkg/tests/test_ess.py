import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwfootball.ess import (
    BiexpFit,
    ExtrapolationError,
    biexp,
    effective_sample_size,
    ess_curve,
    fit_biexponential,
    write_ess_csv,
)
from rwfootball.tables import read_csv

TRUE = (0.05, 1.0, 0.02, 0.1)
ZETAS = 4.0 ** np.linspace(1, 7, 13)


def points(params, zetas=ZETAS):
    u = np.log(zetas) / np.log(4)
    return list(zip(zetas, biexp(u, *params)))


def shifted(fit: BiexpFit, factor: float) -> BiexpFit:
    """Curve g with g(v) = fit(factor * v)."""
    du = np.log(factor) / np.log(fit.base)
    return BiexpFit(fit.a1 * np.exp(-fit.b1 * du), fit.b1, fit.a2 * np.exp(-fit.b2 * du), fit.b2,
                    0.0, 0, fit.base, fit.u_min - 1, fit.u_max + 1)


def test_recovers_noiseless_curve():
    fit = fit_biexponential(points(TRUE))
    u = np.linspace(1, 7, 1000)
    assert np.abs(fit.eval_u(u) - biexp(u, *TRUE)).max() <= 1e-6
    assert min(fit.params) >= 0


def test_flat_curve():
    fit = fit_biexponential([(z, 0.07) for z in ZETAS])
    assert fit.residual_norm <= 1e-12
    assert np.allclose(fit(ZETAS), 0.07, atol=1e-12)


def test_single_exponential_is_nested():
    fit = fit_biexponential(points((0.08, 0.4, 0.0, 0.0)))
    u = np.linspace(1, 7, 200)
    assert np.abs(fit.eval_u(u) - biexp(u, 0.08, 0.4, 0.0, 0.0)).max() <= 1e-6


def test_needs_four_distinct_points():
    with pytest.raises(ValueError):
        fit_biexponential([(4, 0.1), (16, 0.08), (64, 0.07), (64, 0.06)])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.2), st.floats(0.3, 2.0), st.floats(0.001, 0.05), st.floats(0.0, 0.2),
       st.lists(st.floats(-1e-3, 1e-3), min_size=13, max_size=13))
def test_fitted_curve_never_increases(a1, b1, a2, b2, noise):
    pts = [(z, r + e) for (z, r), e in zip(points((a1, b1, a2, b2)), noise)]
    fit = fit_biexponential(pts)
    grid = fit.eval_u(np.linspace(fit.u_min, fit.u_max, 1000))
    assert np.all(np.diff(grid) <= 1e-15)


def test_half_size_fixture():
    kt = fit_biexponential(points(TRUE))
    k1 = shifted(kt, 2.0)
    for z in (16.0, 256.0, 4101.0):
        res = effective_sample_size(k1, kt, z)
        assert abs(res.zeta_prime / (z / 2) - 1) <= 1e-8
        assert abs(k1(res.zeta_prime) - kt(z)) <= 1e-9
        assert res.ratio == pytest.approx(0.5, rel=1e-8)


def test_identical_curves_fixed_point():
    kt = fit_biexponential(points(TRUE))
    res = effective_sample_size(kt, kt, 300.0)
    assert res.zeta_prime == pytest.approx(300.0, rel=1e-9)
    assert res.ratio == pytest.approx(1.0, rel=1e-9)
    assert not res.above_nominal


def test_refuses_to_extrapolate():
    kt = fit_biexponential(points(TRUE))
    k1 = fit_biexponential(points(TRUE, ZETAS[6:]))
    with pytest.raises(ExtrapolationError) as err:
        effective_sample_size(k1, kt, 8.0)
    assert "extrapolation required" in str(err.value)
    assert len(err.value.bracket) == 4


def test_ess_monotone_in_zeta():
    kt = fit_biexponential(points((0.06, 0.6, 0.02, 0.08)))
    k1 = fit_biexponential(points((0.05, 0.8, 0.015, 0.1)))
    zs = 4.0 ** np.linspace(2, 6, 30)
    res = ess_curve(k1, kt, zs, search=(1.0, 4.0**8))
    zp = np.array([r.zeta_prime for r in res])
    assert np.all(np.diff(zp) >= 0)


def test_ess_csv(tmp_path):
    kt = fit_biexponential(points(TRUE))
    res = ess_curve(shifted(kt, 2.0), kt, [16.0, 64.0])
    write_ess_csv(res, tmp_path / "e.csv")
    rows = read_csv(tmp_path / "e.csv")
    assert list(rows[0]) == ["zeta", "zeta_prime", "ratio"]
    assert float(rows[1]["zeta_prime"]) == pytest.approx(32.0, rel=1e-8)
