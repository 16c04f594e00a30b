"""Effective sample size from smoothed accuracy curves.

An accuracy curve ``zeta -> RMSE`` is smoothed by a sum of two decaying
exponentials in ``u = log_base(zeta)`` (base 4 by default).  The effective
sample size of a clustered dataset with ``zeta`` games is the ``zeta'``
at which the independent-outcome curve reaches the clustered curve's value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares, nnls

from .tables import write_csv

__all__ = [
    "BiexpFit",
    "EssResult",
    "FitError",
    "ExtrapolationError",
    "biexp",
    "fit_biexponential",
    "effective_sample_size",
    "ess_curve",
    "write_ess_csv",
]

FAST_RATES = (0.5, 1.0, 2.0, 4.0)
SLOW_RATES = (0.01, 0.04, 0.1, 0.25)


class FitError(RuntimeError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class ExtrapolationError(ValueError):
    def __init__(self, msg, target, bracket):
        super().__init__(msg)
        self.target = target
        self.bracket = bracket


def biexp(u, a1, b1, a2, b2):
    u = np.asarray(u, dtype=float)
    return a1 * np.exp(-b1 * u) + a2 * np.exp(-b2 * u)


@dataclass(frozen=True)
class BiexpFit:
    """``f(u) = a1 exp(-b1 u) + a2 exp(-b2 u)`` with ``u = log_base(zeta)``."""

    a1: float
    b1: float
    a2: float
    b2: float
    residual_norm: float
    iterations: int
    base: float = 4.0
    u_min: float = -math.inf
    u_max: float = math.inf

    @property
    def params(self) -> tuple[float, float, float, float]:
        return (self.a1, self.b1, self.a2, self.b2)

    def u(self, zeta):
        return np.log(np.asarray(zeta, dtype=float)) / math.log(self.base)

    def eval_u(self, u):
        return biexp(u, *self.params)

    def __call__(self, zeta):
        return self.eval_u(self.u(zeta))


@dataclass(frozen=True)
class EssResult:
    zeta: float
    zeta_prime: float
    ratio: float

    @property
    def above_nominal(self) -> bool:
        """True when the effective size exceeds the nominal one (unexpected)."""
        return self.ratio > 1.0


def _canonical(p):
    a1, b1, a2, b2 = (float(v) for v in p)
    if b2 > b1:
        a1, b1, a2, b2 = a2, b2, a1, b1
    return a1, b1, a2, b2


def _residual(theta, u, r):
    a1, b1, a2, b2 = theta**2
    return biexp(u, a1, b1, a2, b2) - r


def _jac(theta, u, r):
    t1, t2, t3, t4 = theta
    e1 = np.exp(-t2**2 * u)
    e2 = np.exp(-t4**2 * u)
    return np.column_stack([
        2 * t1 * e1,
        -2 * t2 * u * t1**2 * e1,
        2 * t3 * e2,
        -2 * t4 * u * t3**2 * e2,
    ])


def fit_biexponential(points: Sequence[tuple[float, float]], base: float = 4.0,
                      max_nfev: int = 20_000) -> BiexpFit:
    """Nonnegative biexponential least-squares fit of ``(zeta, rmse)`` points.

    Each parameter is written as a square so the solution stays
    nonnegative, then Levenberg-Marquardt runs from 16 starts: every pair
    of a fast and a slow decay rate, with amplitudes from a nonnegative
    linear fit at those rates.  The flat curve ``a1 + a2 = mean`` is also a
    candidate.  The lowest residual wins, ties going to the smaller
    parameter vector.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (zeta, rmse) pairs")
    if len(np.unique(pts[:, 0])) < 4:
        raise ValueError("need at least 4 points with distinct zeta")
    if np.any(pts[:, 0] <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("zeta must be positive and all values finite")
    u = np.log(pts[:, 0]) / math.log(base)
    r = pts[:, 1]

    mean = float(r.mean())
    flat = (max(mean, 0.0), 0.0, 0.0, 0.0)
    candidates = [(float(np.linalg.norm(biexp(u, *flat) - r)), float(np.linalg.norm(flat)), flat, 0)]
    failures = 0
    for bf in FAST_RATES:
        for bs in SLOW_RATES:
            design = np.column_stack([np.exp(-bf * u), np.exp(-bs * u)])
            amp, _ = nnls(design, r)
            # squares have zero slope at zero; start amplitudes slightly off it
            theta0 = np.sqrt(np.array([max(amp[0], 1e-6), bf, max(amp[1], 1e-6), bs]))
            sol = least_squares(_residual, theta0, jac=_jac, args=(u, r), method="lm",
                                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
            if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
                failures += 1
                continue
            p = _canonical(sol.x**2)
            res = float(np.linalg.norm(biexp(u, *p) - r))
            candidates.append((res, float(np.linalg.norm(p)), p, int(sol.nfev)))
    if failures == len(FAST_RATES) * len(SLOW_RATES):
        best = min(candidates, key=lambda c: c[:2])
        raise FitError("biexponential fit did not converge from any start", best=best)
    best_res = min(c[0] for c in candidates)
    tol = best_res * 1e-9 + 1e-15
    res, _, p, nfev = min((c for c in candidates if c[0] <= best_res + tol), key=lambda c: c[1])
    return BiexpFit(*p, residual_norm=res, iterations=nfev, base=base,
                    u_min=float(u.min()), u_max=float(u.max()))


def effective_sample_size(curve_K1: BiexpFit, curve_KT: BiexpFit, zeta: float,
                          search: tuple[float, float] | None = None,
                          rtol: float = 1e-10) -> EssResult:
    """Solve ``curve_K1(zeta') = curve_KT(zeta)`` for ``zeta'`` by bisection.

    ``curve_K1`` is indexed by its own ``zeta`` (a dataset of ``zeta * T``
    games with one play each), which is directly the effective size.  The
    search runs over ``search`` (default: the K=1 curve's fitted range) and
    refuses to extrapolate beyond it.
    """
    target = float(curve_KT(zeta))
    if search is None:
        lo_u, hi_u = curve_K1.u_min, curve_K1.u_max
    else:
        lo_u, hi_u = (float(curve_K1.u(z)) for z in search)
    if not (math.isfinite(lo_u) and math.isfinite(hi_u)) or lo_u >= hi_u:
        raise ValueError("need a finite, non-empty search interval")
    f_lo, f_hi = float(curve_K1.eval_u(lo_u)), float(curve_K1.eval_u(hi_u))
    if not f_hi <= target <= f_lo:
        bracket = (curve_K1.base**lo_u, curve_K1.base**hi_u, f_lo, f_hi)
        raise ExtrapolationError(
            f"extrapolation required: target {target:.6g} outside [{f_hi:.6g}, {f_lo:.6g}] "
            f"on zeta' in [{bracket[0]:.6g}, {bracket[1]:.6g}]", target, bracket)
    du = rtol / math.log(curve_K1.base) / 4
    while hi_u - lo_u > du:
        mid = 0.5 * (lo_u + hi_u)
        if float(curve_K1.eval_u(mid)) > target:
            lo_u = mid
        else:
            hi_u = mid
    zp = float(curve_K1.base ** (0.5 * (lo_u + hi_u)))
    return EssResult(float(zeta), zp, zp / float(zeta))


def ess_curve(curve_K1: BiexpFit, curve_KT: BiexpFit, zetas: Sequence[float],
              search=None) -> list[EssResult]:
    return [effective_sample_size(curve_K1, curve_KT, z, search) for z in zetas]


def write_ess_csv(results: Sequence[EssResult], path) -> None:
    write_csv(path, ["zeta", "zeta_prime", "ratio"],
              ([r.zeta, r.zeta_prime, r.ratio] for r in results))
