"""Figures of merit: fringe width, photon budget, best and optimised sensitivity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect, minimize_scalar
from scipy.stats import linregress

from .gaussian import SqueezedSource
from .response import (
    BinningOperator,
    InterferometerScenario,
    expected_pi,
    expected_pi_ideal,
    sensitivity,
    sensitivity_unwindowed,
)

RAYLEIGH = 2.0 * math.pi / 3.0

_PHI_GRID = np.unique(
    np.concatenate([np.geomspace(1e-6, math.pi / 2, 500), np.linspace(0, math.pi / 2, 501)[1:]])
)
_A_GRID = np.geomspace(1e-2, 50.0, 60)
# stands in for inf inside scalar minimisers
_BIG = 1e300


class FlatResponseError(ValueError):
    """The fringe has no peak, so its width is undefined."""


@dataclass(frozen=True)
class PhotonBudget:
    n_coherent: float
    n_squeezed: float

    def __post_init__(self):
        if self.n_coherent < 0 or self.n_squeezed < -1e-12:
            raise ValueError("photon numbers must be nonnegative")

    @property
    def n_total(self):
        return self.n_coherent + self.n_squeezed


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    n_points: int
    intercept: float = 0.0


def squeezed_photons(src):
    return src.var_x + src.var_p - 0.5


def photon_budget(alpha, src):
    return PhotonBudget(float(alpha) ** 2, max(squeezed_photons(src), 0.0))


def shot_noise_limit(budget):
    n = budget.n_total if isinstance(budget, PhotonBudget) else float(budget)
    if n <= 0:
        raise ValueError("shot-noise limit needs a positive photon number")
    return 1.0 / math.sqrt(n)


def _fringe(s):
    if s.bin.is_ideal:
        if s.source.purity != 1.0 or s.eta is not None or s.noise_w:
            raise ValueError("the ideal projector fringe is defined for pure, lossless input")
        return lambda phi: expected_pi_ideal(s.alpha, s.source.varsigma, phi)
    return lambda phi: expected_pi(s, phi)


def fwhm(s):
    """Full width of the central fringe at half height above its pedestal.

    The pedestal is the minimum of the fringe on ``[0, pi]``.
    """
    f = _fringe(s)
    grid = np.unique(np.concatenate([np.geomspace(1e-9, math.pi, 2000), np.linspace(0, math.pi, 4000)]))
    vals = np.asarray(f(grid))
    i = int(np.argmin(vals))
    floor = vals[i]
    if 0 < i < grid.size - 1:
        res = minimize_scalar(f, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        floor = min(floor, float(res.fun))
    if 1.0 - floor < 1e-12:
        raise FlatResponseError("flat response: fringe width undefined")
    half = 0.5 * (1.0 + floor)
    j = int(np.argmax(vals < half))
    phi_half = bisect(lambda x: f(x) - half, grid[j - 1], grid[j], xtol=1e-10)
    return 2.0 * phi_half


def resolution_improvement(s):
    return RAYLEIGH / fwhm(s)


def _refined_min(f, grid, xatol):
    """Grid search followed by bounded Brent refinement around the best point."""
    vals = np.asarray(f(grid), dtype=float)
    vals = np.where(np.isnan(vals), np.inf, vals)
    i = int(np.argmin(vals))
    lo = grid[i - 1] if i > 0 else grid[0] * 1e-3
    hi = grid[i + 1] if i < grid.size - 1 else grid[i]
    if not np.isfinite(vals[i]) or hi <= lo:
        return float(vals[i]), float(grid[i])
    res = minimize_scalar(lambda x: min(float(f(x)), _BIG), bounds=(lo, hi), method="bounded",
                          options={"xatol": xatol})
    if res.fun < vals[i]:
        return float(res.fun), float(res.x)
    return float(vals[i]), float(grid[i])


def best_sensitivity(s):
    """Smallest phase uncertainty over ``phi`` in ``(0, pi/2]`` and its location.

    An unbounded window falls back to plain homodyne error propagation.
    """
    if s.bin.is_unbounded:
        f = lambda phi: sensitivity_unwindowed(s, phi)  # noqa: E731
    else:
        f = lambda phi: sensitivity(s, phi)  # noqa: E731
    return _refined_min(f, _PHI_GRID, 1e-8)


def optimize_bin(alpha, src, eta=None, noise_w=None):
    """Window half-width that minimises the best sensitivity.

    Returns:
        ``(a_opt, sigma_min)``.
    """
    base = InterferometerScenario(alpha, src, BinningOperator(1.0), eta, noise_w)

    def sigma_at(log_a):
        return best_sensitivity(base.replace(bin=BinningOperator(math.exp(log_a))))[0]

    log_grid = np.log(_A_GRID)
    vals = np.array([sigma_at(x) for x in log_grid])
    i = int(np.argmin(vals))
    lo, hi = log_grid[max(i - 1, 0)], log_grid[min(i + 1, log_grid.size - 1)]
    res = minimize_scalar(sigma_at, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    if res.fun < vals[i]:
        return math.exp(res.x), float(res.fun)
    return float(_A_GRID[i]), float(vals[i])


@dataclass(frozen=True)
class UltimateResult:
    sigma: float
    varsigma_opt: float
    a_opt: float
    phi_opt: float

    def __iter__(self):
        return iter((self.sigma, self.varsigma_opt, self.a_opt, self.phi_opt))


def ultimate_sensitivity(alpha, a=0.5, n_starts=5):
    """Best sensitivity per photon for a pure squeezed input at fixed window.

    The squeezing is chosen to minimise ``sigma * sqrt(N)`` with ``N`` counting
    the squeezed photons too; without that penalty ``sigma`` keeps falling as
    the squeezing grows. The search over ``log varsigma`` starts from the
    ``n_starts`` best grid cells and refines each with bounded Brent.
    """
    if alpha < 2:
        raise ValueError("alpha must be >= 2")

    def at(log_s):
        src = SqueezedSource(math.exp(log_s))
        sig, phi = best_sensitivity(InterferometerScenario(alpha, src, BinningOperator(a)))
        return sig, phi, sig * math.sqrt(photon_budget(alpha, src).n_total)

    grid = np.linspace(math.log(1e-3), 0.0, 61)
    cost = np.array([at(x)[2] for x in grid])
    best = None
    for i in np.argsort(cost)[:n_starts]:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(lambda x: at(x)[2], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-7})
        x = res.x if res.fun < cost[i] else grid[i]
        cand = (min(res.fun, cost[i]), x)
        if best is None or cand[0] < best[0]:
            best = cand
    sig, phi, _ = at(best[1])
    return UltimateResult(sig, math.exp(best[1]), a, phi)


def scaling_fit(points, min_points=4):
    """Least-squares slope of ``log sigma`` against ``log N``.

    Args:
        points: Iterable of ``(N, sigma)`` pairs.
        min_points: Smallest accepted sample. With exactly two points the
            slope is exact and the standard error is reported as ``inf``.
    """
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected (N, sigma) pairs")
    if arr.shape[0] < max(min_points, 2):
        raise ValueError(f"need at least {max(min_points, 2)} points, got {arr.shape[0]}")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("scaling fit needs positive finite values")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    if arr.shape[0] == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return ScalingFit(float(slope), math.inf, 2, float(y[0] - slope * x[0]))
    fit = linregress(x, y)
    return ScalingFit(float(fit.slope), float(fit.stderr), arr.shape[0], float(fit.intercept))
