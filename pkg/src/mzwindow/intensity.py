"""Intensity readout of the interferometer and the detector-noise comparison.

Detector noise of width ``w`` is added to both quadratures of the detected
mode for intensity readout, and to the measured phase quadrature for binned
homodyne readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .gaussian import MEASURED_MODE, SqueezedSource, make_squeezed_vacuum, mzi_matrix
from .metrology import best_sensitivity, optimize_bin
from .response import BinningOperator, InterferometerScenario

# readout schemes of the noise comparison, classical input first
SCHEMES = (
    "binned_classical",
    "binned_squeezed",
    "binned_squeezed_aopt",
    "intensity_classical",
    "intensity_squeezed",
)

NOISE_CANDIDATES = (0.5, 1.0 / math.sqrt(2.0), 1.0)


def intensity_stats(state, mode=0):
    """Mean and variance of the photon number of one mode.

    Uses ``V = 2 cov`` and ``d = sqrt(2) mean`` so the vacuum has ``V = I/2``.
    """
    sl = slice(2 * mode, 2 * mode + 2)
    if not 0 <= mode < state.n_modes:
        raise IndexError(f"mode {mode} out of range for {state.n_modes}-mode state")
    return _number_moments(state.mean[sl], state.cov[sl, sl])


def _number_moments(mean, cov):
    v = 2.0 * np.asarray(cov)
    d = math.sqrt(2.0) * np.asarray(mean)
    tr = np.trace(v, axis1=-2, axis2=-1)
    dd = np.sum(d * d, axis=-1)
    n = 0.5 * (tr + dd) - 0.5
    vv = np.einsum("...ij,...ji->...", v, v)
    dvd = np.einsum("...i,...ij,...j->...", d, v, d)
    var = 0.5 * vv - 0.25 + dvd
    if np.ndim(n) == 0:
        return float(n), float(var)
    return n, var


def _output_number_moments(s, phi):
    """Photon-number moments of the measured output mode over a phase array."""
    src = s.effective_source
    sq = make_squeezed_vacuum(src)
    mean_in = np.array([s.alpha, 0.0, 0.0, 0.0])
    cov_in = np.zeros((4, 4))
    cov_in[:2, :2] = 0.25 * np.eye(2)
    cov_in[2:, 2:] = sq.cov
    S = mzi_matrix(np.asarray(phi, dtype=float))
    mean = S @ mean_in
    cov = S @ cov_in @ np.swapaxes(S, -1, -2)
    sl = slice(2 * MEASURED_MODE, 2 * MEASURED_MODE + 2)
    cov_m = cov[..., sl, sl] + s.noise_var * np.eye(2)
    return _number_moments(mean[..., sl], cov_m)


def photon_number_fringe(s, phi):
    """Mean photon number at the measured output as a function of phase."""
    return _output_number_moments(s, phi)[0]


def caves_sensitivity(s, phi, step=1e-6):
    """Error propagation on the detected photon number.

    Returns ``inf`` where the fringe slope vanishes.
    """
    phi = np.asarray(phi, dtype=float)
    _, var = _output_number_moments(s, phi)
    slope = (photon_number_fringe(s, phi + step) - photon_number_fringe(s, phi - step)) / (2 * step)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.sqrt(np.maximum(var, 0.0)) / np.abs(slope)
    sigma = np.where(np.isfinite(sigma) & (slope != 0), sigma, np.inf)
    return float(sigma) if sigma.ndim == 0 else sigma


def best_caves_sensitivity(s):
    """Minimum of :func:`caves_sensitivity` over ``phi`` in ``(0, pi)``."""
    grid = np.unique(np.concatenate([
        np.geomspace(1e-5, math.pi - 1e-5, 600),
        np.linspace(1e-5, math.pi - 1e-5, 600),
    ]))
    vals = caves_sensitivity(s, grid)
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda x: min(caves_sensitivity(s, x), 1e300), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-9})
    if res.fun < vals[i]:
        return float(res.fun), float(res.x)
    return float(vals[i]), float(grid[i])


def _scheme_sigma(scheme, alpha, w, a, squeezed):
    noise = w if w > 0 else None
    classical = SqueezedSource(1.0)
    if scheme == SCHEMES[0]:
        return best_sensitivity(InterferometerScenario(alpha, classical, BinningOperator(a), None, noise))[0]
    if scheme == SCHEMES[1]:
        return best_sensitivity(InterferometerScenario(alpha, squeezed, BinningOperator(a), None, noise))[0]
    if scheme == SCHEMES[2]:
        return optimize_bin(alpha, squeezed, noise_w=noise)[1]
    src = classical if scheme == SCHEMES[3] else squeezed
    return best_caves_sensitivity(InterferometerScenario(alpha, src, BinningOperator(a), None, noise))[0]


@dataclass(frozen=True)
class DegradationTable:
    """Ratios of best sensitivity with noise to best sensitivity without.

    ``ratios[i, j]`` belongs to ``schemes[i]`` at ``alphas[j]``.
    """

    alphas: tuple
    schemes: tuple
    ratios: np.ndarray
    w: float

    def cell(self, scheme, alpha):
        return float(self.ratios[self.schemes.index(scheme), self.alphas.index(alpha)])


def degradation_table(alphas=(5.0, 20.0), w=1.0 / math.sqrt(2.0), a=0.5, squeezed=None,
                      schemes=SCHEMES):
    """Sensitivity degradation caused by detector noise for each readout scheme."""
    if w < 0:
        raise ValueError("noise width must be >= 0")
    squeezed = squeezed or SqueezedSource(0.5)
    alphas = tuple(float(x) for x in alphas)
    ratios = np.ones((len(schemes), len(alphas)))
    if w > 0:
        for i, scheme in enumerate(schemes):
            for j, alpha in enumerate(alphas):
                noisy = _scheme_sigma(scheme, alpha, w, a, squeezed)
                clean = _scheme_sigma(scheme, alpha, 0.0, a, squeezed)
                ratios[i, j] = noisy / clean
    ratios.setflags(write=False)
    return DegradationTable(alphas, tuple(schemes), ratios, float(w))


def calibrate_noise_width(target=2.3, alpha=5.0, candidates=NOISE_CANDIDATES, a=0.5):
    """Pick the noise width whose classical homodyne degradation is closest to ``target``.

    Returns:
        ``(w, ratios)`` where ``ratios`` maps each candidate to its degradation.
    """
    ratios = {}
    for w in candidates:
        ratios[float(w)] = (_scheme_sigma(SCHEMES[0], alpha, w, a, None)
                            / _scheme_sigma(SCHEMES[0], alpha, 0.0, a, None))
    best = min(ratios, key=lambda w: abs(ratios[w] - target))
    return best, ratios
