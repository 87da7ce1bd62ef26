"""Source characterisation: phase-swept variance fits, pump-power curves, dB levels.

Variances in the phase-sweep model use the vacuum-1/4 convention. Pump-power
curves and dB levels are relative to shot noise (vacuum = 1).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .gaussian import SqueezedSource

_MAX_NFEV = 500
_FTOL = 1e-10


class FitError(RuntimeError):
    """Least squares did not converge; ``params`` holds the last iterate."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


def variance_model(phi, src):
    """Quadrature variance at local-oscillator phase ``phi`` (vacuum = 1/4)."""
    return _variance(phi, src.varsigma, src.purity)


def _variance(phi, s, p):
    return 0.25 * ((np.sin(phi) / (s * p)) ** 2 + (s * np.cos(phi)) ** 2)


def db_levels(src):
    """Squeezing and anti-squeezing in dB relative to shot noise."""
    sq = 10.0 * math.log10(src.varsigma**2)
    asq = 10.0 * math.log10((src.varsigma * src.purity) ** -2)
    return sq, asq


def source_from_db(sq_db, asq_db):
    """Inverse of :func:`db_levels`."""
    s = 10.0 ** (sq_db / 20.0)
    p = 10.0 ** (-asq_db / 20.0) / s
    return SqueezedSource(s, p)


def _canonical_segment(a, b, c):
    # var(theta) is even and pi-periodic, so (a, b, c) ~ -(a, b, c) and a ~ a + pi
    if b < 0 or (b == 0 and c < 0):
        a, b, c = -a, -b, -c
    return (float(np.mod(a, math.pi)), float(b), float(c))


@dataclass(frozen=True)
class PiezoSweepModel:
    """Three-segment quadratic map from the raw sweep axis to optical phase.

    Segment 1 covers ``phi < phi1``, segment 2 ``phi1 <= phi < phi2`` and
    segment 3 the rest. Each segment maps ``phi`` to ``a + b phi + c phi^2``.
    """

    phi1: float
    phi2: float
    coeffs: tuple
    source: SqueezedSource

    def __post_init__(self):
        if not self.phi1 < self.phi2:
            raise ValueError("segment boundaries must satisfy phi1 < phi2")
        coeffs = tuple(_canonical_segment(*map(float, seg)) for seg in self.coeffs)
        if len(coeffs) != 3:
            raise ValueError("expected three (a, b, c) segments")
        object.__setattr__(self, "coeffs", coeffs)

    def segment_index(self, phi):
        phi = np.asarray(phi, dtype=float)
        return (phi >= self.phi1).astype(int) + (phi >= self.phi2).astype(int)

    def phase(self, phi):
        phi = np.asarray(phi, dtype=float)
        k = self.segment_index(phi)
        a, b, c = (np.array(col)[k] for col in zip(*self.coeffs))
        return a + b * phi + c * phi * phi

    def variance(self, phi):
        return variance_model(self.phase(phi), self.source)


@dataclass(frozen=True)
class TomographyFit:
    source: SqueezedSource
    piezo: PiezoSweepModel
    residual: float
    n_samples: int

    def __iter__(self):
        return iter((self.source, self.piezo, self.residual))


def _unpack(theta):
    return theta[0], theta[1], theta[2:].reshape(3, 3)


def _segment_masks(phi, b1, b2):
    return [phi < b1, (phi >= b1) & (phi < b2), phi >= b2]


def _tomo_residuals(theta, phi, y, masks):
    s, p, coeffs = _unpack(theta)
    model = np.empty_like(y)
    for m, (a, b, c) in zip(masks, coeffs):
        model[m] = _variance(a + b * phi[m] + c * phi[m] ** 2, s, p)
    return model / y - 1.0


def _segment_start(phi, y, s, p):
    """Coarse grid over offset and slope for one segment with ``c = 0``."""
    if phi.size == 0:
        return np.array([0.0, 1.0, 0.0])
    span = max(np.ptp(phi), 1e-3)
    offsets = np.linspace(0, math.pi, 36, endpoint=False)
    slopes = np.geomspace(0.05, 40.0 * math.pi / span, 60) / 4.0
    A, B = np.meshgrid(offsets, slopes, indexing="ij")
    theta = A[..., None] + B[..., None] * phi
    cost = np.sum((_variance(theta, s, p) / y - 1.0) ** 2, axis=-1)
    i, j = np.unravel_index(np.argmin(cost), cost.shape)
    return np.array([offsets[i], slopes[j], 0.0])


def _fit_fixed_boundaries(phi, y, b1, b2, start=None):
    masks = _segment_masks(phi, b1, b2)
    if start is None:
        s0 = float(np.clip(2.0 * math.sqrt(np.min(y)), 0.05, 1.0))
        p0 = float(np.clip(1.0 / (2.0 * s0 * math.sqrt(np.max(y))), 0.05, 1.0))
        segs = [_segment_start(phi[m], y[m], s0, p0) for m in masks]
        start = np.concatenate([[s0, p0], *segs])
    lower = np.r_[1e-3, 1e-3, np.full(9, -np.inf)]
    upper = np.r_[1.0, 1.0, np.full(9, np.inf)]
    start = np.clip(start, lower + 1e-9, upper)
    res = least_squares(_tomo_residuals, start, args=(phi, y, masks), bounds=(lower, upper),
                        method="trf", ftol=_FTOL, xtol=1e-12, gtol=1e-12, max_nfev=_MAX_NFEV)
    return res


def _candidate_cuts(phi_sorted, n):
    mids = 0.5 * (phi_sorted[1:] + phi_sorted[:-1])
    idx = np.unique(np.linspace(0, mids.size - 1, n).round().astype(int))
    return mids, idx


def fit_tomography(samples, n_candidates=9):
    """Fit the source and the piezo nonlinearity to a phase-swept variance trace.

    Segment boundaries are profiled: a coarse grid of boundary pairs picks the
    best start, then each boundary is moved over neighbouring sample gaps
    while the cost decreases. Residuals are relative, ``model / data - 1``.

    Args:
        samples: Sequence of ``(phi_raw, variance)`` pairs, at least 30.
        n_candidates: Boundary positions tried per boundary in the coarse pass.

    Returns:
        A :class:`TomographyFit` that unpacks as ``(source, piezo, residual)``.

    A trace that the parameter-free vacuum model explains as well, by the
    Bayesian information criterion, is reported as vacuum.

    Raises:
        FitError: If least squares hits its evaluation budget.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError("expected (phi, variance) pairs")
    if data.shape[0] < 30:
        raise ValueError(f"need at least 30 samples, got {data.shape[0]}")
    order = np.argsort(data[:, 0], kind="stable")
    phi, y = data[order, 0], data[order, 1]
    if np.any(y <= 0) or not np.all(np.isfinite(data[:, :2])):
        raise ValueError("variances must be positive and finite")

    mids, idx = _candidate_cuts(phi, n_candidates)
    cache = {}

    def run(i, j, start=None):
        if (i, j) not in cache:
            cache[(i, j)] = _fit_fixed_boundaries(phi, y, mids[i], mids[j], start)
        return cache[(i, j)]

    best = None
    for i, j in itertools.combinations(idx, 2):
        res = run(int(i), int(j))
        if best is None or res.cost < best[0].cost:
            best = (res, int(i), int(j))

    step = max(1, int(np.diff(idx).max()) // 2) if idx.size > 1 else 1
    res, i, j = best
    while step >= 1:
        moved = False
        for di, dj in ((-step, 0), (step, 0), (0, -step), (0, step)):
            ni, nj = i + di, j + dj
            if not (0 <= ni < nj < mids.size):
                continue
            cand = run(ni, nj, res.x)
            if cand.cost < res.cost * (1 - 1e-12):
                res, i, j, moved = cand, ni, nj, True
        if not moved:
            step //= 2

    s, p, coeffs = _unpack(res.x)
    rss = float(2.0 * res.cost)
    # a flat trace leaves the phase unidentifiable; prefer vacuum when the
    # free parameters do not pay for themselves
    rss_vac = float(np.sum((0.25 / y - 1.0) ** 2))
    n, k = phi.size, res.x.size + 2
    if n * math.log(rss_vac / n) <= n * math.log(max(rss, 1e-300) / n) + k * math.log(n):
        src = SqueezedSource(1.0)
        piezo = PiezoSweepModel(float(mids[i]), float(mids[j]), tuple(map(tuple, coeffs)), src)
        return TomographyFit(src, piezo, rss_vac, n)
    if res.status == 0:
        raise FitError("tomography fit did not converge", res.x)
    src = SqueezedSource(min(s, 1.0), min(p, 1.0))
    piezo = PiezoSweepModel(float(mids[i]), float(mids[j]), tuple(map(tuple, coeffs)), src)
    return TomographyFit(src, piezo, rss, n)


@dataclass(frozen=True)
class PumpPowerModel:
    """Parametric-oscillator squeezing versus pump power.

    Attributes:
        P_th: Threshold pump power in mW.
        eta: Total detection efficiency.
        kappa: Cavity decay rate in rad MHz.
        nu: Sideband frequency in MHz.
    """

    P_th: float
    eta: float
    kappa: float
    nu: float = 5.0

    def __post_init__(self):
        for name in ("P_th", "kappa", "nu"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


def pump_variance(p, model, antisqueezing=False):
    """Shot-noise-relative variance at pump power ``p`` (mW)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ValueError("pump power must be >= 0")
    return _pump(p, model.P_th, model.eta, model.kappa, model.nu, antisqueezing)


def _pump(p, P_th, eta, kappa, nu, antisqueezing):
    x = np.sqrt(p / P_th)
    omega = 2.0 * math.pi * nu / kappa
    sign = -1.0 if antisqueezing else 1.0
    frac = 4.0 * x * eta / (4.0 * omega**2 + (1.0 + sign * x) ** 2)
    out = 1.0 - sign * frac
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PumpFit:
    model: PumpPowerModel
    stderr: dict = field(default_factory=dict)
    residual: float = 0.0

    def report(self):
        return [
            {"parameter": k, "estimate": getattr(self.model, k), "stderr": self.stderr[k]}
            for k in ("P_th", "eta", "kappa")
        ]


def fit_pump_curve(points, nu=5.0, weights=None, start=(100.0, 0.9, 500.0)):
    """Joint fit of squeezing and anti-squeezing levels versus pump power.

    Args:
        points: Rows ``(p_mW, sq_db, asq_db)``. ``asq_db`` may be NaN or the
            column omitted when only the squeezed branch was recorded.
        nu: Sideband frequency in MHz, held fixed.
        weights: Optional per-row weights applied to both branches.
        start: Initial ``(P_th, eta, kappa)``.

    Returns:
        :class:`PumpFit` with standard errors from the residual-scaled
        Gauss-Newton covariance.
    """
    data = np.atleast_2d(np.asarray(points, dtype=float))
    if data.shape[1] == 2:
        data = np.column_stack([data, np.full(data.shape[0], np.nan)])
    if data.shape[0] < 5:
        raise ValueError("need at least 5 pump powers")
    p, sq, asq = data[:, 0], data[:, 1], data[:, 2]
    w = np.ones_like(p) if weights is None else np.asarray(weights, dtype=float)
    has_a = np.isfinite(asq)
    sw = np.sqrt(w)

    def resid(theta):
        P_th, eta, kappa = theta
        r_s = 10 * np.log10(np.maximum(_pump(p, P_th, eta, kappa, nu, False), 1e-300)) - sq
        r_a = 10 * np.log10(_pump(p[has_a], P_th, eta, kappa, nu, True)) - asq[has_a]
        return np.concatenate([sw * r_s, sw[has_a] * r_a])

    res = least_squares(resid, np.asarray(start, dtype=float),
                        bounds=([1e-6, 1e-6, 1e-6], [np.inf, 1.0, np.inf]),
                        x_scale="jac", ftol=_FTOL, xtol=1e-14, gtol=1e-14, max_nfev=_MAX_NFEV)
    if res.status == 0:
        raise FitError("pump curve fit did not converge", res.x)
    dof = max(res.fun.size - 3, 1)
    s2 = 2.0 * res.cost / dof
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac) * s2
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(3, np.inf)
    model = PumpPowerModel(*map(float, res.x), nu=nu)
    return PumpFit(model, dict(zip(("P_th", "eta", "kappa"), map(float, err))), float(2 * res.cost))


def degraded_level(var_in_db, eta):
    """Level in dB after transmission ``eta``."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return 10.0 * math.log10(eta * 10.0 ** (var_in_db / 10.0) + (1.0 - eta))


def efficiency_from_levels(var_in_db, var_out_db):
    """Transmission that degrades ``var_in_db`` to ``var_out_db``."""
    lin_in = 10.0 ** (var_in_db / 10.0) - 1.0
    lin_out = 10.0 ** (var_out_db / 10.0) - 1.0
    if lin_in == 0.0:
        if lin_out == 0.0:
            return 1.0
        raise ValueError("shot-noise input cannot produce a different level")
    eta = lin_out / lin_in
    if eta > 1.0 and eta - 1.0 < 1e-12:
        eta = 1.0
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"levels ({var_in_db} dB, {var_out_db} dB) imply eta = {eta:.4g}")
    return eta


def read_samples_csv(path):
    """Read ``(x, value[, weight])`` columns from a CSV file with a header row.

    Lines starting with ``#`` are skipped.

    Returns:
        ``(x, value, weight)`` arrays; ``weight`` is ``None`` when absent.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    if body.shape[1] < 2:
        raise ValueError(f"{path}: expected at least two columns")
    weight = body[:, 2] if body.shape[1] > 2 else None
    return body[:, 0], body[:, 1], weight
