"""Closed-form fringe response and phase sensitivity of the windowed readout.

The measured output quadrature is Gaussian with mean ``(alpha/2) sin(phi)`` and
variance ``c1(phi)/4``. The readout keeps outcomes with ``|p| <= a``. Two
normalisations are in play:

* the operator eigenvalue ``lambda0 = 1/erf(sqrt(2) a)``, which makes the vacuum
  expectation equal to one. :func:`operator_moments` and the Monte Carlo
  estimator use it;
* the peak normalisation ``1/P0(0)``, which makes the fringe equal to one at
  ``phi = 0`` for any input. :func:`expected_pi`, :func:`delta_pi` and
  :class:`ResponseCurve` use it.

They agree for ``varsigma = 1``. The sensitivity does not depend on the choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf, ndtr

from .gaussian import SqueezedSource
from .noise import DetectorNoise, LossChannel, apply_loss


@dataclass(frozen=True)
class BinningOperator:
    """Dichotomic window ``|p| <= a`` with eigenvalues ``lambda0`` and 0.

    ``a = 0`` is the ideal projector onto ``p = 0`` and ``a = inf`` accepts
    every outcome.
    """

    a: float

    def __post_init__(self):
        a = float(self.a)
        if math.isnan(a) or a < 0:
            raise ValueError(f"bin half-width must be >= 0, got {self.a}")
        object.__setattr__(self, "a", a)

    @classmethod
    def ideal(cls):
        return cls(0.0)

    @classmethod
    def unbounded(cls):
        return cls(math.inf)

    @property
    def is_ideal(self):
        return self.a == 0.0

    @property
    def is_unbounded(self):
        return math.isinf(self.a)

    @property
    def lambda0(self):
        if self.is_ideal:
            return math.inf
        return 1.0 / math.erf(math.sqrt(2.0) * self.a)

    @property
    def lambda1(self):
        return 0.0


@dataclass(frozen=True)
class InterferometerScenario:
    alpha: float
    source: SqueezedSource
    bin: BinningOperator
    eta: float | None = None
    noise_w: float | None = None

    def __post_init__(self):
        alpha = float(self.alpha)
        if not math.isfinite(alpha) or alpha < 0:
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")
        object.__setattr__(self, "alpha", alpha)
        if not isinstance(self.bin, BinningOperator):
            object.__setattr__(self, "bin", BinningOperator(self.bin))
        if self.eta is not None:
            LossChannel(self.eta)
        if self.noise_w is not None:
            DetectorNoise(self.noise_w)

    @classmethod
    def make(cls, alpha, varsigma=1.0, purity=1.0, a=0.5, eta=None, noise_w=None):
        return cls(alpha, SqueezedSource(varsigma, purity), BinningOperator(a), eta, noise_w)

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def effective_source(self):
        """Source after propagation loss, if any."""
        if self.eta is None or self.eta == 1.0:
            return self.source
        return apply_loss(self.source, self.eta)

    @property
    def noise_var(self):
        return 0.0 if self.noise_w is None else self.noise_w**2

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "varsigma": self.source.varsigma,
            "purity": self.source.purity,
            "a": self.bin.a,
            "eta": self.eta,
            "noise_w": self.noise_w,
        }


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def c1(phi, src):
    """Four times the variance of the measured phase quadrature."""
    c = np.cos(phi)
    ps2 = (src.purity * src.varsigma) ** 2
    return (ps2 * (src.varsigma**2 * (c + 1) ** 2 + 2 * (1 - c)) - c * c + 1) / (4 * ps2)


def c1_prime(phi, src):
    """Analytic derivative of :func:`c1` with respect to the phase."""
    c, s = np.cos(phi), np.sin(phi)
    ps2 = (src.purity * src.varsigma) ** 2
    return (2 * s * ps2 * (1 - src.varsigma**2 * (c + 1)) + 2 * c * s) / (4 * ps2)


def effective_c1(s, phi):
    """``c1`` for the lossy source, inflated by detector noise (``+ 4 w^2``)."""
    return c1(phi, s.effective_source) + 4.0 * s.noise_var


def quadrature_mean(alpha, phi):
    return 0.5 * alpha * np.sin(phi)


def _bin_probs(s, phi):
    """``(P0, 1 - P0)`` computed without cancellation in either tail."""
    phi = np.asarray(phi, dtype=float)
    a = s.bin.a
    if s.bin.is_unbounded:
        return np.ones_like(phi), np.zeros_like(phi)
    m = np.abs(quadrature_mean(s.alpha, phi))
    sd = 0.5 * np.sqrt(effective_c1(s, phi))
    p_in = ndtr((a - m) / sd) - ndtr((-a - m) / sd)
    p_out = ndtr((m - a) / sd) + ndtr((-a - m) / sd)
    return p_in, p_out


def bin_probability(s, phi):
    """Probability ``P0`` that the measured quadrature lands inside the window."""
    return _out(_bin_probs(s, phi)[0])


def _peak_norm(s):
    """``1 / P0(0)``; the window at the peak sees the squeezed marginal."""
    if s.bin.is_unbounded:
        return 1.0
    return 1.0 / math.erf(math.sqrt(2.0 / float(effective_c1(s, 0.0))) * s.bin.a)


def expected_pi(s, phi):
    """Peak-normalised fringe ``<Pi>(phi)``; equals 1 at ``phi = 0``."""
    if s.bin.is_ideal:
        raise ValueError("a = 0 is the ideal projector; use expected_pi_ideal")
    cc = effective_c1(s, phi)
    if np.any(cc <= 0):
        raise ArithmeticError("non-positive quadrature variance")
    if s.bin.is_unbounded:
        return _out(np.ones_like(np.asarray(phi, dtype=float)))
    a = s.bin.a
    mu = quadrature_mean(s.alpha, phi)
    root = np.sqrt(2.0 / cc)
    return _out(0.5 * _peak_norm(s) * (erf(root * (a - mu)) + erf(root * (a + mu))))


def expected_pi_ideal(alpha, varsigma, phi):
    """Fringe for the projector onto ``p = 0`` and a pure squeezed input."""
    if not 0 < varsigma <= 1:
        raise ValueError(f"varsigma must lie in (0, 1], got {varsigma}")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    c = np.cos(phi)
    s2 = varsigma**2
    den = (s2 * s2 - 1) * c * c + 2 * (s2 - 1) * s2 * c + (s2 + 1) ** 2
    return _out(2 * s2 * np.exp(-2 * s2 * alpha**2 * np.sin(phi) ** 2 / den) / np.sqrt(den))


def delta_pi(s, phi):
    """Standard deviation of the readout in the peak normalisation."""
    if s.bin.is_ideal:
        raise ValueError("a = 0 has unbounded eigenvalue")
    p_in, p_out = _bin_probs(s, phi)
    return _out(_peak_norm(s) * np.sqrt(p_in * p_out))


def operator_moments(s, phi):
    """Mean and standard deviation of the outcome with eigenvalues ``(lambda0, 0)``.

    The standard deviation is ``lambda0 sqrt(P0 (1 - P0))``; the mean is
    ``lambda0 P0``.
    """
    lam = s.bin.lambda0
    p_in, p_out = _bin_probs(s, phi)
    return _out(lam * p_in), _out(lam * np.sqrt(p_in * p_out))


def sensitivity(s, phi):
    """Phase uncertainty from error propagation of the windowed readout.

    Closed form in ``c1``, its derivative and ``c_pm = a +- (alpha/2) sin phi``.
    Returns ``inf`` where the fringe slope vanishes.
    """
    phi = np.asarray(phi, dtype=float)
    if s.bin.is_ideal:
        raise ValueError("a = 0 is not a realisable window")
    if s.bin.is_unbounded or s.alpha == 0:
        return _out(np.full(phi.shape, np.inf))
    src = s.effective_source
    a, alpha = s.bin.a, s.alpha
    cc = effective_c1(s, phi)
    dc = c1_prime(phi, src)
    c_minus = a - 0.5 * alpha * np.sin(phi)
    c_plus = a + 0.5 * alpha * np.sin(phi)
    p_in, p_out = _bin_probs(s, phi)
    # c2 = 2 P0 and 2 - c2 = 2 (1 - P0), both taken from the tail-safe pair
    numerator = cc**1.5 * np.sqrt(4.0 * p_out * p_in * np.pi / 2.0)
    cos = np.cos(phi)
    with np.errstate(over="ignore", under="ignore"):
        denominator = (
            np.exp(-2 * c_minus**2 / cc) * (dc * c_minus + alpha * cc * cos)
            + np.exp(-2 * c_plus**2 / cc) * (dc * c_plus - alpha * cc * cos)
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.abs(numerator / denominator)
    # a certain outcome (P0 rounded to 0 or 1) carries no phase information
    ok = np.isfinite(sigma) & (denominator != 0) & (p_in * p_out > 0)
    sigma = np.where(ok, sigma, np.inf)
    return _out(sigma)


def sensitivity_unwindowed(s, phi):
    """Error propagation on the raw quadrature mean (no window)."""
    phi = np.asarray(phi, dtype=float)
    if s.alpha == 0:
        return _out(np.full(phi.shape, np.inf))
    with np.errstate(divide="ignore"):
        return _out(np.sqrt(effective_c1(s, phi)) / (s.alpha * np.abs(np.cos(phi))))


@dataclass
class ResponseCurve:
    phis: np.ndarray
    pi_mean: np.ndarray
    pi_std: np.ndarray
    sigma: np.ndarray
    provenance: str
    scenario: InterferometerScenario
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phis = np.asarray(self.phis, dtype=float)
        self.pi_mean = np.asarray(self.pi_mean, dtype=float)
        self.pi_std = np.asarray(self.pi_std, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.provenance not in ("closed-form", "monte-carlo"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        n = self.phis.size
        if n == 0:
            raise ValueError("empty phase grid")
        if any(arr.shape != (n,) for arr in (self.pi_mean, self.pi_std, self.sigma)):
            raise ValueError("curve arrays must match the phase grid")
        if np.any(np.diff(self.phis) <= 0):
            raise ValueError("phase grid must be strictly increasing")
        if np.any(self.pi_std < 0):
            raise ValueError("negative standard deviation")

    def __len__(self):
        return self.phis.size


def response_curve(s, grid):
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be nonempty and strictly increasing")
    return ResponseCurve(
        phis=grid,
        pi_mean=np.atleast_1d(expected_pi(s, grid)),
        pi_std=np.atleast_1d(delta_pi(s, grid)),
        sigma=np.atleast_1d(sensitivity(s, grid)),
        provenance="closed-form",
        scenario=s,
    )
