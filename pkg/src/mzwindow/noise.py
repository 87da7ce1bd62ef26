"""Propagation loss and post-interferometer detector noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import VACUUM_VARIANCE, SqueezedSource


@dataclass(frozen=True)
class LossChannel:
    eta: float

    def __post_init__(self):
        if not (math.isfinite(self.eta) and 0.0 < self.eta <= 1.0):
            raise ValueError(f"efficiency must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class DetectorNoise:
    """Gaussian excess noise with standard deviation ``w`` per quadrature."""

    w: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.w) and self.w >= 0.0):
            raise ValueError(f"noise width must be finite and >= 0, got {self.w}")


def loss_cov(cov, eta):
    """Beam-splitter loss on a covariance matrix: ``eta V + (1 - eta) I/4``."""
    LossChannel(eta)
    cov = np.asarray(cov, dtype=float)
    return eta * cov + (1.0 - eta) * VACUUM_VARIANCE * np.eye(cov.shape[0])


def apply_loss(src, eta):
    """Squeezed source after transmission ``eta``.

    Works on the diagonal covariance and re-extracts ``(varsigma, purity)``, so
    impure inputs are handled too. For a pure input this is the closed-form
    mapping ``varsigma' = sqrt(eta (varsigma^2 - 1) + 1)`` and
    ``purity' = varsigma / sqrt((varsigma^2 + eta - eta varsigma^2) varsigma'^2)``.
    """
    LossChannel(eta)
    var_x = eta * src.var_x + (1.0 - eta) * VACUUM_VARIANCE
    var_p = eta * src.var_p + (1.0 - eta) * VACUUM_VARIANCE
    s = 2.0 * math.sqrt(var_p)
    p = 1.0 / (2.0 * s * math.sqrt(var_x))
    # rounding can push a pure state a hair above 1
    return SqueezedSource(min(s, 1.0), min(p, 1.0))


def pure_loss_mapping(varsigma, eta):
    """Printed closed form of the loss remap for a pure source."""
    s2 = varsigma * varsigma
    new_s = math.sqrt(eta * (s2 - 1.0) + 1.0)
    new_p = varsigma / math.sqrt((-eta * s2 + eta + s2) * (eta * (s2 - 1.0) + 1.0))
    return new_s, new_p


def apply_detector_noise(marginal_var, noise):
    """Variance of a quadrature marginal after convolution with the noise."""
    if marginal_var <= 0:
        raise ValueError("marginal variance must be positive")
    if not isinstance(noise, DetectorNoise):
        noise = DetectorNoise(noise)
    return marginal_var + noise.w**2
