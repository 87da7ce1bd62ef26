"""Gaussian states as (mean, covariance) pairs and the interferometer transforms.

Quadratures are ordered ``(x1, p1, x2, p2, ...)`` and normalised so that the
vacuum covariance is ``I / 4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

VACUUM_VARIANCE = 0.25

# Output port whose phase quadrature carries the windowed signal. With the
# interferometer matrix below it is the second mode: at phi = 0 the matrix is
# the identity and the squeezed vacuum leaves through its own port.
MEASURED_MODE = 1

_SYM_TOL = 1e-12
_HEISENBERG_TOL = 1e-12
_SYMPLECTIC_TOL = 1e-10


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def symplectic_form(n_modes):
    """Block-diagonal symplectic form for ``n_modes`` in xpxp ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size % 2 or cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"inconsistent shapes: mean {mean.shape}, cov {cov.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("state contains non-finite entries")
        if np.max(np.abs(cov - cov.T), initial=0.0) > _SYM_TOL * max(1.0, np.abs(cov).max()):
            raise ValueError("covariance is not symmetric")
        # exact symmetry after the tolerance check
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance is not positive definite")
        for k in range(mean.size // 2):
            block = cov[2 * k:2 * k + 2, 2 * k:2 * k + 2]
            if np.linalg.det(block) < VACUUM_VARIANCE**2 - _HEISENBERG_TOL:
                raise ValueError(f"mode {k} violates the uncertainty bound")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @property
    def n_modes(self):
        return self.mean.size // 2


@dataclass(frozen=True)
class SqueezedSource:
    """Impure squeezed vacuum described by ``varsigma = exp(-r)`` and purity.

    Any purity in (0, 1] is a physical state. Freshly generated sources usually
    sit in ``[varsigma, 1]``; see :attr:`in_source_domain`. Lossy sources can
    leave that range, so it is not enforced.
    """

    varsigma: float
    purity: float = 1.0

    def __post_init__(self):
        s, p = float(self.varsigma), float(self.purity)
        if not (math.isfinite(s) and 0.0 < s <= 1.0):
            raise ValueError(f"varsigma must lie in (0, 1], got {self.varsigma}")
        if not (math.isfinite(p) and 0.0 < p <= 1.0):
            raise ValueError(f"purity must lie in (0, 1], got {self.purity}")
        object.__setattr__(self, "varsigma", s)
        object.__setattr__(self, "purity", p)

    @classmethod
    def from_r(cls, r, purity=1.0):
        if r < 0:
            raise ValueError("squeezing parameter r must be >= 0")
        return cls(math.exp(-r), purity)

    @property
    def r(self):
        return -math.log(self.varsigma)

    @property
    def in_source_domain(self):
        return self.varsigma <= self.purity

    @property
    def var_x(self):
        """Anti-squeezed (amplitude) variance."""
        return 1.0 / (4.0 * self.varsigma**2 * self.purity**2)

    @property
    def var_p(self):
        """Squeezed (phase) variance."""
        return self.varsigma**2 / 4.0


@dataclass(frozen=True)
class SymplecticTransform:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError(f"expected a square 2n x 2n matrix, got {m.shape}")
        omega = symplectic_form(m.shape[0] // 2)
        if np.max(np.abs(m.T @ omega @ m - omega)) > _SYMPLECTIC_TOL:
            raise ValueError("matrix does not preserve the symplectic form")
        object.__setattr__(self, "matrix", _frozen(m))


def make_coherent(alpha):
    """Coherent state with real amplitude ``alpha`` displaced along x."""
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
    return GaussianState([alpha, 0.0], VACUUM_VARIANCE * np.eye(2))


def make_squeezed_vacuum(src):
    """Phase-squeezed vacuum: squeezed p, anti-squeezed x."""
    if not isinstance(src, SqueezedSource):
        raise TypeError("expected a SqueezedSource")
    return GaussianState([0.0, 0.0], np.diag([src.var_x, src.var_p]))


def tensor(a, b):
    n, m = a.cov.shape[0], b.cov.shape[0]
    cov = np.zeros((n + m, n + m))
    cov[:n, :n] = a.cov
    cov[n:, n:] = b.cov
    return GaussianState(np.concatenate([a.mean, b.mean]), cov)


def mzi_matrix(phi):
    """Beam splitter, phase shift, beam splitter as one 4x4 quadrature map.

    Accepts a scalar or an array of phases; an array yields a stack of
    matrices with shape ``phi.shape + (4, 4)``.
    """
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    rows = [
        [c + 1, s, c - 1, s],
        [-s, c + 1, -s, c - 1],
        [c - 1, s, c + 1, s],
        [-s, c - 1, -s, c + 1],
    ]
    return 0.5 * np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def mzi_transform(phi):
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError("phase must be finite")
    return SymplecticTransform(mzi_matrix(phi))


def apply(transform, state):
    S = transform.matrix
    if S.shape[0] != state.mean.size:
        raise ValueError(
            f"transform acts on {S.shape[0] // 2} modes, state has {state.n_modes}"
        )
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def _check_mode(state, mode):
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < state.n_modes:
        raise IndexError(f"mode {mode} out of range for {state.n_modes}-mode state")


def partial_trace(state, keep):
    """Reduced single-mode state of mode ``keep`` (zero-based)."""
    if state.n_modes < 2:
        raise ValueError("partial trace needs at least two modes")
    _check_mode(state, keep)
    sl = slice(2 * keep, 2 * keep + 2)
    return GaussianState(state.mean[sl], state.cov[sl, sl])


def marginal_p(state, mode=0):
    """Mean and variance of the phase quadrature of ``mode``."""
    _check_mode(state, mode)
    i = 2 * mode + 1
    return float(state.mean[i]), float(state.cov[i, i])


def symplectic_eigenvalues(cov):
    """Symplectic spectrum, i.e. moduli of the eigenvalues of ``i Omega cov``."""
    cov = np.asarray(cov, dtype=float)
    omega = symplectic_form(cov.shape[0] // 2)
    ev = np.abs(np.linalg.eigvals(1j * omega @ cov))
    return np.sort(ev)[::2]


def interferometer_output(alpha, src, phi):
    """Two-mode state after the interferometer for coherent x squeezed input."""
    state = tensor(make_coherent(alpha), make_squeezed_vacuum(src))
    return apply(mzi_transform(phi), state)
