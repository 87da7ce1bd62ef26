"""Brute-force sampling of the interferometer and replay of the fringe analysis.

Samples are drawn from the input modes and pushed through the interferometer
matrix, so they do not rely on the closed-form output variance. The bit
generator is PCG64; each phase point gets its own seed spawned from the plan
seed with ``SeedSequence``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .gaussian import MEASURED_MODE, VACUUM_VARIANCE, mzi_matrix
from .metrology import RAYLEIGH, fwhm, photon_budget, shot_noise_limit
from .response import (
    InterferometerScenario,
    ResponseCurve,
    expected_pi,
)

CENTRAL_STEP = 15.7e-3
CENTRAL_POINTS = 57
WING_STEP = math.radians(2.0)
WING_POINTS = 40


class ConvergenceError(RuntimeError):
    pass


def _generator(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SampleBatch:
    phi: float
    samples: np.ndarray
    seed: int

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float).reshape(-1)
        if arr.size < 1:
            raise ValueError("a batch needs at least one sample")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self):
        return self.samples.size


def sample_homodyne(s, phi, n, seed):
    """Draw ``n`` phase-quadrature outcomes at the measured output port.

    Both inputs are sampled from their Wigner functions, loss mixes the squeezed
    mode with vacuum before the interferometer, and detector noise is added
    after it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _generator(seed)
    src = s.source
    sd = math.sqrt(VACUUM_VARIANCE)
    z = rng.standard_normal((4, n))
    x1 = s.alpha + sd * z[0]
    p1 = sd * z[1]
    x2 = math.sqrt(src.var_x) * z[2]
    p2 = math.sqrt(src.var_p) * z[3]
    if s.eta is not None and s.eta < 1.0:
        v = sd * rng.standard_normal((2, n))
        x2 = math.sqrt(s.eta) * x2 + math.sqrt(1.0 - s.eta) * v[0]
        p2 = math.sqrt(s.eta) * p2 + math.sqrt(1.0 - s.eta) * v[1]
    row = mzi_matrix(phi)[2 * MEASURED_MODE + 1]
    p_out = row[0] * x1 + row[1] * p1 + row[2] * x2 + row[3] * p2
    if s.noise_w:
        p_out = p_out + s.noise_w * rng.standard_normal(n)
    return SampleBatch(float(phi), p_out, int(seed))


@dataclass(frozen=True)
class PiEstimate:
    mean: float
    std: float
    stderr: float
    std_stderr: float


def estimate_pi(batch, bin):
    """Sample moments of the outcome ``lambda0`` inside the window, 0 outside."""
    lam = 1.0 if bin.is_unbounded else bin.lambda0
    inside = np.abs(batch.samples) <= bin.a
    k, n = int(np.count_nonzero(inside)), batch.n
    q = k / n
    mean = lam * q
    # two-valued outcome: sample moments follow from the hit fraction
    var = lam * lam * q * (1.0 - q) * (n / (n - 1) if n > 1 else 0.0)
    std = math.sqrt(var)
    stderr = std / math.sqrt(n)
    if std > 0 and n > 1:
        mu4 = lam**4 * q * (1 - q) * ((1 - q) ** 3 + q**3)
        std_stderr = math.sqrt(max(mu4 - var * var, 0.0) / n) / (2.0 * std)
    else:
        std_stderr = 0.0
    return PiEstimate(mean, std, stderr, std_stderr)


def _default_grid():
    k = np.arange(CENTRAL_POINTS) - (CENTRAL_POINTS - 1) // 2
    central = CENTRAL_STEP * k
    edge = central[-1]
    wing = edge + WING_STEP * np.arange(1, WING_POINTS // 2 + 1)
    return np.concatenate([-wing[::-1], central, wing])


@dataclass(frozen=True)
class ExperimentPlan:
    """Phase grid, sample count and seed for a replayed measurement.

    The grid is 57 central points at 15.7 mrad plus 40 wing points at 2
    degrees, split evenly on both sides. ``phase_offset`` shifts the true
    phase relative to the recorded axis.
    """

    scenario: InterferometerScenario
    n_samples: int = 1_000_000
    seed: int = 0
    phase_offset: float = 0.0
    grid: np.ndarray = field(default_factory=_default_grid)

    def __post_init__(self):
        g = np.array(self.grid, dtype=float).reshape(-1)
        if g.size < 5 or np.any(np.diff(g) <= 0):
            raise ValueError("plan grid needs at least 5 strictly increasing phases")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    def point_seeds(self):
        children = np.random.SeedSequence(self.seed).spawn(self.grid.size)
        return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def null_phase(phis, values):
    """Phase of the fringe maximum from a parabola through the log of its top half.

    Raises:
        ValueError: If the fringe has no interior maximum.
    """
    phis = np.asarray(phis, dtype=float)
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    if i in (0, phis.size - 1):
        raise ValueError("fringe maximum lies on the edge of the grid")
    floor = values.min()
    height = values[i] - floor
    if height <= 0:
        raise ValueError("flat fringe has no maximum")
    # contiguous run above half height around the peak
    lo = i
    while lo > 0 and values[lo - 1] - floor > 0.5 * height:
        lo -= 1
    hi = i
    while hi < phis.size - 1 and values[hi + 1] - floor > 0.5 * height:
        hi += 1
    lo, hi = max(min(lo, i - 1), 0), min(max(hi, i + 1), phis.size - 1)
    x = phis[lo:hi + 1]
    y = np.log(values[lo:hi + 1] - floor + 1e-3 * height)
    c2, c1, _ = np.polyfit(x - phis[i], y, 2)
    if c2 >= 0:
        raise ValueError("no interior maximum")
    return float(phis[i] - c1 / (2.0 * c2))


def _model(s, phi, alpha, offset, scale):
    return scale * expected_pi(s.replace(alpha=abs(alpha)), phi - offset)


def _fit_fringe(s, phis, means, errs, offset0):
    peak = float(means.max())
    x0 = np.array([s.alpha, offset0, peak])
    errs = np.where(errs > 0, errs, errs[errs > 0].min() if np.any(errs > 0) else 1.0)

    def resid(theta):
        return (_model(s, phis, *theta) - means) / errs

    res = least_squares(resid, x0, x_scale="jac", ftol=1e-10, max_nfev=500)
    if res.status == 0:
        raise ConvergenceError("fringe fit did not converge")
    return res.x


def simulate_experiment(plan):
    """Sample, bin, fit and evaluate the sensitivity at every phase point.

    The phase axis is nulled with the fitted offset. Per point, the sensitivity
    is the sample standard deviation divided by the slope of the fitted
    fringe. ``extras`` also holds a fully numerical variant evaluated at the
    midpoints of neighbouring points, the fitted parameters and the derived
    resolution and sensitivity gains.
    """
    s = plan.scenario
    seeds = plan.point_seeds()
    est = [
        estimate_pi(sample_homodyne(s, phi + plan.phase_offset, plan.n_samples, sd), s.bin)
        for phi, sd in zip(plan.grid, seeds)
    ]
    means = np.array([e.mean for e in est])
    stds = np.array([e.std for e in est])
    errs = np.array([e.stderr for e in est])
    std_errs = np.array([e.std_stderr for e in est])

    try:
        offset0 = null_phase(plan.grid, means)
    except ValueError:
        offset0 = 0.0
    alpha_fit, offset, scale = _fit_fringe(s, plan.grid, means, errs, offset0)
    fitted = s.replace(alpha=abs(alpha_fit))
    phis = plan.grid - offset

    h = 1e-6
    slope = scale * (expected_pi(fitted, phis + h) - expected_pi(fitted, phis - h)) / (2 * h)
    # points where every sample landed on one side carry no phase information
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where((slope != 0) & (stds > 0), stds / np.abs(slope), np.inf)

    mid = 0.5 * (phis[1:] + phis[:-1])
    num_slope = np.diff(means) / np.diff(phis)
    std_mid = 0.5 * (stds[1:] + stds[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_num = np.where((num_slope != 0) & (std_mid > 0), std_mid / np.abs(num_slope), np.inf)

    budget = photon_budget(s.alpha, s.source)
    snl = shot_noise_limit(budget)
    positive = phis > 0
    best = float(np.min(sigma[positive])) if np.any(positive) else float(np.min(sigma))
    extras = {
        "pi_stderr": errs,
        "std_stderr": std_errs,
        "fit": {"alpha": float(abs(alpha_fit)), "offset": float(offset), "scale": float(scale)},
        "phi_mid": mid,
        "sigma_numerical": sigma_num,
        "improvement": RAYLEIGH / fwhm(fitted),
        "snl_ratio": snl / best,
        "seeds": seeds,
    }
    return ResponseCurve(phis, means, stds, sigma, "monte-carlo", s, extras)


def write_batches(path, scenario, batches):
    """Store batches as ``.npz`` or long-format CSV with a JSON scenario header."""
    path = str(path)
    meta = json.dumps(scenario.to_dict(), sort_keys=True)
    if path.endswith(".npz"):
        np.savez(
            path,
            scenario=np.array(meta),
            phi=np.array([b.phi for b in batches]),
            seed=np.array([b.seed for b in batches], dtype=np.uint64),
            samples=np.array([b.samples for b in batches]),
        )
        return
    with open(path, "w", newline="") as fh:
        fh.write(f"# scenario: {meta}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi", "seed", "value"])
        for b in batches:
            for v in b.samples:
                w.writerow([repr(b.phi), b.seed, repr(float(v))])


def read_batches(path):
    """Inverse of :func:`write_batches`; returns ``(scenario, batches)``."""
    path = str(path)
    if path.endswith(".npz"):
        with np.load(path) as z:
            meta = json.loads(str(z["scenario"]))
            batches = [SampleBatch(float(p), smp, int(sd))
                       for p, sd, smp in zip(z["phi"], z["seed"], z["samples"])]
        return _scenario_from_dict(meta), batches
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# scenario: "):
            raise ValueError(f"{path}: missing scenario header")
        meta = json.loads(first[len("# scenario: "):])
        reader = csv.DictReader(fh)
        groups = {}
        for row in reader:
            key = (float(row["phi"]), int(row["seed"]))
            groups.setdefault(key, []).append(float(row["value"]))
    batches = [SampleBatch(phi, vals, seed) for (phi, seed), vals in groups.items()]
    return _scenario_from_dict(meta), batches


def _scenario_from_dict(d):
    return InterferometerScenario.make(
        d["alpha"], d["varsigma"], d["purity"], d["a"], d.get("eta"), d.get("noise_w")
    )
