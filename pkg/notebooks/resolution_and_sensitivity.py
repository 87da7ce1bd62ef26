# coding: utf-8

# # Resolution and sensitivity of a windowed homodyne readout
#
# A coherent beam and a squeezed vacuum enter a Mach-Zehnder interferometer.
# One output port is measured with homodyne detection, and every outcome is
# reduced to a single bit: did the phase quadrature land inside `|p| <= a`?
# This notebook walks through what that bit buys.

import math

import numpy as np

from mzwindow import (
    RAYLEIGH,
    InterferometerScenario,
    best_sensitivity,
    expected_pi,
    fwhm,
    optimize_bin,
    photon_budget,
    sensitivity,
    shot_noise_limit,
)

# ## The fringe
#
# The scenario below uses 427 coherent photons and a source with
# `varsigma = 0.47` and purity `0.58`. The fringe is normalised to 1 at the
# dark point.

s = InterferometerScenario.make(math.sqrt(427), varsigma=0.47, purity=0.58, a=0.5)
phis = np.linspace(-0.2, 0.2, 9)
for phi, v in zip(phis, expected_pi(s, phis)):
    print(f"phi {phi:+.3f}  <Pi> {v:.4f}")

# The central peak is far narrower than an ordinary interference fringe.
# The usual reference is a width of `2 pi / 3`.

width = fwhm(s)
print(f"FWHM {width:.4f} rad, {RAYLEIGH / width:.1f} times narrower than 2 pi / 3")

# ## Sensitivity against the shot-noise limit
#
# The shot-noise limit counts every photon that enters, squeezed ones included.

budget = photon_budget(s.alpha, s.source)
snl = shot_noise_limit(budget)
sigma, phi_best = best_sensitivity(s)
print(f"N = {budget.n_total:.1f}, SNL = {snl:.4f}")
print(f"best sigma {sigma:.4f} at phi = {phi_best * 1e3:.1f} mrad, gain {snl / sigma:.2f}")

# The sensitivity diverges at the peak, where the fringe is flat, and is best
# on its flank.

for phi in (1e-3, 0.01, phi_best, 0.05, 0.1):
    print(f"phi {phi:.4f}  sigma {sensitivity(s, phi):.4g}")

# ## Choosing the window
#
# Narrow windows sharpen the fringe but throw away counts. The optimum window
# width balances the two.

a_opt, sigma_opt = optimize_bin(s.alpha, s.source)
print(f"a_opt = {a_opt:.3f}, sigma = {sigma_opt:.4f}")
for a in (0.1, 0.25, 0.5, 1.0, 2.0):
    trial = s.replace(bin=a)
    print(f"a {a:4.2f}  FWHM {fwhm(trial):.4f}  sigma {best_sensitivity(trial)[0]:.4f}")
