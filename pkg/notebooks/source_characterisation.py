# coding: utf-8

# # Characterising the squeezed source
#
# Two traces pin the source down. A sweep of the local-oscillator phase gives
# the squeezed and anti-squeezed variances. A sweep of pump power gives the
# threshold, the detection efficiency and the cavity bandwidth.

import numpy as np

from mzwindow import (
    PiezoSweepModel,
    PumpPowerModel,
    SqueezedSource,
    db_levels,
    efficiency_from_levels,
    fit_pump_curve,
    fit_tomography,
    pump_variance,
)

# ## Phase sweep
#
# The piezo that scans the phase is not linear. The model splits the sweep
# into three segments, each with its own quadratic map to optical phase.

truth = PiezoSweepModel(1.0, 2.0, ((0.1, 1.0, 0.1), (4.0, -1.5, 0.05), (0.3, 1.2, -0.02)),
                        SqueezedSource(0.47, 0.58))
rng = np.random.default_rng(0)
phi = np.linspace(0, 3, 150)
trace = truth.variance(phi) * (1 + 0.01 * rng.standard_normal(phi.size))

fit = fit_tomography(np.column_stack([phi, trace]))
sq, asq = db_levels(fit.source)
print(f"varsigma {fit.source.varsigma:.4f}, purity {fit.source.purity:.4f}")
print(f"{sq:.2f} dB squeezing, {asq:+.2f} dB anti-squeezing")
print(f"segment boundaries {fit.piezo.phi1:.3f}, {fit.piezo.phi2:.3f}")

# ## Pump power
#
# Levels are in dB relative to shot noise. Both branches are fitted together.

model = PumpPowerModel(113.73, 0.9423, 519.61, nu=5.0)
p = np.linspace(5, 100, 12)
pts = np.column_stack([p, 10 * np.log10(pump_variance(p, model)),
                       10 * np.log10(pump_variance(p, model, antisqueezing=True))])
pts[:, 1:] += 0.05 * rng.standard_normal((p.size, 2))
pump = fit_pump_curve(pts)
for row in pump.report():
    print(f"{row['parameter']:6s} {row['estimate']:10.4f} +- {row['stderr']:.4f}")

# ## Efficiency from two levels
#
# If the level measured at the source is known, the level seen downstream
# fixes the transmission in between.

print(f"eta = {efficiency_from_levels(-9.5, -6.5):.3f}")
