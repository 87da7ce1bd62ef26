"""Command-line entry point.

Every command writes a CSV table with ``#`` metadata lines holding the resolved
configuration, a JSON sidecar and a small matplotlib script that plots the CSV.
Angles in files are radians; angle flags accept ``deg``, ``mrad`` or ``rad``
suffixes. Output goes to ``--out``, else ``$MZWINDOW_OUT``, else the current
directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .gaussian import SqueezedSource
from .intensity import (
    NOISE_CANDIDATES,
    SCHEMES,
    caves_sensitivity,
    calibrate_noise_width,
    degradation_table,
    photon_number_fringe,
)
from .metrology import (
    FlatResponseError,
    best_sensitivity,
    fwhm,
    optimize_bin,
    photon_budget,
    resolution_improvement,
    scaling_fit,
    shot_noise_limit,
    ultimate_sensitivity,
)
from .montecarlo import ConvergenceError, ExperimentPlan, estimate_pi, sample_homodyne, simulate_experiment
from .response import (
    InterferometerScenario,
    delta_pi,
    expected_pi,
    sensitivity,
)
from .tomography import FitError, fit_pump_curve, fit_tomography, pump_variance, read_samples_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4
OUT_ENV = "MZWINDOW_OUT"

_ANGLE_UNITS = {"deg": math.pi / 180.0, "mrad": 1e-3, "rad": 1.0}


class ConfigError(ValueError):
    pass


def parse_angle(text):
    """Parse ``0.1``, ``0.1rad``, ``15.7mrad`` or ``5deg`` into radians."""
    text = str(text).strip()
    for unit in ("mrad", "deg", "rad"):
        if text.endswith(unit):
            return float(text[: -len(unit)]) * _ANGLE_UNITS[unit]
    return float(text)


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


class Output:
    """Writes tables, sidecars and plot scripts under one directory."""

    def __init__(self, directory, config, fmt="csv"):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.fmt = fmt
        self.written = []

    def table(self, stem, columns, data, summary=None, plot=None):
        data = [np.asarray(col) for col in data]
        meta = json.dumps(self.config, sort_keys=True)
        if self.fmt == "json":
            path = self.dir / f"{stem}.json"
            payload = {"config": self.config, "columns": {
                name: [_jsonable(v) for v in col] for name, col in zip(columns, data)}}
            path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        else:
            path = self.dir / f"{stem}.csv"
            lines = [f"# config: {meta}"]
            if summary:
                lines.append(f"# summary: {json.dumps(_jsonable(summary), sort_keys=True)}")
            lines.append(",".join(columns))
            for row in zip(*data):
                lines.append(",".join(_fmt(v) for v in row))
            path.write_text("\n".join(lines) + "\n")
        self.written.append(path)
        sidecar = self.dir / f"{stem}.meta.json"
        sidecar.write_text(json.dumps(
            {"config": self.config, "summary": _jsonable(summary or {}), "table": path.name,
             "columns": list(columns)},
            indent=2, sort_keys=True) + "\n")
        if plot is not None and self.fmt == "csv":
            x, ys = plot
            script = self.dir / f"{stem}_plot.py"
            script.write_text(_plot_script(path.name, x, ys))
        return path

    def json(self, stem, payload):
        path = self.dir / f"{stem}.json"
        path.write_text(json.dumps(_jsonable({"config": self.config, **payload}),
                                   indent=2, sort_keys=True) + "\n")
        self.written.append(path)
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _plot_script(csv_name, x, ys):
    cols = ", ".join(repr(y) for y in ys)
    return f'''"""Plot {csv_name}. Run from the directory that holds the CSV."""
import matplotlib.pyplot as plt
import numpy as np

data = np.genfromtxt({csv_name!r}, delimiter=",", names=True, comments="#")
fig, ax = plt.subplots()
for name in [{cols}]:
    ax.plot(data[{x!r}], data[name], label=name)
ax.set_xlabel({x!r})
ax.legend()
fig.savefig({csv_name.rsplit(".", 1)[0] + ".png"!r}, dpi=150)
'''


def _scenario_args(p, bin_default=0.5):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, help="coherent amplitude")
    g.add_argument("--alpha2", type=float, help="coherent photon number |alpha|^2")
    p.add_argument("--varsigma", type=float, default=0.47)
    p.add_argument("--purity", type=float, default=0.58)
    p.add_argument("--bin", type=float, default=bin_default, help="window half-width a")
    p.add_argument("--eta", type=float, default=None, help="propagation efficiency")
    p.add_argument("--noise-w", type=float, default=None, help="detector noise width")


def _common_args(p):
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--config", default=None, help="TOML file with option values")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _alpha(args, default=None):
    if args.alpha is not None:
        return args.alpha
    if args.alpha2 is not None:
        if args.alpha2 < 0:
            raise ValueError("alpha2 must be >= 0")
        return math.sqrt(args.alpha2)
    if default is None:
        raise ValueError("one of --alpha or --alpha2 is required")
    return default


def _scenario(args, default_alpha=None):
    return InterferometerScenario.make(
        _alpha(args, default_alpha), args.varsigma, args.purity, args.bin, args.eta, args.noise_w
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="mzwindow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("response", help="fringe and sensitivity table")
    _scenario_args(p)
    _common_args(p)
    p.add_argument("--phi-min", type=parse_angle, default=-0.5)
    p.add_argument("--phi-max", type=parse_angle, default=0.5)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--mc", action="store_true", help="add Monte Carlo estimates")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_response)

    p = sub.add_parser("map", help="resolution and sensitivity maps over (a, varsigma)")
    _common_args(p)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--purities", type=_float_list, default=[1.0, 0.5])
    p.add_argument("--a-min", type=float, default=0.05)
    p.add_argument("--a-max", type=float, default=3.0)
    p.add_argument("--na", type=int, default=20)
    p.add_argument("--varsigma-min", type=float, default=0.1)
    p.add_argument("--varsigma-max", type=float, default=1.0)
    p.add_argument("--ns", type=int, default=20)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("scaling", help="figures of merit versus photon number")
    _common_args(p)
    p.add_argument("--alpha2s", type=_float_list, default=list(np.geomspace(30, 430, 7)))
    p.add_argument("--varsigma", type=float, default=0.47)
    p.add_argument("--purity", type=float, default=0.58)
    p.add_argument("--bin", type=float, default=0.5)
    p.add_argument("--ultimate", action="store_true", help="also run the optimised sweep")
    p.add_argument("--ultimate-alphas", type=_float_list, default=[10, 18, 32, 56, 100])
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("noise-study", help="detector-noise degradation table")
    _common_args(p)
    p.add_argument("--alphas", type=_float_list, default=[5.0, 20.0])
    p.add_argument("--w", type=float, default=None, help="noise width; calibrated if omitted")
    p.add_argument("--target", type=float, default=2.3, help="calibration target ratio")
    p.add_argument("--bin", type=float, default=0.5)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_noise_study)

    p = sub.add_parser("loss-map", help="sensitivity gain over (eta, alpha)")
    _common_args(p)
    p.add_argument("--varsigma", type=float, default=0.47)
    p.add_argument("--bin", type=float, default=0.5)
    p.add_argument("--etas", type=_float_list, default=list(np.round(np.linspace(0.1, 1.0, 19), 6)))
    p.add_argument("--alphas", type=_float_list, default=[5.0, 10.0, 20.0, 50.0])
    p.set_defaults(func=cmd_loss_map)

    p = sub.add_parser("tomography", help="fit a source characterisation trace")
    _common_args(p)
    p.add_argument("--input", default=None, help="CSV with a header row")
    p.add_argument("--kind", choices=("phase", "pump"), default="phase")
    p.add_argument("--nu", type=float, default=5.0, help="sideband frequency in MHz")
    p.set_defaults(func=cmd_tomography)

    p = sub.add_parser("simulate", help="Monte Carlo replay of a fringe measurement")
    _scenario_args(p)
    _common_args(p)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--offset", type=parse_angle, default=0.0, help="true phase offset")
    p.set_defaults(func=cmd_simulate)
    return parser


def _out_dir(args):
    return args.out or os.environ.get(OUT_ENV) or "."


def _resolved(args):
    skip = {"func", "config", "out", "format"}
    return {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_response(args, out):
    s = _scenario(args)
    if args.points < 1:
        raise ValueError("--points must be >= 1")
    grid = np.linspace(args.phi_min, args.phi_max, args.points)
    if args.points > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("--phi-max must exceed --phi-min")
    mean = np.atleast_1d(expected_pi(s, grid))
    std = np.atleast_1d(delta_pi(s, grid))
    sig = np.atleast_1d(sensitivity(s, grid))
    if np.ptp(mean) < 1e-12:
        print("mzwindow: warning: flat response, the fringe does not depend on the phase",
              file=sys.stderr)
    cols = ["phi", "pi_mean", "pi_std", "sigma"]
    data = [grid, mean, std, sig]
    if args.mc:
        seeds = np.random.SeedSequence(args.seed).spawn(grid.size)
        est = [estimate_pi(sample_homodyne(s, phi, args.samples,
                                           int(sd.generate_state(1, np.uint64)[0])), s.bin)
               for phi, sd in zip(grid, seeds)]
        cols += ["mc_mean", "mc_std", "mc_stderr", "provenance"]
        data += [[e.mean for e in est], [e.std for e in est], [e.stderr for e in est],
                 ["monte-carlo"] * grid.size]
    out.table("response", cols, data, plot=("phi", ["pi_mean"]))


def cmd_map(args, out):
    a_grid = np.geomspace(args.a_min, args.a_max, args.na)
    s_grid = np.linspace(args.varsigma_min, args.varsigma_max, args.ns)
    if args.na < 1 or args.ns < 1:
        raise ValueError("grid sizes must be >= 1")
    summary = {}
    for purity in args.purities:
        imp = np.full((args.ns, args.na), np.nan)
        ratio_db = np.full((args.ns, args.na), np.nan)
        for i, vs in enumerate(s_grid):
            for j, a in enumerate(a_grid):
                s = InterferometerScenario.make(args.alpha, vs, purity, a)
                try:
                    imp[i, j] = resolution_improvement(s)
                except FlatResponseError:
                    pass
                snl = shot_noise_limit(photon_budget(args.alpha, s.source))
                ratio_db[i, j] = 10.0 * math.log10(best_sensitivity(s)[0] / snl)
        tag = f"p{purity:g}"
        A, S = np.meshgrid(a_grid, s_grid)
        out.table(f"map_{tag}", ["a", "varsigma", "improvement", "sigma_over_snl_db"],
                  [A.ravel(), S.ravel(), imp.ravel(), ratio_db.ravel()])
        lines = zero_contour(a_grid, s_grid, ratio_db)
        ids = np.concatenate([[k] * len(line) for k, line in enumerate(lines)]) if lines else []
        pts = np.concatenate(lines) if lines else np.empty((0, 2))
        out.table(f"map_{tag}_threshold", ["line", "a", "varsigma"],
                  [ids, pts[:, 0], pts[:, 1]])
        summary[tag] = {"super_sensitive_cells": int(np.sum(ratio_db < 0)),
                        "best_ratio_db": float(np.nanmin(ratio_db))}
    out.json("map_summary", {"summary": summary})


def zero_contour(x, y, z):
    """Polylines where ``z`` crosses zero on the ``(x, y)`` grid."""
    if len(x) < 2 or len(y) < 2:
        return []
    import contourpy

    gen = contourpy.contour_generator(x=np.asarray(x), y=np.asarray(y), z=np.asarray(z))
    return [np.asarray(line) for line in gen.lines(0.0)]


def cmd_scaling(args, out):
    rows = {k: [] for k in ("alpha2", "N", "fwhm", "improvement", "sigma_bin", "sigma_hom", "snl")}
    src = SqueezedSource(args.varsigma, args.purity)
    for a2 in args.alpha2s:
        s = InterferometerScenario(math.sqrt(a2), src, args.bin)
        n = photon_budget(s.alpha, src).n_total
        rows["alpha2"].append(a2)
        rows["N"].append(n)
        rows["fwhm"].append(fwhm(s))
        rows["improvement"].append(resolution_improvement(s))
        rows["sigma_bin"].append(best_sensitivity(s)[0])
        rows["sigma_hom"].append(best_sensitivity(s.replace(bin=math.inf))[0])
        rows["snl"].append(shot_noise_limit(n))
    n_min = 2
    fits = {
        "bin": scaling_fit(zip(rows["N"], rows["sigma_bin"]), min_points=n_min),
        "homodyne": scaling_fit(zip(rows["N"], rows["sigma_hom"]), min_points=n_min),
    }
    out.table("scaling", list(rows), list(rows.values()), plot=("N", ["sigma_bin", "sigma_hom", "snl"]))
    if args.ultimate:
        ult = [ultimate_sensitivity(a) for a in args.ultimate_alphas]
        out.table("scaling_ultimate", ["alpha", "N", "sigma", "varsigma_opt", "squeezing_db", "phi_opt"],
                  [args.ultimate_alphas, [a * a for a in args.ultimate_alphas],
                   [u.sigma for u in ult], [u.varsigma_opt for u in ult],
                   [-20 * math.log10(u.varsigma_opt) for u in ult], [u.phi_opt for u in ult]])
        fits["ultimate"] = scaling_fit(
            ((a * a, u.sigma) for a, u in zip(args.ultimate_alphas, ult)), min_points=n_min)
    out.json("scaling_exponents", {
        "exponents": {k: {"exponent": f.exponent, "stderr": f.stderr, "n_points": f.n_points}
                      for k, f in fits.items()}})


def cmd_noise_study(args, out):
    calib = None
    w = args.w
    if w is None:
        w, ratios = calibrate_noise_width(args.target, alpha=5.0, candidates=NOISE_CANDIDATES, a=args.bin)
        calib = {"chosen_w": w, "target": args.target,
                 "candidates": [{"w": k, "ratio": v} for k, v in ratios.items()]}
    table = degradation_table(args.alphas, w=w, a=args.bin)
    cols = ["scheme"] + [f"alpha_{a:g}" for a in table.alphas]
    data = [list(table.schemes)] + [table.ratios[:, j] for j in range(len(table.alphas))]
    out.table("noise_table", cols, data, summary={"w": w})
    if calib is not None:
        out.json("noise_calibration", {"calibration": calib})

    phis = np.linspace(1e-4, math.pi / 2, args.points)
    panel = {"alpha": [], "scheme": [], "noisy": [], "phi": [], "signal": [], "sigma": []}
    squeezed = SqueezedSource(0.5)
    for alpha in table.alphas:
        a_opt = {nw: optimize_bin(alpha, squeezed, noise_w=nw)[0] for nw in (None, w)}
        for noisy in (False, True):
            nw = w if noisy else None
            cases = [
                (SCHEMES[0], InterferometerScenario(alpha, SqueezedSource(1.0), args.bin, None, nw)),
                (SCHEMES[1], InterferometerScenario(alpha, squeezed, args.bin, None, nw)),
                (SCHEMES[2], InterferometerScenario(alpha, squeezed, a_opt[nw], None, nw)),
            ]
            for name, s in cases:
                _panel_add(panel, alpha, name, noisy, phis, expected_pi(s, phis), sensitivity(s, phis))
            for name, src in ((SCHEMES[3], SqueezedSource(1.0)), (SCHEMES[4], squeezed)):
                s = InterferometerScenario(alpha, src, args.bin, None, nw)
                n = photon_number_fringe(s, phis)
                _panel_add(panel, alpha, name, noisy, phis, n / np.max(n), caves_sensitivity(s, phis))
    out.table("noise_panels", list(panel), list(panel.values()))


def _panel_add(panel, alpha, name, noisy, phis, signal, sigma):
    k = phis.size
    panel["alpha"] += [alpha] * k
    panel["scheme"] += [name] * k
    panel["noisy"] += [int(noisy)] * k
    panel["phi"] += list(phis)
    panel["signal"] += list(signal)
    panel["sigma"] += list(sigma)


def cmd_loss_map(args, out):
    etas = np.array(sorted(args.etas))
    alphas = np.array(sorted(args.alphas))
    if np.any(etas <= 0) or np.any(etas > 1):
        raise ValueError("efficiencies must lie in (0, 1]")
    src = SqueezedSource(args.varsigma)
    ratio = np.empty((alphas.size, etas.size))
    imp = np.empty_like(ratio)
    for i, alpha in enumerate(alphas):
        # thermal photons admitted by the loss do not count toward N
        snl = shot_noise_limit(photon_budget(alpha, src))
        for j, eta in enumerate(etas):
            s = InterferometerScenario(alpha, src, args.bin, float(eta))
            ratio[i, j] = best_sensitivity(s)[0] / snl
            imp[i, j] = resolution_improvement(s)
    E, A = np.meshgrid(etas, alphas)
    out.table("loss_map", ["eta", "alpha", "sigma_over_snl", "improvement"],
              [E.ravel(), A.ravel(), ratio.ravel(), imp.ravel()])
    lines = zero_contour(etas, alphas, np.log(ratio))
    ids = np.concatenate([[k] * len(line) for k, line in enumerate(lines)]) if lines else []
    pts = np.concatenate(lines) if lines else np.empty((0, 2))
    out.table("loss_map_threshold", ["line", "eta", "alpha"], [ids, pts[:, 0], pts[:, 1]])
    thresholds = {}
    for i, alpha in enumerate(alphas):
        r = np.log(ratio[i])
        cross = np.nonzero(np.diff(np.sign(r)))[0]
        if cross.size:
            k = cross[-1]
            t = r[k] / (r[k] - r[k + 1])
            thresholds[f"{alpha:g}"] = float(etas[k] + t * (etas[k + 1] - etas[k]))
    out.json("loss_threshold", {"eta_threshold": thresholds})


def cmd_tomography(args, out):
    if args.input is None:
        raise ValueError("--input is required")
    x, y, _ = read_samples_csv(args.input)
    if args.kind == "phase":
        fit = fit_tomography(np.column_stack([x, y]))
        piezo = fit.piezo
        report = {
            "source": {"varsigma": fit.source.varsigma, "purity": fit.source.purity},
            "boundaries": [piezo.phi1, piezo.phi2],
            "segments": [dict(zip("abc", seg)) for seg in piezo.coeffs],
            "residual": fit.residual,
        }
        model = piezo.variance(x)
        out.table("tomography_residuals", ["phi", "variance", "model", "relative_residual"],
                  [x, y, model, y / model - 1.0], plot=("phi", ["variance", "model"]))
    else:
        data = np.genfromtxt(args.input, delimiter=",", names=True, comments="#")
        cols = data.dtype.names
        if len(cols) < 2:
            raise ValueError("pump CSV needs power and squeezing columns")
        p, sq = data[cols[0]], data[cols[1]]
        asq = data[cols[2]] if len(cols) > 2 else np.full(p.size, np.nan)
        weights = data[cols[3]] if len(cols) > 3 else None
        fit = fit_pump_curve(np.column_stack([p, sq, asq]), nu=args.nu, weights=weights)
        report = {"parameters": fit.report(), "residual": fit.residual, "nu": args.nu}
        out.table("pump_residuals", ["p", "sq_db", "asq_db", "sq_model_db", "asq_model_db"],
                  [p, sq, asq, 10 * np.log10(pump_variance(p, fit.model)),
                   10 * np.log10(pump_variance(p, fit.model, True))],
                  plot=("p", ["sq_db", "sq_model_db", "asq_db", "asq_model_db"]))
    out.json("tomography_fit", {"fit": report})


def cmd_simulate(args, out):
    s = _scenario(args)
    plan = ExperimentPlan(s, n_samples=args.samples, seed=args.seed, phase_offset=args.offset)
    curve = simulate_experiment(plan)
    ex = curve.extras
    out.table("simulate", ["phi", "pi_mean", "pi_std", "pi_stderr", "sigma"],
              [curve.phis, curve.pi_mean, curve.pi_std, ex["pi_stderr"], curve.sigma],
              plot=("phi", ["pi_mean"]))
    out.table("simulate_numerical", ["phi_mid", "sigma_numerical"], [ex["phi_mid"], ex["sigma_numerical"]])
    out.json("simulate_summary", {"fit": ex["fit"], "improvement": ex["improvement"],
                                  "snl_ratio": ex["snl_ratio"]})


def _apply_config(parser, argv):
    """Re-parse with TOML values as defaults; command-line flags win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with open(args.config, "rb") as fh:
        cfg = tomllib.load(fh)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    resolved = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in dests:
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        action = dests[dest]
        if action.type is not None and not isinstance(value, bool):
            value = action.type(value)
        resolved[dest] = value
    sub.set_defaults(**resolved)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except ConfigError as exc:
        print(f"mzwindow: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"mzwindow: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, OSError) else EXIT_VALIDATION
    try:
        out = Output(_out_dir(args), {"command": args.command, **_resolved(args)}, args.format)
        args.func(args, out)
    except (FitError, ConvergenceError) as exc:
        print(f"mzwindow: fit did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"mzwindow: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"mzwindow: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for path in out.written:
        print(path)
    return EXIT_OK
