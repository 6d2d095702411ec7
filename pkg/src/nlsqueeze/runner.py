"""Experiment driver: config files, parameter sweeps, reports, CLI.

Configuration is a flat key = value file with dotted section prefixes
('#' starts a comment, blank lines ignored).  Recognised keys:

    state.kind            vacuum | coherent | thermal | cubic_phase | displaced
    state.beta            complex, coherent amplitude (e.g. 0.106j or 1+0.5j)
    state.n_bar           thermal occupation
    state.gamma           cubic nonlinearity
    state.alpha           displacement (displaced kind)
    state.N               truncation dimension (default 128)
    state.inner.*         inner spec of a displaced state (same keys, one level)
    channel.G             readout coupling (kappa units)
    channel.Gamma_m       mechanical damping rate
    channel.n_bar         bath occupation
    channel.tau           interaction time
    channel.kappa         cavity linewidth, fixes the frequency scale (default 1)
    sweep.axis            thermalisation_rate | interaction_time | cooperativity
    sweep.values          comma list, positive and strictly increasing
    ensemble.R            replicates (default 5)
    ensemble.count        samples per phase (default 1e5)
    ensemble.base_seed    master seed (default 0)
    lambda.min/max/points evaluation grid (default -0.2 .. 0.4, 101)
    certify.lambda_star   certification point (default: gamma for cubic states)
    certify.gamma_G       gate nonlinearity for the resource verdict
    certify.k_sigma       detection threshold in sigmas (default 3)
    grid.extent           position-grid override (give both or neither)
    grid.points
    output.dir            where reports land (default .)
    mode                  full | quick (quick caps count at 1e5 and R at 5)

Sweep axes move one channel parameter to hit the requested value in
kappa units: thermalisation_rate sets Gamma_m = value*kappa/n_bar at
fixed n_bar, interaction_time sets tau = value/kappa, and cooperativity
sets G = sqrt(value * n_bar * Gamma_m * kappa).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from time import perf_counter

import numpy as np

from .errors import ConfigError, NumericsError
from .estimate import EnsembleReport, derive_seed, ensemble_run
from .hilbert import PositionGrid
from .nlsq import assemble_curve, classical_threshold, exact_moment_set, resource_condition
from .readout import ChannelParams
from .states import StateSpec, make_state

AXES = ("thermalisation_rate", "interaction_time", "cooperativity")
MODES = ("full", "quick")
QUICK_COUNT_CAP = 100_000
QUICK_R_CAP = 5

PLOT_HEADER = "sweep_value,lambda,v_mean,v_std,v_lo,v_hi,v_analytic,threshold"
SWEEP_HEADER = "sweep_value,lambda,v_mean,v_std,v_analytic,threshold"


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    state_spec: StateSpec
    channel: ChannelParams | None = None
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    R: int = 5
    count: int = QUICK_COUNT_CAP
    base_seed: int = 0
    lambda_min: float = -0.2
    lambda_max: float = 0.4
    lambda_points: int = 101
    lambda_star: float | None = None
    gamma_G: float | None = None
    k_sigma: float = 3.0
    grid: PositionGrid | None = None
    out_dir: str = "."
    mode: str = "full"

    def lambda_grid(self) -> np.ndarray:
        return np.linspace(self.lambda_min, self.lambda_max, self.lambda_points)

    def echo(self) -> dict:
        d = {
            "state": _spec_echo(self.state_spec),
            "channel": _channel_echo(self.channel) if self.channel else None,
            "sweep": {"axis": self.sweep_axis, "values": list(self.sweep_values)},
            "ensemble": {"R": self.R, "count": self.count, "base_seed": self.base_seed},
            "lambda": {"min": self.lambda_min, "max": self.lambda_max,
                       "points": self.lambda_points},
            "certify": {"lambda_star": self.lambda_star, "gamma_G": self.gamma_G,
                        "k_sigma": self.k_sigma},
            "grid": ({"extent": self.grid.extent, "points": self.grid.n_points}
                     if self.grid else None),
            "output": {"dir": self.out_dir},
            "mode": self.mode,
        }
        return d


def _spec_echo(spec: StateSpec) -> dict:
    d = {"kind": spec.kind, "N": spec.N}
    if spec.kind == "coherent":
        d["beta"] = str(spec.beta)
    elif spec.kind == "thermal":
        d["n_bar"] = spec.n_bar
    elif spec.kind == "cubic_phase":
        d["gamma"] = spec.gamma
    elif spec.kind == "displaced":
        d["alpha"] = str(spec.alpha)
        d["inner"] = _spec_echo(spec.inner)
    return d


def _channel_echo(ch: ChannelParams) -> dict:
    coop = ch.cooperativity
    return {"G": ch.G, "Gamma_m": ch.Gamma_m, "n_bar": ch.n_bar, "tau": ch.tau,
            "kappa": ch.kappa,
            "cooperativity": coop if math.isfinite(coop) else None}


def _parse_lines(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _pop(raw: dict, key: str, convert, default=None):
    if key not in raw:
        return default
    value = raw.pop(key)
    try:
        return convert(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None


def _complex(text: str) -> complex:
    return complex(text.replace(" ", "").replace("(", "").replace(")", ""))


def _pop_state(raw: dict, prefix: str) -> StateSpec:
    kind = raw.pop(prefix + "kind", None)
    if kind is None:
        raise ConfigError(f"missing {prefix}kind")
    kwargs = dict(
        beta=_pop(raw, prefix + "beta", _complex, 0j),
        n_bar=_pop(raw, prefix + "n_bar", float, 0.0),
        gamma=_pop(raw, prefix + "gamma", float, 0.0),
        alpha=_pop(raw, prefix + "alpha", _complex, 0j),
        N=_pop(raw, prefix + "N", int, 128),
    )
    inner = None
    if any(k.startswith(prefix + "inner.") for k in raw):
        if kind != "displaced":
            raise ConfigError(f"{prefix}inner.* only applies to kind=displaced")
        inner = _pop_state(raw, prefix + "inner.")
    try:
        return StateSpec(kind=kind, inner=inner, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"invalid state spec: {exc}") from None


def _pop_channel(raw: dict) -> ChannelParams | None:
    keys = [k for k in raw if k.startswith("channel.")]
    if not keys:
        return None
    G = _pop(raw, "channel.G", float)
    tau = _pop(raw, "channel.tau", float)
    if G is None or tau is None:
        raise ConfigError("channel section needs at least channel.G and channel.tau")
    try:
        return ChannelParams(
            G=G,
            Gamma_m=_pop(raw, "channel.Gamma_m", float, 0.0),
            n_bar=_pop(raw, "channel.n_bar", float, 0.0),
            tau=tau,
            kappa=_pop(raw, "channel.kappa", float, 1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid channel parameters: {exc}") from None


def _pop_sweep_values(raw: dict) -> tuple:
    text = raw.pop("sweep.values", None)
    if text is None or text == "":
        return ()
    try:
        values = tuple(float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad sweep.values: {text!r}") from None
    if any(v <= 0 for v in values):
        raise ConfigError("sweep values must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep values must be strictly increasing")
    return values


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; unknown or duplicate keys are errors."""
    raw = _parse_lines(text)
    spec = _pop_state(raw, "state.")
    channel = _pop_channel(raw)
    axis = raw.pop("sweep.axis", None)
    if axis is not None and axis not in AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    values = _pop_sweep_values(raw)
    cfg = ExperimentConfig(
        state_spec=spec,
        channel=channel,
        sweep_axis=axis,
        sweep_values=values,
        R=_pop(raw, "ensemble.R", int, 5),
        count=int(_pop(raw, "ensemble.count", float, 1e5)),
        base_seed=_pop(raw, "ensemble.base_seed", int, 0),
        lambda_min=_pop(raw, "lambda.min", float, -0.2),
        lambda_max=_pop(raw, "lambda.max", float, 0.4),
        lambda_points=_pop(raw, "lambda.points", int, 101),
        lambda_star=_pop(raw, "certify.lambda_star", float, None),
        gamma_G=_pop(raw, "certify.gamma_G", float, None),
        k_sigma=_pop(raw, "certify.k_sigma", float, 3.0),
        out_dir=raw.pop("output.dir", "."),
        mode=raw.pop("mode", "full"),
    )
    extent = _pop(raw, "grid.extent", float, None)
    points = _pop(raw, "grid.points", int, None)
    if (extent is None) != (points is None):
        raise ConfigError("grid.extent and grid.points must be given together")
    if extent is not None:
        cfg.grid = PositionGrid(extent, points)
    if raw:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(raw))}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.lambda_points < 1:
        raise ConfigError("lambda.points must be >= 1")
    if cfg.mode == "quick":
        cfg.count = min(cfg.count, QUICK_COUNT_CAP)
        cfg.R = min(cfg.R, QUICK_R_CAP)
    return cfg


def load_config(path, out_dir=None, base_seed=None, mode=None) -> ExperimentConfig:
    """Read a config file and apply CLI overrides."""
    cfg = parse_config(Path(path).read_text(encoding="utf-8"))
    if out_dir is not None:
        cfg.out_dir = str(out_dir)
    if base_seed is not None:
        cfg.base_seed = int(base_seed)
    if mode is not None:
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        cfg.mode = mode
        if mode == "quick":
            cfg.count = min(cfg.count, QUICK_COUNT_CAP)
            cfg.R = min(cfg.R, QUICK_R_CAP)
    return cfg


def apply_axis(channel: ChannelParams, axis: str, value: float) -> ChannelParams:
    """Channel for one sweep point, value in kappa units."""
    if axis == "thermalisation_rate":
        if channel.n_bar <= 0:
            raise ConfigError("thermalisation_rate sweep needs channel.n_bar > 0")
        return replace(channel, Gamma_m=value * channel.kappa / channel.n_bar)
    if axis == "interaction_time":
        return replace(channel, tau=value / channel.kappa)
    if axis == "cooperativity":
        product = channel.n_bar * channel.Gamma_m * channel.kappa
        if product <= 0:
            raise ConfigError("cooperativity sweep needs n_bar and Gamma_m > 0")
        return replace(channel, G=math.sqrt(value * product))
    raise ConfigError(f"unknown sweep axis {axis!r}")


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepPoint:
    sweep_value: float
    channel: ChannelParams
    seed: int
    report: EnsembleReport
    wall_clock_s: float


@dataclass
class SweepReport:
    config: ExperimentConfig
    lambdas: np.ndarray
    v_analytic: np.ndarray
    threshold: np.ndarray
    points: list = field(default_factory=list)
    wall_clock_s: float = 0.0


def analytic_overlay(spec: StateSpec, state, lambdas: np.ndarray) -> np.ndarray:
    """Closed-form curve for cubic states, exact truncated-state curve
    otherwise."""
    if spec.kind == "cubic_phase":
        return 0.5 * (1.0 + 9.0 * (spec.gamma - lambdas) ** 2)
    return assemble_curve(exact_moment_set(state))(lambdas)


def run_sweep(config: ExperimentConfig, threads: int = 1) -> SweepReport:
    """Ensemble per sweep value; seeds derive from (base_seed, point index)."""
    if config.channel is None:
        raise ConfigError("sweep needs a channel section")
    if config.sweep_axis is None:
        raise ConfigError("sweep needs sweep.axis")
    t0 = perf_counter()
    state = make_state(config.state_spec, grid=config.grid)
    lam = config.lambda_grid()
    report = SweepReport(
        config=config,
        lambdas=lam,
        v_analytic=analytic_overlay(config.state_spec, state, lam),
        threshold=np.asarray(classical_threshold(lam)),
    )
    for i, sv in enumerate(config.sweep_values):
        channel = apply_axis(config.channel, config.sweep_axis, sv)
        seed = derive_seed(config.base_seed, i)
        t1 = perf_counter()
        rep = ensemble_run(state, channel, config.count, config.R, seed,
                           lambdas=lam, grid=config.grid, threads=threads)
        report.points.append(SweepPoint(sweep_value=sv, channel=channel, seed=seed,
                                        report=rep, wall_clock_s=perf_counter() - t1))
    report.wall_clock_s = perf_counter() - t0
    return report


def single_run_report(config: ExperimentConfig, threads: int = 1) -> SweepReport:
    """One ensemble at the template channel, packaged as a single-point
    sweep with sweep_value 0.0 so the emitters apply unchanged."""
    if config.channel is None:
        raise ConfigError("reconstruction needs a channel section")
    t0 = perf_counter()
    state = make_state(config.state_spec, grid=config.grid)
    lam = config.lambda_grid()
    rep = ensemble_run(state, config.channel, config.count, config.R,
                       config.base_seed, lambdas=lam, grid=config.grid,
                       threads=threads)
    report = SweepReport(
        config=config,
        lambdas=lam,
        v_analytic=analytic_overlay(config.state_spec, state, lam),
        threshold=np.asarray(classical_threshold(lam)),
        points=[SweepPoint(sweep_value=0.0, channel=config.channel,
                           seed=config.base_seed, report=rep,
                           wall_clock_s=perf_counter() - t0)],
    )
    report.wall_clock_s = perf_counter() - t0
    return report


# ---------------------------------------------------------------- emission

def _fmt(x) -> str:
    return format(float(x), ".17g")


def sweep_csv(report: SweepReport) -> str:
    lines = [SWEEP_HEADER]
    for pt in report.points:
        for j, lam in enumerate(report.lambdas):
            lines.append(",".join(_fmt(v) for v in (
                pt.sweep_value, lam,
                pt.report.v_mean[j], pt.report.v_std[j],
                report.v_analytic[j], report.threshold[j])))
    return "\n".join(lines) + "\n"


def emit_plot_data(report: SweepReport) -> str:
    """Plot-ready CSV with the 1-sigma band columns; formatting is fixed
    (17 significant digits, '\\n' endings) so reruns are byte-identical."""
    lines = [PLOT_HEADER]
    for pt in report.points:
        for j, lam in enumerate(report.lambdas):
            mean, std = pt.report.v_mean[j], pt.report.v_std[j]
            lines.append(",".join(_fmt(v) for v in (
                pt.sweep_value, lam, mean, std, mean - std, mean + std,
                report.v_analytic[j], report.threshold[j])))
    return "\n".join(lines) + "\n"


def _point_dict(pt: SweepPoint) -> dict:
    rep = pt.report
    return {
        "sweep_value": pt.sweep_value,
        "channel": _channel_echo(pt.channel),
        "point_seed": pt.seed,
        "replicate_seeds": list(rep.seeds),
        "coefficients": {
            name: {"mean": rep.coeff_mean[name], "std": rep.coeff_std[name],
                   "values": [float(v) for v in rep.coeff_values[name]]}
            for name in ("a0", "a1", "a2")
        },
        "mixed_moment": {"mean": rep.mixed_mean, "std": rep.mixed_std},
        "wall_clock_s": pt.wall_clock_s,
    }


def report_dict(report: SweepReport) -> dict:
    return {
        "config": report.config.echo(),
        "lambda": [float(v) for v in report.lambdas],
        "v_analytic": [float(v) for v in report.v_analytic],
        "threshold": [float(v) for v in report.threshold],
        "points": [_point_dict(pt) for pt in report.points],
        "wall_clock_s": report.wall_clock_s,
    }


def write_sweep_outputs(report: SweepReport, json_name: str = "report.json") -> dict:
    """Write sweep.csv, plot.csv and the JSON sidecar; returns the paths."""
    out = Path(report.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"sweep_csv": out / "sweep.csv", "plot_csv": out / "plot.csv",
             "report_json": out / json_name}
    with open(paths["sweep_csv"], "w", encoding="utf-8", newline="") as f:
        f.write(sweep_csv(report))
    with open(paths["plot_csv"], "w", encoding="utf-8", newline="") as f:
        f.write(emit_plot_data(report))
    with open(paths["report_json"], "w", encoding="utf-8", newline="") as f:
        json.dump(report_dict(report), f, indent=2)
        f.write("\n")
    return paths


# ---------------------------------------------------------------- certify

def certify(config: ExperimentConfig, threads: int = 1) -> dict:
    """Run one ensemble and judge nonclassicality at lambda_star.

    The margin is threshold - V per replicate; the verdict requires the
    mean margin to clear k_sigma ensemble deviations.  For cubic states
    with a configured gamma_G the resource verdict (gamma below 2
    gamma_G) is attached as well.
    """
    if config.channel is None:
        raise ConfigError("certify needs a channel section")
    t0 = perf_counter()
    spec = config.state_spec
    if config.lambda_star is not None:
        lam_star = config.lambda_star
    elif spec.kind == "cubic_phase":
        lam_star = spec.gamma
    else:
        lam_star = 0.0
    state = make_state(spec, grid=config.grid)
    lam = config.lambda_grid()
    rep = ensemble_run(state, config.channel, config.count, config.R,
                       config.base_seed, lambdas=lam, grid=config.grid,
                       threads=threads)
    margins = classical_threshold(lam_star) - rep.v_at(lam_star)
    margin_mean = float(margins.mean())
    margin_std = float(margins.std(ddof=1))
    grid_margin = np.asarray(classical_threshold(lam)) - rep.v_mean
    nonclassical_anywhere = bool(np.any(grid_margin > config.k_sigma * rep.v_std))
    resource = None
    if spec.kind == "cubic_phase" and config.gamma_G is not None:
        resource = {"gamma": spec.gamma, "gamma_G": config.gamma_G,
                    "satisfied": resource_condition(spec.gamma, config.gamma_G)}
    return {
        "lambda_star": lam_star,
        "v_mean": float(np.mean(rep.v_at(lam_star))),
        "v_std": float(np.std(rep.v_at(lam_star), ddof=1)),
        "threshold": float(classical_threshold(lam_star)),
        "margin_mean": margin_mean,
        "margin_std": margin_std,
        "k_sigma": config.k_sigma,
        "nonclassical": bool(margin_mean > config.k_sigma * margin_std),
        "nonclassical_anywhere": nonclassical_anywhere,
        "resource": resource,
        "replicate_seeds": list(rep.seeds),
        "config": config.echo(),
        "wall_clock_s": perf_counter() - t0,
    }


def state_info(config: ExperimentConfig) -> dict:
    """Exact moments and curve of the configured state, no sampling."""
    state = make_state(config.state_spec, grid=config.grid)
    m = exact_moment_set(state)
    curve = assemble_curve(m)
    lam = config.lambda_grid()
    v = curve(lam)
    margins = np.asarray(classical_threshold(lam)) - v
    best = int(np.argmax(margins))
    return {
        "state": _spec_echo(config.state_spec),
        "leakage": state.leakage,
        "moments": {f"phi={phi:g},n={n}": m.get(phi, n) for phi, n in sorted(m.keys())},
        "mixed_moment": m.mixed,
        "curve": {"a0": curve.a0, "a1": curve.a1, "a2": curve.a2},
        "v_min": float(np.min(v)),
        "lambda_at_v_min": float(lam[int(np.argmin(v))]),
        "best_margin": float(margins[best]),
        "lambda_at_best_margin": float(lam[best]),
        "nonclassical": bool(margins[best] > 0),
    }


# ---------------------------------------------------------------- CLI

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="nlsqueeze",
        description="Simulate and estimate cubic nonlinear squeezing of a "
                    "mechanical oscillator read out through a QND optical channel.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    specs = (
        ("sweep", "run the configured parameter sweep and write CSV/JSON reports"),
        ("certify", "run one ensemble and emit a nonclassicality certificate"),
        ("reconstruct", "run one ensemble and write the reconstruction report"),
        ("state-info", "print exact moments and curve for the configured state"),
    )
    for name, help_text in specs:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, metavar="PATH",
                        help="experiment config file")
        sp.add_argument("--out", default=None, metavar="DIR",
                        help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="override ensemble.base_seed")
        sp.add_argument("--mode", choices=MODES, default=None,
                        help="override mode")
        sp.add_argument("--threads", type=int, default=1, metavar="N",
                        help="replicate worker threads (default 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, out_dir=args.out,
                             base_seed=args.seed, mode=args.mode)
        if args.command == "sweep":
            report = run_sweep(config, threads=args.threads)
            paths = write_sweep_outputs(report)
            for pt in report.points:
                print(f"sweep_value={pt.sweep_value:g}  "
                      f"a0={pt.report.coeff_mean['a0']:.6g}"
                      f"±{pt.report.coeff_std['a0']:.2g}  "
                      f"[{pt.wall_clock_s:.2f} s]")
            print(f"wrote {paths['sweep_csv']}, {paths['plot_csv']}, "
                  f"{paths['report_json']} in {report.wall_clock_s:.2f} s")
        elif args.command == "certify":
            cert = certify(config, threads=args.threads)
            out = Path(config.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / "certificate.json"
            with open(path, "w", encoding="utf-8", newline="") as f:
                json.dump(cert, f, indent=2)
                f.write("\n")
            verdict = "nonclassical" if cert["nonclassical"] else "not certified"
            print(f"V({cert['lambda_star']:g}) = {cert['v_mean']:.6g} "
                  f"± {cert['v_std']:.2g} vs threshold {cert['threshold']:.6g}: "
                  f"{verdict} at {cert['k_sigma']:g} sigma")
            if cert["resource"] is not None:
                state_txt = "sufficient" if cert["resource"]["satisfied"] else "insufficient"
                print(f"resource versus gamma_G={cert['resource']['gamma_G']:g}: {state_txt}")
            print(f"wrote {path}")
        elif args.command == "reconstruct":
            report = single_run_report(config, threads=args.threads)
            paths = write_sweep_outputs(report, json_name="reconstruction.json")
            rep = report.points[0].report
            print(f"a0={rep.coeff_mean['a0']:.6g}±{rep.coeff_std['a0']:.2g}  "
                  f"a1={rep.coeff_mean['a1']:.6g}±{rep.coeff_std['a1']:.2g}  "
                  f"a2={rep.coeff_mean['a2']:.6g}±{rep.coeff_std['a2']:.2g}")
            print(f"wrote {paths['plot_csv']}, {paths['report_json']} "
                  f"in {report.wall_clock_s:.2f} s")
        else:
            print(json.dumps(state_info(config), indent=2))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
