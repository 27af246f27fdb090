"""Command-line front end.

Subcommands:
  simulate  run a Monte Carlo coverage study and write the ncRF table
  fit       fit the mediation model to a CSV dataset
  ci        bootstrap confidence intervals for a CSV dataset
  exact     density/CDF grid of the exact product distribution
  curve     double-bootstrap calibration curve for a CSV dataset

Options may come from a flat key=value config file (--config); explicit
command-line flags override file entries. The `--figures` flag renders PNG
companions next to the delimited output.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .bootstrap import Scheme, generate_draws
from .double_bootstrap import DoubleBootConfig, calibration_curve, run_double
from .errors import InputError, MedibootError
from .exact_dist import ExactParams, cdf_grid, density_grid
from .intervals import METHODS, basic, bc, bca, percentile, percentile_t
from .mc_harness import (
    FULL_PROFILE,
    QUICK_PROFILE,
    SimConfig,
    emit_outputs,
    run_study,
)
from .model import Dataset, demean, fit_mediation, jackknife, sobel_se
from .rng import RngStream

# CLI spellings of the interval methods
_METHOD_ALIASES = {
    "pt-sobel": "percentile_t_sobel",
    "pt-jack": "percentile_t_jack",
    "percentile-d": "percentile_d",
    "basic-d": "basic_d",
}


def _canon_method(name: str) -> str:
    m = _METHOD_ALIASES.get(name, name.replace("-", "_"))
    if m not in METHODS:
        raise InputError(f"unknown interval method {name!r}")
    return m


def read_dataset(path: str) -> Dataset:
    """CSV with header x,m,y; one observation per row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = {"x": [], "m": [], "y": []}
        if reader.fieldnames is None or not set(cols) <= set(reader.fieldnames):
            raise InputError(f"{path}: expected header with columns x,m,y")
        for row in reader:
            for k in cols:
                cols[k].append(float(row[k]))
    return Dataset(np.array(cols["x"]), np.array(cols["m"]), np.array(cols["y"]))


def _load_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}: expected key=value, got {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _apply_config(args: argparse.Namespace, subparser: argparse.ArgumentParser) -> None:
    """Fill args from the config file for flags the user left at default."""
    if not getattr(args, "config", None):
        return
    file_vals = _load_config(args.config)
    defaults = {a.dest: a.default for a in subparser._actions}
    for key, raw in file_vals.items():
        if not hasattr(args, key):
            continue
        if getattr(args, key) != defaults.get(key):
            continue  # explicit flag wins
        cur = defaults.get(key)
        if isinstance(cur, bool):
            val = raw.lower() in ("1", "true", "yes")
        elif isinstance(cur, int):
            val = int(raw)
        elif isinstance(cur, float):
            val = float(raw)
        else:
            val = raw
        setattr(args, key, val)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        start, stop, count = spec.split(":")
        return np.linspace(float(start), float(stop), int(count))
    except ValueError as e:
        raise InputError(f"bad grid spec {spec!r}; expected start:stop:count") from e


def cmd_simulate(args) -> int:
    profile = QUICK_PROFILE if args.quick else FULL_PROFILE
    cfg = SimConfig(
        n=args.n,
        theta_x=args.theta,
        beta_m=args.beta,
        REP=args.rep or profile["REP"],
        B=args.b or profile["B"],
        C=args.c or profile["C"],
        M=args.m or profile["M"],
        level=args.level,
        schemes=tuple(args.scheme.split(",")),
        methods=tuple(_canon_method(m) for m in args.methods.split(",")),
        seed=args.seed,
        var_divisor=args.var_divisor,
        collect_scatter=args.figures,
    )
    table = run_study(cfg, workers=args.workers)
    written = emit_outputs(table, args.out)
    if args.figures:
        from .plots import render_ncrf_chart

        written.append(render_ncrf_chart(table, os.path.join(args.out, "ncrf.png")))
    for path in written:
        print(path)
    return 0


def cmd_fit(args) -> int:
    d = demean(read_dataset(args.data))
    fit = fit_mediation(d)
    jack = jackknife(d)
    rows = [
        ("n", fit.n),
        ("theta_x", fit.theta_x_hat),
        ("beta_x", fit.beta_x_hat),
        ("beta_m", fit.beta_m_hat),
        ("gamma", fit.gamma_hat),
        ("s_v2", fit.s_v2),
        ("s_u2", fit.s_u2),
        ("se_theta_x", fit.se_theta_x),
        ("se_beta_m", fit.se_beta_m),
        ("se_gamma_sobel", sobel_se(fit)),
        ("se_gamma_jackknife", jack.se_jack),
        ("accel", jack.accel),
    ]
    for k, v in rows:
        print(f"{k},{v:.10g}" if isinstance(v, float) else f"{k},{v}")
    return 0


def cmd_ci(args) -> int:
    d = demean(read_dataset(args.data))
    fit = fit_mediation(d)
    scheme = Scheme(args.scheme)
    methods = [_canon_method(m) for m in args.methods.split(",")]
    rng = RngStream(args.seed)
    draws = generate_draws(d, scheme, args.b, "none", rng.child(0))
    out = []
    for method in methods:
        if method == "basic":
            ci = basic(draws, args.level)
        elif method == "percentile":
            ci = percentile(draws, args.level)
        elif method == "bc":
            ci = bc(draws, args.level)
        elif method == "bca":
            ci = bca(draws, jackknife(d).accel, args.level)
        elif method == "percentile_t_sobel":
            td = generate_draws(d, scheme, args.b, "sobel", rng.child(0))
            ci = percentile_t(td, sobel_se(fit), args.level)
        elif method == "percentile_t_jack":
            td = generate_draws(d, scheme, args.b, "jackknife", rng.child(0))
            ci = percentile_t(td, jackknife(d).se_jack, args.level)
        else:  # percentile_d / basic_d
            dcfg = DoubleBootConfig(
                B=args.b, C=args.c, M=min(args.m, args.b),
                variant="percentile" if method == "percentile_d" else "basic",
            )
            ci = run_double(d, scheme, dcfg, args.level, rng.child(1))
        out.append(ci)
        print(f"{method},{ci.lower:.10g},{ci.upper:.10g},{ci.alpha1:.6g},{ci.alpha2:.6g}")
    return 0


def cmd_exact(args) -> int:
    p = ExactParams(
        theta_x=args.theta,
        beta_m=args.beta,
        sigma_v2=args.sigma_v2,
        sigma_u2=args.sigma_u2,
        xtx=args.xtx,
        df=args.df,
    )
    grid = _parse_grid(args.grid)
    pdf = density_grid(grid, p)
    cdfv = cdf_grid(grid, p)
    lines = ["g,pdf,cdf"]
    for g, f, F in zip(grid, pdf, cdfv):
        lines.append(f"{g:.10g},{f:.10g},{F:.10g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
        if args.figures:
            from .plots import render_exact_curves

            print(render_exact_curves(grid, np.asarray(pdf), np.asarray(cdfv),
                                      os.path.splitext(args.out)[0] + ".png"))
    else:
        sys.stdout.write(text)
    return 0


def cmd_curve(args) -> int:
    d = demean(read_dataset(args.data))
    cfg = DoubleBootConfig(B=args.b, C=args.c, M=args.b)
    grid = [float(t) for t in args.levels.split(",")]
    curve = calibration_curve(d, Scheme(args.scheme), cfg, grid, RngStream(args.seed))
    lines = ["nominal,coverage"] + [f"{n:.6g},{c:.6g}" for n, c in curve]
    text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
        if args.figures:
            from .plots import render_calibration_curve

            print(render_calibration_curve(curve, os.path.splitext(args.out)[0] + ".png"))
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mediboot",
                                 description="Bootstrap inference for the indirect mediation effect")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value option file; CLI flags override")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--level", type=float, default=0.95)
        p.add_argument("--figures", action="store_true",
                       help="also render PNG figures next to the output")

    p = sub.add_parser("simulate", help="Monte Carlo coverage study")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--scheme", default="residual",
                   help="comma list from paired,residual,parametric")
    p.add_argument("--methods", default="percentile,basic,bc,bca",
                   help="comma list; aliases pt-sobel, pt-jack, percentile-d, basic-d")
    p.add_argument("--rep", type=int, default=0, help="replications (0 = profile default)")
    p.add_argument("--b", type=int, default=0)
    p.add_argument("--c", type=int, default=0)
    p.add_argument("--m", type=int, default=0)
    prof = p.add_mutually_exclusive_group()
    prof.add_argument("--quick", action="store_true",
                      help="REP=2000, B=999, C=250, M=500 (default)")
    prof.add_argument("--full", action="store_true",
                      help="REP=10000, B=1999, C=1000, M=1000")
    p.add_argument("--workers", type=int, default=max(os.cpu_count() or 1, 1))
    p.add_argument("--var-divisor", choices=["n-1", "n"], default="n-1")
    p.add_argument("--out", default="./results")
    p.set_defaults(func=cmd_simulate, subparser=p)

    p = sub.add_parser("fit", help="fit the mediation model to a CSV dataset")
    common(p)
    p.add_argument("data")
    p.set_defaults(func=cmd_fit, subparser=p)

    p = sub.add_parser("ci", help="bootstrap confidence intervals for a CSV dataset")
    common(p)
    p.add_argument("data")
    p.add_argument("--scheme", default="paired", choices=[s.value for s in Scheme])
    p.add_argument("--methods", default="percentile,basic,bc,bca")
    p.add_argument("--b", type=int, default=1999)
    p.add_argument("--c", type=int, default=1000)
    p.add_argument("--m", type=int, default=1000)
    p.set_defaults(func=cmd_ci, subparser=p)

    p = sub.add_parser("exact", help="exact density/CDF grid of the product estimator")
    common(p)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--sigma-v2", type=float, default=1.0)
    p.add_argument("--sigma-u2", type=float, default=1.0)
    p.add_argument("--xtx", type=float, required=True)
    p.add_argument("--df", type=int, required=True)
    p.add_argument("--grid", default="-0.1:0.1:201", help="start:stop:count")
    p.add_argument("--out", help="CSV destination (stdout if omitted)")
    p.set_defaults(func=cmd_exact, subparser=p)

    p = sub.add_parser("curve", help="double-bootstrap calibration curve")
    common(p)
    p.add_argument("data")
    p.add_argument("--scheme", default="residual", choices=[s.value for s in Scheme])
    p.add_argument("--b", type=int, default=199)
    p.add_argument("--c", type=int, default=100)
    p.add_argument("--levels", default="0.5,0.6,0.7,0.8,0.9,0.95,0.99")
    p.add_argument("--out", help="CSV destination (stdout if omitted)")
    p.set_defaults(func=cmd_curve, subparser=p)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _apply_config(args, args.subparser)
        return args.func(args)
    except MedibootError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
