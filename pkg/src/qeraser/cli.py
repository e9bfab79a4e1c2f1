"""Command-line front end.

Every command writes one table, as CSV (header row, LF line endings,
floats at 12 significant digits) or as JSON ``{"meta": ..., "data": [...]}``.
Exit status: 0 on success, 2 on a usage error, 1 when ``mz-check`` finds
an invariant violated.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from qeraser import __version__, montecarlo, mz_eraser, two_slit
from qeraser.optics import Family, TWO_PI, mub_pair

BASIS_CHOICES = {"linear": Family.LINEAR_HV, "circular": Family.CIRCULAR_RL, "pq": Family.POLARIZATION_PQ}
POLICY_CHOICES = {
    "fixed-linear": Family.LINEAR_HV,
    "fixed-circular": Family.CIRCULAR_RL,
    "fixed-pq": Family.POLARIZATION_PQ,
    "adaptive": None,
}


class UsageError(Exception):
    pass


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return value


def _positive(text: str) -> float:
    value = _finite(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= montecarlo.MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _sigma(text: str):
    return None if text == "auto" else _positive(text)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _json_value(value):
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(format(float(value), ".12g"))
    return value


def emit(fmt: str, rows: Sequence[dict], columns: Sequence[str], meta: dict | None = None) -> bytes:
    """Serialize homogeneous ``rows``; output bytes depend only on the inputs."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        doc = {
            "meta": _json_value(meta or {}),
            "data": [{c: _json_value(row[c]) for c in columns} for row in rows],
        }
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    raise UsageError(f"unknown output format {fmt!r}")


def _common(parser: argparse.ArgumentParser, lam_required: bool = True) -> None:
    if lam_required:
        parser.add_argument("--lambda", dest="lam", type=_positive, required=True,
                            help="wavelength (same length unit as positions)")
    else:
        parser.add_argument("--lambda", dest="lam", type=_positive, default=1.0,
                            help="wavelength (default: 1)")
    parser.add_argument("--seed", type=_seed, default=0, help="unsigned 64-bit seed (default: 0)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")


def _geometry(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--d", type=_positive, required=True, help="slit separation")
    parser.add_argument("--D", type=_positive, required=True, help="slit-to-screen distance")
    parser.add_argument("--sigma", type=_sigma, default=None,
                        help="envelope width, or 'auto' for 5 fringe periods (default)")
    parser.add_argument("--grid-min", type=_finite, default=None)
    parser.add_argument("--grid-max", type=_finite, default=None)
    parser.add_argument("--grid-steps", type=_count, default=two_slit.DEFAULT_GRID_STEPS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qeraser", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("mz-joint", help="joint detector/idler probability table")
    _common(p)
    p.add_argument("--x", type=_finite, required=True, help="BS1 displacement")
    p.add_argument("--basis", choices=sorted(BASIS_CHOICES), default="circular")
    p.add_argument("--theta", type=_finite, default=0.0, help="PQ basis angle in radians")
    p.add_argument("--adaptive", action="store_true", help="PQ basis at theta = 2 pi x / lambda")

    p = sub.add_parser("mz-scan", help="simulated coincidence scan over BS1 position")
    _common(p)
    p.add_argument("--x-min", type=_finite, required=True)
    p.add_argument("--x-max", type=_finite, required=True)
    p.add_argument("--steps", type=_count, required=True)
    p.add_argument("--shots", type=_count, default=10_000)
    p.add_argument("--policy", choices=list(POLICY_CHOICES), default="fixed-circular")
    p.add_argument("--theta", type=_finite, default=0.0, help="basis angle for fixed-pq")
    p.add_argument("--poisson", action="store_true", help="Poisson-distributed shots per point")

    p = sub.add_parser("mz-check", help="run the analytic invariant suite")
    _common(p, lam_required=False)
    p.add_argument("--samples", type=_count, default=200, help="random BS1 positions to test")

    p = sub.add_parser("twoslit-pattern", help="which-way coincidence patterns on the screen")
    _common(p)
    _geometry(p)
    p.add_argument("--theta", type=_finite, default=0.0, help="detector basis angle in radians")
    p.add_argument("--normalize", action="store_true",
                   help="scale patterns so p_plus + p_minus integrates to 1 over the grid")

    p = sub.add_parser("twoslit-sample", help="sample screen hits and adaptive which-way outcomes")
    _common(p)
    _geometry(p)
    p.add_argument("--n", type=_count, required=True)
    return parser


def _meta(args: argparse.Namespace) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format", "command")}
    return {"command": args.command, "version": __version__, "seed": args.seed,
            "params": {k: _json_value(v) for k, v in params.items()}}


def _cmd_mz_joint(args):
    cfg = mz_eraser.MzConfig(args.x, args.lam)
    if args.adaptive:
        basis = mz_eraser.adaptive_basis(cfg)
    else:
        basis = mub_pair(BASIS_CHOICES[args.basis], args.theta)
    table = mz_eraser.correlation_table(cfg, basis)
    rows = [dict(r, family=basis.family.value, theta=basis.theta) for r in table.rows()]
    return rows, ["detector", "outcome", "probability", "family", "theta"], 0


def _cmd_mz_scan(args):
    family = POLICY_CHOICES[args.policy]
    policy = (montecarlo.BasisPolicy.adaptive_mub() if family is None
              else montecarlo.BasisPolicy.fixed(family, args.theta))
    spec = montecarlo.ScanSpec(args.x_min, args.x_max, args.steps, args.shots, policy, args.poisson)
    hist = montecarlo.scan(args.lam, spec, args.seed)
    cols = ["x", "theta", "detector", "outcome", "count", "shots", "frequency", "probability"]
    return hist.rows(), cols, 0


def _cmd_mz_check(args):
    rng = montecarlo.substream(args.seed)
    xs = rng.uniform(0.0, args.lam, args.samples)
    thetas = rng.uniform(0.0, TWO_PI, args.samples)
    report = mz_eraser.invariant_report(xs, args.lam, thetas)
    rows = [{"check": r.name, "max_deviation": r.max_deviation, "tolerance": r.tolerance,
             "passed": r.passed} for r in report]
    failed = [r.name for r in report if not r.passed]
    if failed:
        print(f"qeraser: invariant violated: {', '.join(failed)}", file=sys.stderr)
    return rows, ["check", "max_deviation", "tolerance", "passed"], 1 if failed else 0


def _slit_config(args) -> two_slit.TwoSlitConfig:
    return two_slit.TwoSlitConfig.build(args.d, args.D, args.lam, args.sigma,
                                        args.grid_min, args.grid_max, args.grid_steps)


def _cmd_twoslit_pattern(args):
    cfg = _slit_config(args)
    samples = two_slit.pattern(cfg, args.theta)
    a = two_slit.envelope(cfg, cfg.grid)
    scale = 1.0
    if args.normalize:
        scale = 1.0 / np.trapezoid(2.0 * a, cfg.grid)
    rows = [{"x": s.x, "envelope": float(ai), "p_plus": s.p_plus * scale, "p_minus": s.p_minus * scale}
            for s, ai in zip(samples, a)]
    return rows, ["x", "envelope", "p_plus", "p_minus"], 0


def _cmd_twoslit_sample(args):
    cfg = _slit_config(args)
    events = montecarlo.sample_two_slit(cfg, args.n, args.seed)
    rows = [{"trial": t, "x": e.x, "theta_star": e.theta_star, "outcome": e.outcome}
            for t, e in enumerate(events)]
    return rows, ["trial", "x", "theta_star", "outcome"], 0


COMMANDS = {
    "mz-joint": _cmd_mz_joint,
    "mz-scan": _cmd_mz_scan,
    "mz-check": _cmd_mz_check,
    "twoslit-pattern": _cmd_twoslit_pattern,
    "twoslit-sample": _cmd_twoslit_sample,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "mz-scan" and not args.x_min < args.x_max:
        print("qeraser: error: --x-min must be below --x-max", file=sys.stderr)
        return 2
    try:
        rows, columns, status = COMMANDS[args.command](args)
        payload = emit(args.format, rows, columns, _meta(args))
    except (ValueError, UsageError) as exc:
        print(f"qeraser: error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    else:
        try:
            with open(args.out, "wb") as fh:
                fh.write(payload)
        except OSError as exc:
            print(f"qeraser: error: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return 2
    return status


def main() -> None:
    sys.exit(run())
