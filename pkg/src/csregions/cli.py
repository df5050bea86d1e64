"""Command-line entry point: ``csregions <subcommand> ...``.

Every table-emitting subcommand writes CSV (default) or JSON to ``--out`` or
stdout.  Numbers carry 12 significant digits.  CSV output may start with
``#`` comment lines recording settings such as the free-energy base.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import enum
import io
import json
import sys
from pathlib import Path

import numpy as np

from .amp import AmpConfig
from .errors import DomainError, NumericalError
from .experiments import ExperimentConfig, mean_and_stderr, run_cell, run_grid
from .prior import SparseGaussianPrior, scalar_mmse
from .regions import classify, rbp_vs_sparsity, thresholds
from .tanaka import ENERGY_BASES, ChannelSpec, db_to_linear, find_fixed_points, mmse_surface, solve

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

SURFACE_FIELDS = ("rate", "gamma_db", "mmse", "eta", "fixed_point_count", "region")
FIXED_POINT_FIELDS = ("eta", "a", "mmse", "free_energy_nats", "branch", "selected")
THRESHOLD_FIELDS = ("gamma_db", "r_robust", "r_consistency", "r_low_noise", "r_bp")
RBP_FIELDS = ("p", "r_bp")
SIMULATE_FIELDS = ("trial", "empirical_mse", "std_err", "iterations", "converged")
COMPARE_FIELDS = (
    "rate",
    "gamma_db",
    "mean_mse",
    "std_err",
    "tanaka_mmse",
    "smallest_fp_mmse",
    "region",
    "nonconverged_trials",
)


class UsageError(Exception):
    pass


def format_number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _json_value(value):
    if value is None or isinstance(value, bool):
        return value
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(format(float(value), ".12g"))
    return value


def render(rows: list[dict], fields, fmt: str, comments=()) -> str:
    if fmt == "json":
        return json.dumps([{f: _json_value(r[f]) for f in fields} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for r in rows:
        writer.writerow([format_number(r[f]) for f in fields])
    return buf.getvalue()


def read_table(text: str) -> list[dict]:
    """Parse CSV emitted by this tool back into string-valued dicts."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _emit(args, rows, fields, comments=()):
    text = render(rows, fields, args.format, comments)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _parse_list(text: str) -> list[float]:
    parts = [t for t in text.replace(",", " ").split() if t]
    try:
        return [float(t) for t in parts]
    except ValueError:
        raise UsageError(f"not a list of numbers: {text!r}") from None


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


CONFIG_KEYS = {
    "p": float,
    "n": int,
    "rates": _parse_list,
    "gammas_db": _parse_list,
    "trials": int,
    "seed": int,
    "max_iters": int,
    "tol": float,
    "damping": float,
    "row_normalize": _parse_bool,
    "exact_sparsity": _parse_bool,
    "energy_base": str,
}
AMP_KEYS = ("max_iters", "tol", "damping", "row_normalize")


def load_config(text: str) -> ExperimentConfig:
    """Parse a flat ``key = value`` file into an :class:`ExperimentConfig`."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise UsageError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split(sep, 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError:
            raise UsageError(f"line {lineno}: bad value for {key}: {val!r}") from None
    missing = {"p", "n", "rates", "gammas_db", "trials"} - values.keys()
    if missing:
        raise UsageError(f"config is missing {sorted(missing)}")
    if not values["rates"] or not values["gammas_db"]:
        raise UsageError("config grid is empty")
    amp = AmpConfig(**{k: values.pop(k) for k in AMP_KEYS if k in values})
    if values.get("energy_base", "nats") not in ENERGY_BASES:
        raise UsageError(f"energy_base must be one of {ENERGY_BASES}")
    return ExperimentConfig(amp=amp, **values)


def _grid(lo: float, hi: float, steps: int) -> list[float]:
    if steps < 1:
        raise UsageError("grid needs at least one step")
    return [float(v) for v in np.linspace(lo, hi, steps)]


def cmd_mmse(args) -> None:
    print(format_number(scalar_mmse(SparseGaussianPrior(args.p), args.snr_eff)))


def cmd_fixed_points(args) -> None:
    spec = ChannelSpec.from_db(args.p, args.gamma_db, args.rate)
    sol = solve(spec, args.energy_base)
    rows = [
        {
            "eta": fp.eta,
            "a": fp.a,
            "mmse": fp.mmse,
            "free_energy_nats": fp.free_energy,
            "branch": fp.branch,
            "selected": fp is sol.selected,
        }
        for fp in sol.fixed_points
    ]
    _emit(args, rows, FIXED_POINT_FIELDS, [f"energy_base={args.energy_base}"])


def cmd_surface(args) -> None:
    rates = _grid(args.rate_min, args.rate_max, args.rate_steps)
    gammas_db = _grid(args.gamma_db_min, args.gamma_db_max, args.gamma_db_steps)
    surface = mmse_surface(args.p, rates, [db_to_linear(g) for g in gammas_db], args.energy_base, args.workers)
    rows = []
    for row, (rate, gdb) in zip(surface, ((r, g) for r in rates for g in gammas_db)):
        label = classify(args.p, rate, row.gamma, args.energy_base)
        rows.append(
            {
                "rate": rate,
                "gamma_db": gdb,
                "mmse": row.mmse,
                "eta": row.eta,
                "fixed_point_count": row.fixed_point_count,
                "region": label.region,
            }
        )
    _emit(args, rows, SURFACE_FIELDS, [f"energy_base={args.energy_base}", f"p={format_number(args.p)}"])


def cmd_thresholds(args) -> None:
    rows = []
    for gdb in args.gamma_db:
        ts = thresholds(args.p, db_to_linear(gdb), args.energy_base)
        rows.append(
            {
                "gamma_db": gdb,
                "r_robust": ts.r_robust,
                "r_consistency": ts.r_consistency,
                "r_low_noise": ts.r_low_noise,
                "r_bp": ts.r_bp,
            }
        )
    _emit(args, rows, THRESHOLD_FIELDS, [f"energy_base={args.energy_base}", f"p={format_number(args.p)}"])


def cmd_rbp_sweep(args) -> None:
    p_list = _parse_list(" ".join(args.p_list))
    if not p_list:
        raise UsageError("empty p list")
    table = rbp_vs_sparsity(p_list, db_to_linear(args.gamma_db_ref))
    rows = [{"p": p, "r_bp": r} for p, r in table]
    _emit(args, rows, RBP_FIELDS, [f"gamma_db_ref={format_number(args.gamma_db_ref)}"])


def _amp_from_args(args) -> AmpConfig:
    return AmpConfig(
        max_iters=args.max_iters, tol=args.tol, damping=args.damping, row_normalize=args.row_normalize
    )


def cmd_simulate(args) -> None:
    cfg = ExperimentConfig(
        p=args.p,
        n=args.n,
        rates=(args.rate,),
        gammas_db=(args.gamma_db,),
        trials=args.trials,
        seed=args.seed,
        amp=_amp_from_args(args),
        exact_sparsity=args.exact_sparsity,
    )
    trials = run_cell(cfg, args.rate, args.gamma_db)
    rows = [
        {
            "trial": i,
            "empirical_mse": t.empirical_mse,
            "std_err": None,
            "iterations": t.iterations,
            "converged": t.converged,
        }
        for i, t in enumerate(trials)
    ]
    mean, se = mean_and_stderr([t.empirical_mse for t in trials])
    rows.append(
        {
            "trial": "mean",
            "empirical_mse": mean,
            "std_err": se,
            "iterations": None,
            "converged": all(t.converged for t in trials),
        }
    )
    spec = ChannelSpec.from_db(args.p, args.gamma_db, args.rate)
    comments = [
        f"seed={args.seed}",
        f"tanaka_mmse={format_number(solve(spec).selected.mmse)}",
        f"smallest_fp_mmse={format_number(find_fixed_points(spec)[0].mmse)}",
    ]
    _emit(args, rows, SIMULATE_FIELDS, comments)


def comparison_record(row) -> dict:
    return {
        "rate": row.rate,
        "gamma_db": row.gamma_db,
        "mean_mse": row.mean_mse,
        "std_err": row.std_err,
        "tanaka_mmse": row.tanaka_mmse,
        "smallest_fp_mmse": row.smallest_fp_mmse,
        "region": row.region.region,
        "nonconverged_trials": row.nonconverged_trials,
    }


def cmd_compare(args) -> None:
    try:
        text = Path(args.config_file).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    cfg = load_config(text)
    if args.seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "seed": args.seed})
    rows = [comparison_record(r) for r in run_grid(cfg, args.workers)]
    comments = [f"energy_base={cfg.energy_base}", f"seed={cfg.seed}", f"n={cfg.n}", f"trials={cfg.trials}"]
    _emit(args, rows, COMPARE_FIELDS, comments)


def build_parser() -> argparse.ArgumentParser:
    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--format", choices=("csv", "json"), default="csv")
    out.add_argument("--out", default=None, help="output path (default: stdout)")
    energy = argparse.ArgumentParser(add_help=False)
    energy.add_argument("--energy-base", choices=ENERGY_BASES, default="nats")
    workers = argparse.ArgumentParser(add_help=False)
    workers.add_argument("--workers", type=int, default=None)
    amp = argparse.ArgumentParser(add_help=False)
    amp.add_argument("--max-iters", type=int, default=200)
    amp.add_argument("--tol", type=float, default=1e-6)
    amp.add_argument("--damping", type=float, default=0.0)
    amp.add_argument("--row-normalize", action="store_true")

    parser = argparse.ArgumentParser(prog="csregions", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mmse", help="scalar-channel MMSE")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--snr-eff", type=float, required=True)
    p.set_defaults(func=cmd_mmse)

    p = sub.add_parser("fixed-points", parents=[out, energy], help="all fixed points at one channel")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma-db", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("surface", parents=[out, energy, workers], help="MMSE surface over (R, gamma)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--rate-min", type=float, required=True)
    p.add_argument("--rate-max", type=float, required=True)
    p.add_argument("--rate-steps", type=int, required=True)
    p.add_argument("--gamma-db-min", type=float, required=True)
    p.add_argument("--gamma-db-max", type=float, required=True)
    p.add_argument("--gamma-db-steps", type=int, required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("thresholds", parents=[out, energy], help="R_r, R_c, R_l, R_bp at given gamma")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--gamma-db", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("rbp-sweep", parents=[out], help="R_bp versus sparsity rate")
    p.add_argument("--p-list", nargs="+", required=True)
    p.add_argument("--gamma-db-ref", type=float, default=70.0)
    p.set_defaults(func=cmd_rbp_sweep)

    p = sub.add_parser("simulate", parents=[out, amp], help="AMP trials at one (R, gamma)")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--gamma-db", type=float, required=True)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact-sparsity", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", parents=[out, workers], help="AMP versus Tanaka over a config grid")
    p.add_argument("--config-file", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"csregions {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, RuntimeError, FloatingPointError) as exc:
        print(f"csregions {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
