"""Command-line interface: analytic curves, Monte Carlo runs, comparisons.

Subcommands

    replica    analytic order parameters on an r grid
    simulate   Monte Carlo sweep of the finite-size optimizer
    compare    z-scores of a simulation against an analytic table
    phase      probability of the zero-variance (flat) phase on an r grid
    weights    analytic weight-distribution table, optionally with MC bins

Every output embeds its full run specification (a `# spec=` comment line
in CSV, a top-level "spec" object in JSON) so any row can be reproduced
from the file alone. The spec excludes --threads and --out on purpose:
outputs are byte-identical across thread counts.

Exit codes: 0 success, 2 malformed request, 3 solver failure. Ratios a
branch refuses (phase boundaries) are not errors: the row is emitted with
status "critical-boundary" and empty numerics.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import (
    ActiveSetError,
    CovarianceError,
    NoConvergenceError,
    PhaseBoundaryError,
)
from .mc import sweep
from .theory import (
    AssetUniverse,
    RegularizerParams,
    general_l1_solve,
    noshort_solution,
    unconstrained_solution,
)
from .weights import build_mixture

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3


class UsageError(ValueError):
    """Malformed request (bad grid, bad sigma spec, inconsistent flags)."""


def parse_r_grid(text: str) -> list[float]:
    """Grid syntax: 'lo:hi:step' (inclusive within 1e-9) or 'v1,v2,...'."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            lo, hi, step = (float(p) for p in parts)
            if step <= 0 or hi < lo:
                raise ValueError
            out = []
            k = 0
            while True:
                v = lo + k * step
                if v > hi + 1e-9:
                    break
                out.append(v)
                k += 1
            if not out:
                raise ValueError
        else:
            out = [float(p) for p in text.split(",") if p.strip()]
            if not out:
                raise ValueError
    except ValueError:
        raise UsageError(f"cannot parse r grid {text!r}") from None
    if any(not math.isfinite(v) or v <= 0 for v in out):
        raise UsageError("ratios must be positive and finite")
    return out


def parse_sigma(spec: str, n: int | None):
    """Sigma spec: const:<v> | file:<path> | lognormal:<mu>,<s>,<seed>.

    Returns (universe, resolved_sigmas_or_None). File universes resolve to
    an explicit list so the embedded spec stays self-contained.
    """
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise UsageError(f"bad sigma spec {spec!r}")
    if kind == "const":
        try:
            v = float(arg)
        except ValueError:
            raise UsageError(f"bad sigma constant {arg!r}") from None
        if not math.isfinite(v) or v <= 0:
            raise UsageError("sigma must be positive and finite")
        return AssetUniverse.constant(v, n if n else 100), None
    if kind == "file":
        try:
            with open(arg, "r", encoding="utf-8") as fh:
                vals = []
                for line in fh:
                    line = line.split("#", 1)[0].strip()
                    if line:
                        vals.append(float(line))
        except OSError as e:
            raise UsageError(f"cannot read sigma file: {e}") from None
        except ValueError:
            raise UsageError("sigma file must hold one decimal per line") from None
        if not vals:
            raise UsageError("sigma file is empty")
        if n is not None and n != len(vals):
            raise UsageError(
                f"--n {n} conflicts with sigma file of length {len(vals)}"
            )
        try:
            return AssetUniverse(tuple(vals)), [float(v) for v in vals]
        except ValueError as e:
            raise UsageError(str(e)) from None
    if kind == "lognormal":
        try:
            mu_s, s_s, seed_s = arg.split(",")
            mu, s, sd = float(mu_s), float(s_s), int(seed_s)
        except ValueError:
            raise UsageError(
                "lognormal sigma needs mu,s,seed (e.g. lognormal:0.0,0.5,7)"
            ) from None
        if s < 0:
            raise UsageError("lognormal spread must be nonnegative")
        return AssetUniverse.lognormal(mu, s, n if n else 100, sd), None
    raise UsageError(f"unknown sigma kind {kind!r}")


def _eta_value(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"bad penalty value {text!r}") from None


def _spec_eta(v: float):
    return "inf" if math.isinf(v) else v


def _fmt_csv(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_rows(out: str, spec: dict, fieldnames: list[str], rows: list[dict], fmt: str):
    """Serialize rows to CSV (spec comment + header) or JSON (spec + rows)."""
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("# spec=" + json.dumps(spec, sort_keys=True, separators=(",", ":")) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt_csv(row.get(f)) for f in fieldnames])
        text = buf.getvalue()
    else:
        payload = {"spec": spec, "rows": [{f: row.get(f) for f in fieldnames} for row in rows]}
        text = json.dumps(payload, indent=2) + "\n"
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def read_table(path: str):
    """Read a table written by write_rows; returns (spec, rows) with floats parsed."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("# spec="):
        lines = text.splitlines()
        spec = json.loads(lines[0][len("# spec="):])
        body = [ln for ln in lines[1:] if ln and not ln.startswith("#")]
        rows = []
        for raw in csv.DictReader(body):
            row = {}
            for key, val in raw.items():
                if val == "" or val is None:
                    row[key] = None
                elif val == "true":
                    row[key] = True
                elif val == "false":
                    row[key] = False
                else:
                    try:
                        row[key] = float(val)
                    except ValueError:
                        row[key] = val
            rows.append(row)
        return spec, rows
    data = json.loads(text)
    return data["spec"], data["rows"]


def _corner_reg(constraint: str, eta1, eta2) -> RegularizerParams:
    if eta1 is None and eta2 is None:
        if constraint == "equality":
            return RegularizerParams.none()
        return RegularizerParams.short_ban()
    return RegularizerParams(
        eta1 if eta1 is not None else 0.0,
        eta2 if eta2 is not None else 0.0,
    )


def _solve_point(universe, r: float, reg: RegularizerParams):
    if reg.eta1 == 0.0 and reg.eta2 == 0.0:
        return unconstrained_solution(universe, r)
    if reg.eta1 == 0.0 and reg.bans_shorts:
        return noshort_solution(universe, r)
    return general_l1_solve(universe, r, reg)


REPLICA_FIELDS = ["r", "lambda", "delta", "q0", "q0_tilde", "f", "n0", "status"]


def cmd_replica(args) -> int:
    grid = parse_r_grid(args.r_grid)
    universe, resolved = parse_sigma(args.sigma, args.n)
    reg = _corner_reg(args.constraint, args.eta1, args.eta2)
    spec = {
        "command": "replica",
        "r_grid": grid,
        "n": universe.n,
        "sigma": args.sigma,
        "constraint": args.constraint,
        "eta1": _spec_eta(reg.eta1),
        "eta2": _spec_eta(reg.eta2),
        "format": args.format,
    }
    if resolved is not None:
        spec["sigmas"] = resolved
    rows = []
    for r in grid:
        try:
            sol = _solve_point(universe, r, reg)
        except PhaseBoundaryError:
            rows.append(
                {"r": r, "lambda": None, "delta": None, "q0": None,
                 "q0_tilde": None, "f": None, "n0": None,
                 "status": "critical-boundary"}
            )
            continue
        rows.append(
            {"r": r, "lambda": sol.lam, "delta": sol.delta, "q0": sol.q0,
             "q0_tilde": sol.q0_tilde, "f": sol.free_energy, "n0": sol.n0,
             "status": "ok"}
        )
    write_rows(args.out, spec, REPLICA_FIELDS, rows, args.format)
    return EXIT_OK


SIMULATE_FIELDS = [
    "r_requested", "r", "t", "n", "trials",
    "lambda_hat_mean", "lambda_hat_se",
    "q0_tilde_hat_mean", "q0_tilde_hat_se",
    "zero_fraction_mean", "zero_fraction_se",
    "objective_mean", "objective_se",
    "zero_variance_probability", "zero_variance_se",
]


def _point_row(p) -> dict:
    return {
        "r_requested": p.r_requested,
        "r": p.r,
        "t": p.t,
        "n": p.n,
        "trials": p.trials,
        "lambda_hat_mean": p.lambda_hat_mean,
        "lambda_hat_se": p.lambda_hat_se,
        "q0_tilde_hat_mean": p.q0_tilde_hat_mean,
        "q0_tilde_hat_se": p.q0_tilde_hat_se,
        "zero_fraction_mean": p.zero_fraction_mean,
        "zero_fraction_se": p.zero_fraction_se,
        "objective_mean": p.objective_mean,
        "objective_se": p.objective_se,
        "zero_variance_probability": p.zero_variance_probability,
        "zero_variance_se": p.zero_variance_se,
    }


def cmd_simulate(args) -> int:
    if args.eta1 is not None or args.eta2 is not None:
        raise UsageError(
            "simulate only implements the equality and noshort corners; "
            "penalty values cannot be simulated"
        )
    grid = parse_r_grid(args.r_grid)
    universe, resolved = parse_sigma(args.sigma, args.n)
    spec = {
        "command": "simulate",
        "r_grid": grid,
        "n": universe.n,
        "trials": args.trials,
        "sigma": args.sigma,
        "constraint": args.constraint,
        "seed": args.seed,
        "format": args.format,
    }
    if resolved is not None:
        spec["sigmas"] = resolved
    summary = sweep(
        universe, grid, args.trials, constraint=args.constraint,
        seed=args.seed, threads=args.threads,
    )
    rows = [_point_row(p) for p in summary.points]
    write_rows(args.out, spec, SIMULATE_FIELDS, rows, args.format)
    return EXIT_OK


PHASE_FIELDS = [
    "r_requested", "r", "t", "n", "trials",
    "zero_variance_probability", "zero_variance_se",
]


def cmd_phase(args) -> int:
    grid = parse_r_grid(args.r_grid)
    universe, resolved = parse_sigma(args.sigma, args.n)
    spec = {
        "command": "phase",
        "r_grid": grid,
        "n": universe.n,
        "trials": args.trials,
        "sigma": args.sigma,
        "constraint": "noshort",
        "seed": args.seed,
        "format": args.format,
    }
    if resolved is not None:
        spec["sigmas"] = resolved
    summary = sweep(
        universe, grid, args.trials, constraint="noshort",
        seed=args.seed, threads=args.threads,
    )
    rows = [
        {
            "r_requested": p.r_requested,
            "r": p.r,
            "t": p.t,
            "n": p.n,
            "trials": p.trials,
            "zero_variance_probability": p.zero_variance_probability,
            "zero_variance_se": p.zero_variance_se,
        }
        for p in summary.points
    ]
    write_rows(args.out, spec, PHASE_FIELDS, rows, args.format)
    return EXIT_OK


WEIGHTS_FIELDS = [
    "r_requested", "r", "kind", "w_lo", "w_hi",
    "analytic_mass", "mc_mass", "status",
]


def cmd_weights(args) -> int:
    grid = parse_r_grid(args.r_grid)
    universe, resolved = parse_sigma(args.sigma, args.n)
    reg = _corner_reg(args.constraint, args.eta1, args.eta2)
    if args.trials > 0 and not (
        (reg.eta1, reg.eta2) == (0.0, 0.0) or (reg.eta1 == 0.0 and reg.bans_shorts)
    ):
        raise UsageError("Monte Carlo weight bins only exist for the corner constraints")
    bw = args.bin_width
    if bw <= 0:
        raise UsageError("bin width must be positive")
    spec = {
        "command": "weights",
        "r_grid": grid,
        "n": universe.n,
        "trials": args.trials,
        "sigma": args.sigma,
        "constraint": args.constraint,
        "eta1": _spec_eta(reg.eta1),
        "eta2": _spec_eta(reg.eta2),
        "seed": args.seed,
        "bin_width": bw,
        "format": args.format,
    }
    if resolved is not None:
        spec["sigmas"] = resolved
    rows = []
    for r_req in grid:
        pooled = None
        if args.trials > 0:
            summary = sweep(
                universe, [r_req], args.trials,
                constraint=args.constraint, seed=args.seed,
                threads=args.threads, keep_weights=True,
            )
            point = summary.points[0]
            pooled = point.weights
            r_here = point.r
        else:
            r_here = r_req
        try:
            sol = _solve_point(universe, r_here, reg)
        except PhaseBoundaryError:
            rows.append(
                {"r_requested": r_req, "r": r_here, "kind": "atom",
                 "w_lo": 0.0, "w_hi": 0.0, "analytic_mass": None,
                 "mc_mass": None, "status": "critical-boundary"}
            )
            continue
        mix = build_mixture(sol)
        a = np.array([l.center_pos for l in mix.laws])
        b = np.array([l.center_neg for l in mix.laws])
        s = np.array([l.spread for l in mix.laws])
        hi_w = float(np.max(a + 8.0 * s))
        lo_w = 0.0 if np.all(np.isinf(b)) else min(0.0, float(np.min(b - 8.0 * s)))
        mc_atom = None
        if pooled is not None:
            at_zero = np.abs(pooled) <= 1e-8
            mc_atom = float(np.mean(at_zero))
            live = pooled[~at_zero]
            if live.size:
                lo_w = min(lo_w, float(live.min()))
                hi_w = max(hi_w, float(live.max()))
        lo_k = math.floor(lo_w / bw)
        hi_k = max(math.ceil(hi_w / bw), lo_k + 1)
        edges = np.arange(lo_k, hi_k + 1) * bw
        mc_masses = [None] * (len(edges) - 1)
        if pooled is not None:
            counts, _ = np.histogram(pooled[~at_zero], bins=edges)
            mc_masses = list(counts / pooled.size)
        rows.append(
            {"r_requested": r_req, "r": r_here, "kind": "atom",
             "w_lo": 0.0, "w_hi": 0.0, "analytic_mass": sol.n0,
             "mc_mass": mc_atom, "status": "ok"}
        )
        for k in range(len(edges) - 1):
            lo_e, hi_e = float(edges[k]), float(edges[k + 1])
            rows.append(
                {"r_requested": r_req, "r": r_here, "kind": "bin",
                 "w_lo": lo_e, "w_hi": hi_e,
                 "analytic_mass": mix.bin_mass(lo_e, hi_e),
                 "mc_mass": (float(mc_masses[k]) if mc_masses[k] is not None else None),
                 "status": "ok"}
            )
    write_rows(args.out, spec, WEIGHTS_FIELDS, rows, args.format)
    return EXIT_OK


COMPARE_FIELDS = ["r", "metric", "analytic", "mc_mean", "mc_se", "z", "within_3se"]

# analytic column -> (simulation mean column, simulation SE column)
_COMPARE_METRICS = {
    "lambda": ("lambda_hat_mean", "lambda_hat_se"),
    "q0_tilde": ("q0_tilde_hat_mean", "q0_tilde_hat_se"),
    "n0": ("zero_fraction_mean", "zero_fraction_se"),
}


def _zscore(diff: float, se: float, ref: float) -> float:
    if se > 0:
        return abs(diff) / se
    return 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(ref)) else math.inf


def cmd_compare(args) -> int:
    spec_a, rows_a = read_table(args.analytic)
    spec_s, rows_s = read_table(args.simulation)
    ok_a = [row for row in rows_a if row.get("status") == "ok"]
    rows = []
    for srow in rows_s:
        r_s = srow.get("r")
        match = [row for row in ok_a if abs(row["r"] - r_s) <= 1e-9]
        if not match:
            raise UsageError(
                f"grid mismatch: no analytic row within 1e-9 of r = {r_s!r} "
                "(analytic tables must be evaluated on the simulation's "
                "achieved grid r = N/T)"
            )
        arow = match[0]
        for metric, (mcol, scol) in _COMPARE_METRICS.items():
            if arow.get(metric) is None or srow.get(mcol) is None:
                continue
            diff = srow[mcol] - arow[metric]
            z = _zscore(diff, srow[scol], arow[metric])
            rows.append(
                {"r": r_s, "metric": metric, "analytic": arow[metric],
                 "mc_mean": srow[mcol], "mc_se": srow[scol], "z": z,
                 "within_3se": bool(z <= 3.0)}
            )
    if not rows:
        raise UsageError("nothing to compare: no shared metrics on matching rows")
    n_pass = sum(1 for row in rows if row["within_3se"])
    verdict = "PASS" if n_pass == len(rows) else "FAIL"
    spec = {
        "command": "compare",
        "analytic_spec": spec_a,
        "simulation_spec": spec_s,
        "threshold": 3.0,
        "verdict": verdict,
        "format": args.format,
    }
    write_rows(args.out, spec, COMPARE_FIELDS, rows, args.format)
    if args.out != "-":
        print(f"{verdict}: {n_pass}/{len(rows)} metrics within 3 SE")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minvar",
        description="High-dimensional minimum-variance portfolios: "
        "analytic theory and Monte Carlo verification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials_default=None):
        p.add_argument("--r-grid", required=True,
                       help="'lo:hi:step' or comma list of N/T ratios")
        p.add_argument("--n", type=int, default=None,
                       help="number of assets (default 100; fixed by file sigmas)")
        p.add_argument("--sigma", default="const:1.0",
                       help="const:<v> | file:<path> | lognormal:<mu>,<s>,<seed>")
        p.add_argument("--out", default="-", help="output path ('-' = stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if trials_default is not None:
            p.add_argument("--trials", type=int, default=trials_default)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--threads", type=int, default=1)

    p_rep = sub.add_parser("replica", help="analytic order parameters on an r grid")
    common(p_rep)
    p_rep.add_argument("--constraint", choices=("equality", "noshort"), default="noshort")
    p_rep.add_argument("--eta1", type=_eta_value, default=None,
                       help="penalty per unit positive weight")
    p_rep.add_argument("--eta2", type=_eta_value, default=None,
                       help="penalty per unit negative weight ('inf' bans shorts)")
    p_rep.set_defaults(func=cmd_replica)

    p_sim = sub.add_parser("simulate", help="Monte Carlo sweep of the optimizer")
    common(p_sim, trials_default=100)
    p_sim.add_argument("--constraint", choices=("equality", "noshort"), default="noshort")
    p_sim.add_argument("--eta1", type=_eta_value, default=None, help=argparse.SUPPRESS)
    p_sim.add_argument("--eta2", type=_eta_value, default=None, help=argparse.SUPPRESS)
    p_sim.set_defaults(func=cmd_simulate)

    p_phase = sub.add_parser("phase", help="zero-variance phase probability curve")
    common(p_phase, trials_default=200)
    p_phase.set_defaults(func=cmd_phase)

    p_w = sub.add_parser("weights", help="weight-distribution table")
    common(p_w, trials_default=0)
    p_w.add_argument("--constraint", choices=("equality", "noshort"), default="noshort")
    p_w.add_argument("--eta1", type=_eta_value, default=None)
    p_w.add_argument("--eta2", type=_eta_value, default=None)
    p_w.add_argument("--bin-width", type=float, default=0.05)
    p_w.set_defaults(func=cmd_weights)

    p_cmp = sub.add_parser("compare", help="z-scores of simulation vs analytic table")
    p_cmp.add_argument("analytic", help="table written by 'replica'")
    p_cmp.add_argument("simulation", help="table written by 'simulate'")
    p_cmp.add_argument("--out", default="-")
    p_cmp.add_argument("--format", choices=("csv", "json"), default="csv")
    p_cmp.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoConvergenceError, ActiveSetError, CovarianceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
