"""Command line: ``drsys {iterate,free-energy,derivative,verify,question5}``.

Exit status is 0 on success, 1 when a verification check fails and 2 for
usage or configuration errors (including a missing spec file).
"""
from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .engine import DEFAULT_FLOAT_CAP, SupportOverflow, TailPolicy, iterate
from .experiments import (
    BASELINE_MU, default_lambda, mixture_mean_derivatives, p_grid,
)
from .io import fmt_exact, open_out, write_dist, write_json, write_table
from .model import ModelSpec, SpecError, load_spec, mix_initial, parse_number
from .observables import criticality_functional, free_energy_brackets
from .polymode import BudgetExceeded, derivative_table
from .verify import DEFAULT_SPEC, SUITES, any_failed, run_suites

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _spec(args) -> ModelSpec:
    if args.spec is None:
        return DEFAULT_SPEC
    path = Path(args.spec)
    if not path.is_file():
        raise FileNotFoundError(f"spec file not found: {path}")
    return load_spec(path)


def _mode_spec(args) -> tuple[ModelSpec, bool]:
    spec = _spec(args)
    if args.mode == "exact" and not spec.exact:
        raise UsageError("exact mode needs a finite star law and a rational p; use --mode float")
    return spec, args.mode == "float"


def _meta(args, spec: ModelSpec, **extra) -> dict:
    meta = {"drsys": __version__, "command": args.command,
            "spec": json.dumps(spec.to_json(), sort_keys=True), "mode": args.mode}
    meta.update(extra)
    return meta


def _emit(args, rows, columns, meta, exact_columns=()):
    with _sink(args.out) as out:
        if args.format == "json":
            write_json({"meta": meta, "rows": rows}, out)
        else:
            write_table(rows, columns, out, meta=meta, exact_columns=exact_columns)


@contextmanager
def _sink(path):
    fh = open_out(path)
    try:
        yield fh
    finally:
        if fh is not sys.stdout:
            fh.close()


# --- commands ----------------------------------------------------------------------

def cmd_iterate(args) -> int:
    spec, use_float = _mode_spec(args)
    n = args.n if args.n is not None else 5
    if n < 0:
        raise UsageError("--n must be >= 0")
    d0 = mix_initial(spec)
    kw = {}
    if use_float:
        d0 = d0.to_float()
        kw = {"cap": args.cap, "policy": TailPolicy(args.tail_policy)}
    laws = iterate(d0, spec.m, n, **kw)
    rows = []
    for j, d in enumerate(laws):
        g = criticality_functional(d, spec.m)
        rows.append({"n": j, "mean": d.mean(), "P0": d[0], "G": g.value, "sign": g.sign,
                     "support_max": d.support_max, "lumped_tail": d.lumped_tail})
    meta = _meta(args, spec, n=n, tail_policy=args.tail_policy if use_float else "reject")
    if args.out and args.format == "csv":
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        for j, d in enumerate(laws):
            with open(outdir / f"dist_n{j}.csv", "w", newline="") as fh:
                write_dist(d, fh, n=j, m=spec.m, p=fmt_exact(spec.p),
                           tail_policy=meta["tail_policy"])
        args = argparse.Namespace(**{**vars(args), "out": str(outdir / "moments.csv")})
    cols = ["n", "mean", "P0", "G", "sign", "support_max", "lumped_tail"]
    if args.format == "json":
        with _sink(args.out) as out:
            write_json({"meta": meta, "moments": rows,
                        "distributions": [d.as_dict() for d in laws]}, out)
        return EXIT_OK
    _emit(args, rows, cols, meta, exact_columns=("mean", "P0", "G"))
    return EXIT_OK


def cmd_free_energy(args) -> int:
    spec, use_float = _mode_spec(args)
    N = args.N if args.N is not None else 12
    if N < 0:
        raise UsageError("--N must be >= 0")
    kw = {"cap": args.cap, "policy": TailPolicy(args.tail_policy)} if use_float else {}
    if args.p_grid:
        try:
            grid = p_grid(args.p_grid)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rows = []
        for p in grid:
            b = free_energy_brackets(spec.with_p(p), N, float_mode=use_float, **kw)[-1]
            rows.append({"p": p, "N": N, "L": b.L, "U": b.U, "S_N": b.S})
        _emit(args, rows, ["p", "N", "L", "U", "S_N"], _meta(args, spec, grid=args.p_grid),
              exact_columns=("p", "L", "U", "S_N"))
        return EXIT_OK
    bs = free_energy_brackets(spec, N, float_mode=use_float, **kw)
    rows = [{"N": b.N, "L": b.L, "U": b.U, "S_N": b.S} for b in bs]
    _emit(args, rows, ["N", "L", "U", "S_N"], _meta(args, spec), exact_columns=("L", "U", "S_N"))
    return EXIT_OK


def cmd_derivative(args) -> int:
    spec = _spec(args)
    if not spec.star.exact:
        raise UsageError("derivatives need a finite star law with rational masses")
    N = args.N if args.N is not None else (args.n if args.n is not None else 6)
    k = args.k if args.k is not None else 3
    p0 = parse_number(args.p0) if args.p0 is not None else spec.p
    p0 = Fraction(str(p0)) if isinstance(p0, float) else p0
    rows = derivative_table(spec.m, spec.star, N, k, p0, max_generation=args.max_generation)
    rows = [{"n": r["n"], "k": r["k"], "p0": r["p0"], "value": r["dk_zero_mass"],
             "series_term": r["series_term"]} for r in rows]
    _emit(args, rows, ["n", "k", "p0", "value", "series_term"], _meta(args, spec, p0=fmt_exact(p0)),
          exact_columns=("value", "series_term"))
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = _spec(args)
    if args.m is not None and args.m != spec.m:
        spec = ModelSpec(args.m, spec.star, spec.p)
    suites = [s for s in (args.suite or "").split(",") if s] or None
    opts = {"samples": args.samples or 100_000, "seed": args.seed}
    for key in ("n", "k", "M", "N"):
        if getattr(args, key) is not None:
            opts[key] = getattr(args, key)
    if args.golden:
        opts["golden"] = args.golden
    try:
        results = run_suites(suites, spec, **opts)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    failed = any_failed(results)
    report = {"spec": spec.to_json(), "passed": not failed, "checks": [r.as_dict() for r in results]}
    with _sink(args.out) as out:
        if args.format == "csv":
            write_table([r.as_dict() for r in results], ["suite", "name", "status", "detail", "seconds"],
                        out, meta={"seed": args.seed})
        else:
            write_json(report, out)
    return EXIT_CHECK if failed else EXIT_OK


def cmd_question5(args) -> int:
    if args.spec:
        path = Path(args.spec)
        if not path.is_file():
            raise FileNotFoundError(f"spec file not found: {path}")
        cfg = json.loads(path.read_text())
        try:
            m = int(cfg.get("m", 2))
            mu, lam = cfg["mu"], cfg["lambda"]
        except KeyError as exc:
            raise SpecError(f"question5 spec needs 'mu' and 'lambda' ({exc.args[0]!r} missing)") from exc
    else:
        m, mu, lam = 2, BASELINE_MU, default_lambda(2)
    n = args.n if args.n is not None else 6
    try:
        grid = p_grid(args.p_grid or "0:1:11")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = mixture_mean_derivatives(m, mu, lam, n, grid, max_generation=args.max_generation)
    meta = {"drsys": __version__, "command": "question5", "m": m,
            "mu": json.dumps({str(k): fmt_exact(parse_number(v)) for k, v in mu.items()}),
            "lambda": json.dumps({str(k): fmt_exact(parse_number(v)) for k, v in lam.items()})}
    _emit(args, rows, ["n", "p", "dmean_dp"], meta, exact_columns=("p", "dmean_dp"))
    return EXIT_OK


COMMANDS = {
    "iterate": cmd_iterate,
    "free-energy": cmd_free_energy,
    "derivative": cmd_derivative,
    "verify": cmd_verify,
    "question5": cmd_question5,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="model spec JSON: {m, star, p}")
    common.add_argument("--mode", choices=("exact", "float"), default="exact")
    common.add_argument("--N", type=int, help="last generation for brackets / derivative tables")
    common.add_argument("--n", type=int, help="generation")
    common.add_argument("--k", type=int, help="derivative order")
    common.add_argument("--M", type=int, help="truncation level for the Delta sweep")
    common.add_argument("--m", type=int, help="override the branching number")
    common.add_argument("--p-grid", dest="p_grid", help="a:b:steps")
    common.add_argument("--p0", help="derivative base point (defaults to the spec's p)")
    common.add_argument("--samples", type=int, help="Monte Carlo sample count")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (directory for iterate CSV); stdout if absent")
    common.add_argument("--format", choices=("csv", "json"),
                        help="output format (default csv; json for verify)")
    common.add_argument("--suite", help=f"comma-separated subset of: {', '.join(SUITES)}")
    common.add_argument("--golden", help="golden-value JSON overriding the built-in table")
    common.add_argument("--cap", type=int, default=DEFAULT_FLOAT_CAP, help="float-mode support cap")
    common.add_argument("--tail-policy", dest="tail_policy", default=TailPolicy.LUMP_AT_CAP.value,
                        choices=[t.value for t in TailPolicy])
    common.add_argument("--max-generation", dest="max_generation", type=int,
                        help="override the symbolic-mode generation budget")

    parser = argparse.ArgumentParser(prog="drsys", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"drsys {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "iterate": "laws of X_0..X_n with moments and the criticality functional",
        "free-energy": "free-energy brackets (N, L, U, S_N), optionally over a p grid",
        "derivative": "exact d^k/dp^k P(X_n=0) and per-term series contributions",
        "verify": "run check suites and report pass/fail",
        "question5": "d/dp E(X_n) for a mixture of two critical laws",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "json" if args.command == "verify" else "csv"
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"drsys: {exc}", file=sys.stderr)
    except (UsageError, SpecError, BudgetExceeded, SupportOverflow, ValueError) as exc:
        print(f"drsys: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
