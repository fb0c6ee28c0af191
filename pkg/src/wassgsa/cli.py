"""Command-line front end.

Commands: ``estimate`` (precomputed design file), ``toy``, ``gremaud``,
``second-level`` and ``calibrate``. Each run writes one row per
(index set, replication) as CSV or JSON. A key-value file given with
``--config`` supplies the same options; flags on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .designio import fmt, load_design
from .errors import DesignFormatError, GSAError
from .estimators import PickFreezeDesign, pick_freeze_estimate, rank_estimate, ustat_estimate
from .indices import family_by_name, family_quantile_eval, family_wasserstein_ball
from .models import (
    TOY_SETS,
    gremaud_inputs,
    gremaud_rows,
    toy_frechet_indices,
    toy_ideal_outputs,
    toy_inputs,
    toy_stochastic_code,
    toy_wball_indices,
)
from .second_level import GREMAUD_SETS, PRIORS, gremaud_problem, second_level_gsa
from .stochastic import (
    WORKERS_ENV,
    CalibrationWarning,
    calibrate_n,
    direct_gsa,
    normalize_method,
    stochastic_gsa,
)

COLUMNS = ["command", "method", "u", "N", "n", "replication", "estimate", "numerator",
           "denominator", "seed", "wall_time", "error"]


def replication_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(r,)).generate_state(1)[0])


def parse_u(text: str) -> tuple[int, ...]:
    """``"13"``, ``"1,3"`` and ``"{1,3}"`` all mean the set {1, 3}."""
    body = text.strip().strip("{}")
    parts = body.split(",") if "," in body else list(body)
    try:
        u = tuple(sorted({int(p) for p in parts if p.strip()}))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad index set {text!r}") from None
    if not u:
        raise argparse.ArgumentTypeError("empty index set")
    return u


def u_label(u: Sequence[int]) -> str:
    return "{" + ",".join(str(i) for i in u) + "}"


# --- tasks (top level so worker processes can pickle them) ---------------------


def _estimate_row(task: dict) -> dict:
    kind = task["kind"]
    u = tuple(task["u"])
    row = {"command": task["command"], "method": task["method"], "u": u_label(u), "N": task["N"],
           "n": task.get("n", ""), "replication": task["r"], "seed": task["seed"]}
    start = time.perf_counter()
    try:
        if kind == "toy":
            est = _toy_estimate(task, u)
        elif kind == "gremaud":
            est = direct_gsa(gremaud_rows, gremaud_inputs(), u, family_by_name(task["family"]),
                             task["N"], task["method"], task["seed"], task.get("budget"))
        elif kind == "second-level":
            prob = gremaud_problem(task["prior"], task["N"], task["n"])
            est = second_level_gsa(prob, u, family_wasserstein_ball(), task["method"], task["seed"], task.get("budget"))
        else:
            raise ValueError(f"unknown task kind {kind!r}")
        row.update(estimate=est.value, numerator=est.numerator, denominator=est.denominator, error="")
    except GSAError as exc:
        row.update(estimate=math.nan, numerator=math.nan, denominator=math.nan,
                   error=f"{type(exc).__name__}: {exc}")
    row["wall_time"] = time.perf_counter() - start
    if "analytic" in task:
        a = task["analytic"][u]
        row["analytic"] = a
        row["sq_error"] = (row["estimate"] - a) ** 2
    return row


def _toy_estimate(task: dict, u):
    p = task["p"]
    fam = family_quantile_eval() if task["index"] == "frechet" else family_wasserstein_ball()
    if task["n"] == 0:
        return direct_gsa(toy_ideal_outputs, toy_inputs(p), u, fam, task["N"], task["method"], task["seed"])
    return stochastic_gsa(toy_stochastic_code(), toy_inputs(p), u, fam, task["N"], task["n"],
                          task["method"], task["seed"])


def _run_tasks(tasks: list[dict]) -> list[dict]:
    workers = max(1, int(os.environ.get(WORKERS_ENV, "1") or 1))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_estimate_row, tasks))
    return [_estimate_row(t) for t in tasks]


# --- commands -----------------------------------------------------------------


def _check_method(method: str, sets: Sequence[Sequence[int]]) -> str:
    m = normalize_method(method)
    if m == "Rank" and any(len(u) != 1 for u in sets):
        raise DesignFormatError("method rank only supports first-order index sets", column="u")
    return method


def cmd_estimate(args) -> list[dict]:
    design = load_design(args.design)
    fam = family_by_name(args.family)
    method = normalize_method(args.method)
    row = {"command": "estimate", "method": args.method, "u": args.label, "N": len(design.z), "n": "",
           "replication": 0, "seed": args.seed}
    start = time.perf_counter()
    try:
        if method == "PickFreeze":
            if not isinstance(design, PickFreezeDesign):
                raise DesignFormatError("method pf needs a z,z_pf design")
            est = pick_freeze_estimate(design, fam, budget=args.budget, seed=args.seed)
        elif method == "UStat":
            if not isinstance(design, PickFreezeDesign):
                raise DesignFormatError("method ustat needs a z,z_pf design")
            est = ustat_estimate(design, fam, budget=args.budget, seed=args.seed)
        else:
            if isinstance(design, PickFreezeDesign):
                raise DesignFormatError("method rank needs an x,z design")
            est = rank_estimate(design, fam, budget=args.budget, seed=args.seed)
        row.update(estimate=est.value, numerator=est.numerator, denominator=est.denominator, error="")
    except GSAError as exc:
        if isinstance(exc, DesignFormatError):
            raise
        row.update(estimate=math.nan, numerator=math.nan, denominator=math.nan,
                   error=f"{type(exc).__name__}: {exc}")
    row["wall_time"] = time.perf_counter() - start
    return [row]


def cmd_toy(args) -> list[dict]:
    sets = args.u or [u for u in TOY_SETS if len(u) == 1]
    _check_method(args.method, sets)
    oracle = toy_frechet_indices(args.p) if args.index == "frechet" else toy_wball_indices(args.p)
    tasks = [dict(kind="toy", command="toy", method=args.method, u=u, N=args.N, n=args.n, r=r,
                  seed=replication_seed(args.seed, r), p=tuple(args.p), index=args.index, analytic=oracle)
             for r in range(args.R) for u in sets]
    rows = _run_tasks(tasks)
    if args.R > 1:
        for u in sets:
            errs = [row["sq_error"] for row in rows if row["u"] == u_label(u)]
            print(f"{u_label(u)} analytic={oracle[tuple(u)]:.6f} median_sq_error={np.nanmedian(errs):.3e} "
                  f"mean_sq_error={np.nanmean(errs):.3e}", file=sys.stderr)
    return rows


def cmd_gremaud(args) -> list[dict]:
    sets = args.u or list(GREMAUD_SETS)
    _check_method(args.method, sets)
    tasks = [dict(kind="gremaud", command="gremaud", method=args.method, u=u, N=args.N, r=r,
                  seed=replication_seed(args.seed, r), family=args.family, budget=args.budget)
             for r in range(args.R) for u in sets]
    return _run_tasks(tasks)


def cmd_second_level(args) -> list[dict]:
    if args.model != "gremaud":
        raise DesignFormatError(f"unknown model {args.model!r}", column="model")
    sets = args.u or list(GREMAUD_SETS)
    _check_method(args.method, sets)
    tasks = [dict(kind="second-level", command="second-level", method=args.method, u=u, N=args.N, n=args.n,
                  r=r, seed=replication_seed(args.seed, r), prior=args.prior, budget=args.budget)
             for r in range(args.R) for u in sets]
    return _run_tasks(tasks)


def cmd_calibrate(args) -> list[dict]:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CalibrationWarning)
        n = calibrate_n(args.N, args.regime, b_minus_a=args.b_minus_a, sigma=args.sigma,
                        const=args.const, ceiling=args.ceiling)
    flagged = any(issubclass(w.category, CalibrationWarning) for w in caught)
    print(n)
    return [{"command": "calibrate", "N": args.N, "regime": args.regime, "n": n,
             "warning": "fallback rule n = N^2" if flagged else ""}]


# --- output -------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def write_rows(rows: list[dict], fh, fmt_name: str, timestamp: bool) -> None:
    if not timestamp:
        rows = [{k: v for k, v in row.items() if k != "wall_time"} for row in rows]
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    ordered = [k for k in COLUMNS if k in keys] + [k for k in keys if k not in COLUMNS]
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if fmt_name == "json":
        doc = {"rows": [{k: _json_value(row.get(k, "")) for k in ordered} for row in rows]}
        if timestamp:
            doc = {"generated": stamp, **doc}
        fh.write(json.dumps(doc, indent=2) + "\n")
        return
    if timestamp:
        fh.write(f"# generated {stamp} by wassgsa {__version__}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ordered)
    for row in rows:
        w.writerow([_cell(row.get(k, "")) for k in ordered])


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


# --- argument parsing ----------------------------------------------------------


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonnegative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wassgsa", description="Sensitivity analysis for distribution-valued codes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key = value file supplying any of the options below")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", "-o", help="result file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp header and the wall_time column")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="estimate an index from a design file")
    p.add_argument("--design", required=True)
    p.add_argument("--family", default="sobol", choices=("sobol", "cvm", "wball", "quantile"))
    p.add_argument("--method", default="pf")
    p.add_argument("--budget", type=_positive)
    p.add_argument("--label", default="", help="value of the u column")

    p = sub.add_parser("toy", parents=[common], help="toy model with uniform output laws")
    p.add_argument("--p", type=float, nargs=3, default=[1 / 3, 2 / 3, 3 / 4], metavar=("P1", "P2", "P3"))
    p.add_argument("--index", choices=("frechet", "wball"), default="frechet")
    p.add_argument("--method", default="rank")
    p.add_argument("--u", type=parse_u, nargs="+")
    p.add_argument("--N", type=_positive, default=450)
    p.add_argument("--n", type=_nonnegative, default=0, help="draws per output law; 0 uses the exact law")
    p.add_argument("--R", type=_positive, default=1)

    p = sub.add_parser("gremaud", parents=[common], help="direct analysis of the Gremaud model")
    p.add_argument("--family", default="cvm", choices=("sobol", "cvm"))
    p.add_argument("--method", default="pf")
    p.add_argument("--u", type=parse_u, nargs="+")
    p.add_argument("--N", type=_positive, default=10_000)
    p.add_argument("--R", type=_positive, default=1)
    p.add_argument("--budget", type=_positive)

    p = sub.add_parser("second-level", parents=[common], help="sensitivity to the input laws")
    p.add_argument("--model", default="gremaud")
    p.add_argument("--prior", choices=sorted(PRIORS), default="tight")
    p.add_argument("--method", default="pf")
    p.add_argument("--u", type=parse_u, nargs="+")
    p.add_argument("--N", type=_positive, default=500)
    p.add_argument("--n", type=_positive, default=500)
    p.add_argument("--R", type=_positive, default=1)
    p.add_argument("--budget", type=_positive)

    p = sub.add_parser("calibrate", parents=[common], help="approximation size n for a given N")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--regime", required=True,
                   choices=("uniform_support", "log_concave", "gaussian_mixture", "generic"))
    p.add_argument("--b-minus-a", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--const", type=float)
    p.add_argument("--ceiling", type=int, default=10**12)
    return parser


def config_to_argv(path) -> list[str]:
    """Translate a key-value file into command-line arguments.

    ``command`` selects the subcommand; every other key becomes ``--key``.
    Values holding several items are separated by whitespace; ``true`` turns
    a key into a bare flag.
    """
    command = None
    rest: list[str] = []
    flags = {"no_timestamp", "no-timestamp"}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DesignFormatError(f"cannot read config: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DesignFormatError("expected key = value", row=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DesignFormatError("missing key", row=lineno)
        if key == "command":
            command = value
            continue
        opt = "--" + key.replace("_", "-")
        if key in flags:
            if value.lower() not in ("true", "false"):
                raise DesignFormatError(f"flag expects true or false, got {value!r}", row=lineno, column=key)
            if value.lower() == "true":
                rest.append(opt)
            continue
        if not value:
            raise DesignFormatError("missing value", row=lineno, column=key)
        rest.append(opt)
        rest.extend(value.split())
    if command is None:
        raise DesignFormatError("config does not set command")
    return [command] + rest


COMMANDS = {
    "estimate": cmd_estimate,
    "toy": cmd_toy,
    "gremaud": cmd_gremaud,
    "second-level": cmd_second_level,
    "calibrate": cmd_calibrate,
}


def _error_record(exc: BaseException) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("row", "column", "required_n"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    return json.dumps(rec)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise DesignFormatError("--config needs a path")
            from_file = config_to_argv(argv[i + 1])
            extra = argv[:i] + argv[i + 2:]
            # flags given on the command line come last and therefore win
            if extra and extra[0] in COMMANDS:
                extra = extra[1:]
            argv = from_file + extra
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        rows = COMMANDS[args.command](args)
        if args.command == "calibrate" and args.output is None:
            return 0
        if args.output:
            with open(args.output, "w", newline="") as fh:
                write_rows(rows, fh, args.format, not args.no_timestamp)
        else:
            write_rows(rows, sys.stdout, args.format, not args.no_timestamp)
        return 0
    except DesignFormatError as exc:
        print(_error_record(exc), file=sys.stderr)
        return 2
    except (GSAError, OSError, ValueError) as exc:
        print(_error_record(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
