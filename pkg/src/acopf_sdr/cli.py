"""Command-line front end: ``acopf-sdr {info,build,solve,check,gap}``.

Exit codes:

====  ==========================================================
0     success (``solve``: status optimal)
1     I/O error or manifest mismatch
2     usage or case error (bad file, disconnected network, ...)
3     iteration limit reached (table code ``M``)
4     infeasibility certificate (table code ``I``)
5     numerical error (table code ``N``)
6     unboundedness certificate
====  ==========================================================

Defaults may be set in an INI file (``--config`` or ``ACOPF_SDR_CONFIG``)
under an ``[acopf-sdr]`` section, with keys named after the long options
(``tol = 1e-7``, ``merge-max-block = 8``, ``scale = false``). Bare case
names are looked up in ``$ACOPF_SDR_CASES`` and then among the bundled
cases.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .caseio import CaseData, CaseError, PreprocessOptions, load_case, preprocess
from .chordal import (
    ChordalDecomposition,
    chordal_extension,
    clique_stats,
    convert,
    herm_to_sym,
    merge_cliques,
    pattern_from_lp,
)
from .conesolve import SolverOptions, Status, solve
from .diagnostics import dimacs, gap, recover_voltages, report, select_low_rank
from .formats import ExportManifest, SolutionFileError, read_solution, save_cbf, write_solution
from .relax import ConeLP, build_clp

ENV_CASES = "ACOPF_SDR_CASES"
ENV_CONFIG = "ACOPF_SDR_CONFIG"

EXIT_OK = 0
EXIT_IO = 1
EXIT_CASE = 2
EXIT_CODES = {
    Status.OPTIMAL: 0,
    Status.MAX_ITERS: 3,
    Status.INFEASIBLE: 4,
    Status.NUMERICAL_ERROR: 5,
    Status.UNBOUNDED: 6,
}
TABLE_CODES = {
    Status.OPTIMAL: "",
    Status.MAX_ITERS: "M",
    Status.INFEASIBLE: "I",
    Status.NUMERICAL_ERROR: "N",
    Status.UNBOUNDED: "U",
}


@dataclass
class RunConfig:
    case: str = ""
    merge_max_block: int = 5
    merge: bool = True
    ordering: str = "amd"
    convert: bool = True
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    upper: float | None = None
    select_low_rank: bool = False

    def __post_init__(self):
        if self.merge_max_block < 1:
            raise ValueError("--merge-max-block must be at least 1")
        if self.ordering not in ("amd", "rcm", "natural"):
            raise ValueError(f"unknown ordering {self.ordering!r}")


@dataclass
class Pipeline:
    """Every stage of one case, with the preprocessing wall time."""

    name: str
    case: CaseData
    lp: ConeLP
    problem: ConeLP
    decomposition: ChordalDecomposition | None
    preprocess_time: float


def resolve_case(name: str) -> Path | str:
    p = Path(name)
    if p.exists():
        return p
    corpus = os.environ.get(ENV_CASES)
    if corpus and p.parent == Path("."):
        for cand in (Path(corpus) / p.name, Path(corpus) / (p.name + ".m")):
            if cand.exists():
                return cand
    return name


def build_pipeline(cfg: RunConfig) -> Pipeline:
    """Parse, preprocess, build, decompose, convert and symmetrise."""
    t0 = time.perf_counter()
    try:
        raw = load_case(resolve_case(cfg.case))
    except FileNotFoundError as exc:
        raise CaseError(str(exc)) from None
    case = preprocess(raw, cfg.preprocess)
    lp = build_clp(case)
    dec = None
    if cfg.convert:
        dec = chordal_extension(pattern_from_lp(lp), cfg.ordering)
        if cfg.merge:
            dec = merge_cliques(dec, cfg.merge_max_block)
        problem: ConeLP = herm_to_sym(convert(lp, dec))
    else:
        problem = herm_to_sym(lp)
    return Pipeline(
        name=Path(cfg.case).stem,
        case=case,
        lp=lp,
        problem=problem,
        decomposition=dec,
        preprocess_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_info(cfg: RunConfig, as_json: bool = False) -> tuple[dict, int]:
    pipe = build_pipeline(cfg)
    counts = pipe.lp.counts
    out = {
        "case": pipe.name,
        "n_bus": pipe.case.n_bus,
        "n_gen": len(pipe.case.generators),
        "n_branch": len(pipe.case.branches),
        "N": pipe.lp.N,
        "M": pipe.lp.M,
        "n_l": counts.n_l,
        "n_q": counts.n_q,
        "converted_N": pipe.problem.N,
        "converted_M": pipe.problem.M,
        "clique_stats": clique_stats(pipe.decomposition) if pipe.decomposition else None,
        "preprocess_time": pipe.preprocess_time,
    }
    if as_json:
        print(json.dumps(out, indent=1))
    else:
        print(f"case {out['case']}: {out['n_bus']} buses, {out['n_gen']} generators, {out['n_branch']} branches")
        print(f"N = {out['N']}  M = {out['M']}  n_l = {out['n_l']}  n_q = {out['n_q']}")
        print(f"converted: N = {out['converted_N']}  M = {out['converted_M']}")
        cs = out["clique_stats"]
        if cs:
            print(
                f"cliques: {cs['count']}  max size {cs['max']}  coupling rows {cs['coupling_rows']}"
                f"  histogram {cs['histogram']}"
            )
    return out, EXIT_OK


def cmd_build(cfg: RunConfig, output: Path) -> tuple[dict, int]:
    pipe = build_pipeline(cfg)
    cbf, manifest = save_cbf(pipe.problem, output)
    print(f"wrote {cbf} and {manifest} (N = {pipe.problem.N}, M = {pipe.problem.M})")
    return {"cbf": str(cbf), "manifest": str(manifest)}, EXIT_OK


def run_solve(cfg: RunConfig, export: Path | None = None, save: Path | None = None) -> dict:
    """Full pipeline through the internal solver; returns the JSON report."""
    pipe = build_pipeline(cfg)
    if export is not None:
        save_cbf(pipe.problem, export)
    sol = solve(pipe.problem, cfg.solver)
    if save is not None:
        write_solution(sol, save)
    rep = report(pipe.name, pipe.problem, sol, upper=cfg.upper, dec=pipe.decomposition)
    if cfg.select_low_rank and max(rep["dimacs"]["err_primal_res"], rep["dimacs"]["err_gap"]) <= 1e-6:
        sel = select_low_rank(pipe.problem, sol)
        low = recover_voltages(pipe.problem, sel.x).to_dict()
        base = rep["recovery"]
        if base is None or low["max_ratio"] < base["max_ratio"]:
            rep["recovery"] = {**low, "face": sel.info["face"]}
    rep["time"] = {"preprocess": pipe.preprocess_time, "solve": sol.solve_time}
    rep["exit_code"] = EXIT_CODES[sol.status]
    rep["code"] = TABLE_CODES[sol.status]
    return rep


def _solve_job(args: tuple) -> dict:
    cfg, export, save = args
    try:
        return run_solve(cfg, export, save)
    except CaseError as exc:
        return {"case": cfg.case, "error": str(exc), "exit_code": EXIT_CASE}


def _fmt_cost(v: float) -> str:
    return f"{v:.3e}" if math.isfinite(v) else "—"


def print_report(rep: dict) -> None:
    if "error" in rep:
        print(f"{rep['case']}: {rep['error']}")
        return
    d = rep["dimacs"]
    print(f"case {rep['case']}  N = {rep['N']}  M = {rep['M']}  status {rep['status']} {rep['code']}".rstrip())
    print(
        f"  objective lower {rep['objective_lower']:.8g}  primal {rep['objective_primal']:.8g}"
        f"  iterations {rep['iterations']}"
    )
    print(
        "  dimacs  "
        + "  ".join(
            f"{k[4:]} {d[k]:.1e}"
            for k in ("err_primal_res", "err_primal_cone", "err_dual_res", "err_dual_cone", "err_gap")
        )
    )
    g = rep["gap"]
    print(f"  cost {_fmt_cost(rep['objective_lower'])}  gap {g['text']}")
    rec = rep.get("recovery")
    if rec:
        line = f"  recovery {rec['status']}  max l2/l1 {rec['max_ratio']:.1e}"
        if "residuals" in rec:
            line += f"  balance {rec['residuals']['balance']:.1e}"
        print(line)
    t = rep["time"]
    print(f"  time {t['solve']:.2f} s (preprocessing {t['preprocess']:.2f} s)")


def cmd_solve(
    cfgs: list[RunConfig], jobs: int = 1, export: Path | None = None, save: Path | None = None,
    out: Path | None = None,
) -> tuple[list[dict], int]:
    if len(cfgs) > 1 and (export or save):
        raise ValueError("--export and --save-solution take a single case")
    args = [(c, export, save) for c in cfgs]
    if jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reps = list(pool.map(_solve_job, args))
    else:
        reps = [run_solve(*a) if len(cfgs) == 1 else _solve_job(a) for a in args]
    for rep in reps:
        print_report(rep)
    if out is not None:
        out.write_text(json.dumps(reps[0] if len(reps) == 1 else reps, indent=1))
    return reps, max(r["exit_code"] for r in reps)


def cmd_check(cfg: RunConfig, solution: Path, manifest: Path | None = None) -> tuple[dict, int]:
    pipe = build_pipeline(cfg)
    man = None
    if manifest is not None:
        man = ExportManifest.from_json(manifest.read_text(encoding="utf-8"))
    sol = read_solution(solution, pipe.problem, man)
    rep = dimacs(pipe.problem, sol)
    for k, v in rep.to_dict().items():
        print(f"{k:16s} {v: .3e}")
    print(f"{'objective':16s} {sol.objective_primal:.10g}")
    return {**rep.to_dict(), "objective_primal": sol.objective_primal}, EXIT_OK


def cmd_gap(lower: float, upper: float | None, name: str = "") -> tuple[dict, int]:
    g = gap(lower, upper)
    cost = _fmt_cost(upper) if upper is not None else "—"
    print(f"{name or 'case':20s} {cost:>10s} {_fmt_cost(lower):>10s} {g.text:>7s}")
    return g.to_dict(), EXIT_OK


# ---------------------------------------------------------------------------
# Argument handling


def _config_defaults(path: str | None) -> dict:
    path = path or os.environ.get(ENV_CONFIG)
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"config file not found: {path}")
    if "acopf-sdr" not in cp:
        return {}
    sec = cp["acopf-sdr"]
    conv = {
        "tol": sec.getfloat,
        "max-iters": sec.getint,
        "merge-max-block": sec.getint,
        "scale": sec.getboolean,
        "merge": sec.getboolean,
        "method": sec.get,
        "ordering": sec.get,
        "jobs": sec.getint,
        "upper": sec.getfloat,
    }
    out = {}
    for key in sec:
        if key not in conv:
            raise ValueError(f"unknown config key {key!r}")
        out[key.replace("-", "_")] = conv[key](key)
    return out


def _common(p: argparse.ArgumentParser, d: dict) -> None:
    p.add_argument("--no-merge", dest="merge", action="store_false", default=d.get("merge", True),
                   help="keep the maximal cliques unmerged")
    p.add_argument("--merge-max-block", type=int, default=d.get("merge_max_block", 5),
                   help="largest block a merge may create")
    p.add_argument("--ordering", choices=("amd", "rcm", "natural"), default=d.get("ordering", "amd"))
    p.add_argument("--unconverted", dest="convert", action="store_false",
                   help="keep one PSD block of full order")
    p.add_argument("--bound-cap", type=float, default=PreprocessOptions.bound_cap_multiple,
                   help="clamp generator bounds to this many p.u.")


def make_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    """Argument parser; ``defaults`` come from the config file."""
    d = defaults or {}
    ap = argparse.ArgumentParser(prog="acopf-sdr", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="INI file with an [acopf-sdr] section")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="counts and clique statistics, no solve")
    p.add_argument("case")
    p.add_argument("--json", action="store_true")
    _common(p, d)

    p = sub.add_parser("build", help="export the converted problem to CBF")
    p.add_argument("case")
    p.add_argument("-o", "--output", type=Path, required=True)
    _common(p, d)

    p = sub.add_parser("solve", help="build and solve with the internal solver")
    p.add_argument("case", nargs="+")
    p.add_argument("--tol", type=float, default=d.get("tol", 1e-6))
    p.add_argument("--max-iters", type=int, default=d.get("max_iters"))
    p.add_argument("--method", choices=("ipm", "admm"), default=d.get("method", "ipm"))
    p.add_argument("--scale", action=argparse.BooleanOptionalAction, default=d.get("scale", True))
    p.add_argument("--upper", type=float, default=d.get("upper"), help="upper bound for the gap")
    p.add_argument("--export", type=Path, default=None, help="also write CBF and manifest")
    p.add_argument("--save-solution", type=Path, default=None)
    p.add_argument("--report", type=Path, default=None, help="JSON report path")
    p.add_argument("--select-low-rank", action="store_true",
                   help="favour a low-trace near-optimal point before recovery")
    p.add_argument("--jobs", type=int, default=d.get("jobs", 1))
    _common(p, d)

    p = sub.add_parser("check", help="DIMACS measures of a solution file")
    p.add_argument("case")
    p.add_argument("solution", type=Path)
    p.add_argument("--manifest", type=Path, default=None)
    _common(p, d)

    p = sub.add_parser("gap", help="optimality gap of a solve report")
    p.add_argument("report", type=Path, nargs="?")
    p.add_argument("--lower", type=float, default=None)
    p.add_argument("--upper", type=float, default=None)
    return ap


def _run_config(args: argparse.Namespace, case: str) -> RunConfig:
    solver = SolverOptions()
    if args.command == "solve":
        tol = args.tol
        solver = SolverOptions(
            eps_primal=tol,
            eps_dual=tol,
            eps_gap=tol,
            max_iters=args.max_iters or (100 if args.method == "ipm" else 20000),
            method=args.method,
            scale=args.scale,
        )
    return RunConfig(
        case=case,
        merge_max_block=args.merge_max_block,
        merge=args.merge,
        ordering=args.ordering,
        convert=args.convert,
        preprocess=PreprocessOptions(bound_cap_multiple=args.bound_cap),
        solver=solver,
        upper=getattr(args, "upper", None),
        select_low_rank=getattr(args, "select_low_rank", False),
    )


def main(argv: list[str] | None = None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        defaults = _config_defaults(known.config)
    except (OSError, ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CASE
    args = make_parser(defaults).parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    try:
        if args.command == "gap":
            lower, name = args.lower, ""
            if args.report is not None:
                rep = json.loads(args.report.read_text(encoding="utf-8"))
                lower, name = rep["objective_lower"], rep.get("case", "")
                if args.upper is None:
                    args.upper = rep.get("gap", {}).get("upper")
            if lower is None:
                print("error: give a report or --lower", file=sys.stderr)
                return EXIT_CASE
            return cmd_gap(lower, args.upper, name)[1]
        if args.command == "solve":
            cfgs = [_run_config(args, c) for c in args.case]
            return cmd_solve(cfgs, args.jobs, args.export, args.save_solution, args.report)[1]
        cfg = _run_config(args, args.case)
        if args.command == "info":
            return cmd_info(cfg, args.json)[1]
        if args.command == "build":
            return cmd_build(cfg, args.output)[1]
        return cmd_check(cfg, args.solution, args.manifest)[1]
    except CaseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CASE
    except (SolutionFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CASE


if __name__ == "__main__":
    sys.exit(main())
