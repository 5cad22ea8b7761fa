"""Regenerate the committed reference solutions in tests/data/reference.

Needs the third-party ``clarabel`` solver, which the package itself does
not import. Each case is solved in both the primal and the dual embedding;
the primal point is then projected alternately onto the affine set and the
cone, the dual is polished by a least-squares step, and the candidate with
the smallest worst DIMACS measure is written.

    python3 scripts/make_reference.py case9 case1354pegase
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import clarabel
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from acopf_sdr.cli import RunConfig, build_pipeline
from acopf_sdr.conesolve import ConeProjector, Solution, Status
from acopf_sdr.diagnostics import dimacs
from acopf_sdr.formats import write_solution

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "reference"


def triangle_perm(lp) -> np.ndarray:
    """Map from clarabel's PSD triangle order to our svec slots."""
    perm = np.arange(lp.N)
    off = lp.x_start
    for r in lp.cones.psd:
        slots = [j * (2 * r - j + 1) // 2 + (i - j) for i in range(r) for j in range(i + 1)]
        perm[off : off + len(slots)] = off + np.array(slots)
        off += len(slots)
    return perm


def clarabel_cones(lp, zero: int = 0) -> list:
    cones = [clarabel.ZeroConeT(zero)] if zero else []
    if lp.cones.nonneg:
        cones.append(clarabel.NonnegativeConeT(lp.cones.nonneg))
    cones += [clarabel.SecondOrderConeT(3) for _ in lp.cones.soc]
    cones += [clarabel.PSDTriangleConeT(r) for r in lp.cones.psd]
    return cones


def settings() -> clarabel.DefaultSettings:
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.tol_gap_abs = s.tol_gap_rel = s.tol_feas = 1e-10
    s.tol_ktratio = 1e-8
    s.max_iter = 200
    return s


def solve_primal(lp, perm):
    """min c'x  s.t. Ax = b, x in K, with x free and the cone on a slack."""
    N, M = lp.N, lp.M
    neg_id = sp.csr_matrix((-np.ones(N), (np.arange(N), perm)), shape=(N, N))
    G = sp.vstack([lp.A, neg_id]).tocsc()
    h = np.r_[lp.b, np.zeros(N)]
    sol = clarabel.DefaultSolver(sp.csc_matrix((N, N)), lp.c, G, h, clarabel_cones(lp, M), settings()).solve()
    z = np.asarray(sol.z)
    s = np.empty(N)
    s[perm] = z[M:]
    return np.asarray(sol.x), -z[:M], s, str(sol.status)


def solve_dual(lp, perm):
    """max b'y  s.t. c - A'y in K."""
    N, M = lp.N, lp.M
    G = lp.A.T.tocsr()[perm].tocsc()
    sol = clarabel.DefaultSolver(sp.csc_matrix((M, M)), -lp.b, G, lp.c[perm], clarabel_cones(lp), settings()).solve()
    x = np.empty(N)
    x[perm] = np.asarray(sol.z)
    s = np.empty(N)
    s[perm] = np.asarray(sol.s)
    return x, np.asarray(sol.x), s, str(sol.status)


def polish(lp, x, y, s, rounds: int = 60):
    proj = ConeProjector(lp.cones)
    A = lp.A.tocsr()
    lu = spla.splu((A @ A.T).tocsc())
    for _ in range(rounds):
        x = proj(x)
        for _ in range(2):
            x = x + A.T @ lu.solve(lp.b - A @ x)
    for _ in range(3):
        s = proj(s)
        y = lu.solve(A @ (lp.c - s))
        s = lp.c - A.T @ y
    return x, y, s


def make(name: str) -> None:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lp = build_pipeline(RunConfig(case=name)).problem
    perm = triangle_perm(lp)
    candidates = []
    for label, fn in (("primal", solve_primal), ("dual", solve_dual)):
        x, y, s, status = fn(lp, perm)
        candidates.append((label, status, x, y, s))
        candidates.append((label + "+polish", status, *polish(lp, x, y, s)))
    scored = []
    for label, status, x, y, s in candidates:
        rep = dimacs(lp, (x, y, s))
        print(f"{name} {label:14s} {status:16s} " + " ".join(f"{m:.1e}" for m in rep.measures()))
        scored.append((rep.worst(), label, x, y, s))
    worst, label, x, y, s = min(scored, key=lambda t: t[0])
    sol = Solution(x=x, y=y, s=s, status=Status.OPTIMAL, iterations=0,
                   objective_primal=lp.objective(x), objective_dual=float(lp.b @ y) + lp.offset)
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / f"{name}.json.gz"
    write_solution(sol, path)
    meta = {"case": name, "route": label, "dimacs": dimacs(lp, (x, y, s)).to_dict(), "N": lp.N, "M": lp.M}
    (OUT / f"{name}.meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"{name}: wrote {path.name} via {label}, worst measure {worst:.1e}")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("cases", nargs="+")
    for name in ap.parse_args(argv).cases:
        make(name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
