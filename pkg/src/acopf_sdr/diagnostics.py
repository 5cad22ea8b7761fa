"""Accuracy measures, optimality gap and rank-one voltage recovery."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .chordal import ChordalDecomposition, ConvertedConeLP, clique_stats
from .conesolve import ConeProjector, Solution, SolverOptions, solve
from .netmodel import ResidualReport, evaluate_acopf
from .relax import ConeLP, hvec_index, hvec_inv, svec_index

__all__ = [
    "DimacsReport",
    "GapReport",
    "RecoveryReport",
    "clique_stats",
    "dimacs",
    "gap",
    "generator_outputs",
    "recover_voltages",
    "report",
    "select_low_rank",
]


@dataclass(frozen=True)
class DimacsReport:
    """The five DIMACS error measures on unscaled data.

    ``err_gap`` is the absolute value; ``gap_signed`` keeps the sign of
    ``c'x - b'y``.
    """

    err_primal_res: float
    err_primal_cone: float
    err_dual_res: float
    err_dual_cone: float
    err_gap: float
    gap_signed: float

    def measures(self) -> tuple[float, float, float, float, float]:
        return (self.err_primal_res, self.err_primal_cone, self.err_dual_res, self.err_dual_cone, self.err_gap)

    def worst(self) -> float:
        return max(self.measures())

    def to_dict(self) -> dict:
        return asdict(self)


def dimacs(lp: ConeLP, sol: Solution | tuple[np.ndarray, np.ndarray, np.ndarray]) -> DimacsReport:
    """DIMACS measures of ``(x, y, s)`` for ``lp``.

    Cone distances use the Moreau split: ``dist(v, K) = ||P_K(-v)||`` for a
    self-dual ``K``.
    """
    x, y, s = (sol.x, sol.y, sol.s) if isinstance(sol, Solution) else sol
    x, y, s = (np.asarray(v, dtype=float) for v in (x, y, s))
    if x.shape != (lp.N,) or s.shape != (lp.N,) or y.shape != (lp.M,):
        raise ValueError("solution dimensions do not match the cone LP")
    nb = 1.0 + float(np.max(np.abs(lp.b), initial=0.0))
    nc = 1.0 + float(np.max(np.abs(lp.c), initial=0.0))
    proj = ConeProjector(lp.cones)

    def dist(v):
        # certificates leave the other side as NaN
        return float(np.linalg.norm(proj(-v))) if np.all(np.isfinite(v)) else math.nan

    cx, by = float(lp.c @ x), float(lp.b @ y)
    raw = (cx - by) / (1.0 + abs(cx) + abs(by))
    return DimacsReport(
        err_primal_res=float(np.linalg.norm(lp.A @ x - lp.b)) / nb,
        err_primal_cone=dist(x) / nb,
        err_dual_res=float(np.linalg.norm(lp.A.T @ y + s - lp.c)) / nc,
        err_dual_cone=dist(s) / nc,
        err_gap=abs(raw),
        gap_signed=raw,
    )


@dataclass(frozen=True)
class GapReport:
    """Relative optimality gap ``(upper - lower) / upper`` in percent."""

    lower: float
    upper: float | None
    gap_percent: float | None

    @property
    def text(self) -> str:
        """One decimal with sign kept ("-0.0%"); an em dash when undefined."""
        if self.gap_percent is None:
            return "—"
        return f"{self.gap_percent:.1f}%"

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "gap_percent": self.gap_percent, "text": self.text}


def gap(lower: float, upper: float | None) -> GapReport:
    if upper is None or not math.isfinite(upper) or upper == 0 or not math.isfinite(lower):
        return GapReport(lower=lower, upper=upper, gap_percent=None)
    return GapReport(lower=lower, upper=upper, gap_percent=(upper - lower) / upper * 100.0)


@dataclass
class RecoveryReport:
    """Voltages stitched from the leading eigenvectors of the clique blocks."""

    v: np.ndarray
    ratios: np.ndarray
    residuals: ResidualReport | None
    exact: bool
    status: str = "ok"
    s: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    def to_dict(self) -> dict:
        out = {"status": self.status, "exact": self.exact, "max_ratio": self.max_ratio,
               "ratios": self.ratios.tolist()}
        if self.residuals is not None:
            out["residuals"] = self.residuals.worst()
            out["objective"] = self.residuals.objective
        if self.v.size:
            out["vm"] = np.abs(self.v).tolist()
            out["va_deg"] = np.degrees(np.angle(self.v)).tolist()
        return out


def _clique_layout(lp: ConeLP) -> tuple[list[np.ndarray], np.ndarray, list[np.ndarray]]:
    """Cliques, parents and Hermitian blocks of the ``X`` part of ``x``."""
    if isinstance(lp, ConvertedConeLP) and lp.decomposition is not None:
        dec: ChordalDecomposition = lp.decomposition
        return dec.cliques, dec.parent, []
    n = lp.case.n_bus if lp.case is not None else 0
    return [np.arange(n)], np.array([-1]), []


def _blocks(lp: ConeLP, x: np.ndarray) -> list[np.ndarray]:
    if isinstance(lp, ConvertedConeLP):
        return lp.clique_matrices(x)
    if not lp.cones.hermitian:
        raise ValueError("real symmetric cone LP without a Hermitian map")
    return [hvec_inv(x[lp.x_start :])]


def trace_vector(lp: ConeLP) -> np.ndarray:
    """Objective vector of the summed traces of all PSD blocks."""
    d = np.zeros(lp.N)
    for off, r in zip(lp.cones.psd_offsets, lp.cones.psd):
        k = np.arange(r)
        slots = hvec_index(k, k, r) if lp.cones.hermitian else svec_index(k, k, r)
        d[off + slots] = 1.0
    return d


def select_low_rank(
    lp: ConeLP,
    sol: Solution,
    rel_slack: float = 1e-5,
    opts: SolverOptions | None = None,
    start: float = 1e-4,
    factor: float = 10.0,
    steps: int = 6,
    feas_tol: float = 1e-6,
) -> Solution:
    """Low-trace point of the near-optimal set of ``lp``.

    The relaxation optimum is often not unique: at buses whose diagonal
    entry enters no cost-relevant row, any value up to the voltage limit is
    optimal and a solver that stays central returns a higher-rank point.
    Solving with the objective ``c + mu * trace`` favours the low-rank member.
    ``mu`` starts at ``start * (1 + |c'x*|) / (1 + trace(x*))`` and grows by
    ``factor``; the last point whose cost stays within
    ``c'x* + rel_slack (1 + |c'x*|)`` and whose primal DIMACS measures stay
    below ``feas_tol`` is kept. The returned solution holds that primal point
    with the original duals; only ``x`` is meant for recovery.
    """
    opts = opts or SolverOptions(eps_primal=1e-8, eps_dual=1e-8, eps_gap=1e-8)
    d = trace_vector(lp)
    f = float(lp.c @ sol.x)
    budget = f + rel_slack * (1.0 + abs(f))
    mu = start * (1.0 + abs(f)) / (1.0 + abs(float(d @ sol.x)))
    x, chosen, solves = sol.x, 0.0, 0
    for _ in range(steps):
        out = solve(dataclasses.replace(lp, c=lp.c + mu * d), opts)
        solves += 1
        if not np.all(np.isfinite(out.x)):
            break
        rep = dimacs(lp, (out.x, sol.y, sol.s))
        if max(rep.err_primal_res, rep.err_primal_cone) > feas_tol or float(lp.c @ out.x) > budget:
            break
        x, chosen = out.x, mu
        mu *= factor
    return dataclasses.replace(
        sol,
        x=x,
        objective_primal=lp.objective(x),
        info={**sol.info, "face": {"weight": chosen, "solves": solves, "budget": budget + lp.offset,
                                   "cost_increase": float(lp.c @ x) - f}},
    )


def generator_outputs(lp: ConeLP, x: np.ndarray) -> np.ndarray:
    """Complex generator outputs read from the lower slacks; fixed outputs from the case."""
    case, col = lp.case, lp.index_map
    gens = case.generators
    p = np.array([g.Pmin for g in gens], dtype=float)
    q = np.array([g.Qmin for g in gens], dtype=float)
    p[col["gens_p"]] += x[col["p_l"]]
    q[col["gens_q"]] += x[col["q_l"]]
    return p + 1j * q


def recover_voltages(lp: ConeLP, x: np.ndarray, ratio_tol: float = 1e-5) -> RecoveryReport:
    """Rank-one voltage estimate from a relaxation point.

    Each clique block contributes ``sqrt(l1) u1``; children are rotated onto
    their parent by the phase of ``sum v_parent * conj(v_child)`` over the
    separator, and the reference bus angle is set to zero.
    """
    if lp.case is None:
        raise ValueError("voltage recovery needs a cone LP built from a case")
    case = lp.case
    n = case.n_bus
    cliques, parent, _ = _clique_layout(lp)
    blocks = _blocks(lp, np.asarray(x, dtype=float))
    local: list[np.ndarray] = []
    ratios = np.zeros(len(blocks))
    for k, B in enumerate(blocks):
        w, U = np.linalg.eigh(0.5 * (B + B.conj().T))
        l1 = w[-1]
        if not l1 > 0:
            return RecoveryReport(
                v=np.zeros(0, dtype=complex), ratios=ratios, residuals=None, exact=False,
                status=f"clique {k}: leading eigenvalue {l1:.3e} is not positive",
            )
        ratios[k] = max(w[-2], 0.0) / l1 if w.size > 1 else 0.0
        local.append(math.sqrt(l1) * U[:, -1])

    v = np.zeros(n, dtype=complex)
    seen = np.zeros(n, dtype=bool)
    children: list[list[int]] = [[] for _ in cliques]
    roots = []
    for k, p in enumerate(parent):
        (children[p].append(k) if p >= 0 else roots.append(k))
    stack = list(reversed(roots))
    while stack:
        k = stack.pop()
        c, u = cliques[k], local[k]
        known = seen[c]
        if np.any(known):
            z = np.sum(v[c[known]] * np.conj(u[known]))
            rot = z / abs(z) if abs(z) > 0 else 1.0
        else:
            rot = 1.0
        u = u * rot
        v[c[~known]] = u[~known]
        seen[c] = True
        stack.extend(reversed(children[k]))
    ref = case.reference_bus()
    if abs(v[ref]) > 0:
        v = v * np.exp(-1j * np.angle(v[ref]))

    s = generator_outputs(lp, x)
    res = evaluate_acopf(case, v, s, lp.model)
    return RecoveryReport(
        v=v, ratios=ratios, residuals=res, exact=bool(np.all(ratios <= ratio_tol)), s=s,
    )


def report(
    name: str,
    lp: ConeLP,
    sol: Solution,
    upper: float | None = None,
    dec: ChordalDecomposition | None = None,
    recover: bool = True,
) -> dict:
    """JSON report: case, N, M, clique_stats, dimacs, objective_lower, gap, recovery."""
    rep = dimacs(lp, sol)
    lower = sol.objective_dual if math.isfinite(sol.objective_dual) else sol.objective_primal
    out = {
        "case": name,
        "N": lp.N,
        "M": lp.M,
        "clique_stats": clique_stats(dec) if dec is not None else None,
        "status": sol.status.value,
        "iterations": sol.iterations,
        "objective_primal": sol.objective_primal,
        "objective_dual": sol.objective_dual,
        "objective_lower": lower,
        "dimacs": rep.to_dict(),
        "gap": gap(lower, upper).to_dict(),
        "recovery": None,
    }
    if recover and np.all(np.isfinite(sol.x)):
        out["recovery"] = recover_voltages(lp, sol.x).to_dict()
    return out
