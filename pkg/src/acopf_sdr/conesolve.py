"""Conic solvers for ``min c'x  s.t.  Ax = b, x in K`` with ``K`` self-dual.

Two methods share one options object and one status taxonomy. The default
is a primal-dual interior-point method (see ``_ipm``); second-order cones of
dimension 3 are mapped to 2x2 PSD blocks first. The alternative is ADMM on
the homogeneous self-dual embedding, handed the problem in its dual
orientation ``min -b'y  s.t.  A'y + s = c, s in K`` so the projection acts
on ``x`` and ``s`` while ``y`` stays free; its affine step reuses one sparse
LU factorization of the quasi-definite matrix ``[[I, A], [A', -I]]``.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .relax import ConeLP, ConeSpec, SQRT2
from .scaling import ScalingInfo, equilibrate, unscale_point

__all__ = [
    "ConeProjector",
    "Solution",
    "SolverOptions",
    "Status",
    "project_cone",
    "residuals",
    "solve",
]

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible_certificate"
    UNBOUNDED = "unbounded_certificate"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances apply to the DIMACS measures on unscaled data."""

    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    eps_gap: float = 1e-6
    eps_infeas: float = 1e-7
    max_iters: int = 20000
    alpha: float = 1.5
    scale: bool = True
    scale_iters: int = 10
    check_every: int = 10
    dual_scale: float = 0.1
    adaptive_scale: bool = True
    rescale_every: int = 100
    rescale_trigger: float = 3.0
    anderson_memory: int = 10
    log_every: int = 0
    time_limit: float | None = None
    method: str = "ipm"
    ipm_step: float = 0.98

    def __post_init__(self):
        if self.method not in ("ipm", "admm"):
            raise ValueError(f"unknown method {self.method!r}")
        if min(self.eps_primal, self.eps_dual, self.eps_gap, self.eps_infeas) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.alpha < 2:
            raise ValueError("over-relaxation must lie in (0, 2)")
        if self.check_every < 1:
            raise ValueError("check_every must be at least 1")


@dataclass
class Solution:
    """Primal-dual point of ``min c'x, Ax = b, x in K`` and its dual.

    Objectives include the problem offset.
    """

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: Status
    iterations: int = 0
    objective_primal: float = float("nan")
    objective_dual: float = float("nan")
    solve_time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# ---------------------------------------------------------------------------
# Projection


class ConeProjector:
    """Euclidean projection onto a :class:`ConeSpec`, batched by block order."""

    def __init__(self, cones: ConeSpec):
        self.cones = cones
        self.nonneg = cones.nonneg
        soc: dict[int, list[int]] = {}
        psd: dict[int, list[int]] = {}
        for kind, start, _, order in cones.blocks():
            if kind == "soc":
                soc.setdefault(order, []).append(start)
            elif kind in ("spsd", "hpsd"):
                psd.setdefault(order, []).append(start)
        self.soc = {m: np.asarray(v)[:, None] + np.arange(m) for m, v in soc.items()}
        L = cones.psd_length
        self.psd = {r: np.asarray(v)[:, None] + np.arange(L(r)) for r, v in psd.items()}
        self.hermitian = cones.hermitian
        self._layout = {r: self._matrix_layout(r) for r in self.psd}

    def _matrix_layout(self, r: int):
        from .relax import _lower, hvec_index, svec_index

        i, j = _lower(r)
        diag = i == j
        if self.hermitian:
            slot = hvec_index(i, j, r)
        else:
            slot = svec_index(i, j, r)
        return i, j, diag, slot

    def _to_mats(self, V: np.ndarray, r: int) -> np.ndarray:
        i, j, diag, slot = self._layout[r]
        if self.hermitian:
            re = V[:, slot]
            im = np.where(diag, 0.0, V[:, np.minimum(slot + 1, V.shape[1] - 1)])
            vals = np.where(diag, re, (re + 1j * im) / SQRT2)
            Z = np.zeros((V.shape[0], r, r), dtype=complex)
        else:
            vals = np.where(diag, 1.0, 1.0 / SQRT2) * V[:, slot]
            Z = np.zeros((V.shape[0], r, r))
        Z[:, i, j] = vals
        Z[:, j, i] = np.conj(vals)
        return Z

    def _from_mats(self, Z: np.ndarray, r: int) -> np.ndarray:
        i, j, diag, slot = self._layout[r]
        vals = Z[:, i, j]
        out = np.empty((Z.shape[0], self.cones.psd_length(r)))
        if self.hermitian:
            out[:, slot[diag]] = vals[:, diag].real
            out[:, slot[~diag]] = SQRT2 * vals[:, ~diag].real
            out[:, slot[~diag] + 1] = SQRT2 * vals[:, ~diag].imag
        else:
            out[:, slot] = np.where(diag, 1.0, SQRT2) * vals
        return out

    def __call__(self, v: np.ndarray) -> np.ndarray:
        out = np.array(v, dtype=float, copy=True)
        if self.nonneg:
            np.maximum(out[: self.nonneg], 0.0, out=out[: self.nonneg])
        for idx in self.soc.values():
            out[idx] = project_soc(out[idx])
        for r, idx in self.psd.items():
            Z = self._to_mats(out[idx], r)
            w, U = np.linalg.eigh(Z)
            if not np.all(np.isfinite(w)):
                raise FloatingPointError("eigendecomposition failed")
            Zp = (U * np.maximum(w, 0.0)[:, None, :]) @ np.conj(np.swapaxes(U, 1, 2))
            out[idx] = self._from_mats(Zp, r)
        return out

    def min_eigenvalues(self, v: np.ndarray) -> list[float]:
        """Smallest eigenvalue of every PSD block (diagnostics)."""
        mins = {}
        for r, idx in self.psd.items():
            w = np.linalg.eigvalsh(self._to_mats(v[idx], r))
            for k, start in enumerate(idx[:, 0]):
                mins[int(start)] = float(w[k, 0])
        return [mins[k] for k in sorted(mins)]


def project_soc(V: np.ndarray) -> np.ndarray:
    """Row-wise projection onto ``{(t, x): ||x|| <= t}``; ``t = -||x||`` maps to 0."""
    t = V[:, 0]
    x = V[:, 1:]
    nx = np.linalg.norm(x, axis=1)
    out = V.copy()
    inside = nx <= t
    polar = nx <= -t
    mid = ~(inside | polar)
    out[polar] = 0.0
    a = (t[mid] + nx[mid]) / 2
    out[mid, 0] = a
    out[mid, 1:] = x[mid] * (a / nx[mid])[:, None]
    return out


def project_cone(v: np.ndarray, cones: ConeSpec) -> np.ndarray:
    """Euclidean projection of ``v`` onto the cone product ``cones``."""
    return ConeProjector(cones)(v)


# ---------------------------------------------------------------------------
# Residuals


def residuals(lp: ConeLP, sol: Solution) -> tuple[np.ndarray, np.ndarray, float]:
    """``(Ax - b, A'y + s - c, c'x - b'y)``."""
    rp = lp.A @ sol.x - lp.b
    rd = lp.A.T @ sol.y + sol.s - lp.c
    return rp, rd, float(lp.c @ sol.x - lp.b @ sol.y)


def _measures(lp: ConeLP, x, y, s, nb, nc):
    rp = np.linalg.norm(lp.A @ x - lp.b) / (1 + nb)
    rd = np.linalg.norm(lp.A.T @ y + s - lp.c) / (1 + nc)
    cx, by = float(lp.c @ x), float(lp.b @ y)
    gap = abs(cx - by) / (1 + abs(cx) + abs(by))
    return rp, rd, gap, cx, by


# ---------------------------------------------------------------------------
# Solver


class _KKT:
    """Factorization of ``[[rho_x I, A], [A', -D]]`` with ``D`` diagonal."""

    def __init__(self, A: sp.csr_matrix, rho_x: float, d: np.ndarray):
        m, n = A.shape
        self.m = m
        self.K = sp.bmat(
            [[sp.identity(m) * rho_x, A], [A.T, -sp.diags(d)]], format="csc"
        )
        self.lu = spla.splu(self.K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)

    def solve(self, r1: np.ndarray, r2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Solve ``rho_x a + A b = r1``, ``-A' a + D b = r2``."""
        rhs = np.r_[r1, -r2]
        z = self.lu.solve(rhs)
        # one refinement step keeps the affine step accurate
        z += self.lu.solve(rhs - self.K @ z)
        return z[: self.m], z[self.m :]


class _Anderson:
    """Type-II Anderson acceleration of ``w -> w + step(w)`` with a safeguard.

    An extrapolated point is kept only if its fixed-point residual does not
    exceed the residual it was extrapolated from; otherwise the plain step
    from that earlier point is taken and the memory cleared.
    """

    def __init__(self, memory: int, reg: float = 1e-10):
        self.memory = memory
        self.reg = reg
        self.reset()

    def reset(self):
        self.dw: list[np.ndarray] = []
        self.dg: list[np.ndarray] = []
        self.prev: tuple[np.ndarray, np.ndarray] | None = None
        self.fallback: np.ndarray | None = None
        self.ref_norm = np.inf

    def next(self, w: np.ndarray, g: np.ndarray) -> np.ndarray:
        gn = float(np.linalg.norm(g))
        if self.fallback is not None and gn > self.ref_norm:
            plain = self.fallback
            self.reset()
            return plain
        if self.prev is not None:
            self.dw.append(w - self.prev[0])
            self.dg.append(g - self.prev[1])
            if len(self.dw) > self.memory:
                self.dw.pop(0)
                self.dg.pop(0)
        self.prev = (w, g)
        if not self.dw:
            self.fallback = None
            return w + g
        Y = np.column_stack(self.dg)
        S = np.column_stack(self.dw)
        YtY = Y.T @ Y
        YtY[np.diag_indices_from(YtY)] += self.reg * (np.trace(YtY) + 1e-30)
        try:
            gamma = np.linalg.solve(YtY, Y.T @ g)
        except np.linalg.LinAlgError:
            self.reset()
            return w + g
        out = w + g - (S + Y) @ gamma
        if not np.all(np.isfinite(out)):
            self.reset()
            return w + g
        self.fallback = w + g
        self.ref_norm = gn
        return out


_RHO_X = 1e-6
_SCALE_RANGE = (1e-6, 1e6)


def solve(lp: ConeLP, opts: SolverOptions | None = None) -> Solution:
    """Solve ``lp``; ``opts.method`` picks the interior-point or splitting solver.

    Works for Hermitian or real symmetric PSD blocks. The returned point is
    always in original (unscaled) coordinates.
    """
    opts = opts or SolverOptions()
    if opts.method == "ipm":
        return _solve_ipm(lp, opts)
    return _solve_admm(lp, opts)


# SOC(3) (t, a, b) <-> svec([[t + a, b], [b, t - a]])
_SOC_T = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, SQRT2], [1.0, -1.0, 0.0]])
_SOC_TINV = np.linalg.inv(_SOC_T)


def _soc_maps(cones: ConeSpec, n: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """``(T, T^{-T})`` with ``x_original = T x_work`` and ``s_original = T^{-T} s_work``."""
    if any(m != 3 for m in cones.soc):
        raise ValueError("the interior-point path supports second-order cones of dimension 3 only")
    k = len(cones.soc)
    head = [sp.identity(cones.nonneg, format="csr")]
    tail = [sp.identity(n - cones.nonneg - 3 * k, format="csr")]
    T = sp.block_diag(head + [sp.csr_matrix(_SOC_TINV)] * k + tail, format="csr")
    Tit = sp.block_diag(head + [sp.csr_matrix(_SOC_T.T)] * k + tail, format="csr")
    return T, Tit


def _solve_ipm(lp: ConeLP, opts: SolverOptions) -> Solution:
    from ._ipm import IpmFailure, ipm
    from .chordal import herm_to_sym

    t0 = time.perf_counter()
    m, n = lp.A.shape
    work = lp
    P = Q = None
    if lp.cones.hermitian:
        work = herm_to_sym(lp)
        P = work.herm_map.tocsr()
        C = P.tocoo()
        # right inverse of P' on the PSD part is 2P
        Q = sp.csr_matrix((np.where(C.row >= lp.x_start, 2.0, 1.0) * C.data, (C.row, C.col)), shape=C.shape)
    T, Tit = _soc_maps(work.cones, work.N)
    cones = ConeSpec(
        nonneg=work.cones.nonneg, soc=(), psd=(2,) * len(work.cones.soc) + tuple(work.cones.psd), hermitian=False
    )
    work = dataclasses.replace(work, A=(work.A @ T).tocsr(), c=np.asarray(T.T @ work.c).ravel(), cones=cones)
    if opts.scale:
        work, scaling = equilibrate(work, opts.scale_iters)
    else:
        scaling = ScalingInfo.identity(work.M, work.N)
    nb = float(np.max(np.abs(lp.b), initial=0.0))
    nc = float(np.max(np.abs(lp.c), initial=0.0))
    tol = np.array([opts.eps_primal, opts.eps_dual, opts.eps_gap])

    def back(xw, yw, sw):
        x, y, s = unscale_point(xw, yw, sw, scaling)
        x, s = T @ x, Tit @ s
        if P is not None:
            x, s = P @ x, Q @ s
        return x, y, s

    best: dict = {"merit": np.inf}

    def check(xw, yw, sw):
        x, y, s = back(xw, yw, sw)
        rp, rd, gap, cx, by = _measures(lp, x, y, s, nb, nc)
        merit = float(np.max(np.array([rp, rd, gap]) / tol))
        if opts.log_every:
            log.info("r_p %.3e  r_d %.3e  gap %.3e", rp, rd, gap)
        if not np.isfinite(merit):
            return np.inf
        if merit < best["merit"]:
            best.update(merit=merit, point=(x, y, s), cx=cx, by=by)
        return merit

    info_out: dict = {"method": "ipm", "scaling": scaling.to_dict()}
    try:
        res = ipm(
            work.A, work.b, work.c, cones.nonneg, cones.psd, check,
            max_iters=opts.max_iters, eps_infeas=opts.eps_infeas, step=opts.ipm_step,
        )
    except IpmFailure as exc:
        status = Status.NUMERICAL_ERROR
        iters, info_out["history"] = exc.last[3:] if exc.last else (0, [])
        info_out["message"] = str(exc)
    else:
        iters, info_out["history"] = res.iterations, res.history
        elapsed = time.perf_counter() - t0
        if res.status == "infeasible":
            _, y, s = back(res.x, res.y, res.s)
            k = float(lp.b @ y)
            return Solution(
                x=np.full(n, np.nan), y=y / k, s=s / k, status=Status.INFEASIBLE,
                iterations=iters, solve_time=elapsed, info=info_out,
            )
        if res.status == "unbounded":
            x = back(res.x, res.y, res.s)[0]
            k = -float(lp.c @ x)
            return Solution(
                x=x / k, y=np.full(m, np.nan), s=np.full(n, np.nan), status=Status.UNBOUNDED,
                iterations=iters, solve_time=elapsed, info=info_out,
            )
        status = {"optimal": Status.OPTIMAL, "max_iters": Status.MAX_ITERS}.get(res.status, Status.NUMERICAL_ERROR)
        if res.status == "stalled":
            info_out["message"] = "progress stalled"
    elapsed = time.perf_counter() - t0
    if "point" not in best:
        return Solution(
            x=np.zeros(n), y=np.zeros(m), s=np.zeros(n), status=Status.NUMERICAL_ERROR,
            iterations=iters, solve_time=elapsed, info=info_out,
        )
    x, y, s = best["point"]
    return Solution(
        x=x, y=y, s=s, status=status, iterations=iters,
        objective_primal=best["cx"] + lp.offset, objective_dual=best["by"] + lp.offset,
        solve_time=elapsed, info=info_out,
    )


def _solve_admm(lp: ConeLP, opts: SolverOptions) -> Solution:
    t0 = time.perf_counter()
    if opts.scale:
        work, info = equilibrate(lp, opts.scale_iters)
    else:
        work, info = lp, ScalingInfo.identity(lp.M, lp.N)
    A, b, c = work.A.tocsr(), work.b, work.c
    m, n = A.shape
    nb = float(np.max(np.abs(lp.b), initial=0.0))
    nc = float(np.max(np.abs(lp.c), initial=0.0))
    proj = ConeProjector(lp.cones)

    def fail(msg, it=0):
        return Solution(
            x=np.zeros(n), y=np.zeros(m), s=np.zeros(n), status=Status.NUMERICAL_ERROR,
            iterations=it, solve_time=time.perf_counter() - t0, info={"message": msg},
        )

    # Embedding variables u = (y, x, tau) with y free and x in K. The metric
    # R = diag(rho_x, 1/scale, 1) weights the splitting; h = (-b, c).
    h1, h2 = -b, c
    scale = opts.dual_scale

    def factor(scale):
        kkt = _KKT(A, _RHO_X, np.full(n, 1.0 / scale))
        g1, g2 = kkt.solve(h1, h2)
        return kkt, g1, g2, float(h1 @ g1 + h2 @ g2)

    try:
        kkt, g1, g2, hg = factor(scale)
    except RuntimeError as exc:
        return fail(f"KKT factorization failed: {exc}")

    w = np.zeros(m + n + 1)
    w[-1] = 1.0
    u1, u2, ut = w[:m], w[m : m + n], 1.0
    v2, vt = np.zeros(n), 0.0
    alpha = opts.alpha
    aa = _Anderson(opts.anderson_memory) if opts.anderson_memory > 0 else None
    status = Status.MAX_ITERS
    best = None
    hist: list[tuple[int, float, float, float]] = []
    last_rescale = 0
    rescales = 0
    it = 0
    for it in range(1, opts.max_iters + 1):
        w1, w2, wt = w[:m], w[m : m + n], w[-1]
        ry = 1.0 / scale
        p1, p2 = kkt.solve(_RHO_X * w1, ry * w2)
        tt = (wt + h1 @ p1 + h2 @ p2) / (1.0 + hg)
        t1, t2 = p1 - tt * g1, p2 - tt * g2
        z2 = 2 * t2 - w2
        try:
            u2 = proj(z2)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            return fail(str(exc), it)
        u1 = 2 * t1 - w1
        zt = 2 * tt - wt
        ut = max(zt, 0.0)
        # dual slacks from the projection residual
        v2 = ry * (u2 - z2)
        vt = ut - zt
        if not (np.isfinite(ut) and np.isfinite(vt)):
            return fail("non-finite iterate", it)
        step = alpha * np.r_[u1 - t1, u2 - t2, ut - tt]
        w = aa.next(w, step) if aa is not None else w + step

        last = it == opts.max_iters
        if it % opts.check_every and not last:
            continue
        if ut > 0:
            x, y, s = unscale_point(u2 / ut, u1 / ut, v2 / ut, info)
            rp, rd, gap, cx, by = _measures(lp, x, y, s, nb, nc)
            if not np.all(np.isfinite([rp, rd, gap])):
                return fail("non-finite residuals", it)
            best = (x, y, s, cx, by)
            if opts.log_every and (it % opts.log_every == 0 or it == opts.check_every):
                log.info("%6d  r_p %.3e  r_d %.3e  gap %.3e  scale %.1e", it, rp, rd, gap, scale)
            if it % 1000 == 0 or it == opts.check_every:
                hist.append((it, rp, rd, gap))
            if rp <= opts.eps_primal and rd <= opts.eps_dual and gap <= opts.eps_gap:
                status = Status.OPTIMAL
                break
            # rebalance primal and dual progress through the metric
            if opts.adaptive_scale and it - last_rescale >= opts.rescale_every:
                ratio = np.sqrt(max(rd, 1e-300) / max(rp, 1e-300))
                if not 1 / opts.rescale_trigger < ratio < opts.rescale_trigger:
                    new = float(np.clip(scale * ratio, *_SCALE_RANGE))
                    if new != scale:
                        # keep (u, v) and re-express w in the new metric
                        w = np.r_[u1, u2 - v2 * new, ut + vt]
                        scale = new
                        if aa is not None:
                            aa.reset()
                        try:
                            kkt, g1, g2, hg = factor(scale)
                        except RuntimeError as exc:
                            return fail(f"KKT factorization failed: {exc}", it)
                        rescales += 1
                    last_rescale = it
        # certificates from the unnormalized directions
        xd, yd, sd = unscale_point(u2, u1, v2, info)
        byd = float(lp.b @ yd)
        if byd > 0 and np.linalg.norm(lp.A.T @ yd + sd) <= opts.eps_infeas * byd:
            status = Status.INFEASIBLE
            break
        cxd = float(lp.c @ xd)
        if cxd < 0 and np.linalg.norm(lp.A @ xd) <= opts.eps_infeas * -cxd:
            status = Status.UNBOUNDED
            break
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            break

    elapsed = time.perf_counter() - t0
    info_out = {
        "history": hist,
        "scaling": info.to_dict(),
        "tau": float(ut),
        "kappa": float(vt),
        "dual_scale": scale,
        "rescales": rescales,
    }
    if status is Status.INFEASIBLE:
        _, y, s = unscale_point(u2, u1, v2, info)
        k = float(lp.b @ y)
        return Solution(
            x=np.full(n, np.nan), y=y / k, s=s / k, status=status, iterations=it,
            solve_time=elapsed, info=info_out,
        )
    if status is Status.UNBOUNDED:
        x = unscale_point(u2, u1, v2, info)[0]
        k = -float(lp.c @ x)
        return Solution(
            x=x / k, y=np.full(m, np.nan), s=np.full(n, np.nan), status=status, iterations=it,
            solve_time=elapsed, info=info_out,
        )
    if best is None:
        if status is Status.MAX_ITERS:
            # budget spent while tau sat at zero: no normalized iterate yet
            return Solution(
                x=np.zeros(n), y=np.zeros(m), s=np.zeros(n), status=status, iterations=it,
                solve_time=elapsed, info={**info_out, "message": "tau was zero at every check"},
            )
        return fail("homogeneous variable tau vanished", it)
    x, y, s, cx, by = best
    return Solution(
        x=x, y=y, s=s, status=status, iterations=it,
        objective_primal=cx + lp.offset, objective_dual=by + lp.offset,
        solve_time=elapsed, info=info_out,
    )
