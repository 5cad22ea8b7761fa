"""Diagonal equilibration of cone LP data with cone-preserving column scalars.

The scaled problem is ``A' = D_r A D_c``, ``b' = D_r b``, ``c' = sigma D_c c``
with ``x = D_c x'``. Every second-order cone and PSD block shares one column
scalar, so positive scaling keeps cone membership intact. Nonnegative
coordinates are one-dimensional cones and get their own scalar.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .relax import ConeLP, ConeSpec

__all__ = ["ScalingInfo", "block_ids", "equilibrate", "scale_point", "unscale_point", "unscale_solution"]

_CLIP = (1e-4, 1e4)


@dataclass(frozen=True)
class ScalingInfo:
    """Row scalars ``d_r``, column scalars ``d_c`` and cost scalar ``sigma``."""

    d_r: np.ndarray
    d_c: np.ndarray
    sigma: float

    @classmethod
    def identity(cls, m: int, n: int) -> ScalingInfo:
        return cls(np.ones(m), np.ones(n), 1.0)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "d_r_range": [float(self.d_r.min(initial=1.0)), float(self.d_r.max(initial=1.0))],
            "d_c_range": [float(self.d_c.min(initial=1.0)), float(self.d_c.max(initial=1.0))],
        }


def block_ids(cones: ConeSpec) -> np.ndarray:
    """Column -> scaling-group id; one group per nonneg entry, SOC or PSD block."""
    ids = np.empty(cones.size, dtype=np.int64)
    ids[: cones.nonneg] = np.arange(cones.nonneg)
    g = cones.nonneg
    for kind, start, stop, _ in cones.blocks():
        if kind == "nonneg":
            continue
        ids[start:stop] = g
        g += 1
    return ids


def _geo(absA: sp.csr_matrix) -> np.ndarray:
    """Per-row ``1/sqrt(max * min)`` over nonzeros; 1 for empty rows."""
    absA = absA.tocsr()
    nnz = np.diff(absA.indptr)
    mx = np.zeros(absA.shape[0])
    mn = np.zeros(absA.shape[0])
    rows = np.flatnonzero(nnz)
    if rows.size:
        mx[rows] = np.maximum.reduceat(absA.data, absA.indptr[rows])
        mn[rows] = np.minimum.reduceat(absA.data, absA.indptr[rows])
    out = np.ones(absA.shape[0])
    out[rows] = 1.0 / np.sqrt(mx[rows] * mn[rows])
    return out


def equilibrate(lp: ConeLP, iters: int = 10) -> tuple[ConeLP, ScalingInfo]:
    """Geometric-mean row/column equilibration followed by cost normalization."""
    if lp.A.nnz == 0:
        raise ValueError("cannot equilibrate an empty constraint matrix")
    M, N = lp.A.shape
    groups = block_ids(lp.cones)
    ng = int(groups.max()) + 1 if N else 0
    absA = abs(lp.A).tocsr()
    d_r = np.ones(M)
    d_c = np.ones(N)
    for _ in range(iters):
        S = sp.diags(d_r) @ absA @ sp.diags(d_c)
        r = np.clip(_geo(S), *_CLIP)
        d_r = np.clip(d_r * r, *_CLIP)
        S = (sp.diags(d_r) @ absA @ sp.diags(d_c)).tocsc()
        # group max/min over all columns of the group
        T = S.T.tocsr()
        colmax = np.asarray(T.max(axis=1).toarray()).ravel()
        Tm = T.copy()
        Tm.data = 1.0 / Tm.data
        colmin_inv = np.asarray(Tm.max(axis=1).toarray()).ravel()
        gmax = np.zeros(ng)
        gmin_inv = np.zeros(ng)
        np.maximum.at(gmax, groups, colmax)
        np.maximum.at(gmin_inv, groups, colmin_inv)
        cg = np.ones(ng)
        ok = gmax > 0
        cg[ok] = np.sqrt(gmin_inv[ok] / gmax[ok])
        d_c = np.clip(d_c * np.clip(cg, *_CLIP)[groups], *_CLIP)
    cmax = float(np.max(np.abs(d_c * lp.c), initial=0.0))
    sigma = 1.0 / cmax if cmax > 0 else 1.0
    info = ScalingInfo(d_r=d_r, d_c=d_c, sigma=sigma)
    scaled = dataclasses.replace(
        lp,
        A=(sp.diags(d_r) @ lp.A @ sp.diags(d_c)).tocsr(),
        b=d_r * lp.b,
        c=sigma * d_c * lp.c,
        offset=sigma * lp.offset,
    )
    return scaled, info


def scale_point(x, y, s, info: ScalingInfo):
    """Original-space ``(x, y, s)`` to scaled space."""
    return x / info.d_c, y * info.sigma / info.d_r, s * info.sigma * info.d_c


def unscale_point(x, y, s, info: ScalingInfo):
    """Scaled-space ``(x, y, s)`` back to the original problem."""
    return x * info.d_c, y * info.d_r / info.sigma, s / (info.d_c * info.sigma)


def unscale_solution(sol, info: ScalingInfo):
    """Map a solution of the scaled problem back; objectives divide by ``sigma``."""
    x, y, s = unscale_point(sol.x, sol.y, sol.s, info)
    return dataclasses.replace(
        sol,
        x=x,
        y=y,
        s=s,
        objective_primal=sol.objective_primal / info.sigma,
        objective_dual=sol.objective_dual / info.sigma,
    )
