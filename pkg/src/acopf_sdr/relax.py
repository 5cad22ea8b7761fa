"""Standard-form cone LP for the semidefinite relaxation of ACOPF.

Problem form: minimize ``c @ x`` subject to ``A @ x == b`` and ``x`` in
``R_+^{n_l} x (Q^3)^{n_q} x H_+^n``; the true cost is ``c @ x + offset``.

Variable layout (fixed): ``p_l, p_u, q_l, q_u, t, nu_l, nu_u, y_l, y_u`` in
the nonnegative block, then for every flow-limited branch the from-end and
to-end flow cones, then one epigraph cone per quadratic-cost generator, then
``hvec(X)``.

Row layout (fixed, a convention of this package): active balance, reactive
balance, active box, reactive box, voltage lower, voltage upper, flow-cone
links (3 rows per cone), epigraph-cone links (3 per cone), angle lower,
angle upper.

Generators with ``fixed_p`` (``fixed_q``) have no active (reactive) slack
pair or box row; their output enters the balance right-hand side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .caseio import CaseData
from .netmodel import AdmittanceModel, build_admittance

__all__ = [
    "ClpCounts",
    "ConeLP",
    "ConeSpec",
    "build_clp",
    "embed_point",
    "herm_coefficients",
    "hvec",
    "hvec_index",
    "hvec_inv",
    "hvec_slots",
    "paper_counts",
    "svec",
    "svec_index",
    "svec_inv",
]

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Vectorizations
#
# hvec: column-major over the lower triangle; column j holds X[j, j] then, for
# every i > j, sqrt(2) Re X[i, j] and sqrt(2) Im X[i, j].  Length n**2.
# svec: column-major lower triangle of a real symmetric matrix with sqrt(2)
# off-diagonal scaling.  Length n(n+1)/2.
# Both are isometries: <hvec(A), hvec(B)> = tr(A^H B).


def hvec_index(i, j, n: int):
    """Slot of the diagonal (i == j) or real part (i > j) of ``X[i, j]``.

    The imaginary part of an off-diagonal entry lives at ``slot + 1``.
    """
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    start = j * (2 * n - j)
    return np.where(i == j, start, start + 1 + 2 * (i - j - 1))


def hvec_slots(slots, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`hvec_index`: ``(i, j, part)`` with part 0=real, 1=imag."""
    slots = np.asarray(slots, dtype=np.int64)
    cols = np.arange(n, dtype=np.int64)
    starts = cols * (2 * n - cols)
    j = np.searchsorted(starts, slots, side="right") - 1
    off = slots - starts[j]
    i = np.where(off == 0, j, j + 1 + (off - 1) // 2)
    part = np.where(off == 0, 0, (off - 1) % 2)
    return i, j, part


def svec_index(i, j, n: int):
    """Slot of ``X[i, j]`` (``i >= j``) in svec ordering."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return j * (2 * n - j + 1) // 2 + (i - j)


def _lower(n: int):
    j, i = np.triu_indices(n)  # column-major lower triangle == row-major upper
    return i, j


def hvec(X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    n = X.shape[0]
    if X.shape != (n, n):
        raise ValueError("hvec needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(X)))) if n else 1.0
    if n and np.max(np.abs(X - X.conj().T)) > tol * scale:
        raise ValueError("hvec needs a Hermitian matrix")
    out = np.empty(n * n)
    i, j = _lower(n)
    diag = i == j
    slot = hvec_index(i, j, n)
    vals = X[i, j]
    out[slot[diag]] = vals[diag].real
    out[slot[~diag]] = SQRT2 * vals[~diag].real
    out[slot[~diag] + 1] = SQRT2 * vals[~diag].imag
    return out


def hvec_inv(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = math.isqrt(x.size)
    if n * n != x.size:
        raise ValueError("hvec length must be a perfect square")
    i, j = _lower(n)
    diag = i == j
    slot = hvec_index(i, j, n)
    vals = np.where(diag, x[slot], (x[slot] + 1j * x[np.minimum(slot + 1, x.size - 1)]) / SQRT2)
    X = np.zeros((n, n), dtype=complex)
    X[i, j] = vals
    X[j, i] = np.conj(vals)
    X[np.diag_indices(n)] = X.diagonal().real
    return X


def svec(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    i, j = _lower(n)
    return np.where(i == j, 1.0, SQRT2) * X[i, j]


def svec_inv(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = int(round((math.sqrt(8 * x.size + 1) - 1) / 2))
    if n * (n + 1) // 2 != x.size:
        raise ValueError("invalid svec length")
    i, j = _lower(n)
    vals = np.where(i == j, 1.0, 1.0 / SQRT2) * x
    X = np.zeros((n, n))
    X[i, j] = vals
    X[j, i] = vals
    return X


def herm_coefficients(i, j, g, n: int) -> tuple[np.ndarray, np.ndarray]:
    """hvec coefficients of ``X -> Re tr(G X)`` for ``G`` given as COO triplets.

    ``Re tr(G X) = tr(H X)`` with ``H`` the Hermitian part of ``G``, so the
    result is ``hvec(H)`` restricted to its support (duplicates not summed).
    """
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    g = np.asarray(g, dtype=complex)
    diag = i == j
    low = i > j
    # tr(G X) = sum G[i, j] X[j, i]; H[p, q] for p > q collects G[p, q]/2 and conj(G[q, p])/2
    h = np.where(low, g / 2, np.conj(g) / 2)
    p = np.where(low, i, j)
    q = np.where(low, j, i)
    base = hvec_index(p, q, n)
    od = ~diag
    slots = np.r_[base[diag], base[od], base[od] + 1]
    vals = np.r_[g[diag].real, SQRT2 * h[od].real, SQRT2 * h[od].imag]
    return slots, vals


# ---------------------------------------------------------------------------
# Cone layout and problem container


@dataclass(frozen=True)
class ConeSpec:
    """Cartesian product ``R_+^nonneg x Q^{soc[0]} x ... x PSD^{psd[0]} x ...``.

    PSD blocks are Hermitian (hvec, ``r**2`` scalars) or real symmetric
    (svec, ``r(r+1)/2`` scalars) according to ``hermitian``.
    """

    nonneg: int = 0
    soc: tuple[int, ...] = ()
    psd: tuple[int, ...] = ()
    hermitian: bool = True

    def psd_length(self, r: int) -> int:
        return r * r if self.hermitian else r * (r + 1) // 2

    @cached_property
    def size(self) -> int:
        return self.nonneg + sum(self.soc) + sum(self.psd_length(r) for r in self.psd)

    @cached_property
    def soc_offsets(self) -> np.ndarray:
        return self.nonneg + np.r_[0, np.cumsum(self.soc, dtype=np.int64)].astype(np.int64)

    @cached_property
    def psd_offsets(self) -> np.ndarray:
        start = self.nonneg + sum(self.soc)
        lens = [self.psd_length(r) for r in self.psd]
        return start + np.r_[0, np.cumsum(lens, dtype=np.int64)].astype(np.int64)

    def blocks(self):
        """Yield ``(kind, start, stop, order)`` for every cone block."""
        if self.nonneg:
            yield "nonneg", 0, self.nonneg, self.nonneg
        for k, m in enumerate(self.soc):
            o = int(self.soc_offsets[k])
            yield "soc", o, o + m, m
        kind = "hpsd" if self.hermitian else "spsd"
        for k, r in enumerate(self.psd):
            o = int(self.psd_offsets[k])
            yield kind, o, o + self.psd_length(r), r

    def to_dict(self) -> dict:
        return {
            "nonneg": self.nonneg,
            "soc": list(self.soc),
            "psd": list(self.psd),
            "hermitian": self.hermitian,
        }


@dataclass(frozen=True)
class ClpCounts:
    """Set sizes driving the variable/row counts.

    ``n_gen_p``/``n_gen_q`` count generators whose active/reactive output is
    a decision variable (not fixed by preprocessing).
    """

    n_bus: int
    n_gen: int
    n_gen_p: int
    n_gen_q: int
    n_quad: int
    n_flow: int
    n_pa: int

    @property
    def n_l(self) -> int:
        return 2 * self.n_gen_p + 2 * self.n_gen_q + self.n_quad + 2 * self.n_bus + 2 * self.n_pa

    @property
    def n_q(self) -> int:
        return 2 * self.n_flow + self.n_quad

    @property
    def N(self) -> int:
        return self.n_l + 3 * self.n_q + self.n_bus**2

    @property
    def M(self) -> int:
        return 4 * self.n_bus + self.n_gen_p + self.n_gen_q + 2 * self.n_pa + 3 * self.n_q

    def to_dict(self) -> dict:
        return {
            "n_bus": self.n_bus,
            "n_gen": self.n_gen,
            "n_gen_p": self.n_gen_p,
            "n_gen_q": self.n_gen_q,
            "n_quad": self.n_quad,
            "n_flow": self.n_flow,
            "n_pa": self.n_pa,
            "n_l": self.n_l,
            "n_q": self.n_q,
            "N": self.N,
            "M": self.M,
        }


def paper_counts(n_bus: int, n_gen: int, n_quad: int, n_flow: int, n_pa: int) -> dict[str, int]:
    """Reference counts for a case without fixed generators."""
    n_l = 4 * n_gen + n_quad + 2 * n_bus + 2 * n_pa
    n_q = 2 * n_flow + n_quad
    return {
        "n_l": n_l,
        "n_q": n_q,
        "N": n_l + 3 * n_q + n_bus**2,
        "M": 4 * n_bus + 2 * n_gen + 2 * n_pa + 3 * n_q,
    }


@dataclass
class ConeLP:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    cones: ConeSpec
    offset: float = 0.0
    index_map: dict[str, np.ndarray] = field(default_factory=dict)
    row_map: dict[str, slice] = field(default_factory=dict)
    counts: ClpCounts | None = None
    case: CaseData | None = field(default=None, repr=False)
    model: AdmittanceModel | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def x_start(self) -> int:
        """Column of the first PSD-block entry."""
        return int(self.cones.psd_offsets[0])

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.offset

    def to_json(self) -> str:
        """Debug dump: block layout, triplet matrix, right-hand side, offset."""
        A = self.A.tocoo()
        doc = {
            "cones": self.cones.to_dict(),
            "shape": list(self.A.shape),
            "offset": self.offset,
            "c": self.c.tolist(),
            "b": self.b.tolist(),
            "A": {"row": A.row.tolist(), "col": A.col.tolist(), "val": A.data.tolist()},
            "rows": {k: [s.start, s.stop] for k, s in self.row_map.items()},
            "counts": self.counts.to_dict() if self.counts else None,
        }
        return json.dumps(doc)


# ---------------------------------------------------------------------------
# Builder


_DROP_TOL = 1e-13


class _Triplets:
    def __init__(self):
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add(self, rows, cols, vals):
        rows, cols, vals = np.broadcast_arrays(
            np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64), np.asarray(vals, float)
        )
        self.rows.append(rows.ravel())
        self.cols.append(cols.ravel())
        self.vals.append(vals.ravel())

    def matrix(self, shape) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix(shape)
        A = sp.csr_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=shape,
        )
        A.sum_duplicates()
        # cancellation leftovers from forming Hermitian parts
        absd = np.abs(A.data)
        nz = np.diff(A.indptr) > 0
        rowmax = np.zeros(shape[0])
        rowmax[nz] = np.maximum.reduceat(absd, A.indptr[:-1][nz])
        A.data[absd <= _DROP_TOL * np.repeat(rowmax, np.diff(A.indptr))] = 0.0
        A.eliminate_zeros()
        return A


def build_clp(case: CaseData, model: AdmittanceModel | None = None) -> ConeLP:
    """Assemble the relaxation cone LP of a preprocessed case."""
    model = model or build_admittance(case)
    n = case.n_bus
    idx = case.bus_index()
    gens = case.generators
    for g in gens:
        if g.cost.alpha < 0:
            raise ValueError(f"generator at bus {g.bus}: negative quadratic cost")

    gbus = np.array([idx[g.bus] for g in gens], dtype=np.int64)
    pmin = np.array([g.Pmin for g in gens])
    pmax = np.array([g.Pmax for g in gens])
    qmin = np.array([g.Qmin for g in gens])
    qmax = np.array([g.Qmax for g in gens])
    alpha = np.array([g.cost.alpha for g in gens])
    beta = np.array([g.cost.beta for g in gens])
    gp = np.array([k for k, g in enumerate(gens) if not g.fixed_p], dtype=np.int64)
    gq = np.array([k for k, g in enumerate(gens) if not g.fixed_q], dtype=np.int64)
    gquad = np.array([k for k in gp if alpha[k] > 0], dtype=np.int64)
    fl = np.flatnonzero(model.rate > 0)
    pa = np.array([k for k, br in enumerate(case.branches) if br.has_angle_limit], dtype=np.int64)
    for k in pa:
        br = case.branches[k]
        if not (-math.pi / 2 < br.angmin < math.pi / 2 and -math.pi / 2 < br.angmax < math.pi / 2):
            raise ValueError(f"branch {k}: angle bound outside (-pi/2, pi/2)")

    counts = ClpCounts(
        n_bus=n,
        n_gen=len(gens),
        n_gen_p=gp.size,
        n_gen_q=gq.size,
        n_quad=gquad.size,
        n_flow=fl.size,
        n_pa=pa.size,
    )

    # column layout
    cursor = 0

    def take(m):
        nonlocal cursor
        out = np.arange(cursor, cursor + m, dtype=np.int64)
        cursor += m
        return out

    col = {
        "p_l": take(gp.size),
        "p_u": take(gp.size),
        "q_l": take(gq.size),
        "q_u": take(gq.size),
        "t": take(gquad.size),
        "nu_l": take(n),
        "nu_u": take(n),
        "y_l": take(pa.size),
        "y_u": take(pa.size),
    }
    assert cursor == counts.n_l
    col["z"] = take(6 * fl.size).reshape(-1, 3)  # rows 2k (from) and 2k+1 (to)
    col["w"] = take(3 * gquad.size).reshape(-1, 3)
    x0 = cursor
    cursor += n * n
    assert cursor == counts.N

    # row layout
    rcursor = 0
    rows: dict[str, slice] = {}
    for name, m in (
        ("p_balance", n),
        ("q_balance", n),
        ("p_box", gp.size),
        ("q_box", gq.size),
        ("v_lower", n),
        ("v_upper", n),
        ("flow", 3 * 2 * fl.size),
        ("epigraph", 3 * gquad.size),
        ("angle_lower", pa.size),
        ("angle_upper", pa.size),
    ):
        rows[name] = slice(rcursor, rcursor + m)
        rcursor += m
    assert rcursor == counts.M

    T = _Triplets()
    b = np.zeros(counts.M)

    def add_x(row_ids, i, j, g):
        slots, vals = herm_coefficients(i, j, g, n)
        r = np.broadcast_to(np.asarray(row_ids, dtype=np.int64), np.shape(i))
        d = np.asarray(i) == np.asarray(j)
        T.add(np.r_[r[d], r[~d], r[~d]], x0 + slots, vals)

    # power balance: tr(Y_k X) - sum p_l = sum Pmin - Pd
    Y = model.Ybus.tocoo()
    p0, q0 = rows["p_balance"].start, rows["q_balance"].start
    add_x(p0 + Y.row, Y.row, Y.col, Y.data)
    add_x(q0 + Y.row, Y.row, Y.col, 1j * Y.data)
    T.add(p0 + gbus[gp], col["p_l"], -1.0)
    T.add(q0 + gbus[gq], col["q_l"], -1.0)
    pd = np.array([bus.Pd for bus in case.buses])
    qd = np.array([bus.Qd for bus in case.buses])
    b[rows["p_balance"]] = np.bincount(gbus, weights=pmin, minlength=n) - pd
    b[rows["q_balance"]] = np.bincount(gbus, weights=qmin, minlength=n) - qd

    # generation boxes
    r = rows["p_box"].start + np.arange(gp.size)
    T.add(r, col["p_l"], 1.0)
    T.add(r, col["p_u"], 1.0)
    b[rows["p_box"]] = pmax[gp] - pmin[gp]
    r = rows["q_box"].start + np.arange(gq.size)
    T.add(r, col["q_l"], 1.0)
    T.add(r, col["q_u"], 1.0)
    b[rows["q_box"]] = qmax[gq] - qmin[gq]

    # voltage magnitudes
    buses = np.arange(n)
    vmin = np.array([bus.Vmin for bus in case.buses])
    vmax = np.array([bus.Vmax for bus in case.buses])
    diag_slots = x0 + hvec_index(buses, buses, n)
    T.add(rows["v_lower"].start + buses, diag_slots, 1.0)
    T.add(rows["v_lower"].start + buses, col["nu_l"], -1.0)
    b[rows["v_lower"]] = vmin**2
    T.add(rows["v_upper"].start + buses, diag_slots, 1.0)
    T.add(rows["v_upper"].start + buses, col["nu_u"], 1.0)
    b[rows["v_upper"]] = vmax**2

    # flow cones: z = [Smax, tr(T X), tr(T~ X)]
    f0 = rows["flow"].start
    for end, Ymat, metered in (("from", model.Yf, model.f), ("to", model.Yt, model.t)):
        sub = Ymat[fl].tocoo()
        cone = 2 * sub.row + (0 if end == "from" else 1)  # cone number per entry
        zc = col["z"][2 * np.arange(fl.size) + (0 if end == "from" else 1)]
        rbase = f0 + 3 * (2 * np.arange(fl.size) + (0 if end == "from" else 1))
        T.add(rbase, zc[:, 0], 1.0)
        b[rbase] = model.rate[fl]
        T.add(rbase + 1, zc[:, 1], 1.0)
        T.add(rbase + 2, zc[:, 2], 1.0)
        # G = conj(y_row)^T e_end^T  ->  entries (l, end, conj(y_l))
        gi = sub.col
        gj = metered[fl][sub.row]
        gval = np.conj(sub.data)
        rr = f0 + 3 * cone
        add_x(rr + 1, gi, gj, -gval)
        add_x(rr + 2, gi, gj, 1j * gval)  # -(-j) G

    # epigraph cones: w = [1/2 + t, 1/2 - t, sqrt(2 alpha) p_l]
    e0 = rows["epigraph"].start
    pos_in_gp = {int(k): m for m, k in enumerate(gp)}
    for m, k in enumerate(gquad):
        w = col["w"][m]
        r = e0 + 3 * m
        tk, pk = col["t"][m], col["p_l"][pos_in_gp[int(k)]]
        T.add(
            [r, r, r + 1, r + 1, r + 2, r + 2],
            [w[0], tk, w[1], tk, w[2], pk],
            [1.0, -1.0, 1.0, 1.0, 1.0, -math.sqrt(2 * alpha[k])],
        )
        b[r] = 0.5
        b[r + 1] = 0.5

    # phase angles: Im X_kl - tan(phi) Re X_kl -/+ y = 0, k = from, l = to
    if pa.size:
        k_ = model.f[pa]
        l_ = model.t[pa]
        tmin = np.tan([case.branches[k].angmin for k in pa])
        tmax = np.tan([case.branches[k].angmax for k in pa])
        # Re X_kl <- G = E_lk;  Im X_kl <- G = -j E_lk
        rl = rows["angle_lower"].start + np.arange(pa.size)
        ru = rows["angle_upper"].start + np.arange(pa.size)
        add_x(rl, l_, k_, -1j - tmin)
        add_x(ru, l_, k_, -1j - tmax)
        T.add(rl, col["y_l"], -1.0)
        T.add(ru, col["y_u"], 1.0)

    A = T.matrix((counts.M, counts.N))

    c = np.zeros(counts.N)
    c[col["p_l"]] = beta[gp] + 2 * alpha[gp] * pmin[gp]
    c[col["t"]] = 1.0
    offset = float(sum(g.cost(g.Pmin) for g in gens))

    col["X"] = np.array([x0, counts.N], dtype=np.int64)
    col["gens_p"] = gp
    col["gens_q"] = gq
    col["gens_quad"] = gquad
    col["flow_branches"] = fl
    col["pa_branches"] = pa

    cones = ConeSpec(nonneg=counts.n_l, soc=(3,) * counts.n_q, psd=(n,), hermitian=True)
    return ConeLP(
        c=c,
        A=A,
        b=b,
        cones=cones,
        offset=offset,
        index_map=col,
        row_map=rows,
        counts=counts,
        case=case,
        model=model,
    )


def embed_point(v: np.ndarray, s: np.ndarray, lp: ConeLP) -> np.ndarray:
    """Lift an ACOPF point ``(v, s)`` to the cone LP variable ``x``.

    ``X = v v^H``; lower slacks follow their definitions (``p_l = p - Pmin``)
    and upper slacks are clipped at zero so that bound violations surface as
    residuals of the matching rows.
    """
    if lp.case is None or lp.model is None:
        raise ValueError("embed_point needs a cone LP built from a case")
    case, model, col = lp.case, lp.model, lp.index_map
    v = np.asarray(v, dtype=complex)
    s = np.asarray(s, dtype=complex)
    n = case.n_bus
    if v.shape != (n,) or s.shape != (len(case.generators),):
        raise ValueError("dimension mismatch")
    gens = case.generators
    gp, gq, gquad = col["gens_p"], col["gens_q"], col["gens_quad"]
    pmin = np.array([g.Pmin for g in gens])
    pmax = np.array([g.Pmax for g in gens])
    qmin = np.array([g.Qmin for g in gens])
    qmax = np.array([g.Qmax for g in gens])
    alpha = np.array([g.cost.alpha for g in gens])

    x = np.zeros(lp.N)
    p, q = s.real, s.imag
    x[col["p_l"]] = p[gp] - pmin[gp]
    x[col["p_u"]] = np.maximum(pmax[gp] - p[gp], 0.0)
    x[col["q_l"]] = q[gq] - qmin[gq]
    x[col["q_u"]] = np.maximum(qmax[gq] - q[gq], 0.0)
    pl_quad = p[gquad] - pmin[gquad]
    t = alpha[gquad] * pl_quad**2
    x[col["t"]] = t

    vm2 = np.abs(v) ** 2
    x[col["nu_l"]] = np.maximum(vm2 - np.array([b.Vmin for b in case.buses]) ** 2, 0.0)
    x[col["nu_u"]] = np.maximum(np.array([b.Vmax for b in case.buses]) ** 2 - vm2, 0.0)

    pa = col["pa_branches"]
    if pa.size:
        xkl = v[model.f[pa]] * np.conj(v[model.t[pa]])
        tmin = np.tan([case.branches[k].angmin for k in pa])
        tmax = np.tan([case.branches[k].angmax for k in pa])
        x[col["y_l"]] = np.maximum(xkl.imag - tmin * xkl.real, 0.0)
        x[col["y_u"]] = np.maximum(tmax * xkl.real - xkl.imag, 0.0)

    fl = col["flow_branches"]
    if fl.size:
        sf = v[model.f[fl]] * np.conj(model.Yf[fl] @ v)
        st = v[model.t[fl]] * np.conj(model.Yt[fl] @ v)
        z = col["z"]
        x[z[0::2, 0]] = model.rate[fl]
        x[z[0::2, 1]] = sf.real
        x[z[0::2, 2]] = sf.imag
        x[z[1::2, 0]] = model.rate[fl]
        x[z[1::2, 1]] = st.real
        x[z[1::2, 2]] = st.imag

    w = col["w"]
    if gquad.size:
        x[w[:, 0]] = 0.5 + t
        x[w[:, 1]] = 0.5 - t
        x[w[:, 2]] = np.sqrt(2 * alpha[gquad]) * pl_quad

    x0 = int(col["X"][0])
    x[x0:] = hvec(np.outer(v, np.conj(v)))
    return x
