"""Primal-dual interior-point method for ``min c'x, Ax = b, x in R_+^k x PSD``.

Nesterov-Todd scaling with Mehrotra predictor-corrector steps; the Schur
complement ``A W A'`` is assembled block by block over the rows each PSD
block touches and factored sparsely. Only real symmetric PSD blocks
(svec coordinates) and a leading nonnegative block are handled here; the
caller maps second-order cones of dimension 3 and Hermitian blocks first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .relax import SQRT2, svec_index


class IpmFailure(RuntimeError):
    """Breakdown of the iteration; ``last`` holds the final ``(x, y, s, iters, history)``."""

    def __init__(self, msg: str, last=None):
        super().__init__(msg)
        self.last = last


def _layout(q: int):
    j, i = np.triu_indices(q)  # column-major lower triangle
    return i, j, svec_index(i, j, q)


@dataclass
class _Group:
    """All PSD blocks of one order ``q``."""

    q: int
    starts: np.ndarray

    def __post_init__(self):
        q = self.q
        self.L = q * (q + 1) // 2
        self.idx = self.starts[:, None] + np.arange(self.L)
        i, j, slot = _layout(q)
        self.i, self.j, self.slot = i, j, slot
        self.w = np.where(i == j, 1.0, SQRT2)

    def mats(self, v: np.ndarray) -> np.ndarray:
        V = v[self.idx][:, self.slot] / self.w
        Z = np.zeros((len(self.starts), self.q, self.q))
        Z[:, self.i, self.j] = V
        Z[:, self.j, self.i] = V
        return Z

    def vec(self, Z: np.ndarray, out: np.ndarray) -> None:
        V = np.empty((Z.shape[0], self.L))
        V[:, self.slot] = Z[:, self.i, self.j] * self.w
        out[self.idx] = V

    def identity(self, out: np.ndarray, scale) -> None:
        Z = np.broadcast_to(np.eye(self.q), (len(self.starts), self.q, self.q)) * np.asarray(scale)[:, None, None]
        self.vec(Z, out)


def _sym(Z):
    return 0.5 * (Z + np.swapaxes(Z, 1, 2))


def _jordan(a, b):
    return _sym(a @ b)


def _diag_solve(lam, R):
    """``U`` with ``diag(lam) o U = R``: ``U_ij = 2 R_ij / (lam_i + lam_j)``."""
    return 2.0 * R / (lam[:, :, None] + lam[:, None, :])


class _Schur:
    """Per-block data for assembling ``sum_B A_B W_B A_B'``."""

    def __init__(self, A: sp.csc_matrix, nonneg: int, groups: list[_Group]):
        self.M = A.shape[0]
        self.A_nn = A[:, :nonneg].tocsr()
        self.blocks = []
        for gi, g in enumerate(groups):
            for k, start in enumerate(g.starts):
                sub = A[:, start : start + g.L].tocoo()
                rows = np.unique(sub.row)
                cols = np.unique(sub.col)
                if rows.size == 0:
                    continue
                rmap = np.searchsorted(rows, sub.row)
                cmap = np.searchsorted(cols, sub.col)
                AB = sp.csr_matrix((sub.data, (rmap, cmap)), shape=(rows.size, cols.size))
                # svec positions -> (r, c) matrix entries
                i, j = g.i[np.argsort(g.slot)], g.j[np.argsort(g.slot)]
                r, c = i[cols], j[cols]
                s = np.where(r == c, 1.0, SQRT2)
                self.blocks.append((gi, k, rows, AB, r, c, s))
        rr = [np.repeat(b[2], b[2].size) for b in self.blocks]
        cc = [np.tile(b[2], b[2].size) for b in self.blocks]
        self.rows = np.concatenate(rr) if rr else np.zeros(0, dtype=np.int64)
        self.cols = np.concatenate(cc) if cc else np.zeros(0, dtype=np.int64)

    def matrix(self, W: list[np.ndarray]) -> sp.csc_matrix:
        """PSD part of the Schur complement."""
        vals = []
        for gi, k, rows, AB, r, c, s in self.blocks:
            Wk = W[gi][k]
            K = 0.5 * np.outer(s, s) * (Wk[np.ix_(r, r)] * Wk[np.ix_(c, c)] + Wk[np.ix_(r, c)] * Wk[np.ix_(c, r)])
            AK = (AB @ K)  # dense rows x support
            HB = AB @ AK.T
            vals.append(np.asarray(HB).ravel())
        data = np.concatenate(vals) if vals else np.zeros(0)
        return sp.csc_matrix((data, (self.rows, self.cols)), shape=(self.M, self.M))


class _Newton:
    """Solves ``(H_psd + A_nn G A_nn') dy = r`` through the augmented system

    ``[[H_psd, A_nn], [A_nn', -G^-1]]``. Nonnegative columns with extreme
    ratios ``x/s`` then enter as pivots instead of rank-one terms of size
    ``1/mu`` in the normal equations.
    """

    def __init__(self, H_psd: sp.csc_matrix, A_nn: sp.csr_matrix, g: np.ndarray):
        M, k = A_nn.shape
        self.M = M
        self.H = H_psd + A_nn @ sp.diags(g) @ A_nn.T
        K = sp.bmat([[H_psd, A_nn], [A_nn.T, sp.diags(-1.0 / g)]], format="csc")
        dk = np.abs(K.diagonal())
        dk[:M] = np.maximum(dk[:M], np.abs(self.H.diagonal()))
        self.d = 1.0 / np.sqrt(np.where(dk > 0, dk, 1.0))
        D = sp.diags(self.d)
        self.lu = spla.splu((D @ K @ D).tocsc(), permc_spec="MMD_AT_PLUS_A")

    def solve(self, r: np.ndarray) -> np.ndarray:
        rhs = np.zeros(self.d.size)
        rhs[: self.M] = r
        return (self.d * self.lu.solve(self.d * rhs))[: self.M]


@dataclass
class IpmResult:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: str
    iterations: int
    history: list


def ipm(
    A: sp.csr_matrix,
    b: np.ndarray,
    c: np.ndarray,
    nonneg: int,
    psd: tuple[int, ...],
    check,
    max_iters: int = 100,
    eps_infeas: float = 1e-8,
    step: float = 0.98,
    patience: int = 8,
) -> IpmResult:
    """Run the interior-point iteration.

    ``check(x, y, s)`` returns a merit that is at most 1 once the caller's
    stopping test passes; it sees the current (scaled, mapped) iterate. The
    run ends as ``stalled`` when neither the merit, the residual norms nor
    ``mu`` improved by 10% over ``patience`` iterations.
    """
    M, N = A.shape
    A = A.tocsr()
    Acsc = A.tocsc()
    starts = nonneg + np.r_[0, np.cumsum([q * (q + 1) // 2 for q in psd])].astype(np.int64)[:-1]
    orders = sorted(set(psd))
    groups = [_Group(q, starts[np.asarray(psd) == q]) for q in orders]
    schur = _Schur(Acsc, nonneg, groups)
    nu = nonneg + sum(psd)

    # starting point: scaled identities
    rown = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    xi = max(10.0, float(np.max((1 + np.abs(b)) / (1 + rown), initial=1.0)) * np.sqrt(max(nu, 1)))
    eta = max(10.0, float(np.max(rown, initial=1.0)), float(np.max(np.abs(c), initial=1.0)))
    x = np.zeros(N)
    s = np.zeros(N)
    x[:nonneg] = xi
    s[:nonneg] = eta
    for g in groups:
        g.identity(x, np.full(len(g.starts), xi))
        g.identity(s, np.full(len(g.starts), eta))
    y = np.zeros(M)
    hist = []

    def step_len(v, dv, chol_groups):
        a = 1.0
        if nonneg:
            neg = dv[:nonneg] < 0
            if np.any(neg):
                a = min(a, float(np.min(-v[:nonneg][neg] / dv[:nonneg][neg])))
        for g, Lc in zip(groups, chol_groups):
            D = g.mats(dv)
            T = np.linalg.solve(Lc, D)
            Mx = np.linalg.solve(Lc, np.swapaxes(T, 1, 2))
            lmin = np.linalg.eigvalsh(_sym(Mx))[:, 0]
            worst = float(np.min(lmin))
            if worst < 0:
                a = min(a, -1.0 / worst)
        return a

    status = "max_iters"
    best, since = np.full(4, np.inf), 0
    it = 0
    for it in range(1, max_iters + 1):
        rp = b - A @ x
        rd = c - Acsc.T @ y - s
        mu = float(x @ s) / nu
        merit = check(x, y, s)
        if merit <= 1.0:
            status = "optimal"
            it -= 1
            break
        prog = np.array([merit, np.linalg.norm(rp), np.linalg.norm(rd), mu])
        if np.any(prog < 0.9 * best):
            best, since = np.minimum(best, prog), 0
        else:
            since += 1
            if since >= patience:
                status = "stalled"
                it -= 1
                break
        # divergence-based certificates
        by = float(b @ y)
        if by > 0 and np.linalg.norm(Acsc.T @ y + s) <= eps_infeas * by:
            status = "infeasible"
            break
        cx = float(c @ x)
        if cx < 0 and np.linalg.norm(A @ x) <= eps_infeas * -cx:
            status = "unbounded"
            break
        hist.append((it, float(np.linalg.norm(rp)), float(np.linalg.norm(rd)), mu))

        # Nesterov-Todd scaling
        try:
            xn, sn = x[:nonneg], s[:nonneg]
            g_nn = xn / sn
            lam_nn = np.sqrt(xn * sn)
            Lx, R, Rinv, Wnt, lam = [], [], [], [], []
            for g in groups:
                Lxg = np.linalg.cholesky(g.mats(x))
                Lsg = np.linalg.cholesky(g.mats(s))
                U, sv, Vt = np.linalg.svd(np.swapaxes(Lsg, 1, 2) @ Lxg)
                Rg = Lxg @ np.swapaxes(Vt, 1, 2) / np.sqrt(sv)[:, None, :]
                Lx.append(Lxg)
                R.append(Rg)
                Rinv.append(np.linalg.inv(Rg))
                Wnt.append(Rg @ np.swapaxes(Rg, 1, 2))
                lam.append(sv)
        except np.linalg.LinAlgError as exc:
            raise IpmFailure(f"scaling failed: {exc}", (x, y, s, it - 1, hist)) from exc

        try:
            lu = _Newton(schur.matrix(Wnt), schur.A_nn, g_nn)
        except RuntimeError as exc:
            raise IpmFailure(f"Schur factorization failed: {exc}", (x, y, s, it - 1, hist)) from exc

        def direction(rc_nn, rc_psd):
            # xi = lam \ rc ; solve for (dx, dy, ds)
            xi_nn = rc_nn / lam_nn
            wxi = np.zeros(N)
            grd = np.zeros(N)
            wxi[:nonneg] = np.sqrt(g_nn) * xi_nn
            grd[:nonneg] = g_nn * rd[:nonneg]
            for gi, g in enumerate(groups):
                Xi = _diag_solve(lam[gi], rc_psd[gi])
                g.vec(R[gi] @ Xi @ np.swapaxes(R[gi], 1, 2), wxi)
                g.vec(Wnt[gi] @ g.mats(rd) @ Wnt[gi], grd)
            rhs = rp - A @ wxi + A @ grd
            dy = lu.solve(rhs)
            ds = rd - Acsc.T @ dy
            dx = wxi - apply_g(ds)
            # refine against the primal equation; the other two stay exact
            for _ in range(3):
                e = rp - A @ dx
                if np.linalg.norm(e) <= 1e-14 * (1 + np.linalg.norm(rp)):
                    break
                dd = lu.solve(e)
                if not np.all(np.isfinite(dd)):
                    break
                dy += dd
                ds -= Acsc.T @ dd
                dx += apply_g(Acsc.T @ dd)
            return dx, dy, ds

        def apply_g(v):
            out = np.empty(N)
            out[:nonneg] = g_nn * v[:nonneg]
            for gi, g in enumerate(groups):
                g.vec(Wnt[gi] @ g.mats(v) @ Wnt[gi], out)
            return out

        Ls = [np.linalg.cholesky(g.mats(s)) for g in groups]
        # predictor
        rc_nn = -lam_nn * lam_nn
        rc_psd = [-np.einsum("ki,ij->kij", l * l, np.eye(g.q)) for l, g in zip(lam, groups)]
        dxa, dya, dsa = direction(rc_nn, rc_psd)
        ap = step_len(x, dxa, Lx)
        ad = step_len(s, dsa, Ls)
        mu_aff = float((x + ap * dxa) @ (s + ad * dsa)) / nu
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
        # corrector
        rc_nn = sigma * mu - lam_nn * lam_nn - (dxa[:nonneg] / np.sqrt(g_nn)) * (np.sqrt(g_nn) * dsa[:nonneg])
        rc_psd = []
        for gi, g in enumerate(groups):
            wx = Rinv[gi] @ g.mats(dxa) @ np.swapaxes(Rinv[gi], 1, 2)
            ws = np.swapaxes(R[gi], 1, 2) @ g.mats(dsa) @ R[gi]
            eye = np.eye(g.q)
            rc_psd.append(
                sigma * mu * eye - np.einsum("ki,ij->kij", lam[gi] ** 2, eye) - _jordan(wx, ws)
            )
        dx, dy, ds = direction(rc_nn, rc_psd)
        ap = min(1.0, step * step_len(x, dx, Lx))
        ad = min(1.0, step * step_len(s, ds, Ls))
        x = x + ap * dx
        y = y + ad * dy
        s = s + ad * ds
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(s))):
            raise IpmFailure("non-finite iterate")
    return IpmResult(x=x, y=y, s=s, status=status, iterations=it, history=hist)
