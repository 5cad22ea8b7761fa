"""Admittance matrices, power injection/flow coefficient matrices, and an
ACOPF feasibility evaluator.

Conventions: ``X = v v^H``, bus injection ``S_k = v_k conj((Y v)_k)``, branch
flow metered at the sending end ``S = v_end conj(y_row v)`` (MATPOWER).
Every quadratic form used here is represented by a Hermitian matrix ``H``
with ``v^H H v = Re(v^H G v)`` for a sparse complex ``G``; ``H`` is the
Hermitian part ``(G + G^H)/2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .caseio import CaseData

__all__ = [
    "AdmittanceModel",
    "ResidualReport",
    "build_admittance",
    "evaluate_acopf",
    "flow_matrices",
    "hermitian_part",
    "injection_matrices",
]


@dataclass(frozen=True)
class AdmittanceModel:
    """Bus admittance matrix plus per-branch current rows.

    ``Yf[l] @ v`` is the current entering branch ``l`` at its from-end,
    ``Yt[l] @ v`` the current at its to-end.
    """

    Ybus: sp.csr_matrix
    Yf: sp.csr_matrix
    Yt: sp.csr_matrix
    f: np.ndarray
    t: np.ndarray
    rate: np.ndarray

    @property
    def n(self) -> int:
        return self.Ybus.shape[0]

    def branch_row(self, branch: int, end: str) -> tuple[int, sp.csr_matrix]:
        """Metered bus and current row for one branch end."""
        if end == "from":
            return int(self.f[branch]), self.Yf[branch]
        if end == "to":
            return int(self.t[branch]), self.Yt[branch]
        raise ValueError(f"end must be 'from' or 'to', not {end!r}")


def build_admittance(case: CaseData) -> AdmittanceModel:
    """Assemble the pi-model admittance matrices of a preprocessed case."""
    n = case.n_bus
    idx = case.bus_index()
    nl = len(case.branches)
    f = np.array([idx[br.from_bus] for br in case.branches], dtype=np.int64)
    t = np.array([idx[br.to_bus] for br in case.branches], dtype=np.int64)
    r = np.array([br.r for br in case.branches])
    x = np.array([br.x for br in case.branches])
    bc = np.array([br.b for br in case.branches])
    tap = np.array([br.tau * np.exp(1j * br.theta_shift) for br in case.branches], dtype=complex)
    rate = np.array([br.rateA for br in case.branches])

    ys = 1.0 / (r + 1j * x) if nl else np.zeros(0, dtype=complex)
    ytt = ys + 0.5j * bc
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap

    rows = np.arange(nl)
    Yf = sp.csr_matrix(
        (np.r_[yff, yft], (np.r_[rows, rows], np.r_[f, t])), shape=(nl, n), dtype=complex
    )
    Yt = sp.csr_matrix(
        (np.r_[ytf, ytt], (np.r_[rows, rows], np.r_[f, t])), shape=(nl, n), dtype=complex
    )
    ysh = np.array([b.Gs + 1j * b.Bs for b in case.buses], dtype=complex)
    Cf = sp.csr_matrix((np.ones(nl), (rows, f)), shape=(nl, n))
    Ct = sp.csr_matrix((np.ones(nl), (rows, t)), shape=(nl, n))
    Ybus = (Cf.T @ Yf + Ct.T @ Yt + sp.diags(ysh)).tocsr()
    Ybus.sum_duplicates()
    return AdmittanceModel(Ybus=Ybus, Yf=Yf.tocsr(), Yt=Yt.tocsr(), f=f, t=t, rate=rate)


def hermitian_part(G: sp.spmatrix) -> sp.csr_matrix:
    """``(G + G^H) / 2``."""
    G = sp.csr_matrix(G)
    return ((G + G.conj().T) * 0.5).tocsr()


def _row_outer(k: int, row: sp.spmatrix, n: int) -> sp.csr_matrix:
    """``e_k @ row`` as an n-by-n sparse matrix."""
    row = sp.csr_matrix(row)
    cols = row.indices
    return sp.csr_matrix((row.data, (np.full(cols.size, k), cols)), shape=(n, n))


def injection_matrices(model: AdmittanceModel, k: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Hermitian ``(Y_k, Y~_k)`` with ``v^H Y_k v = P_k`` and ``v^H Y~_k v = Q_k``."""
    n = model.n
    if not 0 <= k < n:
        raise IndexError(f"bus index {k} out of range")
    E = _row_outer(k, model.Ybus[k], n)
    Yk = hermitian_part(E)
    # Q_k = Im(v_k conj(i_k)) = Re(v^H (j e_k e_k^T Y) v)
    Yk_tilde = hermitian_part(1j * E)
    return Yk, Yk_tilde


def flow_matrices(model: AdmittanceModel, branch: int, end: str) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Hermitian ``(T, T~)`` with ``v^H T v + j v^H T~ v = v_end conj(y_row v)``."""
    if model.rate[branch] <= 0:
        raise ValueError(f"branch {branch} has no flow limit")
    n = model.n
    bus, row = model.branch_row(branch, end)
    row = sp.csr_matrix(row)
    # G = conj(y_row)^T e_end^T, so v^H G v = v_end conj(y_row v)
    G = sp.csr_matrix(
        (np.conj(row.data), (row.indices, np.full(row.indices.size, bus))), shape=(n, n)
    )
    return hermitian_part(G), hermitian_part(-1j * G)


@dataclass
class ResidualReport:
    """Constraint violations of a candidate ACOPF point.

    Vectors are signed where a sign is meaningful: ``balance`` is
    ``S_k(v) - sum(s_g) + S_k^d`` per bus; bound violations are the
    nonnegative overshoot.
    """

    balance: np.ndarray
    gen_p: np.ndarray
    gen_q: np.ndarray
    voltage: np.ndarray
    flow: np.ndarray
    angle: np.ndarray
    objective: float

    def worst(self) -> dict[str, float]:
        def mx(a):
            return float(np.max(np.abs(a))) if a.size else 0.0

        return {
            "balance": mx(self.balance),
            "gen_p": mx(self.gen_p),
            "gen_q": mx(self.gen_q),
            "voltage": mx(self.voltage),
            "flow": mx(self.flow),
            "angle": mx(self.angle),
        }


def _overshoot(x, lo, hi):
    return np.maximum(x - hi, 0.0) + np.maximum(lo - x, 0.0)


def evaluate_acopf(
    case: CaseData, v: np.ndarray, s: np.ndarray, model: AdmittanceModel | None = None
) -> ResidualReport:
    """Evaluate every ACOPF constraint family at ``(v, s)``.

    Never raises on infeasible input; the report carries the violations.
    """
    model = model or build_admittance(case)
    v = np.asarray(v, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if v.shape != (case.n_bus,) or s.shape != (len(case.generators),):
        raise ValueError("dimension mismatch between case and candidate point")
    idx = case.bus_index()

    injected = v * np.conj(model.Ybus @ v)
    demand = np.array([b.Pd + 1j * b.Qd for b in case.buses], dtype=complex)
    gen_at_bus = np.zeros(case.n_bus, dtype=complex)
    for g, sg in zip(case.generators, s):
        gen_at_bus[idx[g.bus]] += sg
    balance = injected - gen_at_bus + demand

    p, q = s.real, s.imag
    pmin = np.array([g.Pmin for g in case.generators])
    pmax = np.array([g.Pmax for g in case.generators])
    qmin = np.array([g.Qmin for g in case.generators])
    qmax = np.array([g.Qmax for g in case.generators])

    vm = np.abs(v)
    vmin = np.array([b.Vmin for b in case.buses])
    vmax = np.array([b.Vmax for b in case.buses])

    lim = model.rate > 0
    sf = v[model.f] * np.conj(model.Yf @ v)
    st = v[model.t] * np.conj(model.Yt @ v)
    flow = np.r_[
        np.maximum(np.abs(sf[lim]) - model.rate[lim], 0.0),
        np.maximum(np.abs(st[lim]) - model.rate[lim], 0.0),
    ]

    pa = np.array([br.has_angle_limit for br in case.branches], dtype=bool)
    if pa.any():
        dtheta = np.angle(v[model.f[pa]] * np.conj(v[model.t[pa]]))
        amin = np.array([br.angmin for br, m in zip(case.branches, pa) if m])
        amax = np.array([br.angmax for br, m in zip(case.branches, pa) if m])
        angle = _overshoot(dtheta, amin, amax)
    else:
        angle = np.zeros(0)

    objective = float(sum(g.cost(pg) for g, pg in zip(case.generators, p)))
    return ResidualReport(
        balance=balance,
        gen_p=_overshoot(p, pmin, pmax),
        gen_q=_overshoot(q, qmin, qmax),
        voltage=_overshoot(vm, vmin, vmax),
        flow=flow,
        angle=angle,
        objective=objective,
    )
