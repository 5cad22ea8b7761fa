import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import minimize

from acopf_sdr.conesolve import (
    ConeProjector,
    SolverOptions,
    Status,
    project_cone,
    project_soc,
    residuals,
    solve,
)
from acopf_sdr.diagnostics import dimacs
from acopf_sdr.relax import SQRT2, ConeLP, ConeSpec, hvec, svec, svec_inv

from conftest import pipeline, random_hermitian

METHODS = ["ipm", "admm"]
MIXED = [
    ConeSpec(nonneg=3, soc=(3, 3, 4), psd=(1, 2, 3), hermitian=False),
    ConeSpec(nonneg=2, soc=(3,), psd=(2, 3), hermitian=True),
]


def tiny_lp():
    """min x1  s.t.  x1 + x2 = 1, x >= 0."""
    return ConeLP(c=np.array([1.0, 0.0]), A=sp.csr_matrix(np.array([[1.0, 1.0]])), b=np.ones(1),
                  cones=ConeSpec(nonneg=2))


def trace_sdp():
    """min tr(X)  s.t.  X12 = 1, X in PSD(2)."""
    return ConeLP(c=svec(np.eye(2)), A=sp.csr_matrix(np.array([[0, 1 / SQRT2, 0]])), b=np.ones(1),
                  cones=ConeSpec(psd=(2,), hermitian=False))


def infeasible_sdp():
    """X11 = -1 with X in PSD(2)."""
    return ConeLP(c=np.zeros(3), A=sp.csr_matrix(np.array([[1.0, 0, 0]])), b=np.array([-1.0]),
                  cones=ConeSpec(psd=(2,), hermitian=False))


def unbounded_lp():
    """min -x1  s.t.  x1 - x2 = 0, x >= 0."""
    return ConeLP(c=np.array([-1.0, 0.0]), A=sp.csr_matrix(np.array([[1.0, -1.0]])), b=np.zeros(1),
                  cones=ConeSpec(nonneg=2))


class TestProjection:
    def test_nonneg(self):
        np.testing.assert_array_equal(project_cone(np.array([-1.0, 2.0]), ConeSpec(nonneg=2)), [0, 2])

    def test_soc_example(self):
        out = project_cone(np.array([0.0, 3.0, 4.0]), ConeSpec(soc=(3,)))
        np.testing.assert_allclose(out, [2.5, 1.5, 2.0], atol=1e-15)
        # dense oracle: nearest point of {||x|| <= t}
        v = np.array([0.0, 3.0, 4.0])
        res = minimize(lambda z: np.sum((z - v) ** 2), np.array([5.0, 0, 0]), method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda z: z[0] - np.linalg.norm(z[1:])}],
                       options={"ftol": 1e-14})
        np.testing.assert_allclose(out, res.x, atol=1e-6)

    def test_soc_degenerate_boundary(self):
        np.testing.assert_array_equal(project_soc(np.array([[-5.0, 3.0, 4.0]])), [[0, 0, 0]])

    def test_psd_clipping(self):
        U = np.array([[1, 1], [1, -1]]) / SQRT2
        X = U @ np.diag([-1.0, 2.0]) @ U.T
        out = svec_inv(project_cone(svec(X), ConeSpec(psd=(2,), hermitian=False)))
        np.testing.assert_allclose(out, U @ np.diag([0.0, 2.0]) @ U.T, atol=1e-14)

    def test_hermitian_psd_clipping(self, rng):
        X = random_hermitian(rng, 4)
        w, U = np.linalg.eigh(X)
        want = (U * np.maximum(w, 0)) @ U.conj().T
        np.testing.assert_allclose(project_cone(hvec(X), ConeSpec(psd=(4,))), hvec(want), atol=1e-12)

    @pytest.mark.parametrize("cones", MIXED, ids=["sym", "herm"])
    def test_properties_random_points(self, cones):
        rng = np.random.default_rng(11)
        P = ConeProjector(cones)
        for _ in range(5000):
            u, v = rng.standard_normal((2, cones.size)) * rng.uniform(0.1, 10)
            pu = P(u)
            np.testing.assert_allclose(P(pu), pu, atol=1e-12)
            assert np.linalg.norm(pu - P(v)) <= np.linalg.norm(u - v) + 1e-12
            pm = P(-u)
            np.testing.assert_allclose(pu - pm, u, atol=1e-10)
            assert abs(pu @ pm) <= 1e-10 * (1 + u @ u)

    def test_min_eigenvalues(self):
        cones = ConeSpec(psd=(2, 2), hermitian=False)
        v = np.r_[svec(np.diag([-1.0, 3.0])), svec(np.eye(2))]
        np.testing.assert_allclose(ConeProjector(cones).min_eigenvalues(v), [-1, 1])


class TestSolve:
    @pytest.mark.parametrize("method", METHODS)
    def test_tiny_lp(self, method):
        sol = solve(tiny_lp(), SolverOptions(method=method))
        assert sol.optimal
        np.testing.assert_allclose(sol.x, [0, 1], atol=1e-6)
        assert sol.objective_primal == pytest.approx(0, abs=1e-6)

    @pytest.mark.parametrize("method", METHODS)
    def test_trace_sdp(self, method):
        sol = solve(trace_sdp(), SolverOptions(method=method))
        assert sol.optimal
        assert sol.objective_primal == pytest.approx(2, abs=1e-5)
        np.testing.assert_allclose(svec_inv(sol.x), np.ones((2, 2)), atol=1e-4)

    def test_case9_bound_close_to_local_optimum(self):
        # PYPOWER runopf on case9: 5296.686203991521
        sol = solve(pipeline("case9").problem, SolverOptions())
        assert sol.optimal
        assert abs(5296.686203991521 - sol.objective_dual) / 5296.686203991521 <= 0.005

    @pytest.mark.parametrize("name", ["case9", "case30"])
    def test_optimal_meets_tolerance(self, name):
        lp = pipeline(name).problem
        opts = SolverOptions(eps_primal=1e-7, eps_dual=1e-7, eps_gap=1e-7)
        sol = solve(lp, opts)
        assert sol.optimal
        assert dimacs(lp, sol).worst() <= 10 * 1e-7

    @pytest.mark.parametrize("method", METHODS)
    def test_deterministic(self, method):
        lp = pipeline("case9").problem
        opts = SolverOptions(method=method, max_iters=300 if method == "admm" else 100)
        a, b = solve(lp, opts), solve(lp, opts)
        assert a.iterations == b.iterations and a.status == b.status
        for f in ("x", "y", "s"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    @pytest.mark.parametrize("name", ["case9", "case14"])
    def test_admm_residual_trend(self, name):
        sol = solve(pipeline(name).problem, SolverOptions(method="admm", max_iters=10000, eps_primal=1e-12,
                                                           eps_dual=1e-12, eps_gap=1e-12))
        hist = {it: max(rp, rd) for it, rp, rd, _ in sol.info["history"]}
        assert hist[10000] <= hist[1000]


class TestStatus:
    @pytest.mark.parametrize("method", METHODS)
    def test_max_iters(self, method):
        sol = solve(pipeline("case30").problem, SolverOptions(method=method, max_iters=5))
        assert sol.status is Status.MAX_ITERS and sol.iterations == 5

    @pytest.mark.parametrize("method", METHODS)
    def test_infeasible(self, method):
        assert solve(infeasible_sdp(), SolverOptions(method=method)).status is Status.INFEASIBLE

    @pytest.mark.parametrize("method", METHODS)
    def test_unbounded(self, method):
        assert solve(unbounded_lp(), SolverOptions(method=method)).status is Status.UNBOUNDED

    @pytest.mark.parametrize("kw", [dict(eps_primal=0), dict(max_iters=0), dict(alpha=2.0), dict(method="cg")])
    def test_bad_options(self, kw):
        with pytest.raises(ValueError):
            SolverOptions(**kw)


class TestResiduals:
    def test_embedded_point_with_exact_dual(self, rng):
        # build b and c around a chosen primal-dual pair
        lp = tiny_lp()
        x = np.array([0.0, 1.0])
        y = np.array([0.0])
        s = lp.c - lp.A.T @ y
        from acopf_sdr.conesolve import Solution

        rp, rd, gap = residuals(lp, Solution(x=x, y=y, s=s, status=Status.OPTIMAL))
        assert np.all(rp == 0) and np.all(rd == 0) and gap == 0

    def test_linearity(self, rng):
        from acopf_sdr.conesolve import Solution

        lp = pipeline("case9").problem
        x, y, s = rng.standard_normal(lp.N), rng.standard_normal(lp.M), rng.standard_normal(lp.N)
        base = residuals(lp, Solution(x=x, y=y, s=s, status=Status.OPTIMAL))[0]
        j, d = 40, 1e-3
        x2 = x.copy()
        x2[j] += d
        moved = residuals(lp, Solution(x=x2, y=y, s=s, status=Status.OPTIMAL))[0]
        np.testing.assert_allclose(moved - base, lp.A[:, j].toarray().ravel() * d, atol=1e-12)

    @pytest.mark.parametrize("cones", MIXED, ids=["sym", "herm"])
    def test_weak_duality(self, cones):
        from acopf_sdr.conesolve import Solution

        rng = np.random.default_rng(3)
        P = ConeProjector(cones)
        for _ in range(200):
            m = int(rng.integers(1, cones.size))
            A = sp.csr_matrix(rng.standard_normal((m, cones.size)))
            x, s = P(rng.standard_normal(cones.size)), P(rng.standard_normal(cones.size))
            y = rng.standard_normal(m)
            lp = ConeLP(c=A.T @ y + s, A=A, b=A @ x, cones=cones)
            assert residuals(lp, Solution(x=x, y=y, s=s, status=Status.OPTIMAL))[2] >= -1e-9
