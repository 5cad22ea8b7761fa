import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from acopf_sdr.conesolve import ConeProjector, SolverOptions, solve
from acopf_sdr.relax import ConeLP, ConeSpec, SQRT2
from acopf_sdr.scaling import (
    ScalingInfo,
    block_ids,
    equilibrate,
    scale_point,
    unscale_point,
    unscale_solution,
)

from conftest import SMALL, pipeline

TIGHT = SolverOptions(eps_primal=1e-10, eps_dual=1e-10, eps_gap=1e-10)


def trace_sdp(row_scale=1.0):
    """min 3 x0 + tr(X)  s.t.  x0 + X12 = 1, x0 >= 0, X in PSD(2).

    With x0 = t the cost is at least 3t + 2|1 - t|, so the unique optimum is
    t = 0, X = [[1, 1], [1, 1]].
    """
    A = sp.csr_matrix(np.array([[1.0, 0, 1 / SQRT2, 0]]) * row_scale)
    return ConeLP(c=np.array([3.0, 1, 0, 1]), A=A, b=np.array([row_scale]),
                  cones=ConeSpec(nonneg=1, psd=(2,), hermitian=False))


class TestEquilibrate:
    def test_fixed_point(self):
        lp = ConeLP(c=np.array([1.0, -1.0]), A=sp.csr_matrix(np.array([[1.0, 1.0], [1.0, -1.0]])),
                    b=np.array([1.0, 0.0]), cones=ConeSpec(nonneg=2))
        scaled, info = equilibrate(lp)
        assert np.all(info.d_r == 1) and np.all(info.d_c == 1) and info.sigma == 1

    def test_sigma_normalizes_cost(self):
        lp = ConeLP(c=np.array([250.0, -3.0]), A=sp.csr_matrix(np.array([[1.0, 1.0]])),
                    b=np.array([1.0]), cones=ConeSpec(nonneg=2))
        scaled, info = equilibrate(lp)
        assert info.sigma == 1 / 250
        assert np.max(np.abs(scaled.c)) == pytest.approx(1.0)

    def test_badly_scaled_row_same_solution(self):
        ref = solve(trace_sdp(), TIGHT)
        bad = solve(trace_sdp(1e6), TIGHT)
        assert ref.optimal and bad.optimal
        np.testing.assert_allclose(bad.x, ref.x, atol=1e-8)
        np.testing.assert_allclose(ref.x, [0, 1, SQRT2, 1], atol=1e-8)

    def test_empty_matrix_rejected(self):
        lp = ConeLP(c=np.ones(2), A=sp.csr_matrix((1, 2)), b=np.zeros(1), cones=ConeSpec(nonneg=2))
        with pytest.raises(ValueError):
            equilibrate(lp)

    @pytest.mark.parametrize("name", ["case9", "case118"])
    def test_block_uniform_columns(self, name):
        lp = pipeline(name).problem
        _, info = equilibrate(lp)
        ids = block_ids(lp.cones)
        for g in np.unique(ids[lp.cones.nonneg:]):
            assert np.ptp(info.d_c[ids == g]) == 0
        assert np.all(info.d_r > 0) and np.all(np.isfinite(info.d_r))

    def test_cone_preserved(self, rng):
        lp = pipeline("case9").problem
        _, info = equilibrate(lp)
        proj = ConeProjector(lp.cones)
        for _ in range(20):
            x = rng.standard_normal(lp.N)
            np.testing.assert_allclose(proj(info.d_c * x), info.d_c * proj(x), atol=1e-12)


class TestUnscale:
    def test_identity(self, rng):
        x, y, s = rng.standard_normal(5), rng.standard_normal(3), rng.standard_normal(5)
        info = ScalingInfo.identity(3, 5)
        for a, b in zip(unscale_point(x, y, s, info), (x, y, s)):
            np.testing.assert_array_equal(a, b)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(1, 20)), int(rng.integers(1, 20))
        info = ScalingInfo(np.exp(rng.uniform(-9, 9, m)), np.exp(rng.uniform(-9, 9, n)), float(np.exp(rng.uniform(-9, 9))))
        x, y, s = rng.standard_normal(n), rng.standard_normal(m), rng.standard_normal(n)
        for a, b in zip(unscale_point(*scale_point(x, y, s, info), info), (x, y, s)):
            np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)

    def test_scaled_problem_residuals_map_back(self, rng):
        lp = pipeline("case9").problem
        scaled, info = equilibrate(lp)
        x, y = rng.standard_normal(lp.N), rng.standard_normal(lp.M)
        s = lp.c - lp.A.T @ y
        xs, ys, ss = scale_point(x, y, s, info)
        np.testing.assert_allclose(scaled.A @ xs - scaled.b, info.d_r * (lp.A @ x - lp.b), atol=1e-9)
        np.testing.assert_allclose(scaled.A.T @ ys + ss - scaled.c, 0, atol=1e-9)

    def test_objective_divides_by_sigma(self):
        lp = pipeline("case9").problem
        scaled, info = equilibrate(lp)
        sol = solve(scaled, SolverOptions(scale=False))
        back = unscale_solution(sol, info)
        assert back.objective_primal == pytest.approx(sol.objective_primal / info.sigma, rel=1e-15)
        assert back.objective_primal == pytest.approx(lp.objective(back.x), rel=1e-10)


@pytest.mark.parametrize("name", SMALL)
def test_optimal_value_invariance(name):
    lp = pipeline(name).problem
    opts = dict(eps_primal=1e-8, eps_dual=1e-8, eps_gap=1e-8)
    a = solve(lp, SolverOptions(scale=True, **opts))
    b = solve(lp, SolverOptions(scale=False, **opts))
    assert abs(a.objective_dual - b.objective_dual) / abs(b.objective_dual) <= 1e-6
