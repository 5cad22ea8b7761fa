import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acopf_sdr.caseio import parse_case, preprocess
from acopf_sdr.netmodel import build_admittance, evaluate_acopf, flow_matrices, injection_matrices

from conftest import case_text, corpus_case


def pi_model_ybus(case) -> np.ndarray:
    """Textbook assembly, one branch at a time."""
    idx = case.bus_index()
    n = case.n_bus
    Y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        f, t = idx[br.from_bus], idx[br.to_bus]
        y = 1 / complex(br.r, br.x)
        a = br.tau * np.exp(1j * br.theta_shift)
        Y[f, f] += (y + 0.5j * br.b) / abs(a) ** 2
        Y[t, t] += y + 0.5j * br.b
        Y[f, t] += -y / np.conj(a)
        Y[t, f] += -y / a
    for k, b in enumerate(case.buses):
        Y[k, k] += b.Gs + 1j * b.Bs
    return Y


def line(r=0.0, x=1.0, b=0.0, tau=0.0, shift=0.0, rate=0.0, gens=None, loads=(0, 0)):
    text = case_text(
        buses=[[1, 3], [2, 1, loads[0], loads[1]]],
        gens=gens or [[1]],
        branches=[[1, 2, r, x, b, rate, 0, 0, tau, shift]],
        gencost=[[2, 0, 0, 3, 0.01, 1, 0]] * len(gens or [[1]]),
    )
    return preprocess(parse_case(text))


def rand_v(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def quad(M, v):
    return complex(np.conj(v) @ (M @ v))


class TestAdmittance:
    def test_single_lossless_branch(self):
        Y = build_admittance(line(r=0, x=1)).Ybus.toarray()
        np.testing.assert_allclose(Y, [[-1j, 1j], [1j, -1j]], atol=1e-15)

    def test_tap_ratio_two(self):
        # y = 1 needs r + jx = 1
        Y = build_admittance(line(r=1, x=0, tau=2)).Ybus.toarray()
        assert Y[0, 0] == pytest.approx(0.25)
        assert Y[0, 1] == pytest.approx(-0.5)
        assert Y[1, 0] == pytest.approx(-0.5)
        assert Y[1, 1] == pytest.approx(1.0)

    @pytest.mark.parametrize("name", ["case9", "case30", "case118"])
    def test_matches_pi_model(self, name):
        case = corpus_case(name)
        model = build_admittance(case)
        np.testing.assert_allclose(model.Ybus.toarray(), pi_model_ybus(case), atol=1e-12)
        assert model.Yf.getnnz(axis=1).max() <= 2 and model.Yt.getnnz(axis=1).max() <= 2
        pat = model.Ybus.toarray() != 0
        assert np.array_equal(pat, pat.T)

    def test_phase_shifter_matches_pi_model(self):
        case = line(r=0.01, x=0.1, b=0.02, tau=0.95, shift=10)
        np.testing.assert_allclose(build_admittance(case).Ybus.toarray(), pi_model_ybus(case), atol=1e-14)


class TestInjection:
    @pytest.mark.parametrize("name", ["case9", "case30"])
    def test_identity_and_hermitian(self, name, rng):
        model = build_admittance(corpus_case(name))
        Ybus = model.Ybus.toarray()
        for _ in range(20):
            v = rand_v(rng, model.n)
            s = v * np.conj(Ybus @ v)
            tot = 0j
            for k in range(model.n):
                Yk, Yt = injection_matrices(model, k)
                for M in (Yk, Yt):
                    D = M.toarray()
                    np.testing.assert_allclose(D, D.conj().T, atol=1e-14)
                p, q = quad(Yk, v), quad(Yt, v)
                assert p.real == pytest.approx(s[k].real, rel=1e-12, abs=1e-12)
                assert q.real == pytest.approx(s[k].imag, rel=1e-12, abs=1e-12)
                tot += p.real + 1j * q.real
            assert tot == pytest.approx(complex(np.conj(v) @ (Ybus.conj().T @ v)), rel=1e-10)

    def test_two_bus_direct_evaluation(self, rng):
        model = build_admittance(line(r=0, x=1))
        Y1, Y1t = injection_matrices(model, 0)
        for _ in range(100):
            v = rand_v(rng, 2)
            i1 = (-1j * v[0] + 1j * v[1])
            assert quad(Y1, v).real == pytest.approx((v[0] * np.conj(i1)).real, abs=1e-12)
            assert quad(Y1t, v).real == pytest.approx((v[0] * np.conj(i1)).imag, abs=1e-12)

    def test_zero_row_gives_zero_matrix(self):
        from acopf_sdr.netmodel import AdmittanceModel
        import scipy.sparse as sp

        Y = sp.csr_matrix(np.array([[1, 0, -1], [0, 0, 0], [-1, 0, 1]], dtype=complex))
        model = AdmittanceModel(Ybus=Y, Yf=Y[:0], Yt=Y[:0], f=np.zeros(0, int), t=np.zeros(0, int), rate=np.zeros(0))
        Yk, Ykt = injection_matrices(model, 1)
        assert Yk.count_nonzero() == 0 and Ykt.count_nonzero() == 0

    def test_sparsity_within_ybus_pattern(self):
        model = build_admittance(corpus_case("case30"))
        pat = (abs(model.Ybus) + abs(model.Ybus).T).toarray() != 0
        acc = np.zeros_like(pat, dtype=float)
        for k in range(model.n):
            for M in injection_matrices(model, k):
                acc += abs(M).toarray()
        for l in np.flatnonzero(model.rate > 0):
            for end in ("from", "to"):
                for M in flow_matrices(model, int(l), end):
                    acc += abs(M).toarray()
        assert not np.any((acc != 0) & ~pat & ~np.eye(model.n, dtype=bool))


class TestFlow:
    def test_identity(self, rng):
        model = build_admittance(corpus_case("case9"))
        for l in range(len(model.f)):
            for end, row, bus in (("from", model.Yf, model.f), ("to", model.Yt, model.t)):
                T, Tt = flow_matrices(model, l, end)
                assert T.count_nonzero() <= 4
                for _ in range(10):
                    v = rand_v(rng, model.n)
                    want = v[bus[l]] * np.conj((row[l] @ v).item())
                    got = quad(T, v).real + 1j * quad(Tt, v).real
                    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_lossless_branch(self, rng):
        model = build_admittance(line(r=0, x=0.3, rate=100))
        Tf, _ = flow_matrices(model, 0, "from")
        Tt, _ = flow_matrices(model, 0, "to")
        for _ in range(100):
            v = rand_v(rng, 2)
            assert quad(Tf, v).real == pytest.approx(-quad(Tt, v).real, abs=1e-12)

    def test_zero_voltage(self):
        model = build_admittance(line(rate=100))
        T, Tt = flow_matrices(model, 0, "from")
        assert quad(T, np.zeros(2)) == 0 and quad(Tt, np.zeros(2)) == 0

    def test_branch_without_limit_rejected(self):
        model = build_admittance(line(rate=0))
        with pytest.raises(ValueError):
            flow_matrices(model, 0, "from")


class TestEvaluate:
    def lossless(self):
        return line(r=0, x=0.5, rate=100, gens=[[1, 0, 0, 300, -300, 1, 100, 1, 250, 0]])

    def test_flat_balanced_point(self):
        case = self.lossless()
        v = np.ones(2, dtype=complex)
        rep = evaluate_acopf(case, v, np.zeros(1, dtype=complex))
        assert all(val == 0 for val in rep.worst().values())

    def test_perturbed_voltage_residual(self):
        case = self.lossless()
        model = build_admittance(case)
        v = np.ones(2, dtype=complex)
        v[1] += 0.1
        s = np.array([0j])
        rep = evaluate_acopf(case, v, s, model)
        Y = pi_model_ybus(case)
        want = v * np.conj(Y @ v)  # zero load and generation at bus 2
        assert rep.balance[1] == pytest.approx(want[1], abs=1e-14)

    def test_box_overshoot(self):
        case = self.lossless()
        g = case.generators[0]
        rep = evaluate_acopf(case, np.ones(2, dtype=complex), np.array([g.Pmax + 0.3 + 1j * (g.Qmin - 0.2)]))
        assert rep.gen_p[0] == pytest.approx(0.3)
        assert rep.gen_q[0] == pytest.approx(0.2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evaluate_acopf(self.lossless(), np.ones(3), np.zeros(1))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.5, 1.5), st.floats(-0.5, 0.5))
    def test_objective_is_cost_sum(self, vm, pg):
        case = corpus_case("case9")
        s = np.full(3, pg + 0j)
        rep = evaluate_acopf(case, np.full(9, vm + 0j), s)
        assert rep.objective == pytest.approx(sum(g.cost(pg) for g in case.generators))
