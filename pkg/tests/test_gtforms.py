import numpy as np
import pytest

from opgt.gtforms import (
    BilinearForm,
    CbNormResult,
    Decomposition,
    cb_form_norm,
    decompose_form,
    factor_through_rc,
    find_states,
    jcb_norm_estimate,
    quadruple_from_decomposition,
    random_form,
    sampled_dual_lower_bound,
    state_bound_violation,
    trace_form,
    validate_state_bound,
    verify_gt_inequalities,
)
from opgt.linalg import adjoint, random_complex
from opgt.opspace import OperatorSpace

from conftest import unit

STATE_K = 2.0 ** 1.5


def rank_one_form(n=2):
    E = OperatorSpace.full_matrix_space(n)
    c = np.zeros((n * n, n * n), dtype=complex)
    c[0, 0] = 1.0
    return BilinearForm(E, E, c)


class TestEvaluate:
    def test_scalar_identity(self):
        E = OperatorSpace.full_matrix_space(1)
        U = BilinearForm(E, E, np.array([[1.0 + 0j]]))
        one = np.array([[1.0 + 0j]])
        assert U.evaluate(one, one) == pytest.approx(1.0)

    def test_trace_form_units(self):
        U = trace_form(2)
        assert U.evaluate(unit(0, 1), unit(1, 0)) == pytest.approx(1.0)
        assert U.evaluate(unit(0, 1), unit(0, 1)) == pytest.approx(0.0)

    def test_bilinearity(self, rng):
        U = random_form(2, 2, seed=5)
        a = random_complex(rng, (2, 2))
        b = random_complex(rng, (2, 2))
        assert U.evaluate(2 * a, 3 * b) == pytest.approx(6 * U.evaluate(a, b), rel=1e-12)

    def test_outside_span_rejected(self):
        E = OperatorSpace((unit(0, 0), unit(1, 1)))
        U = BilinearForm(E, E, np.eye(2, dtype=complex))
        with pytest.raises(ValueError):
            U.evaluate(unit(0, 1), unit(0, 0))

    def test_transpose(self, rng):
        U = random_form(2, 2, seed=6)
        a = random_complex(rng, (2, 2))
        b = random_complex(rng, (2, 2))
        assert U.transpose().evaluate(b, a) == pytest.approx(U.evaluate(a, b), rel=1e-12)


class TestJcb:
    def test_rank_one(self):
        est = jcb_norm_estimate(rank_one_form(), amp=2, restarts=8, seed=0)
        assert est.value == pytest.approx(1.0, abs=1e-8)

    def test_trace_form(self):
        est = jcb_norm_estimate(trace_form(2), amp=4, restarts=12, seed=0)
        assert est.value == pytest.approx(2.0, abs=1e-7)

    def test_amp_monotone(self):
        U = random_form(2, 2, seed=9)
        est = jcb_norm_estimate(U, amp=2, restarts=6, seed=0, with_profile=True)
        assert est.profile[1] <= est.profile[2] + 1e-9

    def test_transpose_symmetry(self):
        U = random_form(2, 2, seed=10)
        a = jcb_norm_estimate(U, amp=2, restarts=8, seed=0).value
        b = jcb_norm_estimate(U.transpose(), amp=2, restarts=8, seed=0).value
        assert a == pytest.approx(b, rel=1e-6)

    def test_dominated_by_cb(self):
        for seed in (1, 2, 3):
            U = random_form(2, 2, seed=seed)
            est = jcb_norm_estimate(U, amp=2, restarts=8, seed=0).value
            assert est <= cb_form_norm(U).value * (1 + 1e-5)

    def test_subspace_domain(self):
        # diagonal subspace: the estimator exercises the constrained path
        E = OperatorSpace((unit(0, 0), unit(1, 1)))
        U = BilinearForm(E, E, np.eye(2, dtype=complex))
        est = jcb_norm_estimate(U, amp=2, restarts=4, seed=0)
        # evaluation at the identity pair is 2 with both legs of norm 1,
        # so the sup is at least 1 after normalization by the leg norms
        assert est.value >= 1.0 - 1e-9


class TestCbNorm:
    def test_rank_one(self):
        res = cb_form_norm(rank_one_form())
        assert res.value == pytest.approx(1.0, abs=1e-7)
        assert res.f[0, 0] == pytest.approx(1.0, abs=1e-5)
        assert res.g[0, 0] == pytest.approx(1.0, abs=1e-5)

    def test_trace_form(self):
        assert cb_form_norm(trace_form(2)).value == pytest.approx(2.0, abs=1e-7)

    def test_zero(self):
        U = trace_form(2).scaled(0.0)
        assert cb_form_norm(U).value == 0.0

    def test_scaling(self):
        U = random_form(2, 2, seed=11)
        base = cb_form_norm(U).value
        assert cb_form_norm(U.scaled(2.5)).value == pytest.approx(2.5 * base, rel=1e-6)

    def test_certificate_validates(self, rng):
        U = random_form(2, 2, seed=12)
        res = cb_form_norm(U)
        for _ in range(200):
            a = random_complex(rng, (2, 2))
            b = random_complex(rng, (2, 2))
            lhs = abs(U.evaluate(a, b))
            rhs = res.value * np.sqrt(
                np.trace(res.f @ a @ adjoint(a)).real
                * np.trace(res.g @ adjoint(b) @ b).real)
            assert lhs <= rhs * (1 + 1e-6)

    def test_additivity_bound(self):
        # jcb(u + v) <= cb(u) + cb(transpose v)
        u = random_form(2, 2, seed=13)
        v = random_form(2, 2, seed=14)
        total = u + v
        est = jcb_norm_estimate(total, amp=2, restarts=8, seed=0).value
        bound = cb_form_norm(u).value + cb_form_norm(v.transpose()).value
        assert est <= bound + 1e-5


class TestVerifyGt:
    def test_trace_form_single_pair(self):
        U = trace_form(2)
        est = jcb_norm_estimate(U, restarts=8, seed=0).value
        rep = verify_gt_inequalities(U.scaled(1 / est), 1.0, trials=40,
                                     seed=0, max_len=1)
        assert rep.passed
        assert rep.worst_ratio_symmetrized <= 1 + 1e-6

    def test_zero_form(self):
        rep = verify_gt_inequalities(trace_form(2).scaled(0.0), 1.0,
                                     trials=10, seed=0)
        assert rep.worst_ratio_weighted == 0.0

    def test_lambda_identity(self):
        U = random_form(2, 2, seed=15)
        rep = verify_gt_inequalities(U, 1.0, trials=25, seed=3)
        assert rep.lambda_identity_residual <= 1e-9


class TestFindStates:
    def test_rank_one_at_K1(self):
        U = rank_one_form()
        res = find_states(U, K=1.0, seed=0, restarts=8)
        assert res.status == "feasible"
        worst = validate_state_bound(U, res.quadruple, n_samples=2000, seed=1)
        assert worst <= 1e-5

    def test_zero_form(self):
        U = trace_form(2).scaled(0.0)
        res = find_states(U, K=0.5, seed=0, restarts=4)
        assert res.status == "feasible"
        # nothing to separate: any quadruple works, none needed
        assert res.n_cuts == 0

    def test_random_at_constant(self):
        U = random_form(2, 2, seed=16)
        est = jcb_norm_estimate(U, restarts=8, seed=0).value
        Un = U.scaled(1 / est)
        res = find_states(Un, K=STATE_K, seed=0, restarts=16)
        assert res.status == "feasible" and res.n_cuts <= 50
        worst = validate_state_bound(Un, res.quadruple, n_samples=10_000, seed=2)
        assert worst <= 1e-5

    def test_infeasible_when_K_tiny(self):
        U = trace_form(2)
        res = find_states(U, K=1e-3, seed=0, restarts=8, max_cuts=12)
        assert res.status in ("infeasible", "inconclusive")
        assert res.status != "feasible"

    def test_violation_sign(self, rng):
        U = rank_one_form()
        states = (np.eye(2) / 2,) * 4
        v = state_bound_violation(U, states, 1.0, unit(0, 0), unit(0, 0))
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_bad_K_rejected(self):
        with pytest.raises(ValueError):
            find_states(rank_one_form(), K=0.0)


class TestDecompose:
    def test_cb_form_bound(self):
        # a form that is already cb: the split can put everything in u
        U = rank_one_form()
        dec = decompose_form(U)
        assert dec.bound <= cb_form_norm(U).value * (1 + 1e-6)
        assert np.allclose(dec.u.coeffs + dec.v.coeffs, U.coeffs, atol=1e-12)

    def test_known_pieces(self):
        u0 = rank_one_form()
        E = u0.left_space
        c = np.zeros((4, 4), dtype=complex)
        c[3, 3] = 1.0
        v0 = BilinearForm(E, E, c)
        dec = decompose_form(u0 + v0)
        bound_sum = cb_form_norm(u0).value + cb_form_norm(v0.transpose()).value
        assert dec.bound <= bound_sum + 1e-6

    def test_duality_lower_bound(self):
        U = random_form(2, 2, seed=17)
        dec = decompose_form(U)
        lb = sampled_dual_lower_bound(U, 12, seed=4)
        assert dec.bound >= lb - 1e-5

    def test_trace_form_symmetric_split(self):
        dec = decompose_form(trace_form(2))
        assert dec.bound == pytest.approx(1.0, abs=1e-6)

    def test_zero(self):
        dec = decompose_form(trace_form(2).scaled(0.0))
        assert dec.bound == 0.0


class TestFactor:
    def test_rank_one_row_only(self):
        U = rank_one_form()
        cb = cb_form_norm(U)
        dec = Decomposition(U, U.scaled(0.0), cb.value, cb,
                            CbNormResult(0.0, None, None, "zero"), "manual")
        fac = factor_through_rc(U, dec, quadruple_from_decomposition(dec))
        assert fac.dim_r == 1 and fac.dim_c == 0
        assert np.abs(fac.reconstruction() - U.coeffs.T).max() <= 1e-8

    def test_trace_form(self):
        U = trace_form(2)
        dec = decompose_form(U)
        fac = factor_through_rc(U, dec, quadruple_from_decomposition(dec))
        assert fac.dim_r + fac.dim_c <= 8
        scale = np.abs(U.coeffs).max()
        assert np.abs(fac.reconstruction() - U.coeffs.T).max() <= 1e-6 * scale

    def test_zero_form(self):
        U = trace_form(2).scaled(0.0)
        dec = decompose_form(U)
        fac = factor_through_rc(U, dec, quadruple_from_decomposition(dec))
        assert fac.dim_r == 0 and fac.dim_c == 0
        assert np.abs(fac.reconstruction()).max() == 0.0

    def test_random_reconstruction(self):
        U = random_form(2, 2, seed=18)
        dec = decompose_form(U)
        fac = factor_through_rc(U, dec, quadruple_from_decomposition(dec))
        scale = np.abs(U.coeffs).max()
        assert np.abs(fac.reconstruction() - U.coeffs.T).max() <= 1e-6 * scale

    def test_mismatched_decomposition_rejected(self):
        U = random_form(2, 2, seed=19)
        other = decompose_form(random_form(2, 2, seed=20))
        with pytest.raises(ValueError):
            factor_through_rc(U, other, quadruple_from_decomposition(other))
