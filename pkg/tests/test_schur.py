import numpy as np
import pytest

from opgt.gtforms import BilinearForm, jcb_norm_estimate, random_form
from opgt.linalg import random_complex
from opgt.opspace import OperatorSpace
from opgt.schur import (
    averaging_projection,
    bounded_split_optimal,
    constructive_split,
    geometric_mean_form,
    multiplier_form,
    multiplier_trace_pairing_norm,
    rank_one_dominator,
    trace_class_dominator_to_vectors,
)

class TestBoundedSplit:
    def test_identity_cost(self):
        for k in (2, 3):
            res = bounded_split_optimal(np.eye(k))
            assert res.cost == pytest.approx(k, abs=1e-9)

    def test_constant_rows(self):
        r = np.array([0.5, 1.5, 0.25])
        phi = np.tile(r[:, None], (1, 3))
        res = bounded_split_optimal(phi)
        assert res.cost == pytest.approx(r.sum(), abs=1e-9)

    def test_zero(self):
        res = bounded_split_optimal(np.zeros((3, 3)))
        assert res.cost == 0.0

    def test_resummation_and_cost_formula(self, rng):
        phi = random_complex(rng, (4, 5))
        res = bounded_split_optimal(phi)
        assert np.abs(res.a + res.b - phi).max() <= 1e-10
        assert res.recomputed_cost() == pytest.approx(res.cost, abs=1e-8)

    def test_duality_certificate(self, rng):
        for _ in range(5):
            phi = random_complex(rng, (4, 4))
            res = bounded_split_optimal(phi)
            assert res.dual_cost == pytest.approx(res.cost, abs=1e-8)

    def test_phases_preserved(self, rng):
        phi = random_complex(rng, (3, 3))
        res = bounded_split_optimal(phi)
        # |a| + |b| matches ||phi|-split|: entries of a and b share phi's phase
        mask = np.abs(phi) > 1e-12
        assert np.abs(np.abs(res.a) + np.abs(res.b) - np.abs(phi))[mask].max() <= 1e-9


class TestConstructiveSplit:
    def test_uniform(self):
        k = 4
        x = np.full(k, 1 / k)
        y = np.full(k, 1 / k)
        phi = np.sqrt(np.outer(x, y))
        res = constructive_split(phi, x, y, K=1.0)
        # each partial cost is at most K
        assert np.abs(res.a).max(axis=1).sum() <= 1.0 + 1e-12
        assert np.abs(res.b).max(axis=0).sum() <= 1.0 + 1e-12

    def test_single_entry(self):
        res = constructive_split(np.array([[0.3]]), np.array([1.0]),
                                 np.array([1.0]), K=0.5)
        assert res.cost == pytest.approx(0.3)

    def test_zero(self):
        res = constructive_split(np.zeros((2, 2)), np.full(2, 0.5),
                                 np.full(2, 0.5), K=1.0)
        assert res.cost == 0.0

    def test_precondition_rejected(self):
        with pytest.raises(ValueError):
            constructive_split(np.ones((2, 2)), np.full(2, 0.5),
                               np.full(2, 0.5), K=1.0)

    def test_never_beats_lp(self, rng):
        for _ in range(10):
            k = int(rng.integers(2, 5))
            x = rng.uniform(0.1, 1.0, size=k)
            x /= x.sum()
            y = rng.uniform(0.1, 1.0, size=k)
            y /= y.sum()
            phi = np.sqrt(np.outer(x, y)) * rng.uniform(0.2, 1.0, size=(k, k))
            cs = constructive_split(phi, x, y, K=1.0)
            lp = bounded_split_optimal(phi)
            assert cs.cost >= lp.cost - 1e-9


class TestDominator:
    def test_rank_one_tight(self, rng):
        x0 = rng.uniform(0.1, 2.0, size=4)
        y0 = rng.uniform(0.1, 2.0, size=3)
        res = rank_one_dominator(np.outer(x0, y0))
        assert res.C == pytest.approx(np.linalg.norm(x0) * np.linalg.norm(y0),
                                      rel=1e-9)
        assert abs(np.linalg.norm(res.x) - 1) <= 1e-12
        assert abs(np.linalg.norm(res.y) - 1) <= 1e-12

    def test_identity(self):
        for k in (2, 5):
            res = rank_one_dominator(np.eye(k))
            assert res.C == pytest.approx(k, rel=1e-9)

    def test_zero(self):
        res = rank_one_dominator(np.zeros((2, 2)))
        assert res.C == 0.0

    def test_domination_holds(self, rng):
        phi = random_complex(rng, (4, 4))
        res = rank_one_dominator(phi)
        assert res.domination_margin(phi) >= -1e-9 * res.C

    def test_inverse_square_profile(self):
        # closed form: C(k) = sqrt(k * sum 1/i^4); the split cost stays bounded
        for k in (3, 10):
            phi = np.array([[1.0 / (i + 1) ** 2] * k for i in range(k)])
            res = rank_one_dominator(phi)
            expect = np.sqrt(k * sum(1.0 / (i + 1) ** 4 for i in range(k)))
            assert res.C == pytest.approx(expect, rel=1e-8)
        lp = bounded_split_optimal(phi)
        assert lp.cost <= sum(1.0 / (i + 1) ** 2 for i in range(10)) + 1e-9

    def test_permutation_invariance(self, rng):
        phi = np.abs(random_complex(rng, (4, 4)))
        base = rank_one_dominator(phi).C
        p = rng.permutation(4)
        q = rng.permutation(4)
        assert rank_one_dominator(phi[np.ix_(p, q)]).C == pytest.approx(base, rel=1e-8)

    def test_diagonal_scaling_bound(self, rng):
        phi = np.abs(random_complex(rng, (3, 3)))
        d = rng.uniform(0.5, 2.0, size=3)
        e = rng.uniform(0.5, 2.0, size=3)
        scaled = d[:, None] * phi * e[None, :]
        assert rank_one_dominator(scaled).C <= \
            d.max() * e.max() * rank_one_dominator(phi).C * (1 + 1e-8)


class TestTraceClassVectors:
    def test_rank_one(self, rng):
        x = random_complex(rng, (3,))
        y = random_complex(rng, (3,))
        T = np.outer(x, np.conj(y))
        X, Y = trace_class_dominator_to_vectors(T)
        assert np.all(np.abs(T) <= np.outer(X, Y) + 1e-12)
        trace_norm = np.linalg.svd(T, compute_uv=False).sum()
        assert np.linalg.norm(X) * np.linalg.norm(Y) <= trace_norm + 1e-9

    def test_identity(self):
        X, Y = trace_class_dominator_to_vectors(np.eye(2))
        assert np.allclose(X, [1, 1]) and np.allclose(Y, [1, 1])

    def test_zero(self):
        X, Y = trace_class_dominator_to_vectors(np.zeros((2, 2)))
        assert np.allclose(X, 0) and np.allclose(Y, 0)


class TestGeometricMean:
    def test_equal_inputs(self, rng):
        a = np.abs(random_complex(rng, (3, 3)))
        assert np.allclose(geometric_mean_form(a, a), a)

    def test_separable(self):
        r = np.array([1.0, 4.0])
        c = np.array([9.0, 1.0])
        a = np.tile(r[:, None], (1, 2))
        b = np.tile(c[None, :], (2, 1))
        phi = geometric_mean_form(a, b)
        res = rank_one_dominator(phi)
        assert res.C == pytest.approx(np.linalg.norm(np.sqrt(r))
                                      * np.linalg.norm(np.sqrt(c)), rel=1e-8)

    def test_companion_bound(self, rng):
        # split cost of the two pieces controls the dominator of the mean
        a = np.abs(random_complex(rng, (3, 3)))
        b = np.abs(random_complex(rng, (3, 3)))
        phi = geometric_mean_form(a, b)
        M = a.max(axis=1).sum() + b.max(axis=0).sum()
        assert rank_one_dominator(phi).C <= M + 1e-8

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            geometric_mean_form(-np.eye(2), np.eye(2))


class TestAveraging:
    def test_multiplier_fixed_point(self, rng):
        phi = random_complex(rng, (2, 2))
        form = multiplier_form(phi)
        assert np.allclose(averaging_projection(form), phi)

    def test_trace_of_products(self):
        # U(a, b) = tr(a) tr(b) averages to the diagonal pattern
        E = OperatorSpace.full_matrix_space(2)
        coeffs = np.zeros((4, 4), dtype=complex)
        for k, ek in enumerate(E.basis):
            for l, fl in enumerate(E.basis):
                coeffs[k, l] = np.trace(ek) * np.trace(fl)
        form = BilinearForm(E, E, coeffs)
        psi = averaging_projection(form)
        assert np.allclose(psi, np.eye(2))

    def test_jcb_never_increases(self):
        form = random_form(2, 2, seed=33)
        psi = averaging_projection(form)
        before = jcb_norm_estimate(form, amp=2, restarts=8, seed=0).value
        after = jcb_norm_estimate(multiplier_form(psi), amp=2, restarts=8,
                                  seed=0).value
        assert after <= before * (1 + 1e-3)


class TestPairingNorm:
    def test_easy_direction(self, rng):
        for _ in range(5):
            phi = random_complex(rng, (3, 3))
            cost = bounded_split_optimal(phi).cost
            val = multiplier_trace_pairing_norm(phi, restarts=6, seed=0)
            assert val <= cost + 1e-7

    def test_identity_value(self):
        # sup |sum a_ii b_ii| over unit balls equals k
        assert multiplier_trace_pairing_norm(np.eye(3), restarts=8, seed=0) == \
            pytest.approx(3.0, rel=1e-9)


class TestDominatorStates:
    def test_diagonal_states_certify(self, rng):
        # a rank-one dominator yields diagonal states making the multiplier
        # form completely bounded at constant C
        from opgt.gtforms import find_states, validate_state_bound

        phi = np.abs(random_complex(rng, (2, 2)))
        dom = rank_one_dominator(phi)
        form = multiplier_form(phi)
        f = np.diag(np.abs(dom.x) ** 2).astype(complex)
        g = np.diag(np.abs(dom.y) ** 2).astype(complex)
        for _ in range(300):
            a = random_complex(rng, (2, 2))
            b = random_complex(rng, (2, 2))
            lhs = abs(form.evaluate(a, b))
            rhs = dom.C * np.sqrt(
                np.trace(f @ a @ a.conj().T).real
                * np.trace(g @ b.conj().T @ b).real)
            assert lhs <= rhs * (1 + 1e-9)
        # and the state search succeeds at K = C
        res = find_states(form, K=dom.C, seed=0, restarts=8)
        assert res.status == "feasible"
        assert validate_state_bound(form, res.quadruple, 2000, seed=1) <= 1e-6
