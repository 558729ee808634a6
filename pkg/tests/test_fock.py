import numpy as np
import pytest

from opgt.fock import (
    FockSpace,
    check_double_commutation,
    circular,
    circular_sum_bound,
    dual_circular,
    left_creation,
    right_creation,
    vacuum_pairing,
    verify_evaluation_chain,
)
from opgt.gtforms import jcb_norm_estimate, trace_form
from opgt.linalg import op_norm, random_complex

from conftest import unit


class TestSpace:
    def test_dimension(self):
        assert FockSpace(2, 3).dim == 1 + 4 + 16 + 64
        assert FockSpace(1, 2).dim == 1 + 2 + 4
        assert FockSpace(3, 4).dim == sum(6 ** k for k in range(5))

    def test_vacuum_unique_degree_zero(self):
        fs = FockSpace(2, 2)
        assert fs.words[fs.vacuum_index] == ()
        assert sum(1 for w in fs.words if len(w) == 0) == 1

    def test_bad_args(self):
        with pytest.raises(ValueError):
            FockSpace(0, 2)


class TestCreation:
    def test_left_on_vacuum(self):
        fs = FockSpace(2, 3)
        v = left_creation(fs, 0).apply(fs.vacuum())
        assert v[fs.index[(0,)]] == 1.0 and np.count_nonzero(v) == 1

    def test_right_appends(self):
        fs = FockSpace(2, 3)
        start = np.zeros(fs.dim, dtype=complex)
        start[fs.index[(0,)]] = 1.0
        out = right_creation(fs, fs.primed(1)).apply(start)
        assert out[fs.index[(0, fs.primed(1))]] == 1.0

    def test_top_degree_truncates(self):
        fs = FockSpace(1, 2)
        top = np.zeros(fs.dim, dtype=complex)
        top[fs.index[(0, 0)]] = 1.0
        assert np.count_nonzero(left_creation(fs, 0).apply(top)) == 0

    def test_unknown_letter(self):
        fs = FockSpace(1, 2)
        with pytest.raises(ValueError):
            left_creation(fs, 5)

    def test_isometry_below_top(self):
        fs = FockSpace(2, 3)
        l0 = left_creation(fs, 0).matrix
        gram = (l0.conj().T @ l0).toarray()
        P = fs.degree_projector(fs.cutoff - 1).toarray()
        assert np.allclose(gram @ P, P)

    def test_range_projections_contract(self):
        fs = FockSpace(2, 2)
        total = sum((left_creation(fs, i).matrix @ left_creation(fs, i).matrix.conj().T)
                    for i in range(fs.alphabet_size)).toarray()
        evals = np.linalg.eigvalsh(total)
        assert evals.max() <= 1 + 1e-12


class TestCircular:
    def test_dual_on_vacuum(self):
        fs = FockSpace(2, 3)
        lam = 2.5
        v = dual_circular(fs, 1, lam).apply(fs.vacuum())
        assert v[fs.index[(fs.primed(1),)]] == pytest.approx(np.sqrt(lam))
        assert np.count_nonzero(v) == 1

    def test_norm_bound(self):
        fs = FockSpace(2, 3)
        for lam in (0.25, 1.0, 4.0):
            x = circular(fs, 0, lam)
            assert x.norm() <= np.sqrt(lam) + 1 / np.sqrt(lam) + 1e-9

    def test_positive_lambda_required(self):
        fs = FockSpace(1, 2)
        with pytest.raises(ValueError):
            circular(fs, 0, 0.0)

    def test_double_commutation(self):
        res = check_double_commutation(FockSpace(1, 3), [1.0])
        assert res["residual"] <= 1e-12
        res = check_double_commutation(FockSpace(2, 3), [0.5, 3.0])
        assert res["residual"] <= 1e-12
        # without the projection the truncation boundary shows up
        assert res["residual_without_projection"] > 1e-3

    def test_double_commutation_needs_depth(self):
        with pytest.raises(ValueError):
            check_double_commutation(FockSpace(1, 1), [1.0])

    def test_vacuum_pairing_identity(self):
        fs = FockSpace(2, 2)
        for lam in (0.25, 1.0, 4.0):
            lams = [lam, lam]
            assert vacuum_pairing(fs, 0, 0, lams) == pytest.approx(1.0, abs=1e-15)
            assert vacuum_pairing(fs, 0, 1, lams) == pytest.approx(0.0, abs=1e-15)
            assert vacuum_pairing(fs, 1, 1, lams) == pytest.approx(1.0, abs=1e-15)


class TestSumBound:
    def test_single_term(self, rng):
        fs = FockSpace(1, 3)
        a = random_complex(rng, (2, 2))
        lhs, rhs = circular_sum_bound(fs, [a], [1.0])
        assert rhs == pytest.approx(2 * op_norm(a), rel=1e-10)
        assert lhs <= rhs + 1e-9

    def test_unit_family(self):
        fs = FockSpace(2, 3)
        fam = [unit(0, 0), unit(1, 0)]
        lhs, rhs = circular_sum_bound(fs, fam, [1.0, 1.0])
        # columns of units: col quantity sqrt(2), row quantity 1
        assert rhs == pytest.approx(np.sqrt(2) + 1.0, rel=1e-10)
        assert lhs <= rhs + 1e-9

    def test_random_families(self, rng):
        fs = FockSpace(2, 3)
        for _ in range(10):
            fam = [random_complex(rng, (2, 2)) for _ in range(2)]
            lams = np.exp(rng.uniform(-1.5, 1.5, size=2))
            side = "left" if rng.integers(2) == 0 else "right"
            lhs, rhs = circular_sum_bound(fs, fam, lams, side)
            assert lhs <= rhs + 1e-9

    def test_lambda_rescaling_moves_rhs(self, rng):
        fs = FockSpace(2, 3)
        fam = [random_complex(rng, (2, 2)) for _ in range(2)]
        lams = np.array([1.0, 2.0])
        _, rhs1 = circular_sum_bound(fs, fam, lams)
        _, rhs2 = circular_sum_bound(fs, fam, 4.0 * lams)
        # both bracket terms rescale by 2 and 1/2 respectively
        col = np.sqrt(op_norm(sum(l * (m.conj().T @ m) for l, m in zip(lams, fam))))
        row = np.sqrt(op_norm(sum((m @ m.conj().T) / l for l, m in zip(lams, fam))))
        assert rhs2 == pytest.approx(2 * col + row / 2, rel=1e-10)
        assert rhs1 == pytest.approx(col + row, rel=1e-10)


class TestChain:
    def test_single_pair(self, rng):
        U = trace_form(2)
        fs = FockSpace(1, 3)
        a = random_complex(rng, (2, 2))
        b = random_complex(rng, (2, 2))
        rep = verify_evaluation_chain(U, [(a, b)], [1.0], fs, jcb_bound=2.0)
        assert rep["step1_residual"] <= 1e-10
        assert rep["step2_ratio"] <= 1 + 1e-9
        assert rep["final_ratio"] <= 1 + 1e-6

    def test_trace_form_two_pairs(self, rng):
        U = trace_form(2)
        est = jcb_norm_estimate(U, restarts=8, seed=0).value
        fs = FockSpace(2, 3)
        pairs = [(random_complex(rng, (2, 2)), random_complex(rng, (2, 2)))
                 for _ in range(2)]
        rep = verify_evaluation_chain(U, pairs, [1.0, 1.0], fs, jcb_bound=est)
        assert rep["step1_residual"] <= 1e-10
        assert rep["step2_ratio"] <= 1 + 1e-9
        assert rep["step3_ratio"] <= 1 + 1e-9
        assert rep["final_ratio"] <= 1 + 1e-6
        # the observed single-leg norms stay below their bracket bounds
        assert rep["leg_norm_left"] <= rep["leg_bracket_left"] + 1e-9
        assert rep["leg_norm_right"] <= rep["leg_bracket_right"] + 1e-9

    def test_zero_form(self, rng):
        U = trace_form(2).scaled(0.0)
        fs = FockSpace(2, 3)
        pairs = [(random_complex(rng, (2, 2)), random_complex(rng, (2, 2)))
                 for _ in range(2)]
        rep = verify_evaluation_chain(U, pairs, [1.0, 1.0], fs)
        assert rep["step1_residual"] == 0.0
        assert rep["final_ratio"] == 0.0
