import numpy as np
import pytest

from opgt.haagerup import (
    balance_representation,
    grid_descent_oracle,
    haagerup_norm,
    rank_reduce,
    transposed_haagerup_norm,
)
from opgt.linalg import op_norm, random_complex
from opgt.opspace import (
    TensorRep,
    col_quantity,
    min_norm,
    row_quantity,
    weighted_quantity,
)

from conftest import unit


def random_rep(seed, r=2, n=2):
    rng = np.random.default_rng(seed)
    return TensorRep(tuple(random_complex(rng, (n, n)) for _ in range(r)),
                     tuple(random_complex(rng, (n, n)) for _ in range(r)))


class TestRankReduce:
    def test_resums(self):
        for seed in range(5):
            t = random_rep(seed, r=3)
            red = rank_reduce(t)
            assert op_norm(red.dense() - t.dense()) <= 1e-10 * op_norm(t.dense())

    def test_zero_tensor(self):
        t = TensorRep((unit(0, 0),), (unit(0, 0),))
        z = TensorRep((0 * unit(0, 0),), (unit(0, 0),))
        red = rank_reduce(z)
        assert len(red.left) == 1 and op_norm(red.dense()) == 0.0
        assert len(rank_reduce(t).left) == 1

    def test_redundant_terms_collapse(self):
        # a (x) b + a (x) b is rank one
        a, b = unit(0, 0), unit(0, 1)
        t = TensorRep((a, a), (b, b))
        assert len(rank_reduce(t).left) == 1


class TestHaagerupNorm:
    def test_rank_one(self, rng):
        a = random_complex(rng, (2, 2))
        b = random_complex(rng, (2, 2))
        res = haagerup_norm(TensorRep((a,), (b,)))
        assert res.value == pytest.approx(op_norm(a) * op_norm(b), rel=1e-10)

    def test_column_row_example(self):
        # sum_i e_{i1} (x) e_{1i} has norm 1 ...
        w = TensorRep((unit(0, 0), unit(1, 0)), (unit(0, 0), unit(0, 1)))
        assert haagerup_norm(w).value == pytest.approx(1.0, rel=1e-6)
        # ... and its transpose has norm 2
        assert transposed_haagerup_norm(w).value == pytest.approx(2.0, rel=1e-6)

    def test_flip_direct_agreement(self):
        w = TensorRep((unit(0, 0), unit(0, 1)), (unit(0, 0), unit(1, 0)))
        assert haagerup_norm(w).value == pytest.approx(2.0, rel=1e-6)

    def test_symmetric_tensor_self_transposed(self):
        w = TensorRep((unit(0, 0), unit(1, 1)), (unit(0, 0), unit(1, 1)))
        h = haagerup_norm(w).value
        ht = transposed_haagerup_norm(w).value
        assert h == pytest.approx(ht, rel=1e-8)

    def test_zero(self):
        z = TensorRep((0 * unit(0, 0),), (unit(0, 0),))
        assert haagerup_norm(z).value == 0.0

    def test_scaling(self):
        w = random_rep(7)
        base = haagerup_norm(w).value
        scaled = TensorRep(tuple(3.0 * a for a in w.left), w.right)
        assert haagerup_norm(scaled).value == pytest.approx(3 * base, rel=1e-6)

    def test_dominates_min_norm(self):
        for seed in range(8):
            w = random_rep(seed)
            assert haagerup_norm(w).value >= min_norm(w) * (1 - 1e-8)

    def test_result_invariants(self):
        for seed in range(8):
            w = random_rep(seed)
            res = haagerup_norm(w)
            achieved = row_quantity(res.representation.left) * \
                col_quantity(res.representation.right)
            assert achieved <= res.value * (1 + 1e-6)
            assert res.value >= min_norm(res.representation) - 1e-6 * res.value
            # representation resums to w
            assert op_norm(res.representation.dense() - w.dense()) <= \
                1e-8 * max(op_norm(w.dense()), 1e-300)

    def test_contraction_monotonicity(self, rng):
        w = random_rep(3)
        res = haagerup_norm(w)
        g = random_complex(rng, (2, 2))
        g /= op_norm(g) * (1 + 1e-12)
        contracted = [sum(g[k, j] * res.representation.left[j] for j in range(2))
                      for k in range(2)]
        assert row_quantity(contracted) <= row_quantity(res.representation.left) * (1 + 1e-10)


class TestOracle:
    def test_agrees_with_solver(self):
        for seed in range(10):
            w = random_rep(seed)
            solver = haagerup_norm(w).value
            oracle = grid_descent_oracle(w)
            assert solver == pytest.approx(oracle, rel=1e-4)

    def test_worked_examples(self):
        w = TensorRep((unit(0, 0), unit(1, 0)), (unit(0, 0), unit(0, 1)))
        assert grid_descent_oracle(w) == pytest.approx(1.0, rel=1e-6)
        assert grid_descent_oracle(w.flip()) == pytest.approx(2.0, rel=1e-6)

    def test_rank_cap(self):
        w = random_rep(0, r=3, n=2)
        red = rank_reduce(w)
        if len(red.left) > 2:
            with pytest.raises(ValueError):
                grid_descent_oracle(w)


class TestBalance:
    def test_rank_one_unit_weight(self, rng):
        a = random_complex(rng, (2, 2))
        b = random_complex(rng, (2, 2))
        w = TensorRep((a,), (b,))
        h = haagerup_norm(w)
        ht = transposed_haagerup_norm(w)
        bal = balance_representation(w, h, ht)
        assert bal.weights == pytest.approx([1.0], rel=1e-8)

    def test_worked_example(self):
        w = TensorRep((unit(0, 0), unit(1, 0)), (unit(0, 0), unit(0, 1)))
        h = haagerup_norm(w)
        ht = transposed_haagerup_norm(w)
        bal = balance_representation(w, h, ht)
        plain = row_quantity(bal.left) * col_quantity(bal.right)
        weighted = (weighted_quantity(bal.left, bal.weights, "col")
                    * weighted_quantity(bal.right, 1.0 / bal.weights, "row"))
        assert plain == pytest.approx(h.value, rel=1e-5)
        assert weighted == pytest.approx(ht.value, rel=1e-5)

    def test_random_rank2(self):
        for seed in (11, 21, 31):
            w = random_rep(seed)
            h = haagerup_norm(w)
            ht = transposed_haagerup_norm(w)
            bal = balance_representation(w, h, ht)
            assert op_norm(bal.dense() - w.dense()) <= 1e-8 * op_norm(w.dense())
            weighted = (weighted_quantity(bal.left, bal.weights, "col")
                        * weighted_quantity(bal.right, 1.0 / bal.weights, "row"))
            assert weighted == pytest.approx(ht.value, rel=1e-5)

    def test_inconsistent_inputs_rejected(self):
        w = random_rep(5)
        h = haagerup_norm(w)
        other = haagerup_norm(random_rep(6))
        with pytest.raises(ValueError):
            balance_representation(w, h, other)
