"""Acceptance battery: every release criterion as a callable check.

Each criterion function returns a dict with quantitative fields and a
``passed`` flag; ``run_battery`` collects them and ``run_acceptance`` runs
the battery twice with the same seed to certify bit-for-bit reproducibility
of all quantitative fields (timings are reported separately and excluded
from the comparison).
"""

from __future__ import annotations

import json
import time

import numpy as np

from . import fock, ohmaps, schur
from .gtforms import (
    decompose_form,
    factor_through_rc,
    find_states,
    jcb_norm_estimate,
    quadruple_from_decomposition,
    random_form,
    sampled_dual_lower_bound,
    validate_state_bound,
    verify_gt_inequalities,
)
from .haagerup import balance_representation, grid_descent_oracle, haagerup_norm, \
    transposed_haagerup_norm
from .linalg import random_complex
from .opspace import TensorRep, col_quantity, row_quantity, weighted_quantity

STATE_BOUND_FACTOR = 2.0 ** 1.5      # two-sided state bound constant
EXTENSION_FACTOR = 4.0 * np.sqrt(2)  # extension / equivalence constant
OH_STATE_FACTOR = 2.0 ** 2.25        # single-state bound constant for OH maps

CONSTANTS = {
    "state_bound_factor": {
        "value": STATE_BOUND_FACTOR,
        "note": "2^{3/2}: constant of the two-sided state bound and decomposition",
    },
    "extension_factor": {
        "value": EXTENSION_FACTOR,
        "note": "4*sqrt(2): equivalence constant of the decomposition pairing",
    },
    "oh_state_factor": {
        "value": OH_STATE_FACTOR,
        "note": "2^{9/4}: constant of the single-state bound for OH-space maps",
    },
}


def _random_rank2_tensor(seed: int, n: int = 2) -> TensorRep:
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, 3))
    left = tuple(random_complex(rng, (n, n)) for _ in range(r))
    right = tuple(random_complex(rng, (n, n)) for _ in range(r))
    return TensorRep(left, right)


def criterion_haagerup_oracle(seed: int = 0, count: int = 50,
                              rtol: float = 1e-4) -> dict:
    """Convex solver agrees with the independent grid+descent oracle."""
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(count):
        w = _random_rank2_tensor(seed * 1000 + i)
        solver = haagerup_norm(w).value
        oracle = grid_descent_oracle(w)
        rel = abs(solver - oracle) / max(oracle, 1e-12)
        worst = max(worst, rel)
    dt = time.perf_counter() - t0
    return {"count": count, "worst_relative_gap": worst,
            "passed": bool(worst <= rtol and dt < 60.0),
            "runtime_budget_s": 60.0, "_elapsed_s": dt}


def criterion_balancing(seed: int = 0, count: int = 25,
                        rtol: float = 1e-4) -> dict:
    """Balanced representations reproduce both norms simultaneously."""
    worst_plain = worst_weighted = 0.0
    for i in range(count):
        w = _random_rank2_tensor(seed * 2000 + i)
        h = haagerup_norm(w)
        ht = transposed_haagerup_norm(w)
        bal = balance_representation(w, h, ht, tol=1e-8)
        plain = row_quantity(bal.left) * col_quantity(bal.right)
        worst_plain = max(worst_plain, abs(plain - h.value) / max(h.value, 1e-12))
        if bal.weights is not None:
            weighted = (weighted_quantity(bal.left, bal.weights, "col")
                        * weighted_quantity(bal.right, 1.0 / bal.weights, "row"))
            worst_weighted = max(worst_weighted,
                                 abs(weighted - ht.value) / max(ht.value, 1e-12))
    return {"count": count,
            "worst_plain_gap": worst_plain,
            "worst_weighted_gap": worst_weighted,
            "passed": bool(worst_plain <= rtol and worst_weighted <= rtol)}


def criterion_gt_inequalities(seed: int = 0, count: int = 100,
                              trials: int = 20, restarts: int = 8) -> dict:
    """Sequence inequalities hold against the jcb estimate on random forms."""
    t0 = time.perf_counter()
    worst_w = worst_s = 0.0
    flagged = 0
    for i in range(count):
        form = random_form(2, 2, seed=seed * 3000 + i)
        est = jcb_norm_estimate(form, restarts=restarts, seed=seed + i)
        normalized = form.scaled(1.0 / est.value)
        rep = verify_gt_inequalities(normalized, 1.0, trials=trials,
                                     seed=seed * 7 + i)
        worst_w = max(worst_w, rep.worst_ratio_weighted)
        worst_s = max(worst_s, rep.worst_ratio_symmetrized)
        flagged += len(rep.flagged)
    dt = time.perf_counter() - t0
    return {"count": count, "trials_each": trials,
            "worst_ratio_weighted": worst_w,
            "worst_ratio_symmetrized": worst_s,
            "flagged": flagged,
            "passed": bool(flagged == 0
                           and worst_w <= 1 + 1e-6 and worst_s <= 1 + 1e-6
                           and dt < 300.0),
            "runtime_budget_s": 300.0, "_elapsed_s": dt}


def _normalized_form_set(seed: int, count: int, restarts: int = 8):
    out = []
    for i in range(count):
        form = random_form(2, 2, seed=seed * 4000 + i)
        est = jcb_norm_estimate(form, restarts=restarts, seed=seed + i)
        out.append((form.scaled(1.0 / est.value), est.value))
    return out


def criterion_state_search(seed: int = 0, count: int = 30,
                           max_cuts: int = 50, viol_tol: float = 1e-5) -> dict:
    """State quadruples found at K = 2^{3/2} * estimate and revalidated."""
    forms = _normalized_form_set(seed, count)
    failures = []
    worst_fresh = -np.inf
    max_used_cuts = 0
    results = []
    for i, (form, _) in enumerate(forms):
        res = find_states(form, K=STATE_BOUND_FACTOR, max_cuts=max_cuts,
                          seed=seed + i, restarts=16)
        max_used_cuts = max(max_used_cuts, res.n_cuts)
        if res.status != "feasible":
            failures.append(i)
            results.append(None)
            continue
        fresh = validate_state_bound(form, res.quadruple, n_samples=10_000,
                                     seed=seed * 11 + i)
        worst_fresh = max(worst_fresh, fresh)
        if fresh > viol_tol:
            failures.append(i)
        results.append((form, res.quadruple))
    return {"count": count, "failures": failures,
            "max_cuts_used": max_used_cuts,
            "worst_fresh_violation": float(worst_fresh),
            "passed": not failures,
            "_forms_and_quadruples": results}


def criterion_decomposition(seed: int = 0, count: int = 30,
                            dual_samples: int = 8) -> dict:
    """Decomposition bound between the sampled dual value and the constant."""
    forms = _normalized_form_set(seed, count)
    worst_upper = 0.0
    worst_lower_gap = np.inf
    decs = []
    ok = True
    for i, (form, _) in enumerate(forms):
        dec = decompose_form(form, K=STATE_BOUND_FACTOR)
        decs.append((form, dec))
        lb = sampled_dual_lower_bound(form, dual_samples, seed=seed * 13 + i)
        worst_upper = max(worst_upper, dec.bound / STATE_BOUND_FACTOR)
        worst_lower_gap = min(worst_lower_gap, dec.bound - lb)
        if dec.bound < lb - 1e-4 or dec.bound > STATE_BOUND_FACTOR * (1 + 1e-3):
            ok = False
    return {"count": count,
            "worst_bound_over_K": worst_upper,
            "min_bound_minus_dual": float(worst_lower_gap),
            "passed": ok,
            "_decompositions": decs}


def criterion_factorization(decompositions, rtol: float = 1e-6) -> dict:
    """Row/column factorizations reconstruct the associated maps."""
    worst = 0.0
    for form, dec in decompositions:
        quad = quadruple_from_decomposition(dec)
        fac = factor_through_rc(form, dec, quad)
        scale = max(np.abs(form.coeffs).max(), 1e-300)
        resid = np.abs(fac.reconstruction() - form.coeffs.T).max() / scale
        worst = max(worst, resid)
    return {"count": len(decompositions), "worst_reconstruction": worst,
            "passed": bool(worst <= rtol)}


def criterion_fock(seed: int = 0, families: int = 100) -> dict:
    """Circular-system identities on truncated Fock spaces."""
    t0 = time.perf_counter()
    lam_cycle = [0.25, 1.0, 4.0]
    worst_pairing = 0.0
    worst_comm = 0.0
    for m, D in ((1, 3), (2, 3), (3, 4)):
        fs = fock.FockSpace(m, D)
        lams = [lam_cycle[i % 3] for i in range(m)]
        res = fock.check_double_commutation(fs, lams)
        worst_comm = max(worst_comm, res["residual"])
        for i in range(m):
            for j in range(m):
                for lam in lam_cycle:
                    lam_vec = [lam] * m
                    val = fock.vacuum_pairing(fs, i, j, lam_vec)
                    target = 1.0 if i == j else 0.0
                    worst_pairing = max(worst_pairing, abs(val - target))
    fs = fock.FockSpace(2, 3)
    rng = np.random.default_rng(seed)
    bound_ok = True
    worst_margin = np.inf
    for _ in range(families):
        mats = [random_complex(rng, (2, 2)) for _ in range(2)]
        lams = np.exp(rng.uniform(np.log(0.25), np.log(4.0), size=2))
        side = "left" if rng.integers(2) == 0 else "right"
        lhs, rhs = fock.circular_sum_bound(fs, mats, lams, side)
        worst_margin = min(worst_margin, rhs - lhs)
        if lhs > rhs + 1e-9:
            bound_ok = False
    dt = time.perf_counter() - t0
    return {"worst_vacuum_pairing_error": worst_pairing,
            "worst_commutation_residual": worst_comm,
            "families": families,
            "min_bound_margin": float(worst_margin),
            "passed": bool(worst_pairing <= 1e-14 and worst_comm <= 1e-12
                           and bound_ok and dt < 120.0),
            "runtime_budget_s": 120.0, "_elapsed_s": dt}


def criterion_schur_lp(seed: int = 0, instances: int = 50) -> dict:
    """LP exactness on identities, optimality vs the constructive split,
    and the easy-direction multiplier bound."""
    identity_ok = True
    costs = {}
    for k in range(2, 11):
        res = schur.bounded_split_optimal(np.eye(k))
        costs[k] = res.cost
        if abs(res.cost - k) > 1e-9:
            identity_ok = False
    rng = np.random.default_rng(seed)
    constructive_ok = True
    easy_ok = True
    worst_easy = 0.0
    for i in range(instances):
        k = int(rng.integers(2, 6))
        x = rng.uniform(0.05, 1.0, size=k)
        x /= x.sum()
        y = rng.uniform(0.05, 1.0, size=k)
        y /= y.sum()
        K = float(rng.uniform(0.5, 2.0))
        phi = K * np.sqrt(np.outer(x, y)) * rng.uniform(0.2, 1.0, size=(k, k))
        lp = schur.bounded_split_optimal(phi)
        cs = schur.constructive_split(phi, x, y, K)
        if cs.cost < lp.cost - 1e-9:
            constructive_ok = False
        pairing = schur.multiplier_trace_pairing_norm(phi, restarts=6,
                                                      seed=seed * 17 + i)
        worst_easy = max(worst_easy, pairing / max(lp.cost, 1e-300))
        if pairing > lp.cost + 1e-7:
            easy_ok = False
    return {"identity_costs": costs,
            "instances": instances,
            "worst_easy_direction_ratio": worst_easy,
            "passed": bool(identity_ok and constructive_ok and easy_ok)}


def criterion_schur_gap(kmax: int = 30) -> dict:
    """Bounded-but-not-cb profile: split cost stays small, dominator grows."""
    lp_costs = []
    dom_costs = []
    for k in range(2, kmax + 1):
        phi = np.array([[1.0 / (i + 1) ** 2] * k for i in range(k)])
        lp_costs.append(schur.bounded_split_optimal(phi).cost)
        dom_costs.append(schur.rank_one_dominator(phi).C)
    lp_ok = all(c <= 1.65 for c in lp_costs)
    increasing = all(dom_costs[i + 1] > dom_costs[i] + 1e-12
                     for i in range(len(dom_costs) - 1))
    final_ratio = dom_costs[-1] / lp_costs[-1]
    return {"kmax": kmax,
            "lp_cost_final": lp_costs[-1],
            "dominator_final": dom_costs[-1],
            "final_ratio": final_ratio,
            "passed": bool(lp_ok and increasing and final_ratio > 3.0)}


def criterion_oh_states(seed: int = 0, count: int = 20,
                        tol: float = 1e-5) -> dict:
    """Single-state bounds for normalized OH maps at the fixed constant."""
    from .opspace import OperatorSpace

    E = OperatorSpace.full_matrix_space(2)
    failures = []
    worst_fresh = -np.inf
    for i in range(count):
        rng = np.random.default_rng(seed * 5000 + i)
        dim = int(rng.integers(1, 5))
        u = ohmaps.OHMap(E, random_complex(rng, (dim, 4)))
        cb_est = ohmaps.cb_bound_estimate(u, restarts=8, seed=seed + i)
        u = u.scaled(1.0 / cb_est)
        cb_est = ohmaps.cb_bound_estimate(u, restarts=8, seed=seed + i)
        K = OH_STATE_FACTOR * cb_est
        res = ohmaps.find_oh_state(u, K=K, seed=seed + i)
        if res.status != "feasible":
            failures.append(i)
            continue
        fresh = ohmaps.validate_oh_certificate(u, res.certificate,
                                               n_samples=4000, seed=seed * 19 + i)
        worst_fresh = max(worst_fresh, fresh)
        conv = ohmaps.oh_converse_bound(u, res.certificate, seed=seed + i)
        if fresh > tol or np.sqrt(conv["form_jcb_estimate"]) > K + tol:
            failures.append(i)
    return {"count": count, "failures": failures,
            "worst_fresh_violation": float(worst_fresh),
            "passed": not failures}


def criterion_interp_tails(seed: int = 0, count: int = 100) -> dict:
    """Exact tail inequalities of the threshold splitting."""
    from .opspace import OperatorSpace

    rng = np.random.default_rng(seed)
    ok = True
    for i in range(count):
        n = int(rng.integers(2, 4))
        E = OperatorSpace.full_matrix_space(n)
        u = ohmaps.OHMap(E, random_complex(rng, (int(rng.integers(1, 4)), n * n)))
        lam = rng.uniform(0.02, 1.0, size=n)
        f = np.diag(lam / lam.sum())
        x = random_complex(rng, (n, n))
        t = float(rng.uniform(2.0, 16.0))
        rep = ohmaps.interp_bound_report(u, f, x, t)
        checks = rep["checks"]
        if not (checks["x2_zone_bound"] and checks["x3_zone_bound"]
                and checks["x2_tail_exact"] and checks["x3_tail_exact"]):
            ok = False
    return {"count": count, "passed": ok}


BATTERY = [
    ("haagerup_oracle", criterion_haagerup_oracle),
    ("balancing", criterion_balancing),
    ("gt_inequalities", criterion_gt_inequalities),
    ("state_search", criterion_state_search),
    ("decomposition", criterion_decomposition),
    ("factorization", None),          # consumes decomposition output
    ("fock", criterion_fock),
    ("schur_lp", criterion_schur_lp),
    ("schur_gap", criterion_schur_gap),
    ("oh_states", criterion_oh_states),
    ("interp_tails", criterion_interp_tails),
]


def run_battery(seed: int = 0) -> dict:
    """All value criteria once; returns results plus timing sidecar."""
    results = {}
    timings = {}
    dec_payload = None
    for name, func in BATTERY:
        t0 = time.perf_counter()
        if name == "factorization":
            out = criterion_factorization(dec_payload)
        else:
            out = func(seed=seed) if "seed" in func.__code__.co_varnames else func()
        timings[name] = time.perf_counter() - t0
        if name == "decomposition":
            dec_payload = out.pop("_decompositions")
        out.pop("_forms_and_quadruples", None)
        out.pop("_elapsed_s", None)
        results[name] = out
    return {"results": results, "timings": timings}


def canonical_results_json(battery_out: dict) -> str:
    """Deterministic serialization of the quantitative fields only."""
    return json.dumps(battery_out["results"], sort_keys=True)


def run_acceptance(seed: int = 0) -> dict:
    """Full battery twice; adds the reproducibility criterion."""
    t0 = time.perf_counter()
    first = run_battery(seed)
    second = run_battery(seed)
    j1 = canonical_results_json(first)
    j2 = canonical_results_json(second)
    total = time.perf_counter() - t0
    results = dict(first["results"])
    results["determinism"] = {
        "bit_identical": j1 == j2,
        "total_runtime_s_budget": 1200.0,
        "passed": bool(j1 == j2 and total < 1200.0),
    }
    return {
        "seed": seed,
        "constants": CONSTANTS,
        "results": results,
        "timings": {**first["timings"], "total_two_runs_s": total},
        "all_passed": all(r["passed"] for r in results.values()),
    }
