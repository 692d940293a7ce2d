import itertools

import numpy as np
import pytest

from edgehard import (
    GenConfig, build_det, build_erddu, build_nh, build_rddu, build_ro_nh,
    build_sddu, extract_solution, generate, sddu_scenarios,
)
from edgehard.formulations import (
    CorruptSolutionError, SdduScenarioSet, Solution, dumps_solution,
    load_solution, loads_solution, save_solution, validate_solution,
)
from edgehard.milp import stats
from edgehard.solver import SolverConfig, solve

from conftest import one_link_instance, small_cfg, tiny_cfg

GAP0 = SolverConfig(mip_gap=0.0)


def _opt(model):
    res = solve(model, GAP0)
    assert res.status == "optimal", f"{model.name}: {res.status}"
    return res


def _solution(inst, model):
    return extract_solution(inst, model, _opt(model).values)


# --- deterministic models ---------------------------------------------------------

def test_det_never_hardens():
    for seed in range(4):
        inst = generate(small_cfg(seed))
        sol = _solution(inst, build_det(inst))
        assert sol.t.sum() == 0
        assert sol.hardening_payment == 0.0


def test_det_zero_demand_costs_nothing():
    inst = generate(small_cfg(0, demand_range=(0, 0)))
    res = _opt(build_det(inst))
    assert res.objective == pytest.approx(0.0, abs=1e-9)
    sol = extract_solution(inst, build_det(inst), _opt(build_det(inst)).values)
    assert sol.x.sum() == 0 and sol.w.sum() == 0


def brute_force_one_link_det(inst):
    """Enumerate x on the single link; w follows from supply."""
    lam = int(inst.demand[0])
    best = np.inf
    for x in range(min(lam, int(inst.capacity[0])) + 1):
        w = lam - x
        if w > inst.unmet_fraction_cap[0] * lam:
            continue
        if lam > 0 and inst.delay_min[0, 0] * x / lam > inst.delay_cap[0]:
            continue
        best = min(best, inst.delay_penalty * inst.delay_min[0, 0] * x
                   + inst.unmet_penalty[0] * w)
    return best


def test_det_one_link_matches_enumeration():
    inst = one_link_instance()
    assert brute_force_one_link_det(inst) == pytest.approx(0.2)
    res = _opt(build_det(inst))
    assert res.objective == pytest.approx(0.2)
    sol = extract_solution(inst, build_det(inst), res.values)
    assert (sol.x[0, 0], sol.w[0]) == (2, 0)


def test_nh_equals_det_and_has_no_binaries():
    for seed in range(3):
        inst = generate(small_cfg(seed))
        det = _opt(build_det(inst)).objective
        nh_model = build_nh(inst)
        assert stats(nh_model).binaries == 0
        nh = _opt(nh_model).objective
        assert nh == pytest.approx(det, rel=1e-9)
    inst = one_link_instance()
    assert _opt(build_nh(inst)).objective == pytest.approx(0.2)


# --- robust counterpart without decision dependence --------------------------------

def test_ro_nh_zero_budget_equals_nh():
    inst = generate(small_cfg(1, uncertainty_budget_diu=0.0))
    assert _opt(build_ro_nh(inst)).objective == \
        pytest.approx(_opt(build_nh(inst)).objective, rel=1e-9)


def test_ro_nh_saturated_budget_equals_shifted_nh():
    inst = generate(small_cfg(2, uncertainty_budget_diu=100.0))
    shifted = inst.replace(delay_min=np.array(inst.delay_min + inst.delay_dev))
    assert _opt(build_ro_nh(inst)).objective == \
        pytest.approx(_opt(build_nh(shifted)).objective, rel=1e-9)


def test_ro_nh_monotone_in_deviation_budget():
    inst = generate(small_cfg(3))
    values = []
    for budget in (0.0, 0.5, 1.0, 2.0, 4.0):
        values.append(_opt(build_ro_nh(
            inst.replace(uncertainty_budget_diu=budget))).objective)
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


# --- decision-dependent counterparts -------------------------------------------------

def test_rddu_degenerates_to_ro_nh_without_decision_dependence():
    base = generate(small_cfg(4))
    inst = base.replace(harden_impact=np.zeros_like(base.harden_impact),
                        workload_impact=np.zeros_like(base.workload_impact),
                        uncertainty_budget_ddu=base.uncertainty_budget_diu)
    ro = _opt(build_ro_nh(inst)).objective
    rd = _opt(build_rddu(inst)).objective
    assert rd == pytest.approx(ro, rel=1e-6)


def test_rddu_no_uncertainty_equals_nh():
    base = generate(small_cfg(5))
    inst = base.replace(workload_impact=np.zeros_like(base.workload_impact),
                        uncertainty_budget_ddu=0.0)
    assert _opt(build_rddu(inst)).objective == \
        pytest.approx(_opt(build_nh(inst)).objective, rel=1e-9)


def test_degeneracy_chain_rddu_erddu_nh():
    for seed in (6, 7):
        base = generate(small_cfg(seed))
        inst = base.replace(workload_impact=np.zeros_like(base.workload_impact),
                            uncertainty_budget_ddu=0.0)
        nh = _opt(build_nh(inst)).objective
        assert _opt(build_rddu(inst)).objective == pytest.approx(nh, rel=1e-9)
        assert _opt(build_erddu(inst)).objective == pytest.approx(nh, rel=1e-9)


def test_rddu_matches_erddu_on_random_instances():
    for seed in range(5):
        inst = generate(small_cfg(seed))
        a = _opt(build_rddu(inst)).objective
        b = _opt(build_erddu(inst)).objective
        assert b == pytest.approx(a, rel=1e-6)


def test_erddu_has_fewer_rows_by_four_per_link_level():
    inst = generate(small_cfg(0))
    diff = stats(build_rddu(inst)).rows - stats(build_erddu(inst)).rows
    n_links = inst.num_areas * inst.num_nodes
    assert diff == 4 * inst.num_levels * n_links
    assert stats(build_erddu(inst)).rows < stats(build_rddu(inst)).rows


def test_rddu_solution_extraction_consistency():
    inst = generate(small_cfg(1))
    model = build_rddu(inst)
    res = _opt(model)
    sol = extract_solution(inst, model, res.values)
    assert validate_solution(inst, sol) == []
    assert sol.objective == pytest.approx(res.objective, abs=1e-9)
    # extraction recomputes the payment from the plan itself
    assert sol.hardening_payment == pytest.approx(
        float((inst.harden_cost * sol.t).sum()), abs=1e-12)
    assert sol.allocation_cost == pytest.approx(
        sol.objective - sol.hardening_payment, abs=1e-9)


def test_erddu_extracts_hardening_from_keep_complement():
    inst = generate(small_cfg(2))
    m1, m2 = build_rddu(inst), build_erddu(inst)
    s1 = extract_solution(inst, m1, _opt(m1).values)
    s2 = extract_solution(inst, m2, _opt(m2).values)
    assert s2.formulation == "erddu"
    # equal optima; payments agree up to solver ties in the plan choice
    assert s2.objective == pytest.approx(s1.objective, rel=1e-6)
    assert validate_solution(inst, s2) == []


# --- monotonicity properties ----------------------------------------------------------

def _rddu_value(inst):
    return _opt(build_rddu(inst)).objective


def test_rddu_monotone_in_hardening_budget():
    inst = generate(small_cfg(3))
    vals = [_rddu_value(inst.replace(budget=b)) for b in (0.0, 1.0, 2.0, 4.0)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_rddu_monotone_in_deviation_budget():
    inst = generate(small_cfg(4))
    vals = [_rddu_value(inst.replace(uncertainty_budget_ddu=g))
            for g in (0.0, 1.0, 2.0, 4.0)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_rddu_monotone_in_workload_impact():
    inst = generate(small_cfg(5))
    vals = [_rddu_value(inst.replace(
        workload_impact=np.full_like(inst.workload_impact, u)))
        for u in (0.0, 0.05, 0.1)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_rddu_monotone_in_delay_penalty():
    inst = generate(small_cfg(6))
    vals = [_rddu_value(inst.replace(delay_penalty=r))
            for r in (0.1, 0.2, 0.4)]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


# --- scenario benchmark -----------------------------------------------------------------

def test_sddu_single_zero_scenario_collapses_to_det():
    inst = generate(tiny_cfg(0))
    scen = SdduScenarioSet(draws=[0.0], probabilities=[1.0])
    sd = _opt(build_sddu(inst, scen)).objective
    assert sd == pytest.approx(_opt(build_det(inst)).objective, rel=1e-9)


def test_sddu_full_scenario_matches_shifted_det_without_dependence():
    base = generate(tiny_cfg(1))
    inst = base.replace(harden_impact=np.full_like(base.harden_impact, 1e-9),
                        workload_impact=np.zeros_like(base.workload_impact))
    scen = SdduScenarioSet(draws=[1.0], probabilities=[1.0])
    shifted = inst.replace(delay_min=np.array(inst.delay_min + inst.delay_dev))
    sd = _opt(build_sddu(inst, scen)).objective
    assert sd == pytest.approx(_opt(build_det(shifted)).objective, rel=1e-6)


def test_sddu_expected_cost_nonincreasing_in_budget():
    inst = generate(tiny_cfg(2))
    scen = sddu_scenarios(4, seed=3)
    vals = [_opt(build_sddu(inst.replace(budget=b), scen)).objective
            for b in (0.0, 1.0, 3.0)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_sddu_scenario_set_validation():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        SdduScenarioSet(draws=[1.2], probabilities=[1.0])
    with pytest.raises(ValueError, match="sum"):
        SdduScenarioSet(draws=[0.5, 0.5], probabilities=[0.7, 0.7])
    with pytest.raises(ValueError, match="positive"):
        sddu_scenarios(0)
    scen = sddu_scenarios(8, seed=1)
    assert scen.count == 8
    assert scen.probabilities.sum() == pytest.approx(1.0)


# --- extraction and persistence -----------------------------------------------------------

def test_extract_rejects_fractional_binary():
    inst = generate(small_cfg(0))
    model = build_rddu(inst)
    values = _opt(model).values.copy()
    values[model.ref("t_0_0_0")] = 0.4
    with pytest.raises(CorruptSolutionError, match="t_0_0_0"):
        extract_solution(inst, model, values)


def test_extract_rejects_invariant_violation():
    inst = generate(small_cfg(0))
    model = build_nh(inst)
    values = _opt(model).values.copy()
    values[model.ref("w_0")] = values[model.ref("w_0")] + 1.0
    with pytest.raises(CorruptSolutionError, match="supply_0"):
        extract_solution(inst, model, values)


def test_validate_solution_reports_budget_and_capacity():
    inst = generate(tiny_cfg(0))
    t = np.zeros((2, 2, 2), dtype=int)
    t[:, :, 1] = 1   # harden everything at the top level
    x = np.zeros((2, 2), dtype=int)
    w = np.array(inst.demand)
    sol = Solution(t=t, x=x, w=w, objective=0.0,
                   hardening_payment=float((inst.harden_cost * t).sum()),
                   allocation_cost=0.0)
    problems = validate_solution(inst, sol)
    assert any("budget" in p for p in problems)
    assert any("unmet" in p for p in problems)


def test_solution_round_trip(tmp_path):
    inst = generate(small_cfg(1))
    model = build_rddu(inst)
    sol = extract_solution(inst, model, _opt(model).values)
    path = tmp_path / "sol.txt"
    save_solution(sol, path)
    back = load_solution(path)
    assert back == sol
    with pytest.raises(CorruptSolutionError):
        loads_solution("garbage")
    text = dumps_solution(sol)
    assert loads_solution(text) == sol
