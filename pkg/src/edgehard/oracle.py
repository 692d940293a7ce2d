"""Independent verifiers that certify robust solutions without trusting the
MILP reformulations.

The inner adversary problem is a continuous knapsack (maximize a nonnegative
linear form of the deviations subject to per-link caps and one budget row),
solved exactly by a greedy fill in coefficient order.  On top of it,
:func:`worst_case_cost` and :func:`worst_case_delay` evaluate the true
worst-case objective and per-area delay of a fixed plan, and
:func:`brute_force_optimal` enumerates every feasible plan of a tiny instance
to produce ground truth.
"""

from __future__ import annotations

import itertools

import numpy as np

from .formulations import Solution
from .instance import Instance

__all__ = [
    "inner_max_greedy", "worst_case_cost", "worst_case_delay",
    "brute_force_optimal", "InfeasibleInstanceError",
]

DELAY_SLACK = 1e-6   # feasibility slack when re-checking delay caps
_TIE_TOL = 1e-12


class InfeasibleInstanceError(RuntimeError):
    """The instance admits no plan satisfying all caps."""


def inner_max_greedy(coeffs, upper, budget):
    """Exact solution of ``max c.g  s.t.  sum g <= budget, 0 <= g <= upper``.

    Greedy fill in decreasing coefficient order (ties by index ascending) is
    optimal for the continuous knapsack.  Returns ``(g, value)``.
    """
    c = np.asarray(coeffs, dtype=float).ravel()
    ub = np.asarray(upper, dtype=float).ravel()
    if c.shape != ub.shape:
        raise ValueError("coefficient and bound arrays must match")
    if np.any(c < 0) or np.any(ub < 0) or budget < 0:
        raise ValueError("inner_max_greedy needs nonnegative inputs")
    g = np.zeros_like(ub)
    remaining = float(budget)
    for k in np.argsort(-c, kind="stable"):
        if remaining <= 0:
            break
        take = min(ub[k], remaining)
        g[k] = take
        remaining -= take
    return g, float(np.dot(c, g))


def worst_case_cost(inst: Instance, sol: Solution) -> float:
    """True worst-case total cost of a plan under the decision-dependent set.

    Payment plus unmet penalties plus the delay cost at the adversarial
    deviation: base delays, the workload-driven quadratic term, and the
    greedy-optimal deviation allocation against caps ``1 - impact . t`` under
    the shared deviation budget.
    """
    x = sol.x.astype(float)
    base = float((inst.unmet_penalty * sol.w).sum())
    base += inst.delay_penalty * float((inst.delay_min * x).sum())
    base += inst.delay_penalty * float(
        (inst.delay_dev * inst.workload_impact * x * x).sum())
    ub = inst.deviation_upper(sol.t)
    coeffs = inst.delay_penalty * inst.delay_dev * x
    _, value = inner_max_greedy(coeffs, ub, inst.uncertainty_budget_ddu)
    return sol.hardening_payment + base + value


def worst_case_delay(inst: Instance, sol: Solution, area: int) -> float:
    """True worst-case average delay of one area under the plan.

    The adversary draws from the same global deviation budget, but only the
    area's own links carry weight in its delay row.
    """
    lam = float(inst.demand[area])
    if lam <= 0:
        return 0.0
    x = sol.x[area].astype(float)
    base = float((inst.delay_min[area] * x).sum()) / lam
    base += float((inst.delay_dev[area] * inst.workload_impact[area] * x * x).sum()) / lam
    ub = inst.deviation_upper(sol.t)[area]
    coeffs = inst.delay_dev[area] * x / lam
    _, value = inner_max_greedy(coeffs, ub, inst.uncertainty_budget_ddu)
    return base + value


# --- exhaustive ground truth ----------------------------------------------------

_GUARD_LINKS = 4
_GUARD_DEMAND = 6
_GUARD_LEVELS = 2


def _area_allocations(inst, cap, i):
    """All integral allocation rows for one area respecting its caps."""
    lam = int(inst.demand[i])
    wmax = int(inst.unmet_upper()[i])
    out = []
    ranges = [range(int(cap[i, j]) + 1) for j in range(inst.num_nodes)]
    for combo in itertools.product(*ranges):
        served = sum(combo)
        if 0 <= lam - served <= wmax:
            out.append((np.array(combo, dtype=np.int64), lam - served))
    return out


def brute_force_optimal(inst: Instance) -> Solution:
    """Ground-truth optimum of a tiny instance by full enumeration.

    Guarded to at most 4 links, demands up to 6, and 2 hardening levels.
    Every budget-feasible hardening plan is combined with every integral
    allocation satisfying supply, drop-cap, capacity, and worst-case delay
    rows; the objective is the certified worst-case cost.  Ties break
    lexicographically on the flattened (t, x) arrays.  Raises
    :class:`InfeasibleInstanceError` when nothing is feasible.
    """
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    if ni * nj > _GUARD_LINKS or inst.demand.max(initial=0) > _GUARD_DEMAND \
            or nr > _GUARD_LEVELS:
        raise ValueError("instance exceeds the brute-force guard "
                         f"(links <= {_GUARD_LINKS}, demand <= {_GUARD_DEMAND}, "
                         f"levels <= {_GUARD_LEVELS})")
    cap = inst.alloc_upper()
    per_area = [_area_allocations(inst, cap, i) for i in range(ni)]
    if any(not opts for opts in per_area):
        raise InfeasibleInstanceError("an area cannot satisfy its drop cap")

    # plans ordered so the flattened t array is lexicographically ascending:
    # level choice c per link maps to the one-hot row (... t_r ...)
    level_order = [None] + list(range(nr - 1, -1, -1))
    best = None
    for plan in itertools.product(level_order, repeat=ni * nj):
        t = np.zeros((ni, nj, nr), dtype=np.int64)
        for link, choice in enumerate(plan):
            if choice is not None:
                t[link // nj, link % nj, choice] = 1
        payment = float((inst.harden_cost * t).sum())
        if payment > inst.budget + 1e-9:
            continue
        ub = inst.deviation_upper(t)

        # per-area allocations that survive the worst-case delay row
        feasible_rows = []
        for i in range(ni):
            lam = float(inst.demand[i])
            rows = []
            for xrow, wi in per_area[i]:
                if lam > 0:
                    xr = xrow.astype(float)
                    base = float((inst.delay_min[i] * xr).sum()) / lam
                    base += float((inst.delay_dev[i] * inst.workload_impact[i]
                                   * xr * xr).sum()) / lam
                    _, dev = inner_max_greedy(inst.delay_dev[i] * xr / lam, ub[i],
                                              inst.uncertainty_budget_ddu)
                    if base + dev > inst.delay_cap[i] + DELAY_SLACK:
                        continue
                rows.append((xrow, wi))
            if not rows:
                feasible_rows = None
                break
            feasible_rows.append(rows)
        if feasible_rows is None:
            continue

        for combo in itertools.product(*feasible_rows):
            x = np.stack([row for row, _ in combo])
            if np.any(x.sum(axis=0) > inst.capacity):
                continue
            w = np.array([wi for _, wi in combo], dtype=np.int64)
            cand = Solution(t=t, x=x, w=w, objective=0.0,
                            hardening_payment=payment, allocation_cost=0.0,
                            formulation="oracle")
            cost = worst_case_cost(inst, cand)
            key = (tuple(t.ravel()), tuple(x.ravel()))
            if best is None or cost < best[0] - _TIE_TOL \
                    or (abs(cost - best[0]) <= _TIE_TOL and key < best[1]):
                best = (cost, key, t, x, w, payment)

    if best is None:
        raise InfeasibleInstanceError("no feasible plan within all caps")
    cost, _, t, x, w, payment = best
    return Solution(t=t, x=x, w=w, objective=cost, hardening_payment=payment,
                    allocation_cost=cost - payment, formulation="oracle")
