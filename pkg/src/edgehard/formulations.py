"""Builders for the five planning models and typed solution extraction.

All builders take an :class:`~edgehard.instance.Instance` and return a
:class:`~edgehard.milp.MilpModel` tagged with the formulation name:

* ``build_det``   - deterministic plan at minimum delays; hardening is priced
  but useless, so any optimum has no hardening.
* ``build_nh``    - the deterministic plan with the hardening machinery
  dropped entirely.
* ``build_ro_nh`` - robust counterpart under the exogenous deviation set
  (budgeted deviations, no decision dependence): the inner maxima in the
  objective and in each per-area delay row are replaced by their LP duals.
* ``build_rddu``  - robust counterpart under the decision-dependent set.
  Each inner maximum is dualized; the hardening-times-dual products are
  linearized with big-M envelopes and the integer squares with a binary
  expansion of one factor.
* ``build_erddu`` - equivalent counterpart that models the complement of the
  hardening choice (``keep = 1 - harden``) so every impact coefficient in the
  dualized set bound is nonnegative; the product envelopes then need only
  their lower-bound rows, shrinking the model by four rows per link and
  level.
* ``build_sddu``  - scenario benchmark: expected cost over sampled deviation
  fractions with per-scenario recourse allocations.

Big-M values are analytic, not guessed: each dual multiplier is bounded by
its dual-feasibility row (the objective duals by ``rho * dev * alloc_cap``
and the delay-row duals by ``dev * alloc_cap / demand``), and the envelopes
inherit those bounds.

Worst cases are enforced row-wise: the objective and each area's delay row
are dualized independently against the full deviation budget, mirroring the
separate dualizations that define the counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import milp
from .instance import Instance
from .linearize import binary_expand, linearize_square, mccormick_bin_cont, product_bin_int
from .milp import LinExpr, MilpModel, Variable

__all__ = [
    "Solution", "SdduScenarioSet", "CorruptSolutionError",
    "build_det", "build_nh", "build_ro_nh", "build_rddu", "build_erddu",
    "build_sddu", "sddu_scenarios", "extract_solution", "validate_solution",
    "save_solution", "load_solution",
]

INT_TOL = 1e-6


class CorruptSolutionError(ValueError):
    """Solver values violate integrality or a solution invariant."""


@dataclass(frozen=True)
class Solution:
    """Typed planning solution: hardening plan, allocation, and cost split."""

    t: np.ndarray               # (I, J, R) binary hardening choices
    x: np.ndarray               # (I, J) integer allocations
    w: np.ndarray               # (I,) integer unmet demand
    objective: float
    hardening_payment: float    # sum of chosen hardening costs
    allocation_cost: float      # objective minus the hardening payment
    formulation: str = ""

    def __post_init__(self):
        t = np.array(self.t, dtype=np.int64)
        x = np.array(self.x, dtype=np.int64)
        w = np.array(self.w, dtype=np.int64)
        for name, arr in (("t", t), ("x", x), ("w", w)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, Solution):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name))
            if isinstance(getattr(self, f.name), np.ndarray)
            else getattr(self, f.name) == getattr(other, f.name)
            for f in fields(self)
        )


@dataclass(frozen=True)
class SdduScenarioSet:
    """Sampled deviation fractions in [0, 1] with scenario probabilities."""

    draws: np.ndarray           # (N,) scale of the deviation in each scenario
    probabilities: np.ndarray   # (N,) nonnegative, summing to one

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        if draws.ndim != 1 or probs.shape != draws.shape or draws.size == 0:
            raise ValueError("scenario set needs matching nonempty 1-d arrays")
        if np.any(draws < 0) or np.any(draws > 1):
            raise ValueError("scenario draws must lie in [0, 1]")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("scenario probabilities must be nonnegative and sum to 1")
        draws.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "probabilities", probs)

    @property
    def count(self) -> int:
        return self.draws.size


def sddu_scenarios(count: int, seed: int = 0) -> SdduScenarioSet:
    """Equiprobable scenario set with i.i.d. uniform draws on [0, 1]."""
    if count <= 0:
        raise ValueError("scenario count must be positive")
    draws = np.random.default_rng(seed).random(count)
    return SdduScenarioSet(draws, np.full(count, 1.0 / count))


# --- shared pieces -----------------------------------------------------------

def _harden_vars(m, inst):
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    t = np.empty((ni, nj, nr), dtype=object)
    for i in range(ni):
        for j in range(nj):
            for r in range(nr):
                t[i, j, r] = m.add_var(Variable.binary(f"t_{i}_{j}_{r}"))
    budget_terms = [(t[i, j, r], inst.harden_cost[i, j, r])
                    for i in range(ni) for j in range(nj) for r in range(nr)]
    m.add_constr(budget_terms, "<=", inst.budget, "budget")
    for i in range(ni):
        for j in range(nj):
            m.add_constr([(t[i, j, r], 1.0) for r in range(nr)], "<=", 1.0,
                         f"level_{i}_{j}")
    return t


def _implied_alloc_cap(inst, worst_case: bool) -> np.ndarray:
    """Valid per-link allocation caps tightened through the delay rows.

    Every model's delay row dominates its deterministic floor, so any
    feasible allocation obeys ``min_delay * x <= cap * demand`` link by link;
    the worst-case models additionally price the workload-driven deviation,
    giving ``dev * slope * x**2 <= cap * demand``.  Tighter caps shrink the
    binary expansions and every big-M derived from them.
    """
    cap = inst.alloc_upper().astype(float)
    lam_cap = (inst.delay_cap * inst.demand.astype(float))[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        by_min = np.where(inst.delay_min > 0, lam_cap / inst.delay_min, np.inf)
        cap = np.minimum(cap, np.floor(by_min + 1e-9))
        if worst_case:
            quad = inst.delay_dev * inst.workload_impact
            by_quad = np.where(quad > 0, np.sqrt(lam_cap / np.where(quad > 0, quad, 1.0)),
                               np.inf)
            cap = np.minimum(cap, np.floor(by_quad + 1e-9))
    return np.maximum(cap, 0.0).astype(np.int64)


def _alloc_vars(m, inst, cap=None):
    ni, nj = inst.num_areas, inst.num_nodes
    if cap is None:
        cap = inst.alloc_upper()
    wcap = inst.unmet_upper()
    x = np.empty((ni, nj), dtype=object)
    for i in range(ni):
        for j in range(nj):
            x[i, j] = m.add_var(Variable.integer(f"x_{i}_{j}", 0.0, float(cap[i, j])))
    w = np.array([m.add_var(Variable.integer(f"w_{i}", 0.0, float(wcap[i])))
                  for i in range(ni)], dtype=object)
    for j in range(nj):
        m.add_constr([(x[i, j], 1.0) for i in range(ni)], "<=",
                     float(inst.capacity[j]), f"cap_{j}")
    for i in range(ni):
        terms = [(w[i], 1.0)] + [(x[i, j], 1.0) for j in range(nj)]
        m.add_constr(terms, "=", float(inst.demand[i]), f"supply_{i}")
    return x, w, cap


def _needs_square(inst, cap, i, j):
    return cap[i, j] >= 1 and inst.delay_dev[i, j] * inst.workload_impact[i, j] > 0


def _square_exprs(m, inst, x, cap, prefix="x"):
    """Binary expansions and product expressions for x**2 where it is needed."""
    sq = {}
    for i in range(inst.num_areas):
        for j in range(inst.num_nodes):
            if _needs_square(inst, cap, i, j):
                bound = int(cap[i, j])
                exp = binary_expand(m, x[i, j], bound, f"{prefix}_{i}_{j}_bit")
                sq[i, j] = linearize_square(m, x[i, j], exp, bound,
                                            f"{prefix}_{i}_{j}_sq")
    return sq


def _deterministic_cost_terms(inst, x, w, delays):
    terms = []
    rho = inst.delay_penalty
    for i in range(inst.num_areas):
        for j in range(inst.num_nodes):
            terms.append((x[i, j], rho * delays[i, j]))
    for i in range(inst.num_areas):
        terms.append((w[i], float(inst.unmet_penalty[i])))
    return terms


def _deterministic_delay_rows(m, inst, x, delays, extra=None):
    for i in range(inst.num_areas):
        lam = float(inst.demand[i])
        if lam <= 0:
            continue
        terms = [(x[i, j], delays[i, j] / lam) for j in range(inst.num_nodes)]
        if extra is not None:
            terms += extra(i)
        m.add_constr(terms, "<=", float(inst.delay_cap[i]), f"delay_{i}")


# --- deterministic models ----------------------------------------------------

def build_det(inst: Instance) -> MilpModel:
    """Plan at minimum delays with hardening offered but never worthwhile."""
    m = MilpModel("det")
    t = _harden_vars(m, inst)
    x, w, _ = _alloc_vars(m, inst, _implied_alloc_cap(inst, worst_case=False))
    _deterministic_delay_rows(m, inst, x, inst.delay_min)
    obj = [(t[i, j, r], inst.harden_cost[i, j, r])
           for i in range(inst.num_areas)
           for j in range(inst.num_nodes)
           for r in range(inst.num_levels)]
    obj += _deterministic_cost_terms(inst, x, w, inst.delay_min)
    m.set_objective(obj)
    return m


def build_nh(inst: Instance) -> MilpModel:
    """Deterministic allocation without any hardening machinery."""
    m = MilpModel("nh")
    x, w, _ = _alloc_vars(m, inst, _implied_alloc_cap(inst, worst_case=False))
    _deterministic_delay_rows(m, inst, x, inst.delay_min)
    m.set_objective(_deterministic_cost_terms(inst, x, w, inst.delay_min))
    return m


# --- robust counterpart without decision dependence ---------------------------

def build_ro_nh(inst: Instance) -> MilpModel:
    """Robust allocation under the exogenous budgeted-deviation set.

    Deviations do not depend on decisions here, so there is nothing to
    harden: the model has allocation variables plus the LP duals of the
    inner maxima (one budget multiplier and one per-link cap multiplier for
    the objective and for each area's delay row).
    """
    m = MilpModel("ro_nh")
    x, w, _ = _alloc_vars(m, inst, _implied_alloc_cap(inst, worst_case=False))
    ni, nj = inst.num_areas, inst.num_nodes
    rho = inst.delay_penalty
    gamma_budget = inst.uncertainty_budget_diu

    dual_budget_obj = m.add_var(Variable.cont("dub_obj"))
    dual_cap_obj = np.empty((ni, nj), dtype=object)
    for i in range(ni):
        for j in range(nj):
            dual_cap_obj[i, j] = m.add_var(Variable.cont(f"dcap_obj_{i}_{j}"))
            m.add_constr([(dual_budget_obj, 1.0), (dual_cap_obj[i, j], 1.0),
                          (x[i, j], -rho * inst.delay_dev[i, j])], ">=", 0.0,
                         f"dualfeas_obj_{i}_{j}")

    obj = _deterministic_cost_terms(inst, x, w, inst.delay_min)
    obj.append((dual_budget_obj, gamma_budget))
    obj += [(dual_cap_obj[i, j], 1.0) for i in range(ni) for j in range(nj)]
    m.set_objective(obj)

    for i in range(ni):
        lam = float(inst.demand[i])
        if lam <= 0:
            continue
        dual_budget = m.add_var(Variable.cont(f"dub_del_{i}"))
        terms = [(x[i, j], inst.delay_min[i, j] / lam) for j in range(nj)]
        terms.append((dual_budget, gamma_budget))
        for j in range(nj):
            dual_cap = m.add_var(Variable.cont(f"dcap_del_{i}_{j}"))
            m.add_constr([(dual_budget, 1.0), (dual_cap, 1.0),
                          (x[i, j], -inst.delay_dev[i, j] / lam)], ">=", 0.0,
                         f"dualfeas_del_{i}_{j}")
            terms.append((dual_cap, 1.0))
        m.add_constr(terms, "<=", float(inst.delay_cap[i]), f"delay_{i}")
    return m


# --- robust counterparts under decision-dependent deviations -------------------

def _dual_bound_obj(inst, cap, i, j):
    """Analytic cap on the objective's per-link dual multiplier."""
    val = inst.delay_penalty * inst.delay_dev[i, j] * cap[i, j]
    return val if val > 0 else 1.0


def _dual_bound_delay(inst, cap, i, j):
    """Analytic cap on a delay row's per-link dual multiplier."""
    val = inst.delay_dev[i, j] * cap[i, j] / float(inst.demand[i])
    return val if val > 0 else 1.0


def _rddu_block(m, inst, t, x, cap, tag, scale, budget_var, bound_fn):
    """Dualized inner maximum for one row of the standard counterpart.

    Returns the expression terms to add to the host row:
    ``budget * dual_budget + sum_ij dual_cap_ij - sum_ijr impact * product``,
    where ``product`` linearizes hardening-choice times cap-dual.  ``scale``
    maps the x coefficient of the dual-feasibility row (``rho * dev`` for the
    objective, ``dev / demand`` for a delay row).
    """
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    terms = [(budget_var, inst.uncertainty_budget_ddu)]
    for i in range(ni):
        for j in range(nj):
            dual_cap = m.add_var(Variable.cont(f"dcap_{tag}_{i}_{j}"))
            m.add_constr([(budget_var, 1.0), (dual_cap, 1.0),
                          (x[i, j], -scale(i, j))], ">=", 0.0,
                         f"dualfeas_{tag}_{i}_{j}")
            terms.append((dual_cap, 1.0))
            big_m = bound_fn(inst, cap, i, j)
            for r in range(nr):
                prod = mccormick_bin_cont(m, t[i, j, r], dual_cap, big_m,
                                          f"tcap_{tag}_{i}_{j}_{r}")
                terms.append((prod, -inst.harden_impact[i, j, r]))
    return terms


def build_rddu(inst: Instance) -> MilpModel:
    """Standard MILP counterpart of the decision-dependent robust model."""
    m = MilpModel("rddu")
    t = _harden_vars(m, inst)
    x, w, cap = _alloc_vars(m, inst, _implied_alloc_cap(inst, worst_case=True))
    sq = _square_exprs(m, inst, x, cap)
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    rho = inst.delay_penalty

    cost = m.add_var(Variable.cont("cost"))
    m.set_objective([(cost, 1.0)])

    # epigraph row: cost dominates payment, penalties, and the dualized
    # worst-case delay cost
    epi = [(cost, 1.0)]
    epi += [(t[i, j, r], -inst.harden_cost[i, j, r])
            for i in range(ni) for j in range(nj) for r in range(nr)]
    epi += [(ref, -c) for ref, c in
            _deterministic_cost_terms(inst, x, w, inst.delay_min)]
    for (i, j), expr in sq.items():
        coef = rho * inst.delay_dev[i, j] * inst.workload_impact[i, j]
        epi += [(ref, -coef * c) for ref, c in expr.terms]
    dual_budget_obj = m.add_var(Variable.cont("dub_obj"))
    epi += [(ref, -c) for ref, c in _rddu_block(
        m, inst, t, x, cap, "obj",
        lambda i, j: rho * inst.delay_dev[i, j],
        dual_budget_obj, _dual_bound_obj)]
    m.add_constr(epi, ">=", 0.0, "cost_epi")

    for i in range(ni):
        lam = float(inst.demand[i])
        if lam <= 0:
            continue
        dual_budget = m.add_var(Variable.cont(f"dub_del_{i}"))
        terms = [(x[i, j], inst.delay_min[i, j] / lam) for j in range(nj)]
        for j in range(nj):
            if (i, j) in sq:
                coef = inst.delay_dev[i, j] * inst.workload_impact[i, j] / lam
                terms += [(ref, coef * c) for ref, c in sq[i, j].terms]
        # the delay row of area i prices only its own links; deviations on
        # other areas' links never enter this row's inner maximum
        terms.append((dual_budget, inst.uncertainty_budget_ddu))
        for j in range(nj):
            dual_cap = m.add_var(Variable.cont(f"dcap_del{i}_{j}"))
            m.add_constr([(dual_budget, 1.0), (dual_cap, 1.0),
                          (x[i, j], -inst.delay_dev[i, j] / lam)], ">=", 0.0,
                         f"dualfeas_del{i}_{j}")
            terms.append((dual_cap, 1.0))
            big_m = _dual_bound_delay(inst, cap, i, j)
            for r in range(nr):
                prod = mccormick_bin_cont(m, t[i, j, r], dual_cap, big_m,
                                          f"tcap_del{i}_{j}_{r}")
                terms.append((prod, -inst.harden_impact[i, j, r]))
        m.add_constr(terms, "<=", float(inst.delay_cap[i]), f"delay_{i}")
    return m


def _erddu_keep_block(m, inst, keep, dual_cap, i, j, tag, big_m):
    """Lower-bound-only products for keep-choice times cap-dual.

    Returns row terms replacing ``upper_bound(i,j) * dual_cap``: the constant
    part ``(1 - sum_r impact) * dual_cap`` plus one auxiliary per level,
    lower-bounded by ``impact * dual_cap - M (1 - keep)``.
    """
    nr = inst.num_levels
    terms = [(dual_cap, 1.0 - float(inst.harden_impact[i, j, :].sum()))]
    for r in range(nr):
        gam = float(inst.harden_impact[i, j, r])
        vcap = m.add_var(Variable.cont(f"kcap_{tag}_{i}_{j}_{r}"))
        mm = gam * big_m if gam > 0 else 1.0
        m.add_constr([(vcap, 1.0), (dual_cap, -gam), (keep[i, j, r], -mm)],
                     ">=", -mm, f"kcap_{tag}_{i}_{j}_{r}_lb")
        terms.append((vcap, 1.0))
    return terms


def build_erddu(inst: Instance) -> MilpModel:
    """Reduced-size equivalent counterpart via the keep-choice complement.

    Binary ``keep = 1 - harden`` makes every impact coefficient in the
    deviation bound nonnegative, so each product auxiliary needs only its
    lower-bound row instead of a full three-row envelope; budget, level, and
    cost rows are written directly in terms of ``keep``.
    """
    m = MilpModel("erddu")
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    rho = inst.delay_penalty

    keep = np.empty((ni, nj, nr), dtype=object)
    for i in range(ni):
        for j in range(nj):
            for r in range(nr):
                keep[i, j, r] = m.add_var(Variable.binary(f"keep_{i}_{j}_{r}"))
    total_cost_all = float(inst.harden_cost.sum())
    budget_terms = [(keep[i, j, r], -inst.harden_cost[i, j, r])
                    for i in range(ni) for j in range(nj) for r in range(nr)]
    m.add_constr(budget_terms, "<=", inst.budget - total_cost_all, "budget")
    for i in range(ni):
        for j in range(nj):
            m.add_constr([(keep[i, j, r], 1.0) for r in range(nr)], ">=",
                         float(nr - 1), f"level_{i}_{j}")

    x, w, cap = _alloc_vars(m, inst, _implied_alloc_cap(inst, worst_case=True))
    sq = _square_exprs(m, inst, x, cap)

    cost = m.add_var(Variable.cont("cost"))
    m.set_objective([(cost, 1.0)])

    epi = [(cost, 1.0)]
    epi += [(keep[i, j, r], inst.harden_cost[i, j, r])
            for i in range(ni) for j in range(nj) for r in range(nr)]
    epi += [(ref, -c) for ref, c in
            _deterministic_cost_terms(inst, x, w, inst.delay_min)]
    for (i, j), expr in sq.items():
        coef = rho * inst.delay_dev[i, j] * inst.workload_impact[i, j]
        epi += [(ref, -coef * c) for ref, c in expr.terms]
    dual_budget_obj = m.add_var(Variable.cont("dub_obj"))
    epi.append((dual_budget_obj, -inst.uncertainty_budget_ddu))
    for i in range(ni):
        for j in range(nj):
            dual_cap = m.add_var(Variable.cont(f"dcap_obj_{i}_{j}"))
            m.add_constr([(dual_budget_obj, 1.0), (dual_cap, 1.0),
                          (x[i, j], -rho * inst.delay_dev[i, j])], ">=", 0.0,
                         f"dualfeas_obj_{i}_{j}")
            big_m = _dual_bound_obj(inst, cap, i, j)
            epi += [(ref, -c) for ref, c in
                    _erddu_keep_block(m, inst, keep, dual_cap, i, j, "obj", big_m)]
    # hardening cost in keep-form is (total over all levels) - sum h*keep
    m.add_constr(epi, ">=", total_cost_all, "cost_epi")

    for i in range(ni):
        lam = float(inst.demand[i])
        if lam <= 0:
            continue
        terms = [(x[i, j], inst.delay_min[i, j] / lam) for j in range(nj)]
        for j in range(nj):
            if (i, j) in sq:
                coef = inst.delay_dev[i, j] * inst.workload_impact[i, j] / lam
                terms += [(ref, coef * c) for ref, c in sq[i, j].terms]
        dual_budget = m.add_var(Variable.cont(f"dub_del_{i}"))
        terms.append((dual_budget, inst.uncertainty_budget_ddu))
        for j in range(nj):
            dual_cap = m.add_var(Variable.cont(f"dcap_del{i}_{j}"))
            m.add_constr([(dual_budget, 1.0), (dual_cap, 1.0),
                          (x[i, j], -inst.delay_dev[i, j] / lam)], ">=", 0.0,
                         f"dualfeas_del{i}_{j}")
            big_m = _dual_bound_delay(inst, cap, i, j)
            terms += _erddu_keep_block(m, inst, keep, dual_cap, i, j,
                                       f"del{i}", big_m)
        m.add_constr(terms, "<=", float(inst.delay_cap[i]), f"delay_{i}")
    return m


# --- scenario benchmark --------------------------------------------------------

def build_sddu(inst: Instance, scenarios: SdduScenarioSet) -> MilpModel:
    """Expected-cost benchmark with per-scenario recourse allocations.

    Scenario n realizes delay ``min + draw_n * dev * (1 - impact . harden +
    slope * x)``, so the hardening-allocation and square products are
    linearized per scenario (products with the first-stage binaries need no
    extra binaries; squares reuse the binary expansion).
    """
    m = MilpModel("sddu")
    t = _harden_vars(m, inst)
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    rho = inst.delay_penalty
    det_cap = _implied_alloc_cap(inst, worst_case=False)
    wcap = inst.unmet_upper()
    lam_cap = (inst.delay_cap * inst.demand.astype(float))[:, None]

    obj = [(t[i, j, r], inst.harden_cost[i, j, r])
           for i in range(ni) for j in range(nj) for r in range(nr)]

    for n in range(scenarios.count):
        xi = float(scenarios.draws[n])
        pn = float(scenarios.probabilities[n])
        cap = det_cap
        if xi > 0:  # scenario delay dominates min + xi*dev*slope*x
            quad = xi * inst.delay_dev * inst.workload_impact
            with np.errstate(divide="ignore", invalid="ignore"):
                by_quad = np.where(quad > 0,
                                   np.sqrt(lam_cap / np.where(quad > 0, quad, 1.0)),
                                   np.inf)
            cap = np.minimum(det_cap, np.floor(by_quad + 1e-9)).astype(np.int64)
        x = np.empty((ni, nj), dtype=object)
        for i in range(ni):
            for j in range(nj):
                x[i, j] = m.add_var(Variable.integer(f"x_s{n}_{i}_{j}", 0.0,
                                                     float(cap[i, j])))
        w = [m.add_var(Variable.integer(f"w_s{n}_{i}", 0.0, float(wcap[i])))
             for i in range(ni)]
        for j in range(nj):
            m.add_constr([(x[i, j], 1.0) for i in range(ni)], "<=",
                         float(inst.capacity[j]), f"cap_s{n}_{j}")
        for i in range(ni):
            m.add_constr([(w[i], 1.0)] + [(x[i, j], 1.0) for j in range(nj)],
                         "=", float(inst.demand[i]), f"supply_s{n}_{i}")

        sq = {}
        hx = {}
        for i in range(ni):
            for j in range(nj):
                dev = inst.delay_dev[i, j]
                if xi > 0 and cap[i, j] >= 1 and dev * inst.workload_impact[i, j] > 0:
                    bound = int(cap[i, j])
                    exp = binary_expand(m, x[i, j], bound, f"x_s{n}_{i}_{j}_bit")
                    sq[i, j] = linearize_square(m, x[i, j], exp, bound,
                                                f"x_s{n}_{i}_{j}_sq")
                for r in range(nr):
                    if xi > 0 and cap[i, j] >= 1 and dev * inst.harden_impact[i, j, r] > 0:
                        hx[i, j, r] = product_bin_int(
                            m, t[i, j, r], x[i, j], int(cap[i, j]),
                            f"tx_s{n}_{i}_{j}_{r}")

        def scenario_terms(i, per_demand):
            lam = float(inst.demand[i]) if per_demand else 1.0
            out = []
            for j in range(nj):
                dev = inst.delay_dev[i, j]
                out.append((x[i, j], (inst.delay_min[i, j] + xi * dev) / lam))
                for r in range(nr):
                    if (i, j, r) in hx:
                        out.append((hx[i, j, r],
                                    -xi * dev * inst.harden_impact[i, j, r] / lam))
                if (i, j) in sq:
                    coef = xi * dev * inst.workload_impact[i, j] / lam
                    out += [(ref, coef * c) for ref, c in sq[i, j].terms]
            return out

        for i in range(ni):
            if inst.demand[i] <= 0:
                continue
            m.add_constr(scenario_terms(i, per_demand=True), "<=",
                         float(inst.delay_cap[i]), f"delay_s{n}_{i}")
        for i in range(ni):
            obj += [(ref, pn * rho * c) for ref, c in scenario_terms(i, per_demand=False)]
            obj.append((w[i], pn * float(inst.unmet_penalty[i])))

    m.set_objective(obj)
    return m


# --- solution extraction and persistence ---------------------------------------

def _round_value(name, val, lo, hi):
    r = round(val)
    if abs(val - r) > INT_TOL:
        raise CorruptSolutionError(
            f"variable '{name}' value {val!r} violates integrality beyond {INT_TOL}")
    return int(min(max(r, lo), hi))


def extract_solution(inst: Instance, model: MilpModel, values: dict) -> Solution:
    """Typed solution from raw solver values, rounded and re-verified.

    Values are snapped to their declared integrality within ``1e-6`` and the
    solution invariants re-checked; any failure raises
    :class:`CorruptSolutionError` naming the offender.  The hardening payment
    is always recomputed from the plan and the instance costs.
    """
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels

    def val(name):
        return values[model.ref(name)]

    t = np.zeros((ni, nj, nr), dtype=np.int64)
    for i in range(ni):
        for j in range(nj):
            for r in range(nr):
                if model.has_var(f"t_{i}_{j}_{r}"):
                    t[i, j, r] = _round_value(f"t_{i}_{j}_{r}",
                                              val(f"t_{i}_{j}_{r}"), 0, 1)
                elif model.has_var(f"keep_{i}_{j}_{r}"):
                    t[i, j, r] = 1 - _round_value(f"keep_{i}_{j}_{r}",
                                                  val(f"keep_{i}_{j}_{r}"), 0, 1)

    xname = "x_{}_{}" if model.has_var("x_0_0") else "x_s0_{}_{}"
    wname = "w_{}" if model.has_var("w_0") else "w_s0_{}"
    x = np.zeros((ni, nj), dtype=np.int64)
    w = np.zeros(ni, dtype=np.int64)
    for i in range(ni):
        for j in range(nj):
            name = xname.format(i, j)
            x[i, j] = _round_value(name, val(name), 0, 10 ** 12)
        name = wname.format(i)
        w[i] = _round_value(name, val(name), 0, 10 ** 12)

    objective = model.objective.value(values)
    payment = float((inst.harden_cost * t).sum())
    sol = Solution(t=t, x=x, w=w, objective=float(objective),
                   hardening_payment=payment,
                   allocation_cost=float(objective) - payment,
                   formulation=model.name)
    problems = validate_solution(inst, sol)
    if problems:
        raise CorruptSolutionError("; ".join(problems))
    return sol


def validate_solution(inst: Instance, sol: Solution) -> list:
    """Invariant check; one message per violated row (never raises)."""
    out = []
    ni, nj = inst.num_areas, inst.num_nodes
    if sol.t.shape != (ni, nj, inst.num_levels) or sol.x.shape != (ni, nj) \
            or sol.w.shape != (ni,):
        return ["solution arrays do not match the instance dimensions"]
    for i in range(ni):
        for j in range(nj):
            if sol.t[i, j].sum() > 1:
                out.append(f"level_{i}_{j}: more than one hardening level chosen")
    if np.any(sol.t < 0) or np.any(sol.t > 1):
        out.append("t: entries outside {0,1}")
    if np.any(sol.x < 0) or np.any(sol.w < 0):
        out.append("x/w: negative entries")
    payment = float((inst.harden_cost * sol.t).sum())
    if payment > inst.budget + 1e-6:
        out.append(f"budget: payment {payment:g} exceeds budget {inst.budget:g}")
    loads = sol.x.sum(axis=0)
    for j in range(nj):
        if loads[j] > inst.capacity[j]:
            out.append(f"cap_{j}: load {loads[j]} exceeds capacity {inst.capacity[j]}")
    served = sol.x.sum(axis=1)
    for i in range(ni):
        if sol.w[i] + served[i] != inst.demand[i]:
            out.append(f"supply_{i}: w + allocations = {sol.w[i] + served[i]} "
                       f"differs from demand {inst.demand[i]}")
        if sol.w[i] > inst.unmet_fraction_cap[i] * inst.demand[i] + 1e-9:
            out.append(f"unmet_{i}: w = {sol.w[i]} exceeds cap "
                       f"{inst.unmet_fraction_cap[i] * inst.demand[i]:g}")
    return out


_SOL_HEADER = "edgehard-solution v1"


def dumps_solution(sol: Solution) -> str:
    ni, nj, nr = sol.t.shape
    lines = [_SOL_HEADER,
             f"formulation {sol.formulation}",
             f"num_areas {ni}", f"num_nodes {nj}", f"num_levels {nr}",
             f"objective {sol.objective!r}",
             f"hardening_payment {sol.hardening_payment!r}",
             f"allocation_cost {sol.allocation_cost!r}",
             "t " + " ".join(str(v) for v in sol.t.ravel()),
             "x " + " ".join(str(v) for v in sol.x.ravel()),
             "w " + " ".join(str(v) for v in sol.w.ravel())]
    return "\n".join(lines) + "\n"


def loads_solution(text: str) -> Solution:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _SOL_HEADER:
        raise CorruptSolutionError(f"line 1: expected header '{_SOL_HEADER}'")
    kv = {}
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        kv[key] = (ln, rest)
    try:
        ni = int(kv["num_areas"][1])
        nj = int(kv["num_nodes"][1])
        nr = int(kv["num_levels"][1])
        t = np.array([int(v) for v in kv["t"][1].split()]).reshape(ni, nj, nr)
        x = np.array([int(v) for v in kv["x"][1].split()]).reshape(ni, nj)
        w = np.array([int(v) for v in kv["w"][1].split()]).reshape(ni)
        return Solution(t=t, x=x, w=w,
                        objective=float(kv["objective"][1]),
                        hardening_payment=float(kv["hardening_payment"][1]),
                        allocation_cost=float(kv["allocation_cost"][1]),
                        formulation=kv.get("formulation", (0, ""))[1].strip())
    except KeyError as exc:
        raise CorruptSolutionError(f"missing field {exc}") from None
    except ValueError as exc:
        raise CorruptSolutionError(f"bad solution file: {exc}") from None


def save_solution(sol: Solution, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_solution(sol))


def load_solution(path) -> Solution:
    with open(path) as fh:
        return loads_solution(fh.read())
