"""Out-of-sample evaluation and sensitivity sweeps.

Evaluation protocol: each scheme fixes a hardening plan, deviation scenarios
are sampled inside that plan's deviation set, the allocation is re-optimized
per scenario against the realized (allocation-dependent) delays, and the
actual costs (payment + realized delay cost + unmet penalties) are compared
across schemes.  Scenario draws use common random numbers: one matrix of
uniforms per scenario index is shared by all schemes before the plan-specific
caps and the budget rescaling are applied.

Sampling rule: deviations are drawn uniformly below their caps and rescaled
onto the budget simplex (``g *= budget / sum(g)``) whenever the draw exceeds
the deviation budget, preserving the relative deviation profile.

Sweeps re-solve a formulation over a grid of one parameter and tabulate cost,
payment, runtime, and model size per grid point.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import formulations as fm
from .instance import Instance, validate as validate_instance
from .linearize import binary_expand, linearize_square
from .milp import MilpModel, Variable
from .solver import SolverConfig, SolverError, solve

__all__ = [
    "Scenario", "SchemeOutcome", "EvaluationReport", "SweepResult",
    "sample_scenarios", "actual_allocation", "actual_cost", "rand_hardening",
    "compare_schemes", "sweep", "SWEEP_PARAMS", "derive_instance",
]

log = logging.getLogger(__name__)

SCHEMES = ("nh", "rand", "sddu", "rddu")


@dataclass(frozen=True)
class Scenario:
    """One realized matrix of deviation fractions."""

    g: np.ndarray   # (I, J) in [0, cap(plan)] with sum <= deviation budget

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        g.flags.writeable = False
        object.__setattr__(self, "g", g)


def _check_scenario(inst, plan, g):
    ub = inst.deviation_upper(plan)
    if np.any(g < -1e-12) or np.any(g > ub + 1e-9):
        raise ValueError("scenario deviation outside the plan's caps")
    if g.sum() > inst.uncertainty_budget_ddu + 1e-9:
        raise ValueError("scenario deviation exceeds the budget")


def _base_draws(inst, count, seed):
    rng = np.random.default_rng(seed)
    return rng.random((count, inst.num_areas, inst.num_nodes))


def _scenarios_from_base(inst, plan, base):
    ub = inst.deviation_upper(plan)
    out = []
    for u in base:
        g = u * ub
        total = g.sum()
        if total > inst.uncertainty_budget_ddu and total > 0:
            g = g * (inst.uncertainty_budget_ddu / total)
        _check_scenario(inst, plan, g)
        out.append(Scenario(g))
    return out


def sample_scenarios(inst: Instance, plan, count: int, seed: int = 0):
    """Deterministic scenario sample under a fixed hardening plan."""
    if count <= 0:
        raise ValueError("scenario count must be positive")
    return _scenarios_from_base(inst, plan, _base_draws(inst, count, seed))


def _allocation_model(inst, plan, scenario):
    """Re-optimization ILP for one realized scenario.

    The realized delay is ``min + dev * (g + slope * x)``; with a nonzero
    slope the square term is linearized exactly like the planning models.
    """
    m = MilpModel("actual")
    x, w, cap = fm._alloc_vars(m, inst, fm._implied_alloc_cap(inst, worst_case=True))
    sq = fm._square_exprs(m, inst, x, cap)
    rho = inst.delay_penalty
    realized = inst.delay_min + inst.delay_dev * scenario.g

    obj = fm._deterministic_cost_terms(inst, x, w, realized)
    for (i, j), expr in sq.items():
        coef = rho * inst.delay_dev[i, j] * inst.workload_impact[i, j]
        obj += [(ref, coef * c) for ref, c in expr.terms]
    m.set_objective(obj)

    for i in range(inst.num_areas):
        lam = float(inst.demand[i])
        if lam <= 0:
            continue
        terms = [(x[i, j], realized[i, j] / lam) for j in range(inst.num_nodes)]
        for j in range(inst.num_nodes):
            if (i, j) in sq:
                coef = inst.delay_dev[i, j] * inst.workload_impact[i, j] / lam
                terms += [(ref, coef * c) for ref, c in sq[i, j].terms]
        m.add_constr(terms, "<=", float(inst.delay_cap[i]), f"delay_{i}")
    return m


def actual_allocation(inst: Instance, plan, scenario: Scenario,
                      config: SolverConfig = None):
    """Re-optimized allocation under one realized scenario.

    Returns ``(x, w, cost, feasible)``.  When the realized delays make the
    caps unattainable the evaluation stays total: everything is dropped,
    the cost records payment plus full unmet penalties, and ``feasible`` is
    False.
    """
    model = _allocation_model(inst, plan, scenario)
    res = solve(model, config or SolverConfig())
    if res.status in ("optimal", "feasible"):
        sol = _extract_alloc(inst, model, res.values)
        x, w = sol
        cost = actual_cost(inst, plan, x, w, scenario)
        return x, w, cost, True
    if res.status == "infeasible":
        x = np.zeros((inst.num_areas, inst.num_nodes), dtype=np.int64)
        w = inst.demand.copy()
        return x, w, actual_cost(inst, plan, x, w, scenario), False
    raise SolverError(f"scenario re-optimization failed: status {res.status}")


def _extract_alloc(inst, model, values):
    x = np.zeros((inst.num_areas, inst.num_nodes), dtype=np.int64)
    w = np.zeros(inst.num_areas, dtype=np.int64)
    for i in range(inst.num_areas):
        for j in range(inst.num_nodes):
            x[i, j] = fm._round_value(f"x_{i}_{j}", values[model.ref(f"x_{i}_{j}")],
                                      0, 10 ** 12)
        w[i] = fm._round_value(f"w_{i}", values[model.ref(f"w_{i}")], 0, 10 ** 12)
    return x, w


def actual_cost(inst: Instance, plan, x, w, scenario: Scenario) -> float:
    """Realized total cost: payment + delay cost at the realized delays
    (evaluated at the chosen allocation) + unmet penalties."""
    plan = np.asarray(plan)
    x = np.asarray(x, dtype=float)
    realized = inst.delay_min + inst.delay_dev * (
        scenario.g + inst.workload_impact * x)
    payment = float((inst.harden_cost * plan).sum())
    return payment + inst.delay_penalty * float((realized * x).sum()) \
        + float((inst.unmet_penalty * np.asarray(w)).sum())


def rand_hardening(inst: Instance, seed: int = 0) -> np.ndarray:
    """Benchmark plan: pick affordable (link, level) choices uniformly at
    random until none fits the remaining budget; at most one level per link."""
    rng = np.random.default_rng(seed)
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    plan = np.zeros((ni, nj, nr), dtype=np.int64)
    remaining = float(inst.budget)
    open_links = {(i, j) for i in range(ni) for j in range(nj)}
    while True:
        affordable = [(i, j, r) for (i, j) in sorted(open_links)
                      for r in range(nr)
                      if inst.harden_cost[i, j, r] <= remaining]
        if not affordable:
            return plan
        i, j, r = affordable[rng.integers(len(affordable))]
        plan[i, j, r] = 1
        remaining -= float(inst.harden_cost[i, j, r])
        open_links.discard((i, j))


@dataclass
class SchemeOutcome:
    scheme: str
    status: str                 # ok | solver-error
    plan: np.ndarray = None
    payment: float = float("nan")
    costs: np.ndarray = None    # per-scenario actual costs
    infeasible: np.ndarray = None
    mean: float = float("nan")
    std: float = float("nan")
    p5: float = float("nan")
    p95: float = float("nan")
    message: str = ""


@dataclass
class EvaluationReport:
    count: int
    seed: int
    outcomes: dict              # scheme -> SchemeOutcome

    def to_summary_csv(self) -> str:
        lines = ["scheme,n_scenarios,seed,mean,std,p5,p95,payment,n_infeasible,status"]
        for name, oc in self.outcomes.items():
            n_inf = int(oc.infeasible.sum()) if oc.infeasible is not None else 0
            lines.append(f"{name},{self.count},{self.seed},{oc.mean!r},{oc.std!r},"
                         f"{oc.p5!r},{oc.p95!r},{oc.payment!r},{n_inf},{oc.status}")
        return "\n".join(lines) + "\n"

    def to_scenario_csv(self) -> str:
        lines = ["scheme,scenario,cost,infeasible"]
        for name, oc in self.outcomes.items():
            if oc.costs is None:
                continue
            for k, cost in enumerate(oc.costs):
                lines.append(f"{name},{k},{cost!r},{int(oc.infeasible[k])}")
        return "\n".join(lines) + "\n"


def _stats(costs):
    return (float(np.mean(costs)), float(np.std(costs)),
            float(np.percentile(costs, 5)), float(np.percentile(costs, 95)))


def _plan_for_scheme(inst, scheme, seed, config, sddu_train, sddu_seed):
    zeros = np.zeros((inst.num_areas, inst.num_nodes, inst.num_levels),
                     dtype=np.int64)
    if scheme == "nh":
        return zeros
    if scheme == "rand":
        return rand_hardening(inst, seed)
    if scheme == "rddu":
        model = fm.build_rddu(inst)
    elif scheme == "sddu":
        model = fm.build_sddu(inst, fm.sddu_scenarios(sddu_train, sddu_seed))
    else:
        raise ValueError(f"unknown scheme '{scheme}'")
    res = solve(model, config)
    if res.status not in ("optimal", "feasible"):
        raise SolverError(f"{scheme} planning solve returned {res.status}")
    return fm.extract_solution(inst, model, res.values).t


def compare_schemes(inst: Instance, count: int, seed: int,
                    schemes=SCHEMES, config: SolverConfig = None,
                    sddu_train: int = 5, sddu_seed: int = None) -> EvaluationReport:
    """Actual-cost comparison of hardening schemes over shared scenarios.

    A failing planning solve flags its scheme as ``solver-error`` and leaves
    the remaining schemes untouched.
    """
    config = config or SolverConfig()
    base = _base_draws(inst, count, seed)
    outcomes = {}
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme '{scheme}'")
        try:
            plan = _plan_for_scheme(inst, scheme, seed, config,
                                    sddu_train, seed if sddu_seed is None else sddu_seed)
        except SolverError as exc:
            log.warning("scheme %s failed: %s", scheme, exc)
            outcomes[scheme] = SchemeOutcome(scheme, "solver-error", message=str(exc))
            continue
        costs = np.zeros(count)
        infeasible = np.zeros(count, dtype=bool)
        for k, scenario in enumerate(_scenarios_from_base(inst, plan, base)):
            _, _, cost, ok = actual_allocation(inst, plan, scenario, config)
            costs[k] = cost
            infeasible[k] = not ok
        mean, std, p5, p95 = _stats(costs)
        outcomes[scheme] = SchemeOutcome(
            scheme, "ok", plan=plan,
            payment=float((inst.harden_cost * plan).sum()),
            costs=costs, infeasible=infeasible,
            mean=mean, std=std, p5=p5, p95=p95)
    return EvaluationReport(count=count, seed=seed, outcomes=outcomes)


# --- parameter sweeps ------------------------------------------------------------

SWEEP_PARAMS = ("B", "Psi", "Gamma2", "rho", "dgamma", "gamma1", "u", "Delta",
                "I", "J")

_BUILDERS = {"det": fm.build_det, "nh": fm.build_nh, "ro_nh": fm.build_ro_nh,
             "rddu": fm.build_rddu, "erddu": fm.build_erddu}


def slice_instance(inst: Instance, num_areas: int = None,
                   num_nodes: int = None) -> Instance:
    """Leading sub-instance with the first areas/nodes of a larger one."""
    ni = inst.num_areas if num_areas is None else int(num_areas)
    nj = inst.num_nodes if num_nodes is None else int(num_nodes)
    if not (1 <= ni <= inst.num_areas and 1 <= nj <= inst.num_nodes):
        raise ValueError("slice sizes must fit inside the instance")
    return Instance(
        num_areas=ni, num_nodes=nj, num_levels=inst.num_levels,
        demand=inst.demand[:ni], capacity=inst.capacity[:nj],
        unmet_penalty=inst.unmet_penalty[:ni],
        delay_penalty=inst.delay_penalty,
        unmet_fraction_cap=inst.unmet_fraction_cap[:ni],
        delay_cap=inst.delay_cap[:ni], budget=inst.budget,
        harden_cost=inst.harden_cost[:ni, :nj],
        harden_impact=inst.harden_impact[:ni, :nj],
        workload_impact=inst.workload_impact[:ni, :nj],
        delay_min=inst.delay_min[:ni, :nj], delay_dev=inst.delay_dev[:ni, :nj],
        uncertainty_budget_diu=inst.uncertainty_budget_diu,
        uncertainty_budget_ddu=inst.uncertainty_budget_ddu)


def derive_instance(inst: Instance, param: str, value) -> Instance:
    """Instance with one swept parameter replaced.

    ``Psi`` rescales the current hardening costs multiplicatively;
    ``dgamma``/``gamma1`` rebuild the impact ladder from its level-1 value;
    ``I``/``J`` take the leading sub-instance.
    """
    if param == "B":
        return inst.replace(budget=float(value))
    if param == "Gamma2":
        return inst.replace(uncertainty_budget_ddu=float(value))
    if param == "rho":
        return inst.replace(delay_penalty=float(value))
    if param == "Delta":
        return inst.replace(delay_cap=np.full(inst.num_areas, float(value)))
    if param == "u":
        return inst.replace(workload_impact=np.full(
            (inst.num_areas, inst.num_nodes), float(value)))
    if param == "Psi":
        return inst.replace(harden_cost=inst.harden_cost * float(value))
    if param in ("dgamma", "gamma1"):
        levels = np.arange(inst.num_levels, dtype=float)
        if param == "dgamma":
            g1 = inst.harden_impact[:, :, 0][:, :, None]
            ladder = g1 + levels[None, None, :] * float(value)
        else:
            step = (inst.harden_impact[0, 0, 1] - inst.harden_impact[0, 0, 0]
                    if inst.num_levels > 1 else 0.0)
            ladder = np.broadcast_to(float(value) + levels * step,
                                     inst.harden_impact.shape)
        return inst.replace(harden_impact=np.array(ladder))
    if param == "I":
        return slice_instance(inst, num_areas=int(value))
    if param == "J":
        return slice_instance(inst, num_nodes=int(value))
    raise ValueError(f"unknown sweep parameter '{param}'; valid: {SWEEP_PARAMS}")


@dataclass
class SweepResult:
    param: str
    rows: list = field(default_factory=list)  # dicts, one per (value, formulation)

    def column(self, formulation, key):
        return [row[key] for row in self.rows if row["formulation"] == formulation]

    def to_csv(self) -> str:
        header = ["param", "value", "formulation", "status", "total_cost",
                  "payment", "runtime", "rows", "cols", "binaries", "nonzeros"]
        lines = [",".join(header)]
        for row in self.rows:
            lines.append(",".join(repr(row[k]) if isinstance(row[k], float)
                                  else str(row[k]) for k in header))
        return "\n".join(lines) + "\n"

    def to_long_csv(self) -> str:
        metrics = ("total_cost", "payment", "runtime", "rows")
        lines = ["param,value,formulation,metric,metric_value"]
        for row in self.rows:
            for metric in metrics:
                lines.append(f"{row['param']},{row['value']},{row['formulation']},"
                             f"{metric},{row[metric]!r}")
        return "\n".join(lines) + "\n"


def sweep(inst: Instance, param: str, grid, formulations=("rddu", "erddu"),
          config: SolverConfig = None) -> SweepResult:
    """Solve selected formulations over a one-parameter grid."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter '{param}'; valid: {SWEEP_PARAMS}")
    for name in formulations:
        if name not in _BUILDERS:
            raise ValueError(f"unknown formulation '{name}'")
    config = config or SolverConfig()
    result = SweepResult(param=param)
    for value in grid:
        derived = derive_instance(inst, param, value)
        for name in formulations:
            model = _BUILDERS[name](derived)
            st = model.stats()
            start = time.perf_counter()
            res = solve(model, config)
            runtime = time.perf_counter() - start
            payment = float("nan")
            if res.status in ("optimal", "feasible"):
                payment = fm.extract_solution(derived, model, res.values).hardening_payment
            result.rows.append({
                "param": param, "value": value, "formulation": name,
                "status": res.status, "total_cost": res.objective,
                "payment": payment, "runtime": runtime,
                "rows": st.rows, "cols": st.cols, "binaries": st.binaries,
                "nonzeros": st.nonzeros})
    return result
