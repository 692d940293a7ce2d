"""Uniform solve contract over interchangeable MILP backends.

The default backend drives HiGHS in-process through ``scipy.optimize.milp``.
External backends write the model as MPS, invoke a solver executable, and
parse its solution file; they register themselves under a name and are
skipped by :func:`probe_backends` when the executable is missing.  Every
result is re-checked against the model rows before it is returned: a solution
violating any row by more than the feasibility tolerance is downgraded to an
error instead of being trusted.
"""

from __future__ import annotations

import logging
import math
import os
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, replace

import numpy as np

from .milp import BINARY, INTEGER, MilpModel, Variable, write_mps

__all__ = [
    "SolverConfig", "SolverResult", "SolverError", "BackendUnavailableError",
    "solve", "probe_backends", "default_backend", "BACKENDS",
]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
BACKEND_ENV = "EDGEHARD_BACKEND"


class SolverError(RuntimeError):
    pass


class BackendUnavailableError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "auto"
    mip_gap: float = 1e-4
    time_limit: float = 600.0
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.mip_gap < 0:
            raise ValueError("mip_gap must be nonnegative")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")


@dataclass(frozen=True)
class SolverResult:
    status: str          # optimal | feasible | infeasible | unbounded | timeout | error
    objective: float
    bound: float
    values: dict         # VarRef -> value; present iff status in (optimal, feasible)
    runtime: float
    message: str = ""


def default_backend() -> str:
    return os.environ.get(BACKEND_ENV, "scipy")


# --- in-process backend ------------------------------------------------------

def _solve_scipy(model: MilpModel, config: SolverConfig) -> SolverResult:
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import csr_array

    n = len(model.variables)
    c = np.zeros(n)
    for ref, coef in model.objective.terms:
        c[ref.index] = coef
    integrality = np.array(
        [1 if v.kind in (INTEGER, BINARY) else 0 for v in model.variables])
    lb = np.array([v.lower for v in model.variables])
    ub = np.array([v.upper for v in model.variables])

    constraints = []
    if model.constraints:
        data, indices, indptr = [], [], [0]
        row_lb, row_ub = [], []
        for con in model.constraints:
            for ref, coef in con.expr.terms:
                data.append(coef)
                indices.append(ref.index)
            indptr.append(len(data))
            if con.sense == "<=":
                row_lb.append(-np.inf)
                row_ub.append(con.rhs)
            elif con.sense == ">=":
                row_lb.append(con.rhs)
                row_ub.append(np.inf)
            else:
                row_lb.append(con.rhs)
                row_ub.append(con.rhs)
        mat = csr_array((data, indices, indptr), shape=(len(model.constraints), n))
        constraints = [LinearConstraint(mat, row_lb, row_ub)]

    start = time.perf_counter()
    res = milp(c=c, constraints=constraints, integrality=integrality,
               bounds=Bounds(lb, ub),
               options={"mip_rel_gap": config.mip_gap,
                        "time_limit": config.time_limit,
                        "presolve": True})
    runtime = time.perf_counter() - start

    offset = model.objective.constant
    if res.status == 0:
        status = "optimal"
    elif res.status == 1:
        status = "timeout" if res.x is not None else "timeout"
    elif res.status == 2:
        status = "infeasible"
    elif res.status == 3:
        status = "unbounded"
    else:
        status = "error"
    if res.x is None and status == "timeout":
        return SolverResult("timeout", math.nan, math.nan, None, runtime, res.message)
    if res.x is None:
        return SolverResult(status, math.nan, math.nan, None, runtime, res.message)

    values = {ref: float(res.x[ref.index])
              for ref in (model.ref(v.name) for v in model.variables)}
    bound = getattr(res, "mip_dual_bound", None)
    bound = res.fun if bound is None else bound
    return SolverResult(status, float(res.fun) + offset, float(bound) + offset,
                        values, runtime, res.message or "")


# --- external subprocess backends --------------------------------------------

def _run_external(model, config, cmd_builder, parser, exe_name):
    exe = shutil.which(exe_name)
    if exe is None:
        raise BackendUnavailableError(
            f"'{exe_name}' executable not found on PATH; install it or select "
            f"another backend via {BACKEND_ENV} or --backend")
    with tempfile.TemporaryDirectory(prefix="edgehard_") as tmp:
        mps_path = os.path.join(tmp, "model.mps")
        sol_path = os.path.join(tmp, "model.sol")
        with open(mps_path, "w") as fh:
            fh.write(write_mps(model))
        cmd = cmd_builder(exe, mps_path, sol_path, config, tmp)
        start = time.perf_counter()
        proc = subprocess.run(cmd, capture_output=True, text=True,
                              timeout=config.time_limit + 60)
        runtime = time.perf_counter() - start
        if proc.returncode != 0 and not os.path.exists(sol_path):
            raise SolverError(
                f"{exe_name} exited with code {proc.returncode}: "
                f"{proc.stderr.strip() or proc.stdout.strip()}")
        with open(sol_path) as fh:
            text = fh.read()
    status, objective, name_vals = parser(text)
    return _finish_external(model, status, objective, name_vals, runtime)


def _finish_external(model, status, objective, name_vals, runtime):
    if status in ("infeasible", "unbounded", "error"):
        return SolverResult(status, math.nan, math.nan, None, runtime, "")
    from .milp import mps_name_map
    back = {new: old for old, new in mps_name_map(model).items()}
    values = {model.ref(v.name): 0.0 for v in model.variables}
    for name, val in name_vals.items():
        orig = back.get(name, name)
        if model.has_var(orig):
            values[model.ref(orig)] = val
    if objective is None:
        objective = model.objective.value(values)
    return SolverResult(status, float(objective), float(objective),
                        values, runtime, "")


def _highs_cmd(exe, mps_path, sol_path, config, tmp):
    opt_path = os.path.join(tmp, "highs.opt")
    with open(opt_path, "w") as fh:
        fh.write(f"mip_rel_gap = {config.mip_gap}\n"
                 f"time_limit = {config.time_limit}\n"
                 f"threads = {config.threads}\n"
                 f"random_seed = {config.seed}\n")
    return [exe, "--options_file", opt_path, "--solution_file", sol_path, mps_path]


def parse_highs_solution(text: str):
    """Parse a HiGHS ``--solution_file`` (pretty style): model status line,
    objective line, then a Columns block of 'name value' pairs."""
    status_map = {"Optimal": "optimal", "Infeasible": "infeasible",
                  "Unbounded": "unbounded", "Time limit reached": "timeout"}
    status, objective = "error", None
    name_vals = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        if line.startswith("Model status"):
            raw = line.split(":", 1)[1].strip() if ":" in line else lines[i + 1].strip()
            status = status_map.get(raw, "error")
        elif line.startswith("Objective"):
            objective = float(line.split()[-1])
        elif line.startswith("# Columns") or line == "Columns":
            count = int(line.split()[-1]) if line.startswith("#") else None
            j = i + 1
            while j < len(lines):
                parts = lines[j].split()
                if len(parts) != 2:
                    break
                try:
                    name_vals[parts[0]] = float(parts[1])
                except ValueError:
                    break
                j += 1
                if count is not None and len(name_vals) >= count:
                    break
            i = j
            continue
        i += 1
    if status == "error" and name_vals:
        status = "feasible"
    return status, objective, name_vals


def _cbc_cmd(exe, mps_path, sol_path, config, tmp):
    return [exe, mps_path, "-ratioGap", str(config.mip_gap),
            "-seconds", str(config.time_limit), "-threads", str(config.threads),
            "-randomSeed", str(config.seed), "-solve", "-solution", sol_path]


def parse_cbc_solution(text: str):
    """Parse a CBC ``solution`` file: a status/objective header line, then
    'index name value reduced-cost' rows."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return "error", None, {}
    head = lines[0]
    if "Infeasible" in head:
        return "infeasible", None, {}
    if "Unbounded" in head:
        return "unbounded", None, {}
    status = "optimal" if head.startswith("Optimal") else "feasible"
    objective = None
    if "objective value" in head:
        objective = float(head.split("objective value")[-1].split()[0])
    name_vals = {}
    for line in lines[1:]:
        parts = line.split()
        if len(parts) >= 3:
            name_vals[parts[1]] = float(parts[2])
    return status, objective, name_vals


def _solve_highs_cli(model, config):
    return _run_external(model, config, _highs_cmd, parse_highs_solution, "highs")


def _solve_cbc(model, config):
    return _run_external(model, config, _cbc_cmd, parse_cbc_solution, "cbc")


def _scipy_available():
    return True, ""


def _exe_available(name):
    def check():
        if shutil.which(name) is None:
            return False, f"'{name}' executable not on PATH"
        return True, ""
    return check


# name -> (availability check, solve function)
BACKENDS = {
    "scipy": (_scipy_available, _solve_scipy),
    "highs-cli": (_exe_available("highs"), _solve_highs_cli),
    "cbc": (_exe_available("cbc"), _solve_cbc),
}


# --- public API ---------------------------------------------------------------

def solve(model: MilpModel, config: SolverConfig = None) -> SolverResult:
    """Solve the model and return a verified result.

    Raises :class:`BackendUnavailableError` when the requested backend is
    missing, and :class:`SolverError` on solver crashes.  Feasible values are
    re-checked against every row; a violation beyond the tolerance downgrades
    the status to ``error`` naming the offending row.
    """
    config = config or SolverConfig()
    if not model.variables:
        raise SolverError("cannot solve an empty model")
    name = default_backend() if config.backend == "auto" else config.backend
    if name not in BACKENDS:
        raise BackendUnavailableError(
            f"unknown backend '{name}'; registered: {sorted(BACKENDS)}")
    available, reason = BACKENDS[name][0]()
    if not available:
        raise BackendUnavailableError(f"backend '{name}' unavailable: {reason}")
    result = BACKENDS[name][1](model, config)
    return _verify(model, config, result)


def _verify(model, config, result):
    if result.values is None:
        return result
    worst_row, worst = None, 0.0
    for con in model.constraints:
        lhs = con.expr.value(result.values)
        scale = max(1.0, abs(con.rhs))
        if con.sense == "<=":
            viol = (lhs - con.rhs) / scale
        elif con.sense == ">=":
            viol = (con.rhs - lhs) / scale
        else:
            viol = abs(lhs - con.rhs) / scale
        if viol > worst:
            worst_row, worst = con.name, viol
    for ref, val in result.values.items():
        var = model.var(ref)
        viol = max(var.lower - val, val - var.upper) / max(1.0, abs(val))
        if viol > worst:
            worst_row, worst = f"bound({var.name})", viol
    if worst > FEAS_TOL:
        return replace(result, status="error",
                       message=f"solution violates '{worst_row}' by {worst:.3e}")
    if result.status == "optimal":
        gap = abs(result.objective - result.bound) / max(1.0, abs(result.objective))
        if gap > config.mip_gap + 1e-9:
            return replace(result, status="feasible",
                           message=f"reported optimal but gap {gap:.3e} exceeds "
                                   f"{config.mip_gap:g}")
    return result


def _smoke_model() -> MilpModel:
    m = MilpModel("smoke")
    x = m.add_var(Variable.integer("x", 0, 10))
    m.add_constr([(x, 1.0)], ">=", 1.0, "floor")
    m.set_objective([(x, 1.0)])
    return m


def probe_backends() -> list:
    """Names of registered backends that pass a one-variable smoke solve."""
    good = []
    for name, (check, _) in BACKENDS.items():
        available, reason = check()
        if not available:
            log.info("backend '%s' excluded: %s", name, reason)
            continue
        try:
            res = solve(_smoke_model(), SolverConfig(backend=name, mip_gap=0.0))
        except Exception as exc:  # noqa: BLE001 - any failure excludes the backend
            log.info("backend '%s' excluded: smoke solve failed (%s)", name, exc)
            continue
        if res.status == "optimal" and abs(res.objective - 1.0) <= 1e-6:
            good.append(name)
        else:
            log.info("backend '%s' excluded: smoke solve returned %s", name, res.status)
    return good
