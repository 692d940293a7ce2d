"""Command-line surface: generate, solve, verify, evaluate, and sweep.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 parse error,
4 infeasible model, 5 solver/backend error.  All randomness flows from
explicit ``--seed`` flags, so every command is reproducible.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import evaluate as ev
from . import formulations as fm
from . import instance as inst_mod
from . import oracle
from .milp import stats, write_lp, write_mps, write_name_map
from .solver import BackendUnavailableError, SolverConfig, SolverError, probe_backends, solve

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_INFEASIBLE = 4
EXIT_SOLVER = 5

_BUILDERS = {
    "det": fm.build_det,
    "nh": fm.build_nh,
    "ro-nh": fm.build_ro_nh,
    "rddu": fm.build_rddu,
    "erddu": fm.build_erddu,
}

VERIFY_TOL = 1e-6


def _gen_parser(sub):
    p = sub.add_parser("gen", help="generate a synthetic instance file")
    p.add_argument("--out", required=True, help="output instance path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--areas", type=int, default=10)
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--budget", type=float, default=100.0)
    p.add_argument("--gamma-diu", type=float, default=15.0,
                   help="deviation budget of the exogenous set")
    p.add_argument("--gamma-ddu", type=float, default=15.0,
                   help="deviation budget of the decision-dependent set")
    p.add_argument("--gamma1", type=float, default=0.1,
                   help="level-1 hardening impact")
    p.add_argument("--dgamma", type=float, default=0.4,
                   help="impact increment per hardening level")
    p.add_argument("--dh", type=float, default=0.2,
                   help="cost increment per hardening level")
    p.add_argument("--psi", type=float, default=1.0, help="hardening cost scale")
    p.add_argument("--u", type=float, default=0.1, help="workload delay slope")
    p.add_argument("--rho", type=float, default=0.1, help="delay penalty")
    p.add_argument("--delta", type=float, default=15.0, help="per-area delay cap")
    p.add_argument("--alpha", type=float, default=0.05, help="unmet-demand fraction cap")
    p.add_argument("--demand-range", type=int, nargs=2, default=(40, 60),
                   metavar=("LO", "HI"))
    p.add_argument("--penalty-range", type=float, nargs=2, default=(40.0, 50.0),
                   metavar=("LO", "HI"))
    p.add_argument("--hbase-range", type=float, nargs=2, default=(1.0, 1.05),
                   metavar=("LO", "HI"), help="level-1 hardening cost range")
    p.add_argument("--dmin-range", type=float, nargs=2, default=(2.0, 10.0),
                   metavar=("LO", "HI"), help="minimum link delay range (ms)")
    p.add_argument("--ddev-range", type=float, nargs=2, default=(4.0, 12.0),
                   metavar=("LO", "HI"), help="delay deviation range (ms)")
    p.add_argument("--capacity-pool", type=str, default="40,60,80,100",
                   help="comma-separated node capacity pool")


def _cmd_gen(args) -> int:
    try:
        pool = tuple(int(tok) for tok in args.capacity_pool.split(","))
        cfg = inst_mod.GenConfig(
            seed=args.seed, num_areas=args.areas, num_nodes=args.nodes,
            num_levels=args.levels, demand_range=tuple(args.demand_range),
            penalty_range=tuple(args.penalty_range),
            base_harden_cost_range=tuple(args.hbase_range),
            harden_cost_step=args.dh, impact_level1=args.gamma1,
            impact_step=args.dgamma, workload_impact_value=args.u,
            cost_scale=args.psi, capacity_pool=pool,
            delay_min_range=tuple(args.dmin_range),
            delay_dev_range=tuple(args.ddev_range),
            delay_penalty=args.rho, delay_cap=args.delta,
            unmet_fraction_cap=args.alpha, budget=args.budget,
            uncertainty_budget_diu=args.gamma_diu,
            uncertainty_budget_ddu=args.gamma_ddu)
        inst = inst_mod.generate(cfg)
    except (inst_mod.ConfigError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    inst_mod.save(inst, args.out)
    print(f"wrote {args.out}")
    print(f"areas={inst.num_areas} nodes={inst.num_nodes} levels={inst.num_levels}")
    print(f"total demand={int(inst.demand.sum())} total capacity={int(inst.capacity.sum())}")
    print(f"budget={inst.budget:g} deviation budgets: diu={inst.uncertainty_budget_diu:g} "
          f"ddu={inst.uncertainty_budget_ddu:g}")
    return EXIT_OK


def _solver_flags(p):
    p.add_argument("--backend", default="auto",
                   help="solver backend (default: EDGEHARD_BACKEND or scipy)")
    p.add_argument("--gap", type=float, default=1e-4, help="relative MIP gap")
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--solver-seed", type=int, default=0)


def _config(args) -> SolverConfig:
    return SolverConfig(backend=args.backend, mip_gap=args.gap,
                        time_limit=args.time_limit, threads=args.threads,
                        seed=args.solver_seed)


def _load_instance(path):
    try:
        return inst_mod.load(path)
    except (OSError, inst_mod.InstanceParseError) as exc:
        print(f"error: cannot read instance '{path}': {exc}", file=sys.stderr)
        return None


def _solve_parser(sub):
    p = sub.add_parser("solve", help="build and solve one formulation")
    p.add_argument("instance", help="instance file")
    p.add_argument("--formulation", required=True,
                   choices=sorted(_BUILDERS) + ["sddu"])
    p.add_argument("--out", help="solution output path")
    p.add_argument("--write-model", metavar="STEM",
                   help="also write STEM.mps, STEM.lp, and STEM.names")
    p.add_argument("--sddu-n", type=int, default=5,
                   help="scenario count of the stochastic benchmark")
    p.add_argument("--sddu-seed", type=int, default=0)
    _solver_flags(p)


def _cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    if inst is None:
        return EXIT_PARSE
    if args.formulation == "sddu":
        model = fm.build_sddu(inst, fm.sddu_scenarios(args.sddu_n, args.sddu_seed))
    else:
        model = _BUILDERS[args.formulation](inst)
    if args.write_model:
        with open(args.write_model + ".mps", "w") as fh:
            fh.write(write_mps(model))
        with open(args.write_model + ".lp", "w") as fh:
            fh.write(write_lp(model))
        with open(args.write_model + ".names", "w") as fh:
            fh.write(write_name_map(model))
    st = stats(model)
    try:
        res = solve(model, _config(args))
    except (BackendUnavailableError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"formulation={model.name} status={res.status} "
          f"rows={st.rows} cols={st.cols} binaries={st.binaries}")
    if res.status == "infeasible":
        print("model is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if res.status not in ("optimal", "feasible"):
        print(f"solver did not return a solution: {res.status} {res.message}",
              file=sys.stderr)
        return EXIT_SOLVER
    sol = fm.extract_solution(inst, model, res.values)
    gap = abs(res.objective - res.bound) / max(1.0, abs(res.objective))
    print(f"objective={sol.objective!r} payment={sol.hardening_payment!r} "
          f"gap={gap:.2e} runtime={res.runtime:.2f}s")
    if args.out:
        fm.save_solution(sol, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _verify_parser(sub):
    p = sub.add_parser("verify", help="re-check a solution with the oracles")
    p.add_argument("instance")
    p.add_argument("solution")


def _verify_worst_case(inst, sol):
    """(recomputed objective, per-area worst delays) for the solution's set."""
    if sol.formulation in ("det", "nh"):
        fixed = inst.replace(
            harden_impact=np.zeros_like(inst.harden_impact),
            workload_impact=np.zeros_like(inst.workload_impact),
            uncertainty_budget_ddu=0.0)
    elif sol.formulation == "ro_nh":
        fixed = inst.replace(
            harden_impact=np.zeros_like(inst.harden_impact),
            workload_impact=np.zeros_like(inst.workload_impact),
            uncertainty_budget_ddu=inst.uncertainty_budget_diu)
    else:
        fixed = inst
    cost = oracle.worst_case_cost(fixed, sol)
    delays = [oracle.worst_case_delay(fixed, sol, i) for i in range(inst.num_areas)]
    return cost, delays


def _cmd_verify(args) -> int:
    inst = _load_instance(args.instance)
    if inst is None:
        return EXIT_PARSE
    try:
        sol = fm.load_solution(args.solution)
    except (OSError, fm.CorruptSolutionError) as exc:
        print(f"error: cannot read solution '{args.solution}': {exc}", file=sys.stderr)
        return EXIT_PARSE

    failures = fm.validate_solution(inst, sol)
    cost, delays = _verify_worst_case(inst, sol)
    print(f"stored objective:     {sol.objective!r}")
    if sol.formulation == "sddu":
        print("recomputed objective: (skipped: expectation model, invariants only)")
    else:
        print(f"recomputed objective: {cost!r}")
        if abs(cost - sol.objective) > VERIFY_TOL * max(1.0, abs(cost)):
            failures.append(f"objective: stored {sol.objective!r} vs recomputed {cost!r}")
    for i, d in enumerate(delays):
        mark = "ok" if d <= inst.delay_cap[i] + VERIFY_TOL else "VIOLATED"
        print(f"area {i}: worst-case delay {d:.6f} (cap {inst.delay_cap[i]:g}) {mark}")
        if sol.formulation != "sddu" and d > inst.delay_cap[i] + VERIFY_TOL:
            failures.append(f"delay_{i}: worst case {d!r} exceeds cap {inst.delay_cap[i]!r}")
    if failures:
        print("FAIL")
        for item in failures:
            print(f"  {item}")
        return EXIT_VERIFY_FAIL
    print("PASS")
    return EXIT_OK


def _evaluate_parser(sub):
    p = sub.add_parser("evaluate", help="out-of-sample scheme comparison")
    p.add_argument("instance")
    p.add_argument("--schemes", default="nh,rand,sddu,rddu",
                   help="comma-separated subset of nh,rand,sddu,rddu")
    p.add_argument("-N", "--scenarios", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sddu-train", type=int, default=5)
    p.add_argument("--out-prefix", help="write PREFIX_summary.csv and PREFIX_scenarios.csv")
    _solver_flags(p)


def _cmd_evaluate(args) -> int:
    inst = _load_instance(args.instance)
    if inst is None:
        return EXIT_PARSE
    schemes = tuple(tok.strip() for tok in args.schemes.split(",") if tok.strip())
    for s in schemes:
        if s not in ev.SCHEMES:
            print(f"error: unknown scheme '{s}'", file=sys.stderr)
            return EXIT_USAGE
    try:
        report = ev.compare_schemes(inst, args.scenarios, args.seed, schemes,
                                    _config(args), sddu_train=args.sddu_train)
    except (BackendUnavailableError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{'scheme':<8}{'mean':>12}{'std':>12}{'p5':>12}{'p95':>12}{'payment':>12}")
    for name, oc in report.outcomes.items():
        if oc.status != "ok":
            print(f"{name:<8}  {oc.status}: {oc.message}")
            continue
        print(f"{name:<8}{oc.mean:>12.4f}{oc.std:>12.4f}{oc.p5:>12.4f}"
              f"{oc.p95:>12.4f}{oc.payment:>12.4f}")
    if args.out_prefix:
        with open(args.out_prefix + "_summary.csv", "w") as fh:
            fh.write(report.to_summary_csv())
        with open(args.out_prefix + "_scenarios.csv", "w") as fh:
            fh.write(report.to_scenario_csv())
        print(f"wrote {args.out_prefix}_summary.csv and {args.out_prefix}_scenarios.csv")
    return EXIT_OK


def _sweep_parser(sub):
    p = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    p.add_argument("instance")
    p.add_argument("--param", required=True, choices=ev.SWEEP_PARAMS)
    p.add_argument("--grid", required=True,
                   help="comma-separated grid values")
    p.add_argument("--formulations", default="rddu,erddu",
                   help="comma-separated subset of det,nh,ro_nh,rddu,erddu")
    p.add_argument("--out-prefix", help="write PREFIX.csv and PREFIX_long.csv")
    _solver_flags(p)


def _cmd_sweep(args) -> int:
    inst = _load_instance(args.instance)
    if inst is None:
        return EXIT_PARSE
    try:
        grid = [float(tok) if args.param not in ("I", "J") else int(tok)
                for tok in args.grid.split(",")]
    except ValueError as exc:
        print(f"error: bad grid: {exc}", file=sys.stderr)
        return EXIT_USAGE
    forms = tuple(tok.strip() for tok in args.formulations.split(",") if tok.strip())
    try:
        result = ev.sweep(inst, args.param, grid, forms, _config(args))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BackendUnavailableError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{'value':>10}{'form':>8}{'status':>10}{'cost':>14}{'payment':>12}"
          f"{'runtime':>10}{'rows':>8}")
    for row in result.rows:
        print(f"{row['value']:>10}{row['formulation']:>8}{row['status']:>10}"
              f"{row['total_cost']:>14.4f}{row['payment']:>12.4f}"
              f"{row['runtime']:>10.2f}{row['rows']:>8}")
    if args.out_prefix:
        with open(args.out_prefix + ".csv", "w") as fh:
            fh.write(result.to_csv())
        with open(args.out_prefix + "_long.csv", "w") as fh:
            fh.write(result.to_long_csv())
        print(f"wrote {args.out_prefix}.csv and {args.out_prefix}_long.csv")
    return EXIT_OK


def _backends_parser(sub):
    sub.add_parser("backends", help="list usable solver backends")


def _cmd_backends(_args) -> int:
    for name in probe_backends():
        print(name)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="edgehard",
        description="Robust planning of edge-network link hardening under "
                    "decision-dependent delay uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)
    _gen_parser(sub)
    _solve_parser(sub)
    _verify_parser(sub)
    _evaluate_parser(sub)
    _sweep_parser(sub)
    _backends_parser(sub)
    args = parser.parse_args(argv)
    handler = {"gen": _cmd_gen, "solve": _cmd_solve, "verify": _cmd_verify,
               "evaluate": _cmd_evaluate, "sweep": _cmd_sweep,
               "backends": _cmd_backends}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
