"""Problem data model, synthetic instance generation, and persistence.

An :class:`Instance` bundles every parameter of the link-hardening planning
problem: per-area demands, per-node capacities, penalty rates, delay bounds,
hardening costs/impacts, and the two uncertainty budgets.  Instances are
immutable after construction and safe to share across threads.

The synthetic generator mirrors the published simulation setting: integer
demands drawn uniformly from a range, unmet-demand penalties from a uniform
interval, level-1 hardening costs from a narrow uniform band with a constant
increment per extra level, and a constant impact-factor ladder shared by all
links.  Capacities come from a small discrete pool and delay bounds from
configurable uniform ranges, since the original traces are not
redistributable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields, replace as _dc_replace

import numpy as np

__all__ = [
    "Instance",
    "GenConfig",
    "ConfigError",
    "InstanceParseError",
    "generate",
    "validate",
    "save",
    "load",
]


class ConfigError(ValueError):
    """Raised when a generator configuration violates its invariants."""


class InstanceParseError(ValueError):
    """Raised when an instance file cannot be parsed."""


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Instance:
    """All parameters of one hardening/allocation planning problem.

    Shapes: per-area arrays have length ``num_areas`` (I), per-node arrays
    length ``num_nodes`` (J), per-link arrays shape (I, J), and per-level
    arrays shape (I, J, num_levels).  Demands and capacities are integral
    resource units; delays are in milliseconds.
    """

    num_areas: int
    num_nodes: int
    num_levels: int
    demand: np.ndarray              # (I,) int, units requested per area
    capacity: np.ndarray            # (J,) int, units available per node
    unmet_penalty: np.ndarray       # (I,) cost per dropped unit
    delay_penalty: float            # cost per unit of delay-weighted workload
    unmet_fraction_cap: np.ndarray  # (I,) max fraction of demand dropped
    delay_cap: np.ndarray           # (I,) max worst-case average delay (ms)
    budget: float                   # total hardening budget
    harden_cost: np.ndarray         # (I, J, R) cost of level-r hardening
    harden_impact: np.ndarray       # (I, J, R) deviation reduction of level r
    workload_impact: np.ndarray     # (I, J) delay-deviation slope per unit
    delay_min: np.ndarray           # (I, J) minimum link delay (ms)
    delay_dev: np.ndarray           # (I, J) maximum delay deviation (ms)
    uncertainty_budget_diu: float   # deviation budget of the exogenous set
    uncertainty_budget_ddu: float   # deviation budget of the endogenous set

    def __post_init__(self):
        object.__setattr__(self, "num_areas", int(self.num_areas))
        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        object.__setattr__(self, "num_levels", int(self.num_levels))
        for name in ("delay_penalty", "budget", "uncertainty_budget_diu",
                     "uncertainty_budget_ddu"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "demand", _frozen(self.demand, np.int64))
        object.__setattr__(self, "capacity", _frozen(self.capacity, np.int64))
        for name in ("unmet_penalty", "unmet_fraction_cap", "delay_cap",
                     "harden_cost", "harden_impact", "workload_impact",
                     "delay_min", "delay_dev"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if a.shape != b.shape or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    def alloc_upper(self) -> np.ndarray:
        """Per-link allocation cap min(capacity_j, demand_i), shape (I, J)."""
        return np.minimum(self.capacity[None, :], self.demand[:, None])

    def unmet_upper(self) -> np.ndarray:
        """Per-area cap on dropped units, floor(cap_fraction * demand)."""
        return np.floor(self.unmet_fraction_cap * self.demand + 1e-9).astype(np.int64)

    def deviation_upper(self, harden) -> np.ndarray:
        """Upper bounds of the normalized deviations under a hardening plan."""
        harden = np.asarray(harden)
        return 1.0 - np.einsum("ijr,ijr->ij", self.harden_impact, harden.astype(np.float64))

    def replace(self, **changes) -> "Instance":
        """Return a copy with ``changes`` applied; raises if it is invalid."""
        inst = _dc_replace(self, **changes)
        problems = validate(inst)
        if problems:
            raise ValueError("invalid instance: " + "; ".join(problems))
        return inst


@dataclass(frozen=True)
class GenConfig:
    """Knobs of the synthetic instance generator.

    Defaults reproduce the published base setting: a 10x10 network with three
    hardening levels, demands in [40, 60] units, penalties in [40, 50],
    level-1 costs in [1, 1.05] with +0.2 per level (scaled by ``cost_scale``),
    impact ladder 0.1/0.5/0.9, uniform workload slope 0.1, delay penalty 0.1,
    per-area delay cap 15 ms, drop cap 5%, budget 100, and both uncertainty
    budgets at 15.  Capacity pool and delay ranges are local calibrations (the
    source traces are proprietary); see README for the chosen regime.
    """

    seed: int = 0
    num_areas: int = 10
    num_nodes: int = 10
    num_levels: int = 3
    demand_range: tuple = (40, 60)             # integers, inclusive
    penalty_range: tuple = (40.0, 50.0)
    base_harden_cost_range: tuple = (1.0, 1.05)
    harden_cost_step: float = 0.2              # cost increment per level
    impact_level1: float = 0.1                 # deviation reduction of level 1
    impact_step: float = 0.4                   # impact increment per level
    workload_impact_value: float = 0.1         # uniform slope on every link
    cost_scale: float = 1.0                    # multiplies all hardening costs
    capacity_pool: tuple = (40, 60, 80, 100)
    delay_min_range: tuple = (2.0, 10.0)
    delay_dev_range: tuple = (4.0, 12.0)
    delay_penalty: float = 0.1
    delay_cap: float = 15.0
    unmet_fraction_cap: float = 0.05
    budget: float = 100.0
    uncertainty_budget_diu: float = 15.0
    uncertainty_budget_ddu: float = 15.0


def _check_config(cfg: GenConfig):
    err = []
    if cfg.num_areas < 1 or cfg.num_nodes < 1 or cfg.num_levels < 1:
        err.append("network sizes must be positive")
    lo, hi = cfg.demand_range
    if not (0 <= lo <= hi):
        err.append("demand_range must satisfy 0 <= lo <= hi")
    for name in ("penalty_range", "base_harden_cost_range",
                 "delay_min_range", "delay_dev_range"):
        lo, hi = getattr(cfg, name)
        if not (0 <= lo <= hi):
            err.append(f"{name} must satisfy 0 <= lo <= hi")
    if cfg.cost_scale <= 0:
        err.append("cost_scale must be positive")
    if len(cfg.capacity_pool) == 0 or any(int(c) < 0 for c in cfg.capacity_pool):
        err.append("capacity_pool must be nonempty with nonnegative entries")
    if cfg.impact_level1 < 0:
        err.append("impact_level1 must be nonnegative")
    if cfg.num_levels > 1 and cfg.impact_step <= 0:
        err.append("impact_step must be positive when num_levels > 1")
    if cfg.num_levels > 1 and cfg.harden_cost_step <= 0:
        err.append("harden_cost_step must be positive when num_levels > 1")
    top = cfg.impact_level1 + (cfg.num_levels - 1) * cfg.impact_step
    if top >= 1.0:
        err.append(f"top-level impact {top:g} must stay below 1")
    for name in ("workload_impact_value", "delay_penalty", "delay_cap",
                 "budget", "uncertainty_budget_diu", "uncertainty_budget_ddu"):
        if getattr(cfg, name) < 0:
            err.append(f"{name} must be nonnegative")
    if not (0.0 <= cfg.unmet_fraction_cap <= 1.0):
        err.append("unmet_fraction_cap must lie in [0, 1]")
    if err:
        raise ConfigError("; ".join(err))


# Stream indices of the per-array RNG split.  Array k is drawn from
# PCG64(SeedSequence((seed, k))), so adding arrays never perturbs existing
# ones and instances reproduce across platforms for a fixed numpy version.
_STREAMS = {"demand": 0, "capacity": 1, "unmet_penalty": 2,
            "harden_base": 3, "delay_min": 4, "delay_dev": 5}


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, _STREAMS[name]))))


def generate(cfg: GenConfig) -> Instance:
    """Draw a synthetic instance; deterministic function of the config."""
    _check_config(cfg)
    ni, nj, nr = cfg.num_areas, cfg.num_nodes, cfg.num_levels

    lo, hi = cfg.demand_range
    demand = _stream(cfg.seed, "demand").integers(lo, hi + 1, size=ni)
    capacity = _stream(cfg.seed, "capacity").choice(
        np.asarray(cfg.capacity_pool, dtype=np.int64), size=nj)
    penalty = _stream(cfg.seed, "unmet_penalty").uniform(*cfg.penalty_range, size=ni)
    base = _stream(cfg.seed, "harden_base").uniform(*cfg.base_harden_cost_range, size=(ni, nj))
    dmin = _stream(cfg.seed, "delay_min").uniform(*cfg.delay_min_range, size=(ni, nj))
    ddev = _stream(cfg.seed, "delay_dev").uniform(*cfg.delay_dev_range, size=(ni, nj))

    levels = np.arange(nr, dtype=np.float64)
    cost = cfg.cost_scale * (base[:, :, None] + levels[None, None, :] * cfg.harden_cost_step)
    impact = np.broadcast_to(cfg.impact_level1 + levels * cfg.impact_step, (ni, nj, nr))

    inst = Instance(
        num_areas=ni, num_nodes=nj, num_levels=nr,
        demand=demand, capacity=capacity,
        unmet_penalty=penalty,
        delay_penalty=cfg.delay_penalty,
        unmet_fraction_cap=np.full(ni, cfg.unmet_fraction_cap),
        delay_cap=np.full(ni, cfg.delay_cap),
        budget=cfg.budget,
        harden_cost=cost, harden_impact=impact,
        workload_impact=np.full((ni, nj), cfg.workload_impact_value),
        delay_min=dmin, delay_dev=ddev,
        uncertainty_budget_diu=cfg.uncertainty_budget_diu,
        uncertainty_budget_ddu=cfg.uncertainty_budget_ddu,
    )
    problems = validate(inst)
    if problems:  # pragma: no cover - generator guarantees validity
        raise ConfigError("generated instance invalid: " + "; ".join(problems))
    return inst


def validate(inst: Instance) -> list:
    """Check every invariant; returns one message per violation (never raises)."""
    out = []
    ni, nj, nr = inst.num_areas, inst.num_nodes, inst.num_levels
    shapes = {
        "demand": (ni,), "capacity": (nj,), "unmet_penalty": (ni,),
        "unmet_fraction_cap": (ni,), "delay_cap": (ni,),
        "harden_cost": (ni, nj, nr), "harden_impact": (ni, nj, nr),
        "workload_impact": (ni, nj), "delay_min": (ni, nj), "delay_dev": (ni, nj),
    }
    for name, want in shapes.items():
        got = getattr(inst, name).shape
        if got != want:
            out.append(f"{name}: shape {got} differs from expected {want}")
    if out:
        return out  # index checks below assume correct shapes

    for name in ("demand", "capacity"):
        arr = getattr(inst, name)
        bad = np.argwhere(arr < 0)
        for idx in bad:
            out.append(f"{name}[{idx[0]}]: negative value {arr[tuple(idx)]}")
    for name in ("unmet_penalty", "delay_cap", "workload_impact",
                 "delay_min", "delay_dev", "harden_cost"):
        arr = getattr(inst, name)
        for idx in np.argwhere(arr < 0):
            pos = ",".join(str(k) for k in idx)
            out.append(f"{name}[{pos}]: negative value {arr[tuple(idx)]}")
    for name in ("delay_penalty", "budget",
                 "uncertainty_budget_diu", "uncertainty_budget_ddu"):
        if getattr(inst, name) < 0:
            out.append(f"{name}: negative value {getattr(inst, name)}")

    alpha = inst.unmet_fraction_cap
    for (i,) in np.argwhere((alpha < 0) | (alpha > 1)):
        out.append(f"unmet_fraction_cap[{i}]: {alpha[i]} outside range [0, 1]")

    gam = inst.harden_impact
    for idx in np.argwhere((gam < 0) | (gam >= 1)):
        pos = ",".join(str(k) for k in idx)
        out.append(f"harden_impact[{pos}]: {gam[tuple(idx)]} outside range [0, 1)")
    if nr > 1:
        for idx in np.argwhere(np.diff(gam, axis=2) <= 0):
            i, j, r = idx
            out.append(f"harden_impact[{i},{j}]: monotonicity broken, "
                       f"level {r + 2} impact {gam[i, j, r + 1]} <= level {r + 1} "
                       f"impact {gam[i, j, r]}")
        cost = inst.harden_cost
        for idx in np.argwhere(np.diff(cost, axis=2) <= 0):
            i, j, r = idx
            out.append(f"harden_cost[{i},{j}]: monotonicity broken, "
                       f"level {r + 2} cost {cost[i, j, r + 1]} <= level {r + 1} "
                       f"cost {cost[i, j, r]}")
    return out


# --- persistence -----------------------------------------------------------
#
# Self-describing text format: a header line, then "key value..." lines with
# arrays flattened row-major.  Floats are written with repr() (shortest
# round-trip), so saving the same instance twice is byte-identical and
# load(save(x)) == x exactly.  Unknown keys warn and are skipped so newer
# files keep loading.

_HEADER = "edgehard-instance v1"
_SCALAR_INT = ("num_areas", "num_nodes", "num_levels")
_SCALAR_FLOAT = ("budget", "delay_penalty",
                 "uncertainty_budget_diu", "uncertainty_budget_ddu")
_ARRAY_INT = ("demand", "capacity")
_ARRAY_FLOAT = ("unmet_penalty", "unmet_fraction_cap", "delay_cap",
                "workload_impact", "delay_min", "delay_dev",
                "harden_cost", "harden_impact")


def _shape_of(name, ni, nj, nr):
    if name in ("demand", "unmet_penalty", "unmet_fraction_cap", "delay_cap"):
        return (ni,)
    if name == "capacity":
        return (nj,)
    if name in ("workload_impact", "delay_min", "delay_dev"):
        return (ni, nj)
    return (ni, nj, nr)


def dumps(inst: Instance) -> str:
    lines = [_HEADER]
    for name in _SCALAR_INT:
        lines.append(f"{name} {getattr(inst, name)}")
    for name in _SCALAR_FLOAT:
        lines.append(f"{name} {getattr(inst, name)!r}")
    for name in _ARRAY_INT:
        vals = " ".join(str(int(v)) for v in getattr(inst, name).ravel())
        lines.append(f"{name} {vals}")
    for name in _ARRAY_FLOAT:
        vals = " ".join(repr(float(v)) for v in getattr(inst, name).ravel())
        lines.append(f"{name} {vals}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Instance:
    seen = {}
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise InstanceParseError(f"line 1: expected header '{_HEADER}'")
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        seen[key] = (ln, rest.split())

    known = set(_SCALAR_INT) | set(_SCALAR_FLOAT) | set(_ARRAY_INT) | set(_ARRAY_FLOAT)
    for key in list(seen):
        if key not in known:
            warnings.warn(f"instance file: unknown field '{key}' ignored")
            del seen[key]

    def take(name, count, conv):
        if name not in seen:
            raise InstanceParseError(f"missing field '{name}'")
        ln, toks = seen[name]
        if count is not None and len(toks) != count:
            raise InstanceParseError(
                f"line {ln}: expected {count} values for '{name}', got {len(toks)}")
        try:
            return [conv(tok) for tok in toks]
        except ValueError as exc:
            raise InstanceParseError(f"line {ln}: bad value in '{name}': {exc}") from None

    kw = {}
    for name in _SCALAR_INT:
        kw[name] = take(name, 1, int)[0]
    for name in _SCALAR_FLOAT:
        kw[name] = take(name, 1, float)[0]
    ni, nj, nr = kw["num_areas"], kw["num_nodes"], kw["num_levels"]
    for name in _ARRAY_INT:
        shape = _shape_of(name, ni, nj, nr)
        kw[name] = np.array(take(name, int(np.prod(shape)), int)).reshape(shape)
    for name in _ARRAY_FLOAT:
        shape = _shape_of(name, ni, nj, nr)
        kw[name] = np.array(take(name, int(np.prod(shape)), float)).reshape(shape)
    return Instance(**kw)


def save(inst: Instance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(inst))


def load(path) -> Instance:
    with open(path) as fh:
        return loads(fh.read())
