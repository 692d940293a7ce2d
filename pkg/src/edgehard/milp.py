"""Solver-neutral mixed-integer linear program representation.

A :class:`MilpModel` owns a variable table and an ordered constraint list.
Variables are referenced through opaque handles tied to the issuing model, so
expressions cannot silently mix models.  Finished models export
deterministically to MPS (canonical) and LP text, and :func:`stats` reports
exact size counts.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field

__all__ = [
    "CONTINUOUS", "INTEGER", "BINARY",
    "VarRef", "Variable", "LinExpr", "Constraint", "MilpModel", "ModelStats",
    "ModelError", "stats", "write_mps", "write_lp", "mps_name_map",
]

CONTINUOUS = "continuous"
INTEGER = "integer"
BINARY = "binary"
_KINDS = (CONTINUOUS, INTEGER, BINARY)
_SENSES = ("<=", "=", ">=")

_model_ids = itertools.count()


class ModelError(ValueError):
    """Invalid model construction or export request."""


@dataclass(frozen=True)
class VarRef:
    """Opaque handle into one model's variable table."""
    model_id: int
    index: int


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ModelError(f"unknown variable kind '{self.kind}'")
        if self.kind == BINARY:
            if (self.lower, self.upper) != (0.0, 1.0):
                raise ModelError(f"binary variable '{self.name}' must have bounds [0, 1]")
        if self.lower > self.upper:
            raise ModelError(f"variable '{self.name}': lower {self.lower} > upper {self.upper}")

    @staticmethod
    def binary(name: str) -> "Variable":
        return Variable(name, BINARY, 0.0, 1.0)

    @staticmethod
    def integer(name: str, lower: float = 0.0, upper: float = math.inf) -> "Variable":
        return Variable(name, INTEGER, lower, upper)

    @staticmethod
    def cont(name: str, lower: float = 0.0, upper: float = math.inf) -> "Variable":
        return Variable(name, CONTINUOUS, lower, upper)


@dataclass(frozen=True)
class LinExpr:
    """Sparse linear expression: sum of coefficient*variable plus a constant.

    Terms are normalized on construction: duplicate references are merged in
    first-seen order and exact-zero coefficients dropped.
    """

    terms: tuple = ()
    constant: float = 0.0

    @staticmethod
    def build(pairs, constant: float = 0.0) -> "LinExpr":
        acc: dict = {}
        for ref, coef in pairs:
            if not isinstance(ref, VarRef):
                raise ModelError(f"expression term {ref!r} is not a VarRef")
            acc[ref] = acc.get(ref, 0.0) + float(coef)
        terms = tuple((ref, c) for ref, c in acc.items() if c != 0.0)
        return LinExpr(terms, float(constant))

    def value(self, values) -> float:
        return self.constant + sum(c * values[ref] for ref, c in self.terms)


@dataclass(frozen=True)
class Constraint:
    expr: LinExpr
    sense: str
    rhs: float
    name: str


@dataclass(frozen=True)
class ModelStats:
    rows: int
    cols: int
    binaries: int
    integers: int
    continuous: int
    nonzeros: int  # constraint-matrix nonzeros (objective excluded)


class MilpModel:
    """Mutable while building; treat as immutable once finished."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._id = next(_model_ids)
        self.variables: list = []
        self.constraints: list = []
        self.objective = LinExpr()
        self._var_index: dict = {}
        self._row_index: dict = {}

    # -- variables ----------------------------------------------------------
    def add_var(self, var: Variable) -> VarRef:
        if var.name in self._var_index:
            raise ModelError(f"duplicate variable name '{var.name}'")
        ref = VarRef(self._id, len(self.variables))
        self.variables.append(var)
        self._var_index[var.name] = ref
        return ref

    def ref(self, name: str) -> VarRef:
        try:
            return self._var_index[name]
        except KeyError:
            raise ModelError(f"no variable named '{name}'") from None

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def var(self, ref: VarRef) -> Variable:
        self._check_ref(ref)
        return self.variables[ref.index]

    def _check_ref(self, ref: VarRef):
        if not isinstance(ref, VarRef) or ref.model_id != self._id \
                or not (0 <= ref.index < len(self.variables)):
            raise ModelError(f"variable reference {ref!r} does not belong to this model")

    # -- constraints and objective -------------------------------------------
    def add_constr(self, expr, sense: str, rhs: float, name: str = None) -> int:
        if sense not in _SENSES:
            raise ModelError(f"unknown constraint sense '{sense}'")
        if not isinstance(expr, LinExpr):
            expr = LinExpr.build(expr)
        for ref, _ in expr.terms:
            self._check_ref(ref)
        if expr.constant != 0.0:  # fold constants into the right-hand side
            rhs = float(rhs) - expr.constant
            expr = LinExpr(expr.terms, 0.0)
        if name is None:
            name = f"c{len(self.constraints)}"
        if name in self._row_index:
            raise ModelError(f"duplicate constraint name '{name}'")
        cid = len(self.constraints)
        self.constraints.append(Constraint(expr, sense, float(rhs), name))
        self._row_index[name] = cid
        return cid

    def set_objective(self, expr) -> None:
        if not isinstance(expr, LinExpr):
            expr = LinExpr.build(expr)
        for ref, _ in expr.terms:
            self._check_ref(ref)
        self.objective = expr

    def stats(self) -> ModelStats:
        kinds = [v.kind for v in self.variables]
        return ModelStats(
            rows=len(self.constraints),
            cols=len(self.variables),
            binaries=kinds.count(BINARY),
            integers=kinds.count(INTEGER),
            continuous=kinds.count(CONTINUOUS),
            nonzeros=sum(len(c.expr.terms) for c in self.constraints),
        )


def stats(model: MilpModel) -> ModelStats:
    return model.stats()


# --- text export -------------------------------------------------------------
#
# MPS is the canonical format: fixed-field section layout with whitespace-
# separated fields, one (row, value) pair per COLUMNS line, and values printed
# with 17 significant digits so doubles round-trip bit-faithfully.  Names
# longer than 8 characters (or containing characters unsafe in fixed-field
# readers) are mangled reversibly; the sidecar map records every rename.

_NAME_OK = re.compile(r"[A-Za-z][A-Za-z0-9_]{0,7}")


def _num(x: float) -> str:
    return f"{x:.17g}"


def _export_names(names, prefix, taken):
    """Deterministic safe names: keep short clean names, mangle the rest."""
    mapping = {}
    counter = 0
    for name in names:
        if _NAME_OK.fullmatch(name) and name not in taken:
            mapping[name] = name
            taken.add(name)
            continue
        while True:
            counter += 1
            cand = f"{prefix}{counter:07d}"
            if cand not in taken:
                break
        mapping[name] = cand
        taken.add(cand)
    return mapping


def _mps_names(model: MilpModel):
    taken = {"OBJ", "RHS", "BND", "MARKER"}
    cols = _export_names([v.name for v in model.variables], "X", taken)
    rows = _export_names([c.name for c in model.constraints], "R", taken)
    return cols, rows


def mps_name_map(model: MilpModel) -> dict:
    """Merged {original: exported} name map for the MPS writer."""
    cols, rows = _mps_names(model)
    return {**cols, **rows}


def write_name_map(model: MilpModel) -> str:
    """Sidecar text recording mangled names, one 'exported original' per line."""
    out = [f"{new} {old}" for old, new in mps_name_map(model).items() if new != old]
    return "\n".join(out) + ("\n" if out else "")


def write_mps(model: MilpModel) -> str:
    if not model.variables:
        raise ModelError("cannot export an empty model")
    cols, rows = _mps_names(model)

    obj_coef = {ref: c for ref, c in model.objective.terms}
    per_var = [[] for _ in model.variables]  # (row name, coefficient) pairs
    for con in model.constraints:
        rname = rows[con.name]
        for ref, coef in con.expr.terms:
            per_var[ref.index].append((rname, coef))

    out = [f"NAME          {model.name}"]
    out.append("ROWS")
    out.append(" N  OBJ")
    sense_tag = {"<=": "L", ">=": "G", "=": "E"}
    for con in model.constraints:
        out.append(f" {sense_tag[con.sense]}  {rows[con.name]}")

    out.append("COLUMNS")
    in_int = False
    marker = 0
    for idx, var in enumerate(model.variables):
        is_int = var.kind in (INTEGER, BINARY)
        if is_int != in_int:
            tag = "INTORG" if is_int else "INTEND"
            out.append(f"    MARKER{marker:04d}  'MARKER'                 '{tag}'")
            marker += 1
            in_int = is_int
        cname = cols[var.name]
        ref = VarRef(model._id, idx)
        entries = []
        if ref in obj_coef:
            entries.append(("OBJ", obj_coef[ref]))
        entries.extend(per_var[idx])
        if not entries:
            entries.append(("OBJ", 0.0))  # column must appear at least once
        for rname, coef in entries:
            out.append(f"    {cname:<10}{rname:<10}{_num(coef)}")
    if in_int:
        out.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")

    out.append("RHS")
    for con in model.constraints:
        if con.rhs != 0.0:
            out.append(f"    RHS       {rows[con.name]:<10}{_num(con.rhs)}")
    if model.objective.constant != 0.0:
        out.append(f"    RHS       OBJ       {_num(-model.objective.constant)}")

    out.append("BOUNDS")
    for var in model.variables:
        cname = cols[var.name]
        if var.kind == BINARY:
            out.append(f" BV BND       {cname}")
            continue
        if var.lower == var.upper:
            out.append(f" FX BND       {cname:<10}{_num(var.lower)}")
            continue
        if math.isinf(var.lower):
            out.append(f" MI BND       {cname}")
        else:
            out.append(f" LO BND       {cname:<10}{_num(var.lower)}")
        if math.isinf(var.upper):
            out.append(f" PL BND       {cname}")
        else:
            out.append(f" UP BND       {cname:<10}{_num(var.upper)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _lp_terms(expr: LinExpr, model: MilpModel) -> str:
    parts = []
    for ref, coef in expr.terms:
        name = model.variables[ref.index].name
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {name}")
    if expr.constant:
        sign = "-" if expr.constant < 0 else "+"
        parts.append(f"{sign} {_num(abs(expr.constant))}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp(model: MilpModel) -> str:
    """Human-readable secondary export in CPLEX LP syntax."""
    if not model.variables:
        raise ModelError("cannot export an empty model")
    out = [f"\\ Problem: {model.name}", "Minimize"]
    out.append(f" obj: {_lp_terms(model.objective, model)}")
    out.append("Subject To")
    for con in model.constraints:
        out.append(f" {con.name}: {_lp_terms(con.expr, model)} {con.sense} {_num(con.rhs)}")
    out.append("Bounds")
    for var in model.variables:
        if var.kind == BINARY:
            continue
        lo = "-infinity" if math.isinf(var.lower) else _num(var.lower)
        up = "+infinity" if math.isinf(var.upper) else _num(var.upper)
        if math.isinf(var.lower) and math.isinf(var.upper):
            out.append(f" {var.name} free")
        else:
            out.append(f" {lo} <= {var.name} <= {up}")
    generals = [v.name for v in model.variables if v.kind == INTEGER]
    if generals:
        out.append("General")
        out.extend(f" {name}" for name in generals)
    binaries = [v.name for v in model.variables if v.kind == BINARY]
    if binaries:
        out.append("Binary")
        out.extend(f" {name}" for name in binaries)
    out.append("End")
    return "\n".join(out) + "\n"
