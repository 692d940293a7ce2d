"""Reusable linearization and robust-counterpart building blocks.

Four product linearizations and two dualization patterns cover everything the
model builders need:

* :func:`binary_expand` writes a bounded integer as a weighted sum of fresh
  binary digits, ``x = sum_k 2^(k-1) b_k`` with ``Q = floor(log2 L) + 1``
  digits.
* :func:`mccormick_bin_cont` represents ``T = t * xi`` for binary ``t`` and a
  continuous ``xi`` in [0, M] through the three envelope rows
  ``T <= M t``, ``T <= xi``, ``T >= xi - M (1 - t)`` plus ``T >= 0``.
* :func:`product_bin_int` does the same for binary times bounded integer.
* :func:`linearize_square` combines the two: with ``b_k`` the digits of
  ``x``, the expression ``sum_k 2^(k-1) (b_k * x)`` equals ``x**2`` at every
  integral point, so one set of products replaces the integer square.
* :func:`dualize_bigm` and :func:`dualize_enhanced` turn a robust constraint
  ``zeta' u <= b  for all zeta with A zeta <= v + psi z`` (binary z) into
  linear rows via LP duality.  The big-M form carries three rows per dual/z
  pair; the enhanced form shifts negative impact coefficients into the dual's
  constant term and keeps a single lower-bound row per pair, which is where
  its row economy comes from.

At optimality of any host model whose pressure on an auxiliary is monotone
(the only way they are used here), the envelope pins the auxiliary to the
exact product value; the exhaustive tests enumerate all integral points to
certify this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .milp import BINARY, INTEGER, LinExpr, MilpModel, ModelError, Variable, VarRef

__all__ = [
    "BinaryExpansion", "DduConstraintSpec",
    "binary_expand", "mccormick_bin_cont", "product_bin_int",
    "linearize_square", "dualize_bigm", "dualize_enhanced", "bit_count",
]


def bit_count(bound: int) -> int:
    """Digits needed for integers in [0, bound]: floor(log2 bound) + 1."""
    if bound < 1:
        raise ValueError(f"bound must be >= 1, got {bound}")
    return int(math.floor(math.log2(bound))) + 1


@dataclass(frozen=True)
class BinaryExpansion:
    source: VarRef
    bits: tuple            # Q binary VarRefs, least significant first
    bound: int
    link_constraint: int   # id of the linking equality row

    @property
    def width(self) -> int:
        return len(self.bits)


def binary_expand(model: MilpModel, x: VarRef, bound: int, prefix: str = None) -> BinaryExpansion:
    """Add digits and the linking equality ``x = sum_k 2^(k-1) b_k``."""
    var = model.var(x)
    if var.kind != INTEGER:
        raise ModelError(f"binary_expand needs an integer variable, got '{var.name}' ({var.kind})")
    if bound < 1:
        raise ModelError(f"binary_expand bound must be >= 1, got {bound}")
    prefix = prefix or f"{var.name}_bit"
    width = bit_count(bound)
    bits = tuple(model.add_var(Variable.binary(f"{prefix}{k}")) for k in range(width))
    terms = [(x, 1.0)] + [(b, -float(2 ** k)) for k, b in enumerate(bits)]
    cid = model.add_constr(terms, "=", 0.0, f"{prefix}_link")
    return BinaryExpansion(source=x, bits=bits, bound=bound, link_constraint=cid)


def _envelope(model, prod, switch, other, big_m, name):
    model.add_constr([(prod, 1.0), (switch, -big_m)], "<=", 0.0, f"{name}_ub1")
    model.add_constr([(prod, 1.0), (other, -1.0)], "<=", 0.0, f"{name}_ub2")
    model.add_constr([(prod, 1.0), (other, -1.0), (switch, -big_m)], ">=", -big_m,
                     f"{name}_lb")


def mccormick_bin_cont(model: MilpModel, t: VarRef, xi: VarRef, big_m: float,
                       name: str = None) -> VarRef:
    """Auxiliary T representing t * xi for binary t and xi in [0, big_m]."""
    if model.var(t).kind != BINARY:
        raise ModelError(f"'{model.var(t).name}' must be binary")
    if big_m <= 0:
        raise ModelError(f"big-M must be positive, got {big_m}")
    name = name or f"{model.var(t).name}_x_{model.var(xi).name}"
    prod = model.add_var(Variable.cont(name, 0.0, math.inf))
    _envelope(model, prod, t, xi, big_m, name)
    return prod


def product_bin_int(model: MilpModel, y: VarRef, x: VarRef, bound: int,
                    name: str = None) -> VarRef:
    """Auxiliary Y representing y * x for binary y and integer x in [0, bound]."""
    if model.var(y).kind != BINARY:
        raise ModelError(f"'{model.var(y).name}' must be binary")
    if bound <= 0:
        raise ModelError(f"bound must be positive, got {bound}")
    name = name or f"{model.var(y).name}_x_{model.var(x).name}"
    prod = model.add_var(Variable.cont(name, 0.0, float(bound)))
    _envelope(model, prod, y, x, float(bound), name)
    return prod


def linearize_square(model: MilpModel, x: VarRef, expansion: BinaryExpansion,
                     bound: int, prefix: str = None) -> LinExpr:
    """Expression equal to x**2 at every integral point of the host model.

    Expands only one factor: x*x = (sum_k 2^(k-1) b_k) * x, then replaces each
    b_k * x with a product auxiliary, avoiding the quadratic blow-up of
    expanding both factors.
    """
    if expansion.source != x:
        raise ModelError("expansion was built for a different variable")
    prefix = prefix or f"{model.var(x).name}_sq"
    terms = []
    for k, b in enumerate(expansion.bits):
        prod = product_bin_int(model, b, x, bound, f"{prefix}{k}")
        terms.append((prod, float(2 ** k)))
    return LinExpr.build(terms)


@dataclass(frozen=True)
class DduConstraintSpec:
    """One robust row ``zeta' u <= b`` over ``{zeta : A zeta <= v + psi z}``.

    ``z`` lists binary variables of the host model; ``psi[i, j]`` is the
    impact of ``z[j]`` on the right-hand side of the i-th set row.  The caller
    guarantees the inner maximum is bounded for every z and that ``big_m``
    dominates some optimal dual multiplier vector.
    """

    matrix: np.ndarray      # A, shape (m, n)
    offset: np.ndarray      # v, shape (m,)
    impact: np.ndarray      # psi, shape (m, p)
    z: tuple                # p binary VarRefs
    direction: np.ndarray   # u, shape (n,)
    rhs: float              # b
    big_m: float

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))
        object.__setattr__(self, "impact", np.asarray(self.impact, dtype=float))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))
        m, n = self.matrix.shape
        if self.offset.shape != (m,) or self.impact.shape != (m, len(self.z)) \
                or self.direction.shape != (n,):
            raise ModelError("DduConstraintSpec dimensions are inconsistent")


def _dual_vars(model, spec, tag):
    m = spec.matrix.shape[0]
    pi = [model.add_var(Variable.cont(f"{tag}_mult{i}", 0.0, math.inf))
          for i in range(m)]
    ids = []
    for k in range(spec.matrix.shape[1]):
        terms = [(pi[i], spec.matrix[i, k]) for i in range(m)]
        ids.append(model.add_constr(terms, "=", spec.direction[k], f"{tag}_dual{k}"))
    return pi, ids


def dualize_bigm(model: MilpModel, spec: DduConstraintSpec, tag: str = "rc") -> list:
    """Big-M robust counterpart: every dual/z pair gets a full envelope.

    Emits dual feasibility ``pi' A = u``, the budget row
    ``sum_i pi_i v_i + sum_ij psi_ij y_ij <= b`` with ``y_ij`` standing for
    ``pi_i z_j``, and per pair ``y <= pi_i``, ``y <= M z_j``,
    ``y >= pi_i - M (1 - z_j)``.
    """
    m, p = spec.impact.shape
    pi, ids = _dual_vars(model, spec, tag)
    main = [(pi[i], spec.offset[i]) for i in range(m)]
    for i in range(m):
        for j in range(p):
            y = model.add_var(Variable.cont(f"{tag}_y{i}_{j}", 0.0, math.inf))
            ids.append(model.add_constr([(y, 1.0), (pi[i], -1.0)], "<=", 0.0,
                                        f"{tag}_y{i}_{j}_ub1"))
            ids.append(model.add_constr([(y, 1.0), (spec.z[j], -spec.big_m)], "<=", 0.0,
                                        f"{tag}_y{i}_{j}_ub2"))
            ids.append(model.add_constr([(y, 1.0), (pi[i], -1.0),
                                         (spec.z[j], -spec.big_m)], ">=", -spec.big_m,
                                        f"{tag}_y{i}_{j}_lb"))
            main.append((y, spec.impact[i, j]))
    ids.append(model.add_constr(main, "<=", spec.rhs, f"{tag}_budget"))
    return ids


def dualize_enhanced(model: MilpModel, spec: DduConstraintSpec, tag: str = "rc") -> list:
    """Sign-split robust counterpart with one lower-bound row per pair.

    Negative impacts are folded into the dual's constant coefficient
    (``v_i + sum_{psi<0} psi_ij``); pairs with ``psi_ij >= 0`` keep an
    auxiliary lower-bounded by ``pi_i - M (1 - z_j)`` and pairs with
    ``psi_ij < 0`` one lower-bounded by ``pi_i - M z_j``.  Feasible z sets
    match :func:`dualize_bigm` exactly while dropping both upper-bound row
    families.
    """
    m, p = spec.impact.shape
    pi, ids = _dual_vars(model, spec, tag)
    shift = np.where(spec.impact < 0, spec.impact, 0.0).sum(axis=1)
    main = [(pi[i], spec.offset[i] + shift[i]) for i in range(m)]
    for i in range(m):
        for j in range(p):
            coef = spec.impact[i, j]
            if coef >= 0:
                y = model.add_var(Variable.cont(f"{tag}_y{i}_{j}", 0.0, math.inf))
                ids.append(model.add_constr(
                    [(y, 1.0), (pi[i], -1.0), (spec.z[j], -spec.big_m)], ">=",
                    -spec.big_m, f"{tag}_y{i}_{j}_lb"))
                main.append((y, coef))
            else:
                w = model.add_var(Variable.cont(f"{tag}_w{i}_{j}", 0.0, math.inf))
                ids.append(model.add_constr(
                    [(w, 1.0), (pi[i], -1.0), (spec.z[j], spec.big_m)], ">=",
                    0.0, f"{tag}_w{i}_{j}_lb"))
                main.append((w, -coef))
    ids.append(model.add_constr(main, "<=", spec.rhs, f"{tag}_budget"))
    return ids
