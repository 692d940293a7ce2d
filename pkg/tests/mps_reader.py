"""Independent MPS reader used only by the tests.

Parses the sections our writer emits (ROWS/COLUMNS with integrality markers,
RHS, BOUNDS) into plain arrays and solves them with scipy directly, bypassing
the package's model and solver layers entirely.  This keeps the round-trip
check honest: a bug shared by writer and production solver path cannot hide
here.
"""

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp


def parse_mps(text):
    rows = {}          # name -> sense
    row_order = []
    cols = {}          # name -> {row: coef}
    col_order = []
    integrality = {}
    rhs = {}
    bounds = {}        # name -> [lo, up]
    obj_name = None
    section = None
    in_int = False
    for raw in text.splitlines():
        if not raw.strip():
            continue
        if not raw.startswith(" ") and not raw.startswith("\t"):
            section = raw.split()[0]
            continue
        toks = raw.split()
        if section == "ROWS":
            sense, name = toks
            if sense == "N":
                obj_name = name
            else:
                rows[name] = sense
                row_order.append(name)
        elif section == "COLUMNS":
            if len(toks) >= 3 and toks[1] == "'MARKER'":
                in_int = toks[2] == "'INTORG'"
                continue
            name, rname, val = toks[0], toks[1], float(toks[2])
            if name not in cols:
                cols[name] = {}
                col_order.append(name)
                integrality[name] = 1 if in_int else 0
                bounds[name] = [0.0, np.inf]
            cols[name][rname] = cols[name].get(rname, 0.0) + val
        elif section == "RHS":
            rhs[toks[1]] = float(toks[2])
        elif section == "BOUNDS":
            kind, _, name = toks[0], toks[1], toks[2]
            val = float(toks[3]) if len(toks) > 3 else None
            if kind == "BV":
                bounds[name] = [0.0, 1.0]
                integrality[name] = 1
            elif kind == "LO":
                bounds[name][0] = val
            elif kind == "UP":
                bounds[name][1] = val
            elif kind == "FX":
                bounds[name] = [val, val]
            elif kind == "MI":
                bounds[name][0] = -np.inf
            elif kind == "PL":
                bounds[name][1] = np.inf
    return {"rows": rows, "row_order": row_order, "cols": cols,
            "col_order": col_order, "integrality": integrality, "rhs": rhs,
            "bounds": bounds, "obj": obj_name}


def solve_mps(text, mip_gap=0.0):
    """Solve parsed MPS with scipy.optimize.milp; returns (objective, {name: value})."""
    p = parse_mps(text)
    n = len(p["col_order"])
    col_idx = {name: k for k, name in enumerate(p["col_order"])}
    c = np.zeros(n)
    offset = -p["rhs"].get(p["obj"], 0.0)
    for name, coefs in p["cols"].items():
        if p["obj"] in coefs:
            c[col_idx[name]] = coefs[p["obj"]]
    lb, ub = [], []
    mat = np.zeros((len(p["row_order"]), n))
    for r, rname in enumerate(p["row_order"]):
        sense = p["rows"][rname]
        b = p["rhs"].get(rname, 0.0)
        lb.append(b if sense in ("G", "E") else -np.inf)
        ub.append(b if sense in ("L", "E") else np.inf)
        for name, coefs in p["cols"].items():
            if rname in coefs:
                mat[r, col_idx[name]] = coefs[rname]
    integrality = np.array([p["integrality"][name] for name in p["col_order"]])
    blo = np.array([p["bounds"][name][0] for name in p["col_order"]])
    bup = np.array([p["bounds"][name][1] for name in p["col_order"]])
    constraints = [LinearConstraint(mat, lb, ub)] if len(p["row_order"]) else []
    res = milp(c=c, constraints=constraints, integrality=integrality,
               bounds=Bounds(blo, bup), options={"mip_rel_gap": mip_gap})
    assert res.status == 0, res.message
    values = {name: float(res.x[col_idx[name]]) for name in p["col_order"]}
    return float(res.fun) + offset, values
