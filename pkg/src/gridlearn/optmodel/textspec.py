"""Structured text documents describing problems.

A problem document is JSON with this schema (all coefficient blocks are
nested lists; vectors may be given as a scalar to broadcast):

    {
      "variables":  [{"name": "x", "shape": 2, "binary": false,
                      "lb": 0.0, "ub": null}, ...],
      "parameters": [{"name": "y", "dim": 1}, ...],
      "objective":  {"linear":    [{"var": "x", "coeffs": [1.0, 1.0]}],
                     "quadratic": [{"var_i": "x", "var_j": "x",
                                    "matrix": [[...]]}],
                     "parametric": [{"param": "y", "var": "x",
                                     "matrix": [[...]]}]},
      "constraints": [{"name": "c0", "sense": "<=" | ">=" | "==",
                       "terms": [{"var": "x", "matrix": [[...]]} |
                                 {"param": "y", "matrix": [[...]]}],
                       "rhs": [0.0, ...]}]
    }

Each constraint reads ``sum(terms) sense rhs`` where variable and parameter
terms may appear on the left; lowering normalises parameters onto the
right-hand side.  The same schema round-trips through :func:`dump_document`.
"""

from __future__ import annotations

import json

import numpy as np

from .builder import ProblemBuilder
from .errors import SpecDocumentError, UndeclaredSymbol
from .problem import ParametricMIQP

__all__ = ["build_problem", "load_document", "dump_document"]


def _matrix(entry, m, n):
    M = np.asarray(entry, dtype=float)
    if M.ndim == 0:
        M = float(M) * np.eye(m, n) if m == n else np.full((m, n), float(M))
    elif M.ndim == 1:
        if m == 1:
            M = M[None, :]
        elif n == 1:
            M = M[:, None]
    if M.shape != (m, n):
        raise SpecDocumentError(f"coefficient block has shape {M.shape}, expected {(m, n)}")
    return M


def build_problem(doc: dict) -> ParametricMIQP:
    """Lower a problem document (parsed JSON) to the canonical form."""
    if not isinstance(doc, dict):
        raise SpecDocumentError("document root must be an object")
    bld = ProblemBuilder()
    handles = {}
    for v in doc.get("variables", []):
        try:
            handles[v["name"]] = bld.variable(
                v["name"], v.get("shape", 1), binary=v.get("binary", False),
                lb=v.get("lb"), ub=v.get("ub"))
        except KeyError as e:
            raise SpecDocumentError(f"variable entry missing {e}") from e
    params = {}
    for p in doc.get("parameters", []):
        try:
            params[p["name"]] = bld.parameter(p["name"], p.get("dim", 1))
        except KeyError as e:
            raise SpecDocumentError(f"parameter entry missing {e}") from e
    if doc.get("materialized_bounds"):
        # Bound rows already appear among the constraints (documents written
        # by dump_document); do not add them a second time.
        for name in handles:
            bld._materialize[name] = False

    for c in doc.get("constraints", []):
        rhs = np.atleast_1d(np.asarray(c.get("rhs", 0.0), dtype=float))
        m = len(rhs)
        expr = None
        for term in c.get("terms", []):
            if "var" in term:
                name = term["var"]
                if name not in handles:
                    raise UndeclaredSymbol(f"unknown variable {name!r}")
                M = _matrix(term.get("matrix", term.get("coeffs", 1.0)),
                            m, handles[name].size)
                piece = M @ handles[name].expr()
            elif "param" in term:
                name = term["param"]
                if name not in params:
                    raise UndeclaredSymbol(f"unknown parameter {name!r}")
                M = _matrix(term.get("matrix", term.get("coeffs", 1.0)),
                            m, params[name].dim)
                piece = M @ params[name].expr()
            else:
                raise SpecDocumentError("constraint term needs 'var' or 'param'")
            expr = piece if expr is None else expr + piece
        if expr is None:
            raise SpecDocumentError(f"constraint {c.get('name')!r} has no terms")
        sense = c.get("sense", "<=")
        if sense == "<=":
            con = expr <= rhs
        elif sense == ">=":
            con = expr >= rhs
        elif sense == "==":
            con = expr == rhs
        else:
            raise SpecDocumentError(f"bad sense {sense!r}")
        bld.constrain(con, c.get("name", f"c{len(bld._cons)}"))

    obj = doc.get("objective", {})
    for t in obj.get("linear", []):
        name = t["var"]
        if name not in handles:
            raise UndeclaredSymbol(f"unknown variable {name!r}")
        coeffs = np.broadcast_to(
            np.asarray(t.get("coeffs", 1.0), dtype=float), (handles[name].size,))
        bld.cost_linear(coeffs[None, :] @ handles[name].expr())
    for t in obj.get("quadratic", []):
        vi = handles.get(t.get("var_i"), params.get(t.get("var_i")))
        vj = handles.get(t.get("var_j"), params.get(t.get("var_j")))
        if vi is None or vj is None:
            raise UndeclaredSymbol("quadratic term references unknown symbol")
        bld.cost_quadratic(vi, vj, t["matrix"])
    for t in obj.get("parametric", []):
        p = params.get(t.get("param"))
        v = handles.get(t.get("var"))
        if p is None or v is None:
            raise UndeclaredSymbol("parametric cost references unknown symbol")
        bld.cost_parametric(p, v, _matrix(t["matrix"], v.size, p.dim))
    return bld.lower()


def load_document(path) -> ParametricMIQP:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SpecDocumentError(f"invalid JSON in {path}: {e}") from e
    return build_problem(doc)


def dump_document(prob: ParametricMIQP, path=None):
    """Serialise a lowered problem back to the document schema.

    Rows are grouped exactly as named at build time, so a dump/load round
    trip reproduces all blocks.
    """
    variables = []
    for name, (a0, a1) in sorted(prob.var_names.items(), key=lambda kv: kv[1][0]):
        variables.append({"name": name, "shape": a1 - a0, "binary": a1 <= prob.n_I})
    parameters = [{"name": name, "dim": dim}
                  for name, (slot, dim) in sorted(
                      prob.param_names.items(), key=lambda kv: kv[1][0])]
    constraints = []
    for name, (block, a0, a1) in sorted(
            prob.row_names.items(), key=lambda kv: (kv[1][0], kv[1][1])):
        M = (prob.A if block == "eq" else prob.G)[a0:a1]
        terms = []
        for vname, (c0, c1) in prob.var_names.items():
            sub = M[:, c0:c1]
            if sub.nnz:
                terms.append({"var": vname, "matrix": sub.toarray().tolist()})
        for pname, (slot, dim) in prob.param_names.items():
            sub = (prob.Bp if block == "eq" else prob.Hp)[slot][a0:a1]
            if sub.nnz:
                terms.append({"param": pname, "matrix": (-sub.toarray()).tolist()})
        rhs = (prob.b if block == "eq" else prob.h)[a0:a1]
        constraints.append({
            "name": name, "sense": "==" if block == "eq" else "<=",
            "terms": terms, "rhs": rhs.tolist()})

    objective = {"linear": [], "quadratic": [], "parametric": []}
    for vname, (c0, c1) in prob.var_names.items():
        seg = prob.q[c0:c1]
        if np.any(seg):
            objective["linear"].append({"var": vname, "coeffs": seg.tolist()})
    if prob.P.nnz:
        for ni, (i0, i1) in prob.var_names.items():
            for nj, (j0, j1) in prob.var_names.items():
                if j0 < i0:
                    continue
                blk = prob.P[i0:i1, j0:j1]
                if blk.nnz:
                    M = blk.toarray()
                    objective["quadratic"].append({
                        "var_i": ni, "var_j": nj,
                        "matrix": (0.5 * M if ni == nj else M).tolist()})
    for pname, (slot, dim) in prob.param_names.items():
        Q = prob.Qp[slot]
        if Q is not None and Q.nnz:
            for vname, (c0, c1) in prob.var_names.items():
                sub = Q[c0:c1]
                if sub.nnz:
                    objective["parametric"].append({
                        "param": pname, "var": vname,
                        "matrix": sub.toarray().tolist()})

    doc = {"variables": variables, "parameters": parameters,
           "materialized_bounds": True,
           "objective": objective, "constraints": constraints}
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=1)
    return doc
