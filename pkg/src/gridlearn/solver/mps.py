"""MPS interchange and the external-solution text dialect.

Writer layout (documented contract, stable across runs):

* sections NAME, ROWS, COLUMNS, RHS, BOUNDS, QMATRIX (when quadratic),
  ENDATA; comment lines start with ``*``;
* fields start at the classic offsets (indicator at column 2, names
  left-justified in 10-character fields) with two-space separators, so
  longer names shift later fields but never glue to them; values print
  with ``%.17g`` so numbers round-trip bit-exactly;
* binary columns are wrapped in ``MARKER 'INTORG'/'INTEND'`` and declared
  ``BV``; every continuous column is declared ``FR`` because real bounds
  live as ordinary rows of the inequality block;
* the objective constant is carried as an RHS entry on the objective row;
* QMATRIX lists every nonzero of the symmetric quadratic matrix ``P`` with
  the ``min 1/2 x'Px`` convention.

Solution files (the "plain" dialect) contain one ``key value`` pair per line:
a ``status`` line, an optional ``objective``/``gap`` line, then one line per
column.  Columns missing from the file default to 0 with a warning, the
documented MPS convention.
"""

from __future__ import annotations

import re

import numpy as np
import scipy.sparse as sp

from ..optmodel.problem import ConcreteMIQP
from .errors import MissingVariable, UnknownDialect
from .types import Solution, SolveStats

__all__ = ["export_mps", "parse_mps", "column_names", "parse_solution",
           "format_solution"]

_SAN = re.compile(r"[^A-Za-z0-9_]")


def _sanitize(name, used):
    s = _SAN.sub("_", name)[:240] or "x"
    base, k = s, 1
    while s in used:
        s = f"{base}_{k}"
        k += 1
    used.add(s)
    return s


def column_names(prob) -> list:
    """Deterministic MPS column names for a problem's flat variable vector."""
    used = set()
    names = [None] * prob.n_z
    for vname, (a0, a1) in sorted(prob.var_names.items(), key=lambda kv: kv[1][0]):
        if a1 - a0 == 1:
            names[a0] = _sanitize(vname, used)
        else:
            for i in range(a0, a1):
                names[i] = _sanitize(f"{vname}_{i - a0}", used)
    return names


def _row_labels(prob):
    used = set()
    eq = [None] * prob.n_eq
    ineq = [None] * prob.n_ineq
    for rname, (block, a0, a1) in sorted(
            prob.row_names.items(), key=lambda kv: (kv[1][0], kv[1][1])):
        target = eq if block == "eq" else ineq
        for i in range(a0, a1):
            target[i] = _sanitize(f"{rname}_{i - a0}", used)
    for i in range(prob.n_eq):
        if eq[i] is None:
            eq[i] = _sanitize(f"E{i}", used)
    for i in range(prob.n_ineq):
        if ineq[i] is None:
            ineq[i] = _sanitize(f"L{i}", used)
    return eq, ineq


def _f(x):
    return f"{x:.17g}"


def export_mps(prob: ConcreteMIQP, name="GRIDLEARN") -> str:
    cols = column_names(prob)
    eq_names, ineq_names = _row_labels(prob)
    out = [f"NAME          {name}"]
    out.append("ROWS")
    out.append(" N  OBJ")
    for r in eq_names:
        out.append(f" E  {r}")
    for r in ineq_names:
        out.append(f" L  {r}")

    A = prob.A.tocsc()
    G = prob.G.tocsc()
    out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, cname in enumerate(cols):
        is_int = j < prob.n_I
        if is_int and not in_int:
            out.append(f"    MARKER{marker:04d}  'MARKER'                 'INTORG'")
            marker += 1
            in_int = True
        if not is_int and in_int:
            out.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")
            marker += 1
            in_int = False
        entries = []
        if prob.q[j] != 0.0:
            entries.append(("OBJ", prob.q[j]))
        colA = A[:, j].tocoo()
        entries.extend((eq_names[i], v) for i, v in zip(colA.row, colA.data))
        colG = G[:, j].tocoo()
        entries.extend((ineq_names[i], v) for i, v in zip(colG.row, colG.data))
        if not entries:
            entries.append(("OBJ", 0.0))
        for rname, v in entries:
            out.append(f"    {cname:<10}  {rname:<10}  {_f(v)}")
    if in_int:
        out.append(f"    MARKER{marker:04d}  'MARKER'                 'INTEND'")

    out.append("RHS")
    if prob.obj_const != 0.0:
        out.append(f"    RHS         OBJ         {_f(-prob.obj_const)}")
    for i, r in enumerate(eq_names):
        if prob.b[i] != 0.0:
            out.append(f"    RHS         {r:<10}  {_f(prob.b[i])}")
    for i, r in enumerate(ineq_names):
        if prob.h[i] != 0.0:
            out.append(f"    RHS         {r:<10}  {_f(prob.h[i])}")

    out.append("BOUNDS")
    for j, cname in enumerate(cols):
        if j < prob.n_I:
            out.append(f" BV BND       {cname}")
        else:
            out.append(f" FR BND       {cname}")

    if prob.has_quadratic():
        out.append("QMATRIX")
        Pc = prob.P.tocoo()
        for i, j, v in zip(Pc.row, Pc.col, Pc.data):
            if v != 0.0:
                out.append(f"    {cols[i]:<10}  {cols[j]:<10}  {_f(v)}")

    out.append("ENDATA")
    return "\n".join(out) + "\n"


def parse_mps(text: str) -> ConcreteMIQP:
    """Parse the writer's dialect (plus LO/UP/FX bounds from other tools,
    which are materialised as extra inequality rows)."""
    section = None
    row_sense = {}
    row_order = []
    col_order = []
    col_entries = {}
    col_int = {}
    rhs = {}
    bounds = []
    qentries = []
    in_int = False
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        head = raw[:1].strip()
        token = raw.split()
        if head and token[0] in ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES",
                                 "BOUNDS", "QMATRIX", "ENDATA"):
            section = token[0]
            continue
        if section == "ROWS":
            sense, rname = token[0], token[1]
            if sense == "N":
                row_sense[rname] = "N"
            elif sense in ("E", "L", "G"):
                row_sense[rname] = sense
                row_order.append(rname)
            else:
                raise UnknownDialect(f"unsupported row sense {sense!r}")
        elif section == "COLUMNS":
            if len(token) >= 3 and token[1] == "'MARKER'":
                in_int = token[2] == "'INTORG'"
                continue
            cname = token[0]
            if cname not in col_entries:
                col_entries[cname] = []
                col_order.append(cname)
                col_int[cname] = in_int
            pairs = token[1:]
            for k in range(0, len(pairs), 2):
                col_entries[cname].append((pairs[k], float(pairs[k + 1])))
        elif section == "RHS":
            pairs = token[1:]
            for k in range(0, len(pairs), 2):
                rhs[pairs[k]] = float(pairs[k + 1])
        elif section == "BOUNDS":
            kind, _bnd, cname = token[0], token[1], token[2]
            val = float(token[3]) if len(token) > 3 else None
            bounds.append((kind, cname, val))
        elif section == "QMATRIX":
            qentries.append((token[0], token[1], float(token[2])))
        elif section == "RANGES":
            raise UnknownDialect("RANGES section is not supported")
    if section != "ENDATA":
        raise UnknownDialect("missing ENDATA")

    # Binary columns lead, preserving writer order otherwise.
    ints = [c for c in col_order if col_int[c]]
    conts = [c for c in col_order if not col_int[c]]
    order = ints + conts
    col_idx = {c: i for i, c in enumerate(order)}
    n = len(order)
    eq_rows = [r for r in row_order if row_sense[r] == "E"]
    le_rows = [r for r in row_order if row_sense[r] in ("L", "G")]
    eq_idx = {r: i for i, r in enumerate(eq_rows)}
    le_idx = {r: i for i, r in enumerate(le_rows)}

    q = np.zeros(n)
    Arows, Acols, Adata = [], [], []
    Grows, Gcols, Gdata = [], [], []
    for cname, entries in col_entries.items():
        j = col_idx[cname]
        for rname, v in entries:
            if row_sense.get(rname) == "N":
                q[j] += v
            elif row_sense.get(rname) == "E":
                Arows.append(eq_idx[rname]); Acols.append(j); Adata.append(v)
            elif row_sense.get(rname) == "L":
                Grows.append(le_idx[rname]); Gcols.append(j); Gdata.append(v)
            elif row_sense.get(rname) == "G":
                Grows.append(le_idx[rname]); Gcols.append(j); Gdata.append(-v)
            else:
                raise UnknownDialect(f"entry for undeclared row {rname!r}")
    b = np.array([rhs.get(r, 0.0) for r in eq_rows])
    h = np.array([(rhs.get(r, 0.0) if row_sense[r] == "L" else -rhs.get(r, 0.0))
                  for r in le_rows])
    obj_const = -rhs.get("OBJ", 0.0)

    extra_G, extra_h, extra_names = [], [], []
    for kind, cname, val in bounds:
        j = col_idx.get(cname)
        if j is None:
            raise UnknownDialect(f"bound for unknown column {cname!r}")
        if kind in ("FR", "MI", "PL", "BV"):
            continue
        if kind == "UP":
            extra_G.append((j, 1.0)); extra_h.append(val)
        elif kind == "LO":
            extra_G.append((j, -1.0)); extra_h.append(-val)
        elif kind == "FX":
            extra_G.append((j, 1.0)); extra_h.append(val)
            extra_G.append((j, -1.0)); extra_h.append(-val)
        else:
            raise UnknownDialect(f"unsupported bound kind {kind!r}")

    m_le = len(le_rows) + len(extra_G)
    for k, (j, v) in enumerate(extra_G):
        Grows.append(len(le_rows) + k); Gcols.append(j); Gdata.append(v)
    h = np.concatenate([h, np.asarray(extra_h, dtype=float)]) if extra_G else h

    A = sp.csr_matrix((Adata, (Arows, Acols)), shape=(len(eq_rows), n))
    G = sp.csr_matrix((Gdata, (Grows, Gcols)), shape=(m_le, n))
    P = sp.csr_matrix((n, n))
    if qentries:
        qi = [col_idx[a] for a, _, _ in qentries]
        qj = [col_idx[bn] for _, bn, _ in qentries]
        qv = [v for _, _, v in qentries]
        P = sp.csr_matrix((qv, (qi, qj)), shape=(n, n))

    var_names = {c: (i, i + 1) for i, c in enumerate(order)}
    row_names = {r: ("eq", i, i + 1) for r, i in eq_idx.items()}
    row_names.update({r: ("ineq", i, i + 1) for r, i in le_idx.items()})
    for k in range(len(extra_G)):
        row_names[f"bnd_{k}"] = ("ineq", len(le_rows) + k, len(le_rows) + k + 1)
    return ConcreteMIQP(P=P, q=q, A=A, b=b, G=G, h=h, n_I=len(ints),
                        var_names=var_names, row_names=row_names,
                        obj_const=obj_const)


def format_solution(status, x=None, objective=None, gap=None, names=None) -> str:
    lines = [f"status {status}"]
    if objective is not None:
        lines.append(f"objective {_f(objective)}")
    if gap is not None:
        lines.append(f"gap {_f(gap)}")
    if x is not None:
        for nm, v in zip(names, x):
            lines.append(f"{nm} {_f(v)}")
    return "\n".join(lines) + "\n"


def parse_solution(text: str, prob) -> Solution:
    """Parse the plain solution dialect against a problem's column names."""
    names = column_names(prob)
    idx = {nm: i for i, nm in enumerate(names)}
    status = None
    objective = np.nan
    gap = np.nan
    x = np.zeros(prob.n_z)
    seen = np.zeros(prob.n_z, dtype=bool)
    for lineno, raw in enumerate(text.splitlines()):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split()
        if len(parts) != 2:
            raise UnknownDialect(f"line {lineno + 1}: expected 'key value'")
        key, val = parts
        if key == "status":
            status = val.lower()
        elif key == "objective":
            objective = float(val)
        elif key == "gap":
            gap = float(val)
        else:
            if key not in idx:
                raise MissingVariable(f"unknown column {key!r} in solution file")
            x[idx[key]] = float(val)
            seen[idx[key]] = True
    if status is None:
        raise UnknownDialect("missing status line")
    stats = SolveStats()
    if status in ("infeasible", "unbounded"):
        return Solution(status=status, stats=stats)
    if not np.all(seen):
        missing = [names[i] for i in np.where(~seen)[0][:5]]
        stats.warnings.append(
            f"{int((~seen).sum())} columns missing from solution, defaulted to 0 "
            f"(e.g. {missing})")
    if np.isnan(objective):
        objective = prob.objective_value(x)
    nI = prob.n_I
    return Solution(status=status, primal=x, objective=objective,
                    binary_values=np.round(x[:nI]).astype(int),
                    gap=gap, stats=stats)
