"""Canonical parametric problem containers and operations on them.

The canonical form is

    min_z  1/2 z' P z + (q + sum_p Qp[p] y_p)' z
    s.t.   A z  = b + sum_p Bp[p] y_p
           G z <= h + sum_p Hp[p] y_p
           z[0:n_I] in {0,1}

Parameters enter only right-hand sides and linear cost coefficients.  Binary
variables occupy the leading indices and carry explicit {0,1} rows in (G, h),
so the continuous relaxation is obtained by dropping integrality alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, MissingParameter

__all__ = [
    "ParametricMIQP",
    "ConcreteMIQP",
    "substitute_parameters",
    "validate",
    "Violation",
    "PSD_TOL",
]

PSD_TOL = 1e-9


@dataclass
class ParametricMIQP:
    """Parametric mixed-integer QP/LP in canonical standard form.

    ``var_names`` maps each variable block to its (start, stop) column range;
    ``row_names`` maps each constraint group to ("eq"|"ineq", start, stop).
    ``param_names`` maps each parameter to (slot, dim); ``Qp/Bp/Hp[slot]``
    carry that parameter's couplings.  ``binary_permutation`` records how the
    user's declaration order was reordered to make binaries contiguous.
    """

    P: sp.csr_matrix
    q: np.ndarray
    Qp: list
    A: sp.csr_matrix
    b: np.ndarray
    Bp: list
    G: sp.csr_matrix
    h: np.ndarray
    Hp: list
    n_I: int
    var_names: dict
    param_names: dict
    row_names: dict
    obj_const: float = 0.0
    binary_permutation: np.ndarray | None = None

    @property
    def n_z(self):
        return self.q.shape[0]

    @property
    def n_eq(self):
        return self.b.shape[0]

    @property
    def n_ineq(self):
        return self.h.shape[0]

    @property
    def n_params(self):
        return len(self.param_names)

    def param_dim(self, name):
        return self.param_names[name][1]

    def var_slice(self, name):
        start, stop = self.var_names[name]
        return slice(start, stop)

    def value_of(self, name, z):
        """Extract one named block from a full decision vector."""
        return np.asarray(z)[self.var_slice(name)]

    def has_quadratic(self):
        return self.P.nnz > 0

    def objective_value(self, z, param_values=None):
        z = np.asarray(z, dtype=float)
        q = self.q.copy()
        if param_values is not None:
            for name, (slot, dim) in self.param_names.items():
                y = _param_vec(param_values, name, dim)
                if self.Qp[slot] is not None:
                    q = q + self.Qp[slot] @ y
        return 0.5 * float(z @ (self.P @ z)) + float(q @ z) + self.obj_const

    def census(self):
        """Row/column bookkeeping used by diagnostics and the CLI."""
        rows = {}
        for name, (block, start, stop) in self.row_names.items():
            rows[name] = (block, stop - start)
        return {
            "n_z": self.n_z,
            "n_binary": self.n_I,
            "n_eq": self.n_eq,
            "n_ineq": self.n_ineq,
            "n_params": self.n_params,
            "variables": {k: (a, b) for k, (a, b) in self.var_names.items()},
            "parameters": dict(self.param_names),
            "rows": rows,
        }


@dataclass
class ConcreteMIQP:
    """A ParametricMIQP with every parameter slot substituted."""

    P: sp.csr_matrix
    q: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    n_I: int
    var_names: dict
    row_names: dict
    obj_const: float = 0.0
    source: ParametricMIQP | None = None
    substituted: dict = field(default_factory=dict)

    @property
    def n_z(self):
        return self.q.shape[0]

    @property
    def n_eq(self):
        return self.b.shape[0]

    @property
    def n_ineq(self):
        return self.h.shape[0]

    def var_slice(self, name):
        start, stop = self.var_names[name]
        return slice(start, stop)

    def value_of(self, name, z):
        return np.asarray(z)[self.var_slice(name)]

    def has_quadratic(self):
        return self.P.nnz > 0

    def objective_value(self, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * float(z @ (self.P @ z)) + float(self.q @ z) + self.obj_const

    def feasibility_residual(self, z):
        """Max scaled violation of equality and inequality rows."""
        z = np.asarray(z, dtype=float)
        res = 0.0
        if self.n_eq:
            res = float(np.max(np.abs(self.A @ z - self.b)))
        if self.n_ineq:
            res = max(res, float(np.max(self.G @ z - self.h)))
        return res


def _param_vec(values, name, dim):
    if name not in values:
        raise MissingParameter(f"no value supplied for parameter {name!r}")
    y = np.asarray(values[name], dtype=float).ravel()
    if y.shape != (dim,):
        raise DimensionMismatch(
            f"parameter {name!r} expects dim {dim}, got shape {y.shape}")
    return y


def substitute_parameters(prob: ParametricMIQP, values: dict) -> ConcreteMIQP:
    """Fold numeric parameter values into the right-hand sides and costs."""
    q = prob.q.copy()
    b = prob.b.copy()
    h = prob.h.copy()
    used = {}
    for name, (slot, dim) in prob.param_names.items():
        y = _param_vec(values, name, dim)
        used[name] = y
        if prob.Qp[slot] is not None:
            q += prob.Qp[slot] @ y
        if prob.Bp[slot] is not None:
            b += prob.Bp[slot] @ y
        if prob.Hp[slot] is not None:
            h += prob.Hp[slot] @ y
    return ConcreteMIQP(
        P=prob.P, q=q, A=prob.A, b=b, G=prob.G, h=h, n_I=prob.n_I,
        var_names=prob.var_names, row_names=prob.row_names,
        obj_const=prob.obj_const, source=prob, substituted=used)


def vector_from_values(prob, values: dict, default=0.0) -> np.ndarray:
    """Assemble a full decision vector from name -> block values (warm starts)."""
    z = np.full(prob.n_z, float(default))
    for name, vals in values.items():
        a0, a1 = prob.var_names[name]
        arr = np.asarray(vals, dtype=float).ravel()
        if arr.shape != (a1 - a0,):
            raise DimensionMismatch(
                f"block {name!r} expects length {a1 - a0}, got {arr.shape}")
        z[a0:a1] = arr
    return z


@dataclass
class Violation:
    code: str
    message: str
    indices: tuple = ()

    def __str__(self):
        return f"[{self.code}] {self.message}"


def _min_eigenvalue(P: sp.csr_matrix):
    n = P.shape[0]
    if P.nnz == 0:
        return 0.0
    if n <= 2000:
        return float(np.linalg.eigvalsh(P.toarray()).min())
    # Large sparse check: bound via Gershgorin first, fall back to iterative.
    d = P.diagonal()
    off = np.abs(P).sum(axis=1).A1 - np.abs(d)
    lower = float(np.min(d - off))
    if lower >= -PSD_TOL:
        return lower
    from scipy.sparse.linalg import eigsh

    try:
        return float(eigsh(P, k=1, which="SA", return_eigenvectors=False)[0])
    except Exception:
        return lower


def validate(prob: ParametricMIQP) -> list:
    """Collect every invariant violation; empty list means clean.

    Diagnostics only: never raises.
    """
    out = []
    n = prob.n_z

    sym_gap = abs(prob.P - prob.P.T)
    if sym_gap.nnz and sym_gap.max() > 1e-12:
        out.append(Violation("AsymmetricObjective", "P is not symmetric"))
    lam = _min_eigenvalue(prob.P)
    if lam < -PSD_TOL:
        out.append(Violation(
            "NonPSDObjective", f"min eigenvalue of P is {lam:.3e}", ()))

    # Binary {0,1} bound rows must exist in (G, h).
    if prob.n_I:
        G = prob.G.tocsc()
        lb_seen = np.zeros(prob.n_I, dtype=bool)
        ub_seen = np.zeros(prob.n_I, dtype=bool)
        Gcoo = prob.G.tocoo()
        rows_by_nnz = np.bincount(Gcoo.row, minlength=prob.n_ineq)
        for r, c, v in zip(Gcoo.row, Gcoo.col, Gcoo.data):
            if c >= prob.n_I or rows_by_nnz[r] != 1:
                continue
            if v == 1.0 and prob.h[r] == 1.0:
                ub_seen[c] = True
            elif v == -1.0 and prob.h[r] == 0.0:
                lb_seen[c] = True
        missing = np.where(~(lb_seen & ub_seen))[0]
        if missing.size:
            out.append(Violation(
                "MissingBinaryBounds",
                f"{missing.size} binary columns lack {{0,1}} rows",
                tuple(int(i) for i in missing)))

    # Name maps must partition the columns / rows.
    cover = np.zeros(n, dtype=int)
    for name, (a, bnd) in prob.var_names.items():
        cover[a:bnd] += 1
    bad = np.where(cover != 1)[0]
    if bad.size:
        out.append(Violation(
            "NameMapGap", f"{bad.size} columns not covered exactly once",
            tuple(int(i) for i in bad[:20])))

    for block, nrows in (("eq", prob.n_eq), ("ineq", prob.n_ineq)):
        rcover = np.zeros(nrows, dtype=int)
        for name, (blk, a, bnd) in prob.row_names.items():
            if blk == block:
                rcover[a:bnd] += 1
        bad = np.where(rcover != 1)[0]
        if bad.size:
            out.append(Violation(
                "RowMapGap", f"{bad.size} {block} rows not covered exactly once",
                tuple(int(i) for i in bad[:20])))

    slots = sorted(slot for slot, _ in prob.param_names.values())
    if slots != list(range(len(prob.param_names))):
        out.append(Violation("ParamSlotGap", "parameter slots do not partition"))
    for name, (slot, dim) in prob.param_names.items():
        for tag, blocks, nrows in (("Qp", prob.Qp, n), ("Bp", prob.Bp, prob.n_eq),
                                   ("Hp", prob.Hp, prob.n_ineq)):
            M = blocks[slot]
            if M is not None and M.shape != (nrows, dim):
                out.append(Violation(
                    "ParamDimMismatch",
                    f"{tag}[{name}] has shape {M.shape}, expected {(nrows, dim)}"))
    return out
