"""Declarative problem construction and lowering to the canonical form."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatch,
    NonPSDObjective,
    ParameterInQuadraticTerm,
    UndeclaredSymbol,
    UnsupportedExpression,
)
from .expressions import AffExpr, Constraint, Parameter, Variable
from .problem import PSD_TOL, ParametricMIQP

__all__ = ["ProblemBuilder", "builder_from_problem"]


class _Coo:
    """Incremental COO assembler for one sparse block."""

    def __init__(self, shape):
        self.shape = shape
        self.rows, self.cols, self.data = [], [], []

    def add_dense(self, r0, c0, M):
        rr, cc = np.nonzero(M)
        if rr.size:
            self.rows.append(rr + r0)
            self.cols.append(cc + c0)
            self.data.append(M[rr, cc])

    def add_sparse(self, r0, c0, M):
        M = M.tocoo()
        if M.nnz:
            self.rows.append(M.row + r0)
            self.cols.append(M.col + c0)
            self.data.append(M.data)

    def tocsr(self):
        if not self.rows:
            return sp.csr_matrix(self.shape)
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        data = np.concatenate(self.data)
        return sp.csr_matrix((data, (rows, cols)), shape=self.shape)


class ProblemBuilder:
    """Single-use builder: declare variables, parameters, costs and
    constraints, then :meth:`lower` once to obtain the canonical problem.

    Binary variables are reordered to the leading indices at lowering time;
    the applied permutation is recorded on the result.  Declared bounds and
    binary {0,1} boxes are materialised as explicit inequality rows so the
    continuous relaxation differs from the lowered problem by integrality
    alone.
    """

    def __init__(self):
        self._vars = {}
        self._params = {}
        self._cons = []          # (name, Constraint)
        self._lin_cost = {}      # var name -> coefficient vector
        self._quad = []          # (vi, vj, M): adds x_i' M x_j to the cost
        self._param_cost = []    # (param, var, M): adds (M y_p)' x_v
        self._obj_const = 0.0
        self._materialize = {}   # var name -> bool (add bound rows at lowering)
        self._lowered = False
        self._names_used = set()

    # -- declarations ----------------------------------------------------------
    def variable(self, name, shape, binary=False, lb=None, ub=None) -> Variable:
        if name in self._vars or name in self._params:
            raise UndeclaredSymbol(f"duplicate symbol {name!r}")
        v = Variable(name, shape, binary=binary, lb=lb, ub=ub)
        self._vars[name] = v
        self._materialize[name] = True
        return v

    def parameter(self, name, dim) -> Parameter:
        if name in self._vars or name in self._params:
            raise UndeclaredSymbol(f"duplicate symbol {name!r}")
        p = Parameter(name, dim)
        self._params[name] = p
        return p

    def variables(self):
        return dict(self._vars)

    def parameters(self):
        return dict(self._params)

    # -- constraints -----------------------------------------------------------
    def constrain(self, con: Constraint, name: str):
        if not isinstance(con, Constraint):
            raise UnsupportedExpression(f"expected a Constraint, got {type(con)!r}")
        if name in self._names_used:
            raise UndeclaredSymbol(f"duplicate constraint name {name!r}")
        self._check_symbols(con.residual)
        self._names_used.add(name)
        self._cons.append((name, con))

    def _check_symbols(self, expr: AffExpr):
        for k, C in expr.vars.items():
            if k not in self._vars:
                raise UndeclaredSymbol(f"unknown variable {k!r}")
            if C.shape[1] != self._vars[k].size:
                raise DimensionMismatch(f"coefficient width mismatch for {k!r}")
        for k, D in expr.params.items():
            if k not in self._params:
                raise UndeclaredSymbol(f"unknown parameter {k!r}")
            if D.shape[1] != self._params[k].dim:
                raise DimensionMismatch(f"coefficient width mismatch for parameter {k!r}")

    # -- objective ----------------------------------------------------------------
    def cost_linear(self, expr):
        """Add a scalar linear cost term (vector expressions are summed).

        Parameters may not appear additively in the cost; couple them through
        :meth:`cost_parametric` instead.
        """
        if isinstance(expr, (Variable, Parameter)):
            expr = expr.expr()
        if expr.m != 1:
            expr = expr.sum()
        if expr.params:
            raise UnsupportedExpression(
                "parameters enter the objective only through cost_parametric()")
        self._check_symbols(expr)
        for k, C in expr.vars.items():
            self._lin_cost[k] = self._lin_cost.get(k, 0.0) + C[0]
        self._obj_const += float(expr.const[0])

    def cost_quadratic(self, vi, vj, M):
        """Add the cost term ``x_i' M x_j`` exactly."""
        for v in (vi, vj):
            if isinstance(v, Parameter):
                raise ParameterInQuadraticTerm(
                    f"parameter {v.name!r} cannot multiply a decision variable "
                    "in a quadratic cost term")
            if not isinstance(v, Variable):
                raise UnsupportedExpression("quadratic terms take Variable handles")
            if v.name not in self._vars:
                raise UndeclaredSymbol(f"unknown variable {v.name!r}")
        M = np.broadcast_to(np.asarray(M, dtype=float), (vi.size, vj.size)).copy()
        self._quad.append((vi, vj, M))

    def cost_parametric(self, param, var, M):
        """Add the cost term ``(M y_p)' x_v`` (parameter-dependent linear cost)."""
        if not isinstance(param, Parameter):
            raise UnsupportedExpression("first argument must be a Parameter")
        if not isinstance(var, Variable):
            raise UnsupportedExpression("second argument must be a Variable")
        if param.name not in self._params or var.name not in self._vars:
            raise UndeclaredSymbol("cost_parametric references unknown symbols")
        M = np.asarray(M, dtype=float)
        if M.shape != (var.size, param.dim):
            raise DimensionMismatch(
                f"expected shape {(var.size, param.dim)}, got {M.shape}")
        self._param_cost.append((param, var, M))

    # -- lowering -------------------------------------------------------------------
    def lower(self, check_psd=True) -> ParametricMIQP:
        if self._lowered:
            raise UnsupportedExpression("builder is single-use; already lowered")
        self._lowered = True

        order = [v for v in self._vars.values() if v.binary]
        n_I = sum(v.size for v in order)
        order += [v for v in self._vars.values() if not v.binary]
        var_names, offsets = {}, {}
        pos = 0
        for v in order:
            var_names[v.name] = (pos, pos + v.size)
            offsets[v.name] = pos
            pos += v.size
        n_z = pos
        perm = np.empty(n_z, dtype=int)
        dpos = 0
        for v in self._vars.values():
            perm[dpos:dpos + v.size] = np.arange(offsets[v.name], offsets[v.name] + v.size)
            dpos += v.size

        param_names = {p.name: (slot, p.dim)
                       for slot, p in enumerate(self._params.values())}
        n_p = len(param_names)

        eq_rows, ineq_rows = [], []
        for name, con in self._cons:
            (eq_rows if con.sense == "eq" else ineq_rows).append((name, con.residual))
        for v in self._vars.values():
            if not self._materialize[v.name]:
                continue
            if v.binary:
                lo = np.zeros(v.size) if v.lb is None else np.maximum(v.lb, 0.0)
                hi = np.ones(v.size) if v.ub is None else np.minimum(v.ub, 1.0)
                ineq_rows.append((f"{v.name}[lb]", (-1.0) * v.expr() + lo))
                ineq_rows.append((f"{v.name}[ub]", v.expr() - hi))
            else:
                if v.lb is not None:
                    ineq_rows.append((f"{v.name}[lb]", (-1.0) * v.expr() + v.lb))
                if v.ub is not None:
                    ineq_rows.append((f"{v.name}[ub]", v.expr() - v.ub))

        # Residual convention: C x + D y + c (<=|==) 0, i.e. C x (<=|==) -D y - c.
        def stack(rows):
            total = sum(e.m for _, e in rows)
            M = _Coo((total, n_z))
            rhs = np.zeros(total)
            pblocks = {name: _Coo((total, dim))
                       for name, (_, dim) in param_names.items()}
            names = {}
            r = 0
            for name, e in rows:
                names[name] = (r, r + e.m)
                for k, C in e.vars.items():
                    M.add_dense(r, offsets[k], C)
                for k, D in e.params.items():
                    pblocks[k].add_dense(r, 0, -D)
                rhs[r:r + e.m] = -e.const
                r += e.m
            return M.tocsr(), rhs, pblocks, names

        A, b, Bp_by_name, eq_names = stack(eq_rows)
        G, h, Hp_by_name, ineq_names = stack(ineq_rows)

        def pack(by_name):
            out = [None] * n_p
            for name, (slot, dim) in param_names.items():
                out[slot] = by_name[name].tocsr()
            return out

        Bp, Hp = pack(Bp_by_name), pack(Hp_by_name)

        q = np.zeros(n_z)
        for k, row in self._lin_cost.items():
            q[offsets[k]:offsets[k] + len(row)] += row
        Pcoo = _Coo((n_z, n_z))
        for vi, vj, M in self._quad:
            oi, oj = offsets[vi.name], offsets[vj.name]
            Pcoo.add_dense(oi, oj, M)
            Pcoo.add_dense(oj, oi, M.T)
        Pmat = Pcoo.tocsr()
        Qp = []
        for name, (slot, dim) in sorted(param_names.items(), key=lambda kv: kv[1][0]):
            Qp.append(_Coo((n_z, dim)))
        for p, v, M in self._param_cost:
            slot = param_names[p.name][0]
            Qp[slot].add_dense(offsets[v.name], 0, M)
        Qp = [c.tocsr() for c in Qp]

        if check_psd and Pmat.nnz and Pmat.shape[0] <= 2000:
            lam = float(np.linalg.eigvalsh(Pmat.toarray()).min())
            if lam < -PSD_TOL:
                raise NonPSDObjective(f"min eigenvalue of P = {lam:.3e}")

        row_names = {}
        for name, (a0, a1) in eq_names.items():
            row_names[name] = ("eq", a0, a1)
        for name, (a0, a1) in ineq_names.items():
            row_names[name] = ("ineq", a0, a1)

        return ParametricMIQP(
            P=Pmat, q=q, Qp=Qp, A=A, b=b, Bp=Bp, G=G, h=h, Hp=Hp,
            n_I=n_I, var_names=var_names, param_names=param_names,
            row_names=row_names, obj_const=self._obj_const,
            binary_permutation=perm)


def builder_from_problem(prob: ParametricMIQP):
    """Reconstruct a builder whose lowering reproduces ``prob`` exactly.

    Existing rows (including the materialised bound rows) are re-added as
    opaque constraint blocks, so the redeclared variables must not contribute
    fresh bound rows.  Returns ``(builder, vars, params)`` keyed by name.
    """
    bld = ProblemBuilder()
    vars_, params_ = {}, {}
    for name, (a0, a1) in sorted(prob.var_names.items(), key=lambda kv: kv[1][0]):
        vars_[name] = bld.variable(name, a1 - a0, binary=a1 <= prob.n_I)
        bld._materialize[name] = False
    for name, (slot, dim) in sorted(prob.param_names.items(), key=lambda kv: kv[1][0]):
        params_[name] = bld.parameter(name, dim)

    def expr_for(a0, a1, is_eq):
        n = a1 - a0
        M = (prob.A if is_eq else prob.G)[a0:a1]
        coeffs = {}
        for name, (c0, c1) in prob.var_names.items():
            sub = M[:, c0:c1]
            if sub.nnz:
                coeffs[name] = sub.toarray()
        pcoeffs = {}
        rhs = (prob.b if is_eq else prob.h)[a0:a1]
        for name, (slot, dim) in prob.param_names.items():
            sub = (prob.Bp if is_eq else prob.Hp)[slot][a0:a1]
            if sub.nnz:
                pcoeffs[name] = -sub.toarray()
        return AffExpr(n, coeffs, pcoeffs, -rhs)

    for name, (block, a0, a1) in sorted(
            prob.row_names.items(), key=lambda kv: (kv[1][0], kv[1][1])):
        bld.constrain(Constraint(expr_for(a0, a1, block == "eq"), block), name)

    for name, (c0, c1) in prob.var_names.items():
        seg = prob.q[c0:c1]
        if np.any(seg):
            bld._lin_cost[name] = seg.copy()
    bld._obj_const = prob.obj_const
    if prob.P.nnz:
        for ni, (i0, i1) in prob.var_names.items():
            for nj, (j0, j1) in prob.var_names.items():
                if j0 < i0:
                    continue
                blk = prob.P[i0:i1, j0:j1]
                if blk.nnz:
                    M = blk.toarray()
                    if ni == nj:
                        bld._quad.append((vars_[ni], vars_[nj], 0.5 * M))
                    else:
                        bld._quad.append((vars_[ni], vars_[nj], M))
    for name, (slot, dim) in prob.param_names.items():
        Q = prob.Qp[slot]
        if Q is not None and Q.nnz:
            for nv, (c0, c1) in prob.var_names.items():
                sub = Q[c0:c1]
                if sub.nnz:
                    bld._param_cost.append((params_[name], vars_[nv], sub.toarray()))
    return bld, vars_, params_
