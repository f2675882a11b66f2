"""Light-weight affine expressions over named decision variables and parameters.

An :class:`AffExpr` represents a vector-valued expression

    sum_v C_v x_v + sum_p D_p y_p + c

where ``x_v`` are decision variables and ``y_p`` are problem parameters, both
referenced by name.  Expressions support ``+``, ``-``, scalar multiplication,
left matrix multiplication and comparisons (producing :class:`Constraint`
objects).  They are deliberately dense per referenced block: individual
constraint groups are small even when the assembled problem is large.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

__all__ = ["Variable", "Parameter", "AffExpr", "Constraint", "hstack", "dot"]


class Variable:
    """Handle for a (flattened) decision variable block owned by a builder.

    Parameters
    ----------
    name : str
        Unique name within the owning builder.
    shape : tuple
        ``(n,)`` or ``(T, n)``.  2-D variables are stored row-major; ``v[t]``
        selects row ``t`` as an expression of length ``n``.
    binary : bool
        Whole block is {0,1}-valued.
    lb, ub : float or array or None
        Optional bounds, materialised as inequality rows when the problem is
        lowered to standard form.
    """

    __array_ufunc__ = None

    def __init__(self, name, shape, binary=False, lb=None, ub=None):
        if np.isscalar(shape) or isinstance(shape, np.integer):
            shape = (int(shape),)
        else:
            shape = tuple(int(s) for s in shape)
        if len(shape) not in (1, 2) or any(s <= 0 for s in shape):
            raise DimensionMismatch(f"bad variable shape {shape!r} for {name!r}")
        self.name = name
        self.shape = tuple(shape)
        self.size = int(np.prod(shape))
        self.binary = bool(binary)
        self.lb = _expand_bound(lb, self.size, name)
        self.ub = _expand_bound(ub, self.size, name)

    # -- expression interface -------------------------------------------------
    def expr(self):
        return AffExpr(self.size, {self.name: np.eye(self.size)}, {}, np.zeros(self.size))

    def __getitem__(self, t):
        if len(self.shape) == 1:
            idx = np.atleast_1d(np.arange(self.size)[t])
        else:
            n = self.shape[1]
            idx = np.arange(t * n, (t + 1) * n)
        sel = np.zeros((len(idx), self.size))
        sel[np.arange(len(idx)), idx] = 1.0
        return AffExpr(len(idx), {self.name: sel}, {}, np.zeros(len(idx)))

    def __add__(self, other):
        return self.expr() + other

    def __radd__(self, other):
        return self.expr() + other

    def __sub__(self, other):
        return self.expr() - other

    def __rsub__(self, other):
        return (-self.expr()) + other

    def __neg__(self):
        return -self.expr()

    def __mul__(self, a):
        return self.expr() * a

    def __rmul__(self, a):
        return self.expr() * a

    def __rmatmul__(self, M):
        return M @ self.expr()

    def __le__(self, other):
        return self.expr() <= other

    def __ge__(self, other):
        return self.expr() >= other

    def __eq__(self, other):  # noqa: PLW3201 - modelling sugar, not identity
        return self.expr() == other

    __hash__ = None

    def __repr__(self):
        kind = "binary" if self.binary else "continuous"
        return f"Variable({self.name!r}, shape={self.shape}, {kind})"


class Parameter:
    """Handle for a named parameter vector (a right-hand-side / cost slot)."""

    __array_ufunc__ = None

    def __init__(self, name, dim):
        if dim <= 0:
            raise DimensionMismatch(f"parameter {name!r} must have positive dim")
        self.name = name
        self.dim = int(dim)

    def expr(self):
        return AffExpr(self.dim, {}, {self.name: np.eye(self.dim)}, np.zeros(self.dim))

    def __getitem__(self, t):
        idx = np.atleast_1d(np.arange(self.dim)[t])
        sel = np.zeros((len(idx), self.dim))
        sel[np.arange(len(idx)), idx] = 1.0
        return AffExpr(len(idx), {}, {self.name: sel}, np.zeros(len(idx)))

    def reshaped(self, t, n):
        """Row ``t`` of this parameter viewed as a (T, n) row-major matrix."""
        sel = np.zeros((n, self.dim))
        sel[np.arange(n), np.arange(t * n, (t + 1) * n)] = 1.0
        return AffExpr(n, {}, {self.name: sel}, np.zeros(n))

    def __add__(self, other):
        return self.expr() + other

    def __radd__(self, other):
        return self.expr() + other

    def __sub__(self, other):
        return self.expr() - other

    def __rsub__(self, other):
        return (-self.expr()) + other

    def __neg__(self):
        return -self.expr()

    def __mul__(self, a):
        return self.expr() * a

    def __rmul__(self, a):
        return self.expr() * a

    def __rmatmul__(self, M):
        return M @ self.expr()

    def __le__(self, other):
        return self.expr() <= other

    def __ge__(self, other):
        return self.expr() >= other

    def __eq__(self, other):
        return self.expr() == other

    __hash__ = None

    def __repr__(self):
        return f"Parameter({self.name!r}, dim={self.dim})"


def _expand_bound(b, size, name):
    if b is None:
        return None
    arr = np.broadcast_to(np.asarray(b, dtype=float), (size,)).copy()
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"non-finite bound on variable {name!r}")
    return arr


def _coerce(other, m):
    """Turn scalars / arrays / handles into an AffExpr of length m (or None)."""
    if isinstance(other, AffExpr):
        return other
    if isinstance(other, (Variable, Parameter)):
        return other.expr()
    arr = np.asarray(other, dtype=float)
    if arr.ndim == 0:
        arr = np.full(m, float(arr))
    if arr.shape != (m,):
        raise DimensionMismatch(f"cannot combine length-{m} expression with shape {arr.shape}")
    return AffExpr(m, {}, {}, arr)


class AffExpr:
    """Vector affine expression; see module docstring."""

    __array_ufunc__ = None
    __slots__ = ("m", "vars", "params", "const")

    def __init__(self, m, var_coeffs, param_coeffs, const):
        self.m = int(m)
        self.vars = var_coeffs
        self.params = param_coeffs
        self.const = np.asarray(const, dtype=float)

    @staticmethod
    def constant(values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return AffExpr(values.size, {}, {}, values)

    def _zip(self, other, sign):
        other = _coerce(other, self.m)
        if other.m != self.m:
            raise DimensionMismatch(f"length mismatch {self.m} vs {other.m}")
        vs = {k: v.copy() for k, v in self.vars.items()}
        for k, v in other.vars.items():
            vs[k] = vs.get(k, 0.0) + sign * v
        ps = {k: v.copy() for k, v in self.params.items()}
        for k, v in other.params.items():
            ps[k] = ps.get(k, 0.0) + sign * v
        return AffExpr(self.m, vs, ps, self.const + sign * other.const)

    def __add__(self, other):
        return self._zip(other, +1.0)

    def __radd__(self, other):
        return self._zip(other, +1.0)

    def __sub__(self, other):
        return self._zip(other, -1.0)

    def __rsub__(self, other):
        return (-self)._zip(other, +1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim == 0:
            scale = float(a)
            return AffExpr(
                self.m,
                {k: scale * v for k, v in self.vars.items()},
                {k: scale * v for k, v in self.params.items()},
                scale * self.const,
            )
        if a.shape == (self.m,):  # elementwise, e.g. R_up * u[t]
            D = np.diag(a)
            return D @ self
        raise DimensionMismatch(f"cannot scale length-{self.m} expression by shape {a.shape}")

    def __rmul__(self, a):
        return self * a

    def __rmatmul__(self, M):
        M = np.asarray(M, dtype=float)
        if M.ndim == 1:
            M = M[None, :]
        if M.shape[1] != self.m:
            raise DimensionMismatch(f"matmul shape {M.shape} vs expression length {self.m}")
        return AffExpr(
            M.shape[0],
            {k: M @ v for k, v in self.vars.items()},
            {k: M @ v for k, v in self.params.items()},
            M @ self.const,
        )

    def sum(self):
        return np.ones(self.m) @ self

    # -- comparisons produce constraints ---------------------------------------
    def __le__(self, other):
        return Constraint(self._zip(other, -1.0), "ineq")

    def __ge__(self, other):
        return Constraint(_coerce(other, self.m)._zip(self, -1.0), "ineq")

    def __eq__(self, other):
        return Constraint(self._zip(other, -1.0), "eq")

    __hash__ = None

    def value(self, var_values=None, param_values=None):
        """Evaluate numerically from name -> vector mappings."""
        out = self.const.copy()
        for k, C in self.vars.items():
            out += C @ np.asarray(var_values[k], dtype=float).ravel()
        for k, D in self.params.items():
            out += D @ np.asarray(param_values[k], dtype=float).ravel()
        return out

    def __repr__(self):
        return (f"AffExpr(m={self.m}, vars={sorted(self.vars)}, "
                f"params={sorted(self.params)})")


class Constraint:
    """Normalised constraint ``residual <= 0`` (ineq) or ``residual == 0`` (eq)."""

    def __init__(self, residual, sense):
        if sense not in ("eq", "ineq"):
            raise ValueError(f"bad sense {sense!r}")
        self.residual = residual
        self.sense = sense

    @property
    def m(self):
        return self.residual.m

    def __repr__(self):
        op = "==" if self.sense == "eq" else "<="
        return f"Constraint({self.residual!r} {op} 0)"


def hstack(exprs):
    """Concatenate expressions/arrays/handles into one vector expression."""
    parts = []
    for e in exprs:
        if isinstance(e, (Variable, Parameter)):
            e = e.expr()
        elif not isinstance(e, AffExpr):
            e = AffExpr.constant(e)
        parts.append(e)
    m = sum(p.m for p in parts)
    vars_, params_ = {}, {}
    offset = 0
    for p in parts:
        for k, C in p.vars.items():
            blk = vars_.setdefault(k, [])
            blk.append((offset, C))
        for k, D in p.params.items():
            blk = params_.setdefault(k, [])
            blk.append((offset, D))
        offset += p.m
    const = np.concatenate([p.const for p in parts])

    def assemble(blocks, ncols):
        M = np.zeros((m, ncols))
        for off, C in blocks:
            M[off:off + C.shape[0], :] += C
        return M

    vcoef = {k: assemble(blocks, blocks[0][1].shape[1]) for k, blocks in vars_.items()}
    pcoef = {k: assemble(blocks, blocks[0][1].shape[1]) for k, blocks in params_.items()}
    return AffExpr(m, vcoef, pcoef, const)


def dot(c, x):
    """Scalar product ``c . x`` as a length-1 expression."""
    c = np.asarray(c, dtype=float).ravel()
    return c[None, :] @ (x.expr() if isinstance(x, (Variable, Parameter)) else x)
