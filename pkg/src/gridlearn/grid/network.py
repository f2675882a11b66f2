"""DC network calculations: PTDF, Kron reduction, and the grid-strength
criterion (generalised short-circuit ratio) with its analytic gradient.

The criterion value for commitment u and inverter injections p (p.u.) is
the smallest eigenvalue of diag(v^2/p) Y_red, where Y_red is the nodal
susceptance matrix after grounding buses that host an online synchronous
generator and Kron-eliminating the remaining passive buses.  The matrix is
symmetrised as D^(1/2) Y_red D^(1/2), which has the same spectrum and keeps
the eigenproblem real.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .model import GridModel

__all__ = ["ptdf", "susceptance_matrix", "reduce_admittance", "gscr",
           "gscr_gradient", "SingularSusceptance", "SingularPassiveBlock",
           "NoOnlineGenerator", "DegenerateEigenvalue", "GSCR_EPS"]

GSCR_EPS = 1e-6           # injections below this (p.u.) leave the IBR set
_EIG_GAP = 1e-8
_FD_STEP = 1e-5


class SingularSusceptance(Exception):
    pass


class SingularPassiveBlock(Exception):
    pass


class NoOnlineGenerator(Exception):
    pass


class DegenerateEigenvalue(Warning):
    """Smallest eigenvalue nearly repeated; finite differences used."""


def susceptance_matrix(g: GridModel) -> np.ndarray:
    """Nodal susceptance Laplacian B with B[i,j] = -1/x_ij off diagonal."""
    n = g.n_bus
    B = np.zeros((n, n))
    b = 1.0 / g.reactance
    for a, c, y in zip(g.line_from, g.line_to, b):
        B[a, a] += y
        B[c, c] += y
        B[a, c] -= y
        B[c, a] -= y
    return B


def ptdf(g: GridModel) -> np.ndarray:
    """Power transfer distribution factors (n_line x n_bus), slack column 0.

    Row l maps nodal injections to the MW flow on line l, positive in the
    from -> to orientation.
    """
    if np.any(g.reactance <= 0):
        raise SingularSusceptance("nonpositive reactance")
    slack = g.bus_type.index("slack")
    B = susceptance_matrix(g)
    keep = [i for i in range(g.n_bus) if i != slack]
    Bred = B[np.ix_(keep, keep)]
    Bf = np.zeros((g.n_line, g.n_bus))
    binv = 1.0 / g.reactance
    Bf[np.arange(g.n_line), g.line_from] = binv
    Bf[np.arange(g.n_line), g.line_to] = -binv
    try:
        theta = scipy.linalg.solve(Bred, np.eye(len(keep)), assume_a="sym")
    except scipy.linalg.LinAlgError as e:
        raise SingularSusceptance(str(e)) from e
    F = np.zeros((g.n_line, g.n_bus))
    F[:, keep] = Bf[:, keep] @ theta
    return F


def reduce_admittance(g: GridModel, online) -> tuple:
    """Ground online-generator buses, Kron-eliminate passive buses.

    Returns ``(Y_red, kept)``: the reduced susceptance over the renewable
    buses that were not grounded, and the indices of those renewables.
    """
    online = np.asarray(online).astype(bool)
    if online.shape != (g.n_gen,):
        raise ValueError(f"online must have shape {(g.n_gen,)}")
    if not np.any(online):
        raise NoOnlineGenerator("at least one generator must be online")
    grounded = set(g.gen_bus[online].tolist())
    kept = [r for r in range(g.n_ren) if g.ren_bus[r] not in grounded]
    ren_buses = [int(g.ren_bus[r]) for r in kept]
    B = susceptance_matrix(g)
    alive = [i for i in range(g.n_bus) if i not in grounded]
    pos = {b: k for k, b in enumerate(alive)}
    Ba = B[np.ix_(alive, alive)]
    ridx = [pos[b] for b in ren_buses]
    pidx = [k for k in range(len(alive)) if k not in set(ridx)]
    Yrr = Ba[np.ix_(ridx, ridx)]
    if pidx:
        Yrp = Ba[np.ix_(ridx, pidx)]
        Ypp = Ba[np.ix_(pidx, pidx)]
        try:
            Yred = Yrr - Yrp @ scipy.linalg.solve(Ypp, Yrp.T, assume_a="sym")
        except scipy.linalg.LinAlgError as e:
            raise SingularPassiveBlock(str(e)) from e
    else:
        Yred = Yrr.copy()
    return Yred, np.asarray(kept, dtype=int)


def _sym_matrix(Yred, p, v):
    d = np.sqrt(v * v / p)
    return (d[:, None] * Yred) * d[None, :]


def gscr(g: GridModel, online, p_ren_pu, v_ren=None) -> float:
    """Grid-strength criterion; +inf when the inverter set is empty."""
    p = np.asarray(p_ren_pu, dtype=float)
    if p.shape != (g.n_ren,):
        raise ValueError(f"p_ren_pu must have shape {(g.n_ren,)}")
    v = np.ones(g.n_ren) if v_ren is None else np.asarray(v_ren, dtype=float)
    Yred, kept = reduce_admittance(g, online)
    mask = p[kept] > GSCR_EPS
    if not np.any(mask):
        return np.inf
    Y = Yred[np.ix_(mask.nonzero()[0], mask.nonzero()[0])]
    pk = p[kept][mask]
    vk = v[kept][mask]
    S = _sym_matrix(Y, pk, vk)
    return float(scipy.linalg.eigvalsh(S)[0])


def gscr_gradient(g: GridModel, online, p_ren_pu, v_ren=None) -> np.ndarray:
    """d(criterion)/dp for every renewable (0 for entries outside the set).

    Uses the eigenvector sensitivity of the symmetrised matrix when the
    smallest eigenvalue is simple; falls back to central finite differences
    (with a DegenerateEigenvalue warning) otherwise.
    """
    p = np.asarray(p_ren_pu, dtype=float)
    v = np.ones(g.n_ren) if v_ren is None else np.asarray(v_ren, dtype=float)
    Yred, kept = reduce_admittance(g, online)
    mask = p[kept] > GSCR_EPS
    grad = np.zeros(g.n_ren)
    if not np.any(mask):
        return grad
    act = np.asarray(kept)[mask]
    Y = Yred[np.ix_(mask.nonzero()[0], mask.nonzero()[0])]
    pk, vk = p[act], v[act]
    S = _sym_matrix(Y, pk, vk)
    w, V = scipy.linalg.eigh(S)
    if len(w) > 1 and (w[1] - w[0]) <= _EIG_GAP:
        warnings.warn("smallest eigenvalue nearly repeated; using central "
                      "finite differences", DegenerateEigenvalue)
        for j, i in enumerate(act):
            hi = p.copy(); hi[i] += _FD_STEP
            lo = p.copy(); lo[i] -= _FD_STEP
            grad[i] = (gscr(g, online, hi, v_ren) - gscr(g, online, lo, v_ren)) \
                / (2 * _FD_STEP)
        return grad
    vec = V[:, 0]
    # S = D^(1/2) Y D^(1/2) with D = diag(v^2/p):
    # dS/dp_k = s_k (e_k e_k' Y D^(1/2) + D^(1/2) Y e_k e_k'), s_k = d sqrt(v^2/p)/dp
    d = np.sqrt(vk * vk / pk)
    s = -0.5 * vk / pk ** 1.5
    YD = Y * d[None, :]          # Y D^(1/2)
    t = YD @ vec                 # (Y D^(1/2)) v
    for j, i in enumerate(act):
        grad[i] = 2.0 * s[j] * vec[j] * t[j]
    return grad
