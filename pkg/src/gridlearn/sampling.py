"""Training-set construction for the stability assessor.

Three generators over (commitment, post-curtailment renewable injection)
points, all labelled by the grid-strength oracle against a configured
threshold:

* ``uniform_sampling``: every nonzero commitment times an even per-plant
  injection grid;
* ``gradient_sampling``: walk each seed point along the criterion gradient
  until it crosses the threshold, emitting the crossing pair;
* ``heuristic_sampling``: flip commitments (cheapest-off unit on when
  unstable, costliest-on unit off when stable) until the label flips.

``assemble_dataset`` chains them the way the desk-scale experiments do:
seeds from operating results, commitment flips, then gradient refinement of
the union; the result is 9x the seed count before deduplication.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .grid.model import GridModel
from .grid.network import NoOnlineGenerator, gscr, gscr_gradient

__all__ = ["ScoDataset", "uniform_sampling", "gradient_sampling",
           "heuristic_sampling", "assemble_dataset", "oracle_label",
           "save_dataset", "load_dataset", "ExplosionGuard",
           "DEFAULT_STEP", "DEFAULT_MAX_STEPS"]

DEFAULT_STEP = 0.02          # p.u. gradient step
DEFAULT_MAX_STEPS = 200
EXPLOSION_LIMIT = 1_000_000


class ExplosionGuard(Exception):
    """Refusing to enumerate an astronomically large sample space."""


@dataclass
class ScoDataset:
    """Columnar sample store; injections are p.u. on the system base."""

    U: np.ndarray                 # (n, n_gen) int8 commitments
    P: np.ndarray                 # (n, n_ren) float injections
    labels: np.ndarray            # (n,) int8, 1 = unstable
    gscr_values: np.ndarray       # (n,) float (+-inf allowed)
    provenance: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    def features(self):
        return np.hstack([self.U.astype(float), self.P])

    def subset(self, idx):
        idx = np.asarray(idx)
        return ScoDataset(self.U[idx], self.P[idx], self.labels[idx],
                          self.gscr_values[idx],
                          [self.provenance[i] for i in idx])

    @staticmethod
    def concat(parts):
        return ScoDataset(
            np.vstack([p.U for p in parts]),
            np.vstack([p.P for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.gscr_values for p in parts]),
            sum((p.provenance for p in parts), []))


def oracle_label(g: GridModel, u, p, threshold):
    """(value, label): label 1 iff the criterion falls below the threshold.
    A state with no online generator is unstable by convention (-inf)."""
    try:
        val = gscr(g, np.asarray(u).astype(bool), np.asarray(p, dtype=float))
    except NoOnlineGenerator:
        val = -np.inf
    return val, int(val < threshold)


def _build(g, rows, threshold, provenance):
    U = np.array([r[0] for r in rows], dtype=np.int8)
    P = np.array([r[1] for r in rows], dtype=float)
    vals, labs = [], []
    for u, p in rows:
        v, l = oracle_label(g, u, p, threshold)
        vals.append(v)
        labs.append(l)
    return ScoDataset(U, P, np.asarray(labs, dtype=np.int8),
                      np.asarray(vals), list(provenance))


def uniform_sampling(g: GridModel, levels: int, threshold: float,
                     allow_explosion: bool = False) -> ScoDataset:
    """All nonzero commitments x an even per-plant injection grid.

    Grid values are the fractions 1/levels .. 1 of each plant capacity
    (p.u.), so every sample keeps a live inverter set.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    count = (2 ** g.n_gen - 1) * levels ** g.n_ren
    if count > EXPLOSION_LIMIT and not allow_explosion:
        raise ExplosionGuard(
            f"{count} samples requested; pass allow_explosion=True to override")
    cap = g.ren_capacity / g.base_mva
    axes = [cap[r] * np.arange(1, levels + 1) / levels for r in range(g.n_ren)]
    rows = []
    for k in range(1, 2 ** g.n_gen):
        u = np.array([(k >> i) & 1 for i in range(g.n_gen)], dtype=np.int8)
        for combo in itertools.product(*axes):
            rows.append((u, np.asarray(combo)))
    return _build(g, rows, threshold, ["uniform"] * len(rows))


def _sign(x):
    return 1.0 if x >= 0 else -1.0     # sign(0) = +1: boundary counts stable


def gradient_sampling(old: ScoDataset, g: GridModel, threshold: float,
                      step: float = DEFAULT_STEP,
                      max_steps: int = DEFAULT_MAX_STEPS) -> ScoDataset:
    """Walk injections across the threshold; emit (crossing, predecessor)
    pairs.  Exactly two samples per input: when no crossing occurs within
    the step budget the final pair is emitted anyway, tagged 'grad_nocross'.
    """
    cap = g.ren_capacity / g.base_mva
    rows, tags = [], []
    for i in range(len(old)):
        u = old.U[i]
        p = old.P[i].copy()
        val, _ = oracle_label(g, u, p, threshold)
        gamma = _sign(val - threshold)
        p_pre = p.copy()
        crossed = False
        for _ in range(max_steps):
            p_pre = p.copy()
            try:
                grad = gscr_gradient(g, u.astype(bool), p)
            except NoOnlineGenerator:
                break          # -inf everywhere in p: nothing to walk
            p = np.clip(p - gamma * step * grad, 0.0, cap)
            val, _ = oracle_label(g, u, p, threshold)
            if gamma * (val - threshold) < 0:
                crossed = True
                break
            if np.allclose(p, p_pre):
                break                   # stuck on the box boundary
        tag = "grad" if crossed else "grad_nocross"
        rows.append((u.copy(), p))
        rows.append((u.copy(), p_pre))
        tags += [tag, tag]
    return _build(g, rows, threshold, tags)


def heuristic_sampling(old: ScoDataset, g: GridModel,
                       threshold: float) -> ScoDataset:
    """Flip commitments across the threshold; emit (flipped, predecessor)
    pairs.  Ties on the fixed cost break toward the lowest generator index.
    """
    rows, tags = [], []
    cost = np.asarray(g.cost_fixed, dtype=float)
    for i in range(len(old)):
        u = old.U[i].copy()
        p = old.P[i]
        val, _ = oracle_label(g, u, p, threshold)
        gamma = _sign(val - threshold)
        u_pre = u.copy()
        crossed = False
        for _ in range(g.n_gen):
            u_pre = u.copy()
            if gamma < 0:               # unstable: switch cheapest unit on
                off = np.where(u == 0)[0]
                if len(off) == 0:
                    break
                j = off[np.argmin(cost[off])]
                u[j] = 1
            else:                       # stable: switch costliest unit off
                on = np.where(u == 1)[0]
                if len(on) == 0:
                    break
                j = on[np.argmax(cost[on])]
                u[j] = 0
            val, _ = oracle_label(g, u, p, threshold)
            if gamma * (val - threshold) < 0:
                crossed = True
                break
        tag = "heur" if crossed else "heur_nocross"
        rows.append((u.copy(), p.copy()))
        rows.append((u_pre, p.copy()))
        tags += [tag, tag]
    return _build(g, rows, threshold, tags)


def assemble_dataset(basic: ScoDataset, g: GridModel, threshold: float,
                     step: float = DEFAULT_STEP,
                     max_steps: int = DEFAULT_MAX_STEPS,
                     deduplicate: bool = True):
    """Seed + commitment flips + gradient refinement of the union.

    Returns ``(dataset, info)`` where info reports the pre-dedup size
    (9x the seed count) and how many duplicates were dropped.
    """
    if len(basic) == 0:
        raise ValueError("seed dataset is empty")
    d_u = heuristic_sampling(basic, g, threshold)
    seed_union = ScoDataset.concat([basic, d_u])
    d_up = gradient_sampling(seed_union, g, threshold, step, max_steps)
    full = ScoDataset.concat([basic, d_u, d_up])
    info = {"pre_dedup": len(full), "duplicates": 0}
    if deduplicate:
        seen = {}
        keep = []
        for i in range(len(full)):
            key = (full.U[i].tobytes(), np.round(full.P[i], 9).tobytes())
            if key not in seen:
                seen[key] = i
                keep.append(i)
        info["duplicates"] = len(full) - len(keep)
        full = full.subset(keep)
    return full, info


def save_dataset(ds: ScoDataset, path):
    ng = ds.U.shape[1]
    nr = ds.P.shape[1]
    cols = [f"u_{i}" for i in range(ng)] + [f"p_{i}" for i in range(nr)]
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(cols + ["label", "gscr", "provenance"]) + "\n")
        for i in range(len(ds)):
            parts = [str(int(v)) for v in ds.U[i]]
            parts += [repr(float(v)) for v in ds.P[i]]
            parts += [str(int(ds.labels[i])), repr(float(ds.gscr_values[i])),
                      ds.provenance[i]]
            f.write(",".join(parts) + "\n")


def load_dataset(path) -> ScoDataset:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    ng = sum(1 for c in header if c.startswith("u_"))
    nr = sum(1 for c in header if c.startswith("p_"))
    U = np.array([[int(v) for v in r[:ng]] for r in rows], dtype=np.int8)
    P = np.array([[float(v) for v in r[ng:ng + nr]] for r in rows])
    labels = np.array([int(r[ng + nr]) for r in rows], dtype=np.int8)
    vals = np.array([float(r[ng + nr + 1]) for r in rows])
    prov = [r[ng + nr + 2] for r in rows]
    return ScoDataset(U, P, labels, vals, prov)
