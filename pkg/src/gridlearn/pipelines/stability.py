"""Stability-constrained compilation and operation-aware metrics.

``add_stability_constraints`` splices a trained assessor into a lowered
commitment problem: per hour, the assessor sees the commitment vector and
the post-curtailment renewable injection (p.u.) and its score is forced to
``<= -margin`` (the strict-inequality surrogate for "assessed stable").
Linear classifiers become single rows; ReLU networks are encoded through
the exact MIL transform, adding one binary per unstable neuron and hour.

Metrics compare two solved operating sequences (the plain problem and the
constrained one) against the ground-truth criterion, on four regions:

    R1  truly stable,   assessed stable
    R2  truly unstable, assessed stable    (missed)
    R3  truly unstable, assessed unstable  (caught)
    R4  truly stable,   assessed unstable  (overreaction)

Constrained runs can only land in R1/R2 because the constraint enforces an
assessed-stable point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..learners import LinearClassifier
from ..neuralnet import ReluNetwork, form_milp
from ..optmodel.builder import builder_from_problem
from ..optmodel.expressions import hstack
from ..optmodel.problem import ParametricMIQP

__all__ = ["add_stability_constraints", "assign_regions", "sco_metrics",
           "MetricsReport", "InputDimMismatch", "STABILITY_MARGIN"]

STABILITY_MARGIN = 1e-3


class InputDimMismatch(Exception):
    pass


def add_stability_constraints(prob: ParametricMIQP, assessor, grid, horizon,
                              margin: float = STABILITY_MARGIN,
                              input_box=None) -> ParametricMIQP:
    """Return a new problem with one assessed-stable row block per hour.

    ``prob`` must come from ``build_uc`` (blocks "status", "curtail" and the
    "solar" parameter are linked).  The assessor input is
    ``[u_t, (solar_t - curtail_t) / base_mva]``.
    """
    ng, nr = grid.n_gen, grid.n_ren
    want = ng + nr
    in_dim = (len(assessor.w) if isinstance(assessor, LinearClassifier)
              else assessor.input_dim)
    if in_dim != want:
        raise InputDimMismatch(f"assessor expects {in_dim} inputs, grid has {want}")

    bld, vars_, params_ = builder_from_problem(prob)
    u, curt = vars_["status"], vars_["curtail"]
    solar = params_["solar"]
    scale = 1.0 / grid.base_mva
    if input_box is None:
        lo = np.zeros(want)
        hi = np.concatenate([np.ones(ng), grid.ren_capacity / grid.base_mva])
    else:
        lo, hi = (np.asarray(v, dtype=float) for v in input_box)

    for t in range(horizon):
        # re-declared blocks are flat: select hour t by explicit ranges
        u_t = u[t * ng:(t + 1) * ng]
        curt_t = curt[t * nr:(t + 1) * nr]
        inj = scale * (solar.reshaped(t, nr) - curt_t)
        if isinstance(assessor, LinearClassifier):
            wu, wr = assessor.w[:ng], assessor.w[ng:]
            score = wu[None, :] @ u_t + wr[None, :] @ inj
            bld.constrain(score <= -margin - assessor.b, f"stab[{t}]")
        elif isinstance(assessor, ReluNetwork):
            enc = form_milp(assessor, (lo, hi), builder=bld, name=f"sa{t}")
            bld.constrain(enc.input_var.expr() == hstack([u_t, inj]),
                          f"sa{t}_link")
            bld.constrain(enc.output_var.expr() <= -margin, f"stab[{t}]")
        else:
            raise TypeError(f"unsupported assessor type {type(assessor)!r}")
    return bld.lower()


def assessor_flags(assessor, U, P_pu):
    """1 where the assessor flags (u, p) unstable (score >= 0)."""
    X = np.hstack([np.atleast_2d(U).astype(float), np.atleast_2d(P_pu)])
    if isinstance(assessor, LinearClassifier):
        return (assessor.score(X) >= 0.0).astype(int)
    from ..neuralnet import forward

    return (forward(assessor, X)[:, 0] >= 0.0).astype(int)


def assign_regions(true_unstable, flagged_unstable) -> np.ndarray:
    """Map (truth, assessment) pairs to regions 1-4."""
    t = np.asarray(true_unstable).astype(bool)
    f = np.asarray(flagged_unstable).astype(bool)
    out = np.empty(len(t), dtype=int)
    out[~t & ~f] = 1
    out[t & ~f] = 2
    out[t & f] = 3
    out[~t & f] = 4
    return out


NAN_SENTINEL = float("nan")


@dataclass
class MetricsReport:
    ur_basic: float
    ur_constrained: float
    sr: float
    dr: float
    or_: float
    flags: list = field(default_factory=list)

    def as_dict(self):
        return {"UR_basic": self.ur_basic, "UR_sco": self.ur_constrained,
                "SR": self.sr, "DR": self.dr, "OR": self.or_}


def sco_metrics(basic_regions, constrained_regions, hours_per_day=24,
                daily_ur=True) -> MetricsReport:
    """Unstable / stabilisation / destabilisation / overreaction rates.

    The two region sequences must share the same hourly index set.  Unstable
    rates are evaluated per day when ``daily_ur`` (a day counts unstable if
    any of its hours is); the transition rates are always hourly.  Empty
    denominators yield NaN and a flag rather than an error.
    """
    rb = np.asarray(basic_regions)
    rc = np.asarray(constrained_regions)
    if rb.shape != rc.shape:
        raise IndexError(f"index sets differ: {rb.shape} vs {rc.shape}")
    flags = []

    basic_unstable = (rb == 2) | (rb == 3)
    constrained_unstable = rc == 2
    if daily_ur:
        if len(rb) % hours_per_day:
            flags.append("partial final day in UR aggregation")
        days = max(1, len(rb) // hours_per_day)
        bu = basic_unstable[:days * hours_per_day].reshape(days, -1).any(axis=1)
        cu = constrained_unstable[:days * hours_per_day].reshape(days, -1).any(axis=1)
        ur_basic = float(bu.mean())
        ur_constrained = float(cu.mean())
    else:
        ur_basic = float(basic_unstable.mean())
        ur_constrained = float(constrained_unstable.mean())

    n_unstable = int(basic_unstable.sum())
    if n_unstable:
        sr = float(np.sum(basic_unstable & (rc == 1)) / n_unstable)
    else:
        sr = NAN_SENTINEL
        flags.append("SR undefined: no unstable base hours")
    basic_stable = (rb == 1) | (rb == 4)
    n_stable = int(basic_stable.sum())
    if n_stable:
        dr = float(np.sum(basic_stable & (rc == 2)) / n_stable)
        or_ = float(np.sum(rb == 4) / n_stable)
    else:
        dr = NAN_SENTINEL
        or_ = NAN_SENTINEL
        flags.append("DR/OR undefined: no stable base hours")
    return MetricsReport(ur_basic=ur_basic, ur_constrained=ur_constrained,
                         sr=sr, dr=dr, or_=or_, flags=flags)
