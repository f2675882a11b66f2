"""Piecewise-linear ReLU networks: evaluation, interval bounds, and the
exact mixed-integer-linear constraint encoding.

The encoding introduces, for every unstable neuron of a ReLU layer, one
binary v and four rows

    a >= W x + b        (written on the post-activation variable a)
    a >= 0
    a <= u * v
    W x + b >= a + (1 - v) * l

with (l, u) pre-activation bounds from interval bound propagation over the
declared input box.  Neurons whose sign is certain are linearised without a
binary, which is what keeps compiled problems small.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .optmodel.builder import ProblemBuilder
from .optmodel.expressions import Variable

__all__ = ["Layer", "ReluNetwork", "LayerBounds", "forward", "ibp_bounds",
           "form_milp", "save_network", "load_network", "parameter_count",
           "DimensionMismatch", "InvalidBox", "UnboundedBox",
           "UnsupportedActivation", "NetworkEncoding"]

RELU = "relu"
IDENTITY = "identity"


class DimensionMismatch(Exception):
    pass


class InvalidBox(Exception):
    pass


class UnboundedBox(Exception):
    pass


class UnsupportedActivation(Exception):
    pass


@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        self.bias = np.atleast_1d(np.asarray(self.bias, dtype=float))
        if self.weights.shape[0] != self.bias.shape[0]:
            raise DimensionMismatch(
                f"bias length {self.bias.shape[0]} vs {self.weights.shape[0]} rows")
        if self.activation not in (RELU, IDENTITY):
            raise UnsupportedActivation(self.activation)

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]


@dataclass
class ReluNetwork:
    """Feed-forward stack of linear layers with relu/identity activations."""

    layers: list

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise DimensionMismatch(
                    f"layer widths do not chain: {a.n_out} -> {b.n_in}")

    @property
    def input_dim(self):
        return self.layers[0].n_in

    @property
    def output_dim(self):
        return self.layers[-1].n_out

    @property
    def hidden_widths(self):
        return [l.n_out for l in self.layers if l.activation == RELU]

    def __call__(self, x):
        return forward(self, x)


def forward(net: ReluNetwork, x) -> np.ndarray:
    """Exact layer-by-layer evaluation.  Accepts a single vector or a
    (batch, input_dim) matrix."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != net.input_dim:
        raise DimensionMismatch(
            f"input dim {a.shape[1]}, network expects {net.input_dim}")
    for layer in net.layers:
        a = a @ layer.weights.T + layer.bias
        if layer.activation == RELU:
            a = np.maximum(a, 0.0)
    return a[0] if single else a


@dataclass
class LayerBounds:
    """Pre-activation lower/upper bounds per layer, sound over the input box."""

    input_lb: np.ndarray
    input_ub: np.ndarray
    lower: list
    upper: list


def ibp_bounds(net: ReluNetwork, box) -> LayerBounds:
    """Interval bound propagation with the positive/negative weight split."""
    lb, ub = (np.atleast_1d(np.asarray(v, dtype=float)) for v in box)
    if lb.shape != (net.input_dim,) or ub.shape != (net.input_dim,):
        raise InvalidBox(f"box shapes {lb.shape}/{ub.shape} vs input dim {net.input_dim}")
    if np.any(lb > ub):
        raise InvalidBox("lower bound exceeds upper bound")
    lower, upper = [], []
    lo, hi = lb, ub
    for layer in net.layers:
        Wp = np.maximum(layer.weights, 0.0)
        Wn = np.minimum(layer.weights, 0.0)
        pre_lo = Wp @ lo + Wn @ hi + layer.bias
        pre_hi = Wp @ hi + Wn @ lo + layer.bias
        lower.append(pre_lo)
        upper.append(pre_hi)
        if layer.activation == RELU:
            lo, hi = np.maximum(pre_lo, 0.0), np.maximum(pre_hi, 0.0)
        else:
            lo, hi = pre_lo, pre_hi
    return LayerBounds(input_lb=lb, input_ub=ub, lower=lower, upper=upper)


@dataclass
class NetworkEncoding:
    """Handles of one encoded network inside a builder."""

    input_var: Variable
    output_var: Variable
    binaries: list          # binary Variable handles, one per relu layer (or None)
    binary_count: int
    bounds: LayerBounds


def form_milp(net: ReluNetwork, box, builder: ProblemBuilder | None = None,
              name: str = "nn") -> NetworkEncoding:
    """Emit the exact MIL encoding of ``net`` over ``box`` into ``builder``.

    Returns handles to the input and output variable blocks so callers can
    link them to other variables or parameters with equality rows.  A fresh
    builder is created when none is given (standalone use).
    """
    bounds = ibp_bounds(net, box)
    for lo, hi in zip(bounds.lower, bounds.upper):
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UnboundedBox("IBP produced non-finite bounds")
    bld = builder if builder is not None else ProblemBuilder()

    x = bld.variable(f"{name}_in", net.input_dim)
    current = x
    binaries = []
    n_bin = 0
    for i, layer in enumerate(net.layers):
        W, b = layer.weights, layer.bias
        lo, hi = bounds.lower[i], bounds.upper[i]
        out = bld.variable(f"{name}_a{i}", layer.n_out)
        pre = W @ current.expr() + b
        if layer.activation == IDENTITY:
            bld.constrain(out.expr() == pre, f"{name}_eq{i}")
            binaries.append(None)
        else:
            stable_on = lo >= 0.0
            stable_off = hi <= 0.0
            unstable = ~(stable_on | stable_off)
            k = int(unstable.sum())
            if np.any(stable_on):
                sel = np.eye(layer.n_out)[stable_on]
                bld.constrain(sel @ out.expr() == sel @ pre, f"{name}_on{i}")
            if np.any(stable_off):
                sel = np.eye(layer.n_out)[stable_off]
                bld.constrain(sel @ out.expr() == np.zeros(int(stable_off.sum())),
                              f"{name}_off{i}")
            if k:
                v = bld.variable(f"{name}_v{i}", k, binary=True)
                sel = np.eye(layer.n_out)[unstable]
                spre = sel @ pre
                sout = sel @ out.expr()
                bld.constrain(sout >= spre, f"{name}_ge_pre{i}")
                bld.constrain(sout >= np.zeros(k), f"{name}_ge0{i}")
                bld.constrain(sout - np.diag(hi[unstable]) @ v.expr()
                              <= np.zeros(k), f"{name}_ub{i}")
                # W x + b >= a + (1 - v) l   <=>   a - pre - l*v <= -l
                bld.constrain(sout - spre - np.diag(lo[unstable]) @ v.expr()
                              <= -lo[unstable], f"{name}_tight{i}")
                binaries.append(v)
                n_bin += k
            else:
                binaries.append(None)
        current = out
    return NetworkEncoding(input_var=x, output_var=current, binaries=binaries,
                           binary_count=n_bin, bounds=bounds)


def parameter_count(widths) -> int:
    """Trainable parameters of a dense stack with the given layer widths."""
    return int(sum((a + 1) * b for a, b in zip(widths, widths[1:])))


def save_network(net: ReluNetwork, path):
    """Write the documented structured-text model file (bit-exact floats)."""
    doc = {"layers": [{"weights": l.weights.tolist(),
                       "bias": l.bias.tolist(),
                       "activation": l.activation} for l in net.layers]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_network(path) -> ReluNetwork:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    layers = [Layer(np.asarray(l["weights"], dtype=float),
                    np.asarray(l["bias"], dtype=float),
                    l.get("activation", RELU)) for l in doc["layers"]]
    return ReluNetwork(layers)
