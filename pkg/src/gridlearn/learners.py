"""Self-contained trainers: logistic and constrained-logistic classifiers,
small ReLU classifier networks, and ridge least squares for linear
forecasters.  Everything is plain numpy and deterministic for a given seed.

Label convention for classifiers: 1 = unstable, 0 = stable; the decision
rule flags unstable when the score w'x + b is >= 0, so a problem constrains
an operating point to the stable side with ``score <= -margin``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neuralnet import IDENTITY, RELU, Layer, ReluNetwork

__all__ = ["LinearClassifier", "AffineForecaster", "TrainConfig",
           "train_logistic", "train_constrained_logistic", "train_mlp",
           "train_mlp_regressor", "mlp_embedding",
           "fit_linear_least_squares", "SingleClass", "ArchMismatch",
           "RankDeficient"]


class SingleClass(Exception):
    pass


class ArchMismatch(Exception):
    pass


class RankDeficient(Exception):
    pass


@dataclass
class LinearClassifier:
    w: np.ndarray
    b: float

    def score(self, X):
        return np.atleast_2d(X) @ self.w + self.b

    def predict(self, X):
        """1 = flagged unstable (score >= 0)."""
        return (self.score(X) >= 0.0).astype(int)

    def to_network(self) -> ReluNetwork:
        """View as a single identity-output layer for the MIL encoder."""
        return ReluNetwork([Layer(self.w[None, :], np.array([self.b]), IDENTITY)])


@dataclass
class AffineForecaster:
    W: np.ndarray               # (n_feat, n_out)
    b: np.ndarray               # (n_out,)

    def predict(self, X):
        X = np.atleast_2d(X)
        return X @ self.W + self.b


@dataclass
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 400
    batch_size: int | None = None
    seed: int = 0
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    penalty_rounds: int = 8
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 0:
            raise ValueError("learning rate must be positive, epochs >= 0")


def _sigmoid(s):
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def _bce(s, y):
    # log(1 + e^s) - y s, computed stably
    return float(np.mean(np.maximum(s, 0) - y * s + np.log1p(np.exp(-np.abs(s)))))


def _check_two_classes(y):
    y = np.asarray(y, dtype=float).ravel()
    if np.all(y == y[0]):
        raise SingleClass("training data contains a single class")
    return y


def train_logistic(X, y, cfg: TrainConfig | None = None) -> LinearClassifier:
    """Full-batch gradient descent on the binary cross-entropy."""
    cfg = cfg or TrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_two_classes(y)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    lr = cfg.learning_rate
    loss0 = _bce(X @ w + b, y)
    for _ in range(cfg.epochs):
        s = X @ w + b
        g = _sigmoid(s) - y
        w -= lr * (X.T @ g) / n
        b -= lr * float(g.mean())
    if _bce(X @ w + b, y) > loss0 + 1e-12:
        # step too aggressive for this data; retry conservatively
        w = np.zeros(d)
        b = 0.0
        for _ in range(cfg.epochs * 2):
            s = X @ w + b
            g = _sigmoid(s) - y
            w -= 0.05 * (X.T @ g) / n
            b -= 0.05 * float(g.mean())
    return LinearClassifier(w=w, b=float(b))


def train_constrained_logistic(X, y, cfg: TrainConfig | None = None) -> LinearClassifier:
    """Logistic fit that must flag every unstable training sample.

    Minimises the cross-entropy of the stable samples subject to
    ``score >= 0`` on all unstable samples.  Solved with a squared-hinge
    penalty escalated geometrically until the constraint holds, then a bias
    shift makes feasibility exact (always possible: shifting b upward only
    raises scores).
    """
    cfg = cfg or TrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_two_classes(y)
    stable = y == 0
    unstable = ~stable
    Xs, Xu = X[stable], X[unstable]
    n_s, n_u = len(Xs), len(Xu)
    w = np.zeros(X.shape[1])
    b = 0.0
    rho = cfg.penalty_init
    lr = cfg.learning_rate
    for _ in range(cfg.penalty_rounds):
        for _ in range(cfg.epochs):
            su = Xu @ w + b
            viol = np.maximum(-su, 0.0)
            ss = Xs @ w + b
            gs = _sigmoid(ss)                       # labels 0 on stable side
            gw = (Xs.T @ gs) / n_s - 2.0 * rho * (Xu.T @ viol) / n_u
            gb = float(gs.mean()) - 2.0 * rho * float(viol.mean())
            w -= lr * gw
            b -= lr * gb
        if np.all(Xu @ w + b >= 0.0):
            break
        rho *= cfg.penalty_growth
    # exact feasibility by construction
    shortfall = float(np.min(Xu @ w + b))
    if shortfall < 0.0:
        b = b - shortfall
    return LinearClassifier(w=w, b=float(b))


def train_mlp(X, y, arch, cfg: TrainConfig | None = None) -> ReluNetwork:
    """Minibatch SGD on the cross-entropy of a small dense ReLU classifier.

    ``arch`` lists layer widths including input and the single logit output,
    e.g. ``[9, 10, 1]``.  The returned network emits the raw score (identity
    final layer) so it can be encoded as constraints directly.
    """
    cfg = cfg or TrainConfig(learning_rate=0.1, epochs=300, batch_size=64)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_two_classes(y)
    arch = [int(a) for a in arch]
    if arch[0] != X.shape[1]:
        raise ArchMismatch(f"arch input {arch[0]} vs features {X.shape[1]}")
    if arch[-1] != 1:
        raise ArchMismatch("classifier network needs a single logit output")
    rng = np.random.default_rng(cfg.seed)
    Ws, bs = [], []
    for a, bwidth in zip(arch, arch[1:]):
        Ws.append(rng.normal(size=(bwidth, a)) * np.sqrt(2.0 / a))
        bs.append(np.zeros(bwidth))
    n = len(X)
    bsz = cfg.batch_size or n
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bsz):
            idx = order[start:start + bsz]
            xb, yb = X[idx], y[idx]
            acts = [xb]
            pre = []
            a = xb
            for k, (W, bias) in enumerate(zip(Ws, bs)):
                z = a @ W.T + bias
                pre.append(z)
                a = np.maximum(z, 0.0) if k < len(Ws) - 1 else z
                acts.append(a)
            s = acts[-1][:, 0]
            delta = (_sigmoid(s) - yb)[:, None] / len(xb)
            for k in range(len(Ws) - 1, -1, -1):
                gW = delta.T @ acts[k]
                gb = delta.sum(axis=0)
                if k > 0:
                    delta = (delta @ Ws[k]) * (pre[k - 1] > 0)
                Ws[k] = Ws[k] - lr * gW
                bs[k] = bs[k] - lr * gb
    layers = []
    for k, (W, bias) in enumerate(zip(Ws, bs)):
        act = RELU if k < len(Ws) - 1 else IDENTITY
        layers.append(Layer(W, bias, act))
    return ReluNetwork(layers)


def train_mlp_regressor(X, Y, arch, cfg: TrainConfig | None = None) -> ReluNetwork:
    """Minibatch SGD on the squared error of a dense ReLU regressor.

    ``arch`` lists widths including input and output.  The last hidden
    activations serve as the learned embedding for downstream linear heads
    (see :func:`mlp_embedding`).
    """
    cfg = cfg or TrainConfig(learning_rate=0.05, epochs=200, batch_size=64)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    arch = [int(a) for a in arch]
    if arch[0] != X.shape[1] or arch[-1] != Y.shape[1]:
        raise ArchMismatch(f"arch {arch} vs data {X.shape[1]}->{Y.shape[1]}")
    rng = np.random.default_rng(cfg.seed)
    Ws = [rng.normal(size=(b, a)) * np.sqrt(2.0 / a)
          for a, b in zip(arch, arch[1:])]
    bs = [np.zeros(b) for b in arch[1:]]
    n = len(X)
    bsz = cfg.batch_size or n
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, bsz):
            idx = order[start:start + bsz]
            xb, yb = X[idx], Y[idx]
            acts, pre = [xb], []
            a = xb
            for k, (W, bias) in enumerate(zip(Ws, bs)):
                z = a @ W.T + bias
                pre.append(z)
                a = np.maximum(z, 0.0) if k < len(Ws) - 1 else z
                acts.append(a)
            delta = 2.0 * (acts[-1] - yb) / len(xb)
            for k in range(len(Ws) - 1, -1, -1):
                gW = delta.T @ acts[k]
                gb = delta.sum(axis=0)
                if k > 0:
                    delta = (delta @ Ws[k]) * (pre[k - 1] > 0)
                Ws[k] = Ws[k] - lr * gW
                bs[k] = bs[k] - lr * gb
    layers = [Layer(W, bias, RELU if k < len(Ws) - 1 else IDENTITY)
              for k, (W, bias) in enumerate(zip(Ws, bs))]
    return ReluNetwork(layers)


def mlp_embedding(net: ReluNetwork, X) -> np.ndarray:
    """Last hidden-layer activations (the learned feature map)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = X
    for layer in net.layers[:-1]:
        a = a @ layer.weights.T + layer.bias
        if layer.activation == RELU:
            a = np.maximum(a, 0.0)
    return a


def fit_linear_least_squares(X, Y, ridge: float = 0.0) -> AffineForecaster:
    """Minimise ||Y - XW - 1 b'||^2 + ridge ||W||^2 via the normal equations
    (the bias is not penalised)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) != len(Y):
        raise ValueError(f"row mismatch: {len(X)} vs {len(Y)}")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    gram = Xa.T @ Xa
    reg = np.zeros((d + 1, d + 1))
    reg[:d, :d] = ridge * np.eye(d)
    lhs = gram + reg
    if ridge == 0.0 and np.linalg.matrix_rank(gram) < d + 1:
        raise RankDeficient("Gram matrix singular; use ridge > 0")
    theta = np.linalg.solve(lhs, Xa.T @ Y)
    return AffineForecaster(W=theta[:d], b=theta[d])
