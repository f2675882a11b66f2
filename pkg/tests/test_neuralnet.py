import numpy as np
import pytest

from gridlearn.neuralnet import (
    InvalidBox,
    Layer,
    ReluNetwork,
    UnsupportedActivation,
    forward,
    form_milp,
    ibp_bounds,
    load_network,
    parameter_count,
    save_network,
)
from gridlearn.optmodel import substitute_parameters
from gridlearn.solver import SolverOptions, solve


def random_net(rng, widths, scale=1.0):
    layers = []
    for i, (a, b) in enumerate(zip(widths, widths[1:])):
        act = "identity" if i == len(widths) - 2 else "relu"
        layers.append(Layer(rng.normal(size=(b, a)) * scale,
                            rng.normal(size=b) * scale, act))
    return ReluNetwork(layers)


def hand_forward(net, x):
    """Independent re-implementation used as the oracle."""
    a = list(x)
    for layer in net.layers:
        nxt = []
        for row, bias in zip(layer.weights, layer.bias):
            s = bias
            for w, xi in zip(row, a):
                s += w * xi
            nxt.append(max(s, 0.0) if layer.activation == "relu" else s)
        a = nxt
    return np.array(a)


def form_with_builder(net, box):
    from gridlearn.optmodel import ProblemBuilder

    bld = ProblemBuilder()
    enc = form_milp(net, box, builder=bld)
    return enc, bld


class TestForward:
    def test_relu_clamp(self):
        net = ReluNetwork([Layer([[1.0]], [0.0], "relu")])
        assert forward(net, [-2.0])[0] == 0.0

    def test_affine(self):
        net = ReluNetwork([Layer([[2.0]], [1.0], "relu")])
        assert forward(net, [1.0])[0] == 3.0

    def test_matches_hand_rolled(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            widths = [int(rng.integers(1, 5)) for _ in range(4)]
            net = random_net(rng, widths)
            x = rng.normal(size=widths[0])
            np.testing.assert_allclose(forward(net, x), hand_forward(net, x),
                                       atol=1e-12)

    def test_batch_and_dim_check(self):
        rng = np.random.default_rng(1)
        net = random_net(rng, [3, 4, 2])
        X = rng.normal(size=(10, 3))
        out = forward(net, X)
        assert out.shape == (10, 2)
        from gridlearn.neuralnet import DimensionMismatch

        with pytest.raises(DimensionMismatch):
            forward(net, np.zeros(5))


class TestIbp:
    def test_scalar_interval(self):
        net = ReluNetwork([Layer([[2.0]], [1.0], "relu")])
        b = ibp_bounds(net, ([-1.0], [1.0]))
        assert b.lower[0][0] == pytest.approx(-1.0)
        assert b.upper[0][0] == pytest.approx(3.0)

    def test_sign_split(self):
        net = ReluNetwork([Layer([[1.0], [-1.0]], [0.0, 0.0], "relu")])
        b = ibp_bounds(net, ([0.0], [1.0]))
        np.testing.assert_allclose(b.lower[0], [0.0, -1.0])
        np.testing.assert_allclose(b.upper[0], [1.0, 0.0])

    def test_invalid_box(self):
        net = ReluNetwork([Layer([[1.0]], [0.0], "relu")])
        with pytest.raises(InvalidBox):
            ibp_bounds(net, ([1.0], [0.0]))

    def test_monte_carlo_soundness(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            widths = [3, int(rng.integers(2, 6)), int(rng.integers(2, 6)), 1]
            net = random_net(rng, widths)
            lb, ub = -rng.uniform(0.5, 2, 3), rng.uniform(0.5, 2, 3)
            bounds = ibp_bounds(net, (lb, ub))
            X = rng.uniform(lb, ub, size=(10_000, 3))
            a = X
            for i, layer in enumerate(net.layers):
                pre = a @ layer.weights.T + layer.bias
                assert np.all(pre >= bounds.lower[i] - 1e-9)
                assert np.all(pre <= bounds.upper[i] + 1e-9)
                a = np.maximum(pre, 0.0) if layer.activation == "relu" else pre

    def test_shrinking_box_never_loosens(self):
        rng = np.random.default_rng(3)
        net = random_net(rng, [3, 5, 1])
        wide = ibp_bounds(net, (-2 * np.ones(3), 2 * np.ones(3)))
        narrow = ibp_bounds(net, (-1 * np.ones(3), 1 * np.ones(3)))
        for lw, ln in zip(wide.lower, narrow.lower):
            assert np.all(ln >= lw - 1e-12)
        for uw, un in zip(wide.upper, narrow.upper):
            assert np.all(un <= uw + 1e-12)


class TestEncoding:
    def test_identity_weight_example(self):
        net = ReluNetwork([Layer([[1.0]], [0.0], "relu")])
        enc, bld = form_with_builder(net, ([-3.0], [3.0]))
        bld.constrain(enc.input_var.expr() == np.array([-2.0]), "fix")
        bld.cost_linear(np.ones((1, 1)) @ enc.output_var.expr())
        sol = solve(substitute_parameters(bld.lower(), {}),
                    SolverOptions(abs_gap=0.0, rel_gap=0.0))
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_random_pairs_match_forward(self):
        rng = np.random.default_rng(4)
        for _ in range(15):
            widths = [2, int(rng.integers(2, 5)), 1]
            net = random_net(rng, widths)
            lb, ub = -2 * np.ones(2), 2 * np.ones(2)
            x = rng.uniform(-2, 2, size=2)
            want = forward(net, x)[0]
            for minimize in (True, False):
                enc, bld = form_with_builder(net, (lb, ub))
                bld.constrain(enc.input_var.expr() == x, "fix")
                sign = 1.0 if minimize else -1.0
                bld.cost_linear(sign * np.ones((1, 1)) @ enc.output_var.expr())
                sol = solve(substitute_parameters(bld.lower(), {}),
                            SolverOptions(abs_gap=0.0, rel_gap=0.0))
                got = sign * sol.objective
                assert got == pytest.approx(want, abs=1e-6)

    def test_stable_neurons_carry_no_binaries(self):
        # strongly positive bias makes every neuron stably active
        net = ReluNetwork([Layer(np.eye(2) * 0.1, np.array([10.0, 10.0]), "relu"),
                           Layer(np.ones((1, 2)), np.zeros(1), "identity")])
        enc = form_milp(net, (np.zeros(2), np.ones(2)))
        assert enc.binary_count == 0

    def test_binary_count_equals_unstable(self):
        rng = np.random.default_rng(5)
        net = random_net(rng, [3, 6, 4, 1])
        enc = form_milp(net, (-np.ones(3), np.ones(3)))
        b = enc.bounds
        unstable = 0
        for i, layer in enumerate(net.layers):
            if layer.activation == "relu":
                unstable += int(np.sum((b.lower[i] < 0) & (b.upper[i] > 0)))
        assert enc.binary_count == unstable
        assert enc.binary_count <= sum(net.hidden_widths)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(6)
        net = random_net(rng, [4, 7, 3, 1])
        path = tmp_path / "model.json"
        save_network(net, path)
        again = load_network(path)
        for a, b in zip(net.layers, again.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.bias, b.bias)
            assert a.activation == b.activation

    def test_parameter_count(self):
        # dense stack [9, 20, 1]: (9+1)*20 + (20+1)*1 = 221
        assert parameter_count([9, 20, 1]) == 221
        assert parameter_count([9, 1, 1]) == 12
        assert parameter_count([9, 10, 1]) == 111
        assert parameter_count([9, 10, 10, 1]) == 221

    def test_unsupported_activation(self):
        with pytest.raises(UnsupportedActivation):
            Layer([[1.0]], [0.0], "tanh")
