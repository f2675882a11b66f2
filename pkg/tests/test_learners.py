import numpy as np
import pytest

from gridlearn.learners import (
    ArchMismatch,
    RankDeficient,
    SingleClass,
    TrainConfig,
    fit_linear_least_squares,
    train_constrained_logistic,
    train_logistic,
    train_mlp,
)
from gridlearn.neuralnet import forward


def separable_1d(n=60, seed=0):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-2, -0.2, n // 2)       # stable below 0
    xu = rng.uniform(1.0, 3.0, n // 2)       # unstable above 1
    X = np.concatenate([xs, xu])[:, None]
    y = np.concatenate([np.zeros(n // 2), np.ones(n // 2)])
    return X, y


def overlapping_1d(n=120, seed=1):
    rng = np.random.default_rng(seed)
    xs = rng.normal(0.0, 1.0, n // 2)
    xu = rng.normal(1.0, 1.0, n // 2)
    X = np.concatenate([xs, xu])[:, None]
    y = np.concatenate([np.zeros(n // 2), np.ones(n // 2)])
    return X, y


class TestLogistic:
    def test_separable_reaches_full_accuracy(self):
        X, y = separable_1d()
        clf = train_logistic(X, y, TrainConfig(epochs=800))
        assert np.mean(clf.predict(X).ravel() == y) == 1.0

    def test_constant_features_predict_prior(self):
        X = np.ones((40, 1))
        y = np.concatenate([np.zeros(10), np.ones(30)])
        clf = train_logistic(X, y, TrainConfig(epochs=3000, learning_rate=1.0))
        from gridlearn.learners import _sigmoid

        p = _sigmoid(clf.score(X))[0]
        assert p == pytest.approx(0.75, abs=0.01)

    def test_symmetric_data_zero_bias(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0.3, 2.0, 50)
        X = np.concatenate([x, -x])[:, None]
        y = np.concatenate([np.ones(50), np.zeros(50)])
        clf = train_logistic(X, y)
        assert abs(clf.b) <= 1e-3

    def test_single_class_raises(self):
        with pytest.raises(SingleClass):
            train_logistic(np.ones((5, 1)), np.ones(5))

    def test_determinism(self):
        X, y = overlapping_1d()
        c1 = train_logistic(X, y)
        c2 = train_logistic(X, y)
        np.testing.assert_array_equal(c1.w, c2.w)
        assert c1.b == c2.b


class TestConstrainedLogistic:
    def test_zero_false_negatives_on_overlap(self):
        X, y = overlapping_1d()
        clf = train_constrained_logistic(X, y)
        assert np.all(clf.score(X[y == 1]) >= 0.0)        # exact guarantee
        # overlapping classes force at least one stable false positive
        assert np.any(clf.score(X[y == 0]) >= 0.0)

    def test_separable_matches_unconstrained_behaviour(self):
        X, y = separable_1d()
        c_free = train_logistic(X, y, TrainConfig(epochs=800))
        c_hard = train_constrained_logistic(X, y, TrainConfig(epochs=800))
        assert np.mean(c_free.predict(X).ravel() == y) == 1.0
        assert np.mean(c_hard.predict(X).ravel() == y) == 1.0

    def test_conservatism_ordering(self):
        X, y = overlapping_1d()
        c_free = train_logistic(X, y)
        c_hard = train_constrained_logistic(X, y)
        fpr_free = np.mean(c_free.predict(X[y == 0]) == 1)
        fpr_hard = np.mean(c_hard.predict(X[y == 0]) == 1)
        assert fpr_hard >= fpr_free

    def test_degenerate_geometry_still_feasible(self):
        # unstable sample strictly inside the stable cloud: only a large
        # bias shift can satisfy the constraint
        X = np.array([[0.0], [1.0], [-1.0], [0.1]])
        y = np.array([1.0, 0.0, 0.0, 0.0])
        clf = train_constrained_logistic(X, y)
        assert np.all(clf.score(X[y == 1]) >= 0.0)


class TestMlp:
    def test_xor_capacity(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, size=(200, 2))
        y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float)
        net = train_mlp(X, y, [2, 4, 1],
                        TrainConfig(learning_rate=0.6, epochs=800,
                                    batch_size=50, seed=11))
        pred = (forward(net, X)[:, 0] >= 0).astype(float)
        assert np.mean(pred == y) >= 0.95

    def test_zero_epochs_returns_init(self):
        X, y = separable_1d()
        n1 = train_mlp(X, y, [1, 3, 1], TrainConfig(epochs=0, seed=5))
        n2 = train_mlp(X, y, [1, 3, 1], TrainConfig(epochs=0, seed=5))
        for a, b in zip(n1.layers, n2.layers):
            np.testing.assert_array_equal(a.weights, b.weights)

    def test_arch_mismatch(self):
        X, y = separable_1d()
        with pytest.raises(ArchMismatch):
            train_mlp(X, y, [3, 4, 1])

    def test_determinism(self):
        X, y = overlapping_1d()
        n1 = train_mlp(X, y, [1, 4, 1], TrainConfig(seed=7, epochs=50))
        n2 = train_mlp(X, y, [1, 4, 1], TrainConfig(seed=7, epochs=50))
        for a, b in zip(n1.layers, n2.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.bias, b.bias)


class TestLeastSquares:
    def test_exact_affine_fit(self):
        X = np.linspace(-3, 3, 40)[:, None]
        Y = 2.0 * X + 1.0
        f = fit_linear_least_squares(X, Y)
        assert f.W[0, 0] == pytest.approx(2.0, abs=1e-10)
        assert f.b[0] == pytest.approx(1.0, abs=1e-10)

    def test_huge_ridge_shrinks_to_mean(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 3))
        Y = rng.normal(size=(50, 2)) + 5.0
        f = fit_linear_least_squares(X, Y, ridge=1e12)
        assert np.max(np.abs(f.W)) < 1e-6
        np.testing.assert_allclose(f.b, Y.mean(axis=0), atol=1e-4)

    def test_matches_pinv_oracle(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(80, 4))
        Y = rng.normal(size=(80, 3))
        f = fit_linear_least_squares(X, Y)
        Xa = np.hstack([X, np.ones((80, 1))])
        theta = np.linalg.pinv(Xa) @ Y
        np.testing.assert_allclose(np.vstack([f.W, f.b]), theta, atol=1e-8)

    def test_normal_equation_residual(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(30, 3))
        Y = rng.normal(size=(30, 1))
        f = fit_linear_least_squares(X, Y, ridge=0.5)
        Xa = np.hstack([X, np.ones((30, 1))])
        reg = np.diag([0.5, 0.5, 0.5, 0.0])
        theta = np.vstack([f.W, f.b])
        res = (Xa.T @ Xa + reg) @ theta - Xa.T @ Y
        assert np.max(np.abs(res)) <= 1e-8

    def test_rank_deficient(self):
        X = np.zeros((10, 2))
        with pytest.raises(RankDeficient):
            fit_linear_least_squares(X, np.ones(10))
