import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from dynpsn.logreg import (
    BinaryLRModel,
    OvRModel,
    Scaler,
    TrainingError,
    _gradient,
    _objective,
    fit_scaler,
    predict,
    read_ovr_model,
    train_binary,
    train_ovr,
    write_ovr_model,
)


def separable_3class(per_class=10, seed=0):
    rng = np.random.default_rng(seed)
    centers = {"alpha": (0.0, 0.0), "beta": (10.0, 0.0), "gamma": (0.0, 10.0)}
    X, labels = [], []
    for lab, (cx, cy) in sorted(centers.items()):
        pts = rng.normal(scale=0.5, size=(per_class, 2)) + [cx, cy]
        X.append(pts)
        labels += [lab] * per_class
    return np.vstack(X), labels


class TestBinaryTraining:
    def test_zero_model_predicts_half(self):
        model = BinaryLRModel(weights=np.zeros(3), bias=0.0, l2=1.0)
        assert model.scores(np.array([[5.0, -2.0, 7.0]]))[0] == pytest.approx(0.5)

    def test_1d_separable_matches_scalar_minimizer(self):
        X = np.array([[-1.0], [1.0]])
        y = np.array([0.0, 1.0])
        l2 = 0.01
        model = train_binary(X, y, l2)
        # by symmetry the optimum has zero bias; solve the scalar problem
        res = minimize_scalar(lambda w: math.log1p(math.exp(-w)) + 0.5 * l2 * w * w,
                              bounds=(0, 50), method="bounded",
                              options={"xatol": 1e-10})
        assert model.weights[0] == pytest.approx(res.x, abs=1e-4)
        assert abs(model.bias) < 1e-6
        assert model.weights[0] > 0
        assert model.scores(np.array([[1.0]]))[0] > 0.9

    def test_converged_gradient_norm(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(30, 4))
        y = (rng.random(30) < 0.5).astype(float)
        y[0], y[1] = 0.0, 1.0
        model = train_binary(X, y, l2=0.5)
        assert model.grad_norm <= 1e-6
        assert model.trained

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        i, d = int(rng.integers(4, 12)), int(rng.integers(1, 6))
        X = rng.normal(size=(i, d))
        y = (rng.random(i) < 0.5).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        l2 = float(10 ** rng.uniform(-3, 1))
        gw, gb = _gradient(w, b, X, y, l2)
        g = np.append(gw, gb)
        h = 1e-6
        num = np.zeros(d + 1)
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            num[j] = (_objective(w + e, b, X, y, l2) - _objective(w - e, b, X, y, l2)) / (2 * h)
        num[d] = (_objective(w, b + h, X, y, l2) - _objective(w, b - h, X, y, l2)) / (2 * h)
        rel = np.linalg.norm(g - num) / max(np.linalg.norm(num), 1e-12)
        assert rel <= 1e-5

    @pytest.mark.parametrize("seed", range(6))
    def test_objective_monotone_decrease(self, seed):
        rng = np.random.default_rng(100 + seed)
        X = rng.normal(size=(25, 5))
        y = (X @ rng.normal(size=5) + 0.3 * rng.normal(size=25) > 0).astype(float)
        if len(np.unique(y)) < 2:
            y[0] = 1 - y[0]
        model = train_binary(X, y, l2=10 ** rng.uniform(-4, 2))
        trace = model.objective_trace
        assert all(b < a for a, b in zip(trace, trace[1:]))

    def test_l2_shrinkage_monotone(self):
        X = np.array([[-1.0], [1.0], [-0.8], [0.9]])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        norms = [abs(train_binary(X, y, l2).weights[0])
                 for l2 in (0.01, 0.02, 0.04, 0.08, 0.16, 0.32)]
        assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_degenerate_targets_rejected(self):
        with pytest.raises(TrainingError):
            train_binary(np.ones((4, 2)), np.ones(4), l2=1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(20, 3))
        y = (rng.random(20) < 0.5).astype(float)
        y[:2] = [0.0, 1.0]
        a = train_binary(X, y, l2=0.1)
        b = train_binary(X, y, l2=0.1)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


class TestOvR:
    def test_single_grid_value_equals_direct(self):
        X, labels = separable_3class()
        model, l2 = train_ovr(X, labels, l2_grid=[0.3], inner_folds=5, seed=1)
        assert l2 == 0.3
        scaler = fit_scaler(X)
        direct = train_binary(scaler.apply(X),
                              np.array([1.0 if l == "alpha" else 0.0 for l in labels]),
                              0.3)
        assert np.allclose(model.models[0].weights, direct.weights)
        assert model.models[0].bias == pytest.approx(direct.bias)

    def test_separable_picks_smallest_zero_error(self):
        X, labels = separable_3class()
        model, l2 = train_ovr(X, labels, inner_folds=5, seed=1)
        assert l2 == pytest.approx(1e-4)
        picks, _ = model.predict_many(X)
        assert picks == labels

    def test_tie_breaks_to_smaller(self):
        X, labels = separable_3class()
        _, l2 = train_ovr(X, labels, l2_grid=[2.0, 0.5], inner_folds=5, seed=1)
        assert l2 == 0.5

    def test_small_class_stratification_error(self):
        X, labels = separable_3class(per_class=4)
        from dynpsn.evaluation import StratificationError
        with pytest.raises(StratificationError):
            train_ovr(X, labels, inner_folds=5, seed=1)

    def test_class_order_lexicographic(self):
        X, labels = separable_3class()
        model, _ = train_ovr(X, labels, l2_grid=[0.1], seed=1)
        assert model.classes == ["alpha", "beta", "gamma"]


class TestPredict:
    def _zero_model(self, classes, d=2):
        scaler = Scaler(mean=np.zeros(d), std=np.ones(d))
        models = [BinaryLRModel(weights=np.zeros(d), bias=0.0, l2=1.0,
                                target_class=c, trained=True) for c in classes]
        return OvRModel(classes=classes, models=models, scaler=scaler, chosen_l2=1.0)

    def test_all_zero_ties_break_lexicographically(self):
        model = self._zero_model(["zeta", "alpha", "mid"])
        # classes list is given sorted by train_ovr; emulate that here
        model = self._zero_model(sorted(["zeta", "alpha", "mid"]))
        pick, scores = predict(model, np.array([3.0, -1.0]))
        assert pick == "alpha"
        assert np.allclose(scores, 0.5)

    def test_large_margin_wins(self):
        model = self._zero_model(["a", "b"])
        model.models[1].weights = np.array([5.0, 0.0])
        pick, _ = predict(model, np.array([2.0, 0.0]))
        assert pick == "b"

    def test_hand_computed_sigmoids(self):
        model = self._zero_model(["a", "b", "c"], d=2)
        weights = [np.array([1.0, -1.0]), np.array([0.5, 0.5]), np.array([-2.0, 0.0])]
        biases = [0.1, -0.2, 0.3]
        for m, w, b in zip(model.models, weights, biases):
            m.weights, m.bias = w, b
        x = np.array([0.7, -0.3])
        _, scores = predict(model, x)
        for j, (w, b) in enumerate(zip(weights, biases)):
            assert scores[j] == pytest.approx(1 / (1 + math.exp(-(w @ x + b))))

    def test_dimension_mismatch(self):
        model = self._zero_model(["a", "b"])
        with pytest.raises(TrainingError):
            predict(model, np.zeros(5))

    def test_argmax_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            model = self._zero_model(["a", "b", "c"], d=3)
            for m in model.models:
                m.weights = rng.normal(size=3)
                m.bias = float(rng.normal())
            x = rng.normal(size=3)
            margins = [m.weights @ x + m.bias for m in model.models]
            pick, scores = predict(model, x)
            assert int(np.argmax(margins)) == int(np.argmax(scores))


class TestModelFiles:
    def test_round_trip(self, tmp_path):
        X, labels = separable_3class()
        model, _ = train_ovr(X, labels, l2_grid=[0.2], seed=1)
        path = tmp_path / "model.txt"
        write_ovr_model(model, path)
        again = read_ovr_model(path)
        assert again.classes == model.classes
        for a, b in zip(again.models, model.models):
            assert np.array_equal(a.weights, b.weights)
            assert a.bias == b.bias
        picks1, s1 = model.predict_many(X)
        picks2, s2 = again.predict_many(X)
        assert picks1 == picks2
        assert np.array_equal(s1, s2)
