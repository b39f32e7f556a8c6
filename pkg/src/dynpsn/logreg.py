"""One-vs-rest L2-regularized logistic regression with nested-CV tuning.

Deterministic from zero initialization: damped Newton steps with Armijo
backtracking on the objective mean log-loss + l2 * ||w||^2 / 2 (bias
unpenalized), stopping at gradient norm <= 1e-6 or 1000 iterations. The
regularization strength is picked per training set by stratified inner
cross-validation over a log-spaced grid, ties going to the smaller value.
Features are standardized (zero mean, unit variance, fitted on the rows
being trained on) before optimization.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import DynpsnError
from ._rng import derive_seed
from .evaluation import stratified_folds

GRAD_TOL = 1e-6
MAX_ITER = 1000
DEFAULT_L2_GRID = tuple(10.0 ** e for e in range(-4, 5))  # 9 values, 1e-4 .. 1e4


class TrainingError(DynpsnError):
    pass


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray  # zero-variance dimensions get std 1 (no-op)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def fit_scaler(X: np.ndarray) -> Scaler:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return Scaler(mean=mean, std=std)


@dataclass
class BinaryLRModel:
    weights: np.ndarray
    bias: float
    l2: float
    target_class: str = ""
    trained: bool = False
    n_iter: int = 0
    grad_norm: float = math.inf
    objective_trace: list[float] = field(default_factory=list, repr=False)

    def scores(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(X @ self.weights + self.bias)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    z = X @ w + b
    # mean log-loss, stable: log(1+exp(-z)) for y=1, log(1+exp(z)) for y=0
    loss = np.logaddexp(0.0, np.where(y == 1, -z, z)).mean()
    return float(loss + 0.5 * l2 * (w @ w))


def _gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
              l2: float) -> tuple[np.ndarray, float]:
    p = _sigmoid(X @ w + b)
    r = (p - y) / len(y)
    return X.T @ r + l2 * w, float(r.sum())


def train_binary(X: np.ndarray, y: np.ndarray, l2: float,
                 target_class: str = "", grad_tol: float = GRAD_TOL,
                 max_iter: int = MAX_ITER) -> BinaryLRModel:
    """Fit a single binary model; X must already be standardized."""
    if l2 <= 0:
        raise TrainingError(f"l2 must be positive, got {l2}")
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2 or len(np.unique(y)) < 2:
        raise TrainingError("need at least 2 rows with both target values present")
    i, d = X.shape
    w = np.zeros(d)
    b = 0.0
    obj = _objective(w, b, X, y, l2)
    trace = [obj]
    n_iter = 0
    gnorm = math.inf
    for n_iter in range(1, max_iter + 1):
        gw, gb = _gradient(w, b, X, y, l2)
        gnorm = math.sqrt(float(gw @ gw) + gb * gb)
        if gnorm <= grad_tol:
            n_iter -= 1
            break
        # damped Newton direction on the (d+1)-dim system
        p = _sigmoid(X @ w + b)
        s = p * (1.0 - p) / i
        H = np.empty((d + 1, d + 1))
        Xs = X * s[:, None]
        H[:d, :d] = X.T @ Xs + l2 * np.eye(d)
        H[:d, d] = Xs.sum(axis=0)
        H[d, :d] = H[:d, d]
        H[d, d] = s.sum()
        g = np.append(gw, gb)
        step = None
        damp = 0.0
        for _ in range(8):
            try:
                step = np.linalg.solve(H + damp * np.eye(d + 1), g)
                break
            except np.linalg.LinAlgError:
                damp = max(damp * 10.0, 1e-10)
        if step is None or not np.all(np.isfinite(step)):
            step = g  # plain gradient step
        # Armijo backtracking keeps the objective strictly non-increasing
        alpha = 1.0
        g_dot_step = float(g @ step)
        if g_dot_step <= 0:
            step = g
            g_dot_step = float(g @ g)
        accepted = False
        for _ in range(60):
            w2 = w - alpha * step[:d]
            b2 = b - alpha * step[d]
            obj2 = _objective(w2, b2, X, y, l2)
            if obj2 <= obj - 1e-4 * alpha * g_dot_step:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break  # no further progress at float precision
        w, b, obj = w2, b2, obj2
        trace.append(obj)
    return BinaryLRModel(weights=w, bias=b, l2=l2, target_class=target_class,
                         trained=True, n_iter=n_iter, grad_norm=gnorm,
                         objective_trace=trace)


@dataclass
class OvRModel:
    classes: list[str]              # lexicographic order
    models: list[BinaryLRModel]
    scaler: Scaler
    chosen_l2: float

    def predict(self, x: np.ndarray) -> tuple[str, np.ndarray]:
        return predict(self, x)

    def predict_many(self, X: np.ndarray) -> tuple[list[str], np.ndarray]:
        Xs = self.scaler.apply(X)
        scores = np.column_stack([m.scores(Xs) for m in self.models])
        picks = [self.classes[int(np.argmax(row))] for row in scores]
        return picks, scores


def predict(model: OvRModel, x: np.ndarray) -> tuple[str, np.ndarray]:
    """Per-class sigmoid scores; argmax wins, lexicographic first on ties."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.models[0].weights.shape[0]:
        raise TrainingError("feature dimension mismatch")
    picks, scores = model.predict_many(x[None, :])
    return picks[0], scores[0]


def _fit_all_classes(X: np.ndarray, labels: list[str], classes: list[str],
                     l2: float) -> tuple[list[BinaryLRModel], Scaler]:
    scaler = fit_scaler(X)
    Xs = scaler.apply(X)
    models = []
    for cls in classes:
        y = np.array([1.0 if lab == cls else 0.0 for lab in labels])
        models.append(train_binary(Xs, y, l2, target_class=cls))
    return models, scaler


def train_ovr(X: np.ndarray, labels: list[str],
              l2_grid=DEFAULT_L2_GRID, inner_folds: int = 5,
              seed: int = 0) -> tuple[OvRModel, float]:
    """Pick l2 by stratified inner CV, then refit on the full training set."""
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainingError("need at least 2 classes")
    grid = sorted(float(v) for v in l2_grid)
    if len(grid) == 1:
        best_l2 = grid[0]
    else:
        ids = [str(i) for i in range(len(labels))]
        assignment = stratified_folds(dict(zip(ids, labels)), inner_folds,
                                      derive_seed(seed, 0x1C0F))
        fold_of = np.array([assignment.fold_of[i] for i in ids])
        best_l2 = None
        best_err = None
        for l2 in grid:
            wrong = 0
            total = 0
            for f in range(inner_folds):
                tr = fold_of != f
                va = ~tr
                models, scaler = _fit_all_classes(
                    X[tr], [labels[i] for i in np.nonzero(tr)[0]], classes, l2)
                Xv = scaler.apply(X[va])
                scores = np.column_stack([m.scores(Xv) for m in models])
                picks = [classes[int(np.argmax(row))] for row in scores]
                truth = [labels[i] for i in np.nonzero(va)[0]]
                wrong += sum(1 for p, t in zip(picks, truth) if p != t)
                total += len(truth)
            err = wrong / total
            if best_err is None or err < best_err:
                best_err, best_l2 = err, l2
    models, scaler = _fit_all_classes(X, labels, classes, best_l2)
    return OvRModel(classes=classes, models=models, scaler=scaler,
                    chosen_l2=best_l2), best_l2


# ---------------------------------------------------------------------------
# model files

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_ovr_model(model: OvRModel, path: str | Path) -> None:
    lines = [f"OVRLR v1 {len(model.classes)} {model.models[0].weights.shape[0]} "
             f"{_fmt(model.chosen_l2)}"]
    lines.append("SCALE-MEAN " + " ".join(_fmt(x) for x in model.scaler.mean))
    lines.append("SCALE-STD " + " ".join(_fmt(x) for x in model.scaler.std))
    for cls, m in zip(model.classes, model.models):
        lines.append(f"CLASS {cls} {_fmt(m.bias)} " + " ".join(_fmt(x) for x in m.weights))
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_ovr_model(path: str | Path) -> OvRModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("OVRLR v1 "):
        raise TrainingError(f"{path}: missing OVRLR v1 header")
    _, _, c, d, l2 = lines[0].split()
    c, d, l2 = int(c), int(d), float(l2)
    scaler = Scaler(mean=np.array([float(x) for x in lines[1].split()[1:]]),
                    std=np.array([float(x) for x in lines[2].split()[1:]]))
    classes = []
    models = []
    for ln in lines[3:3 + c]:
        parts = ln.split()
        classes.append(parts[1])
        models.append(BinaryLRModel(weights=np.array([float(x) for x in parts[3:]]),
                                    bias=float(parts[2]), l2=l2,
                                    target_class=parts[1], trained=True))
    return OvRModel(classes=classes, models=models, scaler=scaler, chosen_l2=l2)
