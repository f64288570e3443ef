"""Two-feature stand-in for the Colored-MNIST benchmark.

Each sample has a latent digit class ``z``, a noisy shape signal
``(2z - 1) + N(0, 1)``, an observed label equal to ``z`` with 25% of labels
flipped, and a binary color that disagrees with the observed label with
probability ``e``.  Small ``e`` makes color a strong but spurious shortcut.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergenceError, ValidationError
from .seeding import derive_seed

LABEL_NOISE = 0.25
SHAPE_NOISE = 1.0
CF_TOLERANCE = 0.25
TRAIN_STEPS = 2000
TRAIN_LR = 0.1


@dataclass(frozen=True)
class ColoredDomain:
    e: float
    X: np.ndarray  # columns: shape signal, color bit
    Y: np.ndarray
    # latent digit class, i.e. what a perfect shape recognizer would see
    shape_class: np.ndarray

    @property
    def n(self) -> int:
        return self.Y.size

    def with_color_flipped(self) -> "ColoredDomain":
        X = self.X.copy()
        X[:, 1] = 1 - X[:, 1]
        return ColoredDomain(self.e, X, self.Y, self.shape_class)


@dataclass(frozen=True)
class LogisticModel:
    w_shape: float
    w_color: float
    bias: float
    grad_norm: float = float("nan")

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.w_shape * X[:, 0] + self.w_color * X[:, 1] + self.bias

    def predict(self, X) -> np.ndarray:
        return (self.decision(X) > 0).astype(np.int8)

    def without_color(self) -> "LogisticModel":
        return LogisticModel(self.w_shape, 0.0, self.bias)


class ShapeOracle:
    """Predicts the latent digit class; the best any color-free model can do."""

    def predict_domain(self, domain: ColoredDomain) -> np.ndarray:
        return domain.shape_class


class ColorRule:
    """Predicts the color bit as the label."""

    def predict(self, X) -> np.ndarray:
        return np.asarray(X)[:, 1].astype(np.int8)


def gen_colored_domain(e: float, n: int, seed: int, label_noise: float = LABEL_NOISE,
                       shape_noise: float = SHAPE_NOISE) -> ColoredDomain:
    if not (0 <= e <= 1):
        raise ValidationError(f"e must lie in [0, 1], got {e}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    z = (rng.random(n) < 0.5).astype(np.int8)
    shape = (2.0 * z - 1.0) + shape_noise * rng.standard_normal(n)
    y = z ^ (rng.random(n) < label_noise).astype(np.int8)
    color = y ^ (rng.random(n) < e).astype(np.int8)
    return ColoredDomain(float(e), np.column_stack([shape, color.astype(float)]), y, z)


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def train(domains: Sequence[ColoredDomain], epochs: int = TRAIN_STEPS, lr: float = TRAIN_LR,
          seed: int = 0) -> LogisticModel:
    """Pooled logistic regression by full-batch gradient descent from zero.

    ``seed`` is accepted for interface symmetry; the fit itself is
    deterministic.
    """
    domains = list(domains)
    if not domains:
        raise ValidationError("need at least one training domain")
    X = np.vstack([d.X for d in domains])
    y = np.concatenate([d.Y for d in domains]).astype(float)
    A = np.column_stack([X, np.ones(len(y))])
    theta = np.zeros(3)
    grad = np.zeros(3)
    for _ in range(epochs):
        grad = A.T @ (_sigmoid(A @ theta) - y) / len(y)
        theta -= lr * grad
        if not np.all(np.isfinite(theta)):
            raise DivergenceError("logistic training diverged")
    return LogisticModel(*map(float, theta), grad_norm=float(np.linalg.norm(grad)))


def accuracy(pred, y) -> float:
    return float(np.mean(np.asarray(pred) == np.asarray(y)))


def eval_factual(model, domain: ColoredDomain) -> float:
    if isinstance(model, ShapeOracle):
        return accuracy(model.predict_domain(domain), domain.Y)
    return accuracy(model.predict(domain.X), domain.Y)


def eval_counterfactual(model, domain: ColoredDomain) -> float:
    """Accuracy after every color bit in the domain is flipped."""
    return eval_factual(model, domain.with_color_flipped())


def cf_report(model, domain: ColoredDomain) -> dict:
    f = eval_factual(model, domain)
    cf = eval_counterfactual(model, domain)
    gap = abs(cf - f)
    return {"e": domain.e, "factual": f, "counterfactual": cf, "gap": gap,
            "color_reliant": gap > CF_TOLERANCE}


def shift_sweep(e1_fixed: float = 0.1, e2_grid: Sequence[float] = None, e_test: float = 0.9,
                n: int = 5000, trials: int = 10, seed: int = 0) -> list:
    """Train on {e1, e2} for each grid point and trial; score on e_test and on e1.

    Trial ``t`` reuses the same seeds at every grid point, so rows are paired
    across the grid.
    """
    if e2_grid is None:
        e2_grid = default_grid()
    e2_grid = list(e2_grid)
    if not e2_grid:
        raise ValidationError("e2 grid is empty")
    rows = []
    for t in range(trials):
        test_un = gen_colored_domain(e_test, n, derive_seed(seed, t, 2))
        test_e1 = gen_colored_domain(e1_fixed, n, derive_seed(seed, t, 3))
        train_e1 = gen_colored_domain(e1_fixed, n, derive_seed(seed, t, 0))
        for e2 in e2_grid:
            train_e2 = gen_colored_domain(e2, n, derive_seed(seed, t, 1))
            model = train([train_e1, train_e2])
            un = cf_report(model, test_un)
            own = cf_report(model, test_e1)
            rows.append({
                "trial": t, "e1": e1_fixed, "e2": float(e2), "dv": abs(e2 - e1_fixed),
                "y_un": un["factual"], "y_e1": own["factual"],
                "cf_gap_un": un["gap"], "cf_gap_e1": own["gap"],
            })
    return rows


def default_grid() -> list:
    """0.2, 0.25, ..., 0.55."""
    return [round(0.2 + 0.05 * i, 10) for i in range(8)]


def binomial_band(p: float, n: int, k: float = 3.0) -> float:
    return k * math.sqrt(p * (1 - p) / n)
