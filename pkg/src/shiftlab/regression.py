"""Least-squares solvers for the two-block regression model.

Closed-form population weights, their small-correlation approximation (single
and multi-domain), a conditioned normal-equation solver, a full-batch Adam
path, and the L1 distance between hypotheses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergenceError, InvalidDimensionError, SingularDesignError, ValidationError
from .sem_data import MultiDomainDataset

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class Weights:
    w: np.ndarray
    ridge: bool = False
    condition: float = float("nan")

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def d(self) -> int:
        return self.w.size // 2

    @property
    def causal_block(self) -> np.ndarray:
        return self.w[: self.d]

    @property
    def spurious_block(self) -> np.ndarray:
        return self.w[self.d:]

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w


@dataclass(frozen=True)
class ClosedFormParams:
    a: float
    b: float
    c: float
    gamma: float
    p: float = 0.0
    q: float = 0.0

    @property
    def kappa(self) -> float:
        return self.a * (self.b + self.c + 2 * self.q) - self.p ** 2


def closed_form_omega(params: ClosedFormParams):
    """Population least-squares weights ``Sigma_x^{-1} Cov(x, y)`` for ``x = [z1, z2]``."""
    a, b, c, g, p, q = params.a, params.b, params.c, params.gamma, params.p, params.q
    kappa = params.kappa
    if kappa == 0:
        raise SingularDesignError("kappa = a(b + c + 2q) - p^2 is zero", condition=math.inf)
    w1 = (g * a * (c + q) - b * p - g * p ** 2 - q * p) / kappa
    w2 = a * (b + q) / kappa
    return w1, w2


def approx_omega(b, c, gamma):
    if b + c == 0:
        raise ValidationError("b + c must be positive")
    return gamma * c / (b + c), b / (b + c)


def approx_omega_multi(envs: Sequence, gamma):
    """Average of the per-domain approximate weights over ``(b_e, c_e)`` pairs."""
    envs = list(envs)
    if not envs:
        raise ValidationError("need at least one domain")
    causal, spurious = zip(*(approx_omega(b, c, 1.0) for b, c in envs))
    return gamma * math.fsum(causal) / len(envs), math.fsum(spurious) / len(envs)


def ols_fit(X, Y) -> Weights:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if n != Y.size:
        raise InvalidDimensionError(f"X has {n} rows, Y has {Y.size}")
    if n < k:
        raise SingularDesignError(f"{n} rows < {k} columns", condition=math.inf)
    gram = X.T @ X
    rhs = X.T @ Y
    cond = float(np.linalg.cond(gram))
    ridge = not (cond <= COND_LIMIT)
    if ridge:
        gram = gram + RIDGE_SCALE * np.trace(gram) / k * np.eye(k)
    try:
        w = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        raise SingularDesignError(f"normal equations singular (cond ~ {cond:.3g})", cond) from None
    if not np.all(np.isfinite(w)):
        raise SingularDesignError(f"normal equations singular (cond ~ {cond:.3g})", cond)
    return Weights(w, ridge=ridge, condition=cond)


def adam_fit(X, Y, lr=1e-3, epochs=5000, beta1=0.9, beta2=0.999, eps=1e-8) -> Weights:
    """Full-batch Adam on the mean squared error, starting from zero."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    n, k = X.shape
    # loss and gradient only need these sufficient statistics
    gram = X.T @ X / n
    xty = X.T @ Y / n
    yty = float(Y @ Y) / n
    w = np.zeros(k)
    m = np.zeros(k)
    v = np.zeros(k)
    for t in range(1, epochs + 1):
        grad = 2.0 * (gram @ w - xty)
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        w = w - lr * (m / (1 - beta1 ** t)) / (np.sqrt(v / (1 - beta2 ** t)) + eps)
        if t % 500 == 0 or t == epochs:
            loss = float(w @ gram @ w - 2 * w @ xty + yty)
            if not math.isfinite(loss):
                raise DivergenceError(f"Adam loss became non-finite at epoch {t}")
    return Weights(w)


def pooled_fit(ds: MultiDomainDataset, method: str = "normal-eq", **kwargs) -> Weights:
    if not ds.domains:
        raise ValidationError("dataset has no domains")
    X, Y = ds.stacked()
    if method == "normal-eq":
        return ols_fit(X, Y)
    if method == "gd":
        return adam_fit(X, Y, **kwargs)
    raise ValidationError(f"unknown fit method {method!r}; expected normal-eq or gd")


def fit_summary(weights: Weights, ds: MultiDomainDataset) -> dict:
    """Per-block norms and distance to the ground-truth weights."""
    truth = ds.gamma.padded()
    return {
        "causal_l2": float(np.linalg.norm(weights.causal_block)),
        "spurious_l2": float(np.linalg.norm(weights.spurious_block)),
        "spurious_mean_abs": float(np.mean(np.abs(weights.spurious_block))),
        "causal_gap_mean_abs": float(np.mean(np.abs(weights.causal_block - ds.gamma.values))),
        "dist_to_gamma": float(np.linalg.norm(weights.w - truth)),
        "ridge": weights.ridge,
    }


def default_mu_samples(dim: int, n: int = 100_000, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, dim))


def l1_distance(h, h2, mu_samples) -> float:
    """Empirical L1(mu) distance between two linear hypotheses."""
    w1 = h.w if isinstance(h, Weights) else np.asarray(h, dtype=float)
    w2 = h2.w if isinstance(h2, Weights) else np.asarray(h2, dtype=float)
    xs = np.asarray(mu_samples, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if w1.shape != w2.shape or xs.shape[1] != w1.size:
        raise InvalidDimensionError(
            f"incompatible shapes: {w1.shape}, {w2.shape}, samples {xs.shape}")
    if xs.shape[0] == 0:
        raise ValidationError("mu sample is empty")
    return math.fsum(np.abs(xs @ (w1 - w2))) / xs.shape[0]


def l1_distance_discrete(labels, labels2, mu) -> float:
    """Exact L1(mu) distance between two classifiers on a finite atom set."""
    t = np.asarray(labels, dtype=float)
    s = np.asarray(labels2, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not (t.shape == s.shape == mu.shape):
        raise InvalidDimensionError("labels and mu must have the same length")
    return math.fsum(mu * np.abs(t - s))
