"""KL divergences (in nats) and pairwise shift matrices over domains."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidDimensionError, ValidationError


def kl_gaussian(mu1, var1, mu2, var2) -> float:
    """KL(N(mu1, var1) ; N(mu2, var2))."""
    if not (var1 > 0 and var2 > 0):
        raise ValidationError(f"variances must be positive, got {var1}, {var2}")
    return 0.5 * math.log(var2 / var1) + (var1 + (mu1 - mu2) ** 2) / (2 * var2) - 0.5


def kl_gaussian_diag(mu1, var1, mu2, var2) -> float:
    arrs = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (mu1, var1, mu2, var2)]
    if len({a.shape for a in arrs}) != 1:
        raise InvalidDimensionError("mean/variance vectors must have equal lengths")
    return math.fsum(kl_gaussian(*args) for args in zip(*arrs))


def _check_prob(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{name} is not a probability vector")
    return p


def kl_discrete(p, q) -> float:
    """KL(p ; q) on a finite set; ``inf`` when p is not absolutely continuous wrt q."""
    p = _check_prob(p, "p")
    q = _check_prob(q, "q")
    if p.shape != q.shape:
        raise InvalidDimensionError("p and q must have the same length")
    support = p > 0
    if np.any(q[support] == 0):
        return math.inf
    return math.fsum(p[support] * np.log(p[support] / q[support]))


def kl_massart(m, l1) -> float:
    """KL between two Massart-noise distributions whose Bayes classifiers are ``l1`` apart.

    Each disagreement atom contributes the Bernoulli KL between ``(1+m)/2`` and
    ``(1-m)/2``, which equals ``m * log((1+m)/(1-m))``.
    """
    if not (0 <= m < 1):
        raise ValidationError(f"margin m must lie in [0, 1), got {m}")
    if l1 < 0:
        raise ValidationError(f"L1 distance must be nonnegative, got {l1}")
    if m == 0:
        return 0.0
    return m * math.log((1 + m) / (1 - m)) * l1


def bernoulli_kl(p, q) -> float:
    out = 0.0
    for a, b in ((p, q), (1 - p, 1 - q)):
        if a > 0:
            if b == 0:
                return math.inf
            out += a * math.log(a / b)
    return out


# -- domain descriptors ------------------------------------------------------

@dataclass(frozen=True)
class GaussianDiag:
    mean: tuple
    var: tuple

    kind = "gaussian-diag"


@dataclass(frozen=True)
class Discrete:
    probs: tuple

    kind = "discrete"


@dataclass(frozen=True)
class MassartDescriptor:
    labels: tuple
    mu: tuple
    m: float

    kind = "massart"


@dataclass(frozen=True)
class ShiftReport:
    env_ids: list
    kl: np.ndarray
    alpha: float
    beta: float | None = None


def _pair_kl(p, q) -> float:
    if p.kind == "gaussian-diag":
        return kl_gaussian_diag(p.mean, p.var, q.mean, q.var)
    if p.kind == "discrete":
        return kl_discrete(p.probs, q.probs)
    if p.m != q.m or tuple(p.mu) != tuple(q.mu):
        raise ValidationError("massart domains must share the margin m and the marginal mu")
    return kl_massart(p.m, _massart_l1(p, q))


def _massart_l1(p, q) -> float:
    t, s, mu = (np.asarray(v, dtype=float) for v in (p.labels, q.labels, p.mu))
    return math.fsum(mu * np.abs(t - s))


def shift_matrix(domains: Sequence, env_ids: Sequence | None = None) -> ShiftReport:
    """Pairwise KL over ordered domain pairs and its supremum ``alpha``.

    KL is asymmetric, so both orientations of every pair enter the supremum.
    """
    domains = list(domains)
    if len(domains) < 2:
        raise ValidationError("shift matrix needs at least two domains")
    kinds = {dom.kind for dom in domains}
    if len(kinds) != 1:
        raise ValidationError(f"mixed descriptor kinds: {sorted(kinds)}")
    env_ids = list(env_ids) if env_ids is not None else list(range(1, len(domains) + 1))
    E = len(domains)
    kl = np.zeros((E, E))
    for i in range(E):
        for j in range(E):
            if i != j:
                kl[i, j] = _pair_kl(domains[i], domains[j])
    alpha = float(kl[~np.eye(E, dtype=bool)].max())
    beta = None
    if kinds == {"massart"}:
        beta = max(_massart_l1(domains[i], domains[j])
                   for i in range(E) for j in range(E) if i != j)
    return ShiftReport(env_ids, kl, alpha, beta)


def sem_descriptors(gamma, specs, marginal: str = "zc") -> list:
    """Gaussian descriptors of the generative SEM per domain.

    ``zc`` uses the first causal coordinate only; ``diag`` uses every feature
    and the response with their exact marginal variances (cross-covariances
    ignored).
    """
    g = np.asarray(gamma.values, dtype=float)
    out = []
    for s in specs:
        if marginal == "zc":
            out.append(GaussianDiag((0.0,), (s.sa ** 2,)))
        elif marginal == "diag":
            var_zc = np.full(g.size, s.sa ** 2)
            var_ze = g ** 2 * s.sa ** 2 + s.sb ** 2 + s.sc ** 2
            var_y = float(np.sum(g ** 2 * s.sa ** 2 + s.sb ** 2))
            var = tuple(np.concatenate([var_zc, var_ze, [var_y]]).tolist())
            out.append(GaussianDiag((0.0,) * len(var), var))
        else:
            raise ValidationError(f"unknown marginal {marginal!r}; expected zc or diag")
    return out
