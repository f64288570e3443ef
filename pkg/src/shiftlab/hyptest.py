"""OLS coefficient t-tests: Student-t CDF, quantiles, and a regression report."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDimensionError, NumericalError, SingularDesignError, ValidationError

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericalError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_reg(a, b, x) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(x, dof) -> float:
    if not dof >= 1:
        raise ValidationError(f"dof must be >= 1, got {dof}")
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    tail = 0.5 * betainc_reg(dof / 2.0, 0.5, dof / (dof + x * x))
    return 1.0 - tail if x > 0 else tail


def t_two_sided(t, dof) -> float:
    """P(|T| >= |t|), computed from the tail directly to keep small p-values."""
    if math.isinf(t):
        return 0.0
    return betainc_reg(dof / 2.0, 0.5, dof / (dof + t * t))


def t_quantile(p, dof) -> float:
    """Inverse of ``t_cdf`` by bisection."""
    if not (0 < p < 1):
        raise ValidationError(f"p must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while t_cdf(lo, dof) > p:
        lo *= 2.0
    while t_cdf(hi, dof) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if t_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CoefRow:
    name: str
    coef: float
    std_err: float
    t: float
    p_two_sided: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class TTestReport:
    rows: tuple
    n: int
    k: int
    dof: int
    residual_variance: float
    degenerate: bool = False
    level: float = 0.95

    def __getitem__(self, name) -> CoefRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def table(self) -> list:
        return [
            {"name": r.name, "coef": r.coef, "std_err": r.std_err, "t": r.t,
             "P>|t|": r.p_two_sided, "[0.025": r.ci_low, "0.975]": r.ci_high}
            for r in self.rows
        ]


def ols_ttest(X, y, intercept: bool = True, names: Optional[Sequence[str]] = None,
              level: float = 0.95) -> TTestReport:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.size:
        raise InvalidDimensionError(f"X has {X.shape[0]} rows, y has {y.size}")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ValidationError("one name per column required")
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["const"] + names
    n, k = X.shape
    if n <= k:
        raise ValidationError(f"need more observations than coefficients (n={n}, k={k})")
    if np.linalg.matrix_rank(X) < k:
        raise SingularDesignError("design matrix is rank deficient (collinear regressors)")

    gram_inv = np.linalg.inv(X.T @ X)
    beta = gram_inv @ (X.T @ y)
    resid = y - X @ beta
    dof = n - k
    rss = float(resid @ resid)
    s2 = rss / dof
    degenerate = rss <= (1e-10 * max(1.0, float(np.linalg.norm(y)))) ** 2
    tq = t_quantile(0.5 + level / 2, dof)

    rows = []
    for j, name in enumerate(names):
        coef = float(beta[j])
        if degenerate:
            rows.append(CoefRow(name, coef, 0.0, math.copysign(math.inf, coef) if coef else 0.0,
                                0.0, coef, coef))
            continue
        se = math.sqrt(s2 * gram_inv[j, j])
        t = coef / se
        p = t_two_sided(t, dof)
        rows.append(CoefRow(name, coef, se, t, p, coef - tq * se, coef + tq * se))
    return TTestReport(tuple(rows), n, k, dof, s2, degenerate, level)
