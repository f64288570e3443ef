"""Fano/Hoeffding bound arithmetic for the clean and Massart-noise cases.

All logarithms are natural.  Infeasible inputs still produce a report (with
``feasible=False``) so that sweeps can trace the feasibility frontier.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from decimal import Decimal

from .errors import ValidationError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class BoundReport:
    sigma: float
    rhs: float
    feasible: bool
    condition_slack: float
    min_E: int

    def as_row(self) -> dict:
        return asdict(self)


def _check_E(E):
    if E < 3:
        raise ValidationError(f"E must be >= 3, got {E}")


def _check_delta(delta):
    if not (0 < delta < 1):
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")


def _check_alpha(alpha):
    if not (alpha >= 0) or math.isinf(alpha):
        raise ValidationError(f"alpha must be finite and >= 0, got {alpha}")


def hoeffding_term(E, delta) -> float:
    return math.sqrt(math.log(1.0 / delta) / (2 * E))


def sigma_t1(alpha, E) -> float:
    _check_E(E)
    _check_alpha(alpha)
    return (alpha + LN2) / math.log(E - 1)


def max_alpha(E) -> float:
    """Largest KL radius for which the clean-case bound applies."""
    return math.log((E - 1) / 2)


def min_domains(alpha) -> int:
    """Smallest integer E with ``alpha <= log((E - 1) / 2)``, i.e. ``E >= 2 e^alpha + 1``."""
    _check_alpha(alpha)
    # Decimal keeps this exact-ish and free of overflow for large alpha
    E = max(3, math.ceil(2 * Decimal(alpha).exp() + 1))
    # exp/log rounding can put us one step off at integer boundaries; once the
    # log spacing drops below float resolution there is nothing left to fix
    tol = 4 * math.ulp(max(1.0, alpha))
    for _ in range(4):
        if E > 3 and alpha <= math.log(E - 2) - LN2 + tol:
            E -= 1
        elif alpha > math.log(E - 1) - LN2 + tol:
            E += 1
        else:
            break
    return E


def rhs_t1(alpha, E, delta) -> BoundReport:
    _check_delta(delta)
    sigma = sigma_t1(alpha, E)
    slack = max_alpha(E) - alpha
    return BoundReport(
        sigma=sigma,
        rhs=(1 - sigma) + hoeffding_term(E, delta),
        feasible=slack >= -1e-12,
        condition_slack=slack,
        min_E=min_domains(alpha),
    )


def _check_margin(m):
    if not (0 < m < 1):
        raise ValidationError(f"margin m must lie in (0, 1), got {m}")


def massart_kl_radius(beta, m) -> float:
    """The KL radius ``2 beta m^2 / (1 - m^2)`` implied by an L1 radius ``beta``."""
    return 2 * beta * m * m / (1 - m * m)


def max_beta(m, E) -> float:
    _check_margin(m)
    return (1 - m * m) / (2 * m * m) * max_alpha(E)


def sigma_t2(beta, m, E) -> float:
    _check_E(E)
    _check_margin(m)
    if beta < 0:
        raise ValidationError(f"beta must be >= 0, got {beta}")
    return (2 * beta * m * m + (1 - m * m) * LN2) / ((1 - m * m) * math.log(E - 1))


def rhs_t2(beta, m, E, delta) -> BoundReport:
    _check_delta(delta)
    sigma = sigma_t2(beta, m, E)
    slack = max_beta(m, E) - beta
    return BoundReport(
        sigma=sigma,
        rhs=(1 - sigma) + hoeffding_term(E, delta),
        feasible=slack >= -1e-12,
        condition_slack=slack,
        min_E=min_domains(massart_kl_radius(beta, m)),
    )


def corollary_K(m, kl) -> float:
    """L1 gap between two Massart classifiers recovered from their KL."""
    _check_margin(m)
    if kl < 0:
        raise ValidationError(f"kl must be >= 0, got {kl}")
    return kl / (m * math.log((1 + m) / (1 - m)))


def fano_check(K, r, gamma) -> bool:
    if r < 3:
        raise ValidationError(f"r must be >= 3, got {r}")
    if not (0 <= gamma <= 1):
        raise ValidationError(f"gamma must lie in [0, 1], got {gamma}")
    lhs = K + LN2
    rhs = (1 - gamma) * math.log(r - 1)
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
