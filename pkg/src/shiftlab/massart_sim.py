"""Monte-Carlo checks of the multi-domain Fano/Hoeffding bounds on a finite X.

Domains live on K atoms with a known marginal ``mu``.  In ``massart`` mode
every domain shares ``mu`` and differs through its Bayes classifier, with
label noise at margin ``m``.  In ``clean`` mode labels are deterministic and
shared, and domains differ only through their marginals.  Because X is
finite, distances, KL values and ERM are all exact.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import bounds
from .divergence import kl_discrete, kl_massart
from .errors import ValidationError
from .seeding import derive_seed, rng_for

_MAKE_STREAM = 101
_SAMPLE_STREAM = 202


@dataclass(frozen=True)
class DiscreteClassifier:
    labels: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int8).reshape(-1)
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if labels.shape != mu.shape:
            raise ValidationError("labels and mu must have the same length")
        if np.any((labels != 0) & (labels != 1)):
            raise ValidationError("labels must be 0/1")
        if np.any(mu < 0) or abs(mu.sum() - 1) > 1e-9:
            raise ValidationError("mu must be a probability vector")
        labels.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mu", mu)

    @property
    def K(self) -> int:
        return self.labels.size

    def distance(self, other: "DiscreteClassifier") -> float:
        """Exact L1(mu) distance, measured under this classifier's marginal."""
        return math.fsum(self.mu * np.abs(self.labels - other.labels))


@dataclass(frozen=True)
class DomainDescriptor:
    """Population law of one domain: marginal, Bayes labels, margin.

    Atoms flagged in ``zero_region`` carry ``eta = 0`` (and label 0).
    """

    bayes: DiscreteClassifier
    m: float
    zero_region: Optional[np.ndarray] = None

    def eta(self) -> np.ndarray:
        t = self.bayes.labels.astype(float)
        eta = (1 + (2 * t - 1) * self.m) / 2
        if self.zero_region is not None:
            eta = np.where(self.zero_region, 0.0, eta)
        return eta

    def joint(self) -> np.ndarray:
        """Flattened joint law over (atom, label) pairs, label-major."""
        eta = self.eta()
        mu = self.bayes.mu
        return np.concatenate([mu * (1 - eta), mu * eta])


@dataclass(frozen=True)
class MassartDomain:
    descriptor: DomainDescriptor
    atoms: np.ndarray
    labels: np.ndarray

    @property
    def bayes(self) -> DiscreteClassifier:
        return self.descriptor.bayes

    @property
    def m(self) -> float:
        return self.descriptor.m


@dataclass(frozen=True)
class DomainFamily:
    domains: tuple
    beta: float
    alpha: float


def make_domains(K: int, E: int, m: float, target_beta: float, seed: int,
                 x2_fraction: float = 0.0, mu=None) -> DomainFamily:
    """Build E Massart domains whose Bayes classifiers are at most ``target_beta`` apart.

    Domain 0 keeps a random base labeling; the others alternately flip two
    disjoint atom blocks A and B, so the farthest pair (A vs B) is exactly
    ``mu(A) + mu(B)`` apart and every flipped atom stays a minority vote.
    """
    if K < 2 or E < 3:
        raise ValidationError(f"need K >= 2 and E >= 3, got K={K}, E={E}")
    if not (0 < m <= 1):
        raise ValidationError(f"margin m must lie in (0, 1], got {m}")
    mu = np.full(K, 1.0 / K) if mu is None else np.asarray(mu, dtype=float)
    rng = rng_for(seed, _MAKE_STREAM)
    order = rng.permutation(K)
    n_zero = int(round(x2_fraction * K))
    zero_region = np.zeros(K, dtype=bool)
    zero_region[order[:n_zero]] = True
    free = order[n_zero:]

    base = rng.integers(0, 2, size=K)
    base[zero_region] = 0

    cum = np.concatenate([[0.0], np.cumsum(mu[free])])
    if target_beta < 0 or target_beta > cum[-1] + 1.0 / K:
        raise ValidationError(
            f"target beta {target_beta} unreachable (max {cum[-1]:.4g} with these atoms)")
    L = int(np.argmin(np.abs(cum - target_beta)))
    block_a = free[: (L + 1) // 2]
    block_b = free[(L + 1) // 2: L]

    descs = []
    for e in range(E):
        labels = base.copy()
        if e > 0:
            block = block_a if e % 2 else block_b
            labels[block] = 1 - labels[block]
        descs.append(DomainDescriptor(DiscreteClassifier(labels, mu), m,
                                      zero_region if n_zero else None))
    beta = max(descs[i].bayes.distance(descs[j].bayes)
               for i in range(E) for j in range(E) if i != j)
    alpha = kl_massart(m, beta) if m < 1 else (0.0 if beta == 0 else math.inf)
    return DomainFamily(tuple(descs), beta, alpha)


def make_clean_domains(K: int, E: int, shift: float, seed: int,
                       labels: Optional[Sequence] = None) -> DomainFamily:
    """Noise-free domains that share one labeling and differ in their marginals.

    Domain ``e`` puts extra mass ``shift`` on atom ``e mod K`` on top of a
    uniform base.  ``labels`` may give one labeling per domain; labelings that
    disagree on shared support make the family's KL radius infinite.
    """
    if K < 2 or E < 3:
        raise ValidationError(f"need K >= 2 and E >= 3, got K={K}, E={E}")
    if not (0 <= shift < 1):
        raise ValidationError(f"shift must lie in [0, 1), got {shift}")
    rng = rng_for(seed, _MAKE_STREAM)
    base = rng.integers(0, 2, size=K)
    per_domain = [base] * E if labels is None else [np.asarray(l) for l in labels]
    if len(per_domain) != E:
        raise ValidationError("need one labeling per domain")
    descs = []
    for e in range(E):
        mu = np.full(K, (1 - shift) / K)
        mu[e % K] += shift
        descs.append(DomainDescriptor(DiscreteClassifier(per_domain[e], mu), 1.0))
    alpha = clean_alpha(descs)
    beta = max(descs[i].bayes.distance(descs[j].bayes)
               for i in range(E) for j in range(E) if i != j)
    return DomainFamily(tuple(descs), beta, alpha)


def clean_alpha(descs: Sequence[DomainDescriptor]) -> float:
    """Sup over ordered pairs of the joint KL between noise-free domains."""
    alpha = 0.0
    for i, p in enumerate(descs):
        for j, q in enumerate(descs):
            if i == j:
                continue
            shared = (p.bayes.mu > 0) & (q.bayes.mu > 0)
            if np.any(p.bayes.labels[shared] != q.bayes.labels[shared]):
                return math.inf
            alpha = max(alpha, kl_discrete(p.bayes.mu, q.bayes.mu))
    return alpha


def sample_labels(desc: DomainDescriptor, n: int, seed: int) -> MassartDomain:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    atoms = rng.choice(desc.bayes.K, size=n, p=desc.bayes.mu)
    labels = (rng.random(n) < desc.eta()[atoms]).astype(np.int8)
    return MassartDomain(desc, atoms, labels)


def erm_pooled(domains: Sequence[MassartDomain]) -> DiscreteClassifier:
    """0-1-loss ERM over all labelings of the atoms, via per-atom majority.

    Tied or unseen atoms get label 0.  The returned classifier carries the
    first domain's marginal.
    """
    domains = list(domains)
    K = domains[0].bayes.K
    ones = np.zeros(K)
    total = np.zeros(K)
    for dom in domains:
        ones += np.bincount(dom.atoms, weights=dom.labels, minlength=K)
        total += np.bincount(dom.atoms, minlength=K)
    if total.sum() == 0:
        raise ValidationError("pooled sample is empty")
    labels = (2 * ones > total).astype(np.int8)
    return DiscreteClassifier(labels, domains[0].bayes.mu)


def empirical_lhs(hat: DiscreteClassifier, bayes_set: Sequence[DiscreteClassifier], eps) -> float:
    """Fraction of the Bayes classifiers at distance >= eps from ``hat``.

    Each distance is measured under that Bayes classifier's own marginal.
    """
    hits = sum(1 for h in bayes_set if h.distance(hat) >= eps)
    return hits / len(bayes_set)


# -- harness ---------------------------------------------------------------

@dataclass(frozen=True)
class MassartConfig:
    K: int = 8
    E: int = 9
    m: float = 0.5
    beta: float = 0.5
    n: int = 10_000
    eps: float = 0.1
    delta: float = 0.05
    trials: int = 200
    seed: int = 0
    mode: str = "massart"
    x2_fraction: float = 0.0
    shift: float = 0.5
    workers: int = 1


@dataclass
class ExperimentResult:
    config: MassartConfig
    report: bounds.BoundReport
    alpha: float
    beta: float
    trials: list = field(default_factory=list)

    @property
    def violation_rate(self) -> float:
        return sum(r["violated"] for r in self.trials) / len(self.trials)

    @property
    def allowed_rate(self) -> float:
        """delta plus three binomial standard errors over the trial count."""
        d = self.config.delta
        return d + 3 * math.sqrt(d * (1 - d) / len(self.trials))

    @property
    def mean_lhs(self) -> float:
        return math.fsum(r["lhs"] for r in self.trials) / len(self.trials)

    def summary(self) -> dict:
        return {
            "mode": self.config.mode,
            "K": self.config.K,
            "E": self.config.E,
            "m": self.config.m,
            "alpha": self.alpha,
            "beta": self.beta,
            "sigma": self.report.sigma,
            "rhs": self.report.rhs,
            "feasible": self.report.feasible,
            "mean_lhs": self.mean_lhs,
            "violation_rate": self.violation_rate,
            "allowed_rate": self.allowed_rate,
            "trials": len(self.trials),
        }


def build_family(cfg: MassartConfig) -> DomainFamily:
    if cfg.mode == "massart":
        return make_domains(cfg.K, cfg.E, cfg.m, cfg.beta, cfg.seed, cfg.x2_fraction)
    if cfg.mode == "clean":
        return make_clean_domains(cfg.K, cfg.E, cfg.shift, cfg.seed)
    raise ValidationError(f"unknown mode {cfg.mode!r}; expected massart or clean")


def _bound_for(cfg: MassartConfig, family: DomainFamily) -> bounds.BoundReport:
    if cfg.mode == "massart":
        return bounds.rhs_t2(family.beta, cfg.m, cfg.E, cfg.delta)
    return bounds.rhs_t1(family.alpha, cfg.E, cfg.delta)


def _run_trial(cfg: MassartConfig, family: DomainFamily, rhs: float, trial: int) -> dict:
    sampled = [sample_labels(desc, cfg.n, derive_seed(cfg.seed, _SAMPLE_STREAM, trial, e))
               for e, desc in enumerate(family.domains)]
    hat = erm_pooled(sampled)
    lhs = empirical_lhs(hat, [d.bayes for d in family.domains], cfg.eps)
    return {"trial": trial, "lhs": lhs, "rhs": rhs, "violated": lhs > rhs}


def run_bound_experiment(cfg: MassartConfig) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials and compare each LHS to the bound.

    Trial seeds depend only on (seed, trial, domain), so the trial table is
    identical for any worker count.
    """
    if cfg.trials < 1:
        raise ValidationError("need at least one trial")
    family = build_family(cfg)
    report = _bound_for(cfg, family)
    run = lambda t: _run_trial(cfg, family, report.rhs, t)  # noqa: E731
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(run, range(cfg.trials)))
    else:
        rows = [run(t) for t in range(cfg.trials)]
    return ExperimentResult(cfg, report, family.alpha, family.beta, rows)


def beta_sweep(betas: Sequence[float], cfg: MassartConfig) -> list:
    """Run the harness at each beta with the same trial seeds (paired design)."""
    rows = []
    for b in betas:
        res = run_bound_experiment(replace(cfg, beta=float(b)))
        rows.append({
            "target_beta": float(b),
            "beta": res.beta,
            "alpha": res.alpha,
            "sigma": res.report.sigma,
            "rhs": res.report.rhs,
            "feasible": res.report.feasible,
            "mean_lhs": res.mean_lhs,
            "violation_rate": res.violation_rate,
        })
    return rows
