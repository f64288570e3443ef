import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shiftlab import bounds
from shiftlab.divergence import kl_discrete, kl_massart
from shiftlab.errors import ValidationError
from shiftlab.massart_sim import (
    DiscreteClassifier,
    DomainDescriptor,
    MassartConfig,
    MassartDomain,
    beta_sweep,
    empirical_lhs,
    erm_pooled,
    make_clean_domains,
    make_domains,
    run_bound_experiment,
    sample_labels,
)


def brute_force_erm(domains, K):
    """Minimum pooled 0-1 loss over all 2^K labelings; ties resolved towards fewer ones."""
    atoms = np.concatenate([d.atoms for d in domains])
    labels = np.concatenate([d.labels for d in domains])
    best, best_loss = None, math.inf
    for bits in itertools.product((0, 1), repeat=K):
        h = np.array(bits)
        loss = np.sum(h[atoms] != labels)
        if loss < best_loss:
            best, best_loss = h, loss
    return best, best_loss


@settings(max_examples=30, deadline=None)
@given(K=st.integers(2, 10), n=st.integers(1, 40), seed=st.integers(0, 10_000))
def test_erm_matches_brute_force(K, n, seed):
    fam = make_domains(K, 3, 0.3, 0.0, seed)
    doms = [sample_labels(d, n, seed + i) for i, d in enumerate(fam.domains)]
    hat = erm_pooled(doms)
    _, best_loss = brute_force_erm(doms, K)
    atoms = np.concatenate([d.atoms for d in doms])
    labels = np.concatenate([d.labels for d in doms])
    assert np.sum(hat.labels[atoms] != labels) == best_loss


def test_erm_brute_force_k12():
    fam = make_domains(12, 3, 0.2, 0.25, 3)
    doms = [sample_labels(d, 30, 40 + i) for i, d in enumerate(fam.domains)]
    hat = erm_pooled(doms)
    _, best_loss = brute_force_erm(doms, 12)
    atoms = np.concatenate([d.atoms for d in doms])
    labels = np.concatenate([d.labels for d in doms])
    assert np.sum(hat.labels[atoms] != labels) == best_loss


def test_erm_tie_goes_to_zero():
    desc = DomainDescriptor(DiscreteClassifier([1, 1], [0.5, 0.5]), 0.5)
    dom = MassartDomain(desc, np.array([0, 0]), np.array([0, 1], dtype=np.int8))
    assert erm_pooled([dom]).labels.tolist() == [0, 0]


def test_erm_recovers_bayes_at_high_margin():
    fam = make_domains(8, 3, 0.8, 0.0, 1)
    doms = [sample_labels(d, 10_000, 10 + i) for i, d in enumerate(fam.domains)]
    assert np.array_equal(erm_pooled(doms).labels, fam.domains[0].bayes.labels)


@pytest.mark.parametrize("target", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_family_beta_and_alpha(target):
    fam = make_domains(8, 9, 0.5, target, 0)
    assert fam.beta == pytest.approx(target, abs=1 / 16)
    assert fam.alpha == pytest.approx(kl_massart(0.5, fam.beta), abs=1e-15)
    # every flipped atom is a minority, so the per-atom majority is the base labeling
    votes = np.mean([d.bayes.labels for d in fam.domains], axis=0)
    assert np.array_equal((votes > 0.5).astype(int), fam.domains[0].bayes.labels)


def test_joint_kl_matches_closed_form():
    fam = make_domains(8, 5, 0.6, 0.5, 2)
    for p in fam.domains:
        for q in fam.domains:
            kl = kl_discrete(p.joint(), q.joint())
            assert kl == pytest.approx(kl_massart(0.6, p.bayes.distance(q.bayes)), abs=1e-12)


def test_label_frequencies_follow_eta():
    fam = make_domains(4, 3, 0.4, 0.0, 5)
    desc = fam.domains[0]
    n = 400_000
    dom = sample_labels(desc, n, 9)
    eta = desc.eta()
    for k in range(4):
        sel = dom.atoms == k
        rate = dom.labels[sel].mean()
        band = 4 * math.sqrt(eta[k] * (1 - eta[k]) / sel.sum())
        assert abs(rate - eta[k]) <= band


def test_zero_region():
    fam = make_domains(10, 3, 0.5, 0.0, 1, x2_fraction=0.3)
    desc = fam.domains[0]
    assert desc.zero_region.sum() == 3
    assert np.all(desc.eta()[desc.zero_region] == 0)
    dom = sample_labels(desc, 5000, 2)
    assert np.all(dom.labels[desc.zero_region[dom.atoms]] == 0)


def test_margin_one_is_noise_free():
    fam = make_domains(6, 3, 1.0, 0.0, 4)
    dom = sample_labels(fam.domains[0], 2000, 1)
    assert np.array_equal(dom.labels, fam.domains[0].bayes.labels[dom.atoms])


def test_unreachable_beta():
    with pytest.raises(ValidationError):
        make_domains(4, 3, 0.5, 3.0, 0)


def test_clean_family():
    fam = make_clean_domains(8, 9, 0.5, 0)
    assert fam.beta == 0.0
    p, q = fam.domains[0].bayes.mu, fam.domains[1].bayes.mu
    assert fam.alpha == pytest.approx(max(kl_discrete(p, q), kl_discrete(q, p)), abs=1e-15)


def test_clean_conflicting_labels_infinite():
    base = [0] * 8
    other = [1] + [0] * 7
    fam = make_clean_domains(8, 3, 0.2, 0, labels=[base, other, base])
    assert fam.alpha == math.inf
    with pytest.raises(ValidationError):
        bounds.rhs_t1(fam.alpha, 3, 0.05)


def test_empirical_lhs():
    mu = [0.25] * 4
    bayes = [DiscreteClassifier([0, 0, 0, 0], mu), DiscreteClassifier([1, 1, 0, 0], mu)]
    hat = DiscreteClassifier([0, 0, 0, 0], mu)
    assert empirical_lhs(hat, bayes, 0.5) == 0.5
    assert empirical_lhs(hat, bayes, 0.0) == 1.0


def test_parallel_matches_serial():
    cfg = MassartConfig(trials=12, n=500)
    serial = run_bound_experiment(cfg)
    par = run_bound_experiment(MassartConfig(trials=12, n=500, workers=4))
    assert serial.trials == par.trials


def test_default_experiment_respects_bound():
    res = run_bound_experiment(MassartConfig(trials=50, n=2000))
    assert res.report.feasible
    assert res.violation_rate <= res.allowed_rate


def test_clean_mode_runs():
    res = run_bound_experiment(MassartConfig(mode="clean", trials=5, n=200))
    assert res.beta == 0.0 and math.isfinite(res.alpha)


def test_beta_sweep_shape():
    rows = beta_sweep([0.0, 0.5], MassartConfig(trials=5, n=300))
    assert [r["target_beta"] for r in rows] == [0.0, 0.5]
    assert rows[0]["sigma"] < rows[1]["sigma"]


def test_unknown_mode():
    with pytest.raises(ValidationError):
        run_bound_experiment(MassartConfig(mode="other", trials=1))
