"""Probability tables: fitting, fairness measures, KL, mollifier membership."""

import math

import numpy as np
import pytest

from fairboost import (
    TabularDensity,
    discrimination_control,
    fit_empirical,
    kl_divergence,
    mollifier_membership,
    representation_rate,
    statistical_rate,
)
from fairboost.schema import Attribute, AttributeSchema

from conftest import dataset_from_rows, density, random_density, xa_schema, xya_schema


def a_only_schema(card=2):
    return AttributeSchema(attributes=(Attribute("a", card),), sensitive_index=0)


def ya_schema(ny=2, na=2):
    return AttributeSchema(
        attributes=(Attribute("y", ny), Attribute("a", na)),
        sensitive_index=1,
        target_index=0,
    )


# -- construction --


def test_density_validation():
    s = a_only_schema()
    with pytest.raises(ValueError, match="sum to 1"):
        TabularDensity(s, np.array([0.5, 0.6]))
    with pytest.raises(ValueError, match="length"):
        TabularDensity(s, np.array([1.0]))
    with pytest.raises(ValueError, match="finite"):
        TabularDensity(s, np.array([1.5, -0.5]))


def test_random_densities_normalized(rng):
    s = xya_schema(nx=3)
    for _ in range(20):
        d = random_density(s, rng)
        assert abs(d.mass.sum() - 1.0) <= 1e-12


# -- fit_empirical --


def test_fit_empirical_point_mass():
    s = a_only_schema()
    d = dataset_from_rows(s, [[0]] * 4)
    assert np.allclose(fit_empirical(d, 0.0).mass, [1.0, 0.0])


def test_fit_empirical_laplace():
    s = a_only_schema()
    d = dataset_from_rows(s, [[0]] * 4)
    assert np.allclose(fit_empirical(d, 1.0).mass, [5.0 / 6.0, 1.0 / 6.0])


def test_fit_empirical_split():
    s = a_only_schema()
    d = dataset_from_rows(s, [[0], [0], [1], [1]])
    assert np.allclose(fit_empirical(d, 0.0).mass, [0.5, 0.5])


def test_fit_empirical_weighted():
    s = a_only_schema()
    d = dataset_from_rows(s, [[0], [1]], weights=[3.0, 1.0])
    assert np.allclose(fit_empirical(d, 0.0).mass, [0.75, 0.25])


def test_fit_empirical_errors():
    s = a_only_schema()
    with pytest.raises(ValueError, match="empty dataset"):
        fit_empirical(dataset_from_rows(s, np.zeros((0, 1), dtype=np.int64)), 0.0)
    with pytest.raises(ValueError, match="smoothing"):
        fit_empirical(dataset_from_rows(s, [[0]]), -0.5)


# -- representation rate --


def test_rr_uniform():
    assert representation_rate(density(a_only_schema(), [0.5, 0.5])) == 1.0


def test_rr_skewed():
    val = representation_rate(density(a_only_schema(), [0.9, 0.1]))
    assert abs(val - 1.0 / 9.0) <= 1e-12


def test_rr_three_groups():
    val = representation_rate(density(a_only_schema(3), [0.5, 0.3, 0.2]))
    assert abs(val - 0.4) <= 1e-12


def test_rr_degenerate():
    with pytest.raises(ValueError, match="degenerate marginal"):
        representation_rate(density(a_only_schema(), [1.0, 0.0]))


def test_rr_uniform_marginal_any_conditionals(rng):
    s = xa_schema(nx=4)
    hit = 0
    for _ in range(40):
        # dyadic conditionals keep every float sum exact, so the group
        # marginals land on identical floats and RR is exactly 1
        cond = rng.multinomial(16, [0.25] * 4, size=2) / 16.0
        if (cond == 0).any():
            continue
        mass = np.zeros(s.n_cells)
        for i, (x, a) in enumerate(s.all_cells()):
            mass[i] = 0.5 * cond[a, x]
        assert representation_rate(TabularDensity(s, mass)) == 1.0
        hit += 1
    assert hit >= 5


# -- statistical rate and discrimination control --


def test_sr_independent():
    s = ya_schema()
    d = density(s, [0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4])
    assert abs(statistical_rate(d, 1) - 1.0) <= 1e-12
    assert discrimination_control(d, 1) <= 1e-12


def test_sr_forced_ratio():
    # p[Y=1|a0]=0.8, p[Y=1|a1]=0.6, equal group masses
    s = ya_schema()
    d = density(s, [0.1, 0.2, 0.4, 0.3])
    assert abs(statistical_rate(d, 1) - 0.75) <= 1e-12
    assert abs(discrimination_control(d, 1) - 1.0 / 3.0) <= 1e-12


def test_sr_matches_enumeration(rng):
    s = ya_schema(ny=2, na=2)
    for _ in range(50):
        d = random_density(s, rng)
        groups = d.schema.group_matrix(d.mass)  # (|A|, |Y|)
        cond = groups[:, 1] / groups.sum(axis=1)
        expect = min(
            cond[i] / cond[j] for i in range(2) for j in range(2) if i != j
        )
        assert abs(statistical_rate(d, 1) - expect) <= 1e-12
        expect_dc = max(
            abs(cond[i] / cond[j] - 1.0) for i in range(2) for j in range(2) if i != j
        )
        assert abs(discrimination_control(d, 1) - expect_dc) <= 1e-12


def test_dc_reciprocal_bound(rng):
    s = ya_schema()
    for _ in range(100):
        d = random_density(s, rng)
        rho = statistical_rate(d, 1)
        assert discrimination_control(d, 1) <= (1.0 - rho) / rho + 1e-12


def test_sr_errors():
    no_target = density(a_only_schema(), [0.5, 0.5])
    with pytest.raises(ValueError, match="no target attribute"):
        statistical_rate(no_target, 1)
    s = ya_schema()
    zero_cond = density(s, [0.25, 0.5, 0.25, 0.0])
    with pytest.raises(ValueError, match="degenerate conditional"):
        statistical_rate(zero_cond, 1)
    with pytest.raises(ValueError, match="out of range"):
        statistical_rate(density(s, [0.25] * 4), 5)


# -- KL divergence --


def test_kl_zero_at_equality(rng):
    s = xa_schema(nx=3)
    d = random_density(s, rng)
    assert kl_divergence(d, d) == 0.0


def test_kl_hand_values():
    s = a_only_schema()
    p = density(s, [0.5, 0.5])
    q = density(s, [0.25, 0.75])
    expect = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
    assert abs(kl_divergence(p, q) - expect) <= 1e-12

    point = density(s, [1.0, 0.0])
    assert abs(kl_divergence(point, p) - math.log(2.0)) <= 1e-12


def test_kl_absolute_continuity():
    s = a_only_schema()
    p = density(s, [0.5, 0.5])
    q = density(s, [1.0, 0.0])
    with pytest.raises(ValueError, match="absolute continuity violated"):
        kl_divergence(p, q)
    # support shrink in p is fine
    assert kl_divergence(q, p) > 0.0


def test_kl_nonnegative_zero_only_at_equality(rng):
    s = xa_schema(nx=4)
    for _ in range(50):
        p, q = random_density(s, rng), random_density(s, rng)
        val = kl_divergence(p, q)
        assert val >= 0.0
        if not np.allclose(p.mass, q.mass):
            assert val > 0.0


def test_kl_schema_mismatch(rng):
    with pytest.raises(ValueError, match="schema mismatch"):
        kl_divergence(
            random_density(xa_schema(nx=2), rng), random_density(xa_schema(nx=3), rng)
        )


# -- mollifier membership --


def two_group_marginal(r):
    """Two-group density with sensitive-marginal ratio r (a0/a1)."""
    return density(a_only_schema(), [r / (1.0 + r), 1.0 / (1.0 + r)])


def test_membership_identity(rng):
    s = xa_schema(nx=3)
    d = random_density(s, rng)
    assert mollifier_membership(d, d, 1e-6)


def test_membership_boundary():
    eps = 0.4
    q0 = two_group_marginal(1.0)
    q = two_group_marginal(math.exp(-eps / 2.0))
    assert mollifier_membership(q, q0, eps)
    beyond = two_group_marginal(math.exp(-eps) - 1e-3)
    assert not mollifier_membership(beyond, q0, eps)


def test_membership_errors():
    q0 = two_group_marginal(1.0)
    with pytest.raises(ValueError, match="eps"):
        mollifier_membership(q0, q0, 0.0)
    with pytest.raises(ValueError, match="degenerate marginal"):
        mollifier_membership(density(a_only_schema(), [1.0, 0.0]), q0, 0.5)


def test_fair_anchor_membership_implies_rr(rng):
    # members of an eps-mollifier around a perfectly fair anchor keep RR >= exp(-eps)
    s = a_only_schema(3)
    anchor = density(s, [1.0, 1.0, 1.0])
    for _ in range(200):
        d = random_density(s, rng, floor=0.05)
        for eps in (0.2, 0.7, 1.5):
            if mollifier_membership(d, anchor, eps):
                assert representation_rate(d) >= math.exp(-eps) - 1e-12


def test_rr_implies_membership(rng):
    # RR >= exp(-eps/2) puts a density inside the eps-mollifier of a fair anchor
    s = a_only_schema(3)
    anchor = density(s, [1.0, 1.0, 1.0])
    for _ in range(200):
        d = random_density(s, rng, floor=0.05)
        eps = -2.0 * math.log(representation_rate(d))
        if eps <= 0.0:
            eps = 1e-9
        assert mollifier_membership(d, anchor, eps)
