import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparse_extremes import (
    chi_curve,
    chi_hat,
    chi_matrix,
    consistency_check,
    empirical_exponent_measure,
    eta_hill,
)
from sparse_extremes.coefficients import chi_family, exponent_measure_count

from conftest import sample_of


def brute_chi(x, subset, q):
    """Count rows by hand with rank/(n+1) margins."""
    n = len(x)
    hits = 0
    for row in range(n):
        ok = True
        for i in subset:
            rank = sum(x[r, i] < x[row, i] for r in range(n)) + 1
            ok &= rank / (n + 1) > q
        hits += ok
    return min(1.0, hits / ((1 - q) * n))


def test_hand_counted_example():
    s = sample_of(np.array([[1, 2], [2, 1], [3, 4], [4, 3]], float))
    est = chi_hat(s, (0, 1), 0.5)
    assert est.count == 2 and est.value == 1.0


def test_comonotone_is_one(rng):
    z = rng.normal(size=500)
    s = sample_of(np.column_stack([z, np.exp(z), z**3]))
    for q in (0.5, 0.9, 0.99):
        assert chi_hat(s, (0, 1, 2), q).value == 1.0


def test_antithetic_is_zero(rng):
    z = rng.normal(size=2000)
    assert chi_hat(sample_of(np.column_stack([z, -z])), (0, 1), 0.9).value == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_against_brute_force_count(seed):
    r = np.random.default_rng(seed)
    x = r.normal(size=(40, 3))
    x[:, 1] += x[:, 0]
    s = sample_of(x)
    for sub in [(0, 1), (0, 2), (0, 1, 2)]:
        assert chi_hat(s, sub, 0.7).value == pytest.approx(brute_chi(x, sub, 0.7), abs=1e-12)


def test_chi_matrix_matches_pairwise_estimates(rng):
    s = sample_of(rng.normal(size=(300, 4)))
    m = chi_matrix(s, 0.9)
    for i, j in itertools.combinations(range(4), 2):
        assert m[i, j] == chi_hat(s, (i, j), 0.9).value
    np.testing.assert_array_equal(np.diag(m), 1.0)


def test_level_too_high_rejected(rng):
    with pytest.raises(ValueError):
        chi_hat(sample_of(rng.normal(size=(50, 2))), (0, 1), 0.999)


def test_independent_columns_behave_like_one_minus_q():
    r = np.random.default_rng(3)
    s = sample_of(1.0 / (1.0 - r.uniform(size=(100_000, 2))))
    assert chi_hat(s, (0, 1), 0.95).value == pytest.approx(0.05, abs=0.02)


def test_curve_without_bootstrap_has_no_bands(rng):
    s = sample_of(rng.normal(size=(200, 2)))
    curve = chi_curve(s, 0, 1, [0.5, 0.8, 0.9], n_boot=0)
    assert [c.level for c in curve] == [0.5, 0.8, 0.9]
    assert all(c.ci_lower is None and c.ci_upper is None for c in curve)


def test_comonotone_curve_has_degenerate_bands(rng):
    z = rng.normal(size=400)
    curve = chi_curve(sample_of(np.column_stack([z, 2 * z])), 0, 1, [0.8, 0.9, 0.95], n_boot=50, seed=1)
    for c in curve:
        assert (c.ci_lower, c.value, c.ci_upper) == (1.0, 1.0, 1.0)


def test_bootstrap_bands_bracket_and_are_seeded(rng):
    x = rng.normal(size=(500, 2))
    x[:, 1] += x[:, 0]
    s = sample_of(x)
    a = chi_curve(s, 0, 1, [0.8, 0.9], n_boot=100, seed=7)
    b = chi_curve(s, 0, 1, [0.8, 0.9], n_boot=100, seed=7)
    assert a == b
    for c in a:
        assert c.ci_lower <= c.value <= c.ci_upper
        assert c.ci_upper - c.ci_lower > 0


def test_curve_rejects_unsorted_grid(rng):
    with pytest.raises(ValueError):
        chi_curve(sample_of(rng.normal(size=(50, 2))), 0, 1, [0.9, 0.8])


def test_hill_single_term(rng):
    s = sample_of(rng.normal(size=(100, 2)))
    t = np.sort(s.pareto.min(axis=1))
    est = eta_hill(s, (0, 1), 1)
    assert est.value == pytest.approx(np.log(t[-1] / t[-2]))
    assert est.value >= 0 and est.std_err == pytest.approx(est.value)


def test_hill_limits():
    r = np.random.default_rng(11)
    z = r.normal(size=10_000)
    assert eta_hill(sample_of(np.column_stack([z, z + 1])), (0, 1), 200).value == pytest.approx(1.0, abs=0.1)
    ind = sample_of(r.normal(size=(100_000, 2)))
    assert eta_hill(ind, (0, 1), 500).value == pytest.approx(0.5, abs=0.1)


def test_exponent_measure_comonotone_unit_point(rng):
    z = rng.normal(size=1000)
    s = sample_of(np.column_stack([z, z * 2, z + 4]))
    assert empirical_exponent_measure(s, [1, 1, 1], 50) == 1.0


def test_exponent_measure_decreases_in_z(rng):
    s = sample_of(rng.normal(size=(2000, 3)))
    vals = [empirical_exponent_measure(s, [c, c, c], 100) for c in (0.5, 1, 2, 4, 8, 50)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_exponent_measure_homogeneity():
    r = np.random.default_rng(5)
    z = r.standard_normal((50_000, 2))
    x = np.column_stack([z[:, 0], 0.7 * z[:, 0] + 0.3 * z[:, 1]])
    s = sample_of(np.exp(x))
    base = empirical_exponent_measure(s, [1, 1], 500)
    assert empirical_exponent_measure(s, [2, 2], 500) == pytest.approx(base / 2, rel=0.1)


def test_exponent_measure_vacuous_margin_warns(rng):
    s = sample_of(rng.normal(size=(100, 2)))
    with pytest.warns(RuntimeWarning):
        assert empirical_exponent_measure(s, [0.05, 1.0], 10) == pytest.approx(10.0)


@pytest.mark.parametrize("seed", range(10))
def test_chi_equals_two_minus_exponent_measure(seed):
    r = np.random.default_rng(seed)
    n, k = 997, 53
    s = sample_of(r.standard_t(3, size=(n, 2)) @ [[1, 0.5], [0, 1]])
    q = 1 - k / n
    est = chi_hat(s, (0, 1), q)
    assert est.count == 2 * k - exponent_measure_count(s, [1, 1], k)
    assert est.value == pytest.approx(2 - empirical_exponent_measure(s, [1, 1], k), abs=1e-15)


def test_consistency_flags_monotonicity():
    chis = {(0, 1): 0.5, (0, 2): 0.5, (1, 2): 0.5, (0, 1, 2): 0.6}
    kinds = {v.kind for v in consistency_check(chis)}
    assert "chi_monotone" in kinds


def test_consistency_clean_for_complete_dependence():
    chis = {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0, (0, 1, 2): 1.0}
    assert consistency_check(chis, dict(chis)) == []


def test_consistency_flags_eta_and_inclusion_exclusion():
    chis = {(0, 1): 0.1, (0, 2): 0.1, (1, 2): 0.1, (0, 1, 2): 0.0}
    out = consistency_check(chis, {(0, 1): 0.5, (0, 2): 0.5, (1, 2): 0.5, (0, 1, 2): 0.9})
    kinds = {v.kind for v in out}
    assert "eta_monotone" in kinds
    # mass on face {0}: 1 - 0.1 - 0.1 + 0 = 0.8 is fine; all constraints on pairs hold
    chis_bad = {(0, 1): 0.9, (0, 2): 0.9, (1, 2): 0.9, (0, 1, 2): 0.2}
    assert any(v.kind == "inclusion_exclusion" for v in consistency_check(chis_bad))


def test_consistency_needs_a_complete_family():
    with pytest.raises(ValueError, match="incomplete"):
        consistency_check({(0, 1): 0.5, (0, 1, 2): 0.4})


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.5, 0.8, 0.9]))
def test_empirical_family_never_breaks_monotonicity(seed, q):
    r = np.random.default_rng(seed)
    x = r.standard_normal((120, 4))
    x[:, 1:] += r.uniform(0, 2) * x[:, :1]
    fam = chi_family(sample_of(x), q)
    assert not [v for v in consistency_check(fam) if v.kind == "chi_monotone"]
    for a, b in itertools.permutations(fam, 2):
        if set(a) < set(b):
            assert fam[b] <= fam[a]
