import math

import numpy as np
import pytest
from scipy import integrate, stats

from sparse_extremes import (
    AngularCloud,
    HuslerReissModel,
    LogisticModel,
    MaxLinearModel,
    RecursiveMLModel,
    chi_hat,
    extract_exceedances,
    chi_oracle_hr,
    hr_exponent_density,
    hr_pareto_density,
    logistic_exponent_density,
    rank_transform,
    recursive_to_max_linear,
    simulate_hr_pareto,
    simulate_logistic,
    simulate_max_linear,
    simulate_max_linear_limit,
    simulate_recursive_ml,
    spherical_kmeans,
)
from sparse_extremes.models import chi_hr_closed_form, logistic_interior_mass, recursive_coefficients


def random_variogram(rng, d):
    pts = rng.normal(size=(d, d + 1))
    return np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)


# max-linear ---------------------------------------------------------------


def test_max_linear_rows_normalized_and_columns_nonzero():
    model = MaxLinearModel.from_unnormalized([[2, 2], [1, 3]])
    np.testing.assert_allclose(model.A.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        MaxLinearModel(np.array([[0.5, 0.5, 0.0], [1.0, 0.0, 0.0]]))
    with pytest.raises(ValueError):
        MaxLinearModel(np.array([[0.5, 0.6], [1.0, 0.0]]))


def test_max_linear_identity_and_single_factor():
    ind = rank_transform(simulate_max_linear(MaxLinearModel(np.eye(3)), 50_000, seed=1))
    assert chi_hat(ind, (0, 1), 0.99).value < 0.05
    one = simulate_max_linear(MaxLinearModel(np.ones((3, 1))), 1000, seed=1)
    np.testing.assert_array_equal(one.values[:, 0], one.values[:, 2])


def test_max_linear_frechet_margins_and_determinism():
    model = MaxLinearModel.from_unnormalized(np.array([[1, 0.5, 0], [0, 1, 1], [0.3, 0, 1]]))
    a = simulate_max_linear(model, 10_000, seed=7)
    b = simulate_max_linear(model, 10_000, seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    for j in range(3):
        assert stats.kstest(a.values[:, j], stats.invweibull(1).cdf).pvalue > 0.01


def test_max_linear_angles_cluster_at_the_atoms():
    A = MaxLinearModel.from_unnormalized(np.array([[1, 0, 1], [0, 1, 1], [0, 1, 0]]))
    atoms, w = A.angular_atoms("l1")
    np.testing.assert_allclose(w, A.A.sum(axis=0) / A.d)
    exc = extract_exceedances(rank_transform(simulate_max_linear_limit(A, 20_000, seed=3)), "l1", 500)
    res = spherical_kmeans(AngularCloud.from_exceedances(exc), 3, seed=0, restarts=5)
    for c in res.centers:
        assert np.min(np.abs(atoms - c).sum(axis=1)) < 0.15
    shares = np.sort(res.counts() / exc.k)
    np.testing.assert_allclose(shares, np.sort(w), atol=0.06)


# recursive max-linear ----------------------------------------------------


def test_recursive_empty_dag_is_identity():
    model = RecursiveMLModel(3, {}, diag=np.array([2.0, 1.0, 0.5]))
    np.testing.assert_allclose(recursive_coefficients(model), np.diag([2.0, 1.0, 0.5]))
    np.testing.assert_allclose(recursive_to_max_linear(model).A, np.eye(3))
    x = simulate_recursive_ml(model, 10_000, seed=2).values
    assert stats.kstest(x[:, 0] / 2.0, stats.invweibull(1).cdf).pvalue > 0.01


def test_recursive_chain_unrolls_once():
    model = RecursiveMLModel(2, {(0, 1): 3.0}, diag=np.array([2.0, 0.5]))
    a = recursive_coefficients(model)
    assert a[1, 0] == pytest.approx(3.0 * 2.0)
    assert a[1, 1] == 0.5 and a[0, 1] == 0.0


def test_recursive_longest_path_wins():
    # 0 -> 1 -> 2 and 0 -> 2; the product along the path beats the direct edge
    model = RecursiveMLModel(3, {(0, 1): 2.0, (1, 2): 2.0, (0, 2): 1.5})
    assert recursive_coefficients(model)[2, 0] == pytest.approx(4.0)


def test_recursive_cycle_rejected():
    with pytest.raises(ValueError, match="cycle"):
        RecursiveMLModel(3, {(0, 1): 1.0, (1, 2): 1.0, (2, 0): 1.0})


def test_dominant_edge_gives_strong_dependence():
    model = RecursiveMLModel(2, {(0, 1): 20.0})
    s = rank_transform(simulate_recursive_ml(model, 20_000, seed=4))
    assert chi_hat(s, (0, 1), 0.99).value > 0.85


def test_recursive_simulation_is_seeded():
    model = RecursiveMLModel(3, {(0, 1): 1.0, (1, 2): 0.5})
    a = simulate_recursive_ml(model, 100, seed=5).values
    np.testing.assert_array_equal(a, simulate_recursive_ml(model, 100, seed=5).values)


# logistic ----------------------------------------------------------------


def test_logistic_density_value_and_homogeneity(rng):
    m = LogisticModel(2, 0.5)
    assert logistic_exponent_density(m, [1.0, 1.0]) == pytest.approx(2**-1.5, rel=1e-14)
    m3 = LogisticModel(3, 0.3)
    for _ in range(20):
        y = rng.exponential(size=3) + 0.1
        c = rng.uniform(0.2, 5)
        assert logistic_exponent_density(m3, c * y) * c**4 == pytest.approx(logistic_exponent_density(m3, y), rel=1e-10)


def test_logistic_angular_mass_total_and_vanishing_interior():
    # total angular mass over the l1 simplex is 2 for d = 2; the interior empties as theta -> 1
    m = LogisticModel(2, 0.5)
    assert logistic_interior_mass(m, 0.0) == pytest.approx(2.0, abs=1e-6)
    masses = [logistic_interior_mass(LogisticModel(2, th), 0.01) for th in (0.5, 0.9, 0.99, 0.999)]
    assert all(a > b for a, b in zip(masses, masses[1:]))
    assert masses[-1] < 0.02


def test_logistic_chi_orders_with_theta():
    vals = []
    for th in (0.3, 0.6, 0.9):
        s = rank_transform(simulate_logistic(LogisticModel(2, th), 100_000, seed=6))
        est = chi_hat(s, (0, 1), 0.99).value
        assert est == pytest.approx(LogisticModel(2, th).chi(), abs=0.05)
        vals.append(est)
    assert vals[0] > vals[1] > vals[2]


def test_logistic_margins_are_frechet():
    x = simulate_logistic(LogisticModel(3, 0.4), 10_000, seed=9).values
    for j in range(3):
        assert stats.kstest(x[:, j], stats.invweibull(1).cdf).pvalue > 0.01


# Husler-Reiss ------------------------------------------------------------


def test_hr_validation():
    with pytest.raises(ValueError, match="conditionally negative definite"):
        HuslerReissModel(np.array([[0, 1, 9], [1, 0, 1], [9, 1, 0]], float))
    with pytest.raises(ValueError):
        HuslerReissModel(np.array([[0, 1], [2, 0]], float))
    with pytest.raises(ValueError):
        HuslerReissModel(np.array([[1, 1], [1, 0]], float))


def test_hr_density_value():
    m = HuslerReissModel(np.array([[0, 1.0], [1.0, 0]]))
    assert hr_exponent_density(m, [1.0, 1.0]) == pytest.approx(math.exp(-1 / 8) / math.sqrt(2 * math.pi), rel=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_hr_anchor_invariance_and_homogeneity(rng, d):
    m = HuslerReissModel(random_variogram(rng, d))
    y = rng.exponential(size=(30, d)) + 0.2
    base = hr_exponent_density(m, y, 0)
    for a in range(1, d):
        np.testing.assert_allclose(hr_exponent_density(m, y, a), base, rtol=1e-10)
    c = 3.7
    np.testing.assert_allclose(hr_exponent_density(m, c * y) * c ** (d + 1), base, rtol=1e-10)


def test_hr_unit_exponent_measure_against_quadrature():
    for g in (0.25, 1.0, 4.0):
        m = HuslerReissModel(np.array([[0, g], [g, 0]]))
        lam = lambda y2, y1: hr_exponent_density(m, [y1, y2])
        # E minus [0,1]^2 = {y1 > 1} + {y1 <= 1, y2 > 1}
        a = integrate.dblquad(lam, 1, np.inf, 0, np.inf, epsabs=1e-10)[0]
        b = integrate.dblquad(lam, 0, 1, 1, np.inf, epsabs=1e-10)[0]
        assert m.exponent_measure_unit()[0] == pytest.approx(a + b, abs=1e-3)
        assert m.exponent_measure_unit()[0] == pytest.approx(2 * stats.norm.cdf(math.sqrt(g) / 2), abs=1e-10)


def test_hr_pareto_density_rejects_points_outside_support():
    m = HuslerReissModel(np.array([[0, 1.0], [1.0, 0]]))
    with pytest.raises(ValueError):
        hr_pareto_density(m, [0.5, 0.9])


def test_chi_oracle_limits_and_monotonicity():
    assert chi_oracle_hr(0.0) == 1.0
    assert chi_oracle_hr(400.0) < 1e-12
    grid = [0.01, 0.1, 0.5, 1, 2, 4, 8, 16]
    vals = [chi_oracle_hr(g) for g in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    np.testing.assert_allclose(vals, chi_hr_closed_form(grid), atol=1e-9)
    assert chi_oracle_hr(1.0) == pytest.approx(0.6171, abs=1e-4)


def test_hr_sampler_support_margin_and_chi():
    m = HuslerReissModel(np.array([[0, 1.0], [1.0, 0]]))
    info = simulate_hr_pareto(m, 100_000, seed=3, return_info=True)
    y = info.samples
    assert np.all(y.max(axis=1) >= 1.0)
    assert 0 < info.acceptance_rate <= 1
    above = y[y[:, 0] > 1, 0]
    assert stats.kstest(above, stats.pareto(1).cdf).pvalue > 0.01
    s = rank_transform(y)
    assert chi_hat(s, (0, 1), 0.99).value == pytest.approx(chi_oracle_hr(1.0), abs=0.03)


def test_doubling_gamma_lowers_dependence():
    chis = []
    for g in (0.5, 1.0, 2.0):
        y = simulate_hr_pareto(HuslerReissModel(np.array([[0, g], [g, 0]])), 50_000, seed=8)
        chis.append(chi_hat(rank_transform(y), (0, 1), 0.98).value)
    assert chis[0] > chis[1] > chis[2]


def test_hr_sampler_is_seeded(rng):
    m = HuslerReissModel(random_variogram(rng, 4))
    np.testing.assert_array_equal(simulate_hr_pareto(m, 200, seed=1), simulate_hr_pareto(m, 200, seed=1))
