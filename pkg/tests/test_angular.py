import itertools

import numpy as np
import pytest

from sparse_extremes import (
    AngularCloud,
    angular_dissimilarity,
    centers_to_faces,
    extract_exceedances,
    spherical_kmeans,
)
from sparse_extremes.angular import ClusterResult

from conftest import sample_of


def test_dissimilarity_examples():
    assert angular_dissimilarity([1, 2, 3], [1, 2, 3]) == pytest.approx(0.0, abs=1e-15)
    assert angular_dissimilarity([1, 0, 0], [0, 1, 0]) == 1.0
    x = np.array([1, 1, 0]) / np.sqrt(2)
    assert angular_dissimilarity(x, [1, 0, 0]) == pytest.approx(1 - 1 / np.sqrt(2), abs=1e-15)


def test_dissimilarity_ignores_norm_and_scale(rng):
    x, y = rng.uniform(size=(2, 5))
    base = angular_dissimilarity(x, y)
    assert angular_dissimilarity(x / x.sum(), y / y.max()) == pytest.approx(base, abs=1e-14)
    assert angular_dissimilarity(3 * x, 0.1 * y) == pytest.approx(base, abs=1e-14)
    assert angular_dissimilarity(y, x) == base


def test_dissimilarity_rejects_zero():
    with pytest.raises(ValueError):
        angular_dissimilarity([0, 0], [1, 0])


def test_identical_angles_one_cluster():
    cloud = AngularCloud.from_rows(np.tile([0.2, 0.3, 0.5], (10, 1)))
    res = spherical_kmeans(cloud, 1, seed=0, restarts=3)
    np.testing.assert_allclose(res.centers[0], [0.2, 0.3, 0.5], atol=1e-12)
    assert res.cost == pytest.approx(0.0, abs=1e-12)


def brute_best_cost(ux, p):
    best = np.inf
    for labels in itertools.product(range(p), repeat=len(ux)):
        labels = np.array(labels)
        if len(set(labels)) < p:
            continue
        cost = 0.0
        for j in range(p):
            m = ux[labels == j].sum(axis=0)
            c = m / np.linalg.norm(m)
            cost += np.sum(1 - ux[labels == j] @ c)
        best = min(best, cost / len(ux))
    return best


def test_two_groups_match_brute_force():
    pts = np.array([[0.95, 0.05], [0.9, 0.1], [0.99, 0.01], [0.1, 0.9], [0.02, 0.98], [0.2, 0.8]])
    cloud = AngularCloud.from_rows(pts)
    res = spherical_kmeans(cloud, 2, seed=1, restarts=5)
    ux = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    assert res.cost == pytest.approx(brute_best_cost(ux, 2), abs=1e-12)
    assert len(set(res.assignment[:3])) == 1 and len(set(res.assignment[3:])) == 1
    assert res.assignment[0] != res.assignment[3]
    top = sorted(np.argmax(res.centers, axis=1))
    assert top == [0, 1]


def test_cost_trace_non_increasing_and_counts_partition(rng):
    sample = sample_of(rng.standard_t(2, size=(2024, 6)))
    exc = extract_exceedances(sample, "l1", 202)
    res = spherical_kmeans(AngularCloud.from_exceedances(exc), 10, seed=4, restarts=5)
    assert all(b <= a + 1e-12 for a, b in zip(res.cost_trace, res.cost_trace[1:]))
    assert res.counts().sum() == 202
    assert np.all(res.counts() > 0)
    np.testing.assert_allclose(res.centers.sum(axis=1), 1.0, atol=1e-12)


def test_zero_cost_when_p_equals_distinct_rows():
    pts = np.array([[1, 0, 0], [0, 1, 0], [0.5, 0.5, 0], [1, 0, 0]], float)
    res = spherical_kmeans(AngularCloud.from_rows(pts), 3, seed=0)
    assert res.cost == pytest.approx(0.0, abs=1e-12)


def test_relabeling_rows_keeps_the_partition(rng):
    pts = np.vstack([rng.dirichlet([20, 1, 1], 15), rng.dirichlet([1, 1, 20], 15)])
    perm = rng.permutation(30)
    a = spherical_kmeans(AngularCloud.from_rows(pts), 2, seed=2)
    b = spherical_kmeans(AngularCloud.from_rows(pts[perm]), 2, seed=2)
    assert a.cost == pytest.approx(b.cost, abs=1e-12)
    same_a = a.assignment[:, None] == a.assignment[None, :]
    same_b = b.assignment[:, None] == b.assignment[None, :]
    np.testing.assert_array_equal(same_a[np.ix_(perm, perm)], same_b)


def test_too_many_clusters_rejected():
    with pytest.raises(ValueError):
        spherical_kmeans(AngularCloud.from_rows(np.tile([1.0, 1.0], (5, 1))), 2)


def test_seed_reproducibility(rng):
    cloud = AngularCloud.from_rows(rng.uniform(size=(80, 4)))
    a = spherical_kmeans(cloud, 4, seed=9, restarts=4)
    b = spherical_kmeans(cloud, 4, seed=9, restarts=4)
    np.testing.assert_array_equal(a.centers, b.centers)


def result_with(centers, assignment):
    return ClusterResult(np.array(centers, float), np.array(assignment), 0.0, 1)


def test_faces_from_centers():
    res = result_with([[1, 0, 0], [0.5, 0.49, 0.01]], [0, 1, 1, 1])
    fs = centers_to_faces(res, 0.02)
    assert {f.indices: f.mass for f in fs.faces} == {(0,): 0.25, (0, 1): 0.75}
    assert sum(f.count for f in fs.faces) == 4


def test_faces_reject_cut_above_every_center():
    with pytest.raises(ValueError):
        centers_to_faces(result_with([[0.5, 0.5]], [0, 0]), 0.6)
    with pytest.raises(ValueError):
        centers_to_faces(result_with([[0.5, 0.5]], [0, 0]), 1.0)


def test_empty_face_dropped_with_warning():
    res = result_with([[1, 0, 0], [0.34, 0.33, 0.33]], [0, 1])
    with pytest.warns(RuntimeWarning):
        fs = centers_to_faces(res, 0.4)
    assert [f.indices for f in fs.faces] == [(0,)]


def test_cloud_invariants():
    with pytest.raises(ValueError):
        AngularCloud(np.array([[0.5, 0.6]]), "l1", np.array([1.0]))
    cloud = AngularCloud.from_rows(np.array([[1.0, 3.0], [2.0, 2.0]]), weights=np.array([2.0, 6.0]))
    assert cloud.weights.sum() == pytest.approx(1.0, abs=1e-12)
