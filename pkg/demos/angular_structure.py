"""
Clustering and PCA of extremal angles
=====================================

A max-linear model puts all extremal angles on a handful of atoms.
Spherical k-means finds them, and the PCA of the angles shows how many
directions carry the extremes.
"""
import numpy as np

from sparse_extremes import (AngularCloud, MaxLinearModel, centers_to_faces, estimate_sigma,
                             extract_exceedances, pca_loss, rank_transform, simulate_max_linear,
                             spherical_kmeans, subspace_distance)

A = np.array([
    [1.0, 0.0, 0.0],
    [0.8, 0.2, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.0, 0.0, 1.0],
])
model = MaxLinearModel.from_unnormalized(A)
sample = rank_transform(simulate_max_linear(model, 10_000, seed=3))
exc = extract_exceedances(sample, "l1", 300)
print("exceedances:", exc.k, " threshold radius:", round(exc.threshold, 1))

cloud = AngularCloud.from_exceedances(exc)
clusters = spherical_kmeans(cloud, 3, seed=0)
print("cluster sizes:", clusters.counts())
print("centers:\n", np.round(clusters.centers, 2))
print("faces read off the centers:", centers_to_faces(clusters, cut=0.1).maximal())

# With three atoms the angles live (almost) in a 3-dimensional subspace
pca = estimate_sigma(AngularCloud.from_exceedances(extract_exceedances(sample, "l2", 300)))
print("eigenvalues:", np.round(pca.eigenvalues, 4))
print("PCA loss by rank:", [round(pca_loss(pca, p), 4) for p in range(1, 6)])

atoms = A / np.linalg.norm(A, axis=0)
truth, _ = np.linalg.qr(atoms)
print("distance to the span of the columns:", round(subspace_distance(pca.basis(3), truth), 3))
