"""
Which groups of variables are extreme together
==============================================

Four detectors of concomitant extremes applied to one max-linear sample
whose extremes occur on {0, 1} and on {2, 3, 4}.
"""
import numpy as np

from sparse_extremes import (MaxLinearModel, apriori_faces, extract_exceedances, goix_faces,
                             greedy_adjust_face, meyer_faces, rank_transform, simpson_faces,
                             simulate_max_linear)

A = np.zeros((5, 2))
A[:2, 0] = 1.0
A[2:, 1] = 1.0
sample = rank_transform(simulate_max_linear(MaxLinearModel(A), 50_000, seed=4))

# Below the limit both factors are sometimes large together, which puts
# spurious mass on the full set. Going further into the tail removes it.
for k in (1000, 100):
    print(f"k={k}: goix", goix_faces(extract_exceedances(sample, "linf", k), 0.1, 0.05).maximal())
k = 100

goix = goix_faces(extract_exceedances(sample, "linf", k), epsilon=0.1, u=0.05)
print("goix:   ", goix.maximal())

meyer = meyer_faces(extract_exceedances(sample, "l1", k), u=0.05)
print("meyer:  ", meyer.maximal(), [round(f.mass, 3) for f in meyer.faces])

simpson = simpson_faces(sample, delta=0.5, k=k)
print("simpson:", simpson.maximal())

apriori = apriori_faces(sample, k, criterion="cond_chi", threshold_or_level=0.5)
print("apriori:", apriori.maximal())

# Start from a wrong guess and let the greedy step repair it
fixed = greedy_adjust_face(sample, (1, 2, 3), k)
print("greedy from (1, 2, 3):", fixed.face, "after", len(fixed.trace), "moves")
