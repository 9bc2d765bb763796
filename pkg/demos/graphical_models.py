"""
Extremal graphical models
=========================

Simulate a Husler-Reiss tree, learn the tree from chi, fit the edges by
censored likelihood and let a greedy AIC search decide whether triangles help.
"""
import numpy as np

from sparse_extremes import (ExtremalGraph, HuslerReissModel, chi_matrix, chi_weights, ci_pattern,
                             fit_graph, greedy_block_search, mst_learn, rank_transform,
                             simulate_hr_pareto, threshold_from_quantile, tree_gamma)

tree = ExtremalGraph.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)])
gamma = tree_gamma(tree, {(0, 1): 0.5, (1, 2): 1.0, (1, 3): 0.8, (3, 4): 1.5})
model = HuslerReissModel(gamma)
print("conditional independences in the truth:", sorted(ci_pattern(model)))

sample = rank_transform(simulate_hr_pareto(model, 5000, seed=5))
learned = mst_learn(chi_weights(chi_matrix(sample, 0.95)))
print("learned tree:", sorted(learned.edges), " correct:", learned.edges == tree.edges)

t = threshold_from_quantile(0.9)
fit = fit_graph(sample, learned, t)
print("fitted edge variograms:", {e: round(float(fit.gamma[e]), 2) for e in sorted(learned.edges)})
print("loglik", round(fit.loglik, 1), " params", fit.n_params, " AIC", round(fit.aic, 1))

search = greedy_block_search(sample, t, max_clique=3, start=learned)
print("AIC path:", [round(a, 1) for a in search.aic_path])
print("edges added by the search:", search.added_edges)
