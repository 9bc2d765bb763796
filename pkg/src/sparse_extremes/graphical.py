"""Extremal graphical models for Husler-Reiss distributions.

Conditional independence read off the precision matrices K^(m), tree and
block-graph densities, minimum-spanning-tree structure learning, censored
clique likelihoods and a greedy AIC search over block graphs.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import networkx as nx
import numpy as np
from scipy import optimize
from scipy.stats import qmc

from ._mvn import mvn_cdf, normal_cdf_small
from .coefficients import chi_from_uniform
from .ingest import ExceedanceSet, StandardizedSample
from .models import HuslerReissModel, LogisticModel, chi_oracle_hr, gamma_from_chi, hr_exponent_density
from .models import logistic_exponent_density, sigma_from_gamma

GAMMA_BOX = (1e-6, 50.0)
MAX_ITER = 500


def _pair(i: int, j: int) -> tuple[int, int]:
    i, j = int(i), int(j)
    if i == j:
        raise ValueError("self loops are not allowed")
    return (i, j) if i < j else (j, i)


# ------------------------------------------------------------------- graphs


@dataclass(frozen=True)
class ExtremalGraph:
    d: int
    edges: frozenset
    kind: str = field(init=False)
    cliques: tuple = field(init=False)
    separators: tuple = field(init=False)

    def __post_init__(self):
        edges = frozenset(_pair(i, j) for i, j in self.edges)
        for i, j in edges:
            if not (0 <= i < self.d and 0 <= j < self.d):
                raise ValueError(f"edge {(i, j)} outside 0..{self.d - 1}")
        object.__setattr__(self, "edges", edges)
        g = self.to_networkx()
        connected = self.d > 0 and nx.is_connected(g)
        if connected and len(edges) == self.d - 1:
            kind = "tree"
        elif nx.is_chordal(g):
            kind = "block"
        else:
            kind = "general"
        cliques, seps = _junction(g) if kind != "general" else (tuple(), tuple())
        if kind == "block" and (not connected or any(len(s) != 1 for s in seps)):
            kind = "general"
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "cliques", cliques)
        object.__setattr__(self, "separators", seps)

    @classmethod
    def from_edges(cls, d: int, edges: Iterable) -> "ExtremalGraph":
        return cls(d, frozenset(tuple(e) for e in edges))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.d))
        g.add_edges_from(self.edges)
        return g

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def is_block(self, max_clique: int | None = None) -> bool:
        if self.kind not in ("tree", "block"):
            return False
        return max_clique is None or max(len(c) for c in self.cliques) <= max_clique

    def to_dict(self) -> dict:
        return {"d": self.d, "edges": [list(e) for e in self.sorted_edges()], "kind": self.kind,
                "cliques": [list(c) for c in self.cliques], "separators": [list(s) for s in self.separators]}

    @classmethod
    def from_dict(cls, doc: dict) -> "ExtremalGraph":
        return cls.from_edges(int(doc["d"]), [tuple(e) for e in doc["edges"]])


def _junction(g: nx.Graph) -> tuple[tuple, tuple]:
    """Maximal cliques and the separators of a junction tree (chordal input)."""
    cliques = sorted((tuple(sorted(c)) for c in nx.find_cliques(g)), key=lambda c: (c[0], c))
    cg = nx.Graph()
    cg.add_nodes_from(range(len(cliques)))
    for a, b in itertools.combinations(range(len(cliques)), 2):
        w = len(set(cliques[a]) & set(cliques[b]))
        if w:
            cg.add_edge(a, b, weight=w)
    jt = nx.maximum_spanning_tree(cg, algorithm="kruskal")
    seps = sorted(tuple(sorted(set(cliques[a]) & set(cliques[b]))) for a, b in jt.edges)
    return tuple(cliques), tuple(seps)


def assert_block_graph(graph: ExtremalGraph, max_clique: int = 3) -> None:
    """Structural check used at every step of the greedy search."""
    g = graph.to_networkx()
    assert nx.is_connected(g), "graph is disconnected"
    assert nx.is_chordal(g), "graph is not decomposable"
    assert all(len(s) == 1 for s in graph.separators), "separator with more than one vertex"
    assert max(len(c) for c in graph.cliques) <= max_clique, "clique too large"
    assert len(graph.separators) == len(graph.cliques) - 1
    # every edge lies in exactly one clique of a block graph
    assert sum(len(c) * (len(c) - 1) // 2 for c in graph.cliques) == len(graph.edges)


# ------------------------------------------------ conditional independence


def hr_precision(model: HuslerReissModel, m: int = 0) -> np.ndarray:
    """K^(m), the inverse of Sigma^(m)."""
    if not 0 <= m < model.d:
        raise IndexError("anchor out of range")
    chol, _ = model._chol(m)
    inv = np.linalg.inv(chol)
    return inv.T @ inv


def _pattern_from_anchor(model: HuslerReissModel, m: int, tol: float) -> frozenset:
    k = hr_precision(model, m)
    keep = [i for i in range(model.d) if i != m]
    out = set()
    for a, b in itertools.combinations(range(model.d - 1), 2):
        if abs(k[a, b]) <= tol:
            out.add(_pair(keep[a], keep[b]))
    sums = k.sum(axis=1)
    for a in range(model.d - 1):
        if abs(sums[a]) <= tol:
            out.add(_pair(keep[a], m))
    return frozenset(out)


def ci_pattern(model: HuslerReissModel, tol: float = 1e-8, m: int = 0, m2: int | None = None) -> frozenset:
    """Pairs {i, j} that are extremally conditionally independent given the rest.

    Off-diagonal zeros of K^(m) cover pairs away from the anchor; zero row sums
    cover pairs involving it.  The result is cross-checked with a second anchor.
    """
    pattern = _pattern_from_anchor(model, m, tol)
    if m2 is None:
        m2 = 1 if m != 1 else 0
    if m2 != m:
        other = _pattern_from_anchor(model, m2, tol)
        if other != pattern:
            warnings.warn(
                f"conditional independence pattern differs between anchors {m} and {m2}: "
                f"{sorted(pattern ^ other)} (numerical instability?)",
                RuntimeWarning,
                stacklevel=2,
            )
    return pattern


def dependence_graph(model: HuslerReissModel, tol: float = 1e-8) -> ExtremalGraph:
    nonedges = ci_pattern(model, tol)
    edges = [p for p in itertools.combinations(range(model.d), 2) if p not in nonedges]
    return ExtremalGraph.from_edges(model.d, edges)


# --------------------------------------------------------- Gamma completion


def complete_gamma(graph: ExtremalGraph, edge_gammas: Mapping) -> np.ndarray:
    """Fill Gamma by summing edge values along shortest paths.

    On trees this is the unique-path sum; on block graphs shortest paths pass
    through the cut vertices and are unique as well.
    """
    vals = {_pair(*e): float(v) for e, v in edge_gammas.items()}
    if set(vals) != set(graph.edges):
        raise ValueError("need exactly one value per edge")
    if any(not v > 0 or not math.isfinite(v) for v in vals.values()):
        raise ValueError("edge values must be positive and finite")
    g = graph.to_networkx()
    if not nx.is_connected(g):
        raise ValueError("graph is disconnected; Gamma cannot be completed")
    d = graph.d
    out = np.zeros((d, d))
    paths = dict(nx.all_pairs_shortest_path(g))
    for i in range(d):
        for j in range(i + 1, d):
            p = paths[i][j]
            out[i, j] = out[j, i] = sum(vals[_pair(a, b)] for a, b in zip(p, p[1:]))
    return out


def tree_gamma(tree: ExtremalGraph, edge_gammas: Mapping) -> np.ndarray:
    if tree.kind != "tree":
        raise ValueError("expected a spanning tree")
    return complete_gamma(tree, edge_gammas)


# ------------------------------------------------------------- tree density


EdgeDensity = HuslerReissModel | LogisticModel | Callable


def _edge_logdensity(edge_model, yi: np.ndarray, yj: np.ndarray) -> np.ndarray:
    y = np.column_stack([yi, yj])
    if isinstance(edge_model, HuslerReissModel):
        return np.log(np.atleast_1d(hr_exponent_density(edge_model, y)))
    if isinstance(edge_model, LogisticModel):
        return np.log(np.atleast_1d(logistic_exponent_density(edge_model, y)))
    return np.log(np.asarray([edge_model(a, b) for a, b in y], float))


def _tree_unnormalized_log(tree: ExtremalGraph, densities: Mapping, y: np.ndarray) -> np.ndarray:
    out = -2.0 * np.log(y).sum(axis=1)
    for (i, j), edge_model in densities.items():
        out = out + _edge_logdensity(edge_model, y[:, i], y[:, j]) + 2 * np.log(y[:, i]) + 2 * np.log(y[:, j])
    return out


def _check_densities(tree: ExtremalGraph, densities: Mapping) -> dict:
    dens = {_pair(*e): v for e, v in densities.items()}
    if tree.kind != "tree":
        raise ValueError("tree_density needs a spanning tree")
    if set(dens) != set(tree.edges):
        raise ValueError("need one bivariate density per tree edge")
    for edge_model in dens.values():
        if isinstance(edge_model, (HuslerReissModel, LogisticModel)) and edge_model.d != 2:
            raise ValueError("edge models must be bivariate")
    return dens


def tree_normalizer(tree: ExtremalGraph, densities: Mapping, n_points: int = 1 << 14, n_rep: int = 8,
                    seed: int = 0, power: float = 3.0) -> tuple[float, float]:
    """Mass of the unnormalized tree density over {max(y) >= 1}, with an error estimate.

    Homogeneity of degree -(d+1) reduces the mass to sum_m of the integral over
    the unit cube of the density with y_m = 1.  For all-Husler-Reiss trees this
    equals Lambda(E minus [0,1]^d) of the path-sum model and is returned exactly
    (error 0) for d <= 3.
    """
    dens = _check_densities(tree, densities)
    d = tree.d
    if all(isinstance(s, HuslerReissModel) for s in dens.values()):
        g = tree_gamma(tree, {e: s.gamma[0, 1] for e, s in dens.items()})
        return HuslerReissModel(g).exponent_measure_unit()
    rng = np.random.default_rng(seed)
    m_pts = 1 << int(np.ceil(np.log2(n_points)))
    reps = []
    for _ in range(n_rep):
        u = qmc.Sobol(d - 1, scramble=True, seed=rng).random(m_pts)
        u = np.clip(u, 1e-300, 1.0)
        w = u ** power
        jac = np.prod(power * u ** (power - 1.0), axis=1)
        total = 0.0
        for m in range(d):
            y = np.ones((m_pts, d))
            y[:, [i for i in range(d) if i != m]] = w
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.exp(_tree_unnormalized_log(tree, dens, y)) * jac
            total += float(np.nan_to_num(f, nan=0.0, posinf=0.0).mean())
        reps.append(total)
    reps = np.asarray(reps)
    return float(reps.mean()), float(reps.std(ddof=1) / math.sqrt(n_rep))


def tree_density(tree: ExtremalGraph, bivariate_densities: Mapping, y, normalizer: float | None = None,
                 **qmc_opts):
    """Pareto density on a tree assembled from bivariate exponent densities.

    f(y) = prod_edges lambda_ij(y_i, y_j) / (y_i^-2 y_j^-2) * prod_i y_i^-2 / c,
    where c makes the density integrate to one over {max(y) >= 1}.
    """
    dens = _check_densities(tree, bivariate_densities)
    y = np.asarray(y, float)
    yy = np.atleast_2d(y)
    if yy.shape[1] != tree.d:
        raise ValueError(f"expected {tree.d} coordinates")
    if np.any(yy <= 0) or np.any(yy.max(axis=1) < 1.0):
        raise ValueError("point outside the support {y > 0, max(y) >= 1}")
    if normalizer is None:
        normalizer = tree_normalizer(tree, dens, **qmc_opts)[0]
    out = np.exp(_tree_unnormalized_log(tree, dens, yy) - math.log(normalizer))
    return float(out[0]) if y.ndim == 1 else out


# ----------------------------------------------------------- MST learning


def mst_learn(weights) -> ExtremalGraph:
    """Kruskal minimum spanning tree; ties broken by lexicographic edge order.

    Infinite weights mark forbidden edges.
    """
    w = np.asarray(weights, float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weights must be a square matrix")
    d = w.shape[0]
    if not np.allclose(w, w.T, equal_nan=False):
        raise ValueError("weights must be symmetric")
    if np.any(np.isnan(w)):
        raise ValueError("weights contain NaN")
    cand = sorted((w[i, j], i, j) for i, j in itertools.combinations(range(d), 2) if np.isfinite(w[i, j]))
    parent = list(range(d))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    edges = []
    for _, i, j in cand:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j))
            if len(edges) == d - 1:
                break
    if len(edges) != d - 1:
        raise ValueError("graph of allowed edges is disconnected; no spanning tree")
    return ExtremalGraph.from_edges(d, edges)


def chi_weights(chi: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """-log chi with chi floored so that zero estimates stay finite."""
    chi = np.asarray(chi, float)
    w = -np.log(np.maximum(chi, floor))
    np.fill_diagonal(w, 0.0)
    return w


# -------------------------------------------------------- censored likelihood


def _pareto_rows(data) -> np.ndarray:
    if isinstance(data, StandardizedSample):
        return data.pareto
    if isinstance(data, ExceedanceSet):
        return data.radii[:, None] * data.angles
    x = np.asarray(data, float)
    if x.ndim != 2:
        raise ValueError("expected an n x d matrix on the Pareto scale")
    return x


def threshold_from_quantile(q: float) -> float:
    """Pareto-scale threshold matching the marginal quantile q."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    return 1.0 / (1.0 - q)


@dataclass(frozen=True)
class _Pattern:
    m: int
    Ap: list
    B: list
    ia: list
    ib: list
    lym: np.ndarray
    lya: np.ndarray
    lya_sum: np.ndarray


class CensoredRows:
    """Exceedance rows of a vertex set, grouped by which coordinates lie above
    the threshold.  Built once and reused across likelihood evaluations."""

    def __init__(self, data, vertices, threshold):
        x = _pareto_rows(data)
        verts = [int(c) for c in vertices]
        t = np.broadcast_to(np.asarray(threshold, float), (x.shape[1],))[verts]
        if np.any(t <= 0):
            raise ValueError("threshold must be positive")
        y = x[:, verts] / t
        y = y[(y > 1.0).any(axis=1)]
        if np.any(y <= 0):
            raise ValueError("data must be positive on the Pareto scale")
        self.d = len(verts)
        self.n = y.shape[0]
        ly = np.log(y)
        codes = (y > 1.0) @ (1 << np.arange(self.d))
        self.patterns = []
        for code in np.unique(codes):
            rows = np.flatnonzero(codes == code)
            A = [i for i in range(self.d) if code >> i & 1]
            B = [i for i in range(self.d) if not code >> i & 1]
            m = A[0]
            pos = {v: k for k, v in enumerate(i for i in range(self.d) if i != m)}
            lya = ly[np.ix_(rows, A[1:])]
            self.patterns.append(_Pattern(m, A[1:], B, [pos[i] for i in A[1:]], [pos[i] for i in B],
                                          ly[rows, m], lya, lya.sum(axis=1)))

    def logterms(self, gamma: np.ndarray, mvn_opts: dict) -> np.ndarray:
        """Log of the exponent density integrated over the censored coordinates, per pattern."""
        out = []
        sigmas = {}
        for p in self.patterns:
            m, Ap, B, ia, ib = p.m, p.Ap, p.B, p.ia, p.ib
            if m not in sigmas:
                sigmas[m] = sigma_from_gamma(gamma, m)
            sig = sigmas[m]
            val = -2.0 * p.lym
            if Ap:
                saa = sig[np.ix_(ia, ia)]
                xa = p.lya - p.lym[:, None] + gamma[Ap, m] / 2.0
                ch = np.linalg.cholesky(saa)
                z = np.linalg.solve(ch, xa.T)
                val = val - p.lya_sum - 0.5 * (z * z).sum(axis=0) \
                    - np.log(np.diag(ch)).sum() - 0.5 * len(Ap) * math.log(2 * math.pi)
            if B:
                sbb = sig[np.ix_(ib, ib)]
                upper = -p.lym[:, None] + gamma[B, m] / 2.0
                if Ap:
                    sba = sig[np.ix_(ib, ia)]
                    coef = np.linalg.solve(saa, sba.T).T  # Sigma_BA Sigma_AA^-1
                    upper = upper - xa @ coef.T
                    sbb = sbb - coef @ sba.T
                if len(B) <= 2:
                    prob = normal_cdf_small(upper, sbb)
                else:
                    prob = np.empty(len(p.lym))
                    for s in range(0, len(prob), 128):
                        prob[s:s + 128] = mvn_cdf(upper[s:s + 128], sbb, **mvn_opts)[0]
                with np.errstate(divide="ignore"):
                    val = val + np.log(prob)
            out.append(val)
        return np.concatenate(out) if out else np.empty(0)

    def loglik(self, gamma: np.ndarray, mvn_opts: dict | None = None) -> float:
        gamma = np.asarray(gamma, float)
        if gamma.shape != (self.d, self.d):
            raise ValueError("gamma size does not match the vertex set")
        if self.n == 0:
            return 0.0
        opts = DEFAULT_MVN if mvn_opts is None else dict(mvn_opts)
        try:
            lam1 = _lambda1(gamma, opts)
            terms = self.logterms(gamma, opts)
        except np.linalg.LinAlgError:
            raise ValueError("gamma is not conditionally negative definite") from None
        total = float(terms.sum() - self.n * math.log(lam1))
        if not math.isfinite(total):
            raise ValueError("non-finite likelihood (degenerate gamma)")
        return total


DEFAULT_MVN = {"n_points": 1024, "n_rep": 2, "seed": 0}


def _lambda1(gamma: np.ndarray, opts: dict) -> float:
    """Lambda(E minus [0,1]^d) for a Husler-Reiss Gamma, without the model checks."""
    d = gamma.shape[0]
    total = 0.0
    for m in range(d):
        keep = [i for i in range(d) if i != m]
        sig = sigma_from_gamma(gamma, m)
        np.linalg.cholesky(sig)
        upper = gamma[keep, m] / 2.0
        if d <= 3:
            total += float(normal_cdf_small(upper[None, :], sig)[0])
        else:
            total += float(mvn_cdf(upper, sig, **opts)[0])
    return total


def censored_loglik(data, gamma, threshold, vertices=None, mvn_opts: dict | None = None) -> float:
    """Censored Husler-Reiss Pareto log-likelihood of the rows where some
    coordinate in ``vertices`` exceeds the threshold.

    Coordinates below the threshold enter through the Gaussian probability of
    the censored block; blocks of size three or more use quasi-Monte Carlo.
    """
    gamma = np.asarray(gamma, float)
    verts = list(range(gamma.shape[0])) if vertices is None else [int(v) for v in vertices]
    HuslerReissModel(gamma)  # validates Gamma
    return CensoredRows(data, verts, threshold).loglik(gamma, mvn_opts)


def censored_clique_loglik(data, clique, gamma_block, threshold) -> float:
    """Censored log-likelihood of a clique of size 2 or 3 (exact Gaussian CDFs)."""
    clique = list(clique)
    if len(clique) not in (2, 3):
        raise ValueError("cliques must have 2 or 3 vertices")
    return censored_loglik(data, gamma_block, threshold, clique)


# ------------------------------------------------------------- clique fits


@dataclass(frozen=True)
class CliqueFit:
    clique: tuple[int, ...]
    gamma: np.ndarray
    loglik: float
    converged: bool
    at_bound: bool
    n_iter: int

    @property
    def warning(self) -> bool:
        return not self.converged or self.at_bound

    def to_dict(self) -> dict:
        return {"clique": list(self.clique), "gamma": self.gamma.tolist(), "loglik": self.loglik,
                "converged": self.converged, "at_bound": self.at_bound, "n_iter": self.n_iter}


def _block_from_params(theta: np.ndarray, size: int) -> np.ndarray:
    g = np.zeros((size, size))
    for val, (i, j) in zip(np.exp(theta), itertools.combinations(range(size), 2)):
        g[i, j] = g[j, i] = val
    return g


def _empirical_chi_init(data, clique, threshold) -> np.ndarray:
    x = _pareto_rows(data)[:, list(clique)]
    t = float(np.max(np.broadcast_to(np.asarray(threshold, float), (1,))))
    out = []
    for i, j in itertools.combinations(range(len(clique)), 2):
        both = np.sum((x[:, i] > t) & (x[:, j] > t))
        denom = 0.5 * (np.sum(x[:, i] > t) + np.sum(x[:, j] > t))
        out.append(both / denom if denom > 0 else 0.0)
    return gamma_from_chi(np.asarray(out))


def _valid_start(g: np.ndarray) -> np.ndarray:
    """Pull a triangle of Gamma values toward its mean until sqrt(Gamma) obeys
    strict triangle inequalities (conditional negative definiteness for three
    variables)."""
    g = np.array(g, float)
    if g.size != 3:
        return g
    r = np.sqrt(g)
    mean = r.mean()
    for lam in np.linspace(0.0, 1.0, 21):
        s = (1.0 - lam) * r + lam * mean
        if np.all(s <= 0.9 * (s.sum() - s)):
            return s**2
    return np.full(3, mean**2)


def fit_clique(data, clique, threshold, init=None, max_iter: int = MAX_ITER) -> CliqueFit:
    """Maximize the censored clique likelihood over log(Gamma) entries in a box."""
    clique = tuple(int(c) for c in clique)
    size = len(clique)
    if size not in (2, 3):
        raise ValueError("cliques must have 2 or 3 vertices")
    npar = size * (size - 1) // 2
    lo, hi = math.log(GAMMA_BOX[0]), math.log(GAMMA_BOX[1])
    if init is None:
        g0 = _empirical_chi_init(data, clique, threshold)
    else:
        g0 = np.asarray(init, float)
        if g0.ndim == 2:
            g0 = np.array([g0[i, j] for i, j in itertools.combinations(range(size), 2)])
    g0 = _valid_start(np.clip(np.broadcast_to(g0, (npar,)), GAMMA_BOX[0] * 10, GAMMA_BOX[1] / 10))
    rows = CensoredRows(data, clique, threshold)

    def negll(theta):
        theta = np.clip(theta, lo, hi)
        try:
            return -rows.loglik(_block_from_params(theta, size))
        except ValueError:
            return 1e300

    best = None
    n_iter_total = 0
    starts = [np.log(g0), np.log(g0) + math.log(2.0), np.log(g0) - math.log(2.0)]
    for s in starts:
        s = np.clip(s, lo, hi)
        f0 = negll(s)
        res = optimize.minimize(
            negll, s, method="Nelder-Mead", bounds=[(lo, hi)] * npar,
            options={"maxiter": max_iter, "xatol": 1e-4, "fatol": 1e-8 * max(1.0, abs(f0)), "adaptive": npar > 2},
        )
        n_iter_total += int(res.nit)
        if best is None or res.fun < best.fun:
            best = res
    if best.fun >= 1e299:
        raise ValueError(f"clique {clique}: no valid Gamma found from the starting values")
    theta = np.clip(best.x, lo, hi)
    g = _block_from_params(theta, size)
    at_bound = bool(np.any(np.abs(theta - lo) < 1e-3) or np.any(np.abs(theta - hi) < 1e-3))
    fit = CliqueFit(clique, g, -float(best.fun), bool(best.success), at_bound, n_iter_total)
    if fit.warning:
        warnings.warn(
            f"clique {clique}: " + ("optimizer did not converge" if not best.success else "estimate at the search bound"),
            RuntimeWarning,
            stacklevel=2,
        )
    return fit


# ---------------------------------------------------------- model search


@dataclass(frozen=True)
class FittedModel:
    graph: ExtremalGraph
    gamma: np.ndarray
    clique_params: dict
    loglik: float
    n_params: int
    aic: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.aic - (2 * self.n_params - 2 * self.loglik)) > 1e-9 * max(1.0, abs(self.aic)):
            raise ValueError("aic must equal 2 n_params - 2 loglik")

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "gamma": self.gamma.tolist(),
            "clique_params": {",".join(map(str, c)): fit.to_dict() for c, fit in self.clique_params.items()},
            "loglik": self.loglik,
            "n_params": self.n_params,
            "aic": self.aic,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class SearchResult:
    path: tuple[FittedModel, ...]
    best: FittedModel

    @property
    def aic_path(self) -> list[float]:
        return [m.aic for m in self.path]

    @property
    def added_edges(self) -> int:
        return len(self.best.graph.edges) - (self.best.graph.d - 1)


def count_params(graph: ExtremalGraph) -> int:
    """Free Gamma entries: per-clique pairs minus those shared through separators."""
    per_clique = sum(len(c) * (len(c) - 1) // 2 for c in graph.cliques)
    shared = sum(len(s) * (len(s) - 1) // 2 for s in graph.separators)
    return per_clique - shared


def _gamma_from_cliques(graph: ExtremalGraph, fits: Mapping) -> np.ndarray:
    edge_vals = {}
    for c in graph.cliques:
        f = fits[c]
        for a, b in itertools.combinations(range(len(c)), 2):
            edge_vals[_pair(c[a], c[b])] = f.gamma[a, b]
    return complete_gamma(graph, edge_vals)


def fit_graph(data, graph: ExtremalGraph, threshold, cache: dict | None = None, mvn_opts: dict | None = None,
              max_clique: int = 3) -> FittedModel:
    """Fit each clique separately, complete Gamma through the separators and
    score the completed model with the censored likelihood on the rows where
    any variable exceeds the threshold."""
    if not graph.is_block(max_clique):
        raise ValueError("fit_graph handles block graphs with small cliques only")
    cache = {} if cache is None else cache
    fits = {}
    for c in graph.cliques:
        if c not in cache:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                cache[c] = fit_clique(data, c, threshold)
            for w in caught:
                warnings.warn(w.message, w.category, stacklevel=2)
        fits[c] = cache[c]
    gamma = _gamma_from_cliques(graph, fits)
    # path sums of valid clique blocks are valid; skip the strict eigenvalue
    # check, which near-degenerate fits at the lower bound can trip
    ll = CensoredRows(data, range(graph.d), threshold).loglik(gamma, mvn_opts)
    k = count_params(graph)
    diag = {"clique_warnings": [list(c) for c, f in fits.items() if f.warning]}
    return FittedModel(graph, gamma, fits, ll, k, 2 * k - 2 * ll, diag)


def admissible_edges(graph: ExtremalGraph, max_clique: int = 3) -> list[tuple[int, int]]:
    out = []
    for i, j in itertools.combinations(range(graph.d), 2):
        if (i, j) in graph.edges:
            continue
        cand = ExtremalGraph(graph.d, graph.edges | {(i, j)})
        if cand.is_block(max_clique):
            out.append((i, j))
    return out


def initial_tree(data, threshold) -> ExtremalGraph:
    """Minimum spanning tree on -log chi at the threshold's marginal level."""
    x = _pareto_rows(data)
    t = float(np.max(np.asarray(threshold, float)))
    q = 1.0 - 1.0 / t
    u = 1.0 - 1.0 / x
    d = x.shape[1]
    chi = np.eye(d)
    for i, j in itertools.combinations(range(d), 2):
        chi[i, j] = chi[j, i] = chi_from_uniform(u, (i, j), q)[0]
    return mst_learn(chi_weights(chi))


def greedy_block_search(data, threshold, max_clique: int = 3, start: ExtremalGraph | None = None,
                        mvn_opts: dict | None = None, log: Callable[[str], None] | None = None) -> SearchResult:
    """Forward selection of edges over block graphs by AIC, starting from a tree.

    At each step every admissible edge is scored; the lowest AIC wins (ties by
    edge order) and the search stops when no edge lowers the current AIC.
    """
    graph = start if start is not None else initial_tree(data, threshold)
    if graph.kind != "tree":
        raise ValueError("the search starts from a spanning tree")
    cache: dict = {}
    current = fit_graph(data, graph, threshold, cache, mvn_opts, max_clique)
    assert_block_graph(current.graph, max_clique)
    assert current.n_params == len(current.graph.edges)
    path = [current]
    while True:
        options = []
        for e in admissible_edges(current.graph, max_clique):
            g = ExtremalGraph(current.graph.d, current.graph.edges | {e})
            assert_block_graph(g, max_clique)
            fm = fit_graph(data, g, threshold, cache, mvn_opts, max_clique)
            assert fm.n_params == len(g.edges)
            options.append((fm.aic, e, fm))
        if not options:
            break
        options.sort(key=lambda o: (o[0], o[1]))
        aic, e, fm = options[0]
        if log is not None:
            log(f"step {len(path)}: best edge {e} aic {aic:.3f} (current {current.aic:.3f})")
        if not aic < current.aic:
            break
        current = fm
        path.append(current)
    best = min(path, key=lambda m: m.aic)
    return SearchResult(tuple(path), best)


def model_chi_matrix(fitted: FittedModel | np.ndarray) -> np.ndarray:
    gamma = fitted.gamma if isinstance(fitted, FittedModel) else np.asarray(fitted, float)
    d = gamma.shape[0]
    out = np.eye(d)
    for i, j in itertools.combinations(range(d), 2):
        out[i, j] = out[j, i] = chi_oracle_hr(gamma[i, j])
    return out
