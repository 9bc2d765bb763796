"""Empirical tail dependence coefficients and their consistency."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .ingest import StandardizedSample, as_sample


@dataclass(frozen=True)
class ChiEstimate:
    subset: tuple[int, ...]
    level: float
    value: float
    ci_lower: float | None = None
    ci_upper: float | None = None
    count: int = 0


@dataclass(frozen=True)
class EtaEstimate:
    subset: tuple[int, ...]
    k_used: int
    value: float
    std_err: float | None = None


def _subset(subset: Iterable[int], d: int) -> tuple[int, ...]:
    idx = tuple(sorted({int(i) for i in subset}))
    if any(i < 0 or i >= d for i in idx):
        raise IndexError(f"subset {idx} outside 0..{d - 1}")
    return idx


def _denominator(q: float, n: int) -> float:
    denom = (1.0 - q) * n
    # (1 - q) n is an exceedance count whenever q = 1 - k/n; undo the rounding
    near = round(denom)
    if near > 0 and abs(denom - near) < 1e-9:
        return float(near)
    return denom


def joint_exceedance_count(u: np.ndarray, subset: Sequence[int], q: float) -> int:
    """Rows whose empirical df values exceed ``q`` in every column of ``subset``."""
    return int(np.all(u[:, list(subset)] > q, axis=1).sum())


def chi_from_uniform(u: np.ndarray, subset: Sequence[int], q: float) -> tuple[float, int]:
    n = u.shape[0]
    count = joint_exceedance_count(u, subset, q)
    return min(1.0, count / _denominator(q, n)), count


def chi_hat(sample, subset: Iterable[int], level: float) -> ChiEstimate:
    """chi_I(q): joint exceedances of level q in all of I over (1 - q) n, clipped to [0, 1]."""
    sample = as_sample(sample)
    idx = _subset(subset, sample.d)
    if len(idx) < 2:
        raise ValueError("subset must contain at least two indices")
    q = float(level)
    if not 0.0 < q < 1.0:
        raise ValueError("level must lie in (0, 1)")
    n = sample.n
    if (1.0 - q) * n < 1.0 - 1e-9:
        raise ValueError(f"level {q} leaves fewer than one expected exceedance for n={n}")
    u = sample.uniform()
    if np.any(np.sum(u[:, list(idx)] > q, axis=0) == 0):
        warnings.warn(f"no marginal exceedance of level {q} in some margin of {idx}", RuntimeWarning)
        return ChiEstimate(idx, q, 0.0, count=0)
    value, count = chi_from_uniform(u, idx, q)
    return ChiEstimate(idx, q, value, count=count)


def chi_matrix(sample, level: float) -> np.ndarray:
    """Pairwise chi_ij(q) with ones on the diagonal."""
    sample = as_sample(sample)
    u = sample.uniform() > level
    joint = u.T.astype(float) @ u.astype(float)
    chi = np.minimum(1.0, joint / _denominator(level, sample.n))
    np.fill_diagonal(chi, 1.0)
    return chi


def _bootstrap_uniform(ranks_src: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # duplicated rows get distinct ranks in row order, so resampling does not invent ties
    n = len(rows)
    res = ranks_src[rows]
    ranks = rankdata(res, method="ordinal", axis=0)
    return ranks / (n + 1)


def chi_curve(
    sample,
    i: int,
    j: int,
    q_grid: Sequence[float],
    n_boot: int = 0,
    seed: int | None = 0,
    alpha: float = 0.05,
) -> list[ChiEstimate]:
    """chi_ij(q) along ``q_grid`` with optional row-bootstrap percentile bands."""
    sample = as_sample(sample)
    q_grid = np.asarray(q_grid, float)
    if q_grid.ndim != 1 or np.any(np.diff(q_grid) <= 0):
        raise ValueError("q_grid must be strictly increasing")
    if np.any((q_grid <= 0) | (q_grid >= 1)):
        raise ValueError("q_grid must lie in (0, 1)")
    if n_boot < 0:
        raise ValueError("n_boot must be nonnegative")
    pair = (int(i), int(j))
    point = [chi_hat(sample, pair, q) for q in q_grid]
    if n_boot == 0:
        return point
    rng = np.random.default_rng(seed)
    n = sample.n
    src = sample.ranks[:, list(pair)]
    boots = np.empty((n_boot, len(q_grid)))
    for b in range(n_boot):
        rows = rng.integers(0, n, size=n)
        u = _bootstrap_uniform(src, rows)
        for g, q in enumerate(q_grid):
            boots[b, g] = chi_from_uniform(u, (0, 1), q)[0]
    lo = np.quantile(boots, alpha / 2, axis=0)
    hi = np.quantile(boots, 1 - alpha / 2, axis=0)
    out = []
    for g, est in enumerate(point):
        # percentile bands need not cover the point estimate; widen to keep lo <= value <= hi
        out.append(
            ChiEstimate(
                est.subset, est.level, est.value,
                ci_lower=float(min(lo[g], est.value)),
                ci_upper=float(max(hi[g], est.value)),
                count=est.count,
            )
        )
    return out


def eta_hill(sample, subset: Iterable[int], k: int) -> EtaEstimate:
    """Residual tail dependence via the Hill estimator of min_{i in I} X_i."""
    sample = as_sample(sample)
    idx = _subset(subset, sample.d)
    if len(idx) < 2:
        raise ValueError("subset must contain at least two indices")
    n = sample.n
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}")
    t = np.sort(sample.pareto[:, list(idx)].min(axis=1))
    ref = t[n - k - 1]
    value = float(np.mean(np.log(t[n - k:] / ref)))
    return EtaEstimate(idx, k, value, value / np.sqrt(k))


def empirical_exponent_measure(sample, z: Sequence[float], k: int) -> float:
    """Empirical Lambda(E \\ [0, z]) at exceedance count ``k``."""
    sample = as_sample(sample)
    z = np.asarray(z, float)
    if z.shape != (sample.d,):
        raise ValueError(f"z must have length {sample.d}")
    if np.any(z <= 0):
        raise ValueError("z must be positive")
    n = sample.n
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}")
    levels = 1.0 - k / (n * z)
    if np.any(levels <= 0):
        warnings.warn("k/(n z_j) >= 1: that margin is exceeded by every row", RuntimeWarning)
    u = sample.uniform()
    hits = np.any(u > levels[None, :], axis=1)
    return float(hits.sum() / k)


def exponent_measure_count(sample, z: Sequence[float], k: int) -> int:
    """Integer numerator of :func:`empirical_exponent_measure`."""
    sample = as_sample(sample)
    z = np.asarray(z, float)
    levels = 1.0 - int(k) / (sample.n * z)
    return int(np.any(sample.uniform() > levels[None, :], axis=1).sum())


@dataclass(frozen=True)
class Violation:
    kind: str  # "inclusion_exclusion", "chi_monotone" or "eta_monotone"
    subset: tuple[int, ...]
    superset: tuple[int, ...] | None
    amount: float


def _normalize_keys(m: Mapping) -> dict[tuple[int, ...], float]:
    return {tuple(sorted(int(i) for i in key)): float(v) for key, v in m.items()}


def consistency_check(
    chis: Mapping[Iterable[int], float],
    etas: Mapping[Iterable[int], float] | None = None,
    tol: float = 1e-9,
) -> list[Violation]:
    """List violations of the coefficient consistency constraints.

    ``chis`` must contain every subset of size >= 2 of the vertex set spanned by
    its keys (singletons default to 1).  ``etas``, when given, must be closed
    under taking subsets of size >= 2.
    """
    chi = _normalize_keys(chis)
    eta = _normalize_keys(etas or {})
    verts = sorted({i for key in chi for i in key})
    for size in range(2, len(verts) + 1):
        for sub in itertools.combinations(verts, size):
            if sub not in chi:
                raise ValueError(f"incomplete chi family: missing {sub}")
    for key in eta:
        for size in range(2, len(key)):
            for sub in itertools.combinations(key, size):
                if sub not in eta:
                    raise ValueError(f"incomplete eta family: missing {sub}")
    full = dict(chi)
    for v in verts:
        full.setdefault((v,), 1.0)

    out: list[Violation] = []
    vset = tuple(verts)
    for sub in sorted(full, key=lambda key: (len(key), key)):
        if sub == vset:
            continue
        rest = [v for v in verts if v not in sub]
        total = 0.0
        for size in range(len(rest) + 1):
            for extra in itertools.combinations(rest, size):
                sup = tuple(sorted(sub + extra))
                total += (-1) ** size * full[sup]
        if total < -tol:
            out.append(Violation("inclusion_exclusion", sub, None, -total))
    for a, b in itertools.permutations(sorted(full), 2):
        if len(b) > len(a) and set(a) <= set(b) and full[b] > full[a] + tol:
            out.append(Violation("chi_monotone", a, b, full[b] - full[a]))
    for a, b in itertools.permutations(sorted(eta), 2):
        if len(b) > len(a) and set(a) <= set(b) and eta[b] > eta[a] + tol:
            out.append(Violation("eta_monotone", a, b, eta[b] - eta[a]))
    return out


def chi_family(sample, level: float, vertices: Sequence[int] | None = None) -> dict[tuple[int, ...], float]:
    """chi_I(q) for every subset I of size >= 2 of ``vertices`` at one level."""
    sample = as_sample(sample)
    verts = list(range(sample.d)) if vertices is None else sorted(vertices)
    u = sample.uniform()
    out = {}
    for size in range(2, len(verts) + 1):
        for sub in itertools.combinations(verts, size):
            out[sub] = chi_from_uniform(u, sub, level)[0]
    return out
