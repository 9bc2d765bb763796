"""Detection of faces (groups of concomitantly extreme variables)."""
from __future__ import annotations

import itertools
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import norm as _normal

from .coefficients import chi_from_uniform, eta_hill
from .faceset import Face, FaceSet, maximal_sets
from .ingest import ExceedanceSet, as_sample

DEFAULT_CAP = 100_000


def goix_faces(exc: ExceedanceSet, epsilon: float = 0.1, u: float = 0.05) -> FaceSet:
    """Faces charged by epsilon-thickened rectangles.

    Each rescaled exceedance x = X/t (l-infinity radius above t) is assigned to
    {i : x_i > epsilon}; face mass is the count over k.  Faces with mass above
    ``u`` are returned.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if u <= 0:
        raise ValueError("u must be positive")
    if exc.norm != "linf":
        raise ValueError("goix_faces expects l-infinity exceedances")
    x = exc.points()
    patterns = [tuple(int(i) for i in np.flatnonzero(row > epsilon)) for row in x]
    counts = Counter(patterns)
    faces = tuple(
        Face(idx, c / exc.k, c)
        for idx, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if c / exc.k > u
    )
    params = {
        "epsilon": epsilon,
        "u": u,
        "k": exc.k,
        "n_faces_total": len(counts),
        "total_mass": sum(counts.values()) / exc.k,
    }
    return FaceSet(faces, "goix", params)


@dataclass(frozen=True)
class RegionMass:
    mass: float
    rv_index: float
    count: int
    flagged: bool


def simpson_region_mass(sample, subset: Iterable[int], delta: float, k: int, u: float = 0.05,
                        rv_tol: float = 0.15) -> RegionMass:
    """Mass of the region {min_I X/t > 1, max_notI X/t <= t^(delta-1) (min_I X/t)^delta}, t = n/k.

    ``rv_index`` is the Hill estimate (reference level t) of the tail index of
    min_I X over the rows meeting the max constraint; an index near 1 means the
    region probability decays like 1/t.  ``flagged`` marks faces with
    |rv_index - 1| <= rv_tol and mass > u.
    """
    sample = as_sample(sample)
    idx = sorted({int(i) for i in subset})
    if not idx:
        raise ValueError("subset must be nonempty")
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    n = sample.n
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    t = n / k
    x = sample.pareto / t
    rest = [j for j in range(sample.d) if j not in idx]
    mins = x[:, idx].min(axis=1)
    if rest:
        # t^(delta-1) * m^delta, evaluated in logs
        bound = np.exp((delta - 1.0) * np.log(t) + delta * np.log(mins))
        ok = x[:, rest].max(axis=1) <= bound
    else:
        ok = np.ones(n, bool)
    hit = ok & (mins > 1.0)
    count = int(hit.sum())
    mass = count / k
    if count == 0:
        return RegionMass(0.0, float("nan"), 0, False)
    rv_index = float(np.mean(np.log(mins[hit])))
    flagged = bool(abs(rv_index - 1.0) <= rv_tol and mass > u)
    return RegionMass(mass, rv_index, count, flagged)


def simpson_faces(sample, delta: float, k: int, u: float = 0.05, rv_tol: float = 0.15) -> FaceSet:
    """Run :func:`simpson_region_mass` over the faces visited by the largest observations."""
    sample = as_sample(sample)
    n = sample.n
    t = n / k
    x = sample.pareto / t
    cand = set()
    # the region for I requires min_I > 1 and the rest small, so I = {i : x_i > 1} for hits
    for row in x[x.max(axis=1) > 1.0]:
        cand.add(tuple(int(i) for i in np.flatnonzero(row > 1.0)))
    faces = []
    diag = {}
    for idx in sorted(cand, key=lambda s: (len(s), s)):
        res = simpson_region_mass(sample, idx, delta, k, u, rv_tol)
        diag[",".join(map(str, idx))] = {"mass": res.mass, "rv_index": res.rv_index}
        if res.flagged:
            faces.append(Face(idx, res.mass, res.count))
    return FaceSet(tuple(faces), "simpson", {"delta": delta, "k": k, "u": u, "rv_tol": rv_tol,
                                             "diagnostics": diag,
                                             "note": "region mass with Hill index diagnostic; simplified procedure"})


def euclid_simplex_projection(x) -> np.ndarray:
    """Euclidean projection onto {y >= 0, sum(y) = 1} by sorting and thresholding."""
    x = np.asarray(x, float)
    if x.ndim != 1:
        raise ValueError("expected a vector")
    if np.any(x < 0):
        raise ValueError("input must be nonnegative")
    if not np.any(x > 0):
        raise ValueError("input must not be the zero vector")
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    rho = np.arange(1, len(u) + 1)
    cond = u - (css - 1.0) / rho > 0
    r = int(np.flatnonzero(cond)[-1]) + 1
    tau = (css[r - 1] - 1.0) / r
    y = np.maximum(x - tau, 0.0)
    # restore the exact sum lost to rounding in the threshold
    s = y.sum()
    return y / s if s > 0 else y


def meyer_faces(exc: ExceedanceSet, u: float = 0.05) -> FaceSet:
    """Faces given by the supports of Euclidean projections of X/t on the simplex."""
    if exc.norm != "l1":
        raise ValueError("meyer_faces expects l1 exceedances")
    x = exc.points()
    patterns = []
    for row in x:
        y = euclid_simplex_projection(row)
        patterns.append(tuple(int(i) for i in np.flatnonzero(y > 0)))
    counts = Counter(patterns)
    faces = tuple(
        Face(idx, c / exc.k, c)
        for idx, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if c / exc.k > u
    )
    params = {"u": u, "k": exc.k, "n_faces_total": len(counts),
              "maximal": [list(m) for m in maximal_sets(f.indices for f in faces)]}
    return FaceSet(faces, "meyer", params)


class FrontierOverflow(RuntimeError):
    """The lattice search produced more candidate groups than the cap allows."""


def _eta_passes(sample, idx, k, z):
    est = eta_hill(sample, idx, k)
    return est.value + z * est.std_err >= 1.0


def apriori_faces(
    sample,
    k: int,
    criterion: str = "cond_chi",
    threshold_or_level: float = 0.5,
    cap: int = DEFAULT_CAP,
) -> FaceSet:
    """Bottom-up lattice search for maximal groups of concomitant extremes.

    ``cond_chi``: a group I survives when chi_I / chi_J > threshold for every
    parent J = I minus one element (singletons have chi = 1).
    ``eta_test``: I survives unless the Hill estimate of eta_I rejects eta_I = 1
    at the given one-sided level.
    """
    sample = as_sample(sample)
    n, d = sample.n, sample.d
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    if criterion not in ("cond_chi", "eta_test"):
        raise ValueError(f"unknown criterion {criterion!r}")
    q = 1.0 - k / n
    uni = sample.uniform()
    z = float(_normal.ppf(1.0 - threshold_or_level)) if criterion == "eta_test" else None

    chi_cache: dict[tuple[int, ...], tuple[float, int]] = {}

    def chi_of(idx):
        if len(idx) == 1:
            return 1.0, int((uni[:, idx[0]] > q).sum())
        if idx not in chi_cache:
            chi_cache[idx] = chi_from_uniform(uni, idx, q)
        return chi_cache[idx]

    def passes(idx):
        if criterion == "eta_test":
            return _eta_passes(sample, idx, k, z)
        val = chi_of(idx)[0]
        for drop in range(len(idx)):
            parent = idx[:drop] + idx[drop + 1:]
            pv = chi_of(parent)[0]
            ratio = val / pv if pv > 0 else 0.0
            if not ratio > threshold_or_level:
                return False
        return True

    level = [(i,) for i in range(d)]
    survivors: set[tuple[int, ...]] = set(level)
    examined = 0
    while level:
        cur = set(level)
        cand = set()
        by_prefix: dict[tuple[int, ...], list[int]] = {}
        for a in sorted(level):
            by_prefix.setdefault(a[:-1], []).append(a[-1])
        for prefix, tails in by_prefix.items():
            for x, y in itertools.combinations(tails, 2):
                new = prefix + (x, y)
                if all(new[:j] + new[j + 1:] in cur for j in range(len(new))):
                    cand.add(new)
                    if len(cand) > cap:
                        raise FrontierOverflow(
                            f"more than {cap} candidate groups of size {len(new)}; "
                            "the lattice search does not scale to dense high-dimensional faces"
                        )
        examined += len(cand)
        level = sorted(c for c in cand if passes(c))
        survivors.update(level)
    maximal = maximal_sets(survivors)
    faces = tuple(Face(idx, chi_of(idx)[0], chi_of(idx)[1]) for idx in maximal)
    params = {"k": k, "criterion": criterion, "threshold_or_level": threshold_or_level, "cap": cap,
              "examined": examined,
              "note": "cond_chi is the ratio of chi_I to the chi of each parent group"}
    return FaceSet(faces, "apriori", params)


@dataclass(frozen=True)
class AdjustedFace:
    face: tuple[int, ...]
    trace: tuple[tuple[str, int | None, float], ...]  # (action, element, chi after move)


def greedy_adjust_face(
    sample,
    face: Iterable[int],
    k: int,
    criterion: str = "cond_chi",
    threshold_or_level: float = 0.5,
    max_steps: int | None = None,
) -> AdjustedFace:
    """Prune or expand a face one element at a time.

    cond_chi: remove the element i with the smallest conditional coefficient
    chi_I / chi_{I minus i} while it is below the threshold (this is the removal
    that raises chi_I the most); then add the outside element j with the largest
    chi_{I plus j} / chi_I if it reaches the threshold.
    eta_test: remove the element whose removal maximizes chi while I fails the
    eta test; add the element maximizing chi among enlargements passing it.
    """
    sample = as_sample(sample)
    n, d = sample.n, sample.d
    q = 1.0 - k / n
    uni = sample.uniform()
    cur = tuple(sorted({int(i) for i in face}))
    if not cur:
        raise ValueError("seed face must be nonempty")
    z = float(_normal.ppf(1.0 - threshold_or_level)) if criterion == "eta_test" else None

    def chi(idx):
        if len(idx) == 1:
            return 1.0
        return chi_from_uniform(uni, idx, q)[0]

    def eta_ok(idx):
        return len(idx) == 1 or _eta_passes(sample, idx, k, z)

    trace = [("start", None, chi(cur))]
    seen = {cur}
    steps = max_steps if max_steps is not None else 4 * d
    for _ in range(steps):
        move = None
        base = chi(cur)
        if len(cur) > 1:
            options = []
            for i in cur:
                sub = tuple(j for j in cur if j != i)
                options.append((chi(sub), i, sub))
            options.sort(key=lambda o: (-o[0], o[1]))
            best_chi, i, sub = options[0]
            if criterion == "cond_chi":
                ratio = base / best_chi if best_chi > 0 else 0.0
                if ratio < threshold_or_level and sub not in seen:
                    move = ("remove", i, sub, best_chi)
            elif not eta_ok(cur) and sub not in seen:
                move = ("remove", i, sub, best_chi)
        if move is None:
            options = []
            for j in range(d):
                if j in cur:
                    continue
                sup = tuple(sorted(cur + (j,)))
                options.append((chi(sup), j, sup))
            options.sort(key=lambda o: (-o[0], o[1]))
            for val, j, sup in options:
                if sup in seen:
                    continue
                if criterion == "cond_chi":
                    ok = base > 0 and val / base >= threshold_or_level
                else:
                    ok = eta_ok(sup)
                if ok:
                    move = ("add", j, sup, val)
                break
        if move is None:
            break
        action, el, cur, val = move
        seen.add(cur)
        trace.append((action, el, val))
    return AdjustedFace(cur, tuple(trace))
