"""Spherical k-means clustering of extremal angles."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .faceset import Face, FaceSet
from .ingest import ExceedanceSet, norm_of

MAX_ITER = 100


@dataclass(frozen=True)
class AngularCloud:
    angles: np.ndarray
    norm: str
    weights: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.angles, float))
        w = np.asarray(self.weights, float)
        if a.shape[0] == 0:
            raise ValueError("empty angular cloud")
        if w.shape != (a.shape[0],) or np.any(w < 0):
            raise ValueError("weights must be nonnegative, one per angle")
        w = w / w.sum()
        if np.any(np.abs(norm_of(a, self.norm) - 1.0) > 1e-12):
            raise ValueError(f"angles are not normalized in {self.norm}")
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_exceedances(cls, exc: ExceedanceSet) -> "AngularCloud":
        return cls(exc.angles, exc.norm, np.full(exc.k, 1.0 / exc.k))

    @classmethod
    def from_rows(cls, rows: np.ndarray, norm: str = "l1", weights=None) -> "AngularCloud":
        rows = np.atleast_2d(np.asarray(rows, float))
        ang = rows / norm_of(rows, norm)[:, None]
        w = np.full(len(rows), 1.0 / len(rows)) if weights is None else weights
        return cls(ang, norm, w)

    def __len__(self) -> int:
        return self.angles.shape[0]


@dataclass(frozen=True)
class ClusterResult:
    centers: np.ndarray
    assignment: np.ndarray
    cost: float
    iterations: int
    cost_trace: tuple[float, ...] = ()
    weights: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.centers.shape[0]

    def counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.p)


def angular_dissimilarity(x, y) -> float:
    """1 - cos(x, y); invariant to positive rescaling of either argument."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("dissimilarity undefined for a zero vector")
    return float(min(1.0, max(0.0, 1.0 - x @ y / (nx * ny))))


def _unit(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _dissim(unit_x: np.ndarray, unit_c: np.ndarray) -> np.ndarray:
    return np.clip(1.0 - unit_x @ unit_c.T, 0.0, 2.0)


def _seed_centers(ux: np.ndarray, w: np.ndarray, p: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding on the angular dissimilarity."""
    first = rng.choice(len(ux), p=w)
    centers = [ux[first]]
    dist = _dissim(ux, ux[first][None, :])[:, 0]
    for _ in range(1, p):
        prob = w * dist
        total = prob.sum()
        if total <= 0:
            nxt = rng.choice(len(ux), p=w)
        else:
            nxt = rng.choice(len(ux), p=prob / total)
        centers.append(ux[nxt])
        dist = np.minimum(dist, _dissim(ux, ux[nxt][None, :])[:, 0])
    return np.array(centers)


def _lloyd(ux, w, centers):
    trace = []
    assign = None
    it = 0
    for it in range(1, MAX_ITER + 1):
        dis = _dissim(ux, centers)
        new_assign = np.argmin(dis, axis=1)
        cost = float(w @ dis[np.arange(len(ux)), new_assign])
        if trace and cost > trace[-1] + 1e-12:
            raise AssertionError("spherical k-means cost increased")
        trace.append(cost)
        if assign is not None and np.array_equal(assign, new_assign):
            break
        assign = new_assign
        for j in range(len(centers)):
            mask = assign == j
            if not mask.any():
                # re-seed an empty cluster at the point worst served by its center
                worst = int(np.argmax(dis[np.arange(len(ux)), assign]))
                centers[j] = ux[worst]
                continue
            m = w[mask] @ ux[mask]
            nm = np.linalg.norm(m)
            if nm > 0:
                centers[j] = m / nm
    dis = _dissim(ux, centers)
    assign = np.argmin(dis, axis=1)
    cost = float(w @ dis[np.arange(len(ux)), assign])
    return centers, assign, cost, it, trace


def spherical_kmeans(cloud: AngularCloud, p: int, seed: int | None = 0, restarts: int = 25) -> ClusterResult:
    """Cluster angles with the dissimilarity 1 - cos, best of ``restarts`` seedings.

    Centers are rescaled to the norm of the cloud (e.g. onto the l1 simplex).
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    ux = _unit(cloud.angles)
    n_distinct = len(np.unique(np.round(ux, 12), axis=0))
    if not 1 <= p <= n_distinct:
        raise ValueError(f"p={p} must lie in 1..{n_distinct} (number of distinct angles)")
    w = cloud.weights
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        centers = _seed_centers(ux, w, p, rng)
        centers, assign, cost, it, trace = _lloyd(ux, w, centers.copy())
        counts = np.bincount(assign, minlength=p)
        if np.any(counts == 0):
            continue
        if best is None or cost < best[2] - 1e-15:
            best = (centers, assign, cost, it, trace)
    if best is None:
        raise RuntimeError("every restart ended with an empty cluster")
    centers, assign, cost, it, trace = best
    centers = centers / norm_of(centers, cloud.norm)[:, None]
    return ClusterResult(centers, assign, cost, it, tuple(trace), w)


def centers_to_faces(result: ClusterResult, cut: float = 0.02) -> FaceSet:
    """One face per center: coordinates above ``cut``; weight = cluster share."""
    if not 0.0 < cut < 1.0:
        raise ValueError("cut must lie in (0, 1)")
    counts = result.counts()
    w = result.weights if result.weights is not None else np.full(len(result.assignment), 1.0 / len(result.assignment))
    share = np.bincount(result.assignment, weights=w, minlength=result.p)
    merged: dict[tuple[int, ...], list[float]] = {}
    dropped = 0
    for j, c in enumerate(result.centers):
        idx = tuple(int(i) for i in np.flatnonzero(c > cut))
        if not idx:
            dropped += 1
            continue
        acc = merged.setdefault(idx, [0.0, 0])
        acc[0] += share[j]
        acc[1] += int(counts[j])
    if not merged:
        raise ValueError(f"cut {cut} leaves every face empty")
    if dropped:
        warnings.warn(f"{dropped} center(s) produced an empty face and were dropped", RuntimeWarning)
    faces = tuple(Face(idx, float(m), int(c)) for idx, (m, c) in merged.items())
    return FaceSet(faces, "cluster", {"cut": cut, "p": result.p})
