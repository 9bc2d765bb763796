"""Loading data, standardizing margins and extracting threshold exceedances."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

NORMS = ("l1", "l2", "linf")


class DataError(ValueError):
    """Raised when input data violates the documented invariants."""


def norm_of(rows: np.ndarray, norm: str) -> np.ndarray:
    """Row-wise l1, l2 or l-infinity norm of a nonnegative matrix."""
    rows = np.atleast_2d(rows)
    if norm == "l1":
        return np.abs(rows).sum(axis=1)
    if norm == "l2":
        return np.sqrt((rows * rows).sum(axis=1))
    if norm == "linf":
        return np.abs(rows).max(axis=1)
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


@dataclass(frozen=True)
class ObservationMatrix:
    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        n, d = values.shape
        labels = tuple(str(s) for s in (self.labels if self.labels is not None else []))
        if not labels:
            labels = tuple(f"X{j + 1}" for j in range(d))
        object.__setattr__(self, "labels", labels)
        if len(labels) != d:
            raise DataError(f"{len(labels)} labels for {d} columns")
        if n < 2 or d < 2:
            raise DataError(f"need n >= 2 and d >= 2, got n={n}, d={d}")
        if not np.all(np.isfinite(values)):
            raise DataError("missing or non-finite entries")
        for j in range(d):
            if np.all(values[:, j] == values[0, j]):
                raise DataError(f"column {labels[j]!r} is constant")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "labels": list(self.labels), "n": self.n, "d": self.d}

    @classmethod
    def from_dict(cls, doc: dict) -> "ObservationMatrix":
        return cls(np.asarray(doc["values"], float), tuple(doc["labels"]))


def read_csv(path: str | Path) -> ObservationMatrix:
    """Read a CSV whose first row holds the column labels."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return ObservationMatrix(np.array(rows, dtype=float), tuple(h.strip() for h in header))


def write_csv(path: str | Path, data: ObservationMatrix) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.labels)
        writer.writerows(data.values.tolist())


@dataclass(frozen=True)
class StandardizedSample:
    """Data on the standard Pareto scale, obtained from column ranks."""

    pareto: np.ndarray
    ranks: np.ndarray
    source: ObservationMatrix

    @property
    def n(self) -> int:
        return self.pareto.shape[0]

    @property
    def d(self) -> int:
        return self.pareto.shape[1]

    @property
    def labels(self) -> tuple[str, ...]:
        return self.source.labels

    def uniform(self) -> np.ndarray:
        """Empirical distribution function values rank/(n+1)."""
        return self.ranks / (self.n + 1)

    def to_dict(self) -> dict:
        return {
            "pareto": self.pareto.tolist(),
            "ranks": self.ranks.tolist(),
            "source": self.source.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "StandardizedSample":
        return cls(
            np.asarray(doc["pareto"], float),
            np.asarray(doc["ranks"], float),
            ObservationMatrix.from_dict(doc["source"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StandardizedSample":
        return cls.from_dict(json.loads(text))


def rank_transform(data: ObservationMatrix) -> StandardizedSample:
    """Map each column to the standard Pareto scale via 1/(1 - rank/(n+1)).

    Ties receive their average rank.
    """
    if not isinstance(data, ObservationMatrix):
        data = ObservationMatrix(np.asarray(data, float), None)
    n = data.n
    ranks = rankdata(data.values, method="average", axis=0)
    pareto = 1.0 / (1.0 - ranks / (n + 1))
    ranks.setflags(write=False)
    pareto.setflags(write=False)
    return StandardizedSample(pareto=pareto, ranks=ranks, source=data)


def pareto_from_ranks(ranks: np.ndarray, n: int) -> np.ndarray:
    return 1.0 / (1.0 - np.asarray(ranks, float) / (n + 1))


@dataclass(frozen=True)
class ExceedanceSet:
    norm: str
    k: int
    threshold: float
    radii: np.ndarray
    angles: np.ndarray
    indices: np.ndarray
    n: int = field(default=0)

    @property
    def d(self) -> int:
        return self.angles.shape[1]

    def points(self) -> np.ndarray:
        """Exceedances rescaled by the threshold, ``X / t``."""
        return self.radii[:, None] * self.angles / self.threshold

    def to_dict(self) -> dict:
        return {
            "norm": self.norm,
            "k": self.k,
            "threshold": self.threshold,
            "radii": self.radii.tolist(),
            "angles": self.angles.tolist(),
            "indices": self.indices.tolist(),
            "n": self.n,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExceedanceSet":
        return cls(
            norm=doc["norm"],
            k=int(doc["k"]),
            threshold=float(doc["threshold"]),
            radii=np.asarray(doc["radii"], float),
            angles=np.asarray(doc["angles"], float).reshape(len(doc["radii"]), -1),
            indices=np.asarray(doc["indices"], int),
            n=int(doc.get("n", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ExceedanceSet":
        return cls.from_dict(json.loads(text))


def k_from_quantile(n: int, quantile: float) -> int:
    """Number of exceedances above an empirical radial quantile, floor(n (1 - q))."""
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    # guard against 2024 * 0.1 = 202.39999...
    return int(math.floor(n * (1.0 - quantile) + 1e-9))


def extract_exceedances(sample: StandardizedSample, norm: str = "l1", k: int = 100) -> ExceedanceSet:
    """Keep the ``k`` rows with the largest radius under ``norm``.

    The threshold is the (k+1)-th largest radius; ties are broken by row index.
    """
    n = sample.n
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    x = sample.pareto
    radii = norm_of(x, norm)
    order = np.lexsort((np.arange(n), -radii))
    keep = order[:k]
    threshold = float(radii[order[k]])
    r = radii[keep]
    angles = x[keep] / r[:, None]
    for arr in (r, angles, keep):
        arr.setflags(write=False)
    return ExceedanceSet(norm=norm, k=k, threshold=threshold, radii=r, angles=angles, indices=keep, n=n)


def exceedances_above(sample: StandardizedSample, norm: str, level: float) -> ExceedanceSet:
    """Absolute-level entry point: converts ``level`` to the matching ``k``."""
    k = int(np.sum(norm_of(sample.pareto, norm) > level))
    if k < 1:
        raise ValueError(f"no radius exceeds {level}")
    if k >= sample.n:
        raise ValueError(f"every radius exceeds {level}; choose a higher level")
    return extract_exceedances(sample, norm, k)


def exceedances_at_quantile(sample: StandardizedSample, norm: str, quantile: float) -> ExceedanceSet:
    return extract_exceedances(sample, norm, k_from_quantile(sample.n, quantile))


def as_sample(data) -> StandardizedSample:
    """Accept an ObservationMatrix, a StandardizedSample or a raw array."""
    if isinstance(data, StandardizedSample):
        return data
    if isinstance(data, ObservationMatrix):
        return rank_transform(data)
    return rank_transform(ObservationMatrix(np.asarray(data, float), None))


def labels_or_default(labels: Sequence[str] | None, d: int) -> tuple[str, ...]:
    return tuple(labels) if labels else tuple(f"X{j + 1}" for j in range(d))
