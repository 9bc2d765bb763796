"""Container for collections of faces with empirical masses."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class Face:
    indices: tuple[int, ...]
    mass: float
    count: int

    def to_dict(self) -> dict:
        return {"indices": list(self.indices), "mass": self.mass, "count": self.count}


@dataclass(frozen=True)
class FaceSet:
    faces: tuple[Face, ...]
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for f in self.faces:
            if not f.indices:
                raise ValueError("faces must be nonempty")
            if f.indices in seen:
                raise ValueError(f"duplicate face {f.indices}")
            seen.add(f.indices)

    def __len__(self) -> int:
        return len(self.faces)

    def index_sets(self) -> list[frozenset[int]]:
        return [frozenset(f.indices) for f in self.faces]

    def maximal(self) -> list[tuple[int, ...]]:
        """Faces not strictly contained in another face of the family."""
        return maximal_sets(f.indices for f in self.faces)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "faces": [f.to_dict() for f in self.faces],
            "maximal": [list(m) for m in self.maximal()],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc: dict) -> "FaceSet":
        faces = tuple(Face(tuple(f["indices"]), float(f["mass"]), int(f["count"])) for f in doc["faces"])
        return cls(faces, doc["method"], dict(doc.get("params", {})))


def maximal_sets(sets: Iterable[Iterable[int]]) -> list[tuple[int, ...]]:
    uniq = {frozenset(s) for s in sets}
    keep = [s for s in uniq if not any(s < other for other in uniq)]
    return sorted((tuple(sorted(s)) for s in keep), key=lambda t: (len(t), t))
