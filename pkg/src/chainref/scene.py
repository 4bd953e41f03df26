"""3D scene data model: axis-aligned boxes, proposals, label sets.

World frame convention: z is up, x grows to the right, y grows away from the
viewer. All vertical predicates read z; left/right read x; front/behind read y.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

DEFAULT_MAX_PROPOSALS = 52


class CapacityError(ValueError):
    """Raised when a request exceeds a configured size limit."""


@dataclass(frozen=True)
class Aabb3:
    center: tuple[float, float, float]
    extent: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))
        if len(self.center) != 3 or len(self.extent) != 3:
            raise ValueError("center and extent must be 3-vectors")

    @property
    def lo(self) -> tuple[float, float, float]:
        return tuple(c - e / 2.0 for c, e in zip(self.center, self.extent))

    @property
    def hi(self) -> tuple[float, float, float]:
        return tuple(c + e / 2.0 for c, e in zip(self.center, self.extent))

    def as_row(self) -> tuple[float, ...]:
        """Flat (cx, cy, cz, ex, ey, ez) row used by the geometry kernels."""
        return self.center + self.extent

    def contains(self, other: "Aabb3", tol: float = 1e-9) -> bool:
        return all(a - tol <= b for a, b in zip(self.lo, other.lo)) and all(
            b <= a + tol for a, b in zip(self.hi, other.hi)
        )


@dataclass(frozen=True)
class ObjectProposal:
    id: int
    class_label: str
    box: Aabb3


@dataclass(frozen=True)
class Scene:
    scene_id: str
    proposals: tuple[ObjectProposal, ...]

    def __post_init__(self):
        object.__setattr__(self, "proposals", tuple(self.proposals))

    def by_id(self, proposal_id: int) -> ObjectProposal:
        for p in self.proposals:
            if p.id == proposal_id:
                return p
        raise KeyError(proposal_id)

    def of_class(self, label: str) -> list[ObjectProposal]:
        """Proposals with ``class_label == label``, sorted by id."""
        return sorted((p for p in self.proposals if p.class_label == label), key=lambda p: p.id)


@dataclass(frozen=True)
class Violation:
    proposal_id: int | None
    field: str
    message: str

    def __str__(self):
        where = "scene" if self.proposal_id is None else f"proposal {self.proposal_id}"
        return f"{where}: {self.field}: {self.message}"


@dataclass(frozen=True)
class LabelSet:
    """Ordered canonical labels plus optional surface aliases.

    ``aliases`` maps an alias string to the canonical label it stands for.
    """

    labels: tuple[str, ...]
    aliases: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "aliases", dict(self.aliases))
        unknown = {v for v in self.aliases.values() if v not in self.labels}
        if unknown:
            raise ValueError(f"aliases point at unknown labels: {sorted(unknown)}")

    def __contains__(self, label: object) -> bool:
        return label in self._label_set

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    @property
    def _label_set(self) -> frozenset[str]:
        cached = self.__dict__.get("_cached_set")
        if cached is None:
            cached = frozenset(self.labels)
            object.__setattr__(self, "_cached_set", cached)
        return cached

    @classmethod
    def of(cls, labels: Iterable[str]) -> "LabelSet":
        return cls(tuple(labels))


def parse_labels(text: str) -> LabelSet:
    labels: list[str] = []
    aliases: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, _, rest = line.partition(":")
        name = " ".join(name.split()).lower()
        if name in labels:
            continue
        labels.append(name)
        for alias in rest.split(","):
            alias = " ".join(alias.split()).lower()
            if alias:
                aliases[alias] = name
    return LabelSet(tuple(labels), aliases)


def load_labels(path: str | Path | None = None) -> LabelSet:
    """Load a label file; ``None`` loads the bundled ScanNet-style list."""
    if path is None:
        text = resources.files("chainref").joinpath("data/labels.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_labels(text)


def validate_scene(
    scene: Scene, labels: LabelSet | Iterable[str], max_proposals: int = DEFAULT_MAX_PROPOSALS
) -> list[Violation]:
    """Return every invariant violation in ``scene``; an empty list means valid."""
    known = labels if isinstance(labels, LabelSet) else frozenset(labels)
    report: list[Violation] = []
    n = len(scene.proposals)
    if n < 1:
        report.append(Violation(None, "proposals", "scene has no proposals"))
    if n > max_proposals:
        report.append(Violation(None, "proposals", f"{n} proposals exceeds limit {max_proposals}"))
    seen: set[int] = set()
    for p in scene.proposals:
        if p.id in seen:
            report.append(Violation(p.id, "id", f"duplicate proposal id {p.id}"))
        seen.add(p.id)
        if p.class_label not in known:
            report.append(Violation(p.id, "class", f"unknown class {p.class_label!r}"))
        if not all(math.isfinite(v) for v in p.box.center):
            report.append(Violation(p.id, "center", "non-finite center"))
        if not all(math.isfinite(v) for v in p.box.extent):
            report.append(Violation(p.id, "extent", "non-finite extent"))
        elif any(v <= 0 for v in p.box.extent):
            report.append(Violation(p.id, "extent", f"non-positive extent {p.box.extent}"))
    return report


def gen_synthetic_scene(
    seed: int,
    spec: Mapping[str, int],
    bounds: Aabb3,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
    scene_id: str | None = None,
) -> Scene:
    """Random scene with exactly ``spec[class]`` boxes per class, all inside ``bounds``.

    Classes are visited in sorted order so the result depends only on the
    arguments, not on mapping insertion order.
    """
    total = sum(spec.values())
    if any(c < 0 for c in spec.values()):
        raise ValueError("class counts must be non-negative")
    if total > max_proposals:
        raise CapacityError(f"spec asks for {total} proposals, limit is {max_proposals}")
    if any(e <= 0 for e in bounds.extent):
        raise ValueError("bounds must have positive extent")

    rng = random.Random(seed)
    lo, hi = bounds.lo, bounds.hi
    proposals = []
    next_id = 0
    for label in sorted(spec):
        for _ in range(spec[label]):
            extent = tuple(rng.uniform(0.05, 0.5) * e for e in bounds.extent)
            center = tuple(
                rng.uniform(l + x / 2.0, h - x / 2.0) for l, h, x in zip(lo, hi, extent)
            )
            proposals.append(ObjectProposal(next_id, label, Aabb3(center, extent)))
            next_id += 1
    return Scene(scene_id if scene_id is not None else f"synthetic-{seed}", tuple(proposals))

