"""Grounding mentioned objects to scene proposals.

Each mention gets a proposal of its own class. A class that occurs once in
the scene settles the mention immediately. Otherwise the mention's spatial
relations are tried in turn: when the related object is already grounded,
the best-fitting candidate for the relation is picked; when it is not, the
related object is grounded first (recursively) and then used. If no relation
resolves the mention, a same-class proposal is drawn at random from a seeded
generator.

Geometric scores (higher is a better fit, ``-inf`` when a gate fails):

=========  ==========================================================
Near/Far   minus / plus centroid distance
LeftOf     minus x offset of subject from reference (yaw-rotated frame)
RightOf    plus x offset
FrontOf    minus y offset
Behind     plus y offset
Above      plus z offset, gated on overlapping xy footprints
Below      minus z offset, same gate
On         minus |gap| between subject bottom and reference top; gated on
           footprint overlap, subject centroid higher, and |gap| <= on_gap
Under      mirror of On
Between    minus |d(s, r1) + d(s, r2) - d(r1, r2)|
=========  ==========================================================
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import kernels
from .parser import ParsedUtterance
from .pathway import PathwayOrder
from .relations import SpatialRelation
from .scene import Aabb3, ObjectProposal, Scene

DEFAULT_ON_GAP = 0.15


@dataclass(frozen=True)
class GeometryConfig:
    on_gap: float = DEFAULT_ON_GAP
    yaw: float = 0.0  # radians; rotates the left/right/front/behind frame about z

    @property
    def yaw_cos(self) -> float:
        return 1.0 if self.yaw == 0.0 else math.cos(self.yaw)

    @property
    def yaw_sin(self) -> float:
        return 0.0 if self.yaw == 0.0 else math.sin(self.yaw)


class Provenance(str, enum.Enum):
    UNIQUE = "Unique"
    RELATION_RESOLVED = "RelationResolved"
    RANDOM_FALLBACK = "RandomFallback"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class Assignment:
    mention: int
    proposal_id: int | None
    provenance: Provenance


@dataclass(frozen=True)
class GroundedChain:
    utterance_id: str
    assignments: tuple[Assignment, ...]

    def by_mention(self) -> dict[int, Assignment]:
        return {a.mention: a for a in self.assignments}


def eval_predicate(
    rel: SpatialRelation,
    subject: Aabb3,
    ref1: Aabb3,
    ref2: Aabb3 | None = None,
    geometry: GeometryConfig = GeometryConfig(),
) -> float:
    if (ref2 is not None) != (rel is SpatialRelation.Between):
        raise ValueError("a second reference box is required for Between and only for Between")
    return kernels.predicate_score(
        int(rel),
        subject.as_row(),
        ref1.as_row(),
        None if ref2 is None else ref2.as_row(),
        geometry.on_gap,
        geometry.yaw_cos,
        geometry.yaw_sin,
    )


def find(
    localized: ObjectProposal,
    rel: SpatialRelation,
    candidates: Sequence[ObjectProposal],
    second: ObjectProposal | None = None,
    geometry: GeometryConfig = GeometryConfig(),
) -> ObjectProposal:
    """Candidate that best satisfies ``candidate rel localized``; ties go to the lowest id."""
    if not candidates:
        raise ValueError("find needs at least one candidate")
    if (second is not None) != (rel is SpatialRelation.Between):
        raise ValueError("a second reference is required for Between and only for Between")
    scores = kernels.predicate_scores(
        int(rel),
        [c.box.as_row() for c in candidates],
        localized.box.as_row(),
        None if second is None else second.box.as_row(),
        geometry.on_gap,
        geometry.yaw_cos,
        geometry.yaw_sin,
    )
    best = None
    for cand, score in zip(candidates, scores):
        if best is None or score > best[1] or (score == best[1] and cand.id < best[0].id):
            best = (cand, score)
    return best[0]


def utterance_seed(global_seed: int, utterance_id: str) -> int:
    """Stable per-utterance seed, independent of processing order."""
    digest = hashlib.blake2b(f"{global_seed}:{utterance_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class _Localizer:
    def __init__(self, parse: ParsedUtterance, scene: Scene, rng: random.Random,
                 geometry: GeometryConfig, max_depth: int):
        self.parse = parse
        self.scene = scene
        self.rng = rng
        self.geometry = geometry
        self.max_depth = max_depth
        self.assigned: dict[int, Assignment] = {}

    def proposal(self, mention: int) -> ObjectProposal:
        return self.scene.by_id(self.assigned[mention].proposal_id)

    def grounded(self, mention: int) -> bool:
        a = self.assigned.get(mention)
        return a is not None and a.proposal_id is not None

    def localize(self, mention: int, visiting: frozenset[int] = frozenset(), depth: int = 0) -> list[Assignment]:
        cls = self.parse.mentions[mention].canonical_class
        cands = self.scene.of_class(cls)
        if not cands:
            return [Assignment(mention, None, Provenance.UNRESOLVED)]
        if len(cands) == 1:
            return [Assignment(mention, cands[0].id, Provenance.UNIQUE)]
        visiting = visiting | {mention}
        produced: list[Assignment] = []
        for rel, other, second in self.parse.relate(mention):
            refs = [other] + ([second] if second is not None else [])
            for r in refs:
                if self.grounded(r) or r in self.assigned:
                    continue
                if r in visiting or depth + 1 >= self.max_depth:
                    break
                for a in self.localize(r, visiting, depth + 1):
                    if a.mention not in self.assigned:
                        self.assigned[a.mention] = a
                        produced.append(a)
            if all(self.grounded(r) for r in refs):
                pick = find(
                    self.proposal(other),
                    rel,
                    cands,
                    self.proposal(second) if second is not None else None,
                    self.geometry,
                )
                return produced + [Assignment(mention, pick.id, Provenance.RELATION_RESOLVED)]
        return produced + self.localize_fallback(mention, cands)

    def localize_fallback(self, mention: int, cands: list[ObjectProposal]) -> list[Assignment]:
        pick = cands[self.rng.randrange(len(cands))]
        return [Assignment(mention, pick.id, Provenance.RANDOM_FALLBACK)]


def localize_one(
    mention: int,
    parse: ParsedUtterance,
    scene: Scene,
    already: Iterable[Assignment],
    rng: random.Random,
    geometry: GeometryConfig = GeometryConfig(),
    max_depth: int | None = None,
) -> list[Assignment]:
    """Ground ``mention``; also returns assignments made for related mentions on the way."""
    loc = _Localizer(parse, scene, rng, geometry, max_depth or max(len(parse.mentions), 1))
    for a in already:
        loc.assigned[a.mention] = a
    return loc.localize(mention)


def localize_chain(
    parse: ParsedUtterance,
    order: PathwayOrder,
    scene: Scene,
    seed: int | random.Random,
    geometry: GeometryConfig = GeometryConfig(),
) -> GroundedChain:
    """Ground every mention, visiting them in pathway order."""
    order.check(parse)
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    loc = _Localizer(parse, scene, rng, geometry, max(len(parse.mentions), 1))
    for m in order.ordered_mentions:
        if m in loc.assigned:
            continue
        for a in loc.localize(m):
            loc.assigned.setdefault(a.mention, a)
    return GroundedChain(parse.utterance_id, tuple(loc.assigned[m] for m in order.ordered_mentions))


def anchor_precision(pred: GroundedChain, gt: GroundedChain) -> float:
    """Share of mentions grounded to the same proposal as in ``gt``."""
    p, g = pred.by_mention(), gt.by_mention()
    if set(p) != set(g) or not p:
        raise ValueError("chains must cover the same non-empty mention set")
    hits = sum(
        1 for m, a in p.items() if a.proposal_id is not None and a.proposal_id == g[m].proposal_id
    )
    return hits / len(p)
