"""Referring augmentation: swap the target with its single anchor."""

from __future__ import annotations

from dataclasses import replace

from .parser import ParsedUtterance, RelationTriplet, Role
from .relations import SpatialRelation


def invert_relation(rel: SpatialRelation) -> SpatialRelation:
    return rel.inverse


def swap_target_anchor(parse: ParsedUtterance) -> ParsedUtterance | None:
    """Exchange target and anchor roles, reversing every relation.

    Applies only to parses with exactly two mentions and at least one
    triplet; returns ``None`` otherwise. The text is left as is.
    """
    if len(parse.mentions) != 2 or not parse.triplets:
        return None
    mentions = tuple(
        replace(m, role=Role.ANCHOR if m.role is Role.TARGET else Role.TARGET) for m in parse.mentions
    )
    triplets = tuple(
        RelationTriplet(t.object, invert_relation(t.relation), t.subject, t.second_object)
        for t in parse.triplets
    )
    return replace(parse, mentions=mentions, triplets=triplets)
