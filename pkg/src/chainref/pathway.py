"""Logical visiting order over mentioned objects (target last).

Orders come either from a dependency-graph heuristic or from an order file
holding externally generated replies, one record per utterance::

    ID: scene0001-17
    Q: "The pillow on the couch ... closest to the TV"
    L: [TV, couch, pillow]
    R: [1: TV, 2: couch, t: pillow]

Lines other than ``ID:``, ``L:`` and ``R:`` (questions, explanations) are ignored.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import kernels
from .matching import match_class
from .parser import ParsedUtterance, Role
from .scene import LabelSet


@dataclass(frozen=True)
class PathwayOrder:
    ordered_mentions: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "ordered_mentions", tuple(self.ordered_mentions))

    def __len__(self):
        return len(self.ordered_mentions)

    def __iter__(self):
        return iter(self.ordered_mentions)

    def rank(self) -> dict[int, int]:
        return {m: r for r, m in enumerate(self.ordered_mentions)}

    def labels(self, parse: ParsedUtterance) -> list[str]:
        return [parse.mentions[i].canonical_class for i in self.ordered_mentions]

    def check(self, parse: ParsedUtterance) -> None:
        n = len(parse.mentions)
        if sorted(self.ordered_mentions) != list(range(n)):
            raise ValueError(f"order {self.ordered_mentions} is not a permutation of {n} mentions")
        if parse.mentions[self.ordered_mentions[-1]].role is not Role.TARGET:
            raise ValueError("the last element of an order must be the target")


def _edges(parse: ParsedUtterance) -> set[tuple[int, int]]:
    """subject -> object edges between anchors (edges touching the target are dropped)."""
    target = parse.target_index
    edges = set()
    for t in parse.triplets:
        objs = [t.object] + ([t.second_object] if t.second_object is not None else [])
        for o in objs:
            if t.subject != target and o != target and t.subject != o:
                edges.add((t.subject, o))
    return edges


def _reaches(adj: dict[int, set[int]], src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def acyclic_edges(parse: ParsedUtterance) -> set[tuple[int, int]]:
    """Anchor dependency edges after cycle breaking.

    While a cycle remains, the cyclic edge whose subject was mentioned
    earliest is dropped (ties: earliest object).
    """
    edges = _edges(parse)
    while True:
        adj: dict[int, set[int]] = {}
        for s, o in edges:
            adj.setdefault(s, set()).add(o)
        cyclic = [(s, o) for s, o in edges if _reaches(adj, o, s)]
        if not cyclic:
            return edges
        edges.discard(min(cyclic))


def heuristic_order(parse: ParsedUtterance) -> PathwayOrder:
    """Referenced objects first; among ready anchors the later-mentioned goes first."""
    target = parse.target_index
    anchors = [i for i in range(len(parse.mentions)) if i != target]
    edges = acyclic_edges(parse)
    pending = {a: 0 for a in anchors}
    dependents: dict[int, list[int]] = {a: [] for a in anchors}
    for s, o in edges:
        pending[s] += 1
        dependents[o].append(s)
    ready = [-a for a in anchors if pending[a] == 0]
    heapq.heapify(ready)
    out = []
    while ready:
        a = -heapq.heappop(ready)
        out.append(a)
        for s in dependents[a]:
            pending[s] -= 1
            if pending[s] == 0:
                heapq.heappush(ready, -s)
    out.append(target)
    return PathwayOrder(tuple(out))


# -- order files ---------------------------------------------------------


class OrderFileError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class OrderLine:
    """Names from one ``R:`` line, anchors in order, target last."""

    anchors: tuple[str, ...]
    target: str

    @property
    def names(self) -> tuple[str, ...]:
        return self.anchors + (self.target,)


@dataclass
class OrderRecord:
    utterance_id: str
    line: int
    listed: list[str] | None = None
    order: OrderLine | None = None
    error: OrderFileError | None = None


_ITEM = re.compile(r"^\s*(\d+|t)\s*:\s*(.+?)\s*$")


def parse_order_line(line: str, lineno: int = 0) -> OrderLine:
    """Parse ``R: [1: TV, 2: couch, t: pillow]``."""
    body = line.strip()
    if body[:2].upper() == "R:":
        body = body[2:].strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise OrderFileError(lineno, "R-line must be a bracketed list")
    inner = body[1:-1].strip()
    if not inner:
        raise OrderFileError(lineno, "empty order has no target")
    anchors: list[tuple[int, str]] = []
    target = None
    for item in inner.split(","):
        m = _ITEM.match(item)
        if not m:
            raise OrderFileError(lineno, f"malformed item {item.strip()!r}")
        key, name = m.groups()
        if key == "t":
            if target is not None:
                raise OrderFileError(lineno, "more than one target")
            target = name
        else:
            if target is not None:
                raise OrderFileError(lineno, "anchor listed after the target")
            anchors.append((int(key), name))
    if target is None:
        raise OrderFileError(lineno, "order has no target")
    if [k for k, _ in anchors] != list(range(1, len(anchors) + 1)):
        raise OrderFileError(lineno, "anchor ranks must be 1, 2, ... in sequence")
    return OrderLine(tuple(n for _, n in anchors), target)


def format_order_line(order: OrderLine) -> str:
    items = [f"{i}: {n}" for i, n in enumerate(order.anchors, 1)] + [f"t: {order.target}"]
    return "R: [" + ", ".join(items) + "]"


def _parse_list_line(line: str, lineno: int) -> list[str]:
    body = line.strip()[2:].strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise OrderFileError(lineno, "L-line must be a bracketed list")
    return [x.strip() for x in body[1:-1].split(",") if x.strip()]


def read_order_file(text: str) -> tuple[dict[str, OrderRecord], list[OrderFileError]]:
    """Split an order file into records keyed by utterance id.

    Record-level problems are stored on the record; file-level problems
    (duplicate ids, lines outside any record) are returned separately.
    """
    records: dict[str, OrderRecord] = {}
    errors: list[OrderFileError] = []
    current: OrderRecord | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        tag = line[:3].upper()
        if tag == "ID:":
            uid = line[3:].strip()
            if uid in records:
                errors.append(OrderFileError(lineno, f"duplicate utterance id {uid!r}"))
                current = None
                continue
            current = OrderRecord(uid, lineno)
            records[uid] = current
        elif tag[:2] in ("L:", "R:"):
            if current is None:
                errors.append(OrderFileError(lineno, f"{tag[:2]} line outside a record"))
                continue
            if current.error is not None:
                continue
            try:
                if tag[:2] == "L:":
                    current.listed = _parse_list_line(line, lineno)
                elif current.order is not None:
                    raise OrderFileError(lineno, "second R-line in record")
                else:
                    current.order = parse_order_line(line, lineno)
            except OrderFileError as exc:
                current.error = exc
    for rec in records.values():
        if rec.error is None and rec.order is None:
            rec.error = OrderFileError(rec.line, "record has no R-line")
    return records, errors


@dataclass
class ResolvedOrder:
    order: PathwayOrder | None
    unmatched: list[str] = field(default_factory=list)
    missing: list[int] = field(default_factory=list)
    error: str | None = None


def resolve_order(line: OrderLine, parse: ParsedUtterance, labels: LabelSet) -> ResolvedOrder:
    """Map names from an ``R:`` line onto the mentions of ``parse``.

    Unmatched names are reported and skipped. Mentions the line does not
    name are placed first, in heuristic order.
    """
    target = parse.target_index
    hit = match_class(line.target, labels)
    if hit is None or hit[0] != parse.mentions[target].canonical_class:
        return ResolvedOrder(None, error=f"target {line.target!r} does not match the parsed target")
    used = {target}
    chosen: list[int] = []
    unmatched: list[str] = []
    for name in line.anchors:
        hit = match_class(name, labels)
        idx = None
        if hit is not None:
            idx = next(
                (i for i, m in enumerate(parse.mentions)
                 if i not in used and m.canonical_class == hit[0]),
                None,
            )
        if idx is None:
            unmatched.append(name)
            continue
        used.add(idx)
        chosen.append(idx)
    missing = [i for i in heuristic_order(parse).ordered_mentions if i not in used]
    return ResolvedOrder(PathwayOrder(tuple(missing + chosen + [target])), unmatched, missing)


def parse_external_orders(
    text: str, parses: Mapping[str, ParsedUtterance], labels: LabelSet
) -> tuple[dict[str, ResolvedOrder], list[OrderFileError]]:
    """Read an order file and resolve every record against its parse."""
    records, errors = read_order_file(text)
    out: dict[str, ResolvedOrder] = {}
    for uid, rec in records.items():
        if rec.error is not None:
            out[uid] = ResolvedOrder(None, error=str(rec.error))
        elif uid not in parses:
            out[uid] = ResolvedOrder(None, error=f"line {rec.line}: no parse for {uid!r}")
        else:
            out[uid] = resolve_order(rec.order, parses[uid], labels)
    return out, errors


# -- sequence distance ---------------------------------------------------


def _encode(a: Sequence, b: Sequence) -> tuple[list[int], list[int]]:
    codes: dict = {}
    ea = [codes.setdefault(x, len(codes)) for x in a]
    eb = [codes.setdefault(x, len(codes)) for x in b]
    return ea, eb


def levenshtein(a: Sequence, b: Sequence) -> int:
    ea, eb = _encode(a, b)
    return kernels.edit_distance(ea, eb)


def normalized_levenshtein(a: Sequence, b: Sequence) -> float:
    """Edit distance over ``max(len(a), len(b))``; 0.0 for two empty sequences."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return levenshtein(a, b) / longest

