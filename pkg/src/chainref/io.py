"""Document formats.

Scene (JSON object, or a JSON array of them)::

    {"scene_id": "s0", "proposals": [{"id": 0, "class": "chair",
      "center": [x, y, z], "extent": [dx, dy, dz]}, ...]}

Corpus (JSONL)::

    {"utterance_id": "u0", "scene_id": "s0", "text": "...", "target_id": 3}

Pseudo-labels (JSONL), chain entries in pathway order::

    {"utterance_id": "u0", "scene_id": "s0", "chain": [{"mention": 1,
      "surface": "desk", "class": "desk", "role": "anchor", "proposal_id": 4,
      "order": 0, "provenance": "Unique"}, ...]}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .localizer import Assignment, GroundedChain, Provenance
from .parser import Mention, ParsedUtterance, RelationTriplet, Role
from .relations import SpatialRelation
from .scene import Aabb3, LabelSet, ObjectProposal, Scene


class SchemaError(ValueError):
    def __init__(self, path: str, reason: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path or '<root>'}: {reason}")
        self.path = path
        self.reason = reason
        self.line = line


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, allow_nan=False)


def _require(obj: Any, key: str, path: str, kind, line=None):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object", line)
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing field", line)
    value = obj[key]
    if (kind is int and isinstance(value, bool)) or not isinstance(value, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise SchemaError(f"{path}.{key}" if path else key, f"expected {name}", line)
    return value


def _vec3(obj, key, path, line=None) -> tuple[float, float, float]:
    value = _require(obj, key, path, list, line)
    where = f"{path}.{key}"
    if len(value) != 3 or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise SchemaError(where, "expected 3 numbers", line)
    if not all(math.isfinite(v) for v in value):
        raise SchemaError(where, "non-finite value", line)
    return tuple(float(v) for v in value)


# -- scenes ------------------------------------------------------------------


def scene_to_dict(scene: Scene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "proposals": [
            {"id": p.id, "class": p.class_label, "center": list(p.box.center), "extent": list(p.box.extent)}
            for p in scene.proposals
        ],
    }


def scene_from_dict(obj: Any, path: str = "") -> Scene:
    scene_id = _require(obj, "scene_id", path, str)
    props = _require(obj, "proposals", path, list)
    out = []
    for i, p in enumerate(props):
        where = f"{path + '.' if path else ''}proposals[{i}]"
        pid = _require(p, "id", where, int)
        cls = _require(p, "class", where, str)
        out.append(ObjectProposal(pid, cls, Aabb3(_vec3(p, "center", where), _vec3(p, "extent", where))))
    return Scene(scene_id, tuple(out))


def dumps_scenes(scenes: Sequence[Scene]) -> str:
    if len(scenes) == 1:
        return _dumps(scene_to_dict(scenes[0])) + "\n"
    return _dumps([scene_to_dict(s) for s in scenes]) + "\n"


def loads_scenes(text: str) -> list[Scene]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON ({exc.msg})", exc.lineno) from None
    if isinstance(doc, list):
        return [scene_from_dict(s, f"[{i}]") for i, s in enumerate(doc)]
    return [scene_from_dict(doc)]


def load_scenes(path: str | Path) -> list[Scene]:
    return loads_scenes(Path(path).read_text(encoding="utf-8"))


def save_scenes(scenes: Sequence[Scene], path: str | Path) -> None:
    Path(path).write_text(dumps_scenes(scenes), encoding="utf-8")


# -- labels ------------------------------------------------------------------


def dumps_labels(labels: LabelSet) -> str:
    by_label: dict[str, list[str]] = {l: [] for l in labels.labels}
    for alias, label in labels.aliases.items():
        by_label[label].append(alias)
    lines = [f"{l}: {', '.join(a)}" if a else l for l, a in by_label.items()]
    return "\n".join(lines) + "\n"


def save_labels(labels: LabelSet, path: str | Path) -> None:
    Path(path).write_text(dumps_labels(labels), encoding="utf-8")


# -- JSONL helpers -----------------------------------------------------------


def _jsonl(text: str) -> Iterable[tuple[int, Any]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        try:
            yield lineno, json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON ({exc.msg})", lineno) from None


# -- corpus ------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusRecord:
    utterance_id: str
    scene_id: str
    text: str
    target_id: int | None = None

    def to_dict(self) -> dict:
        d = {"utterance_id": self.utterance_id, "scene_id": self.scene_id, "text": self.text}
        if self.target_id is not None:
            d["target_id"] = self.target_id
        return d


def corpus_record_from_dict(obj: Any, line: int | None = None) -> CorpusRecord:
    target = None
    if isinstance(obj, dict) and obj.get("target_id") is not None:
        target = _require(obj, "target_id", "", int, line)
    return CorpusRecord(
        _require(obj, "utterance_id", "", str, line),
        _require(obj, "scene_id", "", str, line),
        _require(obj, "text", "", str, line),
        target,
    )


def loads_corpus(text: str) -> list[CorpusRecord]:
    records = [corpus_record_from_dict(obj, line) for line, obj in _jsonl(text)]
    seen = set()
    for r in records:
        if r.utterance_id in seen:
            raise SchemaError("utterance_id", f"duplicate id {r.utterance_id!r}")
        seen.add(r.utterance_id)
    return records


def load_corpus(path: str | Path) -> list[CorpusRecord]:
    return loads_corpus(Path(path).read_text(encoding="utf-8"))


def dumps_corpus(records: Sequence[CorpusRecord]) -> str:
    return "".join(_dumps(r.to_dict()) + "\n" for r in records)


def save_corpus(records: Sequence[CorpusRecord], path: str | Path) -> None:
    Path(path).write_text(dumps_corpus(records), encoding="utf-8")


# -- parses ------------------------------------------------------------------


def parse_to_dict(parse: ParsedUtterance) -> dict:
    return {
        "utterance_id": parse.utterance_id,
        "text": parse.text,
        "mentions": [
            {"surface": m.surface, "class": m.canonical_class, "score": m.match_score,
             "index": m.mention_index, "role": m.role.value}
            for m in parse.mentions
        ],
        "triplets": [
            {"subject": t.subject, "relation": t.relation.name, "object": t.object,
             **({"second_object": t.second_object} if t.second_object is not None else {})}
            for t in parse.triplets
        ],
        "truncated": parse.truncated,
        "over_token_cap": parse.over_token_cap,
    }


def parse_from_dict(obj: Any, line: int | None = None) -> ParsedUtterance:
    mentions = []
    for i, m in enumerate(_require(obj, "mentions", "", list, line)):
        where = f"mentions[{i}]"
        role = _require(m, "role", where, str, line)
        if role not in ("target", "anchor"):
            raise SchemaError(f"{where}.role", f"unknown role {role!r}", line)
        mentions.append(Mention(
            _require(m, "surface", where, str, line),
            _require(m, "class", where, str, line),
            float(_require(m, "score", where, (int, float), line)),
            _require(m, "index", where, int, line),
            Role(role),
        ))
    triplets = []
    for i, t in enumerate(_require(obj, "triplets", "", list, line)):
        where = f"triplets[{i}]"
        try:
            rel = SpatialRelation.from_name(_require(t, "relation", where, str, line))
        except ValueError as exc:
            raise SchemaError(f"{where}.relation", str(exc), line) from None
        second = t.get("second_object")
        if second is not None:
            second = _require(t, "second_object", where, int, line)
        triplets.append(RelationTriplet(
            _require(t, "subject", where, int, line), rel, _require(t, "object", where, int, line), second))
    return ParsedUtterance(
        utterance_id=_require(obj, "utterance_id", "", str, line),
        text=_require(obj, "text", "", str, line),
        mentions=tuple(mentions),
        triplets=tuple(triplets),
        truncated=bool(obj.get("truncated", False)),
        over_token_cap=bool(obj.get("over_token_cap", False)),
    )


def dumps_parses(parses: Sequence[ParsedUtterance]) -> str:
    return "".join(_dumps(parse_to_dict(p)) + "\n" for p in parses)


def loads_parses(text: str) -> list[ParsedUtterance]:
    return [parse_from_dict(obj, line) for line, obj in _jsonl(text)]


# -- pseudo-labels -----------------------------------------------------------


@dataclass(frozen=True)
class ChainEntry:
    mention: int
    surface: str
    class_label: str
    role: Role
    proposal_id: int | None
    order: int
    provenance: Provenance

    def to_dict(self) -> dict:
        return {
            "mention": self.mention,
            "surface": self.surface,
            "class": self.class_label,
            "role": self.role.value,
            "proposal_id": self.proposal_id,
            "order": self.order,
            "provenance": self.provenance.value,
        }


@dataclass(frozen=True)
class PseudoLabel:
    utterance_id: str
    scene_id: str
    chain: tuple[ChainEntry, ...]

    def to_dict(self) -> dict:
        return {"utterance_id": self.utterance_id, "scene_id": self.scene_id,
                "chain": [e.to_dict() for e in self.chain]}

    @classmethod
    def build(cls, scene_id: str, parse: ParsedUtterance, chain: GroundedChain) -> "PseudoLabel":
        entries = tuple(
            ChainEntry(
                mention=a.mention,
                surface=parse.mentions[a.mention].surface,
                class_label=parse.mentions[a.mention].canonical_class,
                role=parse.mentions[a.mention].role,
                proposal_id=a.proposal_id,
                order=k,
                provenance=a.provenance,
            )
            for k, a in enumerate(chain.assignments)
        )
        return cls(chain.utterance_id, scene_id, entries)

    def grounded_chain(self) -> GroundedChain:
        ordered = sorted(self.chain, key=lambda e: e.order)
        return GroundedChain(self.utterance_id, tuple(
            Assignment(e.mention, e.proposal_id, e.provenance) for e in ordered))

    def order_labels(self) -> list[str]:
        return [e.class_label for e in sorted(self.chain, key=lambda e: e.order)]

    def target_proposal(self) -> int | None:
        for e in self.chain:
            if e.role is Role.TARGET:
                return e.proposal_id
        return None


_PROVENANCE = {p.value: p for p in Provenance}


def pseudo_label_from_dict(obj: Any, line: int | None = None) -> PseudoLabel:
    entries = []
    for i, e in enumerate(_require(obj, "chain", "", list, line)):
        where = f"chain[{i}]"
        prov = _require(e, "provenance", where, str, line)
        if prov not in _PROVENANCE:
            raise SchemaError(f"{where}.provenance", f"unknown provenance {prov!r}", line)
        pid = e.get("proposal_id") if isinstance(e, dict) else None
        if pid is not None:
            pid = _require(e, "proposal_id", where, int, line)
        elif isinstance(e, dict) and "proposal_id" not in e:
            raise SchemaError(f"{where}.proposal_id", "missing field", line)
        if (pid is None) != (prov == Provenance.UNRESOLVED.value):
            raise SchemaError(f"{where}.proposal_id", "null exactly when provenance is Unresolved", line)
        surface = e.get("surface", "")
        if not isinstance(surface, str):
            raise SchemaError(f"{where}.surface", "expected str", line)
        role = e.get("role", "anchor")
        if role not in ("target", "anchor"):
            raise SchemaError(f"{where}.role", f"unknown role {role!r}", line)
        entries.append(ChainEntry(
            mention=_require(e, "mention", where, int, line),
            surface=surface,
            class_label=_require(e, "class", where, str, line),
            role=Role(role),
            proposal_id=pid,
            order=_require(e, "order", where, int, line),
            provenance=_PROVENANCE[prov],
        ))
    return PseudoLabel(
        _require(obj, "utterance_id", "", str, line),
        _require(obj, "scene_id", "", str, line),
        tuple(entries),
    )


def dumps_pseudo_labels(labels: Sequence[PseudoLabel]) -> str:
    return "".join(_dumps(p.to_dict()) + "\n" for p in labels)


def loads_pseudo_labels(text: str) -> list[PseudoLabel]:
    return [pseudo_label_from_dict(obj, line) for line, obj in _jsonl(text)]


def load_pseudo_labels(path: str | Path) -> list[PseudoLabel]:
    return loads_pseudo_labels(Path(path).read_text(encoding="utf-8"))


def save_pseudo_labels(labels: Sequence[PseudoLabel], path: str | Path) -> None:
    Path(path).write_text(dumps_pseudo_labels(labels), encoding="utf-8")
