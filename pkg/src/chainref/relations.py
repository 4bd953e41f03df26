"""Spatial relation vocabulary and the phrase lexicon that maps text onto it."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


class SpatialRelation(enum.IntEnum):
    # integer values are the codes used by the geometry kernels
    Near = 0
    Far = 1
    LeftOf = 2
    RightOf = 3
    FrontOf = 4
    Behind = 5
    Above = 6
    Below = 7
    On = 8
    Under = 9
    Between = 10

    @property
    def inverse(self) -> "SpatialRelation":
        return _INVERSE[self]

    @classmethod
    def from_name(cls, name: str) -> "SpatialRelation":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown relation {name!r}") from None


_INVERSE = {
    SpatialRelation.Near: SpatialRelation.Near,
    SpatialRelation.Far: SpatialRelation.Far,
    SpatialRelation.LeftOf: SpatialRelation.RightOf,
    SpatialRelation.RightOf: SpatialRelation.LeftOf,
    SpatialRelation.FrontOf: SpatialRelation.Behind,
    SpatialRelation.Behind: SpatialRelation.FrontOf,
    SpatialRelation.Above: SpatialRelation.Below,
    SpatialRelation.Below: SpatialRelation.Above,
    SpatialRelation.On: SpatialRelation.Under,
    SpatialRelation.Under: SpatialRelation.On,
    SpatialRelation.Between: SpatialRelation.Between,
}


@dataclass(frozen=True)
class RelationLexicon:
    """Phrase table; each phrase is stored as a token tuple."""

    entries: tuple[tuple[tuple[str, ...], SpatialRelation], ...]

    @property
    def max_len(self) -> int:
        return max((len(p) for p, _ in self.entries), default=0)

    def as_dict(self) -> dict[tuple[str, ...], SpatialRelation]:
        return dict(self.entries)


_TOKEN = re.compile(r"[a-z0-9]+")


def parse_lexicon(text: str) -> RelationLexicon:
    entries: dict[tuple[str, ...], SpatialRelation] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        phrase, sep, name = line.partition("=>")
        if not sep:
            raise ValueError(f"lexicon line {lineno}: expected 'phrase => RelationName'")
        tokens = tuple(_TOKEN.findall(phrase.lower()))
        if not tokens:
            raise ValueError(f"lexicon line {lineno}: empty phrase")
        try:
            entries[tokens] = SpatialRelation.from_name(name.strip())
        except ValueError as exc:
            raise ValueError(f"lexicon line {lineno}: {exc}") from None
    return RelationLexicon(tuple(entries.items()))


def load_lexicon(path: str | Path | None = None) -> RelationLexicon:
    if path is None:
        text = resources.files("chainref").joinpath("data/relations.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_lexicon(text)
