"""Rule-based extraction of mentioned objects and spatial-relation triplets.

The grammar is deliberately shallow:

1. Tokenize to lowercase ASCII words.
2. Mark relation phrases by greedy longest match against the lexicon.
3. Outside relation phrases, find object mentions: multi-word labels first
   (exact or alias, with plural stripping), then single words, fuzzily matched
   when at least four letters long. Stopwords and colour/size adjectives are
   never mentions.
4. Adjacent mentions form a compound whose head is the last word ("desk lamp"
   is a lamp) unless the whole compound is itself a label.
5. A repeated mention of an already-seen class refers back to it, unless a
   contrast word ("other", "another", ...) precedes it.
6. The target is the object of a selection verb ("choose the ..."), otherwise
   the first mention preceding any relation phrase, otherwise the first mention.
7. Each relation phrase links the nearest mention on its left to the nearest
   mention on its right; "between X and Y" takes the next two mentions.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .matching import DEFAULT_THRESHOLD, _matcher, as_label_set
from .relations import RelationLexicon, SpatialRelation
from .scene import LabelSet

DEFAULT_MAX_MENTIONS = 8
DEFAULT_TOKEN_CAP = 24

_WORD = re.compile(r"[a-z0-9]+")

STOPWORDS = frozenset(
    """
    a an the this that these those it its it's one ones some any each every all both either
    neither no not of to in at for from with without into out up down off as is are was were
    be been being am has have had do does did can could will would should may might must shall
    and or but so if then than when where which who whom whose what while there here
    i you he she we they me him her us them my your his our their yours mine
    very more most less least much many few lot lots bit kind sort just only also too even
    s t re ve ll d m
    left right front back side sides end ends corner corners middle center centre top bottom
    edge edges part parts area room rooms floor ceiling way direction view
    first second third last other another different same remaining next nearby
    closest nearest furthest farthest closer further farther
    look looking looks see seeing facing face faces standing stand stands sitting sits
    enter entering walk walking go going come coming turn turning
    choose select pick find click grab identify locate please
    group groups pair set row rows
    two three four five six seven eight nine ten
    """.split()
) - {"stand"}

ADJECTIVES = frozenset(
    """
    white black red green blue yellow orange purple pink brown gray grey beige tan silver gold golden
    dark light bright pale colored coloured wooden metal metallic plastic glass leather striped
    big small large tiny huge little tall short long wide narrow thick thin high low
    smaller larger bigger taller shorter wider narrower longer
    smallest largest biggest tallest shortest widest narrowest longest
    round square rectangular open closed empty full new old
    """.split()
)

SELECTION_VERBS = frozenset("choose select pick find click grab identify".split())
CONTRAST_WORDS = frozenset("other another second third different remaining".split())
COLOR_WORDS = frozenset(
    "white black red green blue yellow orange purple pink brown gray grey beige tan silver gold".split()
)


class ParseError(ValueError):
    """Raised when an utterance yields no matchable object mention."""


class Role(str, enum.Enum):
    TARGET = "target"
    ANCHOR = "anchor"


@dataclass(frozen=True)
class Mention:
    surface: str
    canonical_class: str
    match_score: float
    mention_index: int
    role: Role


@dataclass(frozen=True)
class RelationTriplet:
    subject: int
    relation: SpatialRelation
    object: int
    second_object: int | None = None


@dataclass(frozen=True)
class ParsedUtterance:
    utterance_id: str
    text: str
    mentions: tuple[Mention, ...]
    triplets: tuple[RelationTriplet, ...] = ()
    truncated: bool = False
    over_token_cap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mentions", tuple(self.mentions))
        object.__setattr__(self, "triplets", tuple(self.triplets))

    @property
    def target_index(self) -> int:
        for i, m in enumerate(self.mentions):
            if m.role is Role.TARGET:
                return i
        raise ValueError("parse has no target")

    @property
    def target(self) -> Mention:
        return self.mentions[self.target_index]

    def relate(self, index: int) -> list[tuple[SpatialRelation, int, int | None]]:
        """Relations anchored on mention ``index``: own triplets, then inverted ones.

        A triplet where ``index`` is the object contributes the inverse
        relation pointing back at its subject. Ternary relations are only
        used in the forward direction.
        """
        forward = [
            (t.relation, t.object, t.second_object) for t in self.triplets if t.subject == index
        ]
        backward = [
            (t.relation.inverse, t.subject, None)
            for t in self.triplets
            if t.object == index and t.relation is not SpatialRelation.Between
        ]
        return forward + backward


def check_parse(parse: ParsedUtterance, labels: LabelSet | None = None,
                max_mentions: int = DEFAULT_MAX_MENTIONS) -> list[str]:
    """Invariant violations of a parse, as readable strings."""
    problems = []
    n = len(parse.mentions)
    if not 1 <= n <= max_mentions:
        problems.append(f"mention count {n} outside [1, {max_mentions}]")
    targets = sum(m.role is Role.TARGET for m in parse.mentions)
    if targets != 1:
        problems.append(f"{targets} targets")
    if labels is not None:
        for m in parse.mentions:
            if m.canonical_class not in labels:
                problems.append(f"unknown class {m.canonical_class!r}")
    for t in parse.triplets:
        idx = [t.subject, t.object] + ([t.second_object] if t.second_object is not None else [])
        if any(not 0 <= i < n for i in idx):
            problems.append(f"triplet {t} index out of range")
        if t.subject == t.object:
            problems.append(f"triplet {t} relates a mention to itself")
        if (t.second_object is not None) != (t.relation is SpatialRelation.Between):
            problems.append(f"triplet {t} second_object inconsistent with relation")
        if t.second_object is not None and t.second_object in (t.subject, t.object):
            problems.append(f"triplet {t} repeats a mention")
    return problems


@dataclass
class _Occurrence:
    start: int
    end: int
    surface: str
    label: str
    score: float
    contrast: bool = False
    mention: int = -1


def _singular_forms(word: str) -> list[str]:
    forms = [word]
    if len(word) > 3:
        if word.endswith("ies"):
            forms.append(word[:-3] + "y")
        if word.endswith("ves"):
            forms.append(word[:-3] + "f")
        if word.endswith("es"):
            forms.append(word[:-2])
        if word.endswith("s") and not word.endswith("ss"):
            forms.append(word[:-1])
    return forms


@dataclass(frozen=True)
class UtteranceParser:
    labels: LabelSet
    lexicon: RelationLexicon
    max_mentions: int = DEFAULT_MAX_MENTIONS
    token_cap: int = DEFAULT_TOKEN_CAP
    threshold: float = DEFAULT_THRESHOLD
    _phrases: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_phrases", self.lexicon.as_dict())

    # -- lexical passes -------------------------------------------------

    def _relation_spans(self, tokens: list[str]) -> list[tuple[int, int, SpatialRelation]]:
        spans = []
        i, n, longest = 0, len(tokens), self.lexicon.max_len
        while i < n:
            for k in range(min(longest, n - i), 0, -1):
                rel = self._phrases.get(tuple(tokens[i : i + k]))
                if rel is not None:
                    spans.append((i, i + k, rel))
                    i += k
                    break
            else:
                i += 1
        return spans

    def _exact(self, words: list[str]) -> str | None:
        exact = _matcher(self.labels).exact
        head = " ".join(words[:-1])
        for form in _singular_forms(words[-1]):
            hit = exact.get(f"{head} {form}" if head else form)
            if hit is not None:
                return hit
        return None

    def _occurrences(self, tokens: list[str], blocked: list[bool]) -> list[_Occurrence]:
        matcher = _matcher(self.labels)
        occ: list[_Occurrence] = []
        i, n = 0, len(tokens)
        while i < n:
            tok = tokens[i]
            if blocked[i] or tok in STOPWORDS or tok in ADJECTIVES or not tok.isalpha():
                # "light" is a lamp unless it modifies a colour
                if not (tok == "light" and not blocked[i]
                        and not (i + 1 < n and tokens[i + 1] in COLOR_WORDS)):
                    i += 1
                    continue
            found = None
            for k in (3, 2):
                if i + k <= n and not any(blocked[i : i + k]):
                    label = self._exact(tokens[i : i + k])
                    if label is not None:
                        found = (k, label, 1.0)
                        break
            if found is None:
                label = self._exact([tok])
                if label is not None:
                    found = (1, label, 1.0)
                elif len(tok) >= 4:
                    label, score = matcher.best(tok)
                    if score >= self.threshold:
                        found = (1, label, score)
            if found is None:
                i += 1
                continue
            k, label, score = found
            j = i - 1
            while j >= 0 and tokens[j] in ADJECTIVES:
                j -= 1
            contrast = j >= 0 and tokens[j] in CONTRAST_WORDS
            occ.append(_Occurrence(i, i + k, " ".join(tokens[i : i + k]), label, score, contrast))
            i += k
        return self._compounds(occ)

    def _compounds(self, occ: list[_Occurrence]) -> list[_Occurrence]:
        merged: list[_Occurrence] = []
        for o in occ:
            if merged and merged[-1].end == o.start:
                prev = merged.pop()
                surface = f"{prev.surface} {o.surface}"
                label = self._exact(surface.split())
                if label is None:
                    label, score = o.label, o.score
                else:
                    score = 1.0
                o = _Occurrence(prev.start, o.end, surface, label, score, prev.contrast)
            merged.append(o)
        return merged

    # -- main entry -----------------------------------------------------

    def parse(self, text: str, utterance_id: str = "") -> ParsedUtterance:
        tokens = _WORD.findall(text.lower())
        spans = self._relation_spans(tokens)
        blocked = [False] * len(tokens)
        for s, e, _ in spans:
            for k in range(s, e):
                blocked[k] = True
        occ = self._occurrences(tokens, blocked)
        if not occ:
            raise ParseError(f"no object mention found in {text!r}")

        # coreference of repeated classes
        mentions: list[_Occurrence] = []
        by_class: dict[str, int] = {}
        for o in occ:
            if o.label in by_class and not o.contrast:
                o.mention = by_class[o.label]
            else:
                o.mention = len(mentions)
                mentions.append(o)
                by_class[o.label] = o.mention

        target = self._pick_target(tokens, spans, occ)
        triplets = self._triplets(tokens, spans, occ)

        truncated = len(mentions) > self.max_mentions
        keep = list(range(len(mentions)))
        if truncated:
            keep = keep[: self.max_mentions]
            if target not in keep:
                keep[-1] = target
        remap = {old: new for new, old in enumerate(keep)}
        out_mentions = tuple(
            Mention(
                surface=mentions[old].surface,
                canonical_class=mentions[old].label,
                match_score=mentions[old].score,
                mention_index=mentions[old].start,
                role=Role.TARGET if old == target else Role.ANCHOR,
            )
            for old in keep
        )
        out_triplets = []
        for t in triplets:
            idx = [t.subject, t.object] + ([t.second_object] if t.second_object is not None else [])
            if all(i in remap for i in idx):
                out_triplets.append(
                    RelationTriplet(
                        remap[t.subject],
                        t.relation,
                        remap[t.object],
                        remap[t.second_object] if t.second_object is not None else None,
                    )
                )
        return ParsedUtterance(
            utterance_id=utterance_id,
            text=text,
            mentions=out_mentions,
            triplets=tuple(out_triplets),
            truncated=truncated,
            over_token_cap=len(tokens) > self.token_cap,
        )

    @staticmethod
    def _pick_target(tokens, spans, occ: list[_Occurrence]) -> int:
        for v, tok in enumerate(tokens):
            if tok in SELECTION_VERBS:
                after = [o for o in occ if o.start > v]
                if after:
                    return after[0].mention
        if spans:
            first_rel = spans[0][0]
            before = [o for o in occ if o.end <= first_rel]
            if before:
                return before[0].mention
        return occ[0].mention

    @staticmethod
    def _triplets(tokens, spans, occ: list[_Occurrence]) -> list[RelationTriplet]:
        out: list[RelationTriplet] = []
        seen = set()
        for n, (start, end, rel) in enumerate(spans):
            limit = spans[n + 1][0] if n + 1 < len(spans) else len(tokens)
            left = [o for o in occ if o.end <= start]
            right = [o for o in occ if o.start >= end and o.start < limit]
            if not left or not right:
                continue
            subj = left[-1].mention
            obj = right[0].mention
            second = None
            if rel is SpatialRelation.Between:
                rest = [o for o in occ if o.start >= right[0].end and o.mention not in (subj, obj)]
                if not rest:
                    continue
                second = rest[0].mention
            if subj == obj or (second is not None and second in (subj, obj)):
                continue
            key = (subj, rel, obj, second)
            if key not in seen:
                seen.add(key)
                out.append(RelationTriplet(subj, rel, obj, second))
        return out


def parse_utterance(
    text: str,
    labels: LabelSet | Iterable[str],
    lexicon: RelationLexicon,
    utterance_id: str = "",
    **options,
) -> ParsedUtterance:
    """Parse one utterance. Raises :class:`ParseError` when nothing matches."""
    return UtteranceParser(as_label_set(labels), lexicon, **options).parse(text, utterance_id)


def with_roles(parse: ParsedUtterance, target: int) -> ParsedUtterance:
    mentions = tuple(
        replace(m, role=Role.TARGET if i == target else Role.ANCHOR)
        for i, m in enumerate(parse.mentions)
    )
    return replace(parse, mentions=mentions)
