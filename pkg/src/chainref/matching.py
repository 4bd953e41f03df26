"""Lexical matching of free-text object names onto canonical class labels.

Similarity is the mean of two set overlaps on normalized strings:

* Jaccard index of whitespace tokens;
* Dice coefficient of character trigrams, taken over the string padded with
  one space on each side.
"""

from __future__ import annotations

import math
import re
from typing import Iterable

from .scene import LabelSet

DEFAULT_THRESHOLD = 0.35

_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def normalize(text: str) -> str:
    return " ".join(_NON_ALNUM.sub(" ", text.lower()).split())


def trigrams(norm: str) -> frozenset[str]:
    padded = f" {norm} "
    return frozenset(padded[i : i + 3] for i in range(len(padded) - 2))


def _features(norm: str) -> tuple[frozenset[str], frozenset[str]]:
    return frozenset(norm.split()), trigrams(norm)


def _score(a: tuple[frozenset, frozenset], b: tuple[frozenset, frozenset]) -> float:
    ta, ga = a
    tb, gb = b
    union = len(ta | tb)
    jaccard = len(ta & tb) / union if union else 0.0
    total = len(ga) + len(gb)
    dice = 2.0 * len(ga & gb) / total if total else 0.0
    return 0.5 * (jaccard + dice)


def similarity(a: str, b: str) -> float:
    na, nb = normalize(a), normalize(b)
    if na == nb:
        return 1.0
    # distinct strings never reach a perfect score
    return min(_score(_features(na), _features(nb)), math.nextafter(1.0, 0.0))


class _Matcher:
    def __init__(self, labels: LabelSet):
        forms: dict[str, list[str]] = {label: [label] for label in labels.labels}
        for alias, label in labels.aliases.items():
            forms[label].append(alias)
        self.exact: dict[str, str] = {}
        for label in sorted(labels.labels):
            for form in forms[label]:
                self.exact.setdefault(normalize(form), label)
        self.entries = [
            (label, [_features(normalize(f)) for f in forms[label]]) for label in sorted(labels.labels)
        ]

    def best(self, norm: str) -> tuple[str, float]:
        hit = self.exact.get(norm)
        if hit is not None:
            return hit, 1.0
        feats = _features(norm)
        best_label, best_score = "", -1.0
        for label, label_feats in self.entries:
            score = max(_score(feats, f) for f in label_feats)
            # entries are sorted, so strict > keeps the lexicographically first label on ties
            if score > best_score:
                best_label, best_score = label, score
        return best_label, min(best_score, math.nextafter(1.0, 0.0))


def _matcher(labels: LabelSet) -> _Matcher:
    m = labels.__dict__.get("_matcher")
    if m is None:
        m = _Matcher(labels)
        object.__setattr__(labels, "_matcher", m)
    return m


def as_label_set(labels: LabelSet | Iterable[str]) -> LabelSet:
    return labels if isinstance(labels, LabelSet) else LabelSet.of(labels)


def match_class(
    surface: str, labels: LabelSet | Iterable[str], threshold: float = DEFAULT_THRESHOLD
) -> tuple[str, float] | None:
    """Closest canonical label for ``surface`` and its score in [0, 1].

    Returns ``None`` when the best score falls below ``threshold``. Raises
    ``ValueError`` if ``surface`` normalizes to the empty string.
    """
    norm = normalize(surface)
    if not norm:
        raise ValueError("surface is empty after normalization")
    labels = as_label_set(labels)
    if not labels.labels:
        return None
    label, score = _matcher(labels).best(norm)
    if score < threshold:
        return None
    return label, score
