"""Corpus-level evaluation of pseudo-labels and decoder predictions."""

from __future__ import annotations

import logging
from collections import Counter
from typing import Mapping, Sequence

from .localizer import GroundedChain, Provenance, anchor_precision
from .pathway import normalized_levenshtein

log = logging.getLogger(__name__)


def referring_accuracy(preds: Mapping[str, int | None], gts: Mapping[str, int]) -> float:
    """Share of utterances whose predicted target proposal equals the ground truth."""
    if not gts:
        raise ValueError("empty corpus")
    if set(preds) != set(gts):
        raise ValueError("prediction and ground-truth utterance ids differ")
    return sum(1 for k, v in gts.items() if preds[k] is not None and preds[k] == v) / len(gts)


def corpus_report(
    chains: Mapping[str, GroundedChain],
    gt_chains: Mapping[str, GroundedChain],
    orders: Mapping[str, Sequence[str]],
    gt_orders: Mapping[str, Sequence[str]],
) -> dict:
    """Mean anchor precision, mean normalized order distance and a provenance histogram.

    Records missing on either side, or whose mention sets disagree, are
    skipped and counted under ``skipped``.
    """
    skipped = 0
    precisions: list[float] = []
    for uid in sorted(set(chains) | set(gt_chains)):
        if uid not in chains or uid not in gt_chains:
            skipped += 1
            continue
        try:
            precisions.append(anchor_precision(chains[uid], gt_chains[uid]))
        except ValueError:
            skipped += 1
    distances: list[float] = []
    for uid in sorted(set(orders) | set(gt_orders)):
        if uid not in orders or uid not in gt_orders:
            skipped += 1
            continue
        distances.append(normalized_levenshtein(list(orders[uid]), list(gt_orders[uid])))
    hist = Counter({p.value: 0 for p in Provenance})
    for chain in chains.values():
        hist.update(a.provenance.value for a in chain.assignments)
    if skipped:
        log.warning("skipped %d misaligned records", skipped)
    return {
        "records": len(precisions),
        "anchor_precision": sum(precisions) / len(precisions) if precisions else None,
        "order_records": len(distances),
        "order_distance": sum(distances) / len(distances) if distances else None,
        "provenance": dict(hist),
        "mentions": sum(hist.values()),
        "skipped": skipped,
    }
