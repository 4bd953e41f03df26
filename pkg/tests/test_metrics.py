import pytest

from chainref.localizer import Assignment, GroundedChain, Provenance
from chainref.metrics import corpus_report, referring_accuracy


def chain(ids, prov=Provenance.UNIQUE):
    return GroundedChain("u", tuple(Assignment(m, p, prov) for m, p in enumerate(ids)))


def test_referring_accuracy():
    gts = {str(i): i for i in range(10)}
    assert referring_accuracy(dict(gts), gts) == 1.0
    half = {k: (v if int(k) < 5 else None) for k, v in gts.items()}
    assert referring_accuracy(half, gts) == 0.5
    with pytest.raises(ValueError):
        referring_accuracy({}, {})
    with pytest.raises(ValueError):
        referring_accuracy({"a": 1}, {"b": 1})


def test_identical_report():
    chains = {"a": chain([1, 2]), "b": chain([3])}
    orders = {"a": ["x", "y"], "b": ["z"]}
    r = corpus_report(chains, chains, orders, orders)
    assert r["anchor_precision"] == 1.0 and r["order_distance"] == 0.0
    assert r["provenance"]["Unique"] == 3 and r["mentions"] == 3 and r["skipped"] == 0


def test_one_of_four_wrong():
    gt = {k: chain([0, 1, 2, 3]) for k in "abc"}
    pred = {k: chain([0, 1, 2, 9]) for k in "abc"}
    r = corpus_report(pred, gt, {}, {})
    assert r["anchor_precision"] == 0.75
    assert r["order_distance"] is None


def test_misaligned_records_are_skipped():
    r = corpus_report({"a": chain([1]), "b": chain([1, 2])}, {"a": chain([1]), "b": chain([1])},
                      {"a": ["x"]}, {"c": ["x"]})
    assert r["records"] == 1 and r["skipped"] == 3


def test_histogram_partitions_mentions():
    chains = {"a": chain([1, 2], Provenance.RANDOM_FALLBACK), "b": chain([None], Provenance.UNRESOLVED)}
    r = corpus_report(chains, chains, {}, {})
    assert sum(r["provenance"].values()) == r["mentions"] == 3
    assert set(r["provenance"]) == {"Unique", "RelationResolved", "RandomFallback", "Unresolved"}
