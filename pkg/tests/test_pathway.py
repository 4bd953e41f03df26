import pytest
from hypothesis import given, settings, strategies as st

from chainref.parser import Mention, ParsedUtterance, RelationTriplet, Role
from chainref.pathway import (
    OrderFileError,
    OrderLine,
    PathwayOrder,
    acyclic_edges,
    format_order_line,
    heuristic_order,
    levenshtein,
    normalized_levenshtein,
    parse_external_orders,
    parse_order_line,
    read_order_file,
    resolve_order,
)
from chainref.relations import SpatialRelation as R

from test_parser import BED_TEXT, CABINET_TEXT, STANDING_TEXT, TV_TEXT


def dp_distance(a, b):
    """Textbook Wagner-Fischer table, kept separate from the package kernels."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        table[i][0] = i
    for j in range(len(b) + 1):
        table[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return table[len(a)][len(b)]


def synthetic_parse(n, target, triplets):
    mentions = tuple(
        Mention(f"obj{i}", f"c{i}", 1.0, i, Role.TARGET if i == target else Role.ANCHOR) for i in range(n)
    )
    return ParsedUtterance("u", "", mentions, tuple(RelationTriplet(*t) for t in triplets))


def test_tv_couch_pillow_order(parser):
    p = parser.parse(TV_TEXT)
    assert heuristic_order(p).labels(p) == ["tv", "couch", "pillow"]


@pytest.mark.parametrize("text", [BED_TEXT, STANDING_TEXT])
def test_bed_pillow_orders(parser, text):
    p = parser.parse(text)
    assert heuristic_order(p).labels(p) == ["bed", "pillow"]


def test_cabinet_target_last(parser):
    p = parser.parse(CABINET_TEXT)
    order = heuristic_order(p)
    order.check(p)
    assert order.labels(p)[-1] == "kitchen cabinet"


def test_single_mention():
    assert heuristic_order(synthetic_parse(1, 0, [])).ordered_mentions == (0,)


def test_independent_anchors_later_first():
    assert heuristic_order(synthetic_parse(3, 2, [])).ordered_mentions == (1, 0, 2)


def test_cycle_is_broken_deterministically():
    p = synthetic_parse(3, 2, [(0, R.Near, 1), (1, R.Near, 0)])
    assert acyclic_edges(p) == {(1, 0)}
    assert heuristic_order(p).ordered_mentions == (0, 1, 2)


@st.composite
def random_parses(draw):
    n = draw(st.integers(1, 8))
    target = draw(st.integers(0, n - 1))
    pairs = st.tuples(st.integers(0, n - 1), st.sampled_from(list(R)[:10]), st.integers(0, n - 1))
    raw = draw(st.lists(pairs, max_size=12))
    return synthetic_parse(n, target, [t for t in raw if t[0] != t[2]])


@settings(max_examples=200, deadline=None)
@given(random_parses(), st.randoms(use_true_random=False))
def test_order_is_permutation_target_last_and_triplet_order_free(parse, rnd):
    order = heuristic_order(parse)
    order.check(parse)
    shuffled = list(parse.triplets)
    rnd.shuffle(shuffled)
    again = ParsedUtterance(parse.utterance_id, parse.text, parse.mentions, tuple(shuffled))
    assert heuristic_order(again) == order
    rank = order.rank()
    for s, o in acyclic_edges(parse):
        assert rank[o] < rank[s]


# -- order files


def test_parse_r_line():
    assert parse_order_line("R: [1: bed, t: pillow]") == OrderLine(("bed",), "pillow")


@pytest.mark.parametrize("line", ["R: []", "R: [1: bed]", "R: [2: bed, t: pillow]", "R: 1: bed",
                                  "R: [t: a, t: b]", "R: [t: a, 1: b]", "R: [x: a, t: b]"])
def test_bad_r_lines(line):
    with pytest.raises(OrderFileError):
        parse_order_line(line, 4)


def test_r_line_round_trip():
    line = "R: [1: TV, 2: couch, t: pillow]"
    assert format_order_line(parse_order_line(line)) == line


def test_resolve_bed_order(parser, labels):
    p = parser.parse(BED_TEXT)
    res = resolve_order(parse_order_line("R: [1: bed, t: pillow]"), p, labels)
    assert res.order.labels(p) == ["bed", "pillow"] and not res.unmatched


def test_resolve_reports_unmatched_and_fills_missing(parser, labels):
    p = parser.parse(TV_TEXT)
    res = resolve_order(parse_order_line("R: [1: spaceship, 2: couch, t: pillow]"), p, labels)
    assert res.unmatched == ["spaceship"]
    assert res.order.labels(p) == ["tv", "couch", "pillow"]
    bad = resolve_order(parse_order_line("R: [1: couch, t: tv]"), p, labels)
    assert bad.order is None and "target" in bad.error


ORDER_FILE = """\
ID: a
Q: "The pillow on the bed"
L: [pillow, bed]
R: [1: bed, t: pillow]
(explanation that is ignored)
ID: b
L: [pillow]
R: []
ID: a
R: [t: pillow]
ID: c
L: [chair]
"""


def test_read_order_file_records_and_errors():
    records, errors = read_order_file(ORDER_FILE)
    assert records["a"].order == OrderLine(("bed",), "pillow")
    assert records["a"].listed == ["pillow", "bed"]
    assert records["b"].error.line == 8
    assert "no R-line" in str(records["c"].error)
    assert [e.line for e in errors] == [9, 10]  # the duplicate and its orphaned R-line


def test_external_orders_against_parses(parser, labels):
    parses = {"a": parser.parse("the pillow on the bed", "a")}
    resolved, _ = parse_external_orders(ORDER_FILE, parses, labels)
    assert resolved["a"].order.ordered_mentions == (1, 0)
    assert resolved["b"].order is None
    assert "no parse" in resolved["c"].error or "R-line" in resolved["c"].error


# -- distance


def test_distance_examples():
    assert normalized_levenshtein("abc", "abc") == 0.0
    assert normalized_levenshtein(["a", "b", "c"], ["x", "y", "z"]) == 1.0
    assert normalized_levenshtein(list("abcd"), list("axcd")) == 0.25
    assert normalized_levenshtein([], []) == 0.0


seqs = st.lists(st.sampled_from("abcde"), max_size=8)


@settings(max_examples=300, deadline=None)
@given(seqs, seqs, seqs)
def test_metric_axioms(a, b, c):
    assert levenshtein(a, b) == dp_distance(a, b)
    assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)
    assert 0.0 <= normalized_levenshtein(a, b) <= 1.0


def test_order_check_rejects_bad_orders():
    p = synthetic_parse(2, 1, [])
    with pytest.raises(ValueError):
        PathwayOrder((1, 0)).check(p)
    with pytest.raises(ValueError):
        PathwayOrder((0, 0)).check(p)
