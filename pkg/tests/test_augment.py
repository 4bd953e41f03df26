from hypothesis import given, settings, strategies as st

from chainref.augment import invert_relation, swap_target_anchor
from chainref.parser import Mention, ParsedUtterance, RelationTriplet, Role, check_parse
from chainref.relations import SpatialRelation as R

SWAPPABLE = [r for r in R if r is not R.Between]


def two_mentions(target, triplets, classes=("chair", "desk")):
    mentions = tuple(
        Mention(c, c, 1.0, i, Role.TARGET if i == target else Role.ANCHOR) for i, c in enumerate(classes)
    )
    return ParsedUtterance("u", "", mentions, tuple(RelationTriplet(*t) for t in triplets))


def test_inversion_table():
    assert invert_relation(R.RightOf) is R.LeftOf
    assert invert_relation(R.Near) is R.Near
    assert {r: invert_relation(r) for r in (R.FrontOf, R.Above, R.On, R.Far, R.Between)} == {
        R.FrontOf: R.Behind, R.Above: R.Below, R.On: R.Under, R.Far: R.Far, R.Between: R.Between}
    assert all(invert_relation(invert_relation(r)) is r for r in R)


def test_chair_right_of_desk():
    out = swap_target_anchor(two_mentions(0, [(0, R.RightOf, 1)]))
    assert out.target.canonical_class == "desk"
    assert [(t.subject, t.relation, t.object) for t in out.triplets] == [(1, R.LeftOf, 0)]


def test_not_applicable():
    three = ParsedUtterance("u", "", two_mentions(0, []).mentions + (Mention("bed", "bed", 1.0, 5, Role.ANCHOR),),
                            (RelationTriplet(0, R.Near, 1),))
    assert swap_target_anchor(three) is None
    assert swap_target_anchor(two_mentions(0, [])) is None


def test_parsed_sentence_swap(parser):
    out = swap_target_anchor(parser.parse("the chair to the right of the desk"))
    assert out.target.canonical_class == "desk"
    assert out.text == "the chair to the right of the desk"


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 1), st.lists(st.tuples(st.integers(0, 1), st.sampled_from(SWAPPABLE)), min_size=1, max_size=4))
def test_swap_is_an_involution(target, raw):
    parse = two_mentions(target, [(s, r, 1 - s) for s, r in raw])
    once = swap_target_anchor(parse)
    assert check_parse(once) == []
    assert once.target_index == 1 - target
    assert swap_target_anchor(once) == parse
