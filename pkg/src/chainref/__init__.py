"""Chain-of-thoughts 3D visual grounding: pseudo-label pipeline and toy decoder."""

from .augment import invert_relation, swap_target_anchor
from .decoder import DecoderConfig, DecoderParams, LossBundle, decode_chain, grad_check, total_loss
from .localizer import (
    GeometryConfig,
    GroundedChain,
    Provenance,
    anchor_precision,
    eval_predicate,
    find,
    localize_chain,
    localize_one,
)
from .matching import match_class
from .metrics import corpus_report, referring_accuracy
from .parser import Mention, ParsedUtterance, ParseError, RelationTriplet, Role, UtteranceParser, parse_utterance
from .pathway import PathwayOrder, heuristic_order, normalized_levenshtein, parse_order_line
from .relations import SpatialRelation, load_lexicon
from .scene import Aabb3, LabelSet, ObjectProposal, Scene, gen_synthetic_scene, load_labels, validate_scene

__version__ = "0.1.0"

__all__ = [
    "Aabb3", "DecoderConfig", "DecoderParams", "GeometryConfig", "GroundedChain", "LabelSet", "LossBundle",
    "Mention", "ObjectProposal", "ParseError", "ParsedUtterance", "PathwayOrder", "Provenance",
    "RelationTriplet", "Role", "Scene", "SpatialRelation", "UtteranceParser", "anchor_precision",
    "corpus_report", "decode_chain", "eval_predicate", "find", "gen_synthetic_scene", "grad_check",
    "heuristic_order", "invert_relation", "load_labels", "load_lexicon", "localize_chain", "localize_one",
    "match_class", "normalized_levenshtein", "parse_order_line", "parse_utterance", "referring_accuracy",
    "swap_target_anchor", "total_loss", "validate_scene",
]
