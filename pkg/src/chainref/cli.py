"""Batch command line: parse, order, ground, augment, eval, decode-demo, gen-scenes."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from . import io
from .augment import swap_target_anchor
from .config import EngineConfig, load_config
from .decoder import DecoderConfig, grad_check, loss_of, toy_instance
from .localizer import localize_chain, utterance_seed
from .metrics import corpus_report, referring_accuracy
from .parser import ParseError, UtteranceParser
from .pathway import heuristic_order, parse_external_orders
from .relations import load_lexicon
from .scene import Aabb3, gen_synthetic_scene, load_labels, validate_scene

log = logging.getLogger("chainref")

GRAD_TOLERANCE = 1e-4


class RecordFailure(Exception):
    pass


class _Context:
    def __init__(self, args):
        self.args = args
        self.config: EngineConfig = load_config(args.config)
        if args.mask_mode:
            self.config = replace(self.config, decoder=replace(self.config.decoder, mask_mode=args.mask_mode))
        self.labels = load_labels(args.labels)
        self.lexicon = load_lexicon(args.lexicon)
        self.parser = UtteranceParser(self.labels, self.lexicon, **self.config.parser_options())

    def parse(self, rec: io.CorpusRecord):
        try:
            return self.parser.parse(rec.text, rec.utterance_id)
        except ParseError as exc:
            raise RecordFailure(str(exc)) from None


def _write(args, text: str) -> None:
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


def _run_records(args, records: Sequence, fn: Callable) -> tuple[list, list[tuple[str, str]]]:
    """Apply ``fn`` to every record, keeping input order; failures are collected, not raised."""

    def safe(rec):
        try:
            return fn(rec), None
        except RecordFailure as exc:
            return None, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        results = list(pool.map(safe, records))
    out, failures = [], []
    for rec, (value, err) in zip(records, results):
        if err is not None:
            failures.append((getattr(rec, "utterance_id", "?"), err))
        elif value is not None:
            out.extend(value if isinstance(value, list) else [value])
    return out, failures


def _report_failures(failures, total) -> int:
    if not failures:
        return 0
    for uid, err in failures:
        print(f"{uid}: {err}", file=sys.stderr)
    print(f"{len(failures)} of {total} records failed", file=sys.stderr)
    return 1


def _external_orders(ctx: _Context, parses: dict):
    if not ctx.args.orders:
        return None
    text = Path(ctx.args.orders).read_text(encoding="utf-8")
    resolved, errors = parse_external_orders(text, parses, ctx.labels)
    for err in errors:
        print(f"{ctx.args.orders}: {err}", file=sys.stderr)
    return resolved


def _order_for(ctx, parse, external):
    if external is None or parse.utterance_id not in external:
        if external is not None:
            log.warning("%s: no external order, using heuristic", parse.utterance_id)
        return heuristic_order(parse), "heuristic"
    res = external[parse.utterance_id]
    if res.order is None:
        raise RecordFailure(f"external order: {res.error}")
    if res.unmatched:
        log.warning("%s: unmatched order names %s", parse.utterance_id, res.unmatched)
    return res.order, "external"


def _parse_all(ctx, corpus):
    """Parse the corpus up front so external orders can be resolved against it."""
    parses = {}
    for rec in corpus:
        try:
            parses[rec.utterance_id] = ctx.parse(rec)
        except RecordFailure:
            pass
    return parses


# -- subcommands -------------------------------------------------------------


def cmd_parse(ctx: _Context) -> int:
    corpus = io.load_corpus(ctx.args.corpus)
    out, failures = _run_records(ctx.args, corpus, ctx.parse)
    _write(ctx.args, io.dumps_parses(out))
    return _report_failures(failures, len(corpus))


def cmd_order(ctx: _Context) -> int:
    corpus = io.load_corpus(ctx.args.corpus)
    parses = _parse_all(ctx, corpus)
    external = _external_orders(ctx, parses)

    def one(rec):
        parse = parses.get(rec.utterance_id) or ctx.parse(rec)
        order, source = _order_for(ctx, parse, external)
        return {"utterance_id": rec.utterance_id, "order": list(order.ordered_mentions),
                "labels": order.labels(parse), "source": source}

    out, failures = _run_records(ctx.args, corpus, one)
    _write(ctx.args, "".join(json.dumps(o) + "\n" for o in out))
    return _report_failures(failures, len(corpus))


def cmd_ground(ctx: _Context) -> int:
    corpus = io.load_corpus(ctx.args.corpus)
    scenes = {s.scene_id: s for s in io.load_scenes(ctx.args.scenes)}
    for scene in scenes.values():
        problems = validate_scene(scene, ctx.labels, ctx.config.max_proposals)
        if problems:
            raise io.SchemaError(f"scene {scene.scene_id}", "; ".join(map(str, problems)))
    parses = _parse_all(ctx, corpus)
    external = _external_orders(ctx, parses)

    def one(rec):
        scene = scenes.get(rec.scene_id)
        if scene is None:
            raise RecordFailure(f"unknown scene {rec.scene_id!r}")
        parse = parses.get(rec.utterance_id) or ctx.parse(rec)
        order, _ = _order_for(ctx, parse, external)
        chain = localize_chain(parse, order, scene, utterance_seed(ctx.args.seed, rec.utterance_id),
                               ctx.config.geometry)
        return io.PseudoLabel.build(rec.scene_id, parse, chain)

    out, failures = _run_records(ctx.args, corpus, one)
    _write(ctx.args, io.dumps_pseudo_labels(out))
    return _report_failures(failures, len(corpus))


def cmd_augment(ctx: _Context) -> int:
    corpus = io.load_corpus(ctx.args.corpus)

    def one(rec):
        swapped = swap_target_anchor(ctx.parse(rec))
        if swapped is None:
            return None
        return replace(swapped, utterance_id=f"{rec.utterance_id}#swap")

    out, failures = _run_records(ctx.args, corpus, one)
    _write(ctx.args, io.dumps_parses(out))
    return _report_failures(failures, len(corpus))


def cmd_eval(ctx: _Context) -> int:
    pred = {p.utterance_id: p for p in io.load_pseudo_labels(ctx.args.pred)}
    gt = {p.utterance_id: p for p in io.load_pseudo_labels(ctx.args.gt)}
    report = corpus_report(
        {k: v.grounded_chain() for k, v in pred.items()},
        {k: v.grounded_chain() for k, v in gt.items()},
        {k: v.order_labels() for k, v in pred.items()},
        {k: v.order_labels() for k, v in gt.items()},
    )
    shared = sorted(set(pred) & set(gt))
    gt_targets = {k: gt[k].target_proposal() for k in shared}
    if shared and all(v is not None for v in gt_targets.values()):
        report["referring_accuracy"] = referring_accuracy(
            {k: pred[k].target_proposal() for k in shared}, gt_targets)
    else:
        report["referring_accuracy"] = None
    _write(ctx.args, json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_decode_demo(ctx: _Context) -> int:
    dec = ctx.config.decoder
    cfg = DecoderConfig.toy(
        mask_mode=dec.mask_mode,
        lambda_v=dec.lambda_v,
        lambda_t=dec.lambda_t,
        lambda_ref=dec.lambda_ref,
        lambda_dist=dec.lambda_dist,
        anchor_loss_enabled=dec.anchor_loss_enabled,
    )
    inst = toy_instance(cfg, ctx.args.seed)
    err = grad_check(cfg, ctx.args.seed)
    doc = {
        "config": {"d": cfg.d, "L": cfg.L, "M": cfg.M, "heads": cfg.heads, "mask_mode": cfg.mask_mode,
                   "anchor_loss_enabled": cfg.anchor_loss_enabled},
        "seed": ctx.args.seed,
        "loss": loss_of(inst).as_dict(),
        "grad_check": {"max_rel_error": err, "step": 1e-5, "tolerance": GRAD_TOLERANCE,
                       "passed": err < GRAD_TOLERANCE},
    }
    _write(ctx.args, json.dumps(doc, indent=2) + "\n")
    return 0 if err < GRAD_TOLERANCE else 1


def _class_spec(text: str) -> dict[str, int]:
    spec = {}
    for part in text.split(","):
        name, _, count = part.partition("=")
        if not name.strip() or not count.strip().isdigit():
            raise argparse.ArgumentTypeError(f"bad class spec item {part!r}; expected name=count")
        spec[name.strip()] = int(count)
    return spec


def _bounds(text: str) -> Aabb3:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 6:
        raise argparse.ArgumentTypeError("bounds need 6 numbers: cx,cy,cz,dx,dy,dz")
    return Aabb3(tuple(vals[:3]), tuple(vals[3:]))


def cmd_gen_scenes(ctx: _Context) -> int:
    args = ctx.args
    scenes = [
        gen_synthetic_scene(utterance_seed(args.seed, f"scene-{i}"), args.spec, args.bounds,
                            ctx.config.max_proposals, scene_id=f"scene{i:04d}")
        for i in range(args.count)
    ]
    _write(args, io.dumps_scenes(scenes))
    return 0


# -- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global seed")
    common.add_argument("--labels", help="label file (default: bundled ScanNet-style list)")
    common.add_argument("--lexicon", help="relation lexicon file (default: bundled)")
    common.add_argument("--config", help="key=value engine config")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--mask-mode", choices=["causal", "none"])
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="chainref", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", parents=[common], help="extract mentions and relations")
    sp.add_argument("--corpus", required=True)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("order", parents=[common], help="logical order per utterance")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--orders", help="externally generated order file")
    sp.set_defaults(func=cmd_order)

    sp = sub.add_parser("ground", parents=[common], help="emit pseudo-label JSONL")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--scenes", required=True)
    sp.add_argument("--orders", help="externally generated order file")
    sp.set_defaults(func=cmd_ground)

    sp = sub.add_parser("augment", parents=[common], help="target/anchor swap augmentation")
    sp.add_argument("--corpus", required=True)
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("eval", parents=[common], help="compare pseudo-labels with ground truth")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("decode-demo", parents=[common], help="toy decoder losses and gradient check")
    sp.set_defaults(func=cmd_decode_demo)

    sp = sub.add_parser("gen-scenes", parents=[common], help="seeded synthetic scenes")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--spec", type=_class_spec, default=_class_spec("chair=2,desk=1"))
    sp.add_argument("--bounds", type=_bounds, default=_bounds("0,0,1.5,8,8,3"))
    sp.set_defaults(func=cmd_gen_scenes)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ctx = _Context(args)
        return args.func(ctx)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
