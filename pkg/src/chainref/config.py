"""Flat ``key = value`` engine configuration.

Recognised keys mirror the decoder and localizer constants::

    d, L, M, heads, mask_mode, lambda_v, lambda_t, lambda_ref, lambda_dist,
    anchor_loss_enabled, on_gap, yaw, match_threshold, token_cap

``L`` doubles as the scene proposal limit and ``M`` as the parser's
mention limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .decoder import DecoderConfig
from .localizer import GeometryConfig
from .matching import DEFAULT_THRESHOLD
from .parser import DEFAULT_TOKEN_CAP


@dataclass(frozen=True)
class EngineConfig:
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    match_threshold: float = DEFAULT_THRESHOLD
    token_cap: int = DEFAULT_TOKEN_CAP

    @property
    def max_mentions(self) -> int:
        return self.decoder.M

    @property
    def max_proposals(self) -> int:
        return self.decoder.L

    def parser_options(self) -> dict:
        return {"max_mentions": self.max_mentions, "token_cap": self.token_cap,
                "threshold": self.match_threshold}

    def to_text(self) -> str:
        lines = [f"{f.name} = {_fmt(getattr(self.decoder, f.name))}" for f in fields(DecoderConfig)]
        lines += [f"{f.name} = {_fmt(getattr(self.geometry, f.name))}" for f in fields(GeometryConfig)]
        lines += [f"match_threshold = {_fmt(self.match_threshold)}", f"token_cap = {self.token_cap}"]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(raw: str, like, key: str):
    if isinstance(like, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def parse_config(text: str, base: EngineConfig | None = None) -> EngineConfig:
    cfg = base or EngineConfig()
    dec = {f.name: getattr(cfg.decoder, f.name) for f in fields(DecoderConfig)}
    geo = {f.name: getattr(cfg.geometry, f.name) for f in fields(GeometryConfig)}
    top = {"match_threshold": cfg.match_threshold, "token_cap": cfg.token_cap}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ValueError(f"config line {lineno}: expected key = value")
        for table in (dec, geo, top):
            if key in table:
                try:
                    table[key] = _coerce(value, table[key], key)
                except ValueError as exc:
                    raise ValueError(f"config line {lineno}: {exc}") from None
                break
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
    return replace(cfg, decoder=DecoderConfig(**dec), geometry=GeometryConfig(**geo), **top)


def load_config(path: str | Path | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))
