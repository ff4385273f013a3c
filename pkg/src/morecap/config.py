"""Run configuration: flat key=value files with CLI overrides.

Defaults follow the published full-scale training recipe (512-d GRUs and
embeddings, 10000/20000 vocabularies, Adam at 1e-3 with [-5, 5] clipping,
batch 64, weight decay 1e-6, three experts). Desk-scale runs override them
from a config file or --set flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class Config:
    feature_dim: int = 2048
    hidden_size: int = 512
    embed_size: int = 512
    attn_size: int = 256
    term_vocab_size: int = 10000
    sent_vocab_size: int = 20000
    expert_count: int = 3
    learning_rate: float = 1e-3
    clip_bound: float = 5.0
    batch_size: int = 64
    weight_decay: float = 1e-6  # term generator only
    embed_dropout: float = 0.1
    feature_dropout: float = 0.1
    epochs: int = 30
    seed: int = 0
    max_term_len: int = 20
    max_sent_len: int = 30
    styles: tuple[str, ...] = ("DESCRIPTIVE", "STORY")
    filter_enabled: bool = True
    reset_moments_after_filter: bool = False
    shuffle_terms: bool = True
    freeze_embeddings: bool = False

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _parse_value(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ValueError(f"unknown config key {name!r}")
    t = _FIELD_TYPES[name]
    raw = raw.strip()
    if t == "int":
        return int(raw)
    if t == "float":
        return float(raw)
    if t == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {name!r} expects a boolean, got {raw!r}")
    if t.startswith("tuple"):
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    return raw


def parse_config_text(text: str, base: Config | None = None) -> Config:
    cfg = base or Config()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not key=value: {line!r}")
        key, _, raw = line.partition("=")
        setattr(cfg, key.strip(), _parse_value(key.strip(), raw))
    return cfg


def load_config(path, base: Config | None = None) -> Config:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def apply_overrides(cfg: Config, pairs: list[str]) -> Config:
    """Apply key=value strings (e.g. from repeated --set flags)."""
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override is not key=value: {pair!r}")
        key, _, raw = pair.partition("=")
        setattr(cfg, key.strip(), _parse_value(key.strip(), raw))
    return cfg


def config_from_dict(d: dict) -> Config:
    cfg = Config()
    for key, v in d.items():
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, tuple(v) if isinstance(v, list) else v)
    return cfg
