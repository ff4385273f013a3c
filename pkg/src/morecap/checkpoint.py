"""Bit-exact binary checkpoints.

Layout: magic b"MORE1", one version byte, a u32-length-prefixed UTF-8 JSON
header (kind, config snapshot, rng state, vocabularies, misc metadata),
then a u32 tensor count followed by per-tensor records: u16 name length,
name, u8 flags (bit 0 = trainable), u8 ndim, u32 dims, raw little-endian
float64 data. Round-tripping reproduces every tensor bit for bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .config import Config, config_from_dict
from .optim import Adam
from .sentence_generator import Seq2SeqModel
from .term_generator import MoREModel
from .text import Vocabulary

MAGIC = b"MORE1"
VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    tensors: dict[str, np.ndarray]
    trainable: dict[str, bool]
    config: Config
    rng_state: dict | None
    meta: dict


def save_checkpoint(path, kind: str, tensors: dict[str, np.ndarray],
                    trainable: dict[str, bool], config: Config,
                    rng_state: dict | None, meta: dict) -> None:
    header = json.dumps({
        "kind": kind,
        "config": config.to_dict(),
        "rng_state": rng_state,
        "meta": meta,
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            nm = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nm)))
            fh.write(nm)
            flags = 1 if trainable.get(name, True) else 0
            fh.write(struct.pack("<BB", flags, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<B", blob, off)
    off += 1
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    header = json.loads(blob[off:off + hlen].decode("utf-8"))
    off += hlen
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    trainable: dict[str, bool] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        flags, ndim = struct.unpack_from("<BB", blob, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off)
        off += 8 * size
        tensors[name] = arr.reshape(shape).astype(np.float64)
        trainable[name] = bool(flags & 1)
    return Checkpoint(kind=header["kind"], tensors=tensors, trainable=trainable,
                      config=config_from_dict(header["config"]),
                      rng_state=header.get("rng_state"),
                      meta=header.get("meta", {}))


# ---------------------------------------------------------------------------
# Model snapshot glue.


def term_model_tensors(model: MoREModel, opts: list[Adam] | None
                       ) -> tuple[dict[str, np.ndarray], dict[str, bool]]:
    tensors: dict[str, np.ndarray] = {}
    trainable: dict[str, bool] = {}
    for i, expert in enumerate(model.experts, start=1):
        for name, p in expert.params.items():
            tensors[f"expert{i}.{name}"] = p.value
            trainable[f"expert{i}.{name}"] = p.trainable
        if opts is not None:
            for key, arr in opts[i - 1].state_tensors().items():
                tensors[f"expert{i}.{key}"] = arr
    return tensors, trainable


def save_term_model(path, model: MoREModel, opts: list[Adam] | None,
                    config: Config, rng_state: dict | None, epoch: int) -> None:
    tensors, trainable = term_model_tensors(model, opts)
    meta = {
        "vocab": model.vocab.tokens,
        "epoch": epoch,
        "adam_t": [o.t for o in opts] if opts is not None else None,
    }
    save_checkpoint(path, "term", tensors, trainable, config, rng_state, meta)


def load_term_model(path) -> tuple[MoREModel, list[Adam], Config, Checkpoint]:
    ck = load_checkpoint(path)
    if ck.kind != "term":
        raise ValueError(f"{path}: expected a term-generator checkpoint, "
                         f"got kind {ck.kind!r}")
    cfg = ck.config
    vocab = Vocabulary(ck.meta["vocab"])
    model = MoREModel(vocab, cfg.expert_count, cfg.feature_dim,
                      cfg.hidden_size, cfg.embed_size, cfg.seed,
                      embed_dropout=cfg.embed_dropout,
                      feature_dropout=cfg.feature_dropout)
    opts = [Adam(lr=cfg.learning_rate, clip_bound=cfg.clip_bound,
                 weight_decay=cfg.weight_decay)
            for _ in range(cfg.expert_count)]
    adam_t = ck.meta.get("adam_t") or [0] * cfg.expert_count
    for i, expert in enumerate(model.experts, start=1):
        prefix = f"expert{i}."
        for name, p in expert.params.items():
            key = prefix + name
            p.value[...] = ck.tensors[key]
            p.trainable = ck.trainable.get(key, True)
        moments = {k[len(prefix):]: v for k, v in ck.tensors.items()
                   if k.startswith(prefix + "adam.")}
        opts[i - 1].load_state_tensors(moments, adam_t[i - 1])
    return model, opts, cfg, ck


def save_sent_model(path, model: Seq2SeqModel, opt: Adam | None,
                    config: Config, rng_state: dict | None, epoch: int) -> None:
    tensors = {name: p.value for name, p in model.params.items()}
    trainable = {name: p.trainable for name, p in model.params.items()}
    if opt is not None:
        tensors.update(opt.state_tensors())
    meta = {
        "enc_vocab": model.enc_vocab.tokens,
        "dec_vocab": model.dec_vocab.tokens,
        "styles": model.styles,
        "epoch": epoch,
        "adam_t": opt.t if opt is not None else None,
    }
    save_checkpoint(path, "sent", tensors, trainable, config, rng_state, meta)


def load_sent_model(path) -> tuple[Seq2SeqModel, Adam, Config, Checkpoint]:
    ck = load_checkpoint(path)
    if ck.kind != "sent":
        raise ValueError(f"{path}: expected a sentence-generator checkpoint, "
                         f"got kind {ck.kind!r}")
    cfg = ck.config
    model = Seq2SeqModel(Vocabulary(ck.meta["enc_vocab"]),
                         Vocabulary(ck.meta["dec_vocab"]),
                         list(ck.meta["styles"]), cfg.hidden_size,
                         cfg.embed_size, cfg.attn_size, cfg.seed,
                         embed_dropout=cfg.embed_dropout)
    opt = Adam(lr=cfg.learning_rate, clip_bound=cfg.clip_bound)
    for name, p in model.params.items():
        p.value[...] = ck.tensors[name]
        p.trainable = ck.trainable.get(name, True)
    moments = {k: v for k, v in ck.tensors.items() if k.startswith("adam.")}
    opt.load_state_tensors(moments, ck.meta.get("adam_t") or 0)
    return model, opt, cfg, ck
