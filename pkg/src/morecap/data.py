"""Dataset records, style corpora, and pretrained embedding files."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .text import Vocabulary

log = logging.getLogger(__name__)


@dataclass
class DatasetRecord:
    """One image worth of data: feature vector, reference captions,
    optional precomputed terms, and the record's native style."""

    id: str
    features: np.ndarray
    captions: list[str]
    terms: list[str] | None = None
    style: str = "DESCRIPTIVE"


def load_dataset(path, feature_dim: int) -> list[DatasetRecord]:
    """Read a JSON-lines dataset file, validating every record.

    Any malformed line is reported with its line number and the whole file
    is rejected if one or more lines fail. An empty file yields an empty
    list with a warning.
    """
    records = []
    errors = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(_parse_record(line, feature_dim))
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                errors.append(f"line {lineno}: {exc}")
    if errors:
        raise ValueError(
            f"{path}: {len(errors)} malformed record(s):\n  " + "\n  ".join(errors))
    if not records:
        log.warning("%s: dataset file is empty", path)
    return records


def _parse_record(line: str, feature_dim: int) -> DatasetRecord:
    obj = json.loads(line)
    features = np.asarray(obj["features"], dtype=np.float64)
    if features.shape != (feature_dim,):
        raise ValueError(
            f"record {obj.get('id', '?')!r} has {features.shape[0] if features.ndim == 1 else '?'} "
            f"features, config expects {feature_dim}")
    if not np.all(np.isfinite(features)):
        raise ValueError(f"record {obj.get('id', '?')!r} has non-finite features")
    captions = obj.get("captions") or []
    if not captions:
        raise ValueError(f"record {obj.get('id', '?')!r} has no captions")
    return DatasetRecord(
        id=str(obj["id"]),
        features=features,
        captions=[str(c) for c in captions],
        terms=[str(t) for t in obj["terms"]] if obj.get("terms") else None,
        style=str(obj.get("style", "DESCRIPTIVE")),
    )


def write_dataset(path, records: list[DatasetRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "id": rec.id,
                "features": [float(x) for x in rec.features],
                "captions": rec.captions,
                "terms": rec.terms,
                "style": rec.style,
            }) + "\n")


def load_style_corpus(path) -> list[str]:
    """Plain text, one sentence per line; blank lines skipped."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_embeddings(path, vocab: Vocabulary,
                    rng: np.random.Generator) -> tuple[np.ndarray, float, np.ndarray]:
    """Read a text embedding file (token then d floats per line).

    Returns (table, coverage, matched) where table has one row per vocab
    entry: file values for matched tokens, small random init elsewhere.
    Lines with inconsistent dimensionality reject the file.
    """
    file_vecs: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(
                    f"{path} line {lineno}: {len(vec)} dims, expected {dim}")
            file_vecs[parts[0]] = vec
    if dim is None:
        raise ValueError(f"{path}: no embedding vectors found")
    a = np.sqrt(6.0 / (len(vocab) + dim))
    table = rng.uniform(-a, a, size=(len(vocab), dim))
    matched = np.zeros(len(vocab), dtype=bool)
    for i, tok in enumerate(vocab.tokens):
        vec = file_vecs.get(tok)
        if vec is not None:
            table[i] = vec
            matched[i] = True
    coverage = float(matched.mean())
    log.info("embedding coverage: %.3f (%d / %d tokens)", coverage,
             int(matched.sum()), len(vocab))
    return table, coverage, matched
