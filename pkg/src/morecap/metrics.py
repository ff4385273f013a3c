"""Caption relevance metrics, the style classifier, and diversity stats.

All metric functions take pre-tokenized sentences (lists of tokens, see
text.tokenize) and are pure. The CIDEr idf statistics come from the
reference corpus only, so the scorer needs at least two images.

Full-scale reference operating points from the original training run on
COCO, recorded for context only (not reproducible at desk scale):
BLEU1 0.679, BLEU4 0.252, ROUGE_L 0.501, CIDEr 0.844, styled-caption CLF
fraction 0.741, classifier precision/recall 0.992/0.991, and styled
diversity rows (factor -> distinct words, wps mean, wps std):
1/3 -> 656, 8.35, 1.49; 2/3 -> 700, 8.45, 1.59; 1 -> 791, 8.43, 1.53.
"""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

FULL_SCALE_REFERENCE = {
    "bleu1": 0.679, "bleu2": 0.501, "bleu3": 0.356, "bleu4": 0.252,
    "rouge_l": 0.501, "cider": 0.844, "clf_styled": 0.741,
    "clf_precision": 0.992, "clf_recall": 0.991,
    "diversity": {1 / 3: (656, 8.35, 1.49),
                  2 / 3: (700, 8.45, 1.59),
                  1.0: (791, 8.43, 1.53)},
}


def ngram_counts(tokens: list[str], n: int) -> dict[tuple, int]:
    """Counts of all n-grams of one order in a sentence."""
    counts: dict[tuple, int] = defaultdict(int)
    for i in range(len(tokens) - n + 1):
        counts[tuple(tokens[i:i + n])] += 1
    return dict(counts)


def bleu(hyp: list[str], refs: list[list[str]], n: int = 4) -> float:
    """BLEU-n: clipped modified precisions p_1..p_n, geometric mean, times
    the brevity penalty exp(min(0, 1 - r/c)) with the closest-length
    reference r (ties to the shorter reference).

    An empty hypothesis scores 0 by definition. Any zero precision zeroes
    the whole score (no smoothing).
    """
    if n < 1:
        raise ValueError(f"bleu order must be >= 1, got {n}")
    if not refs:
        raise ValueError("bleu needs at least one reference")
    c = len(hyp)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        hyp_counts = ngram_counts(hyp, order)
        max_ref: dict[tuple, int] = defaultdict(int)
        for ref in refs:
            for g, cnt in ngram_counts(ref, order).items():
                if cnt > max_ref[g]:
                    max_ref[g] = cnt
        total = max(0, c - order + 1)
        if total == 0:
            return 0.0
        clipped = sum(min(cnt, max_ref[g]) for g, cnt in hyp_counts.items())
        if clipped == 0:
            return 0.0
        log_sum += np.log(clipped / total) / n
    r = min((abs(len(ref) - c), len(ref)) for ref in refs)[1]
    bp = np.exp(min(0.0, 1.0 - r / c))
    return float(bp * np.exp(log_sum))


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Classic O(len(a) * len(b)) table, one rolling row.
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hyp: list[str], refs: list[list[str]], beta: float = 1.2) -> float:
    """Longest-common-subsequence F-measure, maximum over references."""
    if not refs:
        raise ValueError("rouge_l needs at least one reference")
    if not hyp:
        return 0.0
    best = 0.0
    b2 = beta * beta
    for ref in refs:
        if not ref:
            continue
        lcs = _lcs_length(hyp, ref)
        if lcs == 0:
            continue
        p = lcs / len(hyp)
        r = lcs / len(ref)
        best = max(best, (1 + b2) * p * r / (r + b2 * p))
    return best


@dataclass
class CorpusStats:
    """Per-order document frequencies over the reference corpus."""

    doc_freq: list[dict[tuple, int]]
    corpus_size: int

    @classmethod
    def build(cls, refs_per_image: list[list[list[str]]],
              max_order: int = 4) -> "CorpusStats":
        doc_freq = [defaultdict(int) for _ in range(max_order)]
        for refs in refs_per_image:
            for order in range(1, max_order + 1):
                seen = set()
                for ref in refs:
                    seen.update(ngram_counts(ref, order))
                for g in seen:
                    doc_freq[order - 1][g] += 1
        return cls([dict(d) for d in doc_freq], len(refs_per_image))


def _tfidf_vector(tokens: list[str], order: int, stats: CorpusStats):
    counts = ngram_counts(tokens, order)
    total = sum(counts.values())
    if total == 0:
        return {}
    df = stats.doc_freq[order - 1]
    log_n = np.log(stats.corpus_size)
    return {g: (cnt / total) * (log_n - np.log(max(1.0, df.get(g, 0))))
            for g, cnt in counts.items()}


def _cosine(a: dict, b: dict) -> float:
    na = np.sqrt(sum(v * v for v in a.values()))
    nb = np.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    dot = sum(v * b[g] for g, v in a.items() if g in b)
    return dot / (na * nb)


def cider(hyps: list[list[str]], refs_per_image: list[list[list[str]]],
          max_order: int = 4) -> tuple[list[float], float]:
    """Consensus score: tf-idf n-gram cosine against each reference,
    averaged over references and orders, scaled by 10.

    Returns (per-image scores, mean). Needs >= 2 images so the idf weights
    are meaningful.
    """
    if len(hyps) != len(refs_per_image):
        raise ValueError(
            f"{len(hyps)} hypotheses vs {len(refs_per_image)} reference sets")
    if len(refs_per_image) < 2:
        raise ValueError("cider needs a corpus of >= 2 images (idf degenerate)")
    stats = CorpusStats.build(refs_per_image, max_order)
    scores = []
    for hyp, refs in zip(hyps, refs_per_image):
        per_order = np.zeros(max_order)
        for order in range(1, max_order + 1):
            g_hyp = _tfidf_vector(hyp, order, stats)
            sims = [_cosine(g_hyp, _tfidf_vector(ref, order, stats))
                    for ref in refs]
            per_order[order - 1] = float(np.mean(sims))
        scores.append(float(10.0 * per_order.mean()))
    return scores, float(np.mean(scores))


def _greedy_chunks(hyp: list[str], ref: list[str]) -> tuple[int, int]:
    """Exact-match alignment by repeatedly taking the longest common
    contiguous block of still-unaligned tokens. Returns (matches, chunks)."""
    hyp_used = [False] * len(hyp)
    ref_used = [False] * len(ref)
    matches = 0
    chunks = 0
    while True:
        best_len, best = 0, None
        for i in range(len(hyp)):
            if hyp_used[i]:
                continue
            for j in range(len(ref)):
                if ref_used[j] or hyp[i] != ref[j]:
                    continue
                length = 0
                while (i + length < len(hyp) and j + length < len(ref)
                       and not hyp_used[i + length] and not ref_used[j + length]
                       and hyp[i + length] == ref[j + length]):
                    length += 1
                if length > best_len:
                    best_len, best = length, (i, j)
        if best is None:
            break
        i, j = best
        for k in range(best_len):
            hyp_used[i + k] = True
            ref_used[j + k] = True
        matches += best_len
        chunks += 1
    return matches, chunks


def meteor_exact(hyp: list[str], refs: list[list[str]]) -> float:
    """Exact-match unigram variant of the harmonic-mean alignment metric.

    F_mean = 10PR / (R + 9P) with a fragmentation penalty
    0.5 * (chunks / matches)^3; maximum over references. No stemming or
    synonym resources, so scores are not comparable with the full metric.
    """
    if not refs:
        raise ValueError("meteor_exact needs at least one reference")
    if not hyp:
        return 0.0
    best = 0.0
    for ref in refs:
        if not ref:
            continue
        matches, chunks = _greedy_chunks(hyp, ref)
        if matches == 0:
            continue
        p = matches / len(hyp)
        r = matches / len(ref)
        f_mean = 10.0 * p * r / (r + 9.0 * p)
        penalty = 0.5 * (chunks / matches) ** 3
        best = max(best, f_mean * (1.0 - penalty))
    return best


# ---------------------------------------------------------------------------
# Style classifier: logistic regression on 1,2-gram occurrence features.


def _clf_features(tokens: list[str]) -> set[tuple]:
    feats = {(t,) for t in tokens}
    feats.update(zip(tokens, tokens[1:]))
    return feats


@dataclass
class ClfModel:
    """Binary style classifier; predicts P(styled) from n-gram occurrence."""

    feature_index: dict[tuple, int]
    weights: np.ndarray
    bias: float
    threshold: float = 0.5

    def predict_proba(self, tokens: list[str]) -> float:
        z = self.bias
        for f in _clf_features(tokens):
            j = self.feature_index.get(f)
            if j is not None:
                z += self.weights[j]
        return float(1.0 / (1.0 + np.exp(-z)))

    def predict(self, tokens: list[str]) -> bool:
        return self.predict_proba(tokens) > self.threshold

    def to_dict(self) -> dict:
        return {
            "features": ["".join(f) for f in self.feature_index],
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClfModel":
        feats = [tuple(f.split("")) for f in d["features"]]
        return cls(feature_index={f: i for i, f in enumerate(feats)},
                   weights=np.asarray(d["weights"], dtype=np.float64),
                   bias=float(d["bias"]), threshold=float(d["threshold"]))


def _fit_logistic(x_feats: list[set[tuple]], y: np.ndarray,
                  feature_index: dict[tuple, int], iters: int = 300,
                  lr: float = 0.5, l2: float = 1e-4):
    n, d = len(x_feats), len(feature_index)
    rows, cols = [], []
    for i, feats in enumerate(x_feats):
        for f in feats:
            j = feature_index.get(f)
            if j is not None:
                rows.append(i)
                cols.append(j)
    x = np.zeros((n, d))
    x[rows, cols] = 1.0
    w = np.zeros(d)
    b = 0.0
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(x @ w + b)))
        err = p - y
        w -= lr * (x.T @ err / n + l2 * w)
        # bias is regularized too: a sentence with no known features then
        # scores exactly 0.5 and the strict threshold rejects it
        b -= lr * (float(err.mean()) + l2 * b)
    return w, b


def train_clf(styled: list[list[str]], descriptive: list[list[str]],
              folds: int = 5, seed: int = 0
              ) -> tuple[ClfModel, float, float]:
    """Fit the style classifier and report cross-validated precision/recall.

    Styled sentences are the positive class. Folds are reduced with a
    warning when a class has fewer examples than requested folds. The
    returned model is refit on all data.
    """
    if not styled or not descriptive:
        raise ValueError("both classes must be non-empty")
    min_class = min(len(styled), len(descriptive))
    if min_class < folds:
        warnings.warn(f"reducing CV folds from {folds} to {min_class}: "
                      f"smallest class has {min_class} examples")
        folds = max(2, min_class)

    feats = [_clf_features(s) for s in styled + descriptive]
    y = np.array([1.0] * len(styled) + [0.0] * len(descriptive))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    fold_of = np.empty(len(y), dtype=int)
    fold_of[order] = np.arange(len(y)) % folds

    tp = fp = fn = 0
    for k in range(folds):
        train_idx = np.flatnonzero(fold_of != k)
        test_idx = np.flatnonzero(fold_of == k)
        vocab_feats = sorted({f for i in train_idx for f in feats[i]})
        fi = {f: j for j, f in enumerate(vocab_feats)}
        w, b = _fit_logistic([feats[i] for i in train_idx], y[train_idx], fi)
        model = ClfModel(fi, w, b)
        for i in test_idx:
            pred = _predict_from_feats(model, feats[i])
            if pred and y[i] == 1.0:
                tp += 1
            elif pred and y[i] == 0.0:
                fp += 1
            elif not pred and y[i] == 1.0:
                fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0

    vocab_feats = sorted({f for fs in feats for f in fs})
    fi = {f: j for j, f in enumerate(vocab_feats)}
    w, b = _fit_logistic(feats, y, fi)
    return ClfModel(fi, w, b), precision, recall


def _predict_from_feats(model: ClfModel, feats: set[tuple]) -> bool:
    z = model.bias
    for f in feats:
        j = model.feature_index.get(f)
        if j is not None:
            z += model.weights[j]
    return 1.0 / (1.0 + np.exp(-z)) > model.threshold


def clf_fraction(model: ClfModel, captions: list[list[str]]) -> float:
    """Share of captions the classifier labels as styled."""
    if not captions:
        raise ValueError("cannot score an empty caption list")
    return sum(model.predict(c) for c in captions) / len(captions)


# ---------------------------------------------------------------------------
# Diversity statistics per expert.


@dataclass
class ExpertDiversity:
    expert: int
    distinct_words: int
    wps_mean: float
    wps_std: float
    vocabulary: set[str] = field(repr=False)


@dataclass
class DiversityReport:
    rows: list[ExpertDiversity]

    def vocabulary_overlap(self) -> dict[tuple[int, int], int]:
        """Pairwise shared-word counts between experts."""
        out = {}
        for a in self.rows:
            for b in self.rows:
                if a.expert < b.expert:
                    out[(a.expert, b.expert)] = len(a.vocabulary & b.vocabulary)
        return out


def diversity_report(captions_per_expert: dict[int, list[list[str]]]
                     ) -> DiversityReport:
    """Distinct-word totals and words-per-sentence stats per expert."""
    rows = []
    for expert in sorted(captions_per_expert):
        captions = captions_per_expert[expert]
        if not captions:
            raise ValueError(f"expert {expert} has no captions")
        vocab = set()
        lengths = []
        for cap in captions:
            vocab.update(cap)
            lengths.append(len(cap))
        lengths = np.array(lengths, dtype=np.float64)
        rows.append(ExpertDiversity(expert=expert, distinct_words=len(vocab),
                                    wps_mean=float(lengths.mean()),
                                    wps_std=float(lengths.std()),
                                    vocabulary=vocab))
    return DiversityReport(rows)
