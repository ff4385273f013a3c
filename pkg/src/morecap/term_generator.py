"""Mixture of recurrent experts mapping image features to semantic terms.

Every expert is an independent image-conditioned GRU decoder over the term
vocabulary: the feature vector is projected to the initial hidden state and
the cell is trained by teacher forcing. Experts share nothing but their
shapes; what tells them apart is the diversity factor driving the truncated
SVD replacement of their recurrent weights at the end of each epoch.
"""

from __future__ import annotations

import numpy as np

from .gru import GRUCell
from .layers import Dense, Embedding, SoftmaxCrossEntropy, dropout
from .optim import Adam
from .params import ParameterSet
from .svd_filter import ExpertSpec, apply_filter
from .text import BOS, EOS, Vocabulary


class TermExpert:
    """One GRU decoder expert with its own parameters and filter spec."""

    def __init__(self, spec: ExpertSpec, vocab: Vocabulary, feature_dim: int,
                 hidden_size: int, embed_size: int, rng: np.random.Generator,
                 embed_dropout: float = 0.0, feature_dropout: float = 0.0):
        self.spec = spec
        self.vocab = vocab
        self.feature_dim = feature_dim
        self.params = ParameterSet()
        self.proj = Dense(self.params, "proj", feature_dim, hidden_size, rng)
        self.embed = Embedding(self.params, "embed", len(vocab), embed_size,
                               rng, dropout=embed_dropout)
        self.cell = GRUCell(self.params, "gru", embed_size, hidden_size, rng)
        self.out = Dense(self.params, "out", hidden_size, len(vocab), rng)
        self.feature_dropout = feature_dropout
        spec.target_names = self.cell.weight_names("gru")

    def init_state(self, feature: np.ndarray, train: bool = False,
                   rng: np.random.Generator | None = None):
        """h0 = tanh(dense(feature)); returns (h0, cache)."""
        f = np.asarray(feature, dtype=np.float64).reshape(1, -1)
        if f.shape[1] != self.feature_dim:
            raise ValueError(
                f"feature length {f.shape[1]} != configured {self.feature_dim}")
        if train and self.feature_dropout > 0.0:
            f, _ = dropout(f, self.feature_dropout, rng)
        h0 = np.tanh(self.proj.forward(f))
        return h0, h0

    def _init_state_backward(self, dh0: np.ndarray, h0: np.ndarray) -> None:
        self.proj.backward(dh0 * (1.0 - h0 * h0))

    def sample_loss(self, feature: np.ndarray, term_ids: list[int],
                    train: bool = False,
                    rng: np.random.Generator | None = None,
                    backward: bool = False) -> tuple[float, int]:
        """Teacher-forced loss of one (feature, terms) pair.

        Input is BOS + terms, target is terms + EOS. Returns the summed
        token loss and the token count; with backward=True the gradients
        are accumulated into the expert's parameters.
        """
        inputs = np.array([self.vocab.bos] + term_ids, dtype=np.int64)
        targets = np.array(term_ids + [self.vocab.eos], dtype=np.int64)
        h0, h0_cache = self.init_state(feature, train=train, rng=rng)
        xs = self.embed.forward(inputs, train=train, rng=rng)
        states, caches = self.cell.forward_sequence(xs, h0)
        logits = self.out.forward(states)
        ce = SoftmaxCrossEntropy()
        loss = ce.forward(logits, targets)
        if backward:
            d_states = self.out.backward(ce.backward())
            d_xs, dh0 = self.cell.backward_sequence(d_states, caches)
            self.embed.backward(d_xs)
            self._init_state_backward(dh0, h0_cache)
        return loss, len(targets)

    def generate(self, feature: np.ndarray, max_len: int) -> list[str]:
        """Greedy argmax decoding from BOS until EOS or max_len tokens.

        BOS and UNK logits are masked so the output never contains padding
        artifacts; ties resolve to the lowest index.
        """
        h, _ = self.init_state(feature)
        tok = self.vocab.bos
        out: list[str] = []
        for _ in range(max_len):
            x = self.embed.forward(np.array([tok]))
            h, _ = self.cell.step(x, h)
            logits = self.out.forward(h)[0].copy()
            logits[self.vocab.bos] = -np.inf
            logits[self.vocab.unk] = -np.inf
            tok = int(np.argmax(logits))
            if tok == self.vocab.eos:
                break
            out.append(self.vocab.tokens[tok])
        return out


class MoREModel:
    """R parallel term-generator experts over one shared vocabulary."""

    def __init__(self, vocab: Vocabulary, expert_count: int, feature_dim: int,
                 hidden_size: int, embed_size: int, seed: int,
                 embed_dropout: float = 0.0, feature_dropout: float = 0.0):
        if expert_count < 1:
            raise ValueError(f"expert count must be >= 1, got {expert_count}")
        self.vocab = vocab
        self.feature_dim = feature_dim
        streams = np.random.SeedSequence(seed).spawn(expert_count)
        self.experts = [
            TermExpert(ExpertSpec(i + 1, expert_count), vocab, feature_dim,
                       hidden_size, embed_size, np.random.default_rng(streams[i]),
                       embed_dropout=embed_dropout,
                       feature_dropout=feature_dropout)
            for i in range(expert_count)
        ]

    @property
    def expert_count(self) -> int:
        return len(self.experts)

    def expert(self, index: int) -> TermExpert:
        if not 1 <= index <= len(self.experts):
            raise ValueError(
                f"expert index {index} outside [1, {len(self.experts)}]")
        return self.experts[index - 1]


def check_term_sequence(terms: list[str], max_len: int) -> None:
    """Ingestion validation: length bound and no reserved tokens inside."""
    if len(terms) > max_len:
        raise ValueError(
            f"term sequence of length {len(terms)} exceeds maximum {max_len}")
    for t in terms:
        if t in (BOS, EOS):
            raise ValueError(f"reserved token {t} inside a term sequence")


def train_epoch(model: MoREModel, data: list[tuple[np.ndarray, list[str]]],
                opts: list[Adam], rng: np.random.Generator, batch_size: int = 64,
                max_len: int = 20, run_filter: bool = True) -> list[float]:
    """One epoch of independent teacher-forced training for every expert.

    data holds (feature, term tokens) pairs; sequences longer than max_len
    are rejected up front. After the last batch of each expert the SVD
    filter rewrites that expert's recurrent weights with its own diversity
    factor. Returns the mean token loss per expert.
    """
    if not data:
        raise ValueError("training data is empty")
    if len(opts) != model.expert_count:
        raise ValueError(f"need one optimizer per expert "
                         f"({model.expert_count}), got {len(opts)}")
    for _, terms in data:
        check_term_sequence(terms, max_len)
    encoded = [(f, model.vocab.encode(t)) for f, t in data]

    losses = []
    for expert, opt in zip(model.experts, opts):
        order = rng.permutation(len(encoded))
        total_loss = 0.0
        total_tokens = 0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            expert.params.zero_grads()
            batch_tokens = 0
            for j in batch:
                f, ids = encoded[j]
                loss, n_tok = expert.sample_loss(f, ids, train=True, rng=rng,
                                                 backward=True)
                total_loss += loss
                batch_tokens += n_tok
            expert.params.scale_grads(1.0 / batch_tokens)
            opt.step(expert.params)
            total_tokens += batch_tokens
        if run_filter:
            apply_filter(expert.params, expert.spec)
        losses.append(total_loss / total_tokens)
    return losses


def mean_token_loss(model: MoREModel, data: list[tuple[np.ndarray, list[str]]],
                    expert_index: int = 1) -> float:
    """Teacher-forced evaluation loss without gradient updates."""
    expert = model.expert(expert_index)
    total = 0.0
    tokens = 0
    for f, terms in data:
        loss, n = expert.sample_loss(f, model.vocab.encode(terms))
        total += loss
        tokens += n
    return total / tokens


def generate_terms(model: MoREModel, feature: np.ndarray, expert_index: int,
                   max_len: int = 20) -> list[str]:
    """Greedy term sequence from one expert."""
    return model.expert(expert_index).generate(feature, max_len)


def generate_all(model: MoREModel, feature: np.ndarray,
                 max_len: int = 20) -> list[list[str]]:
    """Term sequences from every expert, ordered by expert index."""
    return [generate_terms(model, feature, i + 1, max_len)
            for i in range(model.expert_count)]
