"""Style-controlled seq2seq from semantic terms to a styled sentence.

The encoder embeds the term sequence plus a trailing style token, batch
normalizes the embeddings, and runs a bidirectional GRU. The decoder is a
GRU with additive attention over the encoder states; its initial state is
a learned map of the final encoder position (the style token). Training
pairs come from a styled text corpus alone, so no image features are ever
read here.
"""

from __future__ import annotations

import numpy as np

from .gru import BiGRU, GRUCell
from .layers import BatchNorm, Dense, Embedding, SoftmaxCrossEntropy, glorot_uniform
from .optim import Adam
from .params import ParameterSet
from .text import BOS, EOS, Vocabulary


class AdditiveAttention:
    """score_i = v . tanh(wq @ query + wk @ key_i + b), softmax over i."""

    def __init__(self, params: ParameterSet, name: str, query_dim: int,
                 key_dim: int, attn_dim: int, rng: np.random.Generator):
        self.wq = params.add(f"{name}.wq", glorot_uniform(rng, query_dim, attn_dim))
        self.wk = params.add(f"{name}.wk", glorot_uniform(rng, key_dim, attn_dim))
        self.b = params.add(f"{name}.b", np.zeros(attn_dim))
        self.v = params.add(f"{name}.v", glorot_uniform(rng, attn_dim, 1)[:, 0])

    def forward(self, query: np.ndarray, keys: np.ndarray):
        """Returns (context (1, key_dim), weights (S,), cache)."""
        query = np.asarray(query, dtype=np.float64)
        keys = np.asarray(keys, dtype=np.float64)
        if keys.ndim != 2 or keys.shape[0] == 0:
            raise ValueError(f"attention needs >= 1 encoder state, got {keys.shape}")
        if query.shape != (1, self.wq.value.shape[0]):
            raise ValueError(
                f"attention query shape {query.shape} != (1, {self.wq.value.shape[0]})")
        if keys.shape[1] != self.wk.value.shape[0]:
            raise ValueError(
                f"attention key dim {keys.shape[1]} != {self.wk.value.shape[0]}")
        pre = np.tanh(query @ self.wq.value + keys @ self.wk.value + self.b.value)
        scores = pre @ self.v.value
        scores -= scores.max()
        ex = np.exp(scores)
        weights = ex / ex.sum()
        context = (weights @ keys)[None, :]
        return context, weights, (query, keys, pre, weights)

    def backward(self, d_context: np.ndarray, cache):
        """Returns (d_query, d_keys); accumulates parameter gradients."""
        query, keys, pre, weights = cache
        d_context = d_context.reshape(-1)
        d_weights = keys @ d_context
        d_keys = np.outer(weights, d_context)
        d_scores = weights * (d_weights - weights @ d_weights)
        d_tanh = np.outer(d_scores, self.v.value)
        self.v.grad += pre.T @ d_scores
        d_pre = d_tanh * (1.0 - pre * pre)
        self.wk.grad += keys.T @ d_pre
        d_pre_sum = d_pre.sum(axis=0, keepdims=True)
        self.wq.grad += query.T @ d_pre_sum
        self.b.grad += d_pre_sum[0]
        d_keys += d_pre @ self.wk.value.T
        d_query = d_pre_sum @ self.wq.value.T
        return d_query, d_keys


class Seq2SeqModel:
    """Bi-GRU encoder with style token plus attention GRU decoder."""

    def __init__(self, enc_vocab: Vocabulary, dec_vocab: Vocabulary,
                 styles: list[str], hidden_size: int, embed_size: int,
                 attn_size: int, seed: int, embed_dropout: float = 0.0):
        missing = [s for s in styles if s not in enc_vocab]
        if missing:
            raise ValueError(f"styles {missing} missing from encoder vocabulary")
        self.enc_vocab = enc_vocab
        self.dec_vocab = dec_vocab
        self.styles = list(styles)
        self.hidden_size = hidden_size
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.params = ParameterSet()
        self.enc_embed = Embedding(self.params, "enc.embed", len(enc_vocab),
                                   embed_size, rng, dropout=embed_dropout)
        self.enc_bn = BatchNorm(self.params, "enc.bn", embed_size)
        self.enc_rnn = BiGRU(self.params, "enc.rnn", embed_size, hidden_size, rng)
        self.bridge = Dense(self.params, "bridge", 2 * hidden_size, hidden_size, rng)
        self.dec_embed = Embedding(self.params, "dec.embed", len(dec_vocab),
                                   embed_size, rng, dropout=embed_dropout)
        self.attn = AdditiveAttention(self.params, "attn", hidden_size,
                                      2 * hidden_size, attn_size, rng)
        self.dec_cell = GRUCell(self.params, "dec.rnn",
                                embed_size + 2 * hidden_size, hidden_size, rng)
        self.out = Dense(self.params, "out", 3 * hidden_size, len(dec_vocab), rng)

    def _check_style(self, style: str) -> None:
        if style not in self.styles:
            raise ValueError(
                f"unknown style {style!r}; valid styles: {self.styles}")

    def encode(self, terms: list[str], style: str, train: bool = False,
               rng: np.random.Generator | None = None):
        """Per-position concatenated bi-GRU states; style token last.

        Returns (states (len(terms)+1, 2*hidden), cache).
        """
        self._check_style(style)
        if not terms:
            raise ValueError("cannot encode an empty term sequence")
        ids = np.array(self.enc_vocab.encode(terms)
                       + [self.enc_vocab.index[style]], dtype=np.int64)
        emb = self.enc_embed.forward(ids, train=train, rng=rng)
        normed = self.enc_bn.forward(emb, train=train)
        states, rnn_cache = self.enc_rnn.forward(normed)
        return states, rnn_cache

    def _encode_backward(self, d_states: np.ndarray, rnn_cache) -> None:
        d_normed = self.enc_rnn.backward(d_states, rnn_cache)
        d_emb = self.enc_bn.backward(d_normed)
        self.enc_embed.backward(d_emb)

    def _decoder_init(self, enc_states: np.ndarray):
        h0 = np.tanh(self.bridge.forward(enc_states[-1:]))
        return h0, h0

    def _decoder_init_backward(self, dh0: np.ndarray, h0: np.ndarray,
                               d_enc: np.ndarray) -> None:
        d_last = self.bridge.backward(dh0 * (1.0 - h0 * h0))
        d_enc[-1] += d_last[0]

    def sample_loss(self, terms: list[str], style: str, sent_ids: list[int],
                    train: bool = False,
                    rng: np.random.Generator | None = None,
                    backward: bool = False) -> tuple[float, int]:
        """Teacher-forced loss of one (terms, style, sentence) triple."""
        enc_states, enc_cache = self.encode(terms, style, train=train, rng=rng)
        h, h0 = self._decoder_init(enc_states)
        inputs = np.array([self.dec_vocab.bos] + sent_ids, dtype=np.int64)
        targets = np.array(sent_ids + [self.dec_vocab.eos], dtype=np.int64)
        emb = self.dec_embed.forward(inputs, train=train, rng=rng)

        steps = len(inputs)
        feats = np.empty((steps, 3 * self.hidden_size))
        gru_caches = []
        att_caches = []
        for t in range(steps):
            ctx, _, att_cache = self.attn.forward(h, enc_states)
            x = np.concatenate([emb[t:t + 1], ctx], axis=1)
            h, gru_cache = self.dec_cell.step(x, h)
            feats[t, :self.hidden_size] = h[0]
            feats[t, self.hidden_size:] = ctx[0]
            gru_caches.append(gru_cache)
            att_caches.append(att_cache)
        logits = self.out.forward(feats)
        ce = SoftmaxCrossEntropy()
        loss = ce.forward(logits, targets)

        if backward:
            d_feats = self.out.backward(ce.backward())
            d_enc = np.zeros_like(enc_states)
            d_emb = np.empty_like(emb)
            dh_next = np.zeros((1, self.hidden_size))
            e = emb.shape[1]
            for t in range(steps - 1, -1, -1):
                dh = d_feats[t:t + 1, :self.hidden_size] + dh_next
                d_ctx = d_feats[t:t + 1, self.hidden_size:]
                dx, dh_prev = self.dec_cell.step_backward(dh, gru_caches[t])
                d_emb[t] = dx[0, :e]
                d_ctx = d_ctx + dx[:, e:]
                d_query, d_keys = self.attn.backward(d_ctx, att_caches[t])
                d_enc += d_keys
                dh_next = dh_prev + d_query
            self.dec_embed.backward(d_emb)
            self._decoder_init_backward(dh_next, h0, d_enc)
            self._encode_backward(d_enc, enc_cache)
        return loss, len(targets)

    def decode(self, terms: list[str], style: str, max_len: int = 30,
               return_attention: bool = False):
        """Greedy styled decoding; stops at EOS or max_len tokens.

        Inference mode throughout (running batch-norm statistics, no
        dropout); BOS and UNK are masked out of the argmax.
        """
        enc_states, _ = self.encode(terms, style)
        h, _ = self._decoder_init(enc_states)
        tok = self.dec_vocab.bos
        out: list[str] = []
        traces: list[np.ndarray] = []
        for _ in range(max_len):
            ctx, weights, _ = self.attn.forward(h, enc_states)
            traces.append(weights)
            x = np.concatenate([self.dec_embed.forward(np.array([tok])), ctx],
                               axis=1)
            h, _ = self.dec_cell.step(x, h)
            logits = self.out.forward(
                np.concatenate([h, ctx], axis=1))[0].copy()
            logits[self.dec_vocab.bos] = -np.inf
            logits[self.dec_vocab.unk] = -np.inf
            tok = int(np.argmax(logits))
            if tok == self.dec_vocab.eos:
                break
            out.append(self.dec_vocab.tokens[tok])
        if return_attention:
            return out, traces
        return out


def check_sentence(tokens: list[str], max_len: int) -> None:
    if len(tokens) > max_len:
        raise ValueError(
            f"sentence of length {len(tokens)} exceeds maximum {max_len}")
    for t in tokens:
        if t in (BOS, EOS):
            raise ValueError(f"reserved token {t} inside a sentence")


def train_epoch(model: Seq2SeqModel,
                data: list[tuple[list[str], str, list[str]]], opt: Adam,
                rng: np.random.Generator, shuffle_terms: bool = True,
                batch_size: int = 64, max_len: int = 30) -> float:
    """One teacher-forced epoch over (terms, style, sentence) triples.

    With shuffle_terms on, each example's terms are uniformly permuted anew
    this epoch (the style token stays last because encode appends it).
    Returns the mean token loss.
    """
    if not data:
        raise ValueError("training data is empty")
    for terms, style, sent in data:
        model._check_style(style)
        if not terms:
            raise ValueError("empty term sequence in training data")
        check_sentence(sent, max_len)
    encoded = [(terms, style, model.dec_vocab.encode(sent))
               for terms, style, sent in data]

    order = rng.permutation(len(encoded))
    total_loss = 0.0
    total_tokens = 0
    for start in range(0, len(order), batch_size):
        batch = order[start:start + batch_size]
        model.params.zero_grads()
        batch_tokens = 0
        for j in batch:
            terms, style, sent_ids = encoded[j]
            if shuffle_terms and len(terms) > 1:
                terms = [terms[i] for i in rng.permutation(len(terms))]
            loss, n_tok = model.sample_loss(terms, style, sent_ids, train=True,
                                            rng=rng, backward=True)
            total_loss += loss
            batch_tokens += n_tok
        model.params.scale_grads(1.0 / batch_tokens)
        opt.step(model.params)
        total_tokens += batch_tokens
    return total_loss / total_tokens
