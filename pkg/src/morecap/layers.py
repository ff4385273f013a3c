"""Neural layers with exact manual backward passes.

All forward methods take 2-D float64 arrays whose rows are independent
entries (batch rows, or the positions of one sequence) and cache whatever
the matching backward pass needs. backward(dout) accumulates into the
parameter .grad buffers and returns the gradient w.r.t. the layer input.
"""

from __future__ import annotations

import numpy as np

from .params import Parameter, ParameterSet


def glorot_uniform(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    """uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-a, a, size=(n_in, n_out))


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to stay finite for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Dense:
    """y = x @ w + b"""

    def __init__(self, params: ParameterSet, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator):
        self.w = params.add(f"{name}.w", glorot_uniform(rng, n_in, n_out))
        self.b = params.add(f"{name}.b", np.zeros(n_out))
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.w.value.shape[0]:
            raise ValueError(
                f"dense input shape {x.shape} incompatible with weight "
                f"{self.w.value.shape}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.w.grad += self._x.T @ dout
        self.b.grad += dout.sum(axis=0)
        return dout @ self.w.value.T


def embedding_dropout(table: np.ndarray, p: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Word-level dropout on an embedding table.

    Zeroes entire rows with probability p and rescales survivors by
    1/(1-p), so the expected table equals the original. Returns the masked
    table and the per-row keep mask (already rescaled).
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return table, np.ones(table.shape[0])
    keep = (rng.random(table.shape[0]) >= p).astype(np.float64) / (1.0 - p)
    return table * keep[:, None], keep


class Embedding:
    """Index lookup into a trainable table, with optional word-level dropout."""

    def __init__(self, params: ParameterSet, name: str, vocab_size: int,
                 dim: int, rng: np.random.Generator, dropout: float = 0.0):
        self.table = params.add(f"{name}.table",
                                glorot_uniform(rng, vocab_size, dim))
        self.dropout = dropout
        self._idx = None
        self._row_scale = None

    @property
    def vocab_size(self) -> int:
        return self.table.value.shape[0]

    def forward(self, idx, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.ndim != 1:
            raise ValueError(f"embedding indices must be 1-D, got shape {idx.shape}")
        bad = (idx < 0) | (idx >= self.vocab_size)
        if bad.any():
            raise ValueError(
                f"embedding index {int(idx[bad][0])} out of range "
                f"[0, {self.vocab_size})")
        if train and self.dropout > 0.0:
            if rng is None:
                raise ValueError("training-mode embedding dropout needs an rng")
            table, scale = embedding_dropout(self.table.value, self.dropout, rng)
        else:
            table, scale = self.table.value, None
        self._idx = idx
        self._row_scale = scale
        return table[idx]

    def backward(self, dout: np.ndarray) -> None:
        if self._row_scale is not None:
            dout = dout * self._row_scale[self._idx][:, None]
        np.add.at(self.table.grad, self._idx, dout)


def dropout(x: np.ndarray, p: float,
            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Plain inverted dropout; returns (output, mask) with mask pre-scaled."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return x, np.ones_like(x)
    mask = (rng.random(x.shape) >= p).astype(np.float64) / (1.0 - p)
    return x * mask, mask


class BatchNorm:
    """Per-dimension batch normalization with running inference statistics.

    Training mode normalizes each column of the batch to mean 0, variance 1
    (biased variance, epsilon floor) before the learned scale and shift, and
    folds the batch statistics into the running estimates. Inference mode
    uses the running estimates only. Running stats are registered as frozen
    parameters so checkpoints carry them.
    """

    def __init__(self, params: ParameterSet, name: str, dim: int,
                 momentum: float = 0.9, eps: float = 1e-5):
        self.gamma = params.add(f"{name}.gamma", np.ones(dim))
        self.beta = params.add(f"{name}.beta", np.zeros(dim))
        self.run_mean = params.add(f"{name}.run_mean", np.zeros(dim),
                                   trainable=False)
        self.run_var = params.add(f"{name}.run_var", np.ones(dim),
                                  trainable=False)
        self.momentum = momentum
        self.eps = eps
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.gamma.value.shape[0]:
            raise ValueError(
                f"batchnorm input shape {x.shape} incompatible with "
                f"dimension {self.gamma.value.shape[0]}")
        if train:
            if x.shape[0] < 2:
                raise ValueError(
                    f"training-mode batch norm needs batch size >= 2, got "
                    f"{x.shape[0]} (zero-variance hazard)")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            self.run_mean.value[...] = (self.momentum * self.run_mean.value
                                        + (1.0 - self.momentum) * mean)
            self.run_var.value[...] = (self.momentum * self.run_var.value
                                       + (1.0 - self.momentum) * var)
            self._cache = (xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.run_var.value + self.eps)
            xhat = (x - self.run_mean.value) * inv_std
            self._cache = None
        return xhat * self.gamma.value + self.beta.value

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("batchnorm backward requires a training-mode forward")
        xhat, inv_std = self._cache
        n = dout.shape[0]
        self.gamma.grad += (dout * xhat).sum(axis=0)
        self.beta.grad += dout.sum(axis=0)
        dxhat = dout * self.gamma.value
        # Backprop through the batch statistics themselves.
        return (inv_std / n) * (n * dxhat - dxhat.sum(axis=0)
                                - xhat * (dxhat * xhat).sum(axis=0))


class SoftmaxCrossEntropy:
    """Row-wise softmax plus negative log-likelihood of integer targets.

    forward returns the summed loss over rows; backward(scale) returns
    scale * (probs - onehot). Uses a stable log-sum-exp so a dominant logit
    yields exactly zero loss.
    """

    def __init__(self):
        self._probs = None
        self._targets = None

    def forward(self, logits: np.ndarray, targets) -> float:
        logits = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(logits)):
            raise ValueError("cross-entropy logits contain non-finite entries")
        targets = np.asarray(targets, dtype=np.int64)
        if logits.ndim != 2 or targets.shape != (logits.shape[0],):
            raise ValueError(
                f"cross-entropy shapes incompatible: logits {logits.shape}, "
                f"targets {targets.shape}")
        shift = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(shift)
        z = exp.sum(axis=1, keepdims=True)
        self._probs = exp / z
        self._targets = targets
        log_probs = shift - np.log(z)
        return float(-log_probs[np.arange(len(targets)), targets].sum())

    def probs(self) -> np.ndarray:
        return self._probs

    def backward(self, scale: float = 1.0) -> np.ndarray:
        d = self._probs.copy()
        d[np.arange(len(self._targets)), self._targets] -= 1.0
        return d * scale
