"""Adam with elementwise gradient clipping and L2 weight decay."""

from __future__ import annotations

import numpy as np

from .params import ParameterSet


class Adam:
    """Bias-corrected Adam over a ParameterSet.

    Per step, for every trainable parameter: the weight-decay term
    decay * value is added to the raw gradient, the result is clipped
    elementwise into [-clip_bound, clip_bound], and the clipped gradient
    feeds the moment estimates. Frozen parameters are skipped entirely.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, clip_bound: float = 5.0,
                 weight_decay: float = 0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_bound = clip_bound
        self.weight_decay = weight_decay
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            if not p.trainable:
                continue
            if not np.all(np.isfinite(p.grad)):
                raise ValueError(f"non-finite gradient for parameter {name!r}")
            g = p.grad
            if self.weight_decay != 0.0:
                g = g + self.weight_decay * p.value
            g = np.clip(g, -self.clip_bound, self.clip_bound)
            if name not in self._m:
                self._m[name] = np.zeros_like(p.value)
                self._v[name] = np.zeros_like(p.value)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def reset_moments(self, names) -> None:
        """Drop moment estimates for the given parameters (they restart at
        zero on the next step); the step counter is kept."""
        for n in names:
            self._m.pop(n, None)
            self._v.pop(n, None)

    def state_tensors(self) -> dict[str, np.ndarray]:
        """Moment buffers under a stable namespace, for checkpointing."""
        out: dict[str, np.ndarray] = {}
        for name, m in self._m.items():
            out[f"adam.m.{name}"] = m
            out[f"adam.v.{name}"] = self._v[name]
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray], t: int) -> None:
        self.t = t
        self._m.clear()
        self._v.clear()
        for key, arr in tensors.items():
            if key.startswith("adam.m."):
                self._m[key[len("adam.m."):]] = np.array(arr, dtype=np.float64)
            elif key.startswith("adam.v."):
                self._v[key[len("adam.v."):]] = np.array(arr, dtype=np.float64)
