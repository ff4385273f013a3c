"""Gated recurrent unit cell and bidirectional wrapper, with exact BPTT.

Gate equations (update gate z, reset gate r, candidate c):

    z = sigmoid(x @ wz + h_prev @ uz + bz)
    r = sigmoid(x @ wr + h_prev @ ur + br)
    c = tanh(x @ wc + (r * h_prev) @ uc + bc)
    h = (1 - z) * h_prev + z * c
"""

from __future__ import annotations

import numpy as np

from .layers import glorot_uniform, sigmoid
from .params import ParameterSet


class GRUCell:
    """One GRU cell; owns the six weight matrices and three biases."""

    def __init__(self, params: ParameterSet, name: str, n_in: int, n_hidden: int,
                 rng: np.random.Generator):
        self.n_in = n_in
        self.n_hidden = n_hidden
        add = params.add
        self.wz = add(f"{name}.wz", glorot_uniform(rng, n_in, n_hidden))
        self.uz = add(f"{name}.uz", glorot_uniform(rng, n_hidden, n_hidden))
        self.bz = add(f"{name}.bz", np.zeros(n_hidden))
        self.wr = add(f"{name}.wr", glorot_uniform(rng, n_in, n_hidden))
        self.ur = add(f"{name}.ur", glorot_uniform(rng, n_hidden, n_hidden))
        self.br = add(f"{name}.br", np.zeros(n_hidden))
        self.wc = add(f"{name}.wc", glorot_uniform(rng, n_in, n_hidden))
        self.uc = add(f"{name}.uc", glorot_uniform(rng, n_hidden, n_hidden))
        self.bc = add(f"{name}.bc", np.zeros(n_hidden))

    def weight_names(self, prefix: str) -> list[str]:
        """Names of the input-to-hidden and hidden-to-hidden matrices."""
        return [f"{prefix}.{g}" for g in ("wz", "uz", "wr", "ur", "wc", "uc")]

    def step(self, x: np.ndarray, h_prev: np.ndarray):
        """One recurrence step. Returns (h, cache) for the backward pass."""
        x = np.asarray(x, dtype=np.float64)
        h_prev = np.asarray(h_prev, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(f"gru input shape {x.shape} != (*, {self.n_in})")
        if h_prev.shape != (x.shape[0], self.n_hidden):
            raise ValueError(
                f"gru state shape {h_prev.shape} != ({x.shape[0]}, {self.n_hidden})")
        z = sigmoid(x @ self.wz.value + h_prev @ self.uz.value + self.bz.value)
        r = sigmoid(x @ self.wr.value + h_prev @ self.ur.value + self.br.value)
        rh = r * h_prev
        c = np.tanh(x @ self.wc.value + rh @ self.uc.value + self.bc.value)
        h = (1.0 - z) * h_prev + z * c
        return h, (x, h_prev, z, r, rh, c)

    def step_backward(self, dh: np.ndarray, cache):
        """Backward through one step; accumulates parameter gradients.

        Returns (dx, dh_prev).
        """
        x, h_prev, z, r, rh, c = cache
        dz = dh * (c - h_prev) * z * (1.0 - z)
        dc = dh * z * (1.0 - c * c)
        dh_prev = dh * (1.0 - z)

        # candidate path
        self.wc.grad += x.T @ dc
        self.uc.grad += rh.T @ dc
        self.bc.grad += dc.sum(axis=0)
        drh = dc @ self.uc.value.T
        dr = drh * h_prev
        dh_prev += drh * r

        dpre_r = dr * r * (1.0 - r)
        self.wr.grad += x.T @ dpre_r
        self.ur.grad += h_prev.T @ dpre_r
        self.br.grad += dpre_r.sum(axis=0)
        dh_prev += dpre_r @ self.ur.value.T

        self.wz.grad += x.T @ dz
        self.uz.grad += h_prev.T @ dz
        self.bz.grad += dz.sum(axis=0)
        dh_prev += dz @ self.uz.value.T

        dx = dz @ self.wz.value.T + dpre_r @ self.wr.value.T + dc @ self.wc.value.T
        return dx, dh_prev

    def forward_sequence(self, xs: np.ndarray, h0: np.ndarray):
        """Run the cell over a (T, n_in) sequence from state h0 (1, n_hidden).

        Returns (states, caches) where states is (T, n_hidden).
        """
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[0] == 0:
            raise ValueError(f"gru sequence must be non-empty 2-D, got {xs.shape}")
        h = np.asarray(h0, dtype=np.float64).reshape(1, self.n_hidden)
        states = np.empty((xs.shape[0], self.n_hidden))
        caches = []
        for t in range(xs.shape[0]):
            h, cache = self.step(xs[t:t + 1], h)
            states[t] = h[0]
            caches.append(cache)
        return states, caches

    def backward_sequence(self, d_states: np.ndarray, caches):
        """BPTT over forward_sequence output. Returns (d_xs, d_h0)."""
        T = len(caches)
        d_xs = np.empty((T, self.n_in))
        dh = np.zeros((1, self.n_hidden))
        for t in range(T - 1, -1, -1):
            dh = dh + d_states[t:t + 1]
            dx, dh = self.step_backward(dh, caches[t])
            d_xs[t] = dx[0]
        return d_xs, dh


class BiGRU:
    """Two independent GRUs run in opposite directions, states concatenated.

    Output position t is [forward state at t, backward state at t]; both
    directions start from zero states.
    """

    def __init__(self, params: ParameterSet, name: str, n_in: int, n_hidden: int,
                 rng: np.random.Generator):
        self.fwd = GRUCell(params, f"{name}.fwd", n_in, n_hidden, rng)
        self.bwd = GRUCell(params, f"{name}.bwd", n_in, n_hidden, rng)
        self.n_hidden = n_hidden

    def forward(self, xs: np.ndarray):
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[0] == 0:
            raise ValueError(f"bi-gru needs a non-empty 2-D sequence, got {xs.shape}")
        h0 = np.zeros((1, self.n_hidden))
        f_states, f_caches = self.fwd.forward_sequence(xs, h0)
        b_states_rev, b_caches = self.bwd.forward_sequence(xs[::-1], h0)
        out = np.concatenate([f_states, b_states_rev[::-1]], axis=1)
        return out, (f_caches, b_caches)

    def backward(self, d_out: np.ndarray, caches):
        f_caches, b_caches = caches
        h = self.n_hidden
        d_f = d_out[:, :h]
        d_b_rev = d_out[:, h:][::-1]
        d_xs_f, _ = self.fwd.backward_sequence(d_f, f_caches)
        d_xs_b_rev, _ = self.bwd.backward_sequence(d_b_rev, b_caches)
        return d_xs_f + d_xs_b_rev[::-1]
