"""Named trainable tensors with gradients."""

from __future__ import annotations

import numpy as np


class Parameter:
    """A value array plus a same-shaped gradient buffer.

    Layers keep references to Parameter objects and read .value on every
    use, so the weight filter may overwrite value in place without breaking
    anything. trainable=False marks frozen tensors (e.g. pretrained
    embeddings); the optimizer leaves them untouched.
    """

    __slots__ = ("value", "grad", "trainable")

    def __init__(self, value, trainable: bool = True):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.trainable = trainable

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


class ParameterSet:
    """Ordered name -> Parameter mapping for one model."""

    def __init__(self):
        self._entries: dict[str, Parameter] = {}

    def add(self, name: str, value, trainable: bool = True) -> Parameter:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Parameter(value, trainable=trainable)
        self._entries[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        try:
            return self._entries[name]
        except KeyError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def zero_grads(self) -> None:
        for p in self._entries.values():
            p.zero_grad()

    def scale_grads(self, factor: float) -> None:
        for p in self._entries.values():
            p.grad *= factor
