"""Named, seeded learnable parameters and the Adam update rule.

Each parameter array draws from its own named random stream derived from
(store seed, crc32(name)), so re-initializing with the same seed reproduces
bit-identical values regardless of creation order.
"""

from __future__ import annotations

import zlib
from typing import Iterator

import numpy as np

from .autodiff import Tensor
from .exceptions import ContractError


def _named_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])


class ParamStore:
    """Mapping of dotted names to trainable tensors, iterated in sorted order."""

    def __init__(self, seed: int):
        self.rng_seed = int(seed)
        self._entries: dict[str, Tensor] = {}

    def add_weight(self, name: str, shape: tuple[int, ...], fan_in: int, fan_out: int) -> Tensor:
        """Uniform(-a, a) init with a = sqrt(6 / (fan_in + fan_out))."""
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        values = _named_rng(self.rng_seed, name).uniform(-bound, bound, size=shape)
        return self._insert(name, values)

    def add_zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._insert(name, np.zeros(shape))

    def _insert(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name: {name}")
        tensor = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
        self._entries[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._entries[name]

    def zero_grads(self) -> None:
        for _, tensor in self.items():
            tensor.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.items()}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._entries) - set(arrays)
        extra = set(arrays) - set(self._entries)
        if missing or extra:
            raise ContractError(
                f"parameter set mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for name, tensor in self.items():
            values = np.asarray(arrays[name], dtype=np.float64)
            if values.shape != tensor.shape:
                raise ContractError(
                    f"shape mismatch restoring '{name}': {values.shape} vs {tensor.shape}"
                )
            tensor.data = values.copy()


class Adam:
    """Adam with bias correction; grads are consumed (reset) by each step."""

    def __init__(
        self,
        store: ParamStore,
        lr: float = 5e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.store = store
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self) -> None:
        for name, tensor in self.store.items():
            if tensor.grad is None:
                raise ContractError(f"no gradient for parameter '{name}'")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, tensor in self.store.items():
            g = tensor.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            tensor.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            tensor.grad = None
