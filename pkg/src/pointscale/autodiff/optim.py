"""Named parameter store and the AdamW update rule."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .tensor import Tensor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ParameterStore:
    """Ordered, uniquely named map of trainable tensors plus Adam moment
    buffers and a shared step counter. Iteration follows insertion order,
    which fixes the update order run to run."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, values) -> Tensor:
        if name in self._params:
            raise NumericError(f"duplicate parameter name {name!r}")
        tensor = Tensor(np.array(values, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = tensor
        self._m[name] = np.zeros_like(tensor.values)
        self._v[name] = np.zeros_like(tensor.values)
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grads(self):
        for p in self._params.values():
            p.grad = None

    def num_values(self) -> int:
        return sum(p.size for p in self._params.values())

    def state_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Flat view of parameters and moments for checkpointing."""
        out: dict[str, np.ndarray] = {}
        for name, p in self._params.items():
            out[f"{prefix}{name}"] = p.values
            out[f"{prefix}adam_m.{name}"] = self._m[name]
            out[f"{prefix}adam_v.{name}"] = self._v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], prefix: str = ""):
        for name, p in self._params.items():
            for key, target in (
                (f"{prefix}{name}", p.values),
                (f"{prefix}adam_m.{name}", self._m[name]),
                (f"{prefix}adam_v.{name}", self._v[name]),
            ):
                if key not in arrays:
                    raise NumericError(f"checkpoint missing array {key!r}")
                src = arrays[key]
                if src.shape != target.shape:
                    raise NumericError(
                        f"checkpoint array {key!r} has shape {src.shape}, expected {target.shape}"
                    )
                target[...] = src


def adamw_step(
    store: ParameterStore,
    lr: float,
    weight_decay: float = 0.0,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
):
    """One decoupled-weight-decay Adam step over every parameter.

    Requires every parameter to carry a gradient; increments the step
    counter and clears gradients afterwards.
    """
    missing = [name for name, p in store.items() if p.grad is None]
    if missing:
        raise NumericError(f"adamw_step: missing gradients for {missing}")
    t = store.step_count + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in store.items():
        g = p.grad
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay != 0.0:
            update = update + weight_decay * p.values
        p.values -= lr * update
    store.step_count = t
    store.zero_grads()


def cosine_lr(base_lr: float, step: int, total_steps: int, floor: float = 0.0) -> float:
    """Cosine decay from ``base_lr`` to ``floor`` over ``total_steps``."""
    if total_steps <= 0:
        return base_lr
    frac = min(max(step / total_steps, 0.0), 1.0)
    return floor + (base_lr - floor) * 0.5 * (1.0 + np.cos(np.pi * frac))
