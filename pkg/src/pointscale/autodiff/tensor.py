"""Dense float64 tensors with reverse-mode differentiation.

Ops execute eagerly on numpy buffers. When a :class:`Tape` is active,
every op touching a gradient-tracked tensor records a node; backward
traverses the nodes in exact reverse execution order, so accumulation
order (and therefore the bitwise result) is fixed for a given program.
With no active tape the same ops run gradient-free.

Every forward op validates that its output is finite; NaN or infinity
anywhere raises :class:`NumericError` naming the op.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from ..errors import NumericError

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

_ACTIVE_TAPE = None


class Tensor:
    """A shaped float64 buffer, optionally tracked for gradients."""

    __slots__ = ("values", "requires_grad", "grad", "name", "_tape")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._tape = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise NumericError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.shape}, requires_grad={self.requires_grad})"


def constant(values, name: str | None = None) -> Tensor:
    return Tensor(values, requires_grad=False, name=name)


class Tape:
    """Ordered record of executed ops; consumable exactly once.

    Use as a context manager around the forward pass, then call
    ``backward(loss)`` to populate gradients on every tracked leaf
    tensor reachable from the loss.
    """

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self._consumed = False

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise NumericError("nested tapes are not supported")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def backward(self, loss: Tensor):
        """Accumulate gradients of ``loss`` into tracked leaf tensors."""
        if self._consumed:
            raise NumericError("tape already consumed by a previous backward pass")
        self._consumed = True
        if loss.values.size != 1:
            raise NumericError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss._tape is not self:
            raise NumericError("loss was not produced under this tape")

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
        for out, inputs, backward_fn in reversed(self._nodes):
            out_grad = pending.pop(id(out), None)
            if out_grad is None:
                continue
            for tensor, grad in zip(inputs, backward_fn(out_grad)):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor._tape is self:
                    slot = pending.get(id(tensor))
                    pending[id(tensor)] = grad if slot is None else slot + grad
                else:
                    # Leaf: accumulate into the tensor itself.
                    tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn):
    tape = _ACTIVE_TAPE
    if tape is None or tape._consumed:
        return out
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._tape = tape
        tape._nodes.append((out, inputs, backward_fn))
    return out


def _check_finite(values: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(values).all():
        raise NumericError(f"non-finite values produced by op '{op}'")
    return values


def make_op(values: np.ndarray, inputs: tuple[Tensor, ...], backward_fn, op: str) -> Tensor:
    """Create an op output tensor and record it on the active tape.

    ``backward_fn(out_grad)`` must return one gradient array (or None)
    per input, holding any data-dependent structure fixed at the values
    seen during the forward pass.
    """
    out = Tensor(_check_finite(np.asarray(values, dtype=np.float64), op))
    return _record(out, inputs, backward_fn)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _broadcast_kind(a_shape, b_shape):
    if a_shape == b_shape:
        return "same"
    if b_shape == ():
        return "scalar"
    if len(b_shape) < len(a_shape) and a_shape[len(a_shape) - len(b_shape):] == b_shape:
        return "leading"
    return None


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum())
    axes = tuple(range(grad.ndim - len(shape)))
    return grad.sum(axis=axes)


def add(a, b) -> Tensor:
    """Elementwise sum. The smaller operand may be a scalar or match the
    trailing dimensions of the larger (leading-batch broadcast only)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if _broadcast_kind(a.shape, b.shape) is None and _broadcast_kind(b.shape, a.shape) is None:
        raise NumericError(f"add shape mismatch: {a.shape} vs {b.shape}")
    values = a.values + b.values

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return make_op(values, (a, b), backward, "add")


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return make_op(-a.values, (a,), lambda g: (-g,), "neg")


def sub(a, b) -> Tensor:
    return add(a, neg(b))


def mul(a, b) -> Tensor:
    """Elementwise product with the same broadcast rules as :func:`add`."""
    a, b = _as_tensor(a), _as_tensor(b)
    if _broadcast_kind(a.shape, b.shape) is None and _broadcast_kind(b.shape, a.shape) is None:
        raise NumericError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    values = a.values * b.values

    def backward(g):
        return _reduce_to(g * b.values, a.shape), _reduce_to(g * a.values, b.shape)

    return make_op(values, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise NumericError("matmul expects 2-d operands")
    if a.shape[1] != b.shape[0]:
        raise NumericError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    values = a.values @ b.values

    def backward(g):
        return g @ b.values.T, a.values.T @ g

    return make_op(values, (a, b), backward, "matmul")


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.values.ndim != 2:
        raise NumericError("transpose expects a 2-d tensor")
    return make_op(a.values.T.copy(), (a,), lambda g: (g.T.copy(),), "transpose")


def gather_rows(a, indices) -> Tensor:
    """Select rows by index; the exact adjoint of :func:`scatter_add_rows`."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise NumericError("gather_rows expects a 1-d index list")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise NumericError("gather_rows index out of range")
    values = a.values[idx]

    def backward(g):
        full = np.zeros_like(a.values)
        np.add.at(full, idx, g)
        return (full,)

    return make_op(values, (a,), backward, "gather_rows")


def scatter_add_rows(rows, indices, num_rows: int) -> Tensor:
    """Accumulate ``rows`` into a zero (num_rows, d) tensor at ``indices``."""
    rows = _as_tensor(rows)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.shape != (rows.shape[0],):
        raise NumericError("scatter_add_rows needs one index per row")
    if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
        raise NumericError("scatter_add_rows index out of range")
    values = np.zeros((num_rows,) + rows.shape[1:], dtype=np.float64)
    np.add.at(values, idx, rows.values)

    def backward(g):
        return (g[idx],)

    return make_op(values, (rows,), backward, "scatter_add_rows")


def embedding_lookup(table, tokens) -> Tensor:
    """Row lookup into an embedding table (gather by token id)."""
    return gather_rows(table, tokens)


def softmax_lastdim(a) -> Tensor:
    a = _as_tensor(a)
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * probs).sum(axis=-1, keepdims=True)
        return ((g - inner) * probs,)

    return make_op(probs, (a,), backward, "softmax_lastdim")


def layernorm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last dimension to zero mean / unit variance, then
    apply a learned per-channel gain and bias."""
    a, gain, bias = _as_tensor(a), _as_tensor(gain), _as_tensor(bias)
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise NumericError("layernorm gain/bias must match the last dimension")
    mu = a.values.mean(axis=-1, keepdims=True)
    var = ((a.values - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.values - mu) * inv
    values = xhat * gain.values + bias.values

    def backward(g):
        dgain = _reduce_to(g * xhat, gain.shape)
        dbias = _reduce_to(g, bias.shape)
        dxhat = g * gain.values
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, dgain, dbias

    return make_op(values, (a, gain, bias), backward, "layernorm")


def gelu(a) -> Tensor:
    """Exact (erf-based) GELU."""
    a = _as_tensor(a)
    cdf = 0.5 * (1.0 + erf(a.values / _SQRT2))
    values = a.values * cdf

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.values**2)
        return (g * (cdf + a.values * pdf),)

    return make_op(values, (a,), backward, "gelu")


def tsum(a) -> Tensor:
    """Sum of all elements (scalar output)."""
    a = _as_tensor(a)
    values = np.asarray(a.values.sum())

    def backward(g):
        return (np.broadcast_to(g, a.shape).astype(np.float64),)

    return make_op(values, (a,), backward, "sum")


def tmean(a) -> Tensor:
    """Mean of all elements (scalar output)."""
    a = _as_tensor(a)
    values = np.asarray(a.values.mean())
    scale = 1.0 / a.size

    def backward(g):
        return (np.broadcast_to(g * scale, a.shape).astype(np.float64),)

    return make_op(values, (a,), backward, "mean")


def concat_rows(tensors) -> Tensor:
    """Concatenate along the row axis."""
    tensors = tuple(_as_tensor(t) for t in tensors)
    if not tensors:
        raise NumericError("concat_rows needs at least one tensor")
    values = np.concatenate([t.values for t in tensors], axis=0)
    counts = [t.shape[0] for t in tensors]

    def backward(g):
        grads = []
        start = 0
        for count in counts:
            grads.append(g[start:start + count])
            start += count
        return tuple(grads)

    return make_op(values, tensors, backward, "concat_rows")


def cross_entropy_logits(logits, targets) -> Tensor:
    """Mean cross-entropy of integer targets under row-wise softmax
    (fused, numerically stable)."""
    logits = _as_tensor(logits)
    tgt = np.asarray(targets, dtype=np.int64)
    if logits.values.ndim != 2 or tgt.shape != (logits.shape[0],):
        raise NumericError("cross_entropy_logits expects (n, V) logits and n targets")
    if tgt.size and (tgt.min() < 0 or tgt.max() >= logits.shape[1]):
        raise NumericError("target outside logit range")
    shifted = logits.values - logits.values.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    per_row = logz - shifted[np.arange(tgt.size), tgt]
    values = np.asarray(per_row.mean())

    def backward(g):
        probs = np.exp(shifted - logz[:, None])
        probs[np.arange(tgt.size), tgt] -= 1.0
        return (probs * (g / tgt.size),)

    return make_op(values, (logits,), backward, "cross_entropy_logits")


def duplicate_reshape_upsample(z, target: int) -> Tensor:
    """Row upsampling by duplication: row i of the output is row
    floor(i / r) of the input, r = target / rows. Backward sums each
    duplicate group."""
    z = _as_tensor(z)
    if z.values.ndim != 2:
        raise NumericError("duplicate_reshape_upsample expects a 2-d tensor")
    s, d = z.shape
    if target % s != 0:
        raise NumericError(f"target {target} not divisible by {s} rows")
    r = target // s
    values = np.repeat(z.values, r, axis=0)

    def backward(g):
        return (g.reshape(s, r, d).sum(axis=1),)

    return make_op(values, (z,), backward, "duplicate_reshape_upsample")


def straight_through(f, quantized_values: np.ndarray) -> Tensor:
    """Forward the quantized values verbatim; route gradients to ``f``
    unchanged (identity on the backward pass)."""
    f = _as_tensor(f)
    q = np.asarray(quantized_values, dtype=np.float64)
    if q.shape != f.shape:
        raise NumericError("straight_through shape mismatch")
    return make_op(q.copy(), (f,), lambda g: (g,), "straight_through")
