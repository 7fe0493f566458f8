"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records a backward closure on its output; calling
``backward()`` on a scalar loss topologically sorts the recorded graph and
accumulates gradients into every reachable tensor with ``requires_grad``.
The graph is freed afterwards, so one forward supports exactly one backward.

All data is row-major float64. Forward outputs are checked for NaN/Inf and
raise :class:`NumericError` on violation; the only sanctioned non-finite
value is the ``-inf`` sentinel written by :func:`masked_fill` and consumed
by :func:`softmax`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .exceptions import ContractError, DegenerateSliceError, NumericError, ShapeError

# Toggled off only in tight benchmark loops; tests rely on it being on.
CHECK_FINITE = True


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr


def _check_finite(data: np.ndarray, op: str, allow_neg_inf: bool = False) -> None:
    if not CHECK_FINITE:
        return
    if allow_neg_inf:
        bad = np.isnan(data).any() or np.isposinf(data).any()
    else:
        bad = not np.isfinite(data).all()
    if bad:
        raise NumericError(f"non-finite values produced by '{op}'")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A dense float64 array plus an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward: Callable[[], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- autodiff plumbing ----------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Propagate gradients from a scalar loss; clears the graph after."""
        if self.size != 1:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
        for node in topo:
            node._backward = None
            node._parents = ()

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    # -- shape ops ------------------------------------------------------

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if len(axes) != 1 else axes[0])

    def sum(self, axis=None, keepdims: bool = False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        if axis is None:
            count = self.size
        else:
            ax = axis if isinstance(axis, tuple) else (axis,)
            count = 1
            for a in ax:
                count *= self.shape[a]
        return tensor_sum(self, axis=axis, keepdims=keepdims) * (1.0 / count)

    def tanh(self):
        return tanh(self)

    def relu(self):
        return relu(self)


def _wrap(data) -> np.ndarray:
    return data.data if isinstance(data, Tensor) else _as_array(data)


def _result(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[Tensor], Callable[[], None]],
    op: str,
    allow_neg_inf: bool = False,
) -> Tensor:
    _check_finite(data, op, allow_neg_inf=allow_neg_inf)
    live = tuple(p for p in parents if isinstance(p, Tensor) and p.requires_grad)
    out = Tensor(data, requires_grad=bool(live))
    if live:
        out._parents = live
        out._backward = backward(out)
    return out


def constant(values) -> Tensor:
    """A tensor that never receives gradients."""
    return Tensor(values, requires_grad=False)


# -- elementwise ops ------------------------------------------------------


def add(a, b) -> Tensor:
    a_t, b_t = a if isinstance(a, Tensor) else None, b if isinstance(b, Tensor) else None
    a_d, b_d = _wrap(a), _wrap(b)
    data = a_d + b_d

    def backward(out: Tensor):
        def run():
            if a_t is not None and a_t.requires_grad:
                a_t._accumulate(_unbroadcast(out.grad, a_d.shape))
            if b_t is not None and b_t.requires_grad:
                b_t._accumulate(_unbroadcast(out.grad, b_d.shape))

        return run

    return _result(data, (a_t, b_t), backward, "add")


def sub(a, b) -> Tensor:
    a_t, b_t = a if isinstance(a, Tensor) else None, b if isinstance(b, Tensor) else None
    a_d, b_d = _wrap(a), _wrap(b)
    data = a_d - b_d

    def backward(out: Tensor):
        def run():
            if a_t is not None and a_t.requires_grad:
                a_t._accumulate(_unbroadcast(out.grad, a_d.shape))
            if b_t is not None and b_t.requires_grad:
                b_t._accumulate(_unbroadcast(-out.grad, b_d.shape))

        return run

    return _result(data, (a_t, b_t), backward, "sub")


def mul(a, b) -> Tensor:
    a_t, b_t = a if isinstance(a, Tensor) else None, b if isinstance(b, Tensor) else None
    a_d, b_d = _wrap(a), _wrap(b)
    data = a_d * b_d

    def backward(out: Tensor):
        def run():
            if a_t is not None and a_t.requires_grad:
                a_t._accumulate(_unbroadcast(out.grad * b_d, a_d.shape))
            if b_t is not None and b_t.requires_grad:
                b_t._accumulate(_unbroadcast(out.grad * a_d, b_d.shape))

        return run

    return _result(data, (a_t, b_t), backward, "mul")


def power(x: Tensor, exponent: float) -> Tensor:
    """Elementwise x**p for a constant exponent."""
    p = float(exponent)
    x_d = x.data
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        data = x_d ** p

    def backward(out: Tensor):
        def run():
            x._accumulate(out.grad * p * x_d ** (p - 1.0))

        return run

    return _result(data, (x,), backward, f"power({p})")


def maximum(x: Tensor, floor: float) -> Tensor:
    """Elementwise max(x, floor); gradient flows only where x > floor."""
    c = float(floor)
    data = np.maximum(x.data, c)
    mask = x.data > c

    def backward(out: Tensor):
        def run():
            x._accumulate(out.grad * mask)

        return run

    return _result(data, (x,), backward, "maximum")


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0.0)
    mask = x.data > 0.0

    def backward(out: Tensor):
        def run():
            x._accumulate(out.grad * mask)

        return run

    return _result(data, (x,), backward, "relu")


def tanh(x: Tensor) -> Tensor:
    data = np.tanh(x.data)

    def backward(out: Tensor):
        def run():
            x._accumulate(out.grad * (1.0 - data * data))

        return run

    return _result(data, (x,), backward, "tanh")


# -- contractions ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with batched leading dimensions.

    Both operands must be at least 2-D; leading dimensions broadcast by
    exact match (or against absent dims), matching numpy matmul.
    """
    if not isinstance(a, Tensor):
        a = constant(a)
    if not isinstance(b, Tensor):
        b = constant(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(
            f"matmul requires 2-D or higher operands, got {a.shape} @ {b.shape}"
        )
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} @ {b.shape}")
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul batch dims disagree: {a.shape} @ {b.shape}") from exc
    a_d, b_d = a.data, b.data

    def backward(out: Tensor):
        def run():
            if a.requires_grad:
                ga = np.matmul(out.grad, np.swapaxes(b_d, -1, -2))
                a._accumulate(_unbroadcast(ga, a_d.shape))
            if b.requires_grad:
                gb = np.matmul(np.swapaxes(a_d, -1, -2), out.grad)
                b._accumulate(_unbroadcast(gb, b_d.shape))

        return run

    return _result(data, (a, b), backward, "matmul")


# -- shape ops --------------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    old_shape = x.shape
    data = x.data.reshape(shape)

    def backward(out: Tensor):
        def run():
            x._accumulate(out.grad.reshape(old_shape))

        return run

    return _result(data, (x,), backward, "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = np.transpose(x.data, axes)

    def backward(out: Tensor):
        def run():
            x._accumulate(np.transpose(out.grad, inverse))

        return run

    return _result(data, (x,), backward, "transpose")


def take(x: Tensor, key) -> Tensor:
    """Basic slicing/indexing; backward scatters into the source region."""
    data = x.data[key]
    if np.isscalar(data) or data.ndim == 0:
        data = np.asarray(data, dtype=np.float64)

    def backward(out: Tensor):
        def run():
            full = np.zeros_like(x.data)
            full[key] += out.grad
            x._accumulate(full)

        return run

    return _result(data, (x,), backward, "take")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [t if isinstance(t, Tensor) else constant(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(out: Tensor):
        def run():
            for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    index = [slice(None)] * out.grad.ndim
                    index[axis] = slice(start, stop)
                    t._accumulate(out.grad[tuple(index)])

        return run

    return _result(data, tensors, backward, "concat")


def tensor_sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)
    data = np.asarray(data, dtype=np.float64)

    def backward(out: Tensor):
        def run():
            g = out.grad
            if axis is not None and not keepdims:
                ax = axis if isinstance(axis, tuple) else (axis,)
                ax = tuple(a % x.ndim for a in ax)
                shape = tuple(
                    1 if i in ax else n for i, n in enumerate(x.shape)
                )
                g = g.reshape(shape)
            x._accumulate(np.broadcast_to(g, x.shape).copy())

        return run

    return _result(data, (x,), backward, "sum")


# -- structured ops ----------------------------------------------------------


def masked_fill(x: Tensor, mask: np.ndarray, fill_value: float) -> Tensor:
    """Broadcast ``x`` to ``mask``'s shape, keep it where mask is true,
    write ``fill_value`` elsewhere. Gradient flows only through kept cells.

    The canonical use writes ``-inf`` sentinels ahead of a softmax.
    """
    mask = np.asarray(mask, dtype=bool)
    x_b = np.broadcast_to(x.data, mask.shape)
    data = np.where(mask, x_b, fill_value)

    def backward(out: Tensor):
        def run():
            x._accumulate(_unbroadcast(out.grad * mask, x.shape))

        return run

    return _result(data, (x,), backward, "masked_fill", allow_neg_inf=True)


def softmax(x: Tensor, axis: int) -> Tensor:
    """Numerically stabilized softmax along ``axis``.

    ``-inf`` entries map to exactly 0. A slice that is entirely ``-inf``
    raises :class:`DegenerateSliceError`.
    """
    axis = axis % x.ndim if x.ndim else 0
    top = np.max(x.data, axis=axis, keepdims=True)
    if np.isneginf(top).any():
        raise DegenerateSliceError(f"softmax slice along axis {axis} is all -inf")
    shifted = x.data - top
    exps = np.exp(shifted)
    exps[np.isneginf(x.data)] = 0.0
    total = exps.sum(axis=axis, keepdims=True)
    data = exps / total

    def backward(out: Tensor):
        def run():
            inner = (out.grad * data).sum(axis=axis, keepdims=True)
            x._accumulate(data * (out.grad - inner))

        return run

    return _result(data, (x,), backward, "softmax")


def conv1d(x: Tensor, kernel: Tensor, stride: int) -> Tensor:
    """Valid (unpadded) 1-D convolution along the time axis of an
    (N, T, F) tensor with a single shared kernel of shape (k,).

    Output length is floor((T - k) / stride) + 1.
    """
    if x.ndim != 3:
        raise ShapeError(f"conv1d expects (N, T, F) input, got {x.shape}")
    if kernel.ndim != 1:
        raise ShapeError(f"conv1d kernel must be 1-D, got {kernel.shape}")
    if stride < 1:
        raise ShapeError(f"conv1d stride must be positive, got {stride}")
    k = kernel.shape[0]
    t_in = x.shape[1]
    if k > t_in:
        raise ShapeError(f"conv1d kernel length {k} exceeds input length {t_in}")
    windows = np.lib.stride_tricks.sliding_window_view(x.data, k, axis=1)
    windows = windows[:, ::stride]  # (N, T', F, k)
    t_out = windows.shape[1]
    data = np.matmul(windows, kernel.data)

    def backward(out: Tensor):
        def run():
            g = out.grad
            if kernel.requires_grad:
                kernel._accumulate(np.einsum("ntfk,ntf->k", windows, g))
            if x.requires_grad:
                gx = np.zeros_like(x.data)
                for offset in range(k):
                    stop = offset + stride * (t_out - 1) + 1
                    gx[:, offset:stop:stride, :] += kernel.data[offset] * g
                x._accumulate(gx)

        return run

    return _result(data, (x, kernel), backward, "conv1d")


def sliding_patches(x: Tensor, window: int) -> Tensor:
    """Overlapping stride-1 temporal patches of a (K, T, d) tensor.

    Returns (K, T - window + 1, window, d); patch p covers times
    [p, p + window - 1].
    """
    if x.ndim != 3:
        raise ShapeError(f"sliding_patches expects (K, T, d) input, got {x.shape}")
    t_in = x.shape[1]
    if not 2 <= window <= t_in:
        raise ShapeError(
            f"patch window must lie in [2, T={t_in}], got {window}"
        )
    view = np.lib.stride_tricks.sliding_window_view(x.data, window, axis=1)
    data = np.ascontiguousarray(view.transpose(0, 1, 3, 2))
    n_patches = t_in - window + 1

    def backward(out: Tensor):
        def run():
            gx = np.zeros_like(x.data)
            for offset in range(window):
                gx[:, offset : offset + n_patches, :] += out.grad[:, :, offset, :]
            x._accumulate(gx)

        return run

    return _result(data, (x,), backward, "sliding_patches")


def pairwise_sqdist(y: Tensor) -> Tensor:
    """Squared Euclidean distances between the rows of the last-but-one axis.

    Input (..., M, d) gives (..., M, M). The result is exactly symmetric
    with an exactly zero diagonal, and clamped at 0 against rounding.
    """
    if y.ndim < 2:
        raise ShapeError(f"pairwise_sqdist expects (..., M, d), got {y.shape}")
    y_d = y.data
    sq = (y_d * y_d).sum(axis=-1)
    gram = np.matmul(y_d, np.swapaxes(y_d, -1, -2))
    data = sq[..., :, None] + sq[..., None, :] - 2.0 * gram
    np.maximum(data, 0.0, out=data)
    diag = np.einsum("...ii->...i", data)
    diag[...] = 0.0

    def backward(out: Tensor):
        def run():
            sym = out.grad + np.swapaxes(out.grad, -1, -2)
            row = sym.sum(axis=-1)
            gy = 2.0 * (row[..., None] * y_d - np.matmul(sym, y_d))
            y._accumulate(gy)

        return run

    return _result(data, (y,), backward, "pairwise_sqdist")
