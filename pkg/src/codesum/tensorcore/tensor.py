"""Reverse-mode automatic differentiation over numpy arrays.

Only the operations the summarization model actually needs are provided:
elementwise arithmetic with numpy broadcasting, a few matrix products,
narrow 1-D convolution, softmax/sigmoid/tanh/PReLU, whole-matrix L2
normalization, row gathering for embedding lookups, and scalar
reductions.  Each op records a backward closure; ``Tensor.backward``
replays them in reverse topological order and accumulates gradients into
the ``grad`` field of every tensor created with ``requires_grad=True``.

The gradient contract is checked against central finite differences in
the test suite; see ``gradcheck.gradient_check``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import DimensionMismatch, KernelTooLong

# Denominator guard for whole-matrix L2 normalization.
L2_NORM_EPS = 1e-8


def _as_float_array(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """A numpy array plus the bookkeeping needed for backpropagation."""

    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward")

    def __init__(self, data, requires_grad: bool = False,
                 _prev: tuple[Tensor, ...] = (), _backward=None):
        self.data = _as_float_array(data)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("tensor holds non-finite values")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _prev)
        self._prev = _prev
        self._backward = _backward

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- gradient propagation -----------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor (a scalar unless ``grad`` is given)."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar")
            grad = np.ones_like(self.data)
        # Iterative topological sort; BPTT chains can get deep.
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other):
        return add(_wrap(other), neg(self))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division only supported by python scalars")
        return mul(self, _wrap(1.0 / float(other)))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    """A tensor that never receives a gradient."""
    return Tensor(x, requires_grad=False)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` to undo numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _make(data, prev: tuple[Tensor, ...], backward) -> Tensor:
    if not any(p.requires_grad for p in prev):
        return Tensor(data)
    return Tensor(data, _prev=tuple(p for p in prev if p.requires_grad),
                  _backward=backward)


# -- elementwise arithmetic ------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _make(-a.data, (a,), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


# -- matrix products ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for the 1-D/2-D combinations numpy's ``@`` allows."""
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionMismatch(f"matmul needs 1-D or 2-D operands, got {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.ndim == 1 and b.ndim == 1:          # dot -> scalar
            if a.requires_grad:
                a._accumulate(g * b.data)
            if b.requires_grad:
                b._accumulate(g * a.data)
        elif a.ndim == 1:                        # (m,) @ (m,n) -> (n,)
            if a.requires_grad:
                a._accumulate(b.data @ g)
            if b.requires_grad:
                b._accumulate(np.outer(a.data, g))
        elif b.ndim == 1:                        # (m,k) @ (k,) -> (m,)
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        else:                                    # (m,k) @ (k,n) -> (m,n)
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)

    return _make(data, (a, b), backward)


# -- reductions ---------------------------------------------------------------

def tsum(a: Tensor) -> Tensor:
    def backward(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, float(g)))

    return _make(a.data.sum(), (a,), backward)


def tmax(a: Tensor) -> Tensor:
    """Maximum over all entries; the gradient flows to the first argmax."""
    idx = int(np.argmax(a.data))

    def backward(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga.flat[idx] = float(g)
            a._accumulate(ga)

    return _make(a.data.flat[idx], (a,), backward)


def pick(a: Tensor, index: int) -> Tensor:
    """One entry of a 1-D tensor as a scalar."""
    if a.ndim != 1:
        raise DimensionMismatch("pick expects a vector")
    idx = int(index)

    def backward(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga[idx] = float(g)
            a._accumulate(ga)

    return _make(a.data[idx], (a,), backward)


# -- shape plumbing -----------------------------------------------------------

def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def rows(table: Tensor, ids: Iterable[int]) -> Tensor:
    """Gather rows of a matrix (embedding lookup); backward scatter-adds."""
    idx = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.intp)
    if table.ndim != 2:
        raise DimensionMismatch("rows expects a matrix table")

    def backward(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx, g)
            table._accumulate(gt)

    return _make(table.data[idx], (table,), backward)


def index_last(a: Tensor, k: int) -> Tensor:
    """Slice ``a[..., k]`` of a 3-D tensor."""
    if a.ndim != 3:
        raise DimensionMismatch("index_last expects a 3-D tensor")

    def backward(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga[..., k] = g
            a._accumulate(ga)

    return _make(a.data[..., k], (a,), backward)


# -- nonlinearities -----------------------------------------------------------

def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * out * (1.0 - out))

    return _make(out, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out * out))

    return _make(out, (a,), backward)


def prelu(x: Tensor, leak: Tensor) -> Tensor:
    """max(x, 0) + leak * min(x, 0) with a trainable scalar leak."""
    if leak.data.size != 1:
        raise DimensionMismatch("prelu leak must be a scalar")
    xd = x.data
    a = float(leak.data)
    out = np.where(xd > 0, xd, a * xd)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * np.where(xd > 0, 1.0, a))
        if leak.requires_grad:
            leak._accumulate(np.sum(g * np.minimum(xd, 0.0)).reshape(leak.shape))

    return _make(out, (x, leak), backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise ValueError("log of a non-positive value")
    out = np.log(a.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return _make(out, (a,), backward)


def softmax(v: Tensor) -> Tensor:
    """Stable softmax of a vector; output is nonnegative and sums to one."""
    if v.ndim != 1:
        raise DimensionMismatch("softmax expects a vector")
    shifted = v.data - v.data.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def backward(g):
        if v.requires_grad:
            v._accumulate(out * (g - float(np.dot(g, out))))

    return _make(out, (v,), backward)


def l2_normalize(m: Tensor) -> Tensor:
    """Divide a matrix by its whole-matrix (Frobenius) norm plus a guard."""
    norm = float(np.sqrt(np.sum(m.data * m.data)))
    scale = 1.0 / (norm + L2_NORM_EPS)
    out = m.data * scale

    def backward(g):
        if m.requires_grad:
            gm = g * scale
            if norm > 0.0:
                gm = gm - (float(np.sum(g * m.data)) / (norm * (norm + L2_NORM_EPS) ** 2)) * m.data
            m._accumulate(gm)

    return _make(out, (m,), backward)


# -- convolution ---------------------------------------------------------------

def conv1d_narrow(inp: Tensor, kernel: Tensor) -> Tensor:
    """Narrow 1-D convolution along the sequence axis.

    ``inp`` is (L, Din), ``kernel`` is (Din, w, Dout); the result is
    (L - w + 1, Dout) with out[p, o] = sum_j sum_i inp[p+j, i] * kernel[i, j, o].
    """
    if inp.ndim != 2 or kernel.ndim != 3:
        raise DimensionMismatch(f"conv1d_narrow got input {inp.shape}, kernel {kernel.shape}")
    length, d_in = inp.shape
    k_in, width, _ = kernel.shape
    if d_in != k_in:
        raise DimensionMismatch(f"input channels {d_in} != kernel channels {k_in}")
    if width < 1:
        raise DimensionMismatch("kernel width must be >= 1")
    if width > length:
        raise KernelTooLong(f"kernel width {width} exceeds input length {length}")

    windows = np.lib.stride_tricks.sliding_window_view(inp.data, width, axis=0)
    data = np.einsum("piw,iwo->po", windows, kernel.data)

    def backward(g):
        if inp.requires_grad:
            gi = np.zeros_like(inp.data)
            positions = length - width + 1
            for j in range(width):
                gi[j:j + positions] += g @ kernel.data[:, j, :].T
            inp._accumulate(gi)
        if kernel.requires_grad:
            kernel._accumulate(np.einsum("piw,po->iwo", windows, g))

    return _make(data, (inp, kernel), backward)
