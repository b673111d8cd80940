"""Minimal dense-tensor reverse-mode autodiff over float64 numpy arrays.

A Tensor wraps a numpy array plus an optional gradient accumulator and the
closure needed to propagate gradients to its parents. Graphs are built
eagerly during the forward pass and discarded after backward(). The op set
is deliberately small: elementwise arithmetic with numpy broadcasting,
2-D matmul/transpose, reshape/stack/slice plumbing, and the fused building
blocks every encoder and loss in this repo is made of (affine, relu,
set max-pool, L2 normalization, softmax cross-entropy, row-wise Euclidean
distance).

Everything is double precision and deterministic; there is no hidden RNG
anywhere in the engine.
"""

from contextlib import contextmanager

import numpy as np

from ..errors import NumericError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (frozen-model inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(data) -> np.ndarray:
    return np.asarray(data, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # defer mixed numpy/Tensor arithmetic to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-mode pass from a scalar output; accumulates into .grad."""
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar output, got shape {self.data.shape}"
            )
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Operator sugar. Scalars/arrays are wrapped as constant tensors.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents, backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _make(-a.data, (a,), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}"
        )
    out_data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make(out_data, (a, b), backward)


def transpose2d(a) -> Tensor:
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError(f"transpose2d expects a matrix, got shape {a.data.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.T)

    return _make(a.data.T.copy(), (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    in_shape = a.data.shape

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(in_shape))

    return _make(a.data.reshape(shape), (a,), backward)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    in_shape = a.data.shape

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, in_shape).astype(np.float64))
        else:
            gg = g if keepdims else np.expand_dims(g, axis=axis)
            a._accumulate(np.broadcast_to(gg, in_shape).astype(np.float64))

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def stack_rows(tensors) -> Tensor:
    """Stack same-length 1-D tensors into a matrix, one per row."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("stack_rows needs at least one tensor")
    for t in tensors:
        if t.data.ndim != 1 or t.data.shape != tensors[0].data.shape:
            raise ValueError("stack_rows requires 1-D tensors of equal length")
    out_data = np.stack([t.data for t in tensors], axis=0)

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(g[i])

    return _make(out_data, tuple(tensors), backward)


def concat_rows(tensors) -> Tensor:
    """Concatenate 2-D tensors along axis 0."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat_rows needs at least one tensor")
    out_data = np.concatenate([t.data for t in tensors], axis=0)
    offsets = np.cumsum([0] + [t.data.shape[0] for t in tensors])

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accumulate(g[offsets[i]:offsets[i + 1]])

    return _make(out_data, tuple(tensors), backward)


def slice_rows(a, start: int, stop: int) -> Tensor:
    a = as_tensor(a)
    in_shape = a.data.shape

    def backward(g):
        if a.requires_grad:
            full = np.zeros(in_shape)
            full[start:stop] = g
            a._accumulate(full)

    return _make(a.data[start:stop].copy(), (a,), backward)


# -- fused building blocks --------------------------------------------------


def affine(x, w, b) -> Tensor:
    """Row-batched affine map: out[r] = x[r] @ w + b."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ValueError(
            f"affine expects x[BxI], w[IxO], b[O]; got {x.data.shape}, "
            f"{w.data.shape}, {b.data.shape}"
        )
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"affine dimension mismatch: x{x.data.shape} w{w.data.shape} "
            f"b{b.data.shape}"
        )
    out_data = x.data @ w.data + b.data

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ w.data.T)
        if w.requires_grad:
            w._accumulate(x.data.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))

    return _make(out_data, (x, w, b), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _make(np.where(mask, x.data, 0.0), (x,), backward)


def set_max_pool(x) -> Tensor:
    """Column-wise max over the rows of an NxD matrix.

    Backward routes each gradient component to the first row attaining the
    maximum (lowest row index on ties), so the pass is deterministic.
    """
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"set_max_pool expects NxD, got shape {x.data.shape}")
    if x.data.shape[0] == 0:
        raise ValueError("set_max_pool over an empty set of rows")
    argmax = np.argmax(x.data, axis=0)
    out_data = x.data[argmax, np.arange(x.data.shape[1])]

    def backward(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[argmax, np.arange(x.data.shape[1])] = g
            x._accumulate(full)

    return _make(out_data, (x,), backward)


def l2_normalize(x) -> Tensor:
    """Scale a vector to unit Euclidean norm; differentiable."""
    x = as_tensor(x)
    if x.data.ndim != 1:
        raise ValueError(f"l2_normalize expects a vector, got shape {x.data.shape}")
    norm = float(np.linalg.norm(x.data))
    if norm == 0.0:
        raise ValueError("l2_normalize of a zero vector is undefined")
    out_data = x.data / norm

    def backward(g):
        if x.requires_grad:
            x._accumulate(g / norm - x.data * (x.data @ g) / norm**3)

    return _make(out_data, (x,), backward)


def l2_normalize_rows(x) -> Tensor:
    """Row-wise l2_normalize for a BxD matrix."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"l2_normalize_rows expects BxD, got {x.data.shape}")
    norms = np.linalg.norm(x.data, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("l2_normalize_rows hit a zero-norm row")
    out_data = x.data / norms

    def backward(g):
        if x.requires_grad:
            dots = np.sum(x.data * g, axis=1, keepdims=True)
            x._accumulate(g / norms - x.data * dots / norms**3)

    return _make(out_data, (x,), backward)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], max-stabilized."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2 or labels.ndim != 1 or labels.shape[0] != logits.data.shape[0]:
        raise ValueError(
            f"softmax_cross_entropy expects logits[BxC], labels[B]; got "
            f"{logits.data.shape} and {labels.shape}"
        )
    n, c = logits.data.shape
    if np.any(labels < 0) or np.any(labels >= c):
        raise ValueError(f"label out of range [0,{c}): {labels}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - logsumexp
    loss = -log_probs[np.arange(n), labels].mean()
    probs = np.exp(log_probs)

    def backward(g):
        if logits.requires_grad:
            grad = probs.copy()
            grad[np.arange(n), labels] -= 1.0
            logits._accumulate(g * grad / n)

    return _make(np.float64(loss), (logits,), backward)


def euclid_dist_rows(a, b) -> Tensor:
    """Per-row Euclidean distance between two BxD matrices.

    Backward uses (a-b)/max(d, 1e-12), which is the subgradient 0 at d=0
    instead of a division blow-up.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape or a.data.ndim != 2:
        raise ValueError(
            f"euclid_dist_rows expects matching BxD, got {a.data.shape} and "
            f"{b.data.shape}"
        )
    diff = a.data - b.data
    dist = np.linalg.norm(diff, axis=1)
    safe = np.maximum(dist, 1e-12)[:, None]

    def backward(g):
        unit = diff / safe
        if a.requires_grad:
            a._accumulate(g[:, None] * unit)
        if b.requires_grad:
            b._accumulate(-g[:, None] * unit)

    return _make(dist, (a, b), backward)


def check_finite(x: Tensor, context: str = "") -> Tensor:
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"non-finite values in {context or 'tensor'}")
    return x
