"""Reverse-mode differentiation over dense float64 matrices.

Every value is a 2-D ``Tensor`` (vectors are 1 x d rows, scalars are 1 x 1).
Computations are recorded on an explicit ``Tape``; ``backward`` replays the
tape in reverse and returns gradients for the tape's parameter leaves.

The primitive set is fixed: add, sub, neg, mul, div, matmul, transpose,
tanh, atanh, exp, row_norm, row_sum, total_sum, row_logsumexp, clamp_min,
clamp_max, gather_rows, segment_sum, set_rows and project_ball.  Everything
else in this package (Mobius arithmetic, attention, losses) is composed
from these, so a finite-difference check of the primitives localizes
gradient bugs.

Tapes are single-threaded; distinct tapes are independent, so concurrent
training runs on separate threads never share state.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

# Norms below this are treated as zero to avoid 0/0 at the origin.
MIN_NORM = 1e-15
# atanh inputs are clamped to [0, 1 - ATANH_EPS]; atanh diverges at 1.
ATANH_EPS = 1e-7
# Points are kept at squared-curvature-scaled norm <= 1 - BALL_EPS.
BALL_EPS = 1e-5


class Tensor:
    """A 2-D float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "requires_grad", "tape", "is_leaf")

    def __init__(self, data, requires_grad: bool = False, tape: "Tape | None" = None,
                 is_leaf: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim == 0:
            arr = arr.reshape(1, 1)
        if arr.ndim != 2:
            raise ValueError(f"Tensor must be 2-D, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.tape = tape
        self.is_leaf = is_leaf

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    """Wrap raw data as an untracked constant."""
    return Tensor(data)


class _Record:
    __slots__ = ("name", "inputs", "output", "backward_fn")

    def __init__(self, name: str, inputs: tuple[Tensor, ...], output: Tensor,
                 backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of primitive operations (operands precede results)."""

    def __init__(self, check_values: bool = True):
        self.records: list[_Record] = []
        self.check_values = check_values

    def leaf(self, data, requires_grad: bool = True) -> Tensor:
        """Create a parameter leaf tracked by this tape."""
        return Tensor(np.array(data, dtype=np.float64), requires_grad=requires_grad,
                      tape=self, is_leaf=True)


class Gradient:
    """Mapping from parameter leaves to gradient tensors of matching shape."""

    def __init__(self, grads: dict[Tensor, Tensor]):
        self._grads = grads

    def __getitem__(self, tensor: Tensor) -> Tensor:
        return self._grads[tensor]

    def __contains__(self, tensor: Tensor) -> bool:
        return tensor in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def items(self):
        return self._grads.items()


def _resolve_tape(inputs: tuple[Tensor, ...]) -> "Tape | None":
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError("operands belong to different tapes")
    return tape


def _apply(name: str, inputs: tuple[Tensor, ...], out_data: np.ndarray,
           backward_fn) -> Tensor:
    tape = _resolve_tape(inputs)
    needs = any(t.requires_grad for t in inputs)
    if tape is not None and needs:
        out = Tensor(out_data, requires_grad=True, tape=tape)
        tape.records.append(_Record(name, inputs, out, backward_fn))
        return out
    return Tensor(out_data)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum grad down to `shape` along axes that were broadcast."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and out.shape[0] > 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] > 1:
        out = out.sum(axis=1, keepdims=True)
    return out


# Elementwise arithmetic ------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _apply("add", (a, b), out, bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _apply("sub", (a, b), out, bwd)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        return (-g,)

    return _apply("neg", (a,), -a.data, bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data
    da, db = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bwd(g):
        return (_unbroadcast(g * db, a.shape) if need_a else None,
                _unbroadcast(g * da, b.shape) if need_b else None)

    return _apply("mul", (a, b), out, bwd)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data / b.data
    da, db = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bwd(g):
        return (_unbroadcast(g / db, a.shape) if need_a else None,
                _unbroadcast(-g * da / (db * db), b.shape) if need_b else None)

    return _apply("div", (a, b), out, bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data
    da, db = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def bwd(g):
        return (g @ db.T if need_a else None,
                da.T @ g if need_b else None)

    return _apply("matmul", (a, b), out, bwd)


# Nonlinear elementwise primitives -------------------------------------------

def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.tanh(a.data)
    saved = out

    def bwd(g):
        return (g * (1.0 - saved * saved),)

    return _apply("tanh", (a,), out, bwd)


def atanh(a: Tensor) -> Tensor:
    """atanh with input clamped to [0, 1 - ATANH_EPS]; zero gradient where clamped."""
    a = _as_tensor(a)
    clamped = np.clip(a.data, 0.0, 1.0 - ATANH_EPS)
    out = np.arctanh(clamped)
    inside = (a.data >= 0.0) & (a.data < 1.0 - ATANH_EPS)
    deriv = np.where(inside, 1.0 / (1.0 - clamped * clamped), 0.0)

    def bwd(g):
        return (g * deriv,)

    return _apply("atanh", (a,), out, bwd)


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)
    saved = out

    def bwd(g):
        return (g * saved,)

    return _apply("exp", (a,), out, bwd)


def clamp_min(a: Tensor, floor: float) -> Tensor:
    """max(a, floor) elementwise; gradient passes only where a > floor."""
    a = _as_tensor(a)
    out = np.maximum(a.data, floor)
    mask = (a.data > floor).astype(np.float64)

    def bwd(g):
        return (g * mask,)

    return _apply("clamp_min", (a,), out, bwd)


def clamp_max(a: Tensor, ceil: float) -> Tensor:
    """min(a, ceil) elementwise; gradient passes only where a < ceil."""
    a = _as_tensor(a)
    out = np.minimum(a.data, ceil)
    mask = (a.data < ceil).astype(np.float64)

    def bwd(g):
        return (g * mask,)

    return _apply("clamp_max", (a,), out, bwd)


# Reductions ------------------------------------------------------------------

def row_norm(a: Tensor) -> Tensor:
    """Euclidean norm of each row, shape (n, 1)."""
    a = _as_tensor(a)
    # einsum avoids materializing the squared matrix
    out = np.sqrt(np.einsum("ij,ij->i", a.data, a.data))[:, None]
    da = a.data
    safe = np.maximum(out, MIN_NORM)

    def bwd(g):
        return (g * da / safe,)

    return _apply("row_norm", (a,), out, bwd)


def row_sum(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=1, keepdims=True)
    cols = a.shape[1]

    def bwd(g):
        return (np.repeat(g, cols, axis=1),)

    return _apply("row_sum", (a,), out, bwd)


def total_sum(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = np.array([[a.data.sum()]])
    shape = a.shape

    def bwd(g):
        return (np.full(shape, g[0, 0]),)

    return _apply("total_sum", (a,), out, bwd)


def row_logsumexp(a: Tensor) -> Tensor:
    """log(sum(exp(row))) per row with max-shift, shape (n, 1)."""
    a = _as_tensor(a)
    shift = a.data.max(axis=1, keepdims=True)
    out = shift + np.log(np.exp(a.data - shift).sum(axis=1, keepdims=True))
    softmax = np.exp(a.data - out)

    def bwd(g):
        return (g * softmax,)

    return _apply("row_logsumexp", (a,), out, bwd)


# Structural primitives -------------------------------------------------------

def _scatter_add_rows(g: np.ndarray, idx: np.ndarray, n_rows: int) -> np.ndarray:
    out = np.empty((n_rows, g.shape[1]))
    for j in range(g.shape[1]):
        out[:, j] = np.bincount(idx, weights=g[:, j], minlength=n_rows)
    return out


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows a[idx]; backward scatter-adds into the source rows."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = a.data[idx]
    n_rows = a.shape[0]

    def bwd(g):
        return (_scatter_add_rows(g, idx, n_rows),)

    return _apply("gather_rows", (a,), out, bwd)


def segment_sum(a: Tensor, indptr: np.ndarray) -> Tensor:
    """Sum contiguous row segments; segment i is rows indptr[i]:indptr[i+1]."""
    a = _as_tensor(a)
    indptr = np.asarray(indptr, dtype=np.int64)
    lengths = np.diff(indptr)
    starts = indptr[:-1]
    if a.shape[0] and np.all(lengths > 0):
        out = np.add.reduceat(a.data, starts, axis=0)
    else:
        # empty segments: accumulate per target segment instead
        seg = np.repeat(np.arange(len(starts)), lengths)
        out = _scatter_add_rows(a.data, seg, len(starts))
    seg_ids = np.repeat(np.arange(len(starts)), lengths)

    def bwd(g):
        return (g[seg_ids],)

    return _apply("segment_sum", (a,), out, bwd)


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        return (g.T.copy(),)

    return _apply("transpose", (a,), a.data.T.copy(), bwd)


def set_rows(a: Tensor, idx: np.ndarray, rows: Tensor) -> Tensor:
    """Copy of `a` with a[idx] replaced by `rows`; idx entries must be unique."""
    a, rows = _as_tensor(a), _as_tensor(rows)
    idx = np.asarray(idx, dtype=np.int64)
    out = a.data.copy()
    out[idx] = rows.data

    def bwd(g):
        ga = g.copy()
        ga[idx] = 0.0
        return ga, g[idx]

    return _apply("set_rows", (a, rows), out, bwd)


def project_ball(a: Tensor, c: float) -> Tensor:
    """Rescale rows with norm > (1 - BALL_EPS)/sqrt(c) onto that radius.

    Gradient passes unchanged through untouched rows and is zero through
    rescaled ones (the clamp subgradient convention used across this package).
    """
    a = _as_tensor(a)
    if c <= 0.0:
        raise ValueError("project_ball requires positive curvature")
    max_norm = (1.0 - BALL_EPS) / np.sqrt(c)
    norms = np.linalg.norm(a.data, axis=1, keepdims=True)
    over = norms > max_norm
    if over.any():
        scale = np.where(over, max_norm / np.maximum(norms, MIN_NORM), 1.0)
        out = a.data * scale
    else:
        out = a.data
    keep = (~over).astype(np.float64)

    def bwd(g):
        return (g * keep,)

    return _apply("project_ball", (a,), out, bwd)


# Composites ------------------------------------------------------------------

def elu(a: Tensor) -> Tensor:
    """Exponential linear unit: t if t >= 0 else exp(t) - 1 (composite)."""
    a = _as_tensor(a)
    mask = constant((a.data >= 0.0).astype(np.float64))
    inv = constant(1.0 - mask.data)
    # exp argument is zeroed on the positive branch so it cannot overflow
    neg_part = sub(exp(mul(a, inv)), 1.0)
    return add(mul(a, mask), mul(neg_part, inv))


# Backward pass ---------------------------------------------------------------

def backward(loss: Tensor, tape: Tape) -> Gradient:
    """Gradients of a scalar loss for every requires_grad leaf on the tape."""
    if loss.shape != (1, 1):
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    if loss.tape is not tape:
        raise ValueError("loss was not produced on this tape")
    if not np.isfinite(loss.data[0, 0]):
        raise FloatingPointError("loss is not finite")

    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    leaves: dict[int, Tensor] = {}

    for record in reversed(tape.records):
        g = grads.pop(id(record.output), None)
        if g is None:
            continue
        input_grads = record.backward_fn(g)
        for tensor, gi in zip(record.inputs, input_grads):
            if gi is None or not tensor.requires_grad:
                continue
            if tape.check_values and not np.all(np.isfinite(gi)):
                raise FloatingPointError(
                    f"non-finite gradient produced by primitive '{record.name}'")
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
            if tensor.is_leaf:
                leaves[key] = tensor

    return Gradient({t: Tensor(grads[key]) for key, t in leaves.items()})


def finite_difference_check(f: Callable[[Tensor], Tensor], p, step: float = 1e-5) -> float:
    """Max relative error between backward() and central finite differences.

    `f` maps a Tensor to a scalar Tensor and must be evaluable at p +/- step
    perturbations.  Relative error uses a max(1, |analytic|) denominator.
    """
    if not (1e-7 <= step <= 1e-3):
        raise ValueError("step must lie in [1e-7, 1e-3]")
    p_data = np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64)
    if p_data.ndim == 1:
        p_data = p_data.reshape(1, -1)

    tape = Tape()
    leaf = tape.leaf(p_data.copy())
    analytic = backward(f(leaf), tape)[leaf].data

    numeric = np.zeros_like(p_data)
    flat = p_data.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        up = f(Tensor(p_data.copy())).item()
        flat[k] = orig - step
        down = f(Tensor(p_data.copy())).item()
        flat[k] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise FloatingPointError("non-finite evaluation in finite differences")
        numeric.reshape(-1)[k] = (up - down) / (2.0 * step)

    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(numeric - analytic) / denom))
