"""
Reverse-mode automatic differentiation over an append-only tape
Array-valued nodes, elementwise scalar derivative rules, and second-order
support: with create_graph=True the backward sweep is itself recorded, so
a gradient can be differentiated again (double backprop).
"""

import contextlib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from core.errors import ContractError, ShapeError


@dataclass
class Node:
    """One operation record on the tape."""
    op: str
    parents: Tuple[int, ...]
    value: np.ndarray
    requires_grad: bool
    attrs: Dict[str, Any] = field(default_factory=dict)


class Var:
    """Handle on a tape node, or a detached constant when index is None."""

    __slots__ = ('tape', 'index', '_value')
    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, tape: Optional['Tape'], index: Optional[int], value: np.ndarray):
        self.tape = tape
        self.index = index
        self._value = value

    @property
    def value(self) -> np.ndarray:
        return self._value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._value.shape

    @property
    def ndim(self) -> int:
        return self._value.ndim

    @property
    def size(self) -> int:
        return self._value.size

    @property
    def requires_grad(self) -> bool:
        return self.index is not None and self.tape.nodes[self.index].requires_grad

    @property
    def T(self) -> 'Var':
        return transpose(self)

    def __repr__(self) -> str:
        return f"Var(index={self.index}, shape={self.shape})"

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __rmatmul__(self, other): return matmul(other, self)

    def sum(self, axis=None, keepdims: bool = False) -> 'Var':
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> 'Var':
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> 'Var':
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


Operand = Union[Var, np.ndarray, float, int]


class Tape:
    """
    Append-only operation record in topological order.

    Leaves are created with variable(); constants that feed a recorded
    operation are materialized as 'const' nodes so replay() can recompute
    every value from the records alone.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.bindings: Dict[str, Any] = {}
        self._recording = True

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def values(self) -> List[np.ndarray]:
        return [node.value for node in self.nodes]

    @property
    def recording(self) -> bool:
        return self._recording

    def variable(self, value: Any) -> Var:
        """Create a leaf that gradients can be taken with respect to."""
        array = np.array(value, dtype=float)
        self.nodes.append(Node('leaf', (), array, True))
        return Var(self, len(self.nodes) - 1, array)

    def constant(self, value: Any) -> Var:
        """Create a detached constant bound to this tape."""
        return Var(self, None, np.asarray(value, dtype=float))

    @contextlib.contextmanager
    def paused(self):
        """Evaluate operations without recording them."""
        previous = self._recording
        self._recording = False
        try:
            yield self
        finally:
            self._recording = previous

    def _index_of(self, operand: Var) -> int:
        if operand.index is not None:
            if operand.tape is not self:
                raise ContractError("Var belongs to a different tape")
            return operand.index
        self.nodes.append(Node('const', (), operand.value, False))
        return len(self.nodes) - 1

    def _record(self, op: str, inputs: Sequence[Var], value: np.ndarray, attrs: Dict[str, Any]) -> Var:
        parents = tuple(self._index_of(v) for v in inputs)
        self.nodes.append(Node(op, parents, value, True, attrs))
        return Var(self, len(self.nodes) - 1, value)

    def replay(self) -> List[np.ndarray]:
        """Recompute every node value from the operation records."""
        values: List[np.ndarray] = []
        for node in self.nodes:
            if node.op in ('leaf', 'const'):
                values.append(node.value)
            else:
                forward = _OPS[node.op][0]
                values.append(forward(*[values[p] for p in node.parents], **node.attrs))
        return values

    def gradient(
        self,
        output: Var,
        wrt: Sequence[Var],
        create_graph: bool = False
    ) -> List[Union[np.ndarray, Var]]:
        """
        Reverse sweep from a scalar output.

        Returns arrays, or Vars when create_graph is True so the result can
        be differentiated again.
        """
        if output.size != 1:
            raise ContractError(f"Gradient root must be scalar, got shape {output.shape}")

        targets = [w.index for w in wrt]
        if output.index is None or output.tape is not self:
            return [self._zero_grad(w, create_graph) for w in wrt]

        root = output.index
        influenced = self._influenced(root, [t for t in targets if t is not None])

        grads: Dict[int, Var] = {root: Var(self, None, np.ones_like(output.value))}
        sweep = contextlib.nullcontext() if create_graph else self.paused()
        with sweep:
            for idx in range(root, -1, -1):
                upstream = grads.get(idx)
                if upstream is None or not influenced[idx]:
                    continue
                node = self.nodes[idx]
                if node.op in ('leaf', 'const'):
                    continue
                parent_vars = [Var(self, p, self.nodes[p].value) for p in node.parents]
                out_var = Var(self, idx, node.value)
                vjp = _OPS[node.op][1]
                parent_grads = vjp(upstream, parent_vars, out_var, **node.attrs)
                for p, pg in zip(node.parents, parent_grads):
                    if pg is None or not influenced[p]:
                        continue
                    grads[p] = grads[p] + pg if p in grads else pg

        results: List[Union[np.ndarray, Var]] = []
        for w, t in zip(wrt, targets):
            g = grads.get(t) if t is not None else None
            if g is None:
                results.append(self._zero_grad(w, create_graph))
            else:
                results.append(g if create_graph else np.array(g.value, dtype=float))
        return results

    def _influenced(self, root: int, sources: List[int]) -> np.ndarray:
        mask = np.zeros(root + 1, dtype=bool)
        if not sources:
            return mask
        for s in sources:
            if s <= root:
                mask[s] = True
        start = min(sources)
        for idx in range(start + 1, root + 1):
            if mask[idx]:
                continue
            parents = self.nodes[idx].parents
            if parents and any(mask[p] for p in parents):
                mask[idx] = True
        return mask

    def _zero_grad(self, w: Var, create_graph: bool):
        zeros = np.zeros_like(w.value, dtype=float)
        return Var(self, None, zeros) if create_graph else zeros


def grad(output: Var, wrt: Sequence[Var], create_graph: bool = False) -> List[Union[np.ndarray, Var]]:
    """Gradient of a scalar Var with respect to leaves of the same tape."""
    if output.tape is None:
        return [np.zeros_like(w.value) for w in wrt]
    return output.tape.gradient(output, wrt, create_graph=create_graph)


# ---------------------------------------------------------------------------
# Operation registry: name -> (forward(*arrays, **attrs), vjp(g, inputs, out, **attrs))
# ---------------------------------------------------------------------------

_OPS: Dict[str, Tuple[Callable, Callable]] = {}


def _register(name: str, forward: Callable, vjp: Callable):
    _OPS[name] = (forward, vjp)


def _as_var(x: Operand, tape: Optional[Tape]) -> Var:
    if isinstance(x, Var):
        return x
    return Var(tape, None, np.asarray(x, dtype=float))


def _apply(op: str, operands: Sequence[Operand], **attrs) -> Var:
    tape: Optional[Tape] = None
    for x in operands:
        if isinstance(x, Var) and x.tape is not None:
            if tape is None:
                tape = x.tape
            elif x.tape is not tape and x.index is not None:
                raise ContractError("Operands belong to different tapes")
    inputs = [_as_var(x, tape) for x in operands]
    forward = _OPS[op][0]
    value = forward(*[v.value for v in inputs], **attrs)
    if tape is None or not tape.recording or not any(v.requires_grad for v in inputs):
        return Var(tape, None, value)
    return tape._record(op, inputs, value, attrs)


def _unbroadcast(value: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    shape = tuple(shape)
    if value.shape == shape:
        return value.copy()
    while value.ndim > len(shape):
        value = value.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and value.shape[axis] != 1:
            value = value.sum(axis=axis, keepdims=True)
    return value.reshape(shape)


def _maybe_sum_to(g: Var, shape: Tuple[int, ...]) -> Var:
    return g if g.shape == tuple(shape) else sum_to(g, shape)


# linear structure ops

def add(a: Operand, b: Operand) -> Var:
    return _apply('add', (a, b))


def sub(a: Operand, b: Operand) -> Var:
    return _apply('sub', (a, b))


def mul(a: Operand, b: Operand) -> Var:
    return _apply('mul', (a, b))


def div(a: Operand, b: Operand) -> Var:
    return _apply('div', (a, b))


def neg(a: Operand) -> Var:
    return _apply('neg', (a,))


def matmul(a: Operand, b: Operand) -> Var:
    a_shape = np.shape(a.value if isinstance(a, Var) else a)
    b_shape = np.shape(b.value if isinstance(b, Var) else b)
    if len(a_shape) != 2 or len(b_shape) != 2 or a_shape[1] != b_shape[0]:
        raise ShapeError(f"matmul expects (n,k)@(k,m), got {a_shape} @ {b_shape}")
    return _apply('matmul', (a, b))


def transpose(a: Operand) -> Var:
    return _apply('transpose', (a,))


def _normalize_axis(axis, ndim: int):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(ax % ndim for ax in axis))


def sum_(a: Operand, axis=None, keepdims: bool = False) -> Var:
    ndim = np.ndim(a.value if isinstance(a, Var) else a)
    return _apply('sum', (a,), axis=_normalize_axis(axis, ndim), keepdims=keepdims)


def mean(a: Operand, axis=None, keepdims: bool = False) -> Var:
    value = a.value if isinstance(a, Var) else np.asarray(a, dtype=float)
    axes = _normalize_axis(axis, value.ndim)
    count = value.size if axes is None else int(np.prod([value.shape[ax] for ax in axes]))
    return mul(sum_(a, axis=axes, keepdims=keepdims), 1.0 / max(count, 1))


def reshape(a: Operand, shape) -> Var:
    return _apply('reshape', (a,), shape=tuple(shape))


def broadcast_to(a: Operand, shape) -> Var:
    return _apply('broadcast_to', (a,), shape=tuple(shape))


def sum_to(a: Operand, shape) -> Var:
    return _apply('sum_to', (a,), shape=tuple(shape))


def take_rows(a: Operand, idx: np.ndarray) -> Var:
    return _apply('take_rows', (a,), idx=np.asarray(idx, dtype=np.int64))


def scatter_rows(a: Operand, idx: np.ndarray, n_rows: int) -> Var:
    return _apply('scatter_rows', (a,), idx=np.asarray(idx, dtype=np.int64), n_rows=int(n_rows))


def slice_cols(a: Operand, start: int, stop: int) -> Var:
    return _apply('slice_cols', (a,), start=int(start), stop=int(stop))


def pad_cols(a: Operand, start: int, total: int) -> Var:
    return _apply('pad_cols', (a,), start=int(start), total=int(total))


def concat_cols(parts: Sequence[Operand]) -> Var:
    widths = [np.shape(p.value if isinstance(p, Var) else p)[1] for p in parts]
    return _apply('concat_cols', tuple(parts), widths=tuple(widths))


# elementwise nonlinearities

def tanh(a: Operand) -> Var:
    return _apply('tanh', (a,))


def relu(a: Operand) -> Var:
    return _apply('relu', (a,))


def softplus(a: Operand) -> Var:
    return _apply('softplus', (a,))


def sigmoid(a: Operand) -> Var:
    return _apply('sigmoid', (a,))


def square(a: Operand) -> Var:
    return _apply('square', (a,))


def sqrt(a: Operand) -> Var:
    return _apply('sqrt', (a,))


def abs_(a: Operand) -> Var:
    return _apply('abs', (a,))


def exp(a: Operand) -> Var:
    return _apply('exp', (a,))


def log(a: Operand) -> Var:
    return _apply('log', (a,))


_register(
    'add',
    lambda a, b: a + b,
    lambda g, ins, out: [_maybe_sum_to(g, ins[0].shape), _maybe_sum_to(g, ins[1].shape)],
)
_register(
    'sub',
    lambda a, b: a - b,
    lambda g, ins, out: [_maybe_sum_to(g, ins[0].shape), _maybe_sum_to(neg(g), ins[1].shape)],
)
_register(
    'mul',
    lambda a, b: a * b,
    lambda g, ins, out: [_maybe_sum_to(g * ins[1], ins[0].shape), _maybe_sum_to(g * ins[0], ins[1].shape)],
)
_register(
    'div',
    lambda a, b: a / b,
    lambda g, ins, out: [
        _maybe_sum_to(g / ins[1], ins[0].shape),
        _maybe_sum_to(neg(g * out / ins[1]), ins[1].shape),
    ],
)
_register('neg', lambda a: -a, lambda g, ins, out: [neg(g)])
_register(
    'matmul',
    lambda a, b: a @ b,
    lambda g, ins, out: [matmul(g, transpose(ins[1])), matmul(transpose(ins[0]), g)],
)
_register('transpose', lambda a: a.T.copy(), lambda g, ins, out: [transpose(g)])


def _sum_forward(a, axis=None, keepdims=False):
    return np.asarray(np.sum(a, axis=axis, keepdims=keepdims), dtype=float)


def _sum_vjp(g, ins, out, axis=None, keepdims=False):
    shape = ins[0].shape
    if axis is not None and not keepdims:
        kept = list(shape)
        for ax in axis:
            kept[ax] = 1
        g = reshape(g, tuple(kept))
    return [broadcast_to(g, shape)]


_register('sum', _sum_forward, _sum_vjp)
_register(
    'reshape',
    lambda a, shape: a.reshape(shape).copy(),
    lambda g, ins, out, shape: [reshape(g, ins[0].shape)],
)
_register(
    'broadcast_to',
    lambda a, shape: np.broadcast_to(a, shape).copy(),
    lambda g, ins, out, shape: [sum_to(g, ins[0].shape)],
)
_register(
    'sum_to',
    lambda a, shape: _unbroadcast(a, shape),
    lambda g, ins, out, shape: [broadcast_to(g, ins[0].shape)],
)


def _scatter_forward(a, idx, n_rows):
    result = np.zeros((n_rows,) + a.shape[1:], dtype=float)
    np.add.at(result, idx, a)
    return result


_register(
    'take_rows',
    lambda a, idx: a[idx].copy(),
    lambda g, ins, out, idx: [scatter_rows(g, idx, ins[0].shape[0])],
)
_register(
    'scatter_rows',
    _scatter_forward,
    lambda g, ins, out, idx, n_rows: [take_rows(g, idx)],
)


def _pad_forward(a, start, total):
    result = np.zeros((a.shape[0], total), dtype=float)
    result[:, start:start + a.shape[1]] = a
    return result


_register(
    'slice_cols',
    lambda a, start, stop: a[:, start:stop].copy(),
    lambda g, ins, out, start, stop: [pad_cols(g, start, ins[0].shape[1])],
)
_register(
    'pad_cols',
    _pad_forward,
    lambda g, ins, out, start, total: [slice_cols(g, start, start + ins[0].shape[1])],
)


def _concat_vjp(g, ins, out, widths):
    grads = []
    offset = 0
    for width in widths:
        grads.append(slice_cols(g, offset, offset + width))
        offset += width
    return grads


_register('concat_cols', lambda *parts, widths: np.concatenate(parts, axis=1), _concat_vjp)

_register('tanh', np.tanh, lambda g, ins, out: [g * (1.0 - square(out))])
_register(
    'relu',
    lambda a: np.maximum(a, 0.0),
    lambda g, ins, out: [g * (ins[0].value > 0.0).astype(float)],
)
_register('softplus', lambda a: np.logaddexp(0.0, a), lambda g, ins, out: [g * sigmoid(ins[0])])
_register('sigmoid', expit, lambda g, ins, out: [g * out * (1.0 - out)])
_register('square', np.square, lambda g, ins, out: [g * ins[0] * 2.0])
_register('sqrt', np.sqrt, lambda g, ins, out: [g * 0.5 / out])
_register('abs', np.abs, lambda g, ins, out: [g * np.sign(ins[0].value)])
_register('exp', np.exp, lambda g, ins, out: [g * out])
_register('log', np.log, lambda g, ins, out: [g / ins[0]])


__all__ = [
    'Node', 'Var', 'Tape', 'grad',
    'add', 'sub', 'mul', 'div', 'neg', 'matmul', 'transpose', 'sum_', 'mean',
    'reshape', 'broadcast_to', 'sum_to', 'take_rows', 'scatter_rows',
    'slice_cols', 'pad_cols', 'concat_cols',
    'tanh', 'relu', 'softplus', 'sigmoid', 'square', 'sqrt', 'abs_', 'exp', 'log',
]
