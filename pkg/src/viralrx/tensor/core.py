"""Tensors and the gradient tape.

A :class:`Tape` is a context manager.  While one is active, every primitive
applied to a tensor that requires a gradient appends a node (inputs, outputs,
vector-Jacobian product) to it.  Nodes are appended as they are computed, so
the list is already in topological order and :func:`backward` just walks it
in reverse.  Without an active tape nothing is recorded, which is how
evaluation runs.
"""

import threading

import numpy as np

from ..errors import NonFiniteError, StaleTapeError

_local = threading.local()


def _stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape():
    stack = _stack()
    return stack[-1] if stack else None


class Tensor:
    """A float64 array that may take part in gradient recording."""

    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}{flag}>"

    def __add__(self, other):
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)

    def __neg__(self):
        from .ops import mul

        return mul(self, -1.0)

    def __sub__(self, other):
        from .ops import add, mul

        return add(self, mul(as_tensor(other), -1.0))


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


class Tape:
    """Records primitive applications for one backward pass.

    ``check_finite=True`` makes every recorded primitive verify that its
    outputs are finite.
    """

    def __init__(self, check_finite=False):
        self.nodes = []
        self.check_finite = check_finite
        self.consumed = False
        self._produced = set()

    def __enter__(self):
        if self.consumed:
            raise StaleTapeError("tape already consumed by backward()")
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, op, inputs, outputs, vjp):
        if self.check_finite:
            for out in outputs:
                if not np.all(np.isfinite(out.data)):
                    raise NonFiniteError(f"{op}: non-finite output")
        self.nodes.append((op, inputs, outputs, vjp))
        for out in outputs:
            self._produced.add(id(out))

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss, params=None):
        return backward(self, loss, params)


def record(op, inputs, outputs, vjp):
    """Attach ``outputs`` to the active tape if any input needs a gradient.

    Returns True when recorded.  ``vjp`` receives one gradient per output and
    returns one gradient (or None) per input.
    """
    tape = active_tape()
    if tape is None or not any(t.requires_grad for t in inputs):
        return False
    for out in outputs:
        out.requires_grad = True
    tape.record(op, tuple(inputs), tuple(outputs), vjp)
    return True


def backward(tape, loss, params=None):
    """Run reverse-mode differentiation of scalar ``loss`` over ``tape``.

    Leaf tensors reached by the loss get their ``.grad`` set.  Any tensor in
    ``params`` that the loss does not reach gets a zero gradient.  Returns the
    list of gradients for ``params`` (or an empty list).  A tape can be
    differentiated once; a second call raises :class:`StaleTapeError`.
    """
    if tape.consumed:
        raise StaleTapeError("backward() called twice on the same tape; run a new forward")
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if id(loss) not in tape._produced:
        raise ValueError("loss was not produced on this tape")

    grads = {id(loss): np.ones_like(loss.data)}
    leaves = {}
    for op, inputs, outputs, vjp in reversed(tape.nodes):
        gouts = [grads.pop(id(o), None) for o in outputs]
        if all(g is None for g in gouts):
            continue
        gouts = [np.zeros_like(o.data) if g is None else g for o, g in zip(outputs, gouts)]
        gins = vjp(*gouts)
        for inp, g in zip(inputs, gins):
            if g is None or not inp.requires_grad:
                continue
            if g.shape != inp.shape:
                raise AssertionError(f"{op}: gradient shape {g.shape} != input shape {inp.shape}")
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
            if key not in tape._produced:
                leaves[key] = inp

    for key, leaf in leaves.items():
        leaf.grad = grads[key]
    out = []
    for p in params or ():
        if id(p) not in leaves:
            p.grad = np.zeros_like(p.data)
        out.append(p.grad)

    tape.consumed = True
    tape.nodes = []
    tape._produced = set()
    return out
