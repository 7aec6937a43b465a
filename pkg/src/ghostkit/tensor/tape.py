"""Differentiable tensors and the tape that records operations on them."""

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ghostkit.errors import ComputationError, ConfigError


class Precision(str, Enum):
    """Floating point precision used for tensor values."""
    FLOAT32 = "float32"
    FLOAT64 = "float64"


_settings = threading.local()


def get_precision() -> Precision:
    return getattr(_settings, "precision", Precision.FLOAT32)


def set_precision(value: Union[Precision, str]) -> None:
    """Select the precision of newly created tensors for the current thread."""
    _settings.precision = Precision(value)


@contextmanager
def precision(value: Union[Precision, str]) -> Iterator[None]:
    """Temporarily switch tensor precision (64-bit for gradient checks)."""
    previous = get_precision()
    set_precision(value)
    try:
        yield
    finally:
        set_precision(previous)


def default_dtype() -> np.dtype:
    return np.dtype(get_precision().value)


BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class DiffTensor:
    """Immutable dense array, optionally tracked by a :class:`Tape`.

    Values are stored row-major; ``node`` is the handle into the owning tape
    or ``None`` for constants.
    """

    __slots__ = ("values", "tape", "node")

    def __init__(self, values: np.ndarray, tape: Optional["Tape"] = None, node: Optional[int] = None):
        array = np.ascontiguousarray(values)
        if array.dtype.kind != "f":
            array = array.astype(default_dtype())
        # read-only view; the caller's array keeps its own flags
        array = array.view()
        array.setflags(write=False)
        self.values = array
        self.tape = tape
        self.node = node

    @classmethod
    def constant(cls, values: Union[np.ndarray, float, Sequence[float]]) -> "DiffTensor":
        """Copy ``values`` into an untracked tensor of the current precision."""
        return cls(np.array(values, dtype=default_dtype(), copy=True))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def numpy(self) -> np.ndarray:
        return self.values

    def item(self) -> float:
        return float(self.values.reshape(-1)[0]) if self.values.size == 1 else float("nan")

    def __add__(self, other: "Operand") -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: "Operand") -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other: "Operand") -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.sub(other, self)

    def __mul__(self, other: "Operand") -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other: "DiffTensor") -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.matmul(self, other)

    def sum(self) -> "DiffTensor":
        from ghostkit.tensor import ops
        return ops.total(self)

    def reshape(self, *shape: int) -> "DiffTensor":
        from ghostkit.tensor import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def __repr__(self) -> str:
        where = f"node={self.node}" if self.tracked else "constant"
        return f"DiffTensor(shape={self.shape}, dtype={self.values.dtype}, {where})"


Operand = Union[DiffTensor, float, int, np.ndarray]


@dataclass
class _Record:
    """One recorded operation."""
    inputs: Tuple[Optional[int], ...]
    output: int
    backward: BackwardRule
    name: str


@dataclass
class Tape:
    """Ordered log of operations for reverse-mode differentiation.

    A tape is owned by a single training step; records are appended in
    execution order, so every input precedes the operation consuming it.
    """

    records: List[_Record] = field(default_factory=list)
    _next_node: int = 0

    def _allocate(self) -> int:
        node = self._next_node
        self._next_node += 1
        return node

    def variable(self, values: Union[np.ndarray, float, Sequence[float]]) -> DiffTensor:
        """Create a tracked leaf tensor (a copy of ``values``)."""
        return DiffTensor(np.array(values, dtype=default_dtype(), copy=True), self, self._allocate())

    def watch(self, tensor: DiffTensor) -> DiffTensor:
        """Return a tracked leaf sharing the values of an untracked tensor."""
        if tensor.tape is self:
            return tensor
        return DiffTensor(tensor.values, self, self._allocate())

    def record(
        self,
        name: str,
        inputs: Sequence[DiffTensor],
        values: np.ndarray,
        backward: BackwardRule,
    ) -> DiffTensor:
        output = self._allocate()
        self.records.append(
            _Record(
                inputs=tuple(t.node if t.tape is self else None for t in inputs),
                output=output,
                backward=backward,
                name=name,
            )
        )
        return DiffTensor(values, self, output)

    def gradient(self, target: DiffTensor, sources: Sequence[DiffTensor]) -> List[np.ndarray]:
        """Gradients of scalar ``target`` with respect to each of ``sources``.

        Gradients accumulate in 64-bit and are returned in 64-bit; a source
        the target does not depend on receives zeros.
        """
        if target.tape is not self:
            raise ConfigError("gradient target is not recorded on this tape")
        if target.size != 1:
            raise ConfigError(f"gradient target must be a scalar, got shape {target.shape}")

        grads: Dict[int, np.ndarray] = {target.node: np.ones(target.shape, dtype=np.float64)}
        for record in reversed(self.records):
            upstream = grads.pop(record.output, None)
            if upstream is None:
                continue
            contributions = record.backward(upstream)
            for node, contribution in zip(record.inputs, contributions):
                if node is None or contribution is None:
                    continue
                contribution = np.asarray(contribution, dtype=np.float64)
                if node in grads:
                    grads[node] = grads[node] + contribution
                else:
                    grads[node] = contribution

        result = []
        for source in sources:
            if source.tape is not self:
                raise ConfigError("gradient source is not recorded on this tape")
            grad = grads.get(source.node)
            if grad is None:
                grad = np.zeros(source.shape, dtype=np.float64)
            if not np.all(np.isfinite(grad)):
                raise ComputationError(f"non-finite gradient for node {source.node}")
            result.append(grad.reshape(source.shape))
        return result


def emit(name: str, inputs: Sequence[DiffTensor], values: np.ndarray, backward: BackwardRule) -> DiffTensor:
    """Wrap an op result, recording it when any input is tracked."""
    tape = None
    for tensor in inputs:
        if tensor.tape is not None:
            if tape is not None and tensor.tape is not tape:
                raise ConfigError(f"{name}: operands are recorded on different tapes")
            tape = tensor.tape
    if tape is None:
        return DiffTensor(values)
    return tape.record(name, inputs, values, backward)
