import abc
import contextlib
import threading
from typing import Any, Iterator, Optional, Sequence, Tuple, Type

import numpy as np

_state = threading.local()


def default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextlib.contextmanager
def precision(dtype: Any) -> Iterator[None]:
    """
    Sets the dtype used for tensors created from Python values on this
    thread. Gradient checks run under `precision(np.float64)`.
    """
    previous = default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:

    """
    A dense array that optionally records the operation that produced it, so
    that gradients can be propagated back to the leaves it was computed from.

    Leaves created with `requires_grad=True` accumulate gradients into `grad`
    on every backward pass until `zero_grad` is called.
    """

    def __init__(
        self, data: Any, requires_grad: bool = False, dtype: Optional[Any] = None
    ):
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype.kind == "f":
                dtype = data.dtype
            else:
                dtype = default_dtype()
        self.data = np.asarray(data, dtype=dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.operation: Optional["Operation"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        return (
            f"Tensor(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad})"
        )

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self) -> None:
        from .graph import backward

        backward(self)

    def __add__(self, right: Any) -> "Tensor":
        from .operators import Add

        return apply(Add, self, right)

    def __radd__(self, left: Any) -> "Tensor":
        from .operators import Add

        return apply(Add, left, self)

    def __sub__(self, right: Any) -> "Tensor":
        from .operators import Sub

        return apply(Sub, self, right)

    def __rsub__(self, left: Any) -> "Tensor":
        from .operators import Sub

        return apply(Sub, left, self)

    def __mul__(self, right: Any) -> "Tensor":
        from .operators import Mul

        return apply(Mul, self, right)

    def __rmul__(self, left: Any) -> "Tensor":
        from .operators import Mul

        return apply(Mul, left, self)

    def __matmul__(self, right: Any) -> "Tensor":
        from .operators import MatMul

        return apply(MatMul, self, right)

    def __neg__(self) -> "Tensor":
        from .functions import Neg

        return apply(Neg, self)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        from .functions import Sum

        return apply(Sum, self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        from .functions import Mean

        return apply(Mean, self, axis=axis, keepdims=keepdims)

    def relu(self) -> "Tensor":
        from .functions import Relu

        return apply(Relu, self)

    def tanh(self) -> "Tensor":
        from .functions import Tanh

        return apply(Tanh, self)

    def sigmoid(self) -> "Tensor":
        from .functions import Sigmoid

        return apply(Sigmoid, self)

    def softmax(self) -> "Tensor":
        """
        Softmax over the last axis.
        """
        from .functions import Softmax

        return apply(Softmax, self)

    def log(self) -> "Tensor":
        from .functions import Log

        return apply(Log, self)

    def reshape(self, *shape: int) -> "Tensor":
        from .functions import Reshape

        return apply(Reshape, self, shape=shape)

    def transpose(self, *axes: int) -> "Tensor":
        from .functions import Transpose

        return apply(Transpose, self, axes=axes)


class Operation(abc.ABC):

    """
    A recorded operation. `forward` computes the output from the raw input
    arrays, `backward` maps the gradient of the output to one gradient per
    input (or `None` for inputs that do not need one).
    """

    def __init__(self, *inputs: Tensor):
        self.inputs = inputs

    @abc.abstractmethod
    def forward(self, *values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abc.abstractmethod
    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        raise NotImplementedError

    def needs_grad(self, index: int) -> bool:
        return self.inputs[index].requires_grad


def to_tensor(value: Any, dtype: Optional[Any] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype or default_dtype()))


def apply(operation: Type[Operation], *operands: Any, **kwargs: Any) -> Tensor:
    dtype = next(
        (o.data.dtype for o in operands if isinstance(o, Tensor)), default_dtype()
    )
    inputs = [to_tensor(o, dtype) for o in operands]
    op = operation(*inputs, **kwargs)
    out = Tensor(np.asarray(op.forward(*[t.data for t in inputs]), dtype=dtype))
    if grad_enabled() and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.operation = op
    return out
