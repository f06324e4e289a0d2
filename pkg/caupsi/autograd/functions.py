from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NumericalInputError, ShapeError, ContractError
from .tensor import Operation, Tensor, apply

LOG_FLOOR = 1e-12


class Function(Operation):
    pass


class UnaryFunction(Function):
    def __init__(self, x: Tensor):
        super().__init__(x)
        self.x = x


class Neg(UnaryFunction):
    def forward(self, x: np.ndarray) -> np.ndarray:
        return -x

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (-grad,)


class Sum(UnaryFunction):
    def __init__(self, x: Tensor, axis: Optional[int] = None, keepdims: bool = False):
        super().__init__(x)
        self.axis = axis
        self.keepdims = keepdims

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.sum(axis=self.axis, keepdims=self.keepdims)

    def expand(self, grad: np.ndarray) -> np.ndarray:
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return np.broadcast_to(grad, self.x.shape)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (np.array(self.expand(grad)),)


class Mean(Sum):
    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.mean(axis=self.axis, keepdims=self.keepdims)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        count = self.x.data.size if self.axis is None else self.x.shape[self.axis]
        return (self.expand(grad) / count,)


class Relu(UnaryFunction):
    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * (self.x.data > 0),)


class Tanh(UnaryFunction):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.y = np.tanh(x)
        return self.y

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * (1 - self.y * self.y),)


class Sigmoid(UnaryFunction):
    def forward(self, x: np.ndarray) -> np.ndarray:
        # the tanh form does not overflow for large |x|
        self.y = 0.5 * (1 + np.tanh(0.5 * x))
        return self.y

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * self.y * (1 - self.y),)


class Softmax(UnaryFunction):

    """
    Softmax over the last axis, computed on max-shifted inputs.
    """

    def forward(self, x: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(x)):
            raise NumericalInputError("softmax received non-finite input")
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        self.y = e / e.sum(axis=-1, keepdims=True)
        return self.y

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        y = self.y
        return (y * (grad - (grad * y).sum(axis=-1, keepdims=True)),)


class Log(UnaryFunction):

    """
    Natural logarithm with the argument clamped at 1e-12; the clamped region
    has zero gradient.
    """

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.log(np.maximum(x, LOG_FLOOR))

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        x = self.x.data
        return (np.where(x > LOG_FLOOR, grad / np.maximum(x, LOG_FLOOR), 0),)


class Reshape(UnaryFunction):
    def __init__(self, x: Tensor, shape: Tuple[int, ...]):
        super().__init__(x)
        self.shape = shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        try:
            return x.reshape(self.shape)
        except ValueError:
            raise ShapeError(f"cannot reshape {x.shape} to {self.shape}")

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad.reshape(self.x.shape),)


class Transpose(UnaryFunction):
    def __init__(self, x: Tensor, axes: Tuple[int, ...]):
        super().__init__(x)
        self.axes = axes or tuple(reversed(range(x.ndim)))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.transpose(self.axes)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad.transpose(np.argsort(self.axes)),)


class Slice(UnaryFunction):

    """
    Selects `[start, stop)` along the last axis.
    """

    def __init__(self, x: Tensor, start: int, stop: int):
        super().__init__(x)
        self.start = start
        self.stop = stop

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.start : self.stop]

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        full = np.zeros_like(self.x.data)
        full[..., self.start : self.stop] = grad
        return (full,)


class Dropout(UnaryFunction):
    def __init__(self, x: Tensor, mask: np.ndarray):
        super().__init__(x)
        self.mask = mask

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x * self.mask

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (grad * self.mask,)


class GradReversal(UnaryFunction):

    """
    Identity in the forward pass; multiplies the incoming gradient by
    `-scale` in the backward pass.
    """

    def __init__(self, x: Tensor, scale: float):
        super().__init__(x)
        self.scale = scale

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.copy()

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (-self.scale * grad,)


class Concat(Function):

    """
    Concatenation along the last axis.
    """

    def forward(self, *values: np.ndarray) -> np.ndarray:
        leading = {v.shape[:-1] for v in values}
        if len(leading) != 1:
            raise ShapeError(
                f"concat needs equal leading shapes, got {[v.shape for v in values]}"
            )
        self.sizes = [v.shape[-1] for v in values]
        return np.concatenate(values, axis=-1)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return np.split(grad, np.cumsum(self.sizes)[:-1], axis=-1)


class Stack(Function):
    def __init__(self, *inputs: Tensor, axis: int = 0):
        super().__init__(*inputs)
        self.axis = axis

    def forward(self, *values: np.ndarray) -> np.ndarray:
        if len({v.shape for v in values}) != 1:
            shapes = [v.shape for v in values]
            raise ShapeError(f"stack needs equal shapes, got {shapes}")
        return np.stack(values, axis=self.axis)

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return [np.take(grad, i, axis=self.axis) for i in range(len(self.inputs))]


class LayerNorm(Function):

    """
    Layer normalization over the last axis with population variance:
    `gamma * (x - mean) / sqrt(var + eps) + beta`.
    """

    def __init__(self, x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5):
        super().__init__(x, gamma, beta)
        if not x.shape[-1] == gamma.shape[-1] == beta.shape[-1]:
            raise ShapeError(
                f"layer_norm length mismatch: {x.shape}, {gamma.shape}, {beta.shape}"
            )
        if eps <= 0:
            raise ContractError("layer_norm needs eps > 0")
        self.eps = eps

    def forward(self, x: np.ndarray, gamma: np.ndarray, beta: np.ndarray) -> np.ndarray:
        centered = x - x.mean(axis=-1, keepdims=True)
        var = (centered * centered).mean(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + self.eps)
        self.normalized = centered * self.inv_std
        return gamma * self.normalized + beta

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        from .operators import unbroadcast

        x, gamma, beta = self.inputs
        xhat = self.normalized
        dxhat = grad * gamma.data
        dx = self.inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return (
            dx,
            unbroadcast(grad * xhat, gamma.shape) if gamma.requires_grad else None,
            unbroadcast(grad, beta.shape) if beta.requires_grad else None,
        )


def concat(tensors: Sequence[Any]) -> Tensor:
    return apply(Concat, *tensors)


def stack(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    return apply(Stack, *tensors, axis=axis)


def split(x: Tensor, sizes: Sequence[int]) -> List[Tensor]:
    """
    Splits `x` along the last axis into pieces of the given sizes; the inverse
    of `concat`.
    """
    if sum(sizes) != x.shape[-1]:
        raise ShapeError(f"split sizes {list(sizes)} do not add up to {x.shape[-1]}")
    pieces = []
    start = 0
    for size in sizes:
        pieces.append(apply(Slice, x, start=start, stop=start + size))
        start += size
    return pieces


def layer_norm(x: Tensor, gamma: Any, beta: Any, eps: float = 1e-5) -> Tensor:
    return apply(LayerNorm, x, gamma, beta, eps=eps)


def dropout(
    x: Tensor, p: float, train: bool, rng: Optional[np.random.Generator] = None
) -> Tensor:
    """
    Inverted dropout: in train mode every entry is zeroed with probability `p`
    and the survivors are scaled by 1/(1-p); in eval mode `x` is returned as is.
    """
    if not train or p == 0:
        return x
    if not 0 <= p < 1:
        raise ContractError(f"dropout probability must be in [0, 1), got {p}")
    if rng is None:
        raise ContractError("dropout in train mode needs a random generator")
    keep = rng.random(x.shape) >= p
    mask = (keep / (1.0 - p)).astype(x.dtype)
    return apply(Dropout, x, mask=mask)


def grl(x: Tensor, lambda_grl: float) -> Tensor:
    if lambda_grl < 0:
        raise ContractError("the gradient reversal scale must be non-negative")
    return apply(GradReversal, x, scale=lambda_grl)
