from typing import Optional, Sequence, Tuple

import numpy as np

from ..errors import ShapeError
from .tensor import Operation, Tensor


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Sums `grad` over the axes that numpy broadcasting added or stretched when
    an operand of the given shape took part in an elementwise operation.
    """
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class BinaryOperation(Operation):
    left: Tensor
    right: Tensor

    def __init__(self, left: Tensor, right: Tensor):
        super().__init__(left, right)
        self.left = left
        self.right = right

    def check_broadcast(self) -> None:
        try:
            np.broadcast_shapes(self.left.shape, self.right.shape)
        except ValueError:
            raise ShapeError(
                f"cannot broadcast {self.left.shape} with {self.right.shape}"
            )


class Add(BinaryOperation):

    """
    Elementwise sum with numpy broadcasting.
    """

    def forward(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        self.check_broadcast()
        return left + right

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (
            unbroadcast(grad, self.left.shape) if self.needs_grad(0) else None,
            unbroadcast(grad, self.right.shape) if self.needs_grad(1) else None,
        )


class Sub(BinaryOperation):
    def forward(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        self.check_broadcast()
        return left - right

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (
            unbroadcast(grad, self.left.shape) if self.needs_grad(0) else None,
            unbroadcast(-grad, self.right.shape) if self.needs_grad(1) else None,
        )


class Mul(BinaryOperation):

    """
    Elementwise product with numpy broadcasting. Multiplying by a Python
    scalar goes through here as well, the scalar becomes a constant tensor.
    """

    def forward(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        self.check_broadcast()
        return left * right

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        return (
            unbroadcast(grad * self.right.data, self.left.shape)
            if self.needs_grad(0)
            else None,
            unbroadcast(grad * self.left.data, self.right.shape)
            if self.needs_grad(1)
            else None,
        )


class MatMul(BinaryOperation):

    """
    Matrix product over the last two axes; leading axes broadcast like
    `numpy.matmul`, so a (d, e) weight can be applied to a (N, T, d) batch.
    """

    def forward(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        if left.ndim < 2 or right.ndim < 2:
            raise ShapeError(
                "matmul needs operands with at least two axes, "
                f"got {left.shape} @ {right.shape}"
            )
        if left.shape[-1] != right.shape[-2]:
            raise ShapeError(f"inner dims mismatch: {left.shape} @ {right.shape}")
        return left @ right

    def backward(self, grad: np.ndarray) -> Sequence[Optional[np.ndarray]]:
        left, right = self.left.data, self.right.data
        return (
            unbroadcast(grad @ np.swapaxes(right, -1, -2), left.shape)
            if self.needs_grad(0)
            else None,
            unbroadcast(np.swapaxes(left, -1, -2) @ grad, right.shape)
            if self.needs_grad(1)
            else None,
        )
