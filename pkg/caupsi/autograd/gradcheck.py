from typing import Callable, Mapping, Optional

import numpy as np

from ..errors import ContractError
from .graph import backward
from .tensor import Tensor, no_grad, precision


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """
    max |analytic - numeric| / max(1, |numeric|) over all coordinates.
    """
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / scale))


def _check_step(h: float) -> None:
    if not 1e-6 <= h <= 1e-3:
        raise ContractError(f"finite-difference step must be in [1e-6, 1e-3], got {h}")


def grad_check(f: Callable[[Tensor], Tensor], x: np.ndarray, h: float = 1e-4) -> float:
    """
    Compares the gradient of the scalar function `f` at `x` obtained by
    backpropagation with central finite differences, in 64-bit precision.
    Returns the maximum relative error.
    """
    _check_step(h)
    with precision(np.float64):
        values = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
        leaf = Tensor(values.copy(), requires_grad=True)
        backward(f(leaf))
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(values)
        numeric = np.zeros_like(values)
        flat = values.reshape(-1)
        with no_grad():
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + h
                upper = float(f(Tensor(values)).data)
                flat[i] = original - h
                lower = float(f(Tensor(values)).data)
                flat[i] = original
                numeric.flat[i] = (upper - lower) / (2 * h)
    return relative_error(analytic, numeric)


def grad_check_leaves(
    loss: Callable[[], Tensor],
    leaves: Mapping[str, Tensor],
    count: int,
    rng: np.random.Generator,
    h: float = 1e-4,
    paths: Optional[list] = None,
) -> float:
    """
    Gradient check against `count` randomly chosen coordinates of the given
    leaf tensors (for instance the trainable entries of a parameter store).
    `loss` recomputes the scalar loss from the current leaf values. The
    leaves must already hold 64-bit data.
    """
    _check_step(h)
    candidates = sorted(paths if paths is not None else leaves)
    for path in candidates:
        if leaves[path].dtype != np.float64:
            raise ContractError(f"{path} is not 64-bit, cast the leaves first")
        leaves[path].zero_grad()
    with precision(np.float64):
        backward(loss())
        analytic, numeric = [], []
        with no_grad():
            for _ in range(count):
                path = candidates[int(rng.integers(len(candidates)))]
                leaf = leaves[path]
                index = int(rng.integers(leaf.data.size))
                flat = leaf.data.reshape(-1)
                grad = 0.0 if leaf.grad is None else float(leaf.grad.reshape(-1)[index])
                original = flat[index]
                flat[index] = original + h
                upper = float(loss().data)
                flat[index] = original - h
                lower = float(loss().data)
                flat[index] = original
                analytic.append(grad)
                numeric.append((upper - lower) / (2 * h))
    return relative_error(np.array(analytic), np.array(numeric))
