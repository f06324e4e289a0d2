import logging
from typing import Dict, List, Tuple

import numpy as np

from ..autograd import Tensor
from ..config import TrainConfig
from ..errors import TrainingError

logger = logging.getLogger(__name__)

Params = List[Tuple[str, Tensor]]


def global_norm(params: Params) -> float:
    total = 0.0
    for _, tensor in params:
        if tensor.grad is not None:
            total += float(np.sum(np.square(tensor.grad, dtype=np.float64)))
    return float(np.sqrt(total))


def clip_grads(params: Params, max_norm: float = 5.0) -> float:
    """
    Rescales all gradients so that their global L2 norm is at most
    `max_norm`. Returns the applied scale.

    :raises TrainingError: if a gradient is not finite.
    """
    for path, tensor in params:
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise TrainingError(f"non-finite gradient in {path}")
    norm = global_norm(params)
    if norm <= max_norm or norm == 0:
        return 1.0
    scale = max_norm / norm
    for _, tensor in params:
        if tensor.grad is not None:
            tensor.grad *= tensor.grad.dtype.type(scale)
    return scale


class AdamW:

    """
    Adam with decoupled weight decay. Only the entries handed to the
    constructor are ever updated, so frozen parameters stay untouched.
    """

    def __init__(self, params: Params, cfg: TrainConfig):
        self.params = params
        self.beta1 = cfg.adam_beta1
        self.beta2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.weight_decay = cfg.weight_decay
        self.steps = 0
        self.m: Dict[str, np.ndarray] = {p: np.zeros_like(t.data) for p, t in params}
        self.v: Dict[str, np.ndarray] = {p: np.zeros_like(t.data) for p, t in params}

    def step(self, lr: float) -> None:
        self.steps += 1
        correction1 = 1 - self.beta1 ** self.steps
        correction2 = 1 - self.beta2 ** self.steps
        for path, tensor in self.params:
            if tensor.grad is None:
                continue
            grad = tensor.grad
            m, v = self.m[path], self.v[path]
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            tensor.data *= 1 - lr * self.weight_decay
            tensor.data -= (lr * update).astype(tensor.dtype, copy=False)

    def zero_grad(self) -> None:
        for _, tensor in self.params:
            tensor.zero_grad()
