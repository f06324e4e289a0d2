from typing import Dict, Mapping

import numpy as np

from ..errors import ConfigError, ShapeError
from ..nn import ParamStore


def ema_update(
    shadow: Mapping[str, np.ndarray], params: Mapping[str, np.ndarray], beta: float
) -> None:
    """
    `shadow <- beta * shadow + (1 - beta) * params`, in place.
    """
    if not 0 <= beta <= 1:
        raise ConfigError(f"EMA decay must be in [0, 1], got {beta}")
    for path, value in params.items():
        target = shadow[path]
        if target.shape != value.shape:
            raise ShapeError(
                f"{path}: shadow shape {target.shape} differs from {value.shape}"
            )
        target *= beta
        target += (1 - beta) * value


class EmaShadow:

    """
    Exponential moving average of the trainable parameters of a store. The
    shadow is only read for evaluation, training always runs on the live
    parameters.

    With `warmup` the decay at optimizer step t is `min(beta, (1+t)/(10+t))`,
    so that early averages are not dominated by the initialization.
    """

    def __init__(self, params: ParamStore, beta: float, warmup: bool = True):
        self.beta = beta
        self.warmup = warmup
        self.steps = 0
        self.values: Dict[str, np.ndarray] = {
            path: t.data.copy() for path, t in params.trainable()
        }

    def decay(self) -> float:
        if not self.warmup:
            return self.beta
        return min(self.beta, (1 + self.steps) / (10 + self.steps))

    def update(self, params: ParamStore) -> None:
        values = {path: t.data for path, t in params.trainable()}
        ema_update(self.values, values, self.decay())
        self.steps += 1

    def store(self, params: ParamStore) -> ParamStore:
        """
        A copy of `params` with the trainable entries replaced by the shadow.
        """
        store = params.copy()
        store.assign(self.values)
        return store
