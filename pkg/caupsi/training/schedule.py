import math

from ..config import TrainConfig
from ..errors import ConfigError


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """
    Learning rate of an epoch: linear warmup to `lr_max` over the first
    `warmup_epochs` epochs, then cosine annealing down to `lr_min` at
    `max_epochs`. The rate is constant within an epoch.
    """
    if not 0 <= epoch <= cfg.max_epochs:
        raise ConfigError(f"epoch must be in [0, {cfg.max_epochs}], got {epoch}")
    if epoch < cfg.warmup_epochs:
        return cfg.lr_max * (epoch + 1) / cfg.warmup_epochs
    progress = (epoch - cfg.warmup_epochs) / (cfg.max_epochs - cfg.warmup_epochs)
    cosine = 1 + math.cos(math.pi * progress)
    return cfg.lr_min + (cfg.lr_max - cfg.lr_min) / 2 * cosine
