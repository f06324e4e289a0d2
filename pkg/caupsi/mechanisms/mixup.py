from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from ..errors import ConfigError


@dataclass
class MixedBatch:

    """
    A batch mixed against a permutation of itself. `lam` holds the mixing
    weight of every sample (one draw per batch, broadcast), `labels_b` the
    labels of the permutation partners.
    """

    clips: Dict[str, np.ndarray]
    labels_a: Dict[str, np.ndarray]
    labels_b: Dict[str, np.ndarray]
    lam: np.ndarray
    permutation: np.ndarray


def mix(x: np.ndarray, permutation: np.ndarray, lam: float) -> np.ndarray:
    """
    `lam * x + (1 - lam) * x[permutation]`, written so that a sample mixed
    with itself is returned unchanged.
    """
    return x + (1.0 - lam) * (x[permutation] - x)


def mixup_batch(
    clips: Mapping[str, np.ndarray],
    labels: Mapping[str, np.ndarray],
    alpha: float,
    rng: np.random.Generator,
    lam: Optional[float] = None,
    permutation: Optional[np.ndarray] = None,
) -> MixedBatch:
    """
    Mixes all views of a batch with a random permutation partner, with the
    weight drawn from Beta(alpha, alpha). `alpha = 0` and single-sample
    batches are left unmixed.
    """
    if alpha < 0:
        raise ConfigError(f"mixup alpha must be non-negative, got {alpha}")
    n = len(next(iter(labels.values())))
    if permutation is None:
        permutation = rng.permutation(n) if n >= 2 else np.arange(n)
    if lam is None:
        lam = float(rng.beta(alpha, alpha)) if alpha > 0 and n >= 2 else 1.0
    if not 0 <= lam <= 1:
        raise ConfigError(f"mixing weights must be in [0, 1], got {lam}")
    mixed = {
        view: mix(x, permutation, lam).astype(x.dtype, copy=False)
        for view, x in clips.items()
    }
    labels_a = {task: np.asarray(y) for task, y in labels.items()}
    labels_b = {task: y[permutation] for task, y in labels_a.items()}
    return MixedBatch(mixed, labels_a, labels_b, np.full(n, lam), permutation)
