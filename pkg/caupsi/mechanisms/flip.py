from typing import Dict, Mapping, Optional

import numpy as np

from ..errors import ConfigError

# a mirrored world swaps the left and right cameras
SWAPPED_VIEWS = {"left": "right", "right": "left"}


def mirror(clips: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    Mirrors every clip along the width axis and swaps the left and right
    scene views.
    """
    flipped = {}
    for view, clip in clips.items():
        flipped[SWAPPED_VIEWS.get(view, view)] = np.ascontiguousarray(clip[..., ::-1])
    return flipped


def augment_flip(
    clips: Mapping[str, np.ndarray],
    p: float,
    rng: np.random.Generator,
    force: Optional[bool] = None,
) -> Dict[str, np.ndarray]:
    """
    Random horizontal flip of one sample's clips (C, T, H, W) with
    probability `p`. `force` overrides the random draw.
    """
    if not 0 <= p <= 1:
        raise ConfigError(f"flip probability must be in [0, 1], got {p}")
    trigger = force if force is not None else bool(rng.random() < p)
    return mirror(clips) if trigger else dict(clips)


def flip_batch(
    clips: Mapping[str, np.ndarray], p: float, rng: np.random.Generator
) -> Dict[str, np.ndarray]:
    """
    Flips every sample of a batch (N, C, T, H, W) independently.
    """
    if not 0 <= p <= 1:
        raise ConfigError(f"flip probability must be in [0, 1], got {p}")
    n = len(next(iter(clips.values())))
    triggers = rng.random(n) < p
    if not triggers.any():
        return dict(clips)
    flipped = mirror({view: clip[triggers] for view, clip in clips.items()})
    out = {}
    for view, clip in clips.items():
        clip = clip.copy()
        clip[triggers] = flipped[view]
        out[view] = clip
    return out
