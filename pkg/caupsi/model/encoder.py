from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..autograd import Tensor
from ..errors import ShapeError
from ..nn import ParamScope, linear

KERNEL = 3
STRIDE = 2


def conv_output_size(size: int) -> int:
    return (size + 2 - KERNEL) // STRIDE + 1


def conv2d(frames: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    3x3 convolution with stride 2 and zero padding 1 over frames of shape
    (B, C, H, W).
    """
    padded = np.pad(frames, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (KERNEL, KERNEL), axis=(2, 3))
    windows = windows[:, :, ::STRIDE, ::STRIDE]
    out = np.einsum("bchwij,ocij->bohw", windows, weight, optimize=True)
    return out + bias[None, :, None, None]


def init_encoder(
    params: ParamScope, in_channels: int, channels: Sequence[int]
) -> None:
    """
    Registers the frozen convolution weights, He-normal initialized from the
    pinned generator.
    """
    fan_in = in_channels
    for index, out_channels in enumerate(channels, 1):
        scope = params.scope(f"conv{index}")
        rng = params.store.rng(scope.path("weight"))
        std = np.sqrt(2.0 / (fan_in * KERNEL * KERNEL))
        weight = rng.normal(0.0, std, size=(out_channels, fan_in, KERNEL, KERNEL))
        scope.fixed("weight", weight)
        scope.fixed("bias", np.zeros(out_channels))
        fan_in = out_channels


class FrozenEncoder:

    """
    Maps single frames C x H x W to feature vectors. Two strided convolution
    stages with ReLU produce a small map whose spatial grid is folded into
    the channels, so global average pooling runs over a single position and
    the feature width is `channels[-1] * h * w` (64 for 8x8 frames).

    The weights live in the parameter store as frozen entries; the encoder
    never records operations, so no gradient reaches them.
    """

    def __init__(self, params: ParamScope, frame_size: int, depth: int = 2):
        self.params = params
        self.frame_size = frame_size
        self.depth = depth

    @property
    def in_channels(self) -> int:
        return self.params["conv1.weight"].shape[1]

    @property
    def map_size(self) -> int:
        size = self.frame_size
        for _ in range(self.depth):
            size = conv_output_size(size)
        return size

    @property
    def enc_dim(self) -> int:
        channels = self.params[f"conv{self.depth}.weight"].shape[0]
        return channels * self.map_size * self.map_size

    def features(self, frames: np.ndarray) -> np.ndarray:
        """
        :param frames: array of shape (B, C, H, W).
        :returns: array of shape (B, enc_dim).
        """
        expected = (self.in_channels, self.frame_size, self.frame_size)
        if frames.ndim != 4 or frames.shape[1:] != expected:
            raise ShapeError(
                f"expected frames of shape (B, *{expected}), got {frames.shape}"
            )
        x = frames
        for index in range(1, self.depth + 1):
            scope = self.params.scope(f"conv{index}")
            x = np.maximum(conv2d(x, scope["weight"].data, scope["bias"].data), 0)
        # space-to-depth, then GAP over the remaining single position
        folded = x.reshape(x.shape[0], -1, 1, 1)
        return folded.mean(axis=(2, 3))

    def pool(self, clips: np.ndarray) -> np.ndarray:
        """
        Encodes every frame of a batch of clips.

        :param clips: array of shape (N, C, T, H, W).
        :returns: per-frame features of shape (N, T, enc_dim).
        """
        if clips.ndim != 5:
            raise ShapeError(
                f"expected clips of shape (N, C, T, H, W), got {clips.shape}"
            )
        n, c, t, h, w = clips.shape
        frames = clips.transpose(0, 2, 1, 3, 4).reshape(n * t, c, h, w)
        features = self.features(frames.astype(self.params["conv1.weight"].dtype))
        return features.reshape(n, t, -1)


def project_pooled(pooled: np.ndarray, proj: ParamScope) -> Tensor:
    """
    Applies the trainable GAP projection to every frame and averages over
    time: (N, T, enc_dim) -> (N, d_c).
    """
    weight = proj["weight"]
    frames = Tensor(np.asarray(pooled, dtype=weight.dtype))
    return linear(proj, frames).mean(axis=1)


def encode_view(clip: np.ndarray, encoder: FrozenEncoder, proj: ParamScope) -> Tensor:
    """
    Temporal mean of the projected frame features of one view.

    :param clip: a single clip (C, T, H, W) or a batch (N, C, T, H, W).
    """
    batched = clip.ndim == 5
    pooled = encoder.pool(clip if batched else clip[None])
    out = project_pooled(pooled, proj)
    return out if batched else out.reshape(out.shape[-1])
