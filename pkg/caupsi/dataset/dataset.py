import abc
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, ShapeMismatchError
from ..tasks import TASK_NAMES

SPLITS = ("train", "val", "test")

# camera views in storage order
VIEWS = ("front", "left", "right", "inside", "face", "body")


def clip_path(sample_id: str, view: str) -> str:
    return f"clips/{sample_id}.{view}.f32"


def format_shape(shape: Sequence[int]) -> str:
    return "x".join(str(s) for s in shape)


def parse_shape(text: str) -> Tuple[int, ...]:
    try:
        shape = tuple(int(s) for s in str(text).split("x"))
    except ValueError:
        raise ShapeMismatchError(f"invalid clip shape {text!r}")
    if len(shape) != 4 or min(shape) < 1:
        raise ShapeMismatchError(f"clip shapes are C x T x H x W, got {text!r}")
    return shape


@dataclass
class SampleRecord:

    """
    One sample: six clips (C, T, H, W), the four labels and, for generated
    data, the (arousal, valence) latent.
    """

    sample_id: str
    clips: Dict[str, np.ndarray]
    labels: Dict[str, int]
    latent: Optional[Tuple[float, float]] = None


@dataclass
class Batch:

    """
    A batch of samples: clips (N, C, T, H, W) per view and labels (N,) per
    task.
    """

    ids: List[str]
    clips: Dict[str, np.ndarray]
    labels: Dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)


class Dataset:

    """Models a labeled multi-view clip dataset that is divided into the
    train, validation and test splits. Clips are loaded on demand, so
    implementations only keep the index in memory.
    """

    @abc.abstractmethod
    def ids(self, split: Optional[str] = None) -> List[str]:
        raise NotImplementedError

    @abc.abstractproperty
    def clip_shape(self) -> Tuple[int, int, int, int]:
        raise NotImplementedError

    @abc.abstractmethod
    def labels(self, split: Optional[str] = None) -> Dict[str, np.ndarray]:
        raise NotImplementedError

    @abc.abstractmethod
    def clip(self, sample_id: str, view: str) -> np.ndarray:
        raise NotImplementedError

    @abc.abstractmethod
    def sample_labels(self, sample_id: str) -> Dict[str, int]:
        raise NotImplementedError

    def len(self, split: Optional[str] = None) -> int:
        return len(self.ids(split))

    def record(self, sample_id: str) -> SampleRecord:
        clips = {view: self.clip(sample_id, view) for view in VIEWS}
        return SampleRecord(sample_id, clips, self.sample_labels(sample_id))

    def batch(self, ids: Sequence[str]) -> Batch:
        if not ids:
            raise ConfigError("cannot build an empty batch")
        records = [self.record(i) for i in ids]
        clips = {
            view: np.stack([r.clips[view] for r in records]) for view in VIEWS
        }
        labels = {
            task: np.array([r.labels[task] for r in records], dtype=np.int64)
            for task in TASK_NAMES
        }
        return Batch(list(ids), clips, labels)

    def batch_ids(
        self,
        split: str,
        batch_size: int,
        rng: Optional[np.random.Generator] = None,
    ) -> List[List[str]]:
        """
        Divides a split into batches of at most `batch_size` samples, shuffled
        when a generator is given. The last batch may be smaller.
        """
        if batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {batch_size}")
        ids = self.ids(split)
        if rng is not None:
            ids = [ids[i] for i in rng.permutation(len(ids))]
        return [ids[i : i + batch_size] for i in range(0, len(ids), batch_size)]

    def batches(
        self,
        split: str,
        batch_size: int,
        rng: Optional[np.random.Generator] = None,
    ) -> Iterator[Batch]:
        for ids in self.batch_ids(split, batch_size, rng):
            yield self.batch(ids)
