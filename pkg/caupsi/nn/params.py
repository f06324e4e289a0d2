import logging
import struct
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np

from ..autograd import Tensor
from ..errors import CheckpointError, ConfigError, ShapeError, StorageError
from ..mechanisms.random import generator

logger = logging.getLogger(__name__)

MAGIC = b"CAUPSI1\n"


class ParamStore:

    """
    Holds all model weights as leaf tensors under hierarchical paths such as
    `chain.heads.dbr.fc1.weight`. Iteration is path-sorted, so the order of
    registration never matters. Entries that are not trainable never require
    gradients.

    Values are initialized from a stream of the pinned generator that is
    derived from the store seed and the entry path.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._entries: Dict[str, Tensor] = {}

    def __getitem__(self, path: str) -> Tensor:
        try:
            return self._entries[path]
        except KeyError:
            raise ConfigError(f"unknown parameter {path}")

    def __contains__(self, path: object) -> bool:
        return path in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def items(self) -> List[Tuple[str, Tensor]]:
        return [(path, self._entries[path]) for path in self]

    def add(self, path: str, value: np.ndarray, trainable: bool = True) -> Tensor:
        if path in self._entries:
            raise ConfigError(f"parameter {path} registered twice")
        tensor = Tensor(np.ascontiguousarray(value), requires_grad=trainable)
        self._entries[path] = tensor
        return tensor

    def rng(self, path: str) -> np.random.Generator:
        return generator(self.seed, "params", path)

    def scope(self, prefix: str) -> "ParamScope":
        return ParamScope(self, prefix)

    def trainable(self) -> List[Tuple[str, Tensor]]:
        return [(path, t) for path, t in self.items() if t.requires_grad]

    def frozen(self) -> List[Tuple[str, Tensor]]:
        return [(path, t) for path, t in self.items() if not t.requires_grad]

    def freeze(self, prefix: str) -> int:
        """
        Marks every entry under `prefix` as frozen and returns how many
        entries were affected.
        """
        count = 0
        for path, tensor in self.items():
            if path == prefix or path.startswith(prefix + "."):
                tensor.requires_grad = False
                tensor.grad = None
                count += 1
        return count

    def count(self, trainable: Optional[bool] = None) -> int:
        return sum(
            t.data.size
            for _, t in self.items()
            if trainable is None or t.requires_grad == trainable
        )

    def zero_grad(self) -> None:
        for _, tensor in self.items():
            tensor.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {path: t.data.copy() for path, t in self.items()}

    def assign(self, values: Mapping[str, np.ndarray]) -> None:
        """
        Copies values into existing entries; shapes must match exactly.
        """
        for path, value in values.items():
            tensor = self[path]
            if tuple(value.shape) != tensor.shape:
                raise ShapeError(
                    f"{path}: expected shape {tensor.shape}, got {tuple(value.shape)}"
                )
            tensor.data = np.array(value, dtype=tensor.dtype)

    def copy(self, dtype: Optional[Any] = None) -> "ParamStore":
        store = ParamStore(self.seed)
        for path, tensor in self.items():
            data = np.array(tensor.data, dtype=dtype or tensor.dtype)
            store.add(path, data, trainable=tensor.requires_grad)
        return store

    def astype(self, dtype: Any) -> "ParamStore":
        return self.copy(dtype)

    def save(self, path: Union[str, Path]) -> None:
        write_checkpoint(path, self.snapshot())

    def load(self, path: Union[str, Path]) -> None:
        values = read_checkpoint(path)
        missing = set(self) ^ set(values)
        if missing:
            raise CheckpointError(
                f"checkpoint and model disagree on parameters: {sorted(missing)[:5]}"
            )
        try:
            self.assign(values)
        except ShapeError as e:
            raise CheckpointError(f"checkpoint does not match the model config: {e}")


class ParamScope:

    """
    A view of a parameter store below a path prefix. Also provides the
    initializers used when modules register their weights.
    """

    def __init__(self, store: ParamStore, prefix: str):
        self.store = store
        self.prefix = prefix

    def path(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def __getitem__(self, name: str) -> Tensor:
        return self.store[self.path(name)]

    def __contains__(self, name: object) -> bool:
        return isinstance(name, str) and self.path(name) in self.store

    def scope(self, name: str) -> "ParamScope":
        return ParamScope(self.store, self.path(name))

    def xavier(self, name: str, fan_in: int, fan_out: int) -> Tensor:
        if fan_in <= 0 or fan_out <= 0:
            raise ConfigError(f"{self.path(name)}: dims must be positive")
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        rng = self.store.rng(self.path(name))
        value = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return self.store.add(self.path(name), value.astype(np.float32))

    def zeros(self, name: str, *shape: int) -> Tensor:
        if any(n <= 0 for n in shape):
            raise ConfigError(f"{self.path(name)}: dims must be positive")
        return self.store.add(self.path(name), np.zeros(shape, dtype=np.float32))

    def ones(self, name: str, *shape: int) -> Tensor:
        if any(n <= 0 for n in shape):
            raise ConfigError(f"{self.path(name)}: dims must be positive")
        return self.store.add(self.path(name), np.ones(shape, dtype=np.float32))

    def normal(self, name: str, std: float, *shape: int) -> Tensor:
        if any(n <= 0 for n in shape):
            raise ConfigError(f"{self.path(name)}: dims must be positive")
        rng = self.store.rng(self.path(name))
        value = rng.normal(0.0, std, size=shape)
        return self.store.add(self.path(name), value.astype(np.float32))

    def fixed(self, name: str, value: np.ndarray) -> Tensor:
        """
        Registers a frozen entry; it is saved with the checkpoint but never
        trained.
        """
        return self.store.add(
            self.path(name), value.astype(np.float32), trainable=False
        )


def write_checkpoint(path: Union[str, Path], values: Mapping[str, np.ndarray]) -> None:
    """
    Binary checkpoint: the magic bytes, then for every entry in path order the
    path length, the path, the rank and the extents as little-endian u32,
    followed by the data as little-endian float32 in row-major order.
    """
    chunks = [MAGIC]
    for name in sorted(values):
        value = np.asarray(values[name])
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as e:
        raise StorageError(f"cannot write checkpoint {path}: {e}")
    logger.debug("wrote %d entries to %s", len(values), path)


def read_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read checkpoint {path}: {e}")
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path} is not a CauPsi checkpoint")
    values: Dict[str, np.ndarray] = {}
    offset = len(MAGIC)

    def take(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(raw):
            raise CheckpointError(f"{path} is truncated")
        chunk = raw[offset : offset + size]
        offset += size
        return chunk

    while offset < len(raw):
        (length,) = struct.unpack("<I", take(4))
        try:
            name = take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError(f"{path} has a corrupt entry name at byte {offset}")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape)
        values[name] = data.astype(np.float32)
    return values
