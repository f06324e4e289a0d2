import zlib
from typing import List, Union

import numpy as np

from ..errors import ConfigError

StreamName = Union[int, str]


def stream_words(*names: StreamName) -> List[int]:
    """
    Maps stream names to 32-bit words. Strings go through CRC-32 so the words
    are the same on every platform and Python version.
    """
    words = []
    for name in names:
        if isinstance(name, str):
            words.append(zlib.crc32(name.encode("utf-8")))
        else:
            if name < 0:
                raise ConfigError(f"stream ids must be non-negative, got {name}")
            words.extend([name & 0xFFFFFFFF, name >> 32])
    return words


def generator(seed: int, *stream: StreamName) -> np.random.Generator:
    """
    Returns the PCG64 generator of the named stream under `seed`. Streams are
    independent of the order in which they are requested, so for instance the
    sample with index i is drawn from `generator(seed, "sample", i)` no matter
    which worker renders it.
    """
    if seed < 0:
        raise ConfigError(f"seeds must be non-negative, got {seed}")
    entropy = stream_words(seed) + stream_words(*stream)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *stream: StreamName) -> int:
    """
    A 31-bit integer seed for libraries that take plain integer seeds.
    """
    return int(generator(seed, *stream).integers(2 ** 31 - 1))
