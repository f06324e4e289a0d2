from .random import derive_seed, generator
from .mixup import MixedBatch, mixup_batch
from .flip import augment_flip, flip_batch
