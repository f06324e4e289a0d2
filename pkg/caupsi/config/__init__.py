from .types import Boolean, Choice, Float, Integer, Type
from .schema import ConfigSchema
from .sections import ABLATIONS, GeneratorConfig, LossConfig, ModelConfig, TrainConfig
from .run import RunConfig
