from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..autograd import Tensor, dropout
from ..errors import ConfigError, ShapeError
from .params import ParamScope


@dataclass(frozen=True)
class MlpSpec:

    """
    Two-layer perceptron: Linear -> ReLU -> Dropout -> Linear. Dropout is only
    active in train mode.
    """

    in_dim: int
    hidden_dim: int
    out_dim: int
    dropout_p: float = 0.0
    activation: str = "relu"

    def __post_init__(self) -> None:
        if min(self.in_dim, self.hidden_dim, self.out_dim) <= 0:
            raise ConfigError(f"MLP dims must be positive: {self}")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout_p}")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation}")


def init_linear(
    params: ParamScope, in_dim: int, out_dim: int, bias: bool = True
) -> None:
    params.xavier("weight", in_dim, out_dim)
    if bias:
        params.zeros("bias", out_dim)


def linear(params: ParamScope, x: Tensor) -> Tensor:
    weight = params["weight"]
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(
            f"{params.prefix}: expected inputs of width {weight.shape[0]}, "
            f"got {x.shape[-1]}"
        )
    out = x @ weight
    if "bias" in params:
        out = out + params["bias"]
    return out


def init_mlp(params: ParamScope, spec: MlpSpec) -> None:
    init_linear(params.scope("fc1"), spec.in_dim, spec.hidden_dim)
    init_linear(params.scope("fc2"), spec.hidden_dim, spec.out_dim)


def mlp_forward(
    spec: MlpSpec,
    params: ParamScope,
    x: Tensor,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    if x.shape[-1] != spec.in_dim:
        raise ShapeError(
            f"{params.prefix}: expected width {spec.in_dim}, got {x.shape[-1]}"
        )
    hidden = linear(params.scope("fc1"), x).relu()
    hidden = dropout(hidden, spec.dropout_p, train, rng)
    return linear(params.scope("fc2"), hidden)
