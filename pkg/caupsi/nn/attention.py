import math
from typing import Tuple, Union

from ..autograd import Tensor
from ..errors import ConfigError, ShapeError
from .layers import init_linear, linear
from .params import ParamScope


def init_mha(params: ParamScope, dim: int, heads: int, bias: bool = True) -> None:
    if dim % heads:
        raise ConfigError(f"attention width {dim} is not divisible by {heads} heads")
    for name in ("query", "key", "value", "output"):
        init_linear(params.scope(name), dim, dim, bias=bias)


def mha(
    q_tokens: Tensor,
    kv_tokens: Tensor,
    heads: int,
    params: ParamScope,
    return_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, Tensor]]:
    """
    Multi-head scaled dot-product attention with learned query, key, value
    and output projections.

    :param q_tokens: queries of shape (N, T_q, d).
    :param kv_tokens: keys and values of shape (N, T_kv, d).
    :returns: the attended tokens (N, T_q, d), and with `return_weights` also
      the attention weights (N, heads, T_q, T_kv).
    """
    if q_tokens.ndim != 3 or kv_tokens.ndim != 3:
        raise ShapeError("attention expects (batch, tokens, width) inputs")
    n, tq, d = q_tokens.shape
    tkv = kv_tokens.shape[1]
    if kv_tokens.shape[0] != n or kv_tokens.shape[2] != d:
        raise ShapeError(
            f"query {q_tokens.shape} and key/value {kv_tokens.shape} disagree"
        )
    if d % heads:
        raise ConfigError(f"attention width {d} is not divisible by {heads} heads")
    head_dim = d // heads

    def split_heads(tokens: Tensor, length: int) -> Tensor:
        return tokens.reshape(n, length, heads, head_dim).transpose(0, 2, 1, 3)

    query = split_heads(linear(params.scope("query"), q_tokens), tq)
    key = split_heads(linear(params.scope("key"), kv_tokens), tkv)
    value = split_heads(linear(params.scope("value"), kv_tokens), tkv)

    scores = (query @ key.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(head_dim))
    weights = scores.softmax()
    context = (weights @ value).transpose(0, 2, 1, 3).reshape(n, tq, d)
    out = linear(params.scope("output"), context)
    if return_weights:
        return out, weights
    return out
