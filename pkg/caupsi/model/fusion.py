from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from ..autograd import Tensor, concat, layer_norm, stack
from ..errors import ConfigError, ShapeError
from ..nn import ParamScope, init_linear, init_mha, linear, mha


def init_scene_attention(
    params: ParamScope, num_views: int, d_c: int, hidden: int = 64
) -> None:
    init_linear(params.scope("w1"), num_views * d_c, hidden, bias=False)
    init_linear(params.scope("w2"), hidden, num_views, bias=False)


def fuse_scenes(views: Sequence[Tensor], params: ParamScope) -> Tuple[Tensor, Tensor]:
    """
    Attention-weighted fusion of the scene views:
    `alpha = softmax(W2 relu(W1 [v_1; ...; v_Ns]))`, output `sum_i alpha_i v_i`.

    :param views: N_s tensors of shape (N, d_c).
    :returns: the fused features (N, d_c) and the view weights (N, N_s).
    """
    if not views:
        raise ConfigError("scene fusion needs at least one view")
    n, d = views[0].shape
    if any(v.shape != (n, d) for v in views):
        raise ShapeError(f"scene views disagree in shape: {[v.shape for v in views]}")
    hidden = linear(params.scope("w1"), concat(views)).relu()
    alpha = linear(params.scope("w2"), hidden).softmax()
    stacked = stack(views, axis=1)
    fused = (alpha.reshape(n, 1, len(views)) @ stacked).reshape(n, d)
    return fused, alpha


def init_cross_view(
    params: ParamScope, d_f: int, heads: int, bias: bool = True
) -> None:
    """
    Two independent directions (`inside` attends to the scene, `scene`
    attends to the inside view), each with its own attention, gate and
    query normalization.
    """
    for direction in ("inside", "scene"):
        scope = params.scope(direction)
        init_mha(scope.scope("attention"), d_f, heads, bias=bias)
        init_linear(scope.scope("gate"), 2 * d_f, d_f)
        scope.ones("norm.gamma", d_f)
        scope.zeros("norm.beta", d_f)


@dataclass
class CrossViewOutput:
    inside: Tensor
    scene: Tensor
    gate_inside: Tensor
    gate_scene: Tensor
    context_inside: Tensor
    context_scene: Tensor


def attend(
    source: Tensor, tokens: Tensor, heads: int, params: ParamScope
) -> Tuple[Tensor, Tensor, Tensor]:
    """
    One direction of the gated cross-view update:
    `c = MHA(LN(source), tokens)`, `g = sigmoid(W_g [source; c] + b_g)`,
    `out = source + g * c`.
    """
    n, d = source.shape
    query = layer_norm(source, params["norm.gamma"], params["norm.beta"])
    context = mha(query.reshape(n, 1, d), tokens, heads, params.scope("attention"))
    context = context.reshape(n, d)
    gate = linear(params.scope("gate"), concat([source, context])).sigmoid()
    return source + gate * context, gate, context


def cross_view(
    f_in: Tensor,
    f_scene: Tensor,
    params: ParamScope,
    heads: int = 4,
    scene_tokens: Optional[Tensor] = None,
) -> CrossViewOutput:
    """
    Gated bidirectional cross-view attention between the inside and the fused
    scene features, both (N, d_f). By default each side attends to the other
    as a single token. With `scene_tokens` (N, N_s, d_f) the inside view
    attends to the individual scene views instead.
    """
    if f_in.shape != f_scene.shape or f_in.ndim != 2:
        raise ShapeError(f"cross-view inputs disagree: {f_in.shape}, {f_scene.shape}")
    n, d = f_in.shape
    if scene_tokens is None:
        scene_tokens = f_scene.reshape(n, 1, d)
    elif scene_tokens.ndim != 3 or scene_tokens.shape[::2] != (n, d):
        raise ShapeError(
            f"scene tokens must be (N, N_s, {d}), got {scene_tokens.shape}"
        )
    inside, gate_inside, context_inside = attend(
        f_in, scene_tokens, heads, params.scope("inside")
    )
    scene, gate_scene, context_scene = attend(
        f_scene, f_in.reshape(n, 1, d), heads, params.scope("scene")
    )
    return CrossViewOutput(
        inside, scene, gate_inside, gate_scene, context_inside, context_scene
    )
