from typing import Tuple

from ..autograd import Tensor
from ..nn import MlpSpec, ParamScope, init_mlp, mlp_forward


def projection_spec(d_c: int, d_f: int) -> MlpSpec:
    return MlpSpec(d_c, d_f, d_f)


def init_view_projections(params: ParamScope, d_c: int, d_f: int) -> None:
    spec = projection_spec(d_c, d_f)
    for view in ("inside", "scene", "face", "body"):
        init_mlp(params.scope(view), spec)


def project(params: ParamScope, view: str, h: Tensor) -> Tensor:
    weight = params[f"{view}.fc1.weight"]
    spec = projection_spec(weight.shape[0], weight.shape[1])
    return mlp_forward(spec, params.scope(view), h)


def project_face_body(
    h_face: Tensor, h_body: Tensor, params: ParamScope
) -> Tuple[Tensor, Tensor]:
    return project(params, "face", h_face), project(params, "body", h_body)


def project_in_scene(
    h_in: Tensor, h_scene: Tensor, params: ParamScope
) -> Tuple[Tensor, Tensor]:
    return project(params, "inside", h_in), project(params, "scene", h_scene)
