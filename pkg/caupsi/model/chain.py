from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..autograd import Tensor, concat
from ..errors import ContractError, ShapeError
from ..nn import MlpSpec, ParamScope, init_linear, init_mlp, linear, mlp_forward
from ..tasks import TASK_NAMES, TASKS, TaskSpec

# tasks whose soft-label embeddings feed downstream heads
EMBEDDED_TASKS = TASK_NAMES[:3]


def head_input_width(
    task: str, d_t: int, d_f: int, d_e: int, d_psi: int, chain: bool = True
) -> int:
    """
    tcr: [z_1; f_scene; psi]
    vcr: [z_2; f_in; f_scene; psi]
    der: [z_3; e_1; e_2; f_face; psi]
    dbr: [z_4; e_3; e_1; e_2; f_scene; f_in; f_body; psi]
    """
    widths = {
        "tcr": d_t + d_f + d_psi,
        "vcr": d_t + 2 * d_f + d_psi,
        "der": d_t + d_f + d_psi + (2 * d_e if chain else 0),
        "dbr": d_t + 3 * d_f + d_psi + (3 * d_e if chain else 0),
    }
    return widths[task]


def head_spec(
    task: TaskSpec,
    d_t: int,
    d_f: int,
    d_e: int,
    d_psi: int,
    hidden: int,
    dropout_p: float,
    chain: bool = True,
) -> MlpSpec:
    width = head_input_width(task.name, d_t, d_f, d_e, d_psi, chain)
    return MlpSpec(width, hidden, task.num_classes, dropout_p)


def init_chain(
    params: ParamScope,
    d_f: int,
    d_z: int,
    d_t: int,
    d_e: int,
    d_psi: int,
    hidden: int,
    chain: bool = True,
) -> None:
    init_linear(params.scope("shared"), 2 * d_f, d_z)
    for task in TASKS:
        init_linear(params.scope(f"task.{task.name}"), d_z, d_t)
        spec = head_spec(task, d_t, d_f, d_e, d_psi, hidden, 0.0, chain)
        init_mlp(params.scope(f"heads.{task.name}"), spec)
    for task in TASKS[:3]:
        params.normal(f"prototypes.{task.name}", 0.02, task.num_classes, d_e)


def shared_projection(
    f_in: Tensor, f_scene: Tensor, params: ParamScope
) -> Tuple[Tensor, List[Tensor]]:
    """
    `z = W_z [f_in; f_scene] + b_z` and four task-specific projections
    `z_r = W_r z + b_r`.
    """
    if f_in.shape != f_scene.shape:
        raise ShapeError(f"inside {f_in.shape} and scene {f_scene.shape} disagree")
    z = linear(params.scope("shared"), concat([f_in, f_scene]))
    return z, [linear(params.scope(f"task.{t}"), z) for t in TASK_NAMES]


def soft_label_embed(probs: Tensor, prototypes: Tensor, atol: float = 1e-5) -> Tensor:
    """
    Confidence-weighted average of the class prototypes, `e = y P`.

    :param probs: predicted distributions, (C,) or (N, C).
    :param prototypes: (C, d_e).
    """
    values = probs.data
    if values.shape[-1] != prototypes.shape[0]:
        raise ShapeError(
            f"{values.shape[-1]} probabilities for {prototypes.shape[0]} prototypes"
        )
    if np.any(values < 0) or np.any(np.abs(values.sum(axis=-1) - 1) > atol):
        raise ContractError("soft-label embedding needs normalized distributions")
    if probs.ndim == 1:
        c = probs.shape[0]
        return (probs.reshape(1, c) @ prototypes).reshape(prototypes.shape[1])
    return probs @ prototypes


@dataclass
class ChainInput:
    f_in: Tensor
    f_scene: Tensor
    f_face: Tensor
    f_body: Tensor
    psi: Tensor
    z: Tensor
    z_tasks: List[Tensor]


@dataclass
class ChainOutput:
    probs: List[Tensor]
    embeddings: List[Tensor]
    psi: Tensor
    z: Tensor
    z_tasks: List[Tensor]
    head_inputs: Dict[str, Tensor] = field(default_factory=dict)

    def prediction(self, task: str) -> Tensor:
        return self.probs[TASK_NAMES.index(task)]


def forward_chain(
    features: ChainInput,
    params: ParamScope,
    hidden: int,
    dropout_p: float,
    chain: bool = True,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ChainOutput:
    """
    Runs the four heads in causal order. After each of the first three heads
    its predicted distribution is turned into a soft-label embedding that is
    passed to the heads downstream; with `chain` off the embeddings are left
    out of the head inputs.
    """
    f = features
    d_f = f.f_in.shape[-1]
    d_t = f.z_tasks[0].shape[-1]
    d_psi = f.psi.shape[-1]
    d_e = params[f"prototypes.{TASK_NAMES[0]}"].shape[1]

    probs: List[Tensor] = []
    embeddings: List[Tensor] = []
    inputs: Dict[str, Tensor] = {}

    def run_head(task: TaskSpec, parts: List[Tensor]) -> Tensor:
        x = concat(parts)
        inputs[task.name] = x
        spec = head_spec(task, d_t, d_f, d_e, d_psi, hidden, dropout_p, chain)
        logits = mlp_forward(spec, params.scope(f"heads.{task.name}"), x, train, rng)
        y = logits.softmax()
        probs.append(y)
        if chain and task.name in EMBEDDED_TASKS:
            embeddings.append(soft_label_embed(y, params[f"prototypes.{task.name}"]))
        return y

    tcr, vcr, der, dbr = TASKS
    z1, z2, z3, z4 = f.z_tasks
    run_head(tcr, [z1, f.f_scene, f.psi])
    run_head(vcr, [z2, f.f_in, f.f_scene, f.psi])
    if chain:
        e1, e2 = embeddings
        run_head(der, [z3, e1, e2, f.f_face, f.psi])
        e3 = embeddings[2]
        run_head(dbr, [z4, e3, e1, e2, f.f_scene, f.f_in, f.f_body, f.psi])
    else:
        run_head(der, [z3, f.f_face, f.psi])
        run_head(dbr, [z4, f.f_scene, f.f_in, f.f_body, f.psi])
    return ChainOutput(probs, embeddings, f.psi, f.z, f.z_tasks, inputs)
