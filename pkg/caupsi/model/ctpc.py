from dataclasses import dataclass
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from ..autograd import Tensor, concat, layer_norm
from ..errors import ShapeError
from ..nn import MlpSpec, ParamScope, init_linear, init_mlp, linear, mlp_forward


def ctpc_spec(d_f: int, d_psi: int) -> MlpSpec:
    return MlpSpec(d_f, 2 * d_psi, d_psi)


def init_ctpc(params: ParamScope, d_f: int, d_psi: int) -> None:
    spec = ctpc_spec(d_f, d_psi)
    init_mlp(params.scope("affect"), spec)
    init_mlp(params.scope("action"), spec)
    init_linear(params.scope("fuse"), 2 * d_psi, d_psi)
    params.ones("norm.gamma", d_psi)
    params.zeros("norm.beta", d_psi)


@dataclass
class PsiOutput:
    psi: Tensor
    affect: Tensor
    action: Tensor


def compute_psi(f_face: Tensor, f_body: Tensor, params: ParamScope) -> PsiOutput:
    """
    Estimates the bounded psychological state signal
    `psi = tanh(LN(W_psi [a_affect; a_action] + b_psi))`. The affect path only
    sees the face features and the action path only the body features.
    """
    if f_face.shape != f_body.shape:
        raise ShapeError(f"face {f_face.shape} and body {f_body.shape} disagree")
    d_psi = params["norm.gamma"].shape[0]
    spec = ctpc_spec(f_face.shape[-1], d_psi)
    affect = mlp_forward(spec, params.scope("affect"), f_face)
    action = mlp_forward(spec, params.scope("action"), f_body)
    fused = linear(params.scope("fuse"), concat([affect, action]))
    psi = layer_norm(fused, params["norm.gamma"], params["norm.beta"]).tanh()
    return PsiOutput(psi, affect, action)


def psi_frame(psi: np.ndarray, labels: Mapping[str, np.ndarray]) -> pd.DataFrame:
    columns = [f"psi_{i + 1}" for i in range(psi.shape[1])]
    frame = pd.DataFrame(psi, columns=columns)
    for task, values in labels.items():
        frame[task] = np.asarray(values, dtype=np.int64)
    return frame


def psi_class_means(
    psi: np.ndarray, labels: Mapping[str, np.ndarray], num_classes: Mapping[str, int]
) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """
    Per task, the mean psi vector of the samples of every class.

    :param psi: array of shape (N, d_psi).
    :param labels: class ids per task, each of length N.
    :returns: per task a pair of the (C_r, d_psi) means and a boolean mask of
      the classes that occur; rows of absent classes are NaN.
    """
    if psi.ndim != 2 or psi.shape[0] == 0:
        raise ShapeError(f"expected a non-empty (N, d_psi) matrix, got {psi.shape}")
    frame = psi_frame(psi, labels)
    columns = [c for c in frame.columns if c.startswith("psi_")]
    means = {}
    for task in labels:
        grouped = frame.groupby(task)[columns].mean()
        grouped = grouped.reindex(range(num_classes[task]))
        present = grouped.notna().all(axis=1).to_numpy()
        means[task] = (grouped.to_numpy(dtype=np.float64), present)
    return means


def max_class_distance(means: np.ndarray, present: Sequence[bool]) -> float:
    """
    The largest L-infinity distance between any two present class-mean rows.
    """
    rows = means[np.asarray(present, dtype=bool)]
    if len(rows) < 2:
        return 0.0
    diffs = np.abs(rows[:, None, :] - rows[None, :, :]).max(axis=-1)
    return float(diffs.max())
