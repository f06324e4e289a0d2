from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from ..autograd import Tensor, grl
from ..config import LossConfig
from ..errors import ConfigError, LabelRangeError, ShapeError
from ..nn import MlpSpec, ParamScope, init_mlp, mlp_forward
from ..tasks import NUM_CLASSES, TASK_NAMES

Labels = Union[int, Sequence[int], np.ndarray]


def check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise LabelRangeError(f"class ids must be in [0, {num_classes}), got {labels}")
    return labels


def smoothed_targets(labels: Labels, num_classes: int, epsilon: float) -> np.ndarray:
    """
    `(1 - epsilon) * onehot + epsilon / C`; the smoothing mass is spread over
    all classes including the target.
    """
    if not 0 <= epsilon < 1:
        raise ConfigError(f"label smoothing must be in [0, 1), got {epsilon}")
    labels = check_labels(np.asarray(labels), num_classes)
    targets = np.full((labels.size, num_classes), epsilon / num_classes)
    targets[np.arange(labels.size), labels] += 1.0 - epsilon
    return targets


def ce_coefficients(
    labels: Labels, weights: np.ndarray, epsilon: float
) -> np.ndarray:
    """
    Per-sample coefficients of `-log p`: the smoothed targets scaled by the
    weight of the target class.
    """
    num_classes = len(weights)
    labels = check_labels(np.asarray(labels), num_classes)
    targets = smoothed_targets(labels, num_classes, epsilon)
    return targets * np.asarray(weights, dtype=np.float64)[labels][:, None]


def weighted_ce(probs: Tensor, coefficients: np.ndarray) -> Tensor:
    single = probs.ndim == 1
    if single:
        probs = probs.reshape(1, probs.shape[0])
    if coefficients.shape != probs.shape:
        raise ShapeError(f"targets {coefficients.shape} do not match {probs.shape}")
    losses = -(probs.log() * coefficients.astype(probs.dtype)).sum(axis=-1)
    return losses.reshape() if single else losses


def ls_ce(probs: Tensor, target: Labels, weights: np.ndarray, epsilon: float) -> Tensor:
    """
    Class-weighted label-smoothing cross-entropy,
    `-w[y] * sum_c q_c log p_c` with `q = (1 - epsilon) onehot(y) + epsilon / C`.

    :param probs: a distribution (C,) with a single target, or a batch (N, C)
      with N targets; the result is a scalar or the N per-sample losses.
    """
    return weighted_ce(probs, ce_coefficients(target, weights, epsilon))


def ls_ce_mixed(
    probs: Tensor,
    labels_a: Labels,
    labels_b: Labels,
    lam: np.ndarray,
    weights: np.ndarray,
    epsilon: float,
) -> Tensor:
    """
    `lam * ls_ce(p, y_a) + (1 - lam) * ls_ce(p, y_b)` per sample.
    """
    lam = np.asarray(lam, dtype=np.float64).reshape(-1, 1)
    coefficients = lam * ce_coefficients(labels_a, weights, epsilon) + (
        1 - lam
    ) * ce_coefficients(labels_b, weights, epsilon)
    return weighted_ce(probs, coefficients)


def compute_class_weights(labels: Labels, num_classes: int) -> np.ndarray:
    """
    Inverse class frequencies normalized to mean 1 over the classes present;
    absent classes get weight 1.
    """
    labels = check_labels(np.asarray(labels), num_classes)
    if labels.size == 0:
        raise ConfigError("class weights need at least one label")
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    present = counts > 0
    inverse = np.zeros(num_classes)
    inverse[present] = 1.0 / counts[present]
    weights = np.ones(num_classes)
    weights[present] = inverse[present] / inverse[present].mean()
    return weights


def class_weights(labels: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {
        task: compute_class_weights(labels[task], NUM_CLASSES[task])
        for task in TASK_NAMES
    }


def init_domain_adversary(params: ParamScope, spec: MlpSpec) -> None:
    init_mlp(params, spec)


def domain_adversary(
    z: Tensor, lambda_grl: float, params: ParamScope, spec: MlpSpec
) -> Tensor:
    """
    Domain logits of a two-layer classifier on top of a gradient reversal
    layer, so the classifier learns the domains while z is pushed to hide
    them.
    """
    return mlp_forward(spec, params, grl(z, lambda_grl))


def domain_ce(logits: Tensor, labels: Labels) -> Tensor:
    """
    Unweighted, unsmoothed cross-entropy of the domain logits, averaged over
    the batch.
    """
    num_domains = logits.shape[-1]
    coefficients = smoothed_targets(labels, num_domains, 0.0)
    return weighted_ce(logits.softmax(), coefficients).mean()


@dataclass
class LossBreakdown:
    total: Tensor
    tasks: Dict[str, float] = field(default_factory=dict)
    adversarial: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        values = {f"loss_{task}": loss for task, loss in self.tasks.items()}
        values["loss_adv"] = self.adversarial
        values["loss"] = float(self.total.data)
        return values


def total_loss(
    probs: Sequence[Tensor],
    labels: Mapping[str, np.ndarray],
    domain_logits: Optional[Tensor],
    domain_labels: Optional[np.ndarray],
    config: LossConfig,
    weights: Mapping[str, np.ndarray],
    labels_b: Optional[Mapping[str, np.ndarray]] = None,
    lam: Optional[np.ndarray] = None,
    task_weights: Optional[Sequence[float]] = None,
    gamma_adv: Optional[float] = None,
) -> LossBreakdown:
    """
    `sum_r lambda_r L_r + gamma_adv L_adv`, where each task loss is the
    batch mean of the class-weighted label-smoothing cross-entropy. With
    `labels_b` and `lam` the task losses are the mixup combinations of the
    losses against both label sets.

    `task_weights` and `gamma_adv` override the configured values.
    """
    lambdas = config.task_weights if task_weights is None else tuple(task_weights)
    gamma = config.gamma_adv if gamma_adv is None else gamma_adv
    if len(probs) != len(TASK_NAMES) or len(lambdas) != len(TASK_NAMES):
        raise ShapeError("expected one prediction and one weight per task")
    total: Optional[Tensor] = None
    breakdown = LossBreakdown(total=Tensor(0.0))
    for task, p, lambda_r in zip(TASK_NAMES, probs, lambdas):
        if labels_b is not None and lam is not None:
            losses = ls_ce_mixed(
                p,
                labels[task],
                labels_b[task],
                lam,
                weights[task],
                config.label_smoothing,
            )
        else:
            losses = ls_ce(p, labels[task], weights[task], config.label_smoothing)
        task_loss = losses.mean()
        breakdown.tasks[task] = float(task_loss.data)
        term = task_loss * lambda_r
        total = term if total is None else total + term
    if domain_logits is not None and domain_labels is not None:
        adversarial = domain_ce(domain_logits, domain_labels)
        breakdown.adversarial = float(adversarial.data)
        total = total + adversarial * gamma
    assert total is not None
    breakdown.total = total
    return breakdown
