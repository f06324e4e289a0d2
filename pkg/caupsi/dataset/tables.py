"""
The planted label process of the synthetic dataset.

Labels are drawn in causal order: traffic context, vehicle context given the
traffic context, an arousal/valence latent given both contexts, the driver
emotion given both contexts and the signs of the latent, and the driver
behavior given the emotion and the sign of arousal.

Every conditional table is the interpolation
`(1 - s) * target + s * sharp(parent)` between the target class marginal and
a sharp table, where `s` is the causal strength. The sharp tables are
hand-written affinity logits whose per-class biases are calibrated against
the parent distribution at that strength, so the label marginals equal the
targets at every s.
"""

import functools
import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

# class supports of the reference test split, in class order
SUPPORTS = {
    "tcr": [77, 133, 399],
    "vcr": [154, 56, 39, 32, 328],
    "der": [84, 363, 67, 50, 45],
    "dbr": [28, 94, 129, 12, 248, 30, 68],
}

TARGETS = {task: np.array(s, dtype=np.float64) / sum(s) for task, s in SUPPORTS.items()}

# rows: TrafficJam, Waiting, Smooth
# cols: Parking, Turning, Backward, LaneChange, Forward
VCR_LOGITS = np.array(
    [
        [-1.0, 0.5, -2.0, 2.0, 3.0],
        [3.5, 2.0, 2.0, -1.0, -0.5],
        [0.5, 1.0, -1.0, 1.0, 3.5],
    ]
)

# latent means are the sum of a traffic and a vehicle term
AROUSAL_TCR = np.array([0.8, 0.0, -0.6])
AROUSAL_VCR = np.array([-0.3, 0.2, 0.3, 0.5, -0.1])
VALENCE_TCR = np.array([-0.8, -0.2, 0.5])
VALENCE_VCR = np.array([0.1, 0.0, -0.3, -0.2, 0.2])
LATENT_STD = 0.5

# emotion logits per sign quadrant (arousal > 0, valence > 0)
# cols: Anxiety, Peace, Weariness, Happiness, Anger
DER_QUADRANT = {
    (True, False): [3.0, 0.0, 0.0, -1.0, 3.0],
    (True, True): [0.0, 1.5, -1.0, 3.5, -1.0],
    (False, False): [0.5, 1.0, 3.5, -1.0, 0.0],
    (False, True): [-1.0, 4.0, 0.0, 0.5, -1.5],
}
DER_TCR = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 1.5],
        [1.0, 0.0, 0.5, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.5, 0.0],
    ]
)
DER_VCR = np.array(
    [
        [0.0, 0.5, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 0.5],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ]
)

# rows: emotion x (arousal > 0), cols: Smoking, Phone, LookAround, DozingOff,
# NormalDrive, Talking, BodyMove
DBR_LOGITS = {
    (0, True): [1.0, 0.0, 3.0, -2.0, 0.0, -1.0, 2.5],
    (0, False): [2.5, 0.0, 2.0, -1.0, 1.0, -1.0, 0.5],
    (1, True): [-1.0, 3.0, 1.5, -2.0, 1.5, 2.0, 0.0],
    (1, False): [0.0, 0.0, 0.0, 0.5, 3.5, 1.0, -1.0],
    (2, True): [2.5, 0.5, 0.0, 0.5, 1.0, -1.0, 1.0],
    (2, False): [1.0, -1.0, -1.0, 3.5, 1.5, -1.0, 0.0],
    (3, True): [-1.0, 2.5, 0.0, -2.0, 0.5, 3.0, 1.0],
    (3, False): [-1.0, 1.0, 0.0, -1.0, 2.0, 3.0, -1.0],
    (4, True): [1.0, 1.0, 0.5, -2.0, -1.0, 0.0, 3.5],
    (4, False): [2.5, 0.0, 1.0, -1.0, 0.5, -1.0, 2.0],
}

SHARPNESS = 1.5


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def calibrate(
    logits: np.ndarray, parents: np.ndarray, target: np.ndarray, iterations: int = 500
) -> np.ndarray:
    """
    Finds per-class biases so that `sum_j parents[j] softmax(logits[j] + b)`
    equals `target`, by iterative proportional fitting of the biases.

    :param logits: (P, C) affinities of P parent states.
    :param parents: (P,) probabilities of the parent states.
    """
    bias = np.zeros(logits.shape[1])
    for _ in range(iterations):
        induced = parents @ softmax(logits + bias)
        bias += np.log(target / induced)
        if np.max(np.abs(induced - target)) < 1e-12:
            break
    return softmax(logits + bias)


def positive_probability(mean: np.ndarray) -> np.ndarray:
    return 0.5 * (1 + np.vectorize(math.erf)(mean / (LATENT_STD * math.sqrt(2))))


def sign_probabilities() -> np.ndarray:
    """
    (3, 5, 2, 2) probabilities of the arousal and valence signs (index 1 for
    positive) given the traffic and vehicle context.
    """
    pa = positive_probability(arousal_mean())
    pv = positive_probability(valence_mean())
    arousal = np.stack([1 - pa, pa], axis=-1)
    valence = np.stack([1 - pv, pv], axis=-1)
    return arousal[..., :, None] * valence[..., None, :]


def arousal_mean() -> np.ndarray:
    return AROUSAL_TCR[:, None] + AROUSAL_VCR[None, :]


def valence_mean() -> np.ndarray:
    return VALENCE_TCR[:, None] + VALENCE_VCR[None, :]


def der_logits() -> np.ndarray:
    """
    (3, 5, 2, 2, 5) affinities indexed by traffic, vehicle, arousal sign,
    valence sign and emotion.
    """
    logits = np.zeros((3, 5, 2, 2, 5))
    for (a, v), base in DER_QUADRANT.items():
        logits[:, :, int(a), int(v)] = (
            np.array(base)[None, None, :] + DER_TCR[:, None, :] + DER_VCR[None, :, :]
        )
    return SHARPNESS * logits


def dbr_logits() -> np.ndarray:
    logits = np.zeros((5, 2, 7))
    for (der, a), row in DBR_LOGITS.items():
        logits[der, int(a)] = row
    return SHARPNESS * logits


@dataclass(frozen=True)
class SharpTables:
    vcr: np.ndarray  # (3, 5)
    der: np.ndarray  # (3, 5, 2, 2, 5)
    dbr: np.ndarray  # (5, 2, 7)


def blend(uniform: np.ndarray, sharp: np.ndarray, s: float) -> np.ndarray:
    return (1 - s) * uniform + s * sharp


@functools.lru_cache(maxsize=64)
def sharp_tables(causal_strength: float = 1.0) -> SharpTables:
    """
    The sharp tables calibrated for one causal strength. Each table is
    calibrated against the distribution of its parents under the blended
    tables upstream of it.
    """
    s = causal_strength
    vcr = calibrate(SHARPNESS * VCR_LOGITS, TARGETS["tcr"], TARGETS["vcr"])
    joint_context = TARGETS["tcr"][:, None] * blend(TARGETS["vcr"][None, :], vcr, s)

    signs = sign_probabilities()
    # (3, 5, 2, 2) joint of contexts and latent signs
    parents_der = joint_context[..., None, None] * signs
    flat_logits = der_logits().reshape(-1, 5)
    der = calibrate(flat_logits, parents_der.reshape(-1), TARGETS["der"]).reshape(
        3, 5, 2, 2, 5
    )

    # joint of emotion and arousal sign
    parents_dbr = np.einsum(
        "tcab,tcabd->da", parents_der, blend(TARGETS["der"], der, s)
    )
    dbr = calibrate(
        dbr_logits().reshape(-1, 7), parents_dbr.reshape(-1), TARGETS["dbr"]
    ).reshape(5, 2, 7)
    return SharpTables(vcr, der, dbr)


@dataclass(frozen=True)
class LabelTables:
    tcr: np.ndarray
    vcr: np.ndarray
    der: np.ndarray
    dbr: np.ndarray


def label_tables(causal_strength: float) -> LabelTables:
    """
    The conditional tables at the given causal strength. At strength 0 every
    label is drawn from its target marginal independently of its parents.
    """
    s = float(causal_strength)
    sharp = sharp_tables(s)
    return LabelTables(
        tcr=TARGETS["tcr"],
        vcr=blend(TARGETS["vcr"][None, :], sharp.vcr, s),
        der=blend(TARGETS["der"], sharp.der, s),
        dbr=blend(TARGETS["dbr"], sharp.dbr, s),
    )


def marginals(tables: LabelTables) -> Dict[str, np.ndarray]:
    """
    Exact label marginals implied by a set of tables.
    """
    signs = sign_probabilities()
    joint_context = tables.tcr[:, None] * tables.vcr
    parents_der = joint_context[..., None, None] * signs
    der_joint = parents_der[..., None] * tables.der
    parents_dbr = np.einsum("tcabd->da", der_joint)
    return {
        "tcr": tables.tcr,
        "vcr": joint_context.sum(axis=0),
        "der": der_joint.sum(axis=(0, 1, 2, 3)),
        "dbr": np.einsum("da,dak->k", parents_dbr, tables.dbr),
    }
