from dataclasses import dataclass
from typing import Dict, List, Mapping

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    confusion_matrix,
    precision_recall_fscore_support,
)

from ..errors import DataError
from ..tasks import NUM_CLASSES, TASK_NAMES


@dataclass
class TaskMetrics:
    task: str
    accuracy: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray


@dataclass
class MetricsReport:

    """
    Accuracy, macro-F1, per-class scores and confusion matrices of the four
    tasks on one split, together with the parameter counts of the model.
    """

    tasks: Dict[str, TaskMetrics]
    trainable: int = 0
    frozen: int = 0
    samples: int = 0

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([self.tasks[t].accuracy for t in TASK_NAMES]))

    def accuracies(self) -> Dict[str, float]:
        return {task: self.tasks[task].accuracy for task in TASK_NAMES}

    def summary(self) -> Dict[str, float]:
        values: Dict[str, float] = {}
        for task in TASK_NAMES:
            values[f"acc_{task}"] = self.tasks[task].accuracy
        values["macc"] = self.mean_accuracy
        for task in TASK_NAMES:
            values[f"f1_{task}"] = self.tasks[task].macro_f1
        return values


def task_metrics(task: str, y_true: np.ndarray, y_pred: np.ndarray) -> TaskMetrics:
    labels = list(range(NUM_CLASSES[task]))
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0
    )
    return TaskMetrics(
        task=task,
        accuracy=float(accuracy_score(y_true, y_pred)),
        macro_f1=float(np.mean(f1)),
        precision=np.asarray(precision, dtype=np.float64),
        recall=np.asarray(recall, dtype=np.float64),
        f1=np.asarray(f1, dtype=np.float64),
        support=np.asarray(support, dtype=np.int64),
        confusion=confusion_matrix(y_true, y_pred, labels=labels),
    )


def compute_metrics(
    labels: Mapping[str, np.ndarray],
    predictions: Mapping[str, np.ndarray],
    trainable: int = 0,
    frozen: int = 0,
) -> MetricsReport:
    n = len(labels[TASK_NAMES[0]])
    if n == 0:
        raise DataError("cannot evaluate an empty split")
    tasks = {
        task: task_metrics(
            task, np.asarray(labels[task]), np.asarray(predictions[task])
        )
        for task in TASK_NAMES
    }
    return MetricsReport(tasks, trainable, frozen, n)


def normalized_confusion(confusion: np.ndarray) -> np.ndarray:
    """
    Row-normalized confusion matrix; rows of classes without samples stay
    zero.
    """
    counts = confusion.sum(axis=1, keepdims=True).astype(np.float64)
    return np.divide(
        confusion, counts, out=np.zeros(confusion.shape), where=counts > 0
    )


def per_class_rows(
    report: MetricsReport, class_names: Mapping[str, List[str]]
) -> List[dict]:
    rows = []
    for task in TASK_NAMES:
        m = report.tasks[task]
        for c, name in enumerate(class_names[task]):
            rows.append(
                {
                    "task": task,
                    "class": name,
                    "precision": m.precision[c],
                    "recall": m.recall[c],
                    "f1": m.f1[c],
                    "support": int(m.support[c]),
                }
            )
    return rows
