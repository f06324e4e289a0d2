"""
Writers of the text and CSV artifacts of a run directory. All CSV files have
a header row; floats are written with six decimals.
"""

from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import StorageError
from ..model.ctpc import psi_class_means, psi_frame
from ..tasks import NUM_CLASSES, TASK_NAMES, TASKS
from .metrics import MetricsReport, normalized_confusion, per_class_rows

PathLike = Union[str, Path]
CLASS_NAMES = {task.name: list(task.classes) for task in TASKS}


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6f}"
    return str(value)


def format_line(values: Mapping[str, Any]) -> str:
    """
    One `key=value` record, the format of `metrics.log`.
    """
    return " ".join(f"{key}={format_value(value)}" for key, value in values.items())


def write_text(path: PathLike, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}")


def write_key_values(path: PathLike, values: Mapping[str, Any]) -> None:
    write_text(path, "".join(f"{k} = {format_value(v)}\n" for k, v in values.items()))


def read_key_values(path: PathLike) -> Dict[str, str]:
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def write_csv(path: PathLike, frame: pd.DataFrame) -> None:
    try:
        frame.to_csv(path, index=False, float_format="%.6f")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}")


def write_metrics(report: MetricsReport, directory: PathLike) -> None:
    """
    Writes `metrics.txt`, `per_class.csv` and one row-normalized
    `confusion_<task>.csv` per task.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    summary: Dict[str, Any] = dict(report.summary())
    summary["samples"] = report.samples
    summary["params_trainable"] = report.trainable
    summary["params_frozen"] = report.frozen
    write_key_values(directory / "metrics.txt", summary)
    write_csv(
        directory / "per_class.csv",
        pd.DataFrame(per_class_rows(report, CLASS_NAMES)),
    )
    for task in TASK_NAMES:
        confusion = normalized_confusion(report.tasks[task].confusion)
        frame = pd.DataFrame(confusion, columns=CLASS_NAMES[task])
        frame.insert(0, "true", CLASS_NAMES[task])
        write_csv(directory / f"confusion_{task}.csv", frame)


def write_psi(
    ids: Sequence[str],
    psi: np.ndarray,
    labels: Mapping[str, np.ndarray],
    directory: PathLike,
) -> Dict[str, np.ndarray]:
    """
    Writes the psi vector of every sample to `psi_raw.csv` and the per-class
    means to `psi_class_means_<task>.csv`. Classes without samples get empty
    cells. Returns the class means per task.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    raw = psi_frame(psi, labels)
    raw.insert(0, "sample_id", list(ids))
    write_csv(directory / "psi_raw.csv", raw)
    columns = [c for c in raw.columns if c.startswith("psi_")]
    means = psi_class_means(psi, labels, NUM_CLASSES)
    out = {}
    for task, (values, _) in means.items():
        frame = pd.DataFrame(values, columns=columns)
        frame.insert(0, "class", CLASS_NAMES[task])
        write_csv(directory / f"psi_class_means_{task}.csv", frame)
        out[task] = values
    return out
