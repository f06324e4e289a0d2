import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError, LabelRangeError, MissingFileError
from ..errors import ShapeMismatchError
from ..tasks import NUM_CLASSES, TASK_NAMES
from .dataset import SPLITS, VIEWS, Dataset, parse_shape

logger = logging.getLogger(__name__)

MANIFEST = "manifest.tsv"
COLUMNS = ("sample_id", "split") + TASK_NAMES + VIEWS + ("shape",)


class PandasDataset(Dataset):

    """
    A dataset indexed by a tab-separated manifest with one row per sample.
    Every view of a sample is a raw little-endian float32 file holding a
    (C, T, H, W) clip, referenced relative to the manifest's directory.
    """

    def __init__(self, df: pd.DataFrame, root: Union[str, Path]):
        self.df = df.set_index("sample_id", drop=False)
        self.root = Path(root)
        shapes = self.df["shape"].unique()
        if len(shapes) != 1:
            raise ShapeMismatchError(f"clips of different shapes: {list(shapes)}")
        self._shape = parse_shape(shapes[0])

    @classmethod
    def load(
        cls, directory: Union[str, Path], check_files: bool = True
    ) -> "PandasDataset":
        """
        Reads and validates the manifest of a dataset directory.

        :raises MissingFileError: if the manifest or a clip file is missing.
        :raises ShapeMismatchError: if a clip file does not hold exactly one
          clip of the declared shape.
        :raises LabelRangeError: if a label is outside its class range.
        """
        root = Path(directory)
        path = root / MANIFEST
        if not path.is_file():
            raise MissingFileError(f"no {MANIFEST} in {root}")
        try:
            df = pd.read_csv(path, sep="\t", dtype={"sample_id": str, "shape": str})
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataError(f"cannot parse {path}: {e}")
        missing = [c for c in COLUMNS if c not in df.columns]
        if missing:
            raise DataError(f"{path} lacks the columns {', '.join(missing)}")
        if df["sample_id"].duplicated().any():
            raise DataError(f"{path} has duplicate sample ids")
        unknown = set(df["split"]) - set(SPLITS)
        if unknown:
            raise DataError(f"unknown splits in {path}: {sorted(unknown)}")
        for task in TASK_NAMES:
            labels = df[task]
            outside = (labels < 0) | (labels >= NUM_CLASSES[task])
            if labels.isna().any() or outside.any():
                raise LabelRangeError(
                    f"{task} labels must be in [0, {NUM_CLASSES[task]}) in {path}"
                )
            df[task] = labels.astype(np.int64)
        dataset = cls(df, root)
        if check_files:
            dataset.check_files()
        logger.debug("loaded %d samples from %s", len(df), root)
        return dataset

    def check_files(self) -> None:
        expected = int(np.prod(self._shape)) * 4
        for view in VIEWS:
            for relative in self.df[view]:
                path = self.root / relative
                if not path.is_file():
                    raise MissingFileError(f"missing clip file {path}")
                size = path.stat().st_size
                if size != expected:
                    raise ShapeMismatchError(
                        f"{path} holds {size} bytes, expected {expected}"
                    )

    @property
    def clip_shape(self) -> Tuple[int, int, int, int]:
        return self._shape  # type: ignore[return-value]

    def ids(self, split: Optional[str] = None) -> List[str]:
        if split is None:
            return list(self.df["sample_id"])
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}")
        return list(self.df.loc[self.df["split"] == split, "sample_id"])

    def labels(self, split: Optional[str] = None) -> Dict[str, np.ndarray]:
        rows = self.df.loc[self.ids(split)]
        return {task: rows[task].to_numpy(dtype=np.int64) for task in TASK_NAMES}

    def sample_labels(self, sample_id: str) -> Dict[str, int]:
        row = self.df.loc[sample_id]
        return {task: int(row[task]) for task in TASK_NAMES}

    def clip(self, sample_id: str, view: str) -> np.ndarray:
        path = self.root / self.df.at[sample_id, view]
        try:
            data = np.fromfile(path, dtype="<f4")
        except FileNotFoundError:
            raise MissingFileError(f"missing clip file {path}")
        if data.size != np.prod(self._shape):
            raise ShapeMismatchError(f"{path} does not hold a {self._shape} clip")
        return data.reshape(self._shape).astype(np.float32, copy=False)

    def latents(self) -> Optional[pd.DataFrame]:
        """
        The (arousal, valence) latents of a generated dataset, if present.
        """
        path = self.root / "latents.tsv"
        if not path.is_file():
            return None
        return pd.read_csv(path, sep="\t", dtype={"sample_id": str}).set_index(
            "sample_id"
        )
