import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans, kmeans_plusplus
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import silhouette_score

from ..errors import ConfigError, DataError, MissingFileError, StorageError
from ..mechanisms.random import derive_seed

logger = logging.getLogger(__name__)

MAX_ITER = 50
TOL = 1e-6


@dataclass
class DomainLabeler:

    """
    Unsupervised domain labels: the K-means clustering with the best
    silhouette over the candidate values of K.
    """

    k: int
    centroids: np.ndarray
    labels: np.ndarray
    silhouettes: Dict[int, float] = field(default_factory=dict)
    inertia: float = 0.0

    def assign(self, features: np.ndarray) -> np.ndarray:
        """
        Labels new points with their nearest centroid.
        """
        features = np.asarray(features, dtype=np.float64)
        distances = ((features[:, None, :] - self.centroids[None, :, :]) ** 2).sum(-1)
        return distances.argmin(axis=1)


def _check_features(features: np.ndarray, k_max: int) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ConfigError(f"expected an (N, d) feature matrix, got {features.shape}")
    if features.shape[0] < k_max + 1:
        raise ConfigError(
            f"domain fitting needs at least {k_max + 1} samples, "
            f"got {features.shape[0]}"
        )
    if np.allclose(features, features[0]):
        raise ConfigError("all domain features are identical, the data is degenerate")
    return features


def seeded_centers(features: np.ndarray, k: int, seed: int) -> np.ndarray:
    centers, _ = kmeans_plusplus(
        features, n_clusters=k, random_state=derive_seed(seed, "domains", k)
    )
    return centers


def run_kmeans(
    features: np.ndarray, k: int, seed: int, max_iter: int = MAX_ITER, tol: float = TOL
) -> KMeans:
    kmeans = KMeans(
        n_clusters=k,
        init=seeded_centers(features, k, seed),
        n_init=1,
        max_iter=max_iter,
        tol=tol,
        algorithm="lloyd",
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return kmeans.fit(features)


def fit_domain_labels(
    features: np.ndarray, k_range: Sequence[int] = range(2, 9), seed: int = 0
) -> DomainLabeler:
    """
    Runs K-means with k-means++ seeding for every K in `k_range` and keeps the
    clustering with the highest silhouette score (ties go to the smaller K).
    """
    k_values = sorted(k_range)
    if not k_values or k_values[0] < 2:
        raise ConfigError("domain counts must be at least 2")
    features = _check_features(features, k_values[-1])
    best: Optional[KMeans] = None
    best_k = 0
    silhouettes: Dict[int, float] = {}
    for k in k_values:
        kmeans = run_kmeans(features, k, seed)
        if len(np.unique(kmeans.labels_)) < 2:
            logger.debug("k = %d collapsed to a single cluster", k)
            continue
        score = float(silhouette_score(features, kmeans.labels_, metric="euclidean"))
        silhouettes[k] = score
        logger.debug("k = %d: silhouette %.4f", k, score)
        if best is None or score > silhouettes[best_k]:
            best, best_k = kmeans, k
    if best is None:
        raise ConfigError("no candidate K produced more than one cluster")
    logger.info("chose %d domains (silhouette %.4f)", best_k, silhouettes[best_k])
    return DomainLabeler(
        k=best_k,
        centroids=best.cluster_centers_,
        labels=best.labels_.astype(np.int64),
        silhouettes=silhouettes,
        inertia=float(best.inertia_),
    )


def inertia_trace(
    features: np.ndarray, k: int, seed: int = 0, iterations: int = MAX_ITER
) -> List[float]:
    """
    The K-means objective after each of the first `iterations` Lloyd
    iterations of the seeded run used by `fit_domain_labels`.
    """
    features = _check_features(features, k)
    return [
        float(run_kmeans(features, k, seed, max_iter=i, tol=0.0).inertia_)
        for i in range(1, iterations + 1)
    ]


def write_domains(
    path: Union[str, Path], sample_ids: Sequence[str], labels: np.ndarray
) -> None:
    frame = pd.DataFrame({"sample_id": list(sample_ids), "domain_id": labels})
    try:
        frame.to_csv(path, sep="\t", index=False)
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}")


def read_domains(path: Union[str, Path]) -> Dict[str, int]:
    if not Path(path).exists():
        raise MissingFileError(f"{path} does not exist")
    frame = pd.read_csv(path, sep="\t", dtype=str)
    if list(frame.columns) != ["sample_id", "domain_id"]:
        raise DataError(f"{path} has unexpected columns {list(frame.columns)}")
    try:
        domains = frame["domain_id"].astype(np.int64)
    except ValueError:
        raise DataError(f"{path} has non-integer domain ids")
    return dict(zip(frame["sample_id"], domains.astype(int)))
