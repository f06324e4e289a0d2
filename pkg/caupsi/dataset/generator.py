import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import mutual_info_score

from ..config import GeneratorConfig
from ..errors import StorageError, UsageError
from ..mechanisms.random import generator
from ..settings import worker_threads
from ..tasks import NUM_CLASSES, TASK_NAMES
from .dataset import SPLITS, VIEWS, SampleRecord, clip_path, format_shape
from .tables import LATENT_STD, LabelTables, arousal_mean, label_tables, valence_mean

logger = logging.getLogger(__name__)

CHANNELS = 3


def split_sizes(n: int) -> Tuple[int, int, int]:
    """
    65/15/20 split: train is rounded down, val to the nearest integer and
    test takes the remainder (2898 -> 1883/435/580).
    """
    train = int(np.floor(0.65 * n))
    val = int(np.floor(0.15 * n + 0.5))
    return train, val, n - train - val


def assign_splits(n: int, seed: int) -> List[str]:
    order = generator(seed, "split").permutation(n)
    train, val, _ = split_sizes(n)
    splits = np.empty(n, dtype=object)
    splits[order[:train]] = "train"
    splits[order[train : train + val]] = "val"
    splits[order[train + val :]] = "test"
    return list(splits)


def sample_id(index: int) -> str:
    return f"s{index:05d}"


@dataclass
class Patterns:

    """
    The fixed images the clips are composed of, drawn once per dataset seed.
    """

    scene_tcr: np.ndarray
    scene_vcr: np.ndarray
    view_mix: Dict[str, np.ndarray]
    face_der: np.ndarray
    face_arousal: np.ndarray
    body_dbr: np.ndarray
    body_arousal: np.ndarray
    inside_vcr: np.ndarray

    @classmethod
    def draw(cls, seed: int, size: int) -> "Patterns":
        rng = generator(seed, "patterns")
        shape = (CHANNELS, size, size)

        def images(count: int) -> np.ndarray:
            return rng.standard_normal((count,) + shape)

        def channel_mix() -> np.ndarray:
            return np.eye(CHANNELS) + 0.3 * rng.standard_normal((CHANNELS, CHANNELS))

        return cls(
            scene_tcr=images(3),
            scene_vcr=images(5),
            view_mix={"front": channel_mix(), "side": channel_mix()},
            face_der=images(5),
            face_arousal=images(1)[0],
            body_dbr=images(7),
            body_arousal=images(1)[0],
            inside_vcr=images(5),
        )


def draw_labels(
    rng: np.random.Generator, tables: LabelTables
) -> Tuple[Dict[str, int], Tuple[float, float]]:
    tcr = int(rng.choice(3, p=tables.tcr))
    vcr = int(rng.choice(5, p=tables.vcr[tcr]))
    arousal = float(rng.normal(arousal_mean()[tcr, vcr], LATENT_STD))
    valence = float(rng.normal(valence_mean()[tcr, vcr], LATENT_STD))
    a, v = int(arousal > 0), int(valence > 0)
    der = int(rng.choice(5, p=tables.der[tcr, vcr, a, v]))
    dbr = int(rng.choice(7, p=tables.dbr[der, a]))
    return {"tcr": tcr, "vcr": vcr, "der": der, "dbr": dbr}, (arousal, valence)


def ar1_noise(
    rng: np.random.Generator, frames: int, shape: Tuple[int, ...], rho: float
) -> np.ndarray:
    """
    Temporally correlated unit-variance noise of shape (frames, *shape).
    """
    noise = np.empty((frames,) + shape)
    noise[0] = rng.standard_normal(shape)
    innovation = np.sqrt(1 - rho * rho)
    for t in range(1, frames):
        noise[t] = rho * noise[t - 1] + innovation * rng.standard_normal(shape)
    return noise


def render_sample(
    index: int, cfg: GeneratorConfig, patterns: Patterns, tables: LabelTables
) -> SampleRecord:
    """
    Draws the labels, the latent and the six clips of one sample. Everything
    comes from the sample's own stream, so samples can be rendered in any
    order.
    """
    rng = generator(cfg.data_seed, "sample", index)
    labels, (arousal, valence) = draw_labels(rng, tables)
    p = patterns

    scene = (
        cfg.scene_separation
        * (p.scene_tcr[labels["tcr"]] + p.scene_vcr[labels["vcr"]])
        / np.sqrt(2)
    )
    face = cfg.face_separation * p.face_der[labels["der"]] + (
        cfg.arousal_gain * arousal * p.face_arousal
    )
    body = cfg.body_separation * p.body_dbr[labels["dbr"]] + (
        cfg.arousal_gain * arousal * p.body_arousal
    )
    side = np.einsum("dc,chw->dhw", p.view_mix["side"], scene)
    bases = {
        "front": np.einsum("dc,chw->dhw", p.view_mix["front"], scene),
        "left": side,
        "right": side[..., ::-1],
        "inside": 0.5 * (face + body) + cfg.inside_cue * p.inside_vcr[labels["vcr"]],
        "face": face,
        "body": body,
    }
    sigma = cfg.noise_sigma * cfg.difficulty
    clips = {}
    for view in VIEWS:
        base = bases[view]
        noise = ar1_noise(rng, cfg.clip_frames, base.shape, cfg.temporal_rho)
        frames = base[None] + sigma * noise
        clips[view] = frames.transpose(1, 0, 2, 3).astype(np.float32)
    return SampleRecord(sample_id(index), clips, labels, (arousal, valence))


def sample_labels(cfg: GeneratorConfig, n: Optional[int] = None) -> pd.DataFrame:
    """
    The labels and latents of the first `n` samples without rendering clips;
    identical to those of `generate`.
    """
    tables = label_tables(cfg.causal_strength)
    rows = []
    for index in range(cfg.n_samples if n is None else n):
        labels, (arousal, valence) = draw_labels(
            generator(cfg.data_seed, "sample", index), tables
        )
        rows.append(
            {
                "sample_id": sample_id(index),
                **labels,
                "arousal": arousal,
                "valence": valence,
            }
        )
    return pd.DataFrame(rows)


def mutual_information(x: np.ndarray, y: np.ndarray) -> float:
    """
    Plug-in estimate of the mutual information of two label columns, in nats.
    """
    return float(mutual_info_score(x, y))


@dataclass
class GenerationSummary:
    n_samples: int
    split_counts: Dict[str, int]
    marginals: Dict[str, np.ndarray]
    mi_der_dbr: float

    def lines(self) -> List[str]:
        lines = [f"samples = {self.n_samples}"]
        for split in SPLITS:
            lines.append(f"{split} = {self.split_counts[split]}")
        for task in TASK_NAMES:
            values = " ".join(f"{v:.4f}" for v in self.marginals[task])
            lines.append(f"marginal_{task} = {values}")
        lines.append(f"mi_der_dbr = {self.mi_der_dbr:.6f}")
        return lines


def summarize(manifest: pd.DataFrame) -> GenerationSummary:
    marginals = {
        task: np.bincount(manifest[task], minlength=NUM_CLASSES[task]) / len(manifest)
        for task in TASK_NAMES
    }
    counts = {split: int((manifest["split"] == split).sum()) for split in SPLITS}
    return GenerationSummary(
        len(manifest),
        counts,
        marginals,
        mutual_information(manifest["der"], manifest["dbr"]),
    )


def prepare_output(out_dir: Path, force: bool) -> None:
    if out_dir.exists() and any(out_dir.iterdir()):
        if not force:
            raise UsageError(f"{out_dir} is not empty, use --force to overwrite it")
        # only remove what a previous generation wrote
        shutil.rmtree(out_dir / "clips", ignore_errors=True)
        for name in ("manifest.tsv", "latents.tsv"):
            (out_dir / name).unlink(missing_ok=True)
    (out_dir / "clips").mkdir(parents=True, exist_ok=True)


def generate(
    cfg: GeneratorConfig,
    out_dir: Union[str, Path],
    threads: Optional[int] = None,
    force: bool = False,
) -> GenerationSummary:
    """
    Writes a synthetic dataset: `manifest.tsv`, `latents.tsv` and one raw
    little-endian float32 file per sample and view under `clips/`.
    """
    out_dir = Path(out_dir)
    try:
        prepare_output(out_dir, force)
    except OSError as e:
        raise StorageError(f"cannot prepare {out_dir}: {e}")
    patterns = Patterns.draw(cfg.data_seed, cfg.clip_size)
    tables = label_tables(cfg.causal_strength)
    splits = assign_splits(cfg.n_samples, cfg.data_seed)
    shape = format_shape((CHANNELS, cfg.clip_frames, cfg.clip_size, cfg.clip_size))

    def write(index: int) -> SampleRecord:
        record = render_sample(index, cfg, patterns, tables)
        for view, clip in record.clips.items():
            path = out_dir / clip_path(record.sample_id, view)
            try:
                clip.astype("<f4").tofile(path)
            except OSError as e:
                raise StorageError(f"cannot write {path}: {e}")
        record.clips = {}
        return record

    with ThreadPoolExecutor(max_workers=worker_threads(threads)) as pool:
        records = list(pool.map(write, range(cfg.n_samples)))

    manifest = pd.DataFrame(
        [
            {
                "sample_id": r.sample_id,
                "split": splits[index],
                **r.labels,
                **{view: clip_path(r.sample_id, view) for view in VIEWS},
                "shape": shape,
            }
            for index, r in enumerate(records)
        ]
    )
    latents = pd.DataFrame(
        {
            "sample_id": [r.sample_id for r in records],
            "arousal": [r.latent[0] for r in records],
            "valence": [r.latent[1] for r in records],
        }
    )
    try:
        manifest.to_csv(out_dir / "manifest.tsv", sep="\t", index=False)
        latents.to_csv(
            out_dir / "latents.tsv", sep="\t", index=False, float_format="%.9g"
        )
    except OSError as e:
        raise StorageError(f"cannot write the manifest: {e}")
    summary = summarize(manifest)
    logger.info(
        "generated %d samples in %s (MI(der; dbr) = %.4f)",
        cfg.n_samples,
        out_dir,
        summary.mi_der_dbr,
    )
    return summary
