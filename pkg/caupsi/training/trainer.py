import logging
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..autograd import backward, no_grad
from ..config import RunConfig
from ..dataset import Dataset
from ..errors import ConfigError, DataError, MissingFileError, TrainingError
from ..mechanisms import flip_batch, generator, mixup_batch
from ..model import CauPsi, domain_features, frozen_encoders, pool_views
from ..nn import ParamStore
from ..objective import DomainLabeler, class_weights, fit_domain_labels, total_loss
from ..objective import write_domains
from ..settings import worker_threads
from ..tasks import TASK_NAMES
from .ema import EmaShadow
from .metrics import MetricsReport, compute_metrics
from .optimizer import AdamW, clip_grads
from .reports import format_line, write_key_values, write_metrics, write_text
from .schedule import lr_at

logger = logging.getLogger(__name__)

Pooled = Dict[str, np.ndarray]


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_accuracy: Dict[str, float]
    val_macc: float
    wall_ms: int

    def values(self) -> Dict[str, object]:
        values: Dict[str, object] = {
            "epoch": self.epoch,
            "lr": self.lr,
            "train_loss": self.train_loss,
        }
        for task in TASK_NAMES:
            values[f"val_acc_{task}"] = self.val_accuracy[task]
        values["val_macc"] = self.val_macc
        values["wall_ms"] = self.wall_ms
        return values

    def line(self) -> str:
        return format_line(self.values())


class EarlyStopping:

    """
    Tracks the best validation score. Only strict improvements count; after
    `patience` epochs without one, training stops.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, score: float, epoch: int) -> bool:
        if score > self.best:
            self.best = score
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class FeatureBatch:
    ids: List[str]
    pooled: Pooled
    labels: Dict[str, np.ndarray]


@dataclass
class TrainBatch:
    ids: List[str]
    pooled: Pooled
    labels: Dict[str, np.ndarray]
    # unmixed features for the domain loss, only set when the batch was mixed
    clean: Optional[Pooled] = None
    labels_b: Optional[Dict[str, np.ndarray]] = None
    lam: Optional[np.ndarray] = None


@dataclass
class Prediction:
    ids: List[str]
    labels: Dict[str, np.ndarray]
    predictions: Dict[str, np.ndarray]
    psi: np.ndarray


@dataclass
class TrainResult:
    model: CauPsi
    history: List[EpochRecord]
    best_epoch: int
    best_val_macc: float
    domains: DomainLabeler
    test: Optional[MetricsReport] = None
    stopped_early: bool = False
    info: Dict[str, object] = field(default_factory=dict)


def predict(model: CauPsi, batches: List[FeatureBatch]) -> Prediction:
    """
    Evaluation-mode forward pass (no dropout, no mixup) over cached features.
    """
    ids: List[str] = []
    labels: Dict[str, List[np.ndarray]] = {task: [] for task in TASK_NAMES}
    predictions: Dict[str, List[np.ndarray]] = {task: [] for task in TASK_NAMES}
    psi = []
    with no_grad():
        for batch in batches:
            out = model.forward(batch.pooled, with_domain=False)
            ids.extend(batch.ids)
            for task, probs in zip(TASK_NAMES, out.probs):
                labels[task].append(batch.labels[task])
                predictions[task].append(probs.data.argmax(axis=-1))
            psi.append(out.psi.data)
    if not ids:
        raise DataError("cannot evaluate an empty split")
    return Prediction(
        ids,
        {task: np.concatenate(v) for task, v in labels.items()},
        {task: np.concatenate(v) for task, v in predictions.items()},
        np.concatenate(psi).astype(np.float64),
    )


class Trainer:

    """
    Trains a CauPsi model on a dataset: domain discovery on the frozen
    encoder features of the training split, then epochs of accumulated
    mini-batch updates with an EMA shadow that is validated after every
    epoch. The best shadow is kept and evaluated on the test split.

    Batch assembly (loading, flipping, mixing and the frozen encoders) runs
    on worker threads; everything that mutates the model runs on the calling
    thread. All randomness comes from named streams of `train.seed`, so a
    run is determined by its configuration.
    """

    def __init__(
        self,
        config: RunConfig,
        dataset: Dataset,
        out_dir: Optional[Union[str, Path]] = None,
        threads: Optional[int] = None,
    ):
        self.config = config.copy()
        self.dataset = dataset
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.threads = worker_threads(threads)
        self.seed = self.config.train.seed
        self.encoders = frozen_encoders(self.config.model, self.seed)
        for split in ("train", "val"):
            if dataset.len(split) == 0:
                raise DataError(f"the {split} split is empty")
        size = dataset.clip_shape[-1]
        expected = self.config.model.frame_size
        if size != expected:
            raise ConfigError(
                f"frames are {size} pixels wide, the model expects {expected}"
            )

    def pool(self, clips: Mapping[str, np.ndarray]) -> Pooled:
        return pool_views(self.encoders, clips)

    def features(self, split: str) -> List[FeatureBatch]:
        """
        Frozen-encoder features of a split, in evaluation batches.
        """
        size = self.config.train.eval_batch_size

        def load(ids: List[str]) -> FeatureBatch:
            batch = self.dataset.batch(ids)
            return FeatureBatch(batch.ids, self.pool(batch.clips), batch.labels)

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(load, self.dataset.batch_ids(split, size)))

    def fit_domains(self, train: List[FeatureBatch]) -> DomainLabeler:
        features = np.concatenate([domain_features(b.pooled) for b in train])
        loss = self.config.loss
        k = self.config.model.num_domains
        k_range = [k] if k else range(loss.domain_k_min, loss.domain_k_max + 1)
        return fit_domain_labels(features, k_range, seed=self.seed)

    def prepare(self, ids: List[str], epoch: int, index: int) -> TrainBatch:
        """
        Loads, flips and mixes one training batch and runs the frozen
        encoders. Runs on a worker thread.
        """
        cfg = self.config.train
        rng = generator(self.seed, "augment", epoch, index)
        batch = self.dataset.batch(ids)
        clips = flip_batch(batch.clips, cfg.flip_p, rng)
        mixed = mixup_batch(clips, batch.labels, cfg.mixup_alpha, rng)
        if np.all(mixed.lam == 1.0):
            return TrainBatch(batch.ids, self.pool(clips), batch.labels)
        return TrainBatch(
            batch.ids,
            self.pool(mixed.clips),
            mixed.labels_a,
            clean=self.pool(clips),
            labels_b=mixed.labels_b,
            lam=mixed.lam,
        )

    def train_batches(self, epoch: int) -> Iterator[TrainBatch]:
        """
        Yields the prepared batches of an epoch in order, keeping a window of
        batches in flight on the worker threads.
        """
        rng = generator(self.seed, "shuffle", epoch)
        batches = self.dataset.batch_ids("train", self.config.train.batch_size, rng)
        window = 2 * self.threads
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            pending: List[Future] = []
            for index, ids in enumerate(batches):
                pending.append(pool.submit(self.prepare, ids, epoch, index))
                if len(pending) >= window:
                    yield pending.pop(0).result()
            for future in pending:
                yield future.result()

    def micro_step(
        self,
        model: CauPsi,
        batch: TrainBatch,
        domains: Mapping[str, int],
        weights: Mapping[str, np.ndarray],
        rng: np.random.Generator,
    ) -> float:
        """
        Forward and backward pass of one micro-batch; gradients accumulate in
        the parameter store.
        """
        lambda_grl = self.config.loss.lambda_grl
        domain_labels = np.array([domains[i] for i in batch.ids], dtype=np.int64)
        if batch.clean is None:
            out = model.forward(
                batch.pooled, train=True, rng=rng, lambda_grl=lambda_grl
            )
            domain_logits = out.domain_logits
        else:
            out = model.forward(batch.pooled, train=True, rng=rng, with_domain=False)
            z = model.shared_representation(batch.clean)
            domain_logits = model.domain_logits(z, lambda_grl)
        loss = total_loss(
            out.probs,
            batch.labels,
            domain_logits,
            domain_labels,
            self.config.loss,
            weights,
            labels_b=batch.labels_b,
            lam=batch.lam,
        )
        value = float(loss.total.data)
        if not np.isfinite(value):
            raise TrainingError(
                f"the loss is not finite ({value}) on batch {batch.ids[0]}"
            )
        backward(loss.total)
        return value

    def apply_step(
        self, model: CauPsi, optimizer: AdamW, ema: EmaShadow, count: int, lr: float
    ) -> None:
        """
        Averages the gradients accumulated over `count` micro-batches, clips
        them and takes one optimizer step.
        """
        params = optimizer.params
        for _, tensor in params:
            if tensor.grad is not None:
                tensor.grad /= count
        clip_grads(params, self.config.train.clip_norm)
        optimizer.step(lr)
        optimizer.zero_grad()
        ema.update(model.params)

    def evaluate(self, model: CauPsi, batches: List[FeatureBatch]) -> MetricsReport:
        prediction = predict(model, batches)
        return compute_metrics(
            prediction.labels,
            prediction.predictions,
            trainable=model.params.count(True),
            frozen=model.params.count(False),
        )

    def write(self, name: str, text: str) -> None:
        if self.out_dir is not None:
            write_text(self.out_dir / name, text)

    def train(self) -> TrainResult:
        cfg = self.config.train
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        train_features = self.features("train")
        domains = self.fit_domains(train_features)
        self.config.model.num_domains = domains.k
        train_ids = [i for b in train_features for i in b.ids]
        domain_of = dict(zip(train_ids, domains.labels.tolist()))
        del train_features
        if self.out_dir is not None:
            self.config.save(self.out_dir / "config.txt")
            write_domains(self.out_dir / "domains.tsv", train_ids, domains.labels)

        model = CauPsi(self.config.model, seed=self.seed)
        weights = class_weights(self.dataset.labels("train"))
        optimizer = AdamW(model.params.trainable(), cfg)
        ema = EmaShadow(model.params, cfg.ema_beta, cfg.ema_warmup)
        val_features = self.features("val")
        stopping = EarlyStopping(cfg.patience)
        history: List[EpochRecord] = []
        best_store: Optional[ParamStore] = None
        log_lines: List[str] = []
        logger.info(
            "training %d trainable values on %d samples (%d domains)",
            model.params.count(True),
            self.dataset.len("train"),
            domains.k,
        )

        for epoch in range(cfg.max_epochs):
            start = time.perf_counter()
            lr = lr_at(epoch, cfg)
            dropout_rng = generator(self.seed, "dropout", epoch)
            losses = []
            pending = 0
            progress = tqdm(
                self.train_batches(epoch),
                total=len(self.dataset.batch_ids("train", cfg.batch_size)),
                desc=f"epoch {epoch + 1}",
                leave=False,
                disable=None if cfg.progress else True,
            )
            for batch in progress:
                loss = self.micro_step(model, batch, domain_of, weights, dropout_rng)
                losses.append(loss)
                pending += 1
                if pending == cfg.accum_steps:
                    self.apply_step(model, optimizer, ema, pending, lr)
                    pending = 0
            if pending:
                self.apply_step(model, optimizer, ema, pending, lr)

            shadow = ema.store(model.params)
            report = self.evaluate(model.with_params(shadow), val_features)
            record = EpochRecord(
                epoch=epoch + 1,
                lr=lr,
                train_loss=float(np.mean(losses)),
                val_accuracy=report.accuracies(),
                val_macc=report.mean_accuracy,
                wall_ms=int(1000 * (time.perf_counter() - start)),
            )
            history.append(record)
            log_lines.append(record.line())
            logger.info(record.line())
            self.write("metrics.log", "".join(f"{line}\n" for line in log_lines))
            if stopping.update(record.val_macc, record.epoch):
                best_store = shadow
                if self.out_dir is not None:
                    shadow.save(self.out_dir / "model.ckpt")
            if stopping.should_stop:
                logger.info(
                    "no improvement for %d epochs, stopping after epoch %d",
                    cfg.patience,
                    record.epoch,
                )
                break

        assert best_store is not None
        best = model.with_params(best_store)
        result = TrainResult(
            model=best,
            history=history,
            best_epoch=stopping.best_epoch,
            best_val_macc=float(stopping.best),
            domains=domains,
            stopped_early=stopping.should_stop,
        )
        if self.dataset.len("test"):
            result.test = self.evaluate(best, self.features("test"))
            if self.out_dir is not None:
                write_metrics(result.test, self.out_dir / "test")
        result.info = run_info(self.config, result)
        if self.out_dir is not None:
            write_key_values(self.out_dir / "run_info.txt", result.info)
        return result


def run_info(config: RunConfig, result: TrainResult) -> Dict[str, object]:
    model = config.model
    info: Dict[str, object] = {
        "ablations": ",".join(model.ablations) or "none",
        "psi_forced_zero": model.psi_forced_zero,
        "num_domains": result.domains.k,
        "epochs": len(result.history),
        "best_epoch": result.best_epoch,
        "best_val_macc": result.best_val_macc,
        "params_trainable": result.model.params.count(True),
        "params_frozen": result.model.params.count(False),
    }
    if result.test is not None:
        info["test_macc"] = result.test.mean_accuracy
    return info


def load_model(
    checkpoint: Union[str, Path], config: Optional[RunConfig] = None
) -> Tuple[RunConfig, CauPsi]:
    """
    Loads a checkpoint together with the configuration it was trained with,
    by default the `config.txt` next to it.
    """
    checkpoint = Path(checkpoint)
    if config is None:
        path = checkpoint.parent / "config.txt"
        if not path.is_file():
            raise MissingFileError(f"no config.txt next to {checkpoint}")
        config = RunConfig.load(path)
    if config.model.num_domains < 2:
        raise ConfigError("the configuration does not fix the number of domains")
    model = CauPsi(config.model, seed=config.train.seed)
    model.params.load(checkpoint)
    return config, model


def evaluate_split(
    model: CauPsi, dataset: Dataset, split: str, batch_size: int = 64
) -> Tuple[MetricsReport, Prediction]:
    """
    Metrics and per-sample predictions of a model on one split.
    """
    if dataset.len(split) == 0:
        raise DataError(f"the {split} split is empty")
    batches = []
    for batch in dataset.batches(split, batch_size):
        batches.append(FeatureBatch(batch.ids, model.pool(batch.clips), batch.labels))
    prediction = predict(model, batches)
    report = compute_metrics(
        prediction.labels,
        prediction.predictions,
        trainable=model.params.count(True),
        frozen=model.params.count(False),
    )
    return report, prediction
