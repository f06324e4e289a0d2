import os
import shutil
import tempfile
import unittest

import numpy as np
import pandas as pd

from caupsi.autograd import Tensor, backward
from caupsi.config import LossConfig, TrainConfig
from caupsi.dataset import PandasDataset, generate
from caupsi.errors import ConfigError, DataError, ShapeError, TrainingError
from caupsi.mechanisms import flip_batch, generator, mixup_batch
from caupsi.model import CauPsi
from caupsi.nn import ParamStore
from caupsi.objective import total_loss
from caupsi.tasks import NUM_CLASSES, TASK_NAMES
from caupsi.training import (
    AdamW,
    EarlyStopping,
    EmaShadow,
    Trainer,
    clip_grads,
    compute_metrics,
    ema_update,
    evaluate_split,
    global_norm,
    load_model,
    lr_at,
    normalized_confusion,
    write_metrics,
    write_psi,
)
from caupsi.training.reports import format_line, read_key_values

from .helpers import random_pooled, toy_model_config, toy_run_config


class ScheduleTest(unittest.TestCase):
    def test_reference_values(self):
        cfg = TrainConfig()
        assert abs(lr_at(0, cfg) - 6e-5) < 1e-15
        assert abs(lr_at(4, cfg) - 3e-4) < 1e-15
        assert abs(lr_at(5, cfg) - 3e-4) < 1e-15
        assert abs(lr_at(100, cfg) - 1e-6) < 1e-15

    def test_cosine_midpoint(self):
        cfg = TrainConfig(warmup_epochs=0, max_epochs=10)
        assert abs(lr_at(5, cfg) - (1e-6 + 3e-4) / 2) < 1e-15

    def test_decreasing_after_warmup(self):
        cfg = TrainConfig()
        rates = [lr_at(e, cfg) for e in range(5, 101)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_out_of_range(self):
        with self.assertRaises(ConfigError):
            lr_at(101, TrainConfig())
        with self.assertRaises(ConfigError):
            lr_at(-1, TrainConfig())


class EmaTest(unittest.TestCase):
    def store(self, value):
        store = ParamStore(0)
        store.add("w", np.full(3, value))
        store.add("frozen", np.zeros(2), trainable=False)
        return store

    def test_closed_form(self):
        params = self.store(2.0)
        ema = EmaShadow(params, 0.9, warmup=False)
        params["w"].data[:] = 5.0
        for _ in range(7):
            ema.update(params)
        expected = 0.9 ** 7 * 2.0 + (1 - 0.9 ** 7) * 5.0
        np.testing.assert_allclose(ema.values["w"], expected, atol=1e-6)
        assert "frozen" not in ema.values

    def test_warmup_decay(self):
        ema = EmaShadow(self.store(0.0), 0.999)
        assert ema.decay() == 0.1
        ema.steps = 10_000
        assert ema.decay() == 0.999
        assert EmaShadow(self.store(0.0), 0.999, warmup=False).decay() == 0.999

    def test_store_is_a_copy(self):
        params = self.store(1.0)
        ema = EmaShadow(params, 0.5, warmup=False)
        params["w"].data[:] = 3.0
        ema.update(params)
        shadow = ema.store(params)
        np.testing.assert_allclose(shadow["w"].data, 2.0)
        np.testing.assert_allclose(params["w"].data, 3.0)
        assert not shadow["frozen"].requires_grad

    def test_invalid_updates(self):
        with self.assertRaises(ConfigError):
            ema_update({"w": np.zeros(2)}, {"w": np.zeros(2)}, 1.5)
        with self.assertRaises(ShapeError):
            ema_update({"w": np.zeros(2)}, {"w": np.zeros(3)}, 0.5)


class OptimizerTest(unittest.TestCase):
    def params(self, grads):
        tensors = []
        for i, grad in enumerate(grads):
            t = Tensor(np.ones(len(grad)), requires_grad=True)
            t.grad = np.array(grad, dtype=np.float64)
            tensors.append((f"p{i}", t))
        return tensors

    def test_clipping(self):
        params = self.params([[6.0, 0.0], [0.0, 8.0]])
        assert global_norm(params) == 10.0
        assert clip_grads(params, 5.0) == 0.5
        assert abs(global_norm(params) - 5.0) < 1e-12
        np.testing.assert_allclose(params[0][1].grad, [3.0, 0.0])

    def test_small_gradients_are_kept(self):
        params = self.params([[0.3, 0.4]])
        assert clip_grads(params, 5.0) == 1.0
        np.testing.assert_allclose(params[0][1].grad, [0.3, 0.4])

    def test_non_finite_gradient(self):
        with self.assertRaises(TrainingError):
            clip_grads(self.params([[1.0, np.nan]]))

    def test_decoupled_decay(self):
        cfg = TrainConfig(weight_decay=0.1)
        params = self.params([[2.0, -3.0], [0.0, 0.0]])
        AdamW(params, cfg).step(0.01)
        # the first Adam step moves every coordinate by lr * sign(grad)
        np.testing.assert_allclose(params[0][1].data, [0.999 - 0.01, 0.999 + 0.01])
        np.testing.assert_allclose(params[1][1].data, [0.999, 0.999])

    def test_frozen_parameters_stay(self):
        model = CauPsi(toy_model_config(), seed=0)
        frozen = {path: t.data.copy() for path, t in model.params.frozen()}
        trainable = model.params.trainable()
        for _, t in trainable:
            t.grad = np.ones_like(t.data)
        optimizer = AdamW(trainable, TrainConfig())
        optimizer.step(1e-3)
        optimizer.zero_grad()
        for path, values in frozen.items():
            np.testing.assert_array_equal(model.params[path].data, values)
        assert all(t.grad is None or not t.grad.any() for _, t in trainable)


class EarlyStoppingTest(unittest.TestCase):
    def test_flat_scores_stop_after_patience(self):
        stopping = EarlyStopping(patience=4)
        stopped = None
        for epoch in range(1, 20):
            stopping.update(0.5, epoch)
            if stopping.should_stop:
                stopped = epoch
                break
        assert stopped == 5
        assert stopping.best_epoch == 1

    def test_only_strict_improvements_count(self):
        stopping = EarlyStopping(patience=2)
        assert stopping.update(0.4, 1)
        assert stopping.update(0.6, 2)
        assert not stopping.update(0.6, 3)
        assert stopping.best_epoch == 2
        assert not stopping.should_stop
        assert not stopping.update(0.5, 4)
        assert stopping.should_stop


class AccumulationTest(unittest.TestCase):
    def gradients(self, model, n, micro):
        """
        Gradients of one batch of n samples and the averaged gradients of
        the same batch split into `micro` equal micro-batches.
        """
        pooled = random_pooled(n=n, dtype=model.dtype)
        rng = np.random.default_rng(0)
        labels = {t: rng.integers(0, NUM_CLASSES[t], n) for t in TASK_NAMES}
        weights = {t: np.ones(NUM_CLASSES[t]) for t in TASK_NAMES}

        def loss(rows):
            out = model.forward({v: x[rows] for v, x in pooled.items()})
            subset = {t: y[rows] for t, y in labels.items()}
            breakdown = total_loss(out.probs, subset, None, None, LossConfig(), weights)
            return breakdown.total

        model.params.zero_grad()
        backward(loss(slice(0, n)))
        # the domain adversary is not part of this loss
        trainable = model.params.trainable()
        full = {p: t.grad.copy() for p, t in trainable if t.grad is not None}
        model.params.zero_grad()
        size = n // micro
        for start in range(0, n, size):
            backward(loss(slice(start, start + size)))
        averaged = {p: model.params[p].grad / micro for p in full}
        model.params.zero_grad()
        return full, averaged

    def test_64_bit(self):
        model = CauPsi(toy_model_config(), seed=0).astype(np.float64)
        full, averaged = self.gradients(model, 8, 2)
        for path, grad in full.items():
            np.testing.assert_allclose(averaged[path], grad, atol=1e-12)

    def test_four_micro_batches_of_sixteen(self):
        model = CauPsi(toy_model_config(), seed=0)
        full, averaged = self.gradients(model, 64, 4)
        scale = max(np.abs(g).max() for g in full.values())
        for path, grad in full.items():
            assert np.abs(averaged[path] - grad).max() < 1e-4 * scale, path


class MetricsTest(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.labels = {t: rng.integers(0, NUM_CLASSES[t], 200) for t in TASK_NAMES}

    def test_perfect_predictions(self):
        report = compute_metrics(self.labels, self.labels)
        assert report.mean_accuracy == 1.0
        for task in TASK_NAMES:
            assert report.tasks[task].macro_f1 == 1.0
            np.testing.assert_array_equal(
                np.diag(normalized_confusion(report.tasks[task].confusion)), 1.0
            )

    def test_macro_f1_matches_brute_force(self):
        rng = np.random.default_rng(1)
        predictions = {t: rng.integers(0, NUM_CLASSES[t], 200) for t in TASK_NAMES}
        report = compute_metrics(self.labels, predictions)
        for task in TASK_NAMES:
            y, p = self.labels[task], predictions[task]
            scores = []
            for c in range(NUM_CLASSES[task]):
                tp = np.sum((y == c) & (p == c))
                fp = np.sum((y != c) & (p == c))
                fn = np.sum((y == c) & (p != c))
                scores.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
            assert abs(report.tasks[task].macro_f1 - np.mean(scores)) < 1e-9
            assert abs(report.tasks[task].accuracy - np.mean(y == p)) < 1e-12
        expected = np.mean([report.tasks[t].accuracy for t in TASK_NAMES])
        assert report.mean_accuracy == expected
        assert set(report.summary()) == {
            *(f"acc_{t}" for t in TASK_NAMES),
            "macc",
            *(f"f1_{t}" for t in TASK_NAMES),
        }

    def test_confusion_rows(self):
        confusion = np.array([[3, 1, 0], [0, 0, 0], [1, 1, 2]])
        rows = normalized_confusion(confusion)
        np.testing.assert_allclose(rows.sum(axis=1), [1.0, 0.0, 1.0])
        np.testing.assert_allclose(rows[0], [0.75, 0.25, 0.0])

    def test_empty_split(self):
        empty = {t: np.zeros(0, dtype=np.int64) for t in TASK_NAMES}
        with self.assertRaises(DataError):
            compute_metrics(empty, empty)


class ReportsTest(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def test_format_line(self):
        line = format_line({"epoch": 3, "lr": 0.0003, "stopped": False})
        assert line == "epoch=3 lr=0.000300 stopped=false"

    def test_metrics_files(self):
        rng = np.random.default_rng(0)
        labels = {t: rng.integers(0, NUM_CLASSES[t], 50) for t in TASK_NAMES}
        report = compute_metrics(labels, labels, trainable=10, frozen=5)
        write_metrics(report, self.directory)
        values = read_key_values(os.path.join(self.directory, "metrics.txt"))
        assert values["macc"] == "1.000000"
        assert values["params_trainable"] == "10"
        per_class = pd.read_csv(os.path.join(self.directory, "per_class.csv"))
        assert len(per_class) == 3 + 5 + 5 + 7
        confusion = pd.read_csv(os.path.join(self.directory, "confusion_dbr.csv"))
        assert list(confusion.columns)[0] == "true"
        assert confusion.shape == (7, 8)

    def test_psi_files(self):
        ids = ["a", "b", "c"]
        psi = np.array([[0.1, -0.2], [0.3, 0.0], [-0.5, 0.5]])
        labels = {"tcr": np.array([0, 0, 2]), "vcr": np.array([1, 1, 1])}
        labels.update({"der": np.array([0, 1, 2]), "dbr": np.array([6, 6, 6])})
        means = write_psi(ids, psi, labels, self.directory)
        np.testing.assert_allclose(means["tcr"][0], [0.2, -0.1])
        raw = pd.read_csv(os.path.join(self.directory, "psi_raw.csv"))
        assert list(raw.columns) == ["sample_id", "psi_1", "psi_2", *TASK_NAMES]
        tcr = pd.read_csv(os.path.join(self.directory, "psi_class_means_tcr.csv"))
        assert list(tcr["class"]) == ["TrafficJam", "Waiting", "Smooth"]
        assert tcr.loc[1, ["psi_1", "psi_2"]].isna().all()


class TrainerTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.directory = tempfile.mkdtemp()
        cls.config = toy_run_config()
        data = os.path.join(cls.directory, "data")
        generate(cls.config.generator, data, threads=2)
        cls.dataset = PandasDataset.load(data)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.directory)

    def train(self, name, config=None):
        out = os.path.join(self.directory, name)
        trainer = Trainer(config or self.config, self.dataset, out, threads=2)
        return out, trainer.train()

    def test_mixup_acts_on_clips_before_the_encoders(self):
        trainer = Trainer(self.config, self.dataset, threads=2)
        ids = self.dataset.ids("train")[:8]
        prepared = trainer.prepare(ids, 0, 0)
        cfg = self.config.train
        rng = generator(trainer.seed, "augment", 0, 0)
        clips = flip_batch(self.dataset.batch(ids).clips, cfg.flip_p, rng)
        mixed = mixup_batch(clips, self.dataset.batch(ids).labels, cfg.mixup_alpha, rng)
        assert 0 < mixed.lam[0] < 1
        expected = trainer.pool(mixed.clips)
        clean = trainer.pool(clips)
        differs = False
        for view, features in expected.items():
            np.testing.assert_array_equal(prepared.pooled[view], features)
            np.testing.assert_array_equal(prepared.clean[view], clean[view])
            lam, partner = mixed.lam[0], clean[view][mixed.permutation]
            after = lam * clean[view] + (1 - lam) * partner
            differs = differs or not np.allclose(after, features, atol=1e-6)
        assert differs

    def test_run_directory(self):
        out, result = self.train("run")
        for name in ("config.txt", "domains.tsv", "metrics.log", "model.ckpt"):
            assert os.path.isfile(os.path.join(out, name)), name
        assert os.path.isfile(os.path.join(out, "test", "metrics.txt"))
        with open(os.path.join(out, "metrics.log")) as f:
            lines = f.read().splitlines()
        assert len(lines) == len(result.history) == 3
        assert lines[0].startswith("epoch=1 lr=")
        assert "val_macc=" in lines[0] and "wall_ms=" in lines[0]
        assert result.domains.k in (2, 3)
        info = read_key_values(os.path.join(out, "run_info.txt"))
        assert info["num_domains"] == str(result.domains.k)
        assert info["ablations"] == "none"
        assert self.config.model.num_domains == 0

    def test_reruns_are_identical(self):
        out_a, a = self.train("a")
        out_b, b = self.train("b")

        def log(out):
            with open(os.path.join(out, "metrics.log")) as f:
                return [line.rsplit(" wall_ms=", 1)[0] for line in f]

        assert log(out_a) == log(out_b)
        with open(os.path.join(out_a, "model.ckpt"), "rb") as f:
            first = f.read()
        with open(os.path.join(out_b, "model.ckpt"), "rb") as f:
            assert f.read() == first
        assert a.test.summary() == b.test.summary()

    def test_checkpoint_reproduces_the_test_metrics(self):
        out, result = self.train("reload")
        config, model = load_model(os.path.join(out, "model.ckpt"))
        assert config.model.num_domains == result.domains.k
        batch_size = config.train.eval_batch_size
        report, prediction = evaluate_split(model, self.dataset, "test", batch_size)
        assert report.summary() == result.test.summary()
        assert prediction.psi.shape == (self.dataset.len("test"), 4)

    def test_ablated_run(self):
        config = self.config.copy()
        config.override({"ablate_chain": "true", "max_epochs": "2"})
        _, result = self.train("ablated", config)
        assert result.info["ablations"] == "chain"
        assert len(result.history) == 2

    def test_empty_validation_split(self):
        df = self.dataset.df.reset_index(drop=True)
        df.loc[df["split"] == "val", "split"] = "train"
        dataset = PandasDataset(df, self.dataset.root)
        with self.assertRaises(DataError):
            Trainer(self.config, dataset)

    def test_frame_size_mismatch(self):
        config = self.config.copy()
        config.override({"frame_size": "16"})
        with self.assertRaises(ConfigError):
            Trainer(config, self.dataset)
