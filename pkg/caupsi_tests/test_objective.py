import math
import os
import tempfile
import unittest

import numpy as np

from caupsi.autograd import Tensor, backward, grad_check
from caupsi.config import LossConfig
from caupsi.errors import ConfigError, DataError, LabelRangeError, MissingFileError
from caupsi.objective import (
    DomainLabeler,
    class_weights,
    compute_class_weights,
    domain_ce,
    fit_domain_labels,
    inertia_trace,
    ls_ce,
    ls_ce_mixed,
    read_domains,
    smoothed_targets,
    total_loss,
    write_domains,
)
from caupsi.model import CauPsi
from caupsi.nn import mlp_forward
from caupsi.tasks import NUM_CLASSES, TASK_NAMES

from .helpers import random_pooled, toy_model_config


def blobs(centers, n=40, sigma=1.0, seed=0):
    rng = np.random.default_rng(seed)
    points = [c + sigma * rng.standard_normal((n, len(c))) for c in centers]
    return np.concatenate(points), np.repeat(np.arange(len(centers)), n)


class LossTest(unittest.TestCase):
    def test_smoothed_cross_entropy(self):
        loss = ls_ce(Tensor(np.array([0.9, 0.1])), 0, np.ones(2), 0.1)
        expected = -(0.95 * math.log(0.9) + 0.05 * math.log(0.1))
        assert abs(float(loss.data) - expected) < 1e-4
        assert abs(float(loss.data) - 0.21522) < 1e-4

    def test_targets_sum_to_one(self):
        targets = smoothed_targets([0, 2, 1], 3, 0.1)
        np.testing.assert_allclose(targets.sum(axis=1), 1.0)
        assert abs(targets[1, 2] - (0.9 + 0.1 / 3)) < 1e-12

    def test_class_weight_scales_the_loss(self):
        p = Tensor(np.array([[0.6, 0.3, 0.1]]))
        plain = ls_ce(p, [1], np.ones(3), 0.1)
        weighted = ls_ce(p, [1], np.array([1.0, 2.5, 1.0]), 0.1)
        np.testing.assert_allclose(weighted.data, 2.5 * plain.data)

    def test_invalid_labels(self):
        with self.assertRaises(LabelRangeError):
            ls_ce(Tensor(np.array([0.5, 0.5])), 2, np.ones(2), 0.1)
        with self.assertRaises(ConfigError):
            smoothed_targets([0], 2, 1.0)

    def test_mixed_loss(self):
        rng = np.random.default_rng(0)
        p = Tensor(rng.dirichlet(np.ones(5), size=4))
        a, b = np.array([0, 1, 2, 3]), np.array([4, 4, 0, 1])
        weights = np.array([1.0, 0.5, 2.0, 1.5, 0.8])
        lam = np.full(4, 0.3)
        mixed = ls_ce_mixed(p, a, b, lam, weights, 0.1)
        loss_a = ls_ce(p, a, weights, 0.1).data
        loss_b = ls_ce(p, b, weights, 0.1).data
        expected = 0.3 * loss_a + 0.7 * loss_b
        np.testing.assert_allclose(mixed.data, expected, rtol=1e-12)

    def test_mixed_loss_with_itself(self):
        p = Tensor(np.array([[0.2, 0.5, 0.3]]))
        mixed = ls_ce_mixed(p, [1], [1], np.array([0.4]), np.ones(3), 0.1)
        np.testing.assert_allclose(mixed.data, ls_ce(p, [1], np.ones(3), 0.1).data)

    def test_gradient(self):
        weights = np.array([1.0, 2.0, 0.5])

        def loss(x):
            return ls_ce(x.softmax(), [2, 0], weights, 0.1).sum()

        x = np.random.default_rng(0).standard_normal((2, 3))
        assert grad_check(loss, x) < 1e-5


class ClassWeightTest(unittest.TestCase):
    def test_inverse_frequencies(self):
        labels = np.repeat([0, 1, 2], [399, 133, 77])
        weights = compute_class_weights(labels, 3)
        np.testing.assert_allclose(weights, [0.3267, 0.9802, 1.6931], atol=1e-4)
        assert abs(weights.mean() - 1.0) < 1e-12

    def test_absent_class(self):
        weights = compute_class_weights([0, 0, 2], 4)
        assert weights[1] == 1.0 and weights[3] == 1.0
        assert weights[2] == 2 * weights[0]

    def test_all_tasks(self):
        rng = np.random.default_rng(0)
        labels = {t: rng.integers(0, NUM_CLASSES[t], 100) for t in TASK_NAMES}
        weights = class_weights(labels)
        assert [len(weights[t]) for t in TASK_NAMES] == [3, 5, 5, 7]

    def test_no_labels(self):
        with self.assertRaises(ConfigError):
            compute_class_weights([], 3)


class TotalLossTest(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.logits = [
            Tensor(rng.standard_normal((4, NUM_CLASSES[t])), requires_grad=True)
            for t in TASK_NAMES
        ]
        self.labels = {t: rng.integers(0, NUM_CLASSES[t], 4) for t in TASK_NAMES}
        self.weights = {t: np.ones(NUM_CLASSES[t]) for t in TASK_NAMES}
        self.domain_logits = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        self.domains = np.array([0, 2, 1, 1])

    def loss(self, **values):
        probs = [x.softmax() for x in self.logits]
        return total_loss(
            probs,
            self.labels,
            self.domain_logits,
            self.domains,
            LossConfig(),
            self.weights,
            **values,
        )

    def test_weighted_sum(self):
        out = self.loss()
        config = LossConfig()
        expected = sum(
            w * out.tasks[t] for t, w in zip(TASK_NAMES, config.task_weights)
        ) + config.gamma_adv * out.adversarial
        assert abs(float(out.total.data) - expected) < 1e-9
        assert set(out.as_dict()) == {
            "loss_tcr",
            "loss_vcr",
            "loss_der",
            "loss_dbr",
            "loss_adv",
            "loss",
        }

    def test_zero_weights_give_zero_gradients(self):
        out = self.loss(task_weights=(0.0, 0.0, 0.0, 0.0), gamma_adv=0.0)
        backward(out.total)
        assert float(out.total.data) == 0.0
        for x in self.logits + [self.domain_logits]:
            assert not np.any(x.grad)

    def test_single_task(self):
        out = self.loss(task_weights=(0.0, 0.0, 0.0, 1.0), gamma_adv=0.0)
        backward(out.total)
        assert not np.any(self.logits[0].grad)
        assert np.any(self.logits[3].grad)

    def test_domain_cross_entropy(self):
        logits = Tensor(np.log(np.array([[0.5, 0.25, 0.25], [0.1, 0.1, 0.8]])))
        loss = domain_ce(logits, [0, 2])
        expected = -(math.log(0.5) + math.log(0.8)) / 2
        assert abs(float(loss.data) - expected) < 1e-9


class AdversaryTest(unittest.TestCase):
    def setUp(self):
        self.model = CauPsi(toy_model_config(), seed=0).astype(np.float64)
        self.pooled = random_pooled(n=4, dtype=np.float64)
        self.labels = np.array([0, 1, 2, 1])

    def domain_gradients(self, lambda_grl):
        self.model.params.zero_grad()
        out = self.model.forward(self.pooled, lambda_grl=lambda_grl)
        backward(domain_ce(out.domain_logits, self.labels))
        return {
            path: tensor.grad
            for path, tensor in self.model.params.items()
            if tensor.grad is not None and np.abs(tensor.grad).max() > 0
        }

    def test_gradients_reach_the_trunk_through_z_only(self):
        reached = set(self.domain_gradients(1.0))
        assert "adversary.fc1.weight" in reached
        assert "chain.shared.weight" in reached
        assert "views.inside.fc1.weight" in reached
        assert "gap.scene.weight" in reached
        for path in reached:
            assert not path.startswith(
                ("chain.task", "chain.heads", "chain.prototypes", "ctpc", "encoder")
            ), path
            assert not path.startswith(("views.face", "views.body", "gap.face")), path

    def test_trunk_gradients_are_reversed_and_scaled(self):
        half = self.domain_gradients(0.5)
        full = self.domain_gradients(1.0)
        np.testing.assert_allclose(
            half["chain.shared.weight"], 0.5 * full["chain.shared.weight"], rtol=1e-10
        )
        np.testing.assert_allclose(
            half["adversary.fc1.weight"], full["adversary.fc1.weight"], rtol=1e-10
        )
        # the same classifier without the reversal layer
        self.model.params.zero_grad()
        z = self.model.shared_representation(self.pooled)
        logits = mlp_forward(
            self.model.adversary_spec, self.model.params.scope("adversary"), z
        )
        backward(domain_ce(logits, self.labels))
        plain = self.model.params["chain.shared.weight"].grad
        np.testing.assert_allclose(full["chain.shared.weight"], -plain, rtol=1e-10)


class DomainTest(unittest.TestCase):
    def test_two_blobs(self):
        features, truth = blobs([np.zeros(4), np.full(4, 5.0)], sigma=0.1)
        labeler = fit_domain_labels(features, seed=0)
        assert labeler.k == 2
        assert labeler.silhouettes[2] > 0.9
        agreement = np.mean(labeler.labels == truth)
        assert agreement in (0.0, 1.0)

    def test_three_blobs(self):
        centers = [np.array([0.0, 0.0]), np.array([10.0, 0.0]), np.array([0.0, 10.0])]
        features, truth = blobs(centers, sigma=0.3)
        labeler = fit_domain_labels(features, seed=0)
        assert labeler.k == 3
        assert labeler.silhouettes[3] > 0.9
        for k in range(3):
            assert len(np.unique(labeler.labels[truth == k])) == 1

    def test_deterministic(self):
        features, _ = blobs([np.zeros(3), np.full(3, 3.0), np.full(3, -3.0)])
        a = fit_domain_labels(features, seed=5)
        b = fit_domain_labels(features, seed=5)
        assert a.k == b.k
        np.testing.assert_array_equal(a.labels, b.labels)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_fixed_k(self):
        features, _ = blobs([np.zeros(2), np.full(2, 10.0)])
        labeler = fit_domain_labels(features, [4], seed=0)
        assert labeler.k == 4
        assert set(labeler.silhouettes) == {4}

    def test_assign(self):
        labeler = DomainLabeler(2, np.array([[0.0, 0.0], [5.0, 5.0]]), np.zeros(0))
        assigned = labeler.assign(np.array([[1.0, 0.5], [4.0, 6.0]]))
        assert list(assigned) == [0, 1]

    def test_inertia_does_not_increase(self):
        features, _ = blobs([np.zeros(3), np.full(3, 2.0), np.full(3, -2.0)], sigma=1.5)
        trace = inertia_trace(features, 3, seed=0, iterations=10)
        assert len(trace) == 10
        for before, after in zip(trace, trace[1:]):
            assert after <= before + 1e-9

    def test_invalid_inputs(self):
        with self.assertRaises(ConfigError):
            fit_domain_labels(np.ones((20, 3)))
        with self.assertRaises(ConfigError):
            fit_domain_labels(np.random.default_rng(0).standard_normal((5, 3)))
        with self.assertRaises(ConfigError):
            fit_domain_labels(np.random.default_rng(0).standard_normal((20, 3)), [1])

    def test_domains_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "domains.tsv")
            write_domains(path, ["s00001", "s00002"], np.array([1, 0]))
            assert read_domains(path) == {"s00001": 1, "s00002": 0}
            with open(path, "w") as f:
                f.write("sample\tdomain\nx\t1\n")
            with self.assertRaises(DataError):
                read_domains(path)
            with self.assertRaises(MissingFileError):
                read_domains(os.path.join(directory, "missing.tsv"))
