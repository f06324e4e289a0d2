import unittest

import numpy as np

from caupsi.autograd import Tensor, grad_check_leaves
from caupsi.errors import ShapeError
from caupsi.model import compute_psi, psi_class_means
from caupsi.model.ctpc import init_ctpc, max_class_distance
from caupsi.nn import ParamStore


def ctpc_store(d_f=8, d_psi=4, dtype=np.float64):
    store = ParamStore(0)
    init_ctpc(store.scope("ctpc"), d_f, d_psi)
    return store.astype(dtype)


class PsiTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_zero_weights_give_zero_psi(self):
        store = ctpc_store()
        for path, tensor in store.items():
            if not path.endswith("gamma"):
                tensor.data[:] = 0
        x = Tensor(self.rng.standard_normal((5, 8)))
        out = compute_psi(x, x, store.scope("ctpc"))
        assert out.psi.shape == (5, 4)
        np.testing.assert_array_equal(out.psi.data, 0.0)

    def test_psi_is_bounded(self):
        store = ctpc_store()
        for _, tensor in store.items():
            tensor.data *= 100
        face = Tensor(100 * self.rng.standard_normal((1000, 8)))
        body = Tensor(100 * self.rng.standard_normal((1000, 8)))
        psi = compute_psi(face, body, store.scope("ctpc")).psi.data
        assert np.all(np.abs(psi) <= 1.0)

    def test_paths_see_one_view_each(self):
        store = ctpc_store()
        face = Tensor(self.rng.standard_normal((2, 8)))
        body = Tensor(self.rng.standard_normal((2, 8)))
        other = Tensor(self.rng.standard_normal((2, 8)))
        a = compute_psi(face, body, store.scope("ctpc"))
        b = compute_psi(face, other, store.scope("ctpc"))
        np.testing.assert_array_equal(a.affect.data, b.affect.data)
        assert not np.allclose(a.action.data, b.action.data)

    def test_gradients(self):
        store = ctpc_store()
        face = Tensor(self.rng.standard_normal((3, 8)))
        body = Tensor(self.rng.standard_normal((3, 8)))
        w = self.rng.standard_normal((3, 4))

        def loss():
            return (compute_psi(face, body, store.scope("ctpc")).psi * w).sum()

        assert grad_check_leaves(loss, dict(store.items()), 30, self.rng) < 1e-5

    def test_mismatched_inputs(self):
        store = ctpc_store()
        with self.assertRaises(ShapeError):
            compute_psi(
                Tensor(np.ones((2, 8))), Tensor(np.ones((3, 8))), store.scope("ctpc")
            )


class ClassMeansTest(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_single_class(self):
        psi = self.rng.uniform(-1, 1, (6, 4))
        means = psi_class_means(psi, {"tcr": np.full(6, 2)}, {"tcr": 3})
        values, present = means["tcr"]
        np.testing.assert_allclose(values[2], psi.mean(axis=0))
        assert list(present) == [False, False, True]
        assert np.isnan(values[0]).all()

    def test_one_sample_per_class(self):
        psi = self.rng.uniform(-1, 1, (3, 4))
        labels = {"tcr": np.array([2, 0, 1])}
        values, present = psi_class_means(psi, labels, {"tcr": 3})["tcr"]
        np.testing.assert_allclose(values, psi[[1, 2, 0]])
        assert present.all()

    def test_matches_brute_force(self):
        psi = self.rng.uniform(-1, 1, (50, 4))
        labels = {
            "der": self.rng.integers(0, 5, 50),
            "dbr": self.rng.integers(0, 7, 50),
        }
        means = psi_class_means(psi, labels, {"der": 5, "dbr": 7})
        for task, count in (("der", 5), ("dbr", 7)):
            values, present = means[task]
            for c in range(count):
                rows = psi[labels[task] == c]
                if len(rows):
                    np.testing.assert_allclose(values[c], rows.mean(axis=0), atol=1e-7)
                else:
                    assert not present[c]

    def test_max_class_distance(self):
        means = np.array([[0.0, 0.0], [0.5, -0.2], [np.nan, np.nan]])
        assert max_class_distance(means, [True, True, False]) == 0.5
        assert max_class_distance(means, [True, False, False]) == 0.0

    def test_empty_input(self):
        with self.assertRaises(ShapeError):
            psi_class_means(np.zeros((0, 4)), {"tcr": np.zeros(0)}, {"tcr": 3})
