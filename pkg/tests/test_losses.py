"""Cosine and InfoNCE against independent brute-force oracles."""

import math

import numpy as np
import pytest

from viml.model import (
    cosine,
    cosine_matrix,
    infonce,
    infonce_from_scores,
    symmetric_loss,
    symmetric_loss_and_grad,
)


def naive_cosine(a, b):
    na = max(math.sqrt(sum(x * x for x in a)), 1e-8)
    nb = max(math.sqrt(sum(x * x for x in b)), 1e-8)
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


def naive_infonce(q_rows, k_rows, tau):
    """Double-loop softmax oracle without log-sum-exp stabilization."""
    batch = len(q_rows)
    total = 0.0
    for i in range(batch):
        denom = 0.0
        for j in range(batch):
            denom += math.exp(naive_cosine(q_rows[i], k_rows[j]) / tau)
        total += -math.log(math.exp(naive_cosine(q_rows[i], k_rows[i]) / tau) / denom)
    return total / batch


class TestCosine:
    def test_self_similarity_is_one(self):
        x = np.random.default_rng(0).normal(size=16)
        assert cosine(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_antipodal_is_minus_one(self):
        x = np.random.default_rng(1).normal(size=16)
        assert cosine(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_orthogonal_is_zero(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_zero_vector_is_safe(self):
        out = cosine(np.zeros(4), np.ones(4))
        assert out == 0.0 and math.isfinite(out)

    def test_matrix_matches_scalar(self):
        rng = np.random.default_rng(2)
        q = rng.normal(size=(3, 5))
        k = rng.normal(size=(4, 5))
        mat = cosine_matrix(q, k)
        for i in range(3):
            for j in range(4):
                assert mat[i, j] == pytest.approx(naive_cosine(q[i], k[j]), abs=1e-12)


class TestInfoNCE:
    def test_batch_of_one_is_exactly_zero(self):
        y = np.random.default_rng(0).normal(size=(1, 8))
        assert infonce(y, y, 0.03) == 0.0
        assert symmetric_loss(y, np.random.default_rng(1).normal(size=(1, 8)), 0.03) == 0.0

    def test_identical_rows_give_log_batch(self):
        for batch in (2, 5, 16):
            y = np.tile(np.random.default_rng(3).normal(size=8), (batch, 1))
            assert infonce(y, y, 0.03) == pytest.approx(math.log(batch), abs=1e-9)

    def test_frozen_oracle_values(self):
        # Frozen from the double-loop oracle above on rng(42) batches.
        rng = np.random.default_rng(42)
        q = rng.normal(size=(4, 3))
        k = rng.normal(size=(4, 3))
        assert infonce(q, k, 0.03) == pytest.approx(10.479464998078708, abs=1e-9)
        assert infonce(q, k, 1.0) == pytest.approx(1.1183780097896452, abs=1e-9)
        assert symmetric_loss(q, k, 0.03) == pytest.approx(23.47282895983519, abs=1e-9)

    def test_matches_oracle_on_random_batches(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            batch = int(rng.integers(1, 9))
            dim = int(rng.integers(1, 9))
            tau = [0.03, 0.1, 1.0][trial % 3]
            q = rng.normal(size=(batch, dim))
            k = rng.normal(size=(batch, dim))
            assert infonce(q, k, tau) == pytest.approx(
                naive_infonce(q, k, tau), abs=1e-6
            )

    def test_symmetric_loss_is_sum_of_directions(self):
        rng = np.random.default_rng(8)
        q = rng.normal(size=(4, 6))
        k = rng.normal(size=(4, 6))
        expected = naive_infonce(q, k, 0.07) + naive_infonce(k, q, 0.07)
        assert symmetric_loss(q, k, 0.07) == pytest.approx(expected, abs=1e-6)

    def test_symmetric_loss_commutative(self):
        rng = np.random.default_rng(9)
        q = rng.normal(size=(5, 4))
        k = rng.normal(size=(5, 4))
        assert symmetric_loss(q, k, 0.3) == pytest.approx(
            symmetric_loss(k, q, 0.3), abs=1e-12
        )

    def test_directions_generally_unequal(self):
        rng = np.random.default_rng(10)
        q = rng.normal(size=(6, 4))
        k = rng.normal(size=(6, 4))
        assert infonce(q, k, 0.1) != pytest.approx(infonce(k, q, 0.1), abs=1e-6)

    def test_strictly_positive_for_finite_batches(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            q = rng.normal(size=(4, 8))
            assert symmetric_loss(q, rng.normal(size=(4, 8)), 0.5) > 0.0

    def test_mismatched_tables_rejected(self):
        with pytest.raises(ValueError, match="mismatched"):
            infonce(np.zeros((2, 3)), np.zeros((3, 3)), 0.1)

    def test_stabilized_softmax_survives_huge_logits(self):
        # score scale far beyond what cosine produces; naive exp overflows
        scores = np.array([[900.0, 880.0], [100.0, 950.0]])
        loss, grad = infonce_from_scores(scores, 1.0)
        assert math.isfinite(loss) and np.all(np.isfinite(grad))


class TestLossGradients:
    def test_table_gradients_match_finite_differences(self):
        rng = np.random.default_rng(12)
        q = rng.normal(size=(4, 5))
        k = rng.normal(size=(4, 5))
        tau = 0.2
        _, dq, dk = symmetric_loss_and_grad(q, k, tau)
        h = 1e-6
        for arr, grad in ((q, dq), (k, dk)):
            flat = arr.reshape(-1)
            for idx in range(0, flat.size, 3):
                orig = flat[idx]
                flat[idx] = orig + h
                up = symmetric_loss(q, k, tau)
                flat[idx] = orig - h
                down = symmetric_loss(q, k, tau)
                flat[idx] = orig
                fd = (up - down) / (2 * h)
                assert grad.reshape(-1)[idx] == pytest.approx(fd, abs=5e-8, rel=1e-5)


class TestRankingInvariance:
    def test_scaling_any_embedding_preserves_ranking(self):
        rng = np.random.default_rng(13)
        q = rng.normal(size=(1, 12))
        items = rng.normal(size=(30, 12))
        base = cosine_matrix(q, items)[0]
        scaled = items.copy()
        scaled[7] *= 250.0
        scaled[19] *= 1e-3
        after = cosine_matrix(q, scaled)[0]
        np.testing.assert_array_equal(np.argsort(-base), np.argsort(-after))

    def test_strictly_increasing_transform_preserves_ranking(self):
        rng = np.random.default_rng(14)
        scores = rng.normal(size=40)
        transformed = np.tanh(scores * 0.7) + 3.0
        np.testing.assert_array_equal(
            np.argsort(-scores, kind="stable"),
            np.argsort(-transformed, kind="stable"),
        )
