"""Tests del Baum-Welch de referencia"""
from itertools import product

import numpy as np
import pytest

from hmmqp.exceptions import NumericalUnderflow
from hmmqp.core.baseline import (
    BaumWelchInit,
    baum_welch,
    emission_matrix,
    forward_backward,
    random_init,
)
from hmmqp.core.model import DiscreteOutputModel, GaussianOutputModel, TransitionMatrix, sample


def enumerate_paths(b: np.ndarray, A: np.ndarray, initial: np.ndarray):
    """Verosimilitud, marginales y conteos de transición sumando sobre todos los caminos"""
    T, n = b.shape
    total = 0.0
    gamma = np.zeros((T, n))
    counts = np.zeros((n, n))
    for path in product(range(n), repeat=T):
        p = initial[path[0]] * b[0, path[0]]
        for t in range(1, T):
            p *= A[path[t], path[t - 1]] * b[t, path[t]]
        total += p
        for t, state in enumerate(path):
            gamma[t, state] += p
        for t in range(1, T):
            counts[path[t], path[t - 1]] += p
    return total, gamma / total, counts / total


class TestForwardBackward:

    def test_matches_path_enumeration(self):
        rng = np.random.default_rng(0)
        A = np.array([[0.7, 0.4], [0.3, 0.6]])
        initial = np.array([0.6, 0.4])
        b = rng.uniform(0.05, 1.0, size=(5, 2))
        likelihood, gamma, counts = enumerate_paths(b, A, initial)
        fb = forward_backward(b, A, initial)
        assert fb.loglik == pytest.approx(np.log(likelihood), rel=1e-12)
        np.testing.assert_allclose(fb.gamma, gamma, atol=1e-12)
        np.testing.assert_allclose(fb.transition_counts, counts, atol=1e-12)

    def test_gamma_rows_sum_to_one(self, toy4):
        _, y = sample(toy4, 500, seed=1)
        b, offset = emission_matrix(y, toy4.outputs)
        fb = forward_backward(b, toy4.A, np.full(4, 0.25), offset)
        np.testing.assert_allclose(fb.gamma.sum(axis=1), 1.0, atol=1e-12)
        assert fb.transition_counts.sum() == pytest.approx(499.0)

    def test_long_sequence_does_not_underflow(self, toy4):
        _, y = sample(toy4, 20000, seed=2)
        b, offset = emission_matrix(y, toy4.outputs)
        assert np.isfinite(forward_backward(b, toy4.A, np.full(4, 0.25), offset).loglik)

    def test_impossible_observation(self):
        outputs = DiscreteOutputModel([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        b, _ = emission_matrix(np.array([0, 2]), outputs)
        with pytest.raises(NumericalUnderflow):
            forward_backward(b, np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([0.5, 0.5]))


class TestBaumWelch:

    def test_loglik_nondecreasing_and_trace(self, two_state_gaussian):
        _, y = sample(two_state_gaussian, 3000, seed=3)
        init = random_init(2, seed=4, y=y)
        result = baum_welch(y, 2, init, max_iters=15)
        trace = np.array(result.loglik_trace)
        assert trace.shape == (15,)
        assert np.all(np.diff(trace) >= -1e-8 * (1.0 + np.abs(trace[:-1])))
        assert len(result.A_trace) == 15
        np.testing.assert_allclose(result.A_hat.entries.sum(axis=0), 1.0, atol=1e-12)

    def test_fixed_outputs_stay_fixed(self, two_state_gaussian):
        _, y = sample(two_state_gaussian, 2000, seed=5)
        init = random_init(2, seed=6, outputs0=two_state_gaussian.outputs, fix_outputs=True)
        result = baum_welch(y, 2, init, max_iters=5)
        assert result.outputs_hat == two_state_gaussian.outputs

    def test_discrete_started_at_truth_stays_close(self, discrete3):
        _, y = sample(discrete3, 20000, seed=7)
        init = BaumWelchInit(discrete3.A, discrete3.outputs)
        result = baum_welch(y, 3, init, max_iters=10)
        assert np.sum((result.A_hat.entries - discrete3.A.entries) ** 2) < 0.02
        assert isinstance(result.outputs_hat, DiscreteOutputModel)

    def test_gaussian_learns_means(self, two_state_gaussian):
        _, y = sample(two_state_gaussian, 10000, seed=8)
        result = baum_welch(y, 2, random_init(2, seed=9, y=y), max_iters=20)
        mu = np.sort(result.outputs_hat.mu)
        np.testing.assert_allclose(mu, [-2.0, 2.0], atol=0.15)

    def test_multiple_sequences(self, discrete3):
        sequences = [sample(discrete3, 2000, seed=s)[1] for s in range(3)]
        result = baum_welch(sequences, 3, random_init(3, seed=0, m=4), max_iters=5)
        assert len(result.loglik_trace) == 5
        np.testing.assert_allclose(result.initial.sum(), 1.0)

    def test_wrong_state_count(self, two_state_gaussian):
        init = BaumWelchInit(two_state_gaussian.A, two_state_gaussian.outputs)
        with pytest.raises(ValueError):
            baum_welch(np.zeros(100), 3, init)


class TestRandomInit:

    def test_deterministic_in_seed(self):
        a = random_init(3, seed=11, m=4)
        b = random_init(3, seed=11, m=4)
        np.testing.assert_array_equal(a.A0.entries, b.A0.entries)
        np.testing.assert_array_equal(a.outputs0.B, b.outputs0.B)

    def test_gaussian_from_data(self):
        y = np.random.default_rng(0).normal(size=500)
        init = random_init(2, seed=1, y=y)
        assert isinstance(init.outputs0, GaussianOutputModel)
        assert isinstance(init.A0, TransitionMatrix)
        low, high = np.quantile(y, [0.05, 0.95])
        assert np.all((init.outputs0.mu >= low) & (init.outputs0.mu <= high))

    def test_requires_data_or_alphabet(self):
        with pytest.raises(ValueError):
            random_init(2, seed=0)
