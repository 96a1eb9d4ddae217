"""Tests del módulo model: tipos, vector estacionario, diagnósticos y muestreo"""
import json
import time

import numpy as np
import pytest
from scipy.stats import chi2

from conftest import GOLDEN_DIR, TOY4_PI
from hmmqp.exceptions import InvalidModel, NonUniqueStationary
from hmmqp.core.model import (
    DiscreteOutputModel,
    GaussianOutputModel,
    HMMSpec,
    TransitionMatrix,
    ergodicity_diagnostics,
    permute_transition,
    sample,
    second_eigenvalue_modulus,
    stationary_distribution,
    toy4_spec,
)


class TestTypes:

    def test_transition_matrix_rejects_non_stochastic_columns(self):
        with pytest.raises(InvalidModel):
            TransitionMatrix([[0.5, 0.5], [0.6, 0.5]])

    def test_transition_matrix_rejects_negative_entries(self):
        with pytest.raises(InvalidModel):
            TransitionMatrix([[1.2, 0.5], [-0.2, 0.5]])

    def test_transition_matrix_is_read_only(self):
        A = TransitionMatrix([[0.9, 0.2], [0.1, 0.8]])
        with pytest.raises(ValueError):
            A.entries[0, 0] = 0.5

    def test_from_estimate_cleans_negative_dust(self):
        A = TransitionMatrix.from_estimate(np.array([[1.0 + 1e-14, 0.3], [-1e-14, 0.7]]))
        assert np.all(A.entries >= 0)
        np.testing.assert_allclose(A.entries.sum(axis=0), 1.0, atol=1e-12)

    def test_discrete_outputs_require_m_at_least_n(self):
        with pytest.raises(InvalidModel):
            DiscreteOutputModel([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]])

    def test_discrete_rank_check(self):
        assert not DiscreteOutputModel([[0.5, 0.5], [0.5, 0.5]]).is_full_rank()
        assert DiscreteOutputModel([[0.9, 0.1], [0.1, 0.9]]).is_full_rank()

    def test_gaussian_components_must_be_distinct(self):
        with pytest.raises(InvalidModel):
            GaussianOutputModel(((0.0, 1.0), (0.0, 1.0)))

    def test_gaussian_variance_must_be_positive(self):
        with pytest.raises(InvalidModel):
            GaussianOutputModel(((0.0, 0.0), (1.0, 1.0)))

    def test_spec_dimension_coherence(self):
        with pytest.raises(InvalidModel):
            HMMSpec(TransitionMatrix(np.eye(3)), GaussianOutputModel(((0.0, 1.0), (1.0, 1.0))))

    def test_spec_initial_must_be_probability(self):
        outputs = GaussianOutputModel(((0.0, 1.0), (1.0, 1.0)))
        with pytest.raises(InvalidModel):
            HMMSpec(TransitionMatrix(np.eye(2)), outputs, initial=[0.7, 0.7])

    def test_spec_dict_round_trip_preserves_model(self, toy4):
        restored = HMMSpec.from_dict(json.loads(json.dumps(toy4.to_dict())))
        np.testing.assert_array_equal(restored.A.entries, toy4.A.entries)
        assert restored.outputs == toy4.outputs

    def test_from_dict_checks_declared_n(self, toy4):
        data = toy4.to_dict()
        data["n"] = 3
        with pytest.raises(InvalidModel):
            HMMSpec.from_dict(data)

    def test_builtin_toy4_matches_golden_file(self):
        data = json.loads((GOLDEN_DIR / "toy4.json").read_text(encoding="utf-8"))
        golden = HMMSpec.from_dict(data)
        builtin = toy4_spec()
        np.testing.assert_array_equal(builtin.A.entries, golden.A.entries)
        assert builtin.outputs.components == golden.outputs.components


class TestStationaryDistribution:

    def test_toy4_golden(self, toy4):
        start = time.perf_counter()
        pi = stationary_distribution(toy4.A)
        elapsed = time.perf_counter() - start
        np.testing.assert_allclose(pi, [0.3529, 0.2941, 0.2353, 0.1176], atol=5e-5)
        np.testing.assert_allclose(pi, TOY4_PI, atol=1e-12)
        assert elapsed < 0.05

    def test_symmetric_chain(self):
        np.testing.assert_allclose(stationary_distribution(np.full((2, 2), 0.5)), [0.5, 0.5], atol=1e-12)

    def test_two_state_balance(self):
        pi = stationary_distribution(np.array([[0.9, 0.2], [0.1, 0.8]]))
        np.testing.assert_allclose(pi, [2 / 3, 1 / 3], atol=1e-12)

    def test_identity_is_not_unique(self):
        with pytest.raises(NonUniqueStationary):
            stationary_distribution(np.eye(3))

    def test_periodic_chain_keeps_unique_pi(self):
        pi = stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(pi, [0.5, 0.5], atol=1e-12)

    def test_single_state(self):
        np.testing.assert_allclose(stationary_distribution(np.ones((1, 1))), [1.0])

    def test_relabeling_equivariance(self, toy4):
        perm = [2, 0, 3, 1]
        pi = stationary_distribution(toy4.A)
        pi_perm = stationary_distribution(permute_transition(toy4.A.entries, perm))
        np.testing.assert_allclose(pi_perm, pi[perm], atol=1e-10)


class TestDiagnostics:

    def test_toy4_min_pi_and_density_bound(self, toy4):
        diag = ergodicity_diagnostics(toy4)
        assert diag.min_pi == pytest.approx(0.1176, abs=5e-5)
        assert diag.density_bound == pytest.approx(1.0 / np.sqrt(2.0 * np.pi))
        assert diag.min_rho is None
        np.testing.assert_allclose(toy4.A.entries @ diag.pi, diag.pi, atol=1e-10)

    def test_unit_variances_density_bound(self):
        A = TransitionMatrix([[0.9, 0.2], [0.1, 0.8]])
        spec = HMMSpec(A, GaussianOutputModel(((0.0, 1.0), (3.0, 1.0))))
        assert ergodicity_diagnostics(spec).density_bound == pytest.approx(0.39894, abs=1e-5)

    def test_rank_one_chain_has_zero_second_eigenvalue(self):
        assert second_eigenvalue_modulus(np.full((2, 2), 0.5)) == pytest.approx(0.0, abs=1e-12)

    def test_discrete_min_rho(self, discrete3):
        diag = ergodicity_diagnostics(discrete3)
        rho = discrete3.outputs.B @ diag.pi
        assert diag.min_rho == pytest.approx(rho.min())
        assert diag.density_bound is None

    def test_propagates_non_unique(self):
        spec = HMMSpec(TransitionMatrix(np.eye(2)), GaussianOutputModel(((0.0, 1.0), (1.0, 1.0))))
        with pytest.raises(NonUniqueStationary):
            ergodicity_diagnostics(spec)


class TestSample:

    def test_deterministic_alternation(self):
        A = TransitionMatrix([[0.0, 1.0], [1.0, 0.0]])
        spec = HMMSpec(A, GaussianOutputModel(((0.0, 1.0), (5.0, 1.0))), initial=[1.0, 0.0])
        x, _ = sample(spec, 4, seed=3)
        np.testing.assert_array_equal(x, [0, 1, 0, 1])

    def test_same_seed_same_sequence(self, toy4):
        x1, y1 = sample(toy4, 1000, seed=11)
        x2, y2 = sample(toy4, 1000, seed=11)
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1, y2)

    def test_different_seeds_differ(self, toy4):
        _, y1 = sample(toy4, 100, seed=1)
        _, y2 = sample(toy4, 100, seed=2)
        assert not np.array_equal(y1, y2)

    def test_rejects_non_positive_T(self, toy4):
        with pytest.raises(InvalidModel):
            sample(toy4, 0, seed=0)

    def test_state_frequencies_approach_pi(self, toy4):
        x, _ = sample(toy4, 100000, seed=5)
        freq = np.bincount(x, minlength=4) / x.shape[0]
        assert np.max(np.abs(freq - TOY4_PI)) < 0.01

    def test_discrete_observations_in_alphabet(self, discrete3):
        _, y = sample(discrete3, 5000, seed=0)
        assert y.dtype.kind == "i"
        assert y.min() >= 0 and y.max() < discrete3.outputs.m

    def test_gaussian_observations_follow_state_parameters(self, toy4):
        x, y = sample(toy4, 50000, seed=8)
        for k, (mu, s2) in enumerate(toy4.outputs.components):
            values = y[x == k]
            assert values.mean() == pytest.approx(mu, abs=6 * np.sqrt(s2 / values.size))

    def test_transition_counts_converge(self, toy4):
        x, _ = sample(toy4, 1000000, seed=0)
        counts = np.zeros((4, 4))
        np.add.at(counts, (x[1:], x[:-1]), 1.0)
        A_emp = counts / counts.sum(axis=0)
        assert np.max(np.abs(A_emp - toy4.A.entries)) < 5e-3

    def test_marginal_stays_stationary_when_started_at_pi(self, toy4):
        spec = HMMSpec(toy4.A, toy4.outputs, initial=TOY4_PI / TOY4_PI.sum())
        x, _ = sample(spec, 100000, seed=21)
        observed = np.bincount(x, minlength=4)
        expected = TOY4_PI * x.shape[0]
        # Corrección conservadora por dependencia: el estadístico se divide por
        # el factor de inflación de la varianza de la cadena
        lam = second_eigenvalue_modulus(toy4.A)
        inflation = (1 + lam) / (1 - lam)
        statistic = np.sum((observed - expected) ** 2 / expected) / inflation
        assert statistic < chi2.ppf(1 - 1e-3, df=3)
