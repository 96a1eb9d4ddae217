"""
Corridas de aceptación del estudio de simulación (lentas: pytest -m slow)
"""
from pathlib import Path

import numpy as np
import pytest

from hmmqp.bench.experiment import rate_check, run_experiment, stability_sweep
from hmmqp.core.mixture import align_components, em_fit
from hmmqp.core.model import HMMSpec, sample, smallest_singular_value, stationary_distribution, toy4_spec
from hmmqp.core.moments import (
    analytic_moments,
    compute_F,
    empirical_eta,
    empirical_eta_prime,
    empirical_rho_sigma,
    empirical_xi,
    gaussian_K,
)
from hmmqp.core.pipeline import full_pipeline
from hmmqp.preprocessing.sequence_loader import SequenceLoader
from hmmqp.utils.config_loader import EstimationOptions, ExperimentConfig, MixtureConfig

pytestmark = pytest.mark.slow

SEEDS = list(range(20))
DISCRETE3 = Path(__file__).parent.parent / "instances" / "toy4" / "models" / "discrete3.json"


def sweep(tmp_path, methods, T_grid, bw_iters=20):
    config = ExperimentConfig(
        model="toy4",
        methods=methods,
        T_grid=T_grid,
        seeds=SEEDS,
        bw_iters=bw_iters,
        workers=4,
        output_dir=str(tmp_path),
    )
    return run_experiment(config.validate(), progress=False)


@pytest.mark.parametrize("discrete", [True, False])
def test_exact_moment_recovery_on_random_specs(spec_factory, discrete):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        spec = spec_factory(rng, int(rng.integers(2, 6)), discrete=discrete)
        report = full_pipeline(None, spec.outputs, moments=analytic_moments(spec))
        assert np.linalg.norm(report.pi_hat - stationary_distribution(spec.A)) <= 1e-8
        assert np.linalg.norm(report.A_hat - spec.A.entries) <= 1e-6


def test_known_outputs_rates(tmp_path):
    results = sweep(tmp_path, [2], [1000, 10000, 100000, 1000000])
    assert rate_check(results, "frobenius_sq_error", method=2).passed
    assert rate_check(results, "pi_l2_sq", method=2).passed

    medians = [row["median_frobenius_sq_error"] for row in results.summary()]
    assert all(b < a for a, b in zip(medians, medians[1:]))


def test_perturbation_stability():
    result = stability_sweep(toy4_spec(), [0.0, 1e-4, 1e-3, 1e-2, 1e-1], 100000, SEEDS)
    assert result.is_monotone()
    floor = np.median([r.frobenius_sq_error for r in result.rows if r.epsilon == 0.0])
    curve = dict(result.median_curve())
    assert curve[1e-4] < 0.1 * floor


def test_method_orderings(tmp_path):
    results = sweep(tmp_path, [1, 2, 3, 4, 5, 6, 7], [100000])
    by_method = {}
    for row in results.rows:
        by_method.setdefault(row.method, {})[row.seed] = row

    def median(method, attr):
        return np.median([getattr(r, attr) for r in by_method[method].values()])

    assert median(3, "wall_time_ms") < 0.5 * median(5, "wall_time_ms")
    for qp_init, random_init in ((4, 6), (5, 7)):
        wins = sum(
            by_method[qp_init][s].frobenius_sq_error <= by_method[random_init][s].frobenius_sq_error
            for s in SEEDS
        )
        assert wins >= 15
    worst = median(1, "frobenius_sq_error")
    assert all(median(m, "frobenius_sq_error") <= worst for m in range(2, 8))


def test_eta_prime_needs_more_samples():
    spec = toy4_spec()
    eta_errors, eta_prime_errors = [], []
    for seed in SEEDS:
        _, y = sample(spec, 100000, seed)
        eta = full_pipeline(y, spec.outputs, EstimationOptions(), truth=spec)
        eta_prime = full_pipeline(y, spec.outputs, EstimationOptions(use_eta_prime=True), truth=spec)
        eta_errors.append(eta.errors["A_frobenius_sq"])
        eta_prime_errors.append(eta_prime.errors["A_frobenius_sq"])
    assert np.median(eta_prime_errors) >= np.median(eta_errors)


def component_error(estimated, truth) -> float:
    """sum_i |mu_hat_i - mu_i| + |s2_hat_i - s2_i| tras alinear etiquetas"""
    aligned = estimated.permuted(align_components(estimated, truth))
    return float(np.abs(np.array(aligned.components) - np.array(truth.components)).sum())


@pytest.mark.parametrize("model", ["toy4", str(DISCRETE3)])
def test_errors_shrink_with_T_for_most_seeds(model):
    spec = SequenceLoader.load_model(model)
    pi_wins = A_wins = 0
    for seed in SEEDS:
        _, y = sample(spec, 10**6, seed)
        small = full_pipeline(y[:10**4], spec.outputs, truth=spec).errors
        large = full_pipeline(y, spec.outputs, truth=spec).errors
        pi_wins += large["pi_l2"] < small["pi_l2"]
        A_wins += large["A_frobenius_sq"] < small["A_frobenius_sq"]
    assert pi_wins >= 18
    assert A_wins >= 18


def test_weighted_and_unweighted_agree_at_large_T():
    spec = toy4_spec()
    gaps = {}
    for T in (10**4, 10**6):
        distances = []
        for seed in SEEDS:
            _, y = sample(spec, T, seed)
            weighted = full_pipeline(y, spec.outputs, EstimationOptions(objective="weighted")).A_hat
            unweighted = full_pipeline(y, spec.outputs, EstimationOptions(objective="unweighted")).A_hat
            distances.append(np.linalg.norm(weighted - unweighted))
        gaps[T] = np.median(distances)
    assert gaps[10**6] <= 0.1 * np.linalg.norm(spec.A.entries)
    assert gaps[10**6] < gaps[10**4]


def test_baum_welch_and_qp_meet_at_large_T(tmp_path):
    results = sweep(tmp_path, [2, 4], [10**6])
    errors = {(r.method, r.seed): r.frobenius_sq_error for r in results.rows}
    # ||A_bw - A_qp||_F <= ||A_bw - A||_F + ||A_qp - A||_F
    distances = [np.sqrt(errors[(2, s)]) + np.sqrt(errors[(4, s)]) for s in SEEDS]
    assert np.median(distances) < 0.05


def test_first_moment_error_decays_like_root_T():
    discrete = SequenceLoader.load_model(DISCRETE3)
    gaussian = toy4_spec()
    rho = analytic_moments(discrete).rho_hat
    xi = analytic_moments(gaussian).xi_hat
    grid = (10**4, 10**5, 10**6)
    rho_errors = {T: [] for T in grid}
    xi_errors = {T: [] for T in grid}
    for seed in SEEDS:
        _, y = sample(discrete, grid[-1], seed)
        _, z = sample(gaussian, grid[-1], seed)
        for T in grid:
            rho_errors[T].append(np.linalg.norm(empirical_rho_sigma(y[:T], discrete.outputs.m).rho_hat - rho))
            xi_errors[T].append(np.linalg.norm(empirical_xi(z[:T], gaussian.outputs) - xi))

    for errors in (rho_errors, xi_errors):
        medians = [np.median(errors[T]) for T in grid]
        for coarse, fine in zip(medians, medians[1:]):
            assert 2.5 <= coarse / fine <= 4.5


def test_eta_prime_moments_cost_more_samples():
    spec = toy4_spec()
    exact = analytic_moments(spec)
    pi = stationary_distribution(spec.A)
    # El error de A escala como error del momento / sigma_min^2 del operador
    gain_F = smallest_singular_value(compute_F(spec.outputs, pi)) ** -2
    gain_K = smallest_singular_value(gaussian_K(spec.outputs)) ** -2
    eta_errors, eta_prime_errors = [], []
    for seed in SEEDS:
        _, y = sample(spec, 10**6, seed)
        eta_errors.append(gain_F * np.linalg.norm(empirical_eta(y, spec.outputs, pi) - exact.eta_hat))
        eta_prime_errors.append(gain_K * np.linalg.norm(empirical_eta_prime(y, spec.outputs) - exact.eta_prime_hat))
    assert np.median(eta_prime_errors) > np.median(eta_errors)


def test_four_component_mixture_recovery():
    spec = toy4_spec()
    truth = np.array(spec.outputs.components)
    mu_errors, var_errors = [], []
    for seed in SEEDS:
        _, y = sample(spec, 10**5, seed)
        fit = em_fit(y, 4, MixtureConfig(restarts=10, seed=seed))
        aligned = np.array(fit.permuted(align_components(fit, spec.outputs)).components)
        mu_errors.append(np.abs(aligned[:, 0] - truth[:, 0]))
        var_errors.append(np.abs(aligned[:, 1] - truth[:, 1]) / truth[:, 1])
    assert np.all(np.median(mu_errors, axis=0) < 0.3)
    assert np.all(np.median(var_errors, axis=0) < 0.25)


def test_parametric_bootstrap_stays_within_twice_the_fit_error():
    spec = toy4_spec()
    config = MixtureConfig(restarts=10)
    original, bootstrap = [], []
    for seed in SEEDS[:10]:
        _, y = sample(spec, 10**5, seed)
        fit = em_fit(y, 4, config).to_outputs()
        original.append(component_error(fit, spec.outputs))

        _, y_star = sample(HMMSpec(spec.A, fit), 10**5, seed + 1000)
        refit = em_fit(y_star, 4, config).to_outputs()
        bootstrap.append(component_error(refit, fit))
    assert np.median(bootstrap) <= 2.0 * np.median(original)
