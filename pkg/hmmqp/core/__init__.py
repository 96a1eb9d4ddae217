"""
Servicios numéricos: modelo, momentos, QP, estimadores, EM y Baum-Welch
"""
from .model import (
    TransitionMatrix,
    DiscreteOutputModel,
    GaussianOutputModel,
    HMMSpec,
    ErgodicityDiagnostics,
    stationary_distribution,
    ergodicity_diagnostics,
    sample,
    toy4_spec,
)
from .moments import (
    DiscreteMoments,
    ContinuousMoments,
    EffectiveMatrices,
    empirical_rho_sigma,
    empirical_xi,
    empirical_eta,
    empirical_continuous_moments,
    gaussian_K,
    compute_F,
    analytic_moments,
)
from .qp import SimplexQP, QPSolution, solve, solve_normal_equations, perturbation_bound
from .estimators import (
    estimate_pi_discrete,
    estimate_pi_continuous,
    estimate_A_discrete,
    estimate_A_continuous,
    perturb_outputs,
)
from .pipeline import DecoupledLearner, EstimationReport, full_pipeline
from .mixture import MixtureFit, em_fit, align_components
from .baseline import BaumWelchInit, BaumWelchResult, baum_welch, forward_backward, random_init

__all__ = [
    'TransitionMatrix',
    'DiscreteOutputModel',
    'GaussianOutputModel',
    'HMMSpec',
    'ErgodicityDiagnostics',
    'stationary_distribution',
    'ergodicity_diagnostics',
    'sample',
    'toy4_spec',
    'DiscreteMoments',
    'ContinuousMoments',
    'EffectiveMatrices',
    'empirical_rho_sigma',
    'empirical_xi',
    'empirical_eta',
    'empirical_continuous_moments',
    'gaussian_K',
    'compute_F',
    'analytic_moments',
    'SimplexQP',
    'QPSolution',
    'solve',
    'solve_normal_equations',
    'perturbation_bound',
    'estimate_pi_discrete',
    'estimate_pi_continuous',
    'estimate_A_discrete',
    'estimate_A_continuous',
    'perturb_outputs',
    'DecoupledLearner',
    'EstimationReport',
    'full_pipeline',
    'MixtureFit',
    'em_fit',
    'align_components',
    'BaumWelchInit',
    'BaumWelchResult',
    'baum_welch',
    'forward_backward',
    'random_init',
]
