"""
Aprendiz desacoplado que orquesta todos los componentes:
momentos -> pi_hat -> (F si es continuo) -> A_hat
"""
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .estimators import (
    AEstimate,
    PiEstimate,
    estimate_A_continuous,
    estimate_A_discrete,
    estimate_pi_continuous,
    estimate_pi_discrete,
)
from .mixture import align_components
from .model import (
    DiscreteOutputModel,
    GaussianOutputModel,
    HMMSpec,
    OutputModel,
    permute_transition,
    stationary_distribution,
)
from .moments import (
    ContinuousMoments,
    DiscreteMoments,
    Moments,
    compute_F,
    empirical_continuous_moments,
    empirical_rho_sigma,
    gaussian_K,
)
from ..preprocessing.chunker import materialize_once
from ..utils.config_loader import EstimationOptions
from ..utils.logger import get_logger

REPORT_SCHEMA = "report-v1"


@dataclass
class EstimationReport:
    """Resultado completo del pipeline, serializable a JSON"""
    kind: str
    pi: PiEstimate
    A: AEstimate
    T: Optional[int]
    options: Dict[str, Any]
    timings_ms: Dict[str, float] = field(default_factory=dict)
    matrices: Dict[str, Any] = field(default_factory=dict)
    errors: Optional[Dict[str, Any]] = None
    moments: Optional[Moments] = field(default=None, repr=False, compare=False)

    @property
    def pi_hat(self) -> np.ndarray:
        return self.pi.pi_hat

    @property
    def A_hat(self) -> np.ndarray:
        return self.A.A_hat.entries

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "kind": self.kind,
            "T": self.T,
            "options": self.options,
            "pi": self.pi.to_dict(),
            "A": self.A.to_dict(),
            "timings_ms": self.timings_ms,
            "matrices": self.matrices,
            "errors": self.errors,
        }

    def to_json(self, path: Optional[Union[str, Path]] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_json_default)
        if path is not None:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        return text


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"No serializable: {type(value)}")


def estimation_errors(
    pi_hat: np.ndarray,
    A_hat: np.ndarray,
    outputs_hat: OutputModel,
    truth: HMMSpec,
) -> Dict[str, Any]:
    """
    ||pi_hat - pi||_2, su cuadrado y ||A_hat - A||_F^2 tras alinear etiquetas

    Las salidas gaussianas se alinean con align_components; las discretas
    conservan las etiquetas.
    """
    if isinstance(outputs_hat, GaussianOutputModel) and isinstance(truth.outputs, GaussianOutputModel):
        perm = align_components(outputs_hat, truth.outputs)
    else:
        perm = tuple(range(truth.n))
    pi_true = stationary_distribution(truth.A)
    pi_aligned = np.asarray(pi_hat)[list(perm)]
    A_aligned = permute_transition(A_hat, perm)
    pi_err = float(np.linalg.norm(pi_aligned - pi_true))
    return {
        "permutation": list(perm),
        "pi_l2": pi_err,
        "pi_l2_sq": pi_err ** 2,
        "A_frobenius_sq": float(np.sum((A_aligned - truth.A.entries) ** 2)),
    }


class DecoupledLearner:
    """Estimador de pi y A con las salidas ya conocidas o estimadas"""

    def __init__(self, options: Optional[EstimationOptions] = None, log_level: str = "INFO"):
        """
        Args:
            options: EstimationOptions (objetivo, restricción de estacionariedad, eta', chunk_size)
            log_level: Nivel del logger hmmqp.pipeline
        """
        self.options = options or EstimationOptions()
        self.logger = get_logger("hmmqp.pipeline", level=log_level)
        self.logger.setLevel(log_level.upper())

    def _options_dict(self) -> Dict[str, Any]:
        return {
            "objective": self.options.objective,
            "stationarity_constraint": self.options.stationarity,
            "use_eta_prime": self.options.use_eta_prime,
        }

    def fit(
        self,
        y,
        outputs_hat: OutputModel,
        truth: Optional[HMMSpec] = None,
        moments: Optional[Moments] = None,
    ) -> EstimationReport:
        """
        Ejecuta el pipeline completo

        Args:
            y: Secuencia (o lista de secuencias); se ignora si se pasan moments
            outputs_hat: Parámetros de salida conocidos o estimados
            truth: Modelo verdadero, si se da se rellenan los errores
            moments: Momentos precalculados (p.ej. exactos); continuos deben traer eta_hat

        Returns:
            EstimationReport
        """
        if isinstance(outputs_hat, DiscreteOutputModel):
            report = self._fit_discrete(y, outputs_hat, moments)
        else:
            report = self._fit_continuous(y, outputs_hat, moments)
        report.timings_ms["total"] = float(sum(report.timings_ms.values()))
        if truth is not None:
            report.errors = estimation_errors(report.pi_hat, report.A_hat, outputs_hat, truth)
        self.logger.info(
            f"Pipeline {report.kind} completado en {report.timings_ms['total']:.1f} ms "
            f"({', '.join(f'{k}={v:.1f}' for k, v in report.timings_ms.items() if k != 'total')})"
        )
        return report

    def _fit_discrete(self, y, outputs: DiscreteOutputModel, moments: Optional[Moments]) -> EstimationReport:
        timings: Dict[str, float] = {}
        start = time.perf_counter()
        if moments is None:
            moments = empirical_rho_sigma(y, outputs.m, self.options.chunk_size)
        if not isinstance(moments, DiscreteMoments):
            raise ValueError("Salidas discretas requieren DiscreteMoments")
        timings["moments"] = _elapsed_ms(start)

        start = time.perf_counter()
        pi = estimate_pi_discrete(moments, outputs, self.options.objective)
        timings["pi"] = _elapsed_ms(start)

        start = time.perf_counter()
        A = estimate_A_discrete(moments, outputs, pi.pi_hat, self.options.objective, self.options.stationarity)
        timings["A"] = _elapsed_ms(start)
        return EstimationReport("discrete", pi, A, moments.T, self._options_dict(), timings, moments=moments)

    def _fit_continuous(self, y, outputs: GaussianOutputModel, moments: Optional[Moments]) -> EstimationReport:
        timings: Dict[str, float] = {}
        use_eta_prime = self.options.use_eta_prime
        chunk_size = self.options.chunk_size

        start = time.perf_counter()
        if moments is None:
            if not use_eta_prime:
                y = materialize_once(y)
            # Primera pasada: xi (y eta' si se pide); eta necesita pi_hat
            moments = empirical_continuous_moments(y, outputs, None, use_eta_prime, chunk_size)
        if not isinstance(moments, ContinuousMoments):
            raise ValueError("Salidas gaussianas requieren ContinuousMoments")
        timings["moments"] = _elapsed_ms(start)

        start = time.perf_counter()
        K = gaussian_K(outputs)
        pi = estimate_pi_continuous(moments, K, self.options.objective)
        timings["pi"] = _elapsed_ms(start)

        matrices: Dict[str, Any] = {"K": K.tolist()}
        if use_eta_prime:
            start = time.perf_counter()
            A = estimate_A_continuous(
                moments, None, pi.pi_hat, self.options.objective, self.options.stationarity,
                use_eta_prime=True, K=K,
            )
            timings["A"] = _elapsed_ms(start)
        else:
            start = time.perf_counter()
            F = compute_F(outputs, pi.pi_hat)
            timings["F"] = _elapsed_ms(start)
            matrices["F"] = F.tolist()

            if moments.eta_hat is None:
                start = time.perf_counter()
                second = empirical_continuous_moments(y, outputs, pi.pi_hat, False, chunk_size)
                moments = ContinuousMoments(moments.xi_hat, second.eta_hat, moments.eta_prime_hat, moments.T)
                timings["moments"] += _elapsed_ms(start)

            start = time.perf_counter()
            A = estimate_A_continuous(moments, F, pi.pi_hat, self.options.objective, self.options.stationarity)
            timings["A"] = _elapsed_ms(start)
        return EstimationReport(
            "continuous", pi, A, moments.T, self._options_dict(), timings, matrices, moments=moments,
        )


def _elapsed_ms(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


def full_pipeline(
    y,
    outputs_hat: OutputModel,
    options: Optional[EstimationOptions] = None,
    truth: Optional[HMMSpec] = None,
    moments: Optional[Moments] = None,
) -> EstimationReport:
    """Atajo funcional de DecoupledLearner(options).fit(...)"""
    return DecoupledLearner(options).fit(y, outputs_hat, truth=truth, moments=moments)
