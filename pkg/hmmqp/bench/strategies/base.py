"""
Contexto compartido entre los métodos de un mismo (T, semilla)
Los datos, el ajuste EM y las salidas de los QPs se calculan una sola vez
"""
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ...exceptions import InvalidConfig
from ...core.mixture import MixtureFit, align_components, em_fit
from ...core.model import GaussianOutputModel, HMMSpec, permute_transition, sample
from ...core.moments import analytic_moments, load_moments, save_moments
from ...core.pipeline import EstimationReport, full_pipeline
from ...utils.config_loader import ExperimentConfig


@dataclass
class MethodOutcome:
    """A_hat (y su traza de BW) ya en las etiquetas del modelo verdadero"""
    A_hat: np.ndarray
    stages: Tuple[str, ...]
    permutation: Tuple[int, ...]
    pi_hat: Optional[np.ndarray] = None
    A_trace: Optional[List[np.ndarray]] = None


@dataclass
class _Stage:
    value: Any = None
    error: Optional[BaseException] = None
    elapsed_ms: float = 0.0


class RunContext:
    """Datos y resultados intermedios de una corrida (T, semilla)"""

    def __init__(self, spec: HMMSpec, T: int, seed: int, config: ExperimentConfig):
        self.spec = spec
        self.T = T
        self.seed = seed
        self.config = config
        self._stages: Dict[str, _Stage] = {}

    def stage(self, name: str, builder: Callable[[], Any]) -> Any:
        """Ejecuta builder una vez, mide su tiempo y recuerda el valor o el error"""
        if name not in self._stages:
            start = time.perf_counter()
            record = _Stage()
            try:
                record.value = builder()
            except Exception as e:
                record.error = e
            record.elapsed_ms = (time.perf_counter() - start) * 1000.0
            self._stages[name] = record
        record = self._stages[name]
        if record.error is not None:
            raise record.error
        return record.value

    def elapsed_ms(self, name: str) -> float:
        return self._stages[name].elapsed_ms if name in self._stages else 0.0

    def method_seed(self, method_id: int) -> np.random.SeedSequence:
        """Semilla de inicialización aleatoria propia de cada método"""
        return np.random.SeedSequence([self.seed, method_id, self.T])

    @property
    def y(self) -> np.ndarray:
        return self.stage("sample", lambda: sample(self.spec, self.T, self.seed)[1])

    def _require_gaussian(self):
        if not isinstance(self.spec.outputs, GaussianOutputModel):
            raise InvalidConfig("Los métodos con EM requieren salidas gaussianas")

    def mixture(self) -> MixtureFit:
        """Ajuste EM alineado con las etiquetas del modelo verdadero"""
        self._require_gaussian()

        def build():
            mixture_config = replace(self.config.mixture, seed=self.config.mixture.seed + self.seed)
            fit = em_fit(self.y, self.spec.n, mixture_config)
            return fit.permuted(align_components(fit, self.spec.outputs))

        return self.stage("em", build)

    def moments_cache_file(self) -> Path:
        """Archivo de momentos del método 2 para este (T, semilla) y estas opciones"""
        options = self.config.estimation
        variant = "eta_prime" if options.use_eta_prime else "eta"
        model = Path(self.config.model).stem
        name = f"{model}_T{self.T}_seed{self.seed}_{options.objective}_{variant}.json"
        return self.config.moments_cache_path / name

    def qp_known(self) -> EstimationReport:
        """
        Pipeline QP con los parámetros de salida exactos

        Con cache_moments los momentos empíricos se leen del cache si existen
        y se guardan tras la primera corrida.
        """
        def build():
            if self.config.exact_moments:
                moments = analytic_moments(self.spec)
                return full_pipeline(None, self.spec.outputs, self.config.estimation, self.spec, moments)
            if not self.config.cache_moments:
                return full_pipeline(self.y, self.spec.outputs, self.config.estimation, self.spec)

            cache_file = self.moments_cache_file()
            if cache_file.exists():
                moments = load_moments(cache_file)
                return full_pipeline(None, self.spec.outputs, self.config.estimation, self.spec, moments)
            report = full_pipeline(self.y, self.spec.outputs, self.config.estimation, self.spec)
            save_moments(report.moments, cache_file)
            return report

        return self.stage("qp_known", build)

    def qp_em(self) -> EstimationReport:
        """Pipeline QP con las salidas estimadas por EM"""
        fit = self.mixture()
        return self.stage(
            "qp_em",
            lambda: full_pipeline(self.y, fit.to_outputs(), self.config.estimation, self.spec),
        )


def align_to_truth(outputs, spec: HMMSpec) -> Tuple[int, ...]:
    """Permutación de etiquetas; identidad si las salidas no son gaussianas"""
    if isinstance(outputs, GaussianOutputModel) and isinstance(spec.outputs, GaussianOutputModel):
        return align_components(outputs, spec.outputs)
    return tuple(range(spec.n))


def relabel(A: np.ndarray, perm: Tuple[int, ...]) -> np.ndarray:
    return permute_transition(A, perm)
