"""
Arnés del estudio de simulación: barrido (método, T, semilla), tasas de
convergencia y barrido de estabilidad frente a perturbaciones de theta
"""
import csv
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..core.estimators import perturb_outputs
from ..exceptions import InsufficientData
from ..core.model import HMMSpec, sample, stationary_distribution
from ..core.pipeline import full_pipeline
from ..preprocessing.sequence_loader import SequenceLoader
from ..utils.config_loader import EstimationOptions, ExperimentConfig
from ..utils.logger import get_logger
from .strategies import BW_METHODS, RunContext, get_method, method_label

logger = get_logger(__name__)

RESULT_COLUMNS = ["method", "T", "seed", "frobenius_sq_error", "pi_l2_sq", "permutation", "status"]
RUNTIME_COLUMNS = ["method", "T", "seed", "wall_time_ms", "em_ms", "qp_ms", "bw_ms"]
TRACE_COLUMNS = ["method", "T", "seed", "iteration", "frobenius_sq_error"]
SUMMARY_COLUMNS = [
    "method", "label", "T", "runs", "failures",
    "median_frobenius_sq_error", "mean_frobenius_sq_error",
    "median_pi_l2_sq", "mean_pi_l2_sq",
]
RUNTIME_SUMMARY_COLUMNS = ["method", "T", "median_wall_time_ms", "mean_wall_time_ms"]
STABILITY_COLUMNS = ["epsilon", "seed", "added_error", "frobenius_sq_error", "status"]

# cantidad -> pendiente esperada en log-log
QUANTITIES = {
    "frobenius_sq_error": -1.0,
    "pi_l2_sq": -1.0,
    "frobenius_error": -0.5,
    "pi_l2": -0.5,
}
SLOPE_WINDOWS = {-1.0: 0.35, -0.5: 0.15}


@dataclass
class ResultRow:
    """Una corrida (método, T, semilla); los errores ya están alineados"""
    method: int
    T: int
    seed: int
    frobenius_sq_error: float
    pi_l2_sq: Optional[float] = None
    permutation: Tuple[int, ...] = ()
    status: str = "ok"
    wall_time_ms: float = 0.0
    em_ms: float = 0.0
    qp_ms: float = 0.0
    bw_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.method, self.T, self.seed)


@dataclass
class TraceRow:
    """||A_k - A||_F^2 tras la iteración k de Baum-Welch"""
    method: int
    T: int
    seed: int
    iteration: int
    frobenius_sq_error: float


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, columns: Sequence[str], rows: Iterable[Dict]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return path


def _median(values: List[float]) -> float:
    return float(np.median(values)) if values else math.nan


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else math.nan


@dataclass
class ResultSet:
    rows: List[ResultRow] = field(default_factory=list)
    traces: List[TraceRow] = field(default_factory=list)

    def sort(self) -> "ResultSet":
        """Orden (método, T, semilla), independiente del orden de finalización"""
        self.rows.sort(key=lambda r: r.key)
        self.traces.sort(key=lambda r: (r.method, r.T, r.seed, r.iteration))
        return self

    @property
    def failures(self) -> List[ResultRow]:
        return [r for r in self.rows if not r.ok]

    def groups(self) -> Dict[Tuple[int, int], List[ResultRow]]:
        grouped: Dict[Tuple[int, int], List[ResultRow]] = {}
        for row in sorted(self.rows, key=lambda r: r.key):
            grouped.setdefault((row.method, row.T), []).append(row)
        return grouped

    def summary(self) -> List[Dict]:
        """Mediana y media por (método, T) sobre las corridas exitosas"""
        out = []
        for (method, T), rows in self.groups().items():
            good = [r for r in rows if r.ok]
            errors = [r.frobenius_sq_error for r in good]
            pis = [r.pi_l2_sq for r in good if r.pi_l2_sq is not None]
            out.append({
                "method": method,
                "label": method_label(method),
                "T": T,
                "runs": len(rows),
                "failures": len(rows) - len(good),
                "median_frobenius_sq_error": _median(errors),
                "mean_frobenius_sq_error": _mean(errors),
                "median_pi_l2_sq": _median(pis) if pis else None,
                "mean_pi_l2_sq": _mean(pis) if pis else None,
            })
        return out

    def runtime_summary(self) -> List[Dict]:
        out = []
        for (method, T), rows in self.groups().items():
            times = [r.wall_time_ms for r in rows if r.ok]
            out.append({
                "method": method,
                "T": T,
                "median_wall_time_ms": _median(times),
                "mean_wall_time_ms": _mean(times),
            })
        return out

    def write_csv(self, output_dir: Union[str, Path]) -> Dict[str, Path]:
        """
        Escribe results.csv, summary.csv y bw_trace.csv (reproducibles byte a
        byte) más runtime.csv y runtime_summary.csv con los tiempos
        """
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        self.sort()
        rows = [vars(r) for r in self.rows]
        return {
            "results": _write_rows(output_dir / "results.csv", RESULT_COLUMNS, rows),
            "summary": _write_rows(output_dir / "summary.csv", SUMMARY_COLUMNS, self.summary()),
            "bw_trace": _write_rows(output_dir / "bw_trace.csv", TRACE_COLUMNS, (vars(t) for t in self.traces)),
            "runtime": _write_rows(output_dir / "runtime.csv", RUNTIME_COLUMNS, rows),
            "runtime_summary": _write_rows(
                output_dir / "runtime_summary.csv", RUNTIME_SUMMARY_COLUMNS, self.runtime_summary()
            ),
        }

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "ResultSet":
        """Lee un results.csv (sin tiempos) para rate_check"""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Archivo de resultados no encontrado: {path}")
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as f:
            for record in csv.DictReader(f):
                rows.append(ResultRow(
                    method=int(record["method"]),
                    T=int(record["T"]),
                    seed=int(record["seed"]),
                    frobenius_sq_error=float(record["frobenius_sq_error"]),
                    pi_l2_sq=float(record["pi_l2_sq"]) if record.get("pi_l2_sq") else None,
                    permutation=tuple(int(p) for p in record.get("permutation", "").split()),
                    status=record.get("status", "ok"),
                ))
        return cls(rows=rows)


def _stage_sum(ctx: RunContext, stages: Sequence[str], prefix: str) -> float:
    return sum(ctx.elapsed_ms(s) for s in stages if s.startswith(prefix))


def _error_status(error: BaseException) -> str:
    return f"error: {type(error).__name__}: {error}"


def failed_job_rows(config: ExperimentConfig, T: int, seed: int, error: BaseException) -> List[ResultRow]:
    """Una fila de error por método cuando falla el trabajo (T, semilla) entero"""
    logger.warning(f"Trabajo T={T}, semilla {seed} fallido: {type(error).__name__}: {error}")
    return [ResultRow(m, T, seed, math.nan, status=_error_status(error)) for m in sorted(config.methods)]


def run_job(config: ExperimentConfig, T: int, seed: int) -> Tuple[List[ResultRow], List[TraceRow]]:
    """
    Todos los métodos para un (T, semilla); comparten datos, EM y QPs

    Un fallo de un método queda registrado en su fila y no corta el resto.
    """
    try:
        spec = SequenceLoader.load_model(config.model)
    except Exception as e:
        return failed_job_rows(config, T, seed, e), []
    ctx = RunContext(spec, T, seed, config)
    A_true = spec.A.entries
    pi_true = None
    rows: List[ResultRow] = []
    traces: List[TraceRow] = []

    for method_id in sorted(config.methods):
        try:
            outcome = get_method(method_id).run(ctx)
        except Exception as e:
            logger.warning(f"Método {method_id}, T={T}, semilla {seed}: {type(e).__name__}: {e}")
            rows.append(ResultRow(method_id, T, seed, math.nan, status=_error_status(e)))
            continue

        pi_l2_sq = None
        if outcome.pi_hat is not None:
            if pi_true is None:
                pi_true = stationary_distribution(spec.A)
            pi_l2_sq = float(np.sum((outcome.pi_hat - pi_true) ** 2))
        rows.append(ResultRow(
            method=method_id,
            T=T,
            seed=seed,
            frobenius_sq_error=float(np.sum((outcome.A_hat - A_true) ** 2)),
            pi_l2_sq=pi_l2_sq,
            permutation=tuple(int(p) for p in outcome.permutation),
            wall_time_ms=sum(ctx.elapsed_ms(s) for s in outcome.stages),
            em_ms=_stage_sum(ctx, outcome.stages, "em"),
            qp_ms=_stage_sum(ctx, outcome.stages, "qp"),
            bw_ms=_stage_sum(ctx, outcome.stages, "bw"),
        ))
        if outcome.A_trace is not None and method_id in BW_METHODS:
            for iteration, A in enumerate(outcome.A_trace, start=1):
                traces.append(TraceRow(method_id, T, seed, iteration, float(np.sum((A - A_true) ** 2))))
    return rows, traces


def run_experiment(config: ExperimentConfig, write: bool = True, progress: bool = True) -> ResultSet:
    """
    Ejecuta el barrido completo con un pool de procesos acotado

    Args:
        config: ExperimentConfig validado
        write: Escribe los CSV en config.output_dir
        progress: Barra de progreso tqdm

    Returns:
        ResultSet ordenado por (método, T, semilla)
    """
    config.validate()
    jobs = [(T, seed) for T in config.T_grid for seed in config.seeds]
    logger.info(
        f"Experimento '{config.name}': métodos {config.methods}, T={config.T_grid}, "
        f"{len(config.seeds)} semillas, {len(jobs)} trabajos"
    )
    results = ResultSet()

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(run_job, config, T, seed): (T, seed) for T, seed in jobs}
            for future in tqdm(as_completed(futures), total=len(futures), desc="Barrido", disable=not progress):
                T, seed = futures[future]
                try:
                    rows, traces = future.result()
                except Exception as e:
                    rows, traces = failed_job_rows(config, T, seed, e), []
                results.rows.extend(rows)
                results.traces.extend(traces)
    else:
        for T, seed in tqdm(jobs, desc="Barrido", disable=not progress):
            try:
                rows, traces = run_job(config, T, seed)
            except Exception as e:
                rows, traces = failed_job_rows(config, T, seed, e), []
            results.rows.extend(rows)
            results.traces.extend(traces)

    results.sort()
    if results.failures:
        logger.warning(f"{len(results.failures)} corridas fallidas de {len(results.rows)}")
    if write:
        paths = results.write_csv(config.output_path)
        logger.info(f"Resultados guardados en: {paths['results'].parent}")
    return results


@dataclass
class RateCheck:
    """Pendiente log-log de la mediana del error frente a T"""
    quantity: str
    slope: float
    intercept: float
    expected: float
    window: float
    points: List[Tuple[int, float]]

    @property
    def passed(self) -> bool:
        return abs(self.slope - self.expected) <= self.window

    def to_dict(self) -> Dict:
        return {
            "quantity": self.quantity,
            "slope": self.slope,
            "intercept": self.intercept,
            "expected": self.expected,
            "window": self.window,
            "passed": self.passed,
            "points": [list(p) for p in self.points],
        }


def rate_check(
    results: Union[ResultSet, Iterable[ResultRow]],
    quantity: str = "frobenius_sq_error",
    method: Optional[int] = None,
    min_T_values: int = 3,
    min_seeds: int = 10,
) -> RateCheck:
    """
    Ajusta por mínimos cuadrados log10(mediana) = a + b log10(T)

    Pasa si b está dentro de la ventana de la pendiente esperada
    (-1 +- 0.35 para errores al cuadrado, -0.5 +- 0.15 para normas).

    Raises:
        InsufficientData: menos de min_T_values valores de T o de min_seeds
            corridas exitosas en alguno
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"Cantidad '{quantity}' no soportada. Opciones: {list(QUANTITIES)}")
    rows = results.rows if isinstance(results, ResultSet) else list(results)
    if method is not None:
        rows = [r for r in rows if r.method == method]
    if len({r.method for r in rows}) > 1:
        raise ValueError("Las filas mezclan métodos; indique method")

    squared = "pi_l2_sq" if quantity.startswith("pi") else "frobenius_sq_error"
    by_T: Dict[int, List[float]] = {}
    for row in rows:
        value = getattr(row, squared)
        if not row.ok or value is None or not math.isfinite(value):
            continue
        if quantity in ("frobenius_error", "pi_l2"):
            value = math.sqrt(value)
        by_T.setdefault(row.T, []).append(value)

    sparse = {T: len(v) for T, v in by_T.items() if len(v) < min_seeds}
    if len(by_T) < min_T_values or sparse:
        raise InsufficientData(
            f"Se requieren >= {min_T_values} valores de T con >= {min_seeds} semillas; "
            f"hay {len(by_T)} valores de T, insuficientes: {sparse}"
        )

    points = [(T, _median(by_T[T])) for T in sorted(by_T)]
    if any(m <= 0 for _, m in points):
        raise InsufficientData("Mediana nula: la pendiente log-log no está definida")
    log_T = np.log10([p[0] for p in points])
    log_err = np.log10([p[1] for p in points])
    slope, intercept = np.polyfit(log_T, log_err, 1)
    expected = QUANTITIES[quantity]
    check = RateCheck(quantity, float(slope), float(intercept), expected, SLOPE_WINDOWS[expected], points)
    logger.info(f"Pendiente de {quantity}: {check.slope:.3f} (esperada {expected}) -> {'OK' if check.passed else 'FALLA'}")
    return check


@dataclass
class StabilityRow:
    epsilon: float
    seed: int
    added_error: float
    frobenius_sq_error: float
    status: str = "ok"


@dataclass
class StabilityResult:
    rows: List[StabilityRow] = field(default_factory=list)

    def median_curve(self) -> List[Tuple[float, float]]:
        """(epsilon, mediana del error agregado ||A_eps - A_0||_F^2)"""
        epsilons = sorted({r.epsilon for r in self.rows})
        return [
            (eps, _median([r.added_error for r in self.rows if r.epsilon == eps and r.status == "ok"]))
            for eps in epsilons
        ]

    def is_monotone(self) -> bool:
        medians = [m for _, m in self.median_curve()]
        return all(b >= a for a, b in zip(medians, medians[1:]))

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        rows = sorted(self.rows, key=lambda r: (r.epsilon, r.seed))
        return _write_rows(path, STABILITY_COLUMNS, (vars(r) for r in rows))


def stability_sweep(
    spec: HMMSpec,
    epsilons: Sequence[float],
    T: int,
    seeds: Sequence[int],
    options: Optional[EstimationOptions] = None,
    progress: bool = False,
) -> StabilityResult:
    """
    Método 2 con theta perturbado a distancia epsilon

    El error agregado es ||A_hat(theta_eps) - A_hat(theta)||_F^2 sobre los
    mismos datos; para epsilon = 0 es exactamente 0.
    """
    if any(eps < 0 for eps in epsilons):
        raise ValueError("Los epsilon deben ser >= 0")
    result = StabilityResult()
    A_true = spec.A.entries
    for seed in tqdm(list(seeds), desc="Estabilidad", disable=not progress):
        _, y = sample(spec, T, seed)
        baseline = full_pipeline(y, spec.outputs, options).A_hat
        for eps in epsilons:
            try:
                outputs = perturb_outputs(spec.outputs, eps, seed)
                A_hat = baseline if outputs is spec.outputs else full_pipeline(y, outputs, options).A_hat
                result.rows.append(StabilityRow(
                    epsilon=float(eps),
                    seed=seed,
                    added_error=float(np.sum((A_hat - baseline) ** 2)),
                    frobenius_sq_error=float(np.sum((A_hat - A_true) ** 2)),
                ))
            except Exception as e:
                logger.warning(f"Estabilidad eps={eps}, semilla {seed}: {type(e).__name__}: {e}")
                result.rows.append(StabilityRow(float(eps), seed, math.nan, math.nan, f"error: {type(e).__name__}: {e}"))
    return result
