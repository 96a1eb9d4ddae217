"""
Definición, validación y muestreo de HMMs con salidas paramétricas
Convención: A es estocástica por columnas, A[i, j] = P(X_t = i | X_{t-1} = j)
"""
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import InvalidModel, NonUniqueStationary

STOCHASTIC_TOL = 1e-12
STATIONARY_TOL = 1e-10
RANK_TOL = 1e-8


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    """Copia a float64 de solo lectura con la dimensión esperada"""
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidModel(f"{name} no es numérico: {e}") from e
    if arr.ndim != ndim:
        raise InvalidModel(f"{name} debe tener {ndim} dimensiones, tiene {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidModel(f"{name} contiene valores no finitos")
    arr.setflags(write=False)
    return arr


def _check_column_stochastic(matrix: np.ndarray, name: str, tol: float = STOCHASTIC_TOL):
    if np.any(matrix < 0) or np.any(matrix > 1):
        raise InvalidModel(f"{name} tiene entradas fuera de [0, 1]")
    col_sums = matrix.sum(axis=0)
    worst = float(np.max(np.abs(col_sums - 1.0)))
    if worst > tol:
        raise InvalidModel(f"Las columnas de {name} no suman 1 (desvío máximo {worst:.3e})")


def smallest_singular_value(matrix: np.ndarray) -> float:
    """Valor singular más pequeño (sigma_1)"""
    return float(np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)[-1])


def has_full_column_rank(matrix: np.ndarray, rank_tol: float = RANK_TOL) -> bool:
    """Rango completo si sigma_min > rank_tol * sigma_max"""
    s = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return False
    return bool(s[-1] > rank_tol * s[0])


@dataclass(frozen=True)
class TransitionMatrix:
    """Matriz de transición n x n estocástica por columnas"""
    entries: np.ndarray

    def __post_init__(self):
        entries = _frozen_array(self.entries, 2, "A")
        if entries.shape[0] != entries.shape[1]:
            raise InvalidModel(f"A debe ser cuadrada, forma {entries.shape}")
        _check_column_stochastic(entries, "A")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_estimate(cls, matrix: np.ndarray) -> "TransitionMatrix":
        """
        Limpia una estimación numérica: el polvo negativo se lleva a 0 y las
        columnas se renormalizan
        """
        matrix = np.clip(np.asarray(matrix, dtype=float), 0.0, None)
        sums = matrix.sum(axis=0)
        n = matrix.shape[0]
        # Columna vacía: se reemplaza por la uniforme
        empty = sums <= 0
        if np.any(empty):
            matrix[:, empty] = 1.0 / n
            sums = matrix.sum(axis=0)
        return cls(np.minimum(matrix / sums, 1.0))


@dataclass(frozen=True)
class DiscreteOutputModel:
    """Matriz de emisión m x n, columna j = distribución de salida del estado j"""
    B: np.ndarray

    def __post_init__(self):
        B = _frozen_array(self.B, 2, "B")
        if B.shape[0] < B.shape[1]:
            raise InvalidModel(f"Se requiere m >= n, forma de B {B.shape}")
        _check_column_stochastic(B, "B")
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    def is_full_rank(self, rank_tol: float = RANK_TOL) -> bool:
        return has_full_column_rank(self.B, rank_tol)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "discrete", "B": self.B.tolist()}


@dataclass(frozen=True)
class GaussianOutputModel:
    """Salidas gaussianas univariadas, una (mu, sigma2) por estado"""
    components: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        try:
            comps = tuple((float(mu), float(s2)) for mu, s2 in self.components)
        except (TypeError, ValueError) as e:
            raise InvalidModel(f"Componentes gaussianas mal formadas: {e}") from e
        if not comps:
            raise InvalidModel("Se requiere al menos una componente")
        for mu, s2 in comps:
            if not np.isfinite(mu) or not np.isfinite(s2) or s2 <= 0:
                raise InvalidModel(f"Componente inválida N({mu}, {s2})")
        if len(set(comps)) != len(comps):
            raise InvalidModel("Los parámetros (mu, sigma2) de los estados deben ser distintos")
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def mu(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def sigma2(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    def log_densities(self, y: np.ndarray) -> np.ndarray:
        """Matriz (T, n) con log f_k(y_t)"""
        y = np.asarray(y, dtype=float).reshape(-1, 1)
        mu, s2 = self.mu, self.sigma2
        return -0.5 * (y - mu) ** 2 / s2 - 0.5 * np.log(2.0 * np.pi * s2)

    def densities(self, y: np.ndarray) -> np.ndarray:
        """Matriz (T, n) con f_k(y_t)"""
        return np.exp(self.log_densities(y))

    def max_density(self) -> float:
        """L = max_i sup_y f_i(y)"""
        return float(np.max(1.0 / np.sqrt(2.0 * np.pi * self.sigma2)))

    def permuted(self, perm: Sequence[int]) -> "GaussianOutputModel":
        return GaussianOutputModel(tuple(self.components[p] for p in perm))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "gaussian",
            "components": [{"mu": mu, "sigma2": s2} for mu, s2 in self.components],
        }


OutputModel = Union[DiscreteOutputModel, GaussianOutputModel]


def outputs_from_dict(data: Dict[str, Any]) -> OutputModel:
    """Construye el modelo de salida desde el esquema del archivo de modelo"""
    kind = data.get("type")
    if kind == "discrete":
        return DiscreteOutputModel(data["B"])
    if kind == "gaussian":
        comps = data.get("components", [])
        return GaussianOutputModel(tuple((c["mu"], c["sigma2"]) for c in comps))
    raise InvalidModel(f"Tipo de salida '{kind}' no soportado. Opciones: ['discrete', 'gaussian']")


@dataclass(frozen=True)
class HMMSpec:
    """Tupla (A, salidas, P_0) de un HMM"""
    A: TransitionMatrix
    outputs: OutputModel
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        if not isinstance(self.A, TransitionMatrix):
            object.__setattr__(self, "A", TransitionMatrix(self.A))
        if self.A.n != self.outputs.n:
            raise InvalidModel(
                f"Dimensiones incoherentes: A tiene {self.A.n} estados, "
                f"las salidas {self.outputs.n}"
            )
        if self.initial is not None:
            initial = _frozen_array(self.initial, 1, "initial")
            if initial.shape[0] != self.A.n:
                raise InvalidModel("initial debe tener n entradas")
            if np.any(initial < 0) or abs(initial.sum() - 1.0) > STOCHASTIC_TOL:
                raise InvalidModel("initial debe ser un vector de probabilidad")
            object.__setattr__(self, "initial", initial)

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.outputs, DiscreteOutputModel)

    def permuted(self, perm: Sequence[int]) -> "HMMSpec":
        """Reetiqueta estados: el nuevo estado i es el viejo perm[i]"""
        perm = list(perm)
        A = permute_transition(self.A.entries, perm)
        if self.is_discrete:
            outputs = DiscreteOutputModel(self.outputs.B[:, perm])
        else:
            outputs = self.outputs.permuted(perm)
        initial = None if self.initial is None else self.initial[perm]
        return HMMSpec(TransitionMatrix(A), outputs, initial)

    def to_dict(self) -> Dict[str, Any]:
        data = {"n": self.n, "A": self.A.entries.tolist(), "outputs": self.outputs.to_dict()}
        if self.initial is not None:
            data["initial"] = self.initial.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HMMSpec":
        for key in ("A", "outputs"):
            if key not in data:
                raise InvalidModel(f"Falta la clave '{key}' en el modelo")
        spec = cls(TransitionMatrix(data["A"]), outputs_from_dict(data["outputs"]), data.get("initial"))
        if "n" in data and int(data["n"]) != spec.n:
            raise InvalidModel(f"n={data['n']} no coincide con A ({spec.n} estados)")
        return spec


@dataclass(frozen=True)
class ErgodicityDiagnostics:
    """Constantes observables de los supuestos de ergodicidad"""
    pi: np.ndarray
    second_eigenvalue_modulus: float
    min_pi: float
    min_rho: Optional[float] = None
    density_bound: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pi": self.pi.tolist(),
            "second_eigenvalue_modulus": self.second_eigenvalue_modulus,
            "min_pi": self.min_pi,
            "min_rho": self.min_rho,
            "density_bound": self.density_bound,
        }


def permute_transition(A: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """P A P^T: el nuevo estado i corresponde al viejo perm[i]"""
    perm = np.asarray(perm, dtype=int)
    return np.asarray(A)[np.ix_(perm, perm)]


def _entries(A: Union[TransitionMatrix, np.ndarray]) -> np.ndarray:
    return A.entries if isinstance(A, TransitionMatrix) else TransitionMatrix(A).entries


def second_eigenvalue_modulus(A: Union[TransitionMatrix, np.ndarray]) -> float:
    """|lambda_2(A)|, usado como proxy de la velocidad de mezcla"""
    entries = _entries(A)
    if entries.shape[0] == 1:
        return 0.0
    eigvals = np.linalg.eigvals(entries)
    # Se descarta el autovalor más cercano a 1
    rest = np.delete(eigvals, int(np.argmin(np.abs(eigvals - 1.0))))
    return float(min(1.0, np.max(np.abs(rest))))


def stationary_distribution(A: Union[TransitionMatrix, np.ndarray]) -> np.ndarray:
    """
    Vector estacionario pi con A pi = pi, pi >= 0, sum(pi) = 1

    Se resuelve por mínimos cuadrados el sistema singular (A - I) pi = 0
    aumentado con la fila de normalización.

    Raises:
        NonUniqueStationary: si el autovalor 1 es múltiple
    """
    entries = _entries(A)
    n = entries.shape[0]
    if n > 1:
        eigvals = np.linalg.eigvals(entries)
        near_one = np.sort(np.abs(eigvals - 1.0))
        if near_one[1] < STATIONARY_TOL:
            raise NonUniqueStationary(
                "El autovalor 1 de A es múltiple: la cadena no tiene distribución estacionaria única"
            )

    system = np.vstack([entries - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def ergodicity_diagnostics(spec: HMMSpec) -> ErgodicityDiagnostics:
    """
    Rellena pi, |lambda_2|, a_0 = min pi, a_1 = min rho (discreto) y
    L = max densidad (gaussiano). G y psi no se estiman.
    """
    pi = stationary_distribution(spec.A)
    min_rho = None
    density_bound = None
    if spec.is_discrete:
        min_rho = float(np.min(spec.outputs.B @ pi))
    else:
        density_bound = spec.outputs.max_density()
    return ErgodicityDiagnostics(
        pi=pi,
        second_eigenvalue_modulus=second_eigenvalue_modulus(spec.A),
        min_pi=float(np.min(pi)),
        min_rho=min_rho,
        density_bound=density_bound,
    )


def make_rng(seed: int) -> np.random.Generator:
    """Generador PCG64 (128 bits de estado), reproducible por semilla"""
    return np.random.Generator(np.random.PCG64(seed))


def _draw_categorical_columns(cumulative: np.ndarray, states: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inversión de la CDF por columna: salida ~ columna states[t] de la matriz"""
    out = np.empty(states.shape[0], dtype=int)
    last = cumulative.shape[0] - 1
    for s in range(cumulative.shape[1]):
        mask = states == s
        if np.any(mask):
            out[mask] = np.minimum(np.searchsorted(cumulative[:, s], u[mask], side="right"), last)
    return out


def sample(spec: HMMSpec, T: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Muestrea (camino oculto, observaciones) de longitud T

    Args:
        spec: HMM a muestrear
        T: longitud (>= 1)
        seed: semilla del PCG64

    Returns:
        Tupla (x, y); y es int para salidas discretas y float para gaussianas
    """
    if int(T) < 1:
        raise InvalidModel(f"T debe ser >= 1, recibido {T}")
    T = int(T)
    rng = make_rng(seed)
    n = spec.n
    initial = spec.initial if spec.initial is not None else stationary_distribution(spec.A)

    u = rng.random(T)
    cum_init = np.cumsum(initial)
    cum_cols: List[List[float]] = [list(np.cumsum(spec.A.entries[:, j])) for j in range(n)]

    path = np.empty(T, dtype=int)
    state = min(int(np.searchsorted(cum_init, u[0], side="right")), n - 1)
    path[0] = state
    last = n - 1
    u_list = u.tolist()
    for t in range(1, T):
        state = bisect_right(cum_cols[state], u_list[t])
        if state > last:
            state = last
        path[t] = state

    if spec.is_discrete:
        cum_B = np.cumsum(spec.outputs.B, axis=0)
        obs = _draw_categorical_columns(cum_B, path, rng.random(T))
    else:
        z = rng.standard_normal(T)
        obs = spec.outputs.mu[path] + np.sqrt(spec.outputs.sigma2[path]) * z
    return path, obs


def random_transition_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """Columnas Dirichlet(1, ..., 1)"""
    return rng.dirichlet(np.ones(n), size=n).T


def toy4_spec() -> HMMSpec:
    """HMM gaussiano de 4 estados del estudio de simulación"""
    A = [
        [0.7, 0.0, 0.2, 0.5],
        [0.2, 0.6, 0.2, 0.0],
        [0.1, 0.2, 0.6, 0.0],
        [0.0, 0.2, 0.0, 0.5],
    ]
    outputs = GaussianOutputModel(((-4.0, 4.0), (0.0, 1.0), (2.0, 36.0), (4.0, 1.0)))
    return HMMSpec(TransitionMatrix(A), outputs)


BUILTIN_SPECS = {
    "toy4": toy4_spec,
}
