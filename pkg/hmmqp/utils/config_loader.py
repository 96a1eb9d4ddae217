"""
Cargador de configuración YAML/JSON para instancias de experimentos
Permite configs reutilizables y específicas por instancia
"""
import yaml
from pathlib import Path
from typing import Dict, Any, List, Optional
from dataclasses import dataclass, field, fields

from ..exceptions import InvalidConfig

VALID_METHODS = tuple(range(1, 8))
MIN_T = 100


@dataclass
class MixtureConfig:
    """Configuración del EM de la mezcla"""
    max_iters: int = 500
    tol: float = 1e-8
    restarts: int = 10
    seed: int = 0


@dataclass
class EstimationOptions:
    """Opciones de los estimadores QP"""
    objective: str = "weighted"  # 'weighted', 'unweighted'
    stationarity_constraint: Optional[bool] = None  # None: activa solo con 'weighted'
    use_eta_prime: bool = False
    chunk_size: int = 65536

    @property
    def stationarity(self) -> bool:
        if self.stationarity_constraint is None:
            return self.objective == "weighted"
        return bool(self.stationarity_constraint)


@dataclass
class StabilityConfig:
    """Barrido de perturbación de los parámetros de salida"""
    epsilons: List[float] = field(default_factory=lambda: [0.0, 1e-4, 1e-3, 1e-2, 1e-1])
    T: int = 100000


@dataclass
class ExperimentConfig:
    """Configuración completa de un experimento"""
    name: str = "Experimento"
    description: str = ""
    instance_path: Path = field(default_factory=lambda: Path("."))

    model: str = "toy4"  # nombre builtin o ruta a un archivo de modelo
    methods: List[int] = field(default_factory=lambda: list(VALID_METHODS))
    T_grid: List[int] = field(default_factory=lambda: [1000, 10000, 100000, 1000000])
    seeds: List[int] = field(default_factory=lambda: list(range(20)))
    bw_iters: int = 20
    workers: int = 1
    output_dir: str = "./results"
    exact_moments: bool = False
    cache_moments: bool = False  # momentos del método 2 en <output_dir>/moments

    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    estimation: EstimationOptions = field(default_factory=EstimationOptions)
    stability: StabilityConfig = field(default_factory=StabilityConfig)

    log_level: str = "INFO"

    def validate(self) -> "ExperimentConfig":
        """
        Raises:
            InvalidConfig: métodos fuera de 1..7, T < 100, sin semillas u
                opciones incoherentes
        """
        bad = [m for m in self.methods if m not in VALID_METHODS]
        if not self.methods or bad:
            raise InvalidConfig(f"Métodos inválidos {bad or self.methods}. Opciones: {list(VALID_METHODS)}")
        small = [T for T in self.T_grid if T < MIN_T]
        if not self.T_grid or small:
            raise InvalidConfig(f"Los valores de T deben ser >= {MIN_T}: {small or self.T_grid}")
        if not self.seeds:
            raise InvalidConfig("Se requiere al menos una semilla")
        if self.bw_iters < 1:
            raise InvalidConfig(f"bw_iters debe ser >= 1, recibido {self.bw_iters}")
        if self.workers < 1:
            raise InvalidConfig(f"workers debe ser >= 1, recibido {self.workers}")
        if self.estimation.objective not in ("weighted", "unweighted"):
            raise InvalidConfig(f"Objetivo '{self.estimation.objective}' no soportado")
        if any(eps < 0 for eps in self.stability.epsilons):
            raise InvalidConfig("Los epsilon del barrido de estabilidad deben ser >= 0")
        if self.mixture.restarts < 1 or self.mixture.max_iters < 1:
            raise InvalidConfig("El EM requiere restarts >= 1 y max_iters >= 1")
        return self

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def moments_cache_path(self) -> Path:
        return self.output_path / "moments"


def _section(cls, data: Any, name: str):
    """Construye un dataclass de sección rechazando claves desconocidas"""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise InvalidConfig(f"La sección '{name}' debe ser un mapeo")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise InvalidConfig(f"Claves desconocidas en '{name}': {unknown}")
    return cls(**data)


def _seed_list(value: Any) -> List[int]:
    # Un entero significa "las primeras k semillas"
    if isinstance(value, int):
        return list(range(value))
    if isinstance(value, list) and all(isinstance(s, int) for s in value):
        return list(value)
    raise InvalidConfig(f"'seeds' debe ser un entero o una lista de enteros, recibido {value!r}")


class ConfigLoader:
    """Cargador de configuraciones YAML/JSON para instancias de experimentos"""

    @staticmethod
    def load(config_path: str | Path) -> ExperimentConfig:
        """
        Carga configuración desde archivo YAML (o JSON, que YAML también lee)

        Args:
            config_path: Ruta al archivo experiment.yaml / .json

        Returns:
            ExperimentConfig validado
        """
        config_path = Path(config_path)

        if not config_path.exists():
            raise FileNotFoundError(f"Archivo de config no encontrado: {config_path}")

        with open(config_path, 'r', encoding='utf-8') as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise InvalidConfig(f"Config mal formada en {config_path}: {e}") from e

        if not data:
            raise InvalidConfig(f"Archivo de config vacío: {config_path}")
        if not isinstance(data, dict):
            raise InvalidConfig(f"La config debe ser un mapeo: {config_path}")

        # instances/toy4/config/experiment.yaml -> instances/toy4/
        instance_path = config_path.parent.parent if config_path.parent.name == "config" else config_path.parent
        return ConfigLoader.from_dict(data, instance_path)

    @staticmethod
    def from_dict(data: Dict[str, Any], instance_path: Path = Path(".")) -> ExperimentConfig:
        """Construye y valida la config; las rutas relativas se resuelven contra la instancia"""
        header = data.get('experiment', {}) or {}
        try:
            config = ExperimentConfig(
                name=header.get('name', 'Experimento'),
                description=header.get('description', ''),
                instance_path=Path(instance_path),
                log_level=data.get('log_level', 'INFO'),
            )

            model = str(data.get('model', 'toy4'))
            if model not in _builtin_names():
                model = str(config.instance_path / model)
            config.model = model

            if 'methods' in data:
                config.methods = [int(m) for m in data['methods']]
            if 'T_grid' in data:
                config.T_grid = [int(float(T)) for T in data['T_grid']]
            if 'seeds' in data:
                config.seeds = _seed_list(data['seeds'])
            for key in ('bw_iters', 'workers'):
                if key in data:
                    setattr(config, key, int(data[key]))
            for key in ('exact_moments', 'cache_moments'):
                if key in data:
                    setattr(config, key, bool(data[key]))
            config.output_dir = str(config.instance_path / data.get('output_dir', 'results'))

            config.mixture = _section(MixtureConfig, data.get('mixture'), 'mixture')
            config.estimation = _section(EstimationOptions, data.get('estimation'), 'estimation')
            config.stability = _section(StabilityConfig, data.get('stability'), 'stability')
        except (TypeError, ValueError) as e:
            if isinstance(e, InvalidConfig):
                raise
            raise InvalidConfig(f"Valor de config inválido: {e}") from e

        return config.validate()

    @staticmethod
    def load_from_instance(instance_path: str | Path) -> ExperimentConfig:
        """
        Carga config desde una carpeta de instancia
        Busca automáticamente config/experiment.yaml

        Args:
            instance_path: Ruta a instances/toy4/

        Returns:
            ExperimentConfig configurado
        """
        instance_path = Path(instance_path)
        config_file = instance_path / "config" / "experiment.yaml"

        if not config_file.exists():
            raise FileNotFoundError(
                f"No se encontró experiment.yaml en {config_file}\n"
                f"Asegúrate de tener la estructura: {instance_path}/config/experiment.yaml"
            )

        return ConfigLoader.load(config_file)


def _builtin_names():
    from ..core.model import BUILTIN_SPECS
    return set(BUILTIN_SPECS)
