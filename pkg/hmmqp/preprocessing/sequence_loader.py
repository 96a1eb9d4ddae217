"""
Carga y guarda archivos de modelo (JSON) y de secuencias de observaciones
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from ..exceptions import InvalidModel
from ..core.model import BUILTIN_SPECS, HMMSpec, OutputModel, outputs_from_dict

SEQUENCE_HEADER = "# hmm-seq v1"
SEQUENCE_KINDS = ("discrete", "continuous")


def _is_int_token(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True


class SequenceLoader:
    """
    Lector/escritor de archivos del proyecto

    Modelo: JSON {"n", "A", "outputs": {"type": "gaussian"|"discrete", ...}, "initial"?}
    Secuencia: encabezado "# hmm-seq v1 <discrete|continuous>", un valor por
    línea; una línea en blanco separa secuencias independientes.
    """

    MODEL_EXTENSIONS = {'.json'}

    @staticmethod
    def _read_json(file_path: Path) -> Dict[str, Any]:
        if not file_path.exists():
            raise FileNotFoundError(f"Archivo no encontrado: {file_path}")
        if file_path.suffix.lower() not in SequenceLoader.MODEL_EXTENSIONS:
            raise InvalidModel(
                f"Formato no soportado: {file_path.suffix}. "
                f"Soportados: {SequenceLoader.MODEL_EXTENSIONS}"
            )
        with open(file_path, 'r', encoding='utf-8') as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise InvalidModel(f"JSON mal formado en {file_path}: {e}") from e
        if not isinstance(data, dict):
            raise InvalidModel(f"El archivo {file_path} debe contener un objeto JSON")
        return data

    @classmethod
    def load_model(cls, source: Union[str, Path]) -> HMMSpec:
        """
        Carga un HMMSpec desde archivo o por nombre builtin ("toy4")

        Raises:
            FileNotFoundError, InvalidModel
        """
        if str(source) in BUILTIN_SPECS:
            return BUILTIN_SPECS[str(source)]()
        return HMMSpec.from_dict(cls._read_json(Path(source)))

    @classmethod
    def load_outputs(cls, file_path: Union[str, Path]) -> OutputModel:
        """
        Carga solo los parámetros de salida

        Acepta un archivo de modelo completo (clave "outputs") o el esquema de
        salidas directamente (p.ej. lo que escribe fit-mixture).
        """
        data = cls._read_json(Path(file_path))
        if "outputs" in data:
            data = data["outputs"]
        return outputs_from_dict(data)

    @staticmethod
    def save_json(data: Dict[str, Any], file_path: Union[str, Path]) -> Path:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2)
        return file_path

    @classmethod
    def save_model(cls, spec: HMMSpec, file_path: Union[str, Path]) -> Path:
        return cls.save_json(spec.to_dict(), file_path)

    @staticmethod
    def load_sequence(file_path: Union[str, Path]) -> Tuple[str, List[np.ndarray]]:
        """
        Lee un archivo de secuencias

        Returns:
            Tupla (kind, secuencias); kind es 'discrete' o 'continuous'
        """
        file_path = Path(file_path)
        if not file_path.exists():
            raise FileNotFoundError(f"Archivo no encontrado: {file_path}")

        with open(file_path, 'r', encoding='utf-8') as f:
            text = f.read()

        first_line, _, rest = text.lstrip("\n").partition("\n")
        if first_line.startswith("#"):
            header = first_line.strip()
            parts = header.split()
            if not header.startswith(SEQUENCE_HEADER) or len(parts) != 4 or parts[3] not in SEQUENCE_KINDS:
                raise InvalidModel(
                    f"Encabezado inválido en {file_path}: se esperaba "
                    f"'{SEQUENCE_HEADER} <{'|'.join(SEQUENCE_KINDS)}>'"
                )
            kind, body = parts[3], rest
        else:
            # Sin encabezado: enteros -> discreto, cualquier otro número -> continuo
            body = text
            kind = 'discrete' if all(_is_int_token(v) for v in body.split()) else 'continuous'

        sequences = []
        for block in body.split("\n\n"):
            values = block.split()
            if not values:
                continue
            try:
                if kind == 'discrete':
                    sequences.append(np.array([int(v) for v in values], dtype=np.int64))
                else:
                    sequences.append(np.array(values, dtype=float))
            except ValueError as e:
                raise InvalidModel(f"Valor no numérico en {file_path}: {e}") from e

        if not sequences:
            raise InvalidModel(f"Archivo de secuencia vacío: {file_path}")
        return kind, sequences

    @staticmethod
    def save_sequence(
        sequences: Union[np.ndarray, List[np.ndarray]],
        file_path: Union[str, Path],
        kind: str,
    ) -> Path:
        """Escribe una o varias secuencias con el encabezado del formato"""
        if kind not in SEQUENCE_KINDS:
            raise ValueError(f"kind debe ser uno de {SEQUENCE_KINDS}")
        if isinstance(sequences, np.ndarray):
            sequences = [sequences]
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        fmt = "%d" if kind == 'discrete' else "%.17g"
        with open(file_path, 'w', encoding='utf-8') as f:
            f.write(f"{SEQUENCE_HEADER} {kind}\n")
            for index, seq in enumerate(sequences):
                if index:
                    f.write("\n")
                np.savetxt(f, np.asarray(seq).reshape(-1), fmt=fmt)
        return file_path
