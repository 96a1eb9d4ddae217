"""
División de secuencias de observaciones en chunks para estimación en streaming
Los estimadores empíricos nunca materializan la secuencia completa
"""
from collections import abc
from itertools import islice
from typing import Iterable, Iterator, List, Sequence, Union

import numpy as np

SequenceLike = Union[np.ndarray, Sequence, Iterable]


class SequenceChunker:
    """
    Divide una secuencia (array, lista o iterador) en bloques contiguos

    Un par (y_{t-1}, y_t) que cruza el borde entre dos chunks lo cuenta el
    chunk que contiene y_t; los acumuladores se encargan de arrastrar el último
    elemento.
    """

    def __init__(self, chunk_size: int = 65536, dtype=float):
        """
        Args:
            chunk_size: Número máximo de observaciones por chunk
            dtype: Tipo numpy de los chunks (int para discreto, float para continuo)
        """
        if chunk_size < 1:
            raise ValueError(f"chunk_size debe ser >= 1, recibido {chunk_size}")
        self.chunk_size = chunk_size
        self.dtype = dtype

    def iter_chunks(self, sequence: SequenceLike) -> Iterator[np.ndarray]:
        """
        Itera chunks de la secuencia

        Args:
            sequence: Array numpy (se recorre por vistas) o cualquier iterable

        Yields:
            Arrays 1-D de longitud <= chunk_size
        """
        if isinstance(sequence, np.ndarray):
            flat = sequence.reshape(-1)
            for start in range(0, flat.shape[0], self.chunk_size):
                yield np.asarray(flat[start:start + self.chunk_size], dtype=self.dtype)
            return

        iterator = iter(sequence)
        while True:
            block = list(islice(iterator, self.chunk_size))
            if not block:
                return
            yield np.asarray(block, dtype=self.dtype)

    def split(self, sequence: np.ndarray, n_parts: int) -> List[np.ndarray]:
        """
        Parte un array en n_parts bloques contiguos (para acumular en paralelo
        y luego fusionar)
        """
        flat = np.asarray(sequence).reshape(-1)
        n_parts = max(1, min(n_parts, flat.shape[0]))
        return [np.asarray(part, dtype=self.dtype) for part in np.array_split(flat, n_parts)]


def as_sequence_list(data) -> List[SequenceLike]:
    """
    Normaliza la entrada a una lista de secuencias independientes

    Una lista de arrays/listas se interpreta como varias secuencias; cualquier
    otra cosa (array 1-D, iterador) como una sola.
    """
    if isinstance(data, np.ndarray):
        return [data]
    if isinstance(data, (list, tuple)) and data and all(
        isinstance(s, (np.ndarray, list, tuple)) for s in data
    ):
        return list(data)
    return [data]


def materialize_once(data) -> List[SequenceLike]:
    """
    Lista de secuencias que se puede recorrer más de una vez

    Arrays, listas y tuplas se devuelven tal cual; los iteradores de un solo
    uso se consumen a un array float.
    """
    return [
        s if isinstance(s, (np.ndarray, abc.Sequence)) else np.fromiter(s, dtype=float)
        for s in as_sequence_list(data)
    ]
