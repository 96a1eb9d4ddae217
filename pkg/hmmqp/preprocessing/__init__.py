"""
Entrada de datos: lectura de modelos y secuencias, partición en bloques
"""
from .chunker import SequenceChunker, as_sequence_list
from .sequence_loader import SequenceLoader

__all__ = [
    'SequenceChunker',
    'as_sequence_list',
    'SequenceLoader'
]
