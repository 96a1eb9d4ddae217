"""
hmmqp: aprendizaje de HMM con salidas paramétricas por desacoplamiento
(mezcla de salidas + programas cuadráticos sobre momentos de pares)
"""
__version__ = "0.1.0"
