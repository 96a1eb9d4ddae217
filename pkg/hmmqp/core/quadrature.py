"""
Cuadratura adaptativa de Simpson para integrandos vectoriales
Refina por niveles: todos los subintervalos pendientes se evalúan en un solo
llamado al integrando
"""
from typing import Callable, Iterable

import numpy as np

from ..exceptions import QuadratureNotConverged

QUAD_TOL = 1e-9
MAX_DEPTH = 40


def _simpson(width: np.ndarray, fa: np.ndarray, fm: np.ndarray, fb: np.ndarray) -> np.ndarray:
    w = width.reshape((-1,) + (1,) * (fa.ndim - 1))
    return w / 6.0 * (fa + 4.0 * fm + fb)


def integrate(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = QUAD_TOL,
    max_depth: int = MAX_DEPTH,
    breakpoints: Iterable[float] = (),
    initial_panels: int = 64,
) -> np.ndarray:
    """
    Integra func sobre [a, b] con Simpson adaptativo y extrapolación de Richardson

    Args:
        func: recibe un vector x de forma (N,) y devuelve (N, ...) valores
        a, b: límites de integración
        rel_tol: tolerancia relativa al mayor valor absoluto de la integral
        max_depth: profundidad máxima de bisección
        breakpoints: puntos que se fuerzan como bordes de panel (ej. medias)
        initial_panels: paneles uniformes iniciales

    Returns:
        Integral con la forma de func(x)[0]

    Raises:
        QuadratureNotConverged: si algún panel supera max_depth
    """
    if b <= a:
        raise ValueError(f"Intervalo inválido [{a}, {b}]")

    edges = np.linspace(a, b, initial_panels + 1)
    extra = [p for p in breakpoints if a < p < b]
    edges = np.unique(np.concatenate([edges, np.asarray(extra, dtype=float)]))
    left, right = edges[:-1], edges[1:]
    mid = 0.5 * (left + right)

    f_edges = func(edges)
    fa, fb = f_edges[:-1], f_edges[1:]
    fm = func(mid)
    whole = _simpson(right - left, fa, fm, fb)

    estimate = np.abs(whole.sum(axis=0)).max()
    abs_tol = rel_tol * max(float(estimate), np.finfo(float).tiny)
    total_width = b - a

    result = np.zeros(whole.shape[1:])
    for depth in range(max_depth + 1):
        lm = 0.5 * (left + mid)
        rm = 0.5 * (mid + right)
        f_mid = func(np.concatenate([lm, rm]))
        n_int = left.shape[0]
        f_lm, f_rm = f_mid[:n_int], f_mid[n_int:]

        half = mid - left
        s_left = _simpson(half, fa, f_lm, fm)
        s_right = _simpson(right - mid, fm, f_rm, fb)
        refined = s_left + s_right
        diff = refined - whole
        err = np.abs(diff).reshape(n_int, -1).max(axis=1)
        allowed = 15.0 * abs_tol * (right - left) / total_width

        done = err <= allowed
        if np.any(done):
            result += (refined[done] + diff[done] / 15.0).sum(axis=0)
        if np.all(done):
            return result
        if depth == max_depth:
            break

        keep = ~done
        # Cada panel rechazado se parte en sus dos mitades
        left = np.concatenate([left[keep], mid[keep]])
        right = np.concatenate([mid[keep], right[keep]])
        new_fa = np.concatenate([fa[keep], fm[keep]])
        new_fb = np.concatenate([fm[keep], fb[keep]])
        fm = np.concatenate([f_lm[keep], f_rm[keep]])
        whole = np.concatenate([s_left[keep], s_right[keep]])
        fa, fb = new_fa, new_fb
        mid = 0.5 * (left + right)

    raise QuadratureNotConverged(
        f"Simpson adaptativo no convergió en profundidad {max_depth} "
        f"({left.shape[0]} paneles pendientes)"
    )


def gaussian_support(mu: np.ndarray, sigma2: np.ndarray, width: float = 12.0):
    """Intervalo [min(mu - 12 sigma), max(mu + 12 sigma)]"""
    sigma = np.sqrt(sigma2)
    return float(np.min(mu - width * sigma)), float(np.max(mu + width * sigma))
