import math
import os
import numpy as np
from scipy.optimize import minimize_scalar

THREADS_ENV = "VPME_THREADS"


def fft_workers() -> int:
    """
    returns the number of workers handed to scipy.fft, capped by the VPME_THREADS environment variable.
    :return: worker count, at least 1. Default is 1 when the variable is unset or unparsable.
    """
    value = os.environ.get(THREADS_ENV, "")
    try:
        workers = int(value)
    except ValueError:
        return 1
    return max(1, min(workers, os.cpu_count() or 1))


def interior(values: np.ndarray) -> np.ndarray:
    """
    returns the view of a 3-D array without its outermost cell layer.
    :param values: array of shape (n, n, n).
    :return: array of shape (n-2, n-2, n-2).
    """
    return values[1:-1, 1:-1, 1:-1]


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """
    7-point Laplacian of a cell-centred array, evaluated on interior cells only.
    :param values: array of shape (n, n, n).
    :param h: grid spacing.
    :return: array of shape (n-2, n-2, n-2).
    """
    c = values[1:-1, 1:-1, 1:-1]
    lap = (values[2:, 1:-1, 1:-1] + values[:-2, 1:-1, 1:-1]
           + values[1:-1, 2:, 1:-1] + values[1:-1, :-2, 1:-1]
           + values[1:-1, 1:-1, 2:] + values[1:-1, 1:-1, :-2] - 6.0 * c)
    return lap / h ** 2


def graph_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """
    Laplacian on the full grid where neighbours outside the box are dropped (zero-flux faces). Its negative,
    times 2h^3, is the exact gradient of dirichlet_energy.
    :param values: array of shape (n, n, n).
    :param h: grid spacing.
    :return: array of shape (n, n, n).
    """
    lap = np.zeros_like(values)
    for axis in range(3):
        diff = np.diff(values, axis=axis)
        upper = [slice(None)] * 3
        lower = [slice(None)] * 3
        upper[axis] = slice(0, -1)
        lower[axis] = slice(1, None)
        lap[tuple(upper)] += diff
        lap[tuple(lower)] -= diff
    return lap / h ** 2


def dirichlet_energy(values: np.ndarray, h: float) -> float:
    """
    discrete ||grad u||_2^2 as the forward-difference sum over interior edges: sum_edges ((u_i - u_j)/h)^2 h^3.
    :param values: array of shape (n, n, n).
    :param h: grid spacing.
    :return: the energy, non-negative.
    """
    total = 0.0
    for axis in range(3):
        total += float(np.sum(np.diff(values, axis=axis) ** 2))
    return total * h


def smallest_feasible_constant(violation: callable, lo: float = 1e-3, hi: float = 1e3,
                               rel_tol: float = 1e-6) -> float:
    """
    Bisection (in log scale) for the smallest constant C in [lo, hi] with violation(C) <= 0, assuming the violation
    is non-increasing in C.
    :param violation: callable C -> float, non-positive when C is feasible.
    :param lo: lower end of the search interval.
    :param hi: upper end of the search interval.
    :param rel_tol: relative width at which the search stops.
    :return: the smallest feasible C found, lo if lo is already feasible, math.inf if hi is not feasible.
    """
    if violation(lo) <= 0:
        return lo
    if violation(hi) > 0:
        return math.inf
    a, b = math.log(lo), math.log(hi)
    while b - a > rel_tol:
        mid = 0.5 * (a + b)
        if violation(math.exp(mid)) <= 0:
            b = mid
        else:
            a = mid
    return math.exp(b)


def golden_section_constant(violation: callable, lo: float = 1e-3, hi: float = 1e3) -> float:
    """
    Bounded golden-section/parabolic search (in log scale) for the constant where a non-increasing violation
    crosses zero, followed by a bisection step upward when needed so that the returned constant is feasible.
    :param violation: callable C -> float, non-positive when C is feasible.
    :param lo: lower end of the search interval.
    :param hi: upper end of the search interval.
    :return: a feasible constant close to the smallest one, lo if lo is feasible, math.inf if hi is not.
    """
    if violation(lo) <= 0:
        return lo
    if violation(hi) > 0:
        return math.inf
    a, b = math.log(lo), math.log(hi)
    solution = minimize_scalar(lambda s: abs(violation(math.exp(s))), bounds=(a, b), method="bounded",
                               options={"xatol": 1e-9})
    c = math.exp(solution.x)
    if violation(c) > 0:
        # the crossing lies just above c
        return smallest_feasible_constant(violation, c, hi)
    return c
