"""Slow, transparent reference computations.

Nothing here imports the fast paths (``specfn``, ``spectral``,
``resolvent``, ``norms``).  Agreement between an oracle and a fast path
is only evidence if the two share no code.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConditionError

__all__ = [
    "ModeBVP",
    "solve_mode_bvp",
    "weak_bruteforce",
    "lorentz_bruteforce",
    "hilbert_pv_quadrature",
    "dft_direct",
    "periodic_derivative",
]


@dataclass(frozen=True)
class ModeBVP:
    """One Fourier mode of ``i xi y f - f'' = rhs``, ``f'(0) = neumann``, ``f(Ly) = 0``."""

    xi: float
    y: np.ndarray
    rhs: np.ndarray
    neumann: complex
    solution: np.ndarray
    interior_residual: float


def _mode_matrix(xi, y):
    """Banded form of the three-point discretization (rows 0 .. n-1)."""
    n = len(y)
    h = np.diff(y)
    lower = np.zeros(n, dtype=complex)
    diag = np.zeros(n, dtype=complex)
    upper = np.zeros(n, dtype=complex)
    hm, hp = h[:-1], h[1:]
    # -f'' at interior nodes
    lower[1:-1] = -2.0 / (hm * (hm + hp))
    diag[1:-1] = 2.0 / (hm * hp) + 1j * xi * y[1:-1]
    upper[1:-1] = -2.0 / (hp * (hm + hp))
    # wall row: mirror ghost node f_{-1} = f_1 - 2 h0 g
    diag[0] = 2.0 / h[0] ** 2
    upper[0] = -2.0 / h[0] ** 2
    # top row: Dirichlet
    diag[-1] = 1.0
    return lower, diag, upper


def solve_mode_bvp(xi: float, rhs, neumann: complex, y) -> ModeBVP:
    """Second-order finite-difference solve of one Fourier mode.

    Parameters
    ----------
    xi : float
        Frequency.
    rhs : array_like of complex
        Right-hand side on the nodes ``y``.
    neumann : complex
        Prescribed ``f'(0)``.
    y : array_like
        Strictly increasing nodes with ``y[0] = 0``.

    Returns
    -------
    ModeBVP

    Raises
    ------
    ConditionError
        If the banded LU factorization is singular or the solve does not
        reproduce the right-hand side.
    """
    y = np.asarray(y, dtype=float)
    rhs = np.asarray(rhs, dtype=complex)
    n = len(y)
    if xi != 0:
        decay = (2.0 / 3.0) * math.cos(math.pi / 4) * (abs(xi) ** (1.0 / 3.0) * y[-1]) ** 1.5
        if decay < math.log(1e10):
            warnings.warn(f"Ly={y[-1]:g} too small for xi={xi:g}: decay factor e^-{decay:.1f}", RuntimeWarning)
    lower, diag, upper = _mode_matrix(xi, y)
    b = rhs.copy()
    h0 = y[1] - y[0]
    b[0] = rhs[0] - 2.0 * neumann / h0
    b[-1] = 0.0
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    try:
        sol = linalg.solve_banded((1, 1), ab, b, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConditionError(f"mode solve failed at xi={xi}: {exc}", xi=xi) from exc
    applied = diag * sol
    applied[1:] += lower[1:] * sol[:-1]
    applied[:-1] += upper[:-1] * sol[1:]
    scale = max(np.max(np.abs(b)), np.max(np.abs(diag * sol)), 1e-300)
    residual = np.max(np.abs(applied - b)) / scale
    if not np.all(np.isfinite(sol)) or residual > 1e-8:
        raise ConditionError(f"ill-conditioned mode solve at xi={xi} (residual {residual:.2e})", xi=xi)
    return ModeBVP(float(xi), y, rhs, complex(neumann), sol, float(residual))


def _levels(values, measures):
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(measures, dtype=float).ravel()
    if v.shape != m.shape:
        raise ValueError("values and measures differ in length")
    if np.any(m <= 0):
        raise ValueError("measures must be positive")
    return v, m


def weak_bruteforce(values, measures, p: float) -> float:
    """``sup_t t * mu(|f| >= t)^{1/p}`` by scanning every level set.

    O(n^2): for each sample the measure of its super-level set is found by
    a full pass over the data.
    """
    v, m = _levels(values, measures)
    best = 0.0
    for t in v:
        if t <= 0:
            continue
        mass = 0.0
        for vj, mj in zip(v, m):
            if vj >= t:
                mass += mj
        best = max(best, t * mass ** (1.0 / p))
    return best


def lorentz_bruteforce(values, measures, p: float, q: float) -> float:
    """``L^{p,q}`` norm from the distribution function, by level-set scans.

    Uses ``||f||^q = p * int_0^inf t^{q-1} mu(t)^{q/p} dt`` with the step
    distribution function: between consecutive distinct levels
    ``u_{k+1} < t < u_k`` the measure ``mu`` is the mass of ``{|f| >= u_k}``.
    ``q = inf`` gives the weak norm.
    """
    if math.isinf(q):
        return weak_bruteforce(values, measures, p)
    v, m = _levels(values, measures)
    levels = sorted({float(t) for t in v if t > 0}, reverse=True)
    total = 0.0
    for k, u in enumerate(levels):
        below = levels[k + 1] if k + 1 < len(levels) else 0.0
        mass = 0.0
        for vj, mj in zip(v, m):
            if vj >= u:
                mass += mj
        total += mass ** (q / p) * (u ** q - below ** q) / q
    return (p * total) ** (1.0 / q)


def dft_direct(values, inverse: bool = False):
    """Unitary DFT along axis 0 by explicit O(N^2) matrix product."""
    values = np.asarray(values)
    n = values.shape[0]
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    mat = np.exp(sign * 2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)
    return mat @ values


def periodic_derivative(values, h: float, order: int = 1):
    """Eighth-order centred finite differences on a periodic grid."""
    f = np.asarray(values)
    if order == 1:
        c = [4 / 5, -1 / 5, 4 / 105, -1 / 280]
        out = sum(ck * (np.roll(f, -k - 1) - np.roll(f, k + 1)) for k, ck in enumerate(c))
        return out / h
    if order == 2:
        c0 = -205 / 72
        c = [8 / 5, -1 / 5, 8 / 315, -1 / 560]
        out = c0 * f + sum(ck * (np.roll(f, -k - 1) + np.roll(f, k + 1)) for k, ck in enumerate(c))
        return out / h ** 2
    raise ValueError("order must be 1 or 2")


def hilbert_pv_quadrature(values, Lx: float):
    """``(1/pi) p.v. int A'(x')/(x - x') dx'`` for periodic ``A`` on ``[-Lx, Lx)``.

    The periodic images of the kernel are summed in closed form,
    ``sum_n 1/(d - 2 Lx n) = (pi/(2 Lx)) cot(pi d/(2 Lx))`` with symmetric
    pairing.  The singular node is dropped from the trapezoid sum; for a
    smooth density ``f`` this punctured sum misses exactly ``-h f'(x_i)``,
    which is added back.

    Parameters
    ----------
    values : array_like
        Samples of A on the uniform periodic grid.
    Lx : float
        Half-period.

    Returns
    -------
    ndarray
        Samples of the pressure ``|d/dx| A``.
    """
    a = np.asarray(values, dtype=float)
    n = a.size
    h = 2.0 * Lx / n
    fprime = periodic_derivative(a, h, 1)
    fsecond = periodic_derivative(a, h, 2)
    offsets = np.arange(1, n)
    d = offsets * h
    kernel = (math.pi / (2.0 * Lx)) / np.tan(math.pi * d / (2.0 * Lx))
    out = np.empty(n)
    for i in range(n):
        others = fprime[(i - offsets) % n]
        out[i] = h * np.dot(others, kernel) - h * fsecond[i]
    return out / math.pi
