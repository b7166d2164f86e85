"""Airy-function solution of the kinetic Neumann problem.

For each frequency ``xi != 0`` the problem ``i xi y f - f'' = 0``,
``f'(0) = g``, ``f -> 0`` is solved by

    f(y) = Ai(e^{+-i pi/6} |xi|^{1/3} y) / (Ai'(0) e^{+-i pi/6} |xi|^{1/3}) * g

with the upper sign for ``xi > 0``.  The cube root is taken of ``|xi|``
and the phase is carried separately.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import oracle
from .errors import ConditionError, PreconditionError
from .specfn import AIP0, ai_values
from .spectral import Field, GridSpec, LineFunction, hermitian_fix

__all__ = [
    "ResolventSolve",
    "kernel_table",
    "mode_profile",
    "solve_homogeneous_neumann",
    "sigma",
    "displacement_symbol",
    "displacement_of_wb",
    "displacement_symbol_quadrature",
    "solve_inhomogeneous",
]

MEAN_TOL = 1e-12


@dataclass(frozen=True)
class ResolventSolve:
    """Output of :func:`solve_homogeneous_neumann`.

    Attributes
    ----------
    w_b : Field
        Physical solution.
    neumann_data : LineFunction
        The boundary data ``g`` (Nyquist row removed).
    per_mode_tail_error : ndarray
        ``|f(Ly)| / |f(0)|`` for each frequency; zero for the ``xi = 0`` row.
    """

    w_b: Field
    neumann_data: LineFunction
    per_mode_tail_error: np.ndarray


def mode_profile(xi: float, y) -> tuple[np.ndarray, np.ndarray]:
    """Airy solution for unit Neumann data at one frequency.

    Parameters
    ----------
    xi : float
        Nonzero frequency.
    y : array_like
        Heights.

    Returns
    -------
    value, slope : ndarray
        ``f(y)`` and ``f'(y)`` with ``f'(0) = 1``.
    """
    if xi == 0:
        raise ValueError("the Neumann resolvent is undefined at xi = 0")
    y = np.asarray(y, dtype=float)
    root = abs(xi) ** (1.0 / 3.0)
    phase = cmath.exp(1j * math.pi / 6)
    ai, aip = ai_values(phase * root * y)
    value = ai / (AIP0 * phase * root)
    slope = aip / AIP0
    if xi < 0:
        value, slope = np.conj(value), np.conj(slope)
    return value, slope


@lru_cache(maxsize=8)
def kernel_table(grid: GridSpec):
    """Airy profiles for unit Neumann data at every grid frequency.

    Returns
    -------
    value, slope : ndarray, shape (Nx, Ny)
        ``f(xi_k, y_j)`` and ``f'(xi_k, y_j)`` for ``g = 1``.  The
        ``xi = 0`` row is zero.  Arrays are read-only.
    """
    xi = grid.xi
    mags = np.abs(xi)
    uniq = np.unique(mags[mags > 0])
    phase = cmath.exp(1j * math.pi / 6)
    root = (uniq ** (1.0 / 3.0))[:, None]
    ai, aip = ai_values(phase * root * grid.y[None, :])
    val_pos = ai / (AIP0 * phase * root)
    slope_pos = aip / AIP0
    value = np.zeros(grid.shape, dtype=complex)
    slope = np.zeros(grid.shape, dtype=complex)
    row = np.searchsorted(uniq, mags)
    pos, neg = xi > 0, xi < 0
    value[pos], slope[pos] = val_pos[row[pos]], slope_pos[row[pos]]
    value[neg], slope[neg] = np.conj(val_pos[row[neg]]), np.conj(slope_pos[row[neg]])
    value.setflags(write=False)
    slope.setflags(write=False)
    return value, slope


def solve_homogeneous_neumann(g: LineFunction) -> ResolventSolve:
    """Solve ``y d_x w - d_y^2 w = 0``, ``d_y w(x, 0) = g``, ``w -> 0``.

    Parameters
    ----------
    g : LineFunction
        Mean-zero Neumann data.

    Returns
    -------
    ResolventSolve

    Raises
    ------
    PreconditionError
        If ``g`` has a nonzero mean.
    """
    grid = g.grid
    ghat = np.array(g.spectrum, dtype=complex)
    scale = max(np.max(np.abs(ghat)), 1.0)
    if abs(ghat[0]) > MEAN_TOL * scale * math.sqrt(grid.Nx):
        raise PreconditionError(f"Neumann data has nonzero mean (|g_hat(0)| = {abs(ghat[0]):.3e})")
    ghat[0] = 0.0
    ghat[grid.nyquist] = 0.0
    value, _ = kernel_table(grid)
    spec = value * ghat[:, None]
    w = np.fft.ifft(spec, axis=0, norm="ortho")
    if np.isrealobj(g.physical()):
        w = w.real
    with np.errstate(invalid="ignore", divide="ignore"):
        tail = np.where(np.abs(value[:, 0]) > 0, np.abs(value[:, -1]) / np.abs(value[:, 0]), 0.0)
    neumann = LineFunction.from_spectrum(grid, ghat, real=np.isrealobj(g.physical()))
    return ResolventSolve(Field(grid, w), neumann, tail)


def sigma(xi: float) -> complex:
    """Displacement multiplier ``1/(3 Ai'(0) e^{+-i pi/3})``, sign of ``xi``."""
    if xi == 0:
        raise ValueError("sigma is undefined at xi = 0")
    sign = 1.0 if xi > 0 else -1.0
    return 1.0 / (3.0 * AIP0 * cmath.exp(sign * 1j * math.pi / 3))


def displacement_symbol(xi: np.ndarray) -> np.ndarray:
    """``sigma(xi) i xi |xi|^{1/3}``, zero at ``xi = 0``."""
    xi = np.asarray(xi, dtype=float)
    sig = np.where(xi > 0, 1.0, np.where(xi < 0, -1.0, 0.0))
    s = 1.0 / (3.0 * AIP0 * np.exp(sig * 1j * math.pi / 3))
    return np.where(xi == 0, 0.0, s * 1j * xi * np.abs(xi) ** (1.0 / 3.0))


@lru_cache(maxsize=8)
def displacement_symbol_quadrature(grid: GridSpec) -> np.ndarray:
    """Trapezoid ``I_inf`` of the sampled Airy profiles times ``i xi |xi|``.

    This is the symbol of ``A -> integrate_y(w_b(A))`` on the grid.  It
    differs from :func:`displacement_symbol` only by quadrature and
    truncation error, and makes the displacement relation hold exactly
    for discretely integrated fields.  The Nyquist row is zero, matching
    :func:`solve_homogeneous_neumann`.
    """
    value, _ = kernel_table(grid)
    xi = grid.xi
    out = (value @ grid.wy) * 1j * xi * np.abs(xi)
    out[grid.nyquist] = 0.0
    out.setflags(write=False)
    return out


def displacement_of_wb(A: LineFunction) -> LineFunction:
    """``I_inf[w_b]`` for the resolvent of ``g = d_x |d_x| A``, as a multiplier."""
    grid = A.grid
    symbol = hermitian_fix(grid, displacement_symbol(grid.xi))
    out = np.fft.ifft(A.spectrum * symbol, norm="ortho")
    if np.isrealobj(A.physical()):
        out = out.real
    return LineFunction(grid, out)


def solve_inhomogeneous(F: Field, g: LineFunction | None = None) -> Field:
    """Solve ``y d_x w - d_y^2 w = F``, ``d_y w(x, 0) = g``, ``w(x, Ly) = 0``.

    Each Fourier mode is handed to :func:`oracle.solve_mode_bvp`; the
    ``xi = 0`` mode is the two-point problem ``-w'' = F_hat(0, .)``.

    Parameters
    ----------
    F : Field
        Forcing.
    g : LineFunction, optional
        Neumann data; zero when omitted.

    Returns
    -------
    Field
    """
    grid = F.grid
    Fhat = F.spectrum()
    ghat = np.zeros(grid.Nx, dtype=complex) if g is None else np.asarray(g.spectrum, dtype=complex)
    out = np.zeros(grid.shape, dtype=complex)
    with warnings.catch_warnings():
        # the truncation warning is expected for the lowest modes of coarse grids
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(grid.Nx):
            if k == grid.nyquist:
                continue
            if not np.any(Fhat[k]) and ghat[k] == 0:
                continue
            try:
                sol = oracle.solve_mode_bvp(grid.xi[k], Fhat[k], ghat[k], grid.y)
            except ConditionError as exc:
                raise ConditionError(f"mode {k}: {exc}", xi=grid.xi[k]) from exc
            out[k] = sol.solution
    w = np.fft.ifft(out, axis=0, norm="ortho")
    real_input = np.isrealobj(F.physical()) and (g is None or np.isrealobj(g.physical()))
    return Field(grid, w.real if real_input else w)
