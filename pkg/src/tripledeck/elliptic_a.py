"""The displacement symbol ``m(xi) = 1 - sigma(xi) i xi |xi|^{1/3}`` and the solve for A.

For ``xi > 0`` one has ``m(xi) = 1 + e^{i pi/6} xi^{4/3} / (3 |Ai'(0)|)``,
so ``Re m >= 1`` and ``|1/m(xi)| (1 + |xi|^{4/3})`` stays bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SmallnessViolated
from .resolvent import displacement_symbol, displacement_symbol_quadrature
from .spectral import Field, LineFunction, hermitian_fix, integral_full

__all__ = [
    "MSymbol",
    "MScan",
    "ASolve",
    "m_symbol",
    "m_values",
    "m_table",
    "scan_m",
    "solve_A",
    "a_regularity_norms",
]

INNER_RTOL = 1e-12
INNER_MAX_ITERS = 200


@dataclass(frozen=True)
class MSymbol:
    """``m`` and ``1/m`` at one frequency."""

    xi: float
    value: complex
    inv_value: complex


@dataclass(frozen=True)
class MScan:
    """Summary of a dense scan of ``m`` over frequencies."""

    n_points: int
    xi_max: float
    min_abs_m: float
    argmin_xi: float
    sup_weighted_inverse: float
    argsup_xi: float


@dataclass(frozen=True)
class ASolve:
    """Result of :func:`solve_A` with inner-iteration diagnostics."""

    A: LineFunction
    iterations: int
    ratios: tuple
    coupling_sup: float
    ratio_bound: float


def m_values(xi) -> np.ndarray:
    """Vectorized ``m(xi)``; ``m(0) = 1``."""
    return 1.0 - displacement_symbol(np.asarray(xi, dtype=float))


def m_symbol(xi: float) -> MSymbol:
    """``m`` and its reciprocal at a single frequency."""
    value = complex(m_values(np.array([xi]))[0])
    return MSymbol(float(xi), value, 1.0 / value)


def scan_m(n_points: int = 1_000_000, xi_max: float = 1e4, xi_min: float = 1e-6) -> MScan:
    """Scan ``m`` on log-spaced frequencies of both signs plus ``xi = 0``.

    Returns the minimum of ``|m|`` and the supremum of
    ``|1/m(xi)| (1 + |xi|^{4/3})`` over the scan.
    """
    half = max(n_points // 2, 1)
    pos = np.geomspace(xi_min, xi_max, half)
    xi = np.concatenate([-pos[::-1], [0.0], pos])
    m = m_values(xi)
    mod = np.abs(m)
    weighted = (1.0 + np.abs(xi) ** (4.0 / 3.0)) / mod
    i_min = int(np.argmin(mod))
    i_sup = int(np.argmax(weighted))
    return MScan(xi.size, xi_max, float(mod[i_min]), float(xi[i_min]), float(weighted[i_sup]), float(xi[i_sup]))


def m_table(grid, symbol: str = "exact") -> np.ndarray:
    """``m`` on the grid frequencies.

    ``symbol="exact"`` uses the closed form; ``"quadrature"`` replaces
    ``sigma i xi |xi|^{1/3}`` by the trapezoid integral of the sampled
    Airy profiles (see :func:`resolvent.displacement_symbol_quadrature`).
    """
    if symbol == "exact":
        return hermitian_fix(grid, m_values(grid.xi))
    if symbol == "quadrature":
        return hermitian_fix(grid, 1.0 - displacement_symbol_quadrature(grid))
    raise ValueError("symbol must be 'exact' or 'quadrature'")


def _apply_line(values, symbol):
    out = np.fft.ifft(np.fft.fft(values, norm="ortho") * symbol, norm="ortho")
    return out.real if np.isrealobj(values) else out


def solve_A(w_in: Field, w: Field, dchi, return_details: bool = False, symbol: str = "exact"):
    """Solve ``-I_inf[w_b] + (1 + I_inf[w d_y chi_R]) A = I_inf[w_in]`` for A.

    Writing ``b = I_inf[w d_y chi_R]`` the equation reads
    ``m(D) A = I_inf[w_in] - b A`` and is solved by the fixed-point
    iteration ``A <- m(D)^{-1} (I_inf[w_in] - b A)``.

    Parameters
    ----------
    w_in, w : Field
        Physical fields.
    dchi : array_like or object with ``dchi`` attribute
        ``d_y chi_R`` on the y nodes.
    return_details : bool, optional
        Return an :class:`ASolve` with iteration diagnostics instead of
        the bare line function.
    symbol : {"exact", "quadrature"}, optional
        Which version of ``m`` to invert (see :func:`m_table`).

    Returns
    -------
    LineFunction or ASolve

    Raises
    ------
    SmallnessViolated
        If ``sup |b| >= 1`` or an inner update fails to contract.
    """
    grid = w_in.grid
    dchi = np.asarray(getattr(dchi, "dchi", dchi), dtype=float)
    inv_m = 1.0 / m_table(grid, symbol)
    source = integral_full(w_in.physical(), grid)
    coupling = integral_full(w.physical() * dchi[None, :], grid)
    if np.isrealobj(source) and np.iscomplexobj(coupling):
        coupling = coupling.real
    b_sup = float(np.max(np.abs(coupling)))
    if b_sup >= 1.0:
        raise SmallnessViolated(f"sup |I_inf[w d_y chi_R]| = {b_sup:.3e} >= 1")
    bound = b_sup * float(np.max(np.abs(inv_m)))
    A = _apply_line(source, inv_m)
    ratios = []
    iters = 1
    if b_sup > 0:
        prev_update = None
        for iters in range(2, INNER_MAX_ITERS + 1):
            A_new = _apply_line(source - coupling * A, inv_m)
            update = float(np.max(np.abs(A_new - A)))
            A = A_new
            size = float(np.max(np.abs(A)))
            if prev_update is not None and prev_update > 0:
                ratio = update / prev_update
                ratios.append(ratio)
                if ratio >= 1.0 and update > INNER_RTOL * size:
                    raise SmallnessViolated(f"inner iteration not contracting (ratio {ratio:.3f})")
            prev_update = update
            if update <= INNER_RTOL * size or size == 0.0:
                break
        else:
            raise SmallnessViolated("inner iteration for A did not converge in 200 steps")
    line = LineFunction(grid, A)
    if return_details:
        return ASolve(line, iters, tuple(ratios), b_sup, bound)
    return line


def a_regularity_norms(A: LineFunction) -> dict:
    """Sobolev and Lebesgue norms of A used by the smallness estimates.

    Returns
    -------
    dict
        ``abs_dx_5_6_A_H4_3``: ``|| |d_x|^{5/6} A ||_{H^{4/3}}``,
        ``abs_dx_5_6_A_L2``: ``|| |d_x|^{5/6} A ||_{L^2}``,
        ``dxA_L3``: ``|| d_x A ||_{L^3}`` (physical quadrature),
        ``dxA_H7_6``: ``|| d_x A ||_{H^{7/6}}``.
    """
    grid = A.grid
    xi = grid.xi
    ahat = A.spectrum
    hx = grid.hx
    bessel = lambda s: (1.0 + xi ** 2) ** (s / 2.0)  # noqa: E731

    def l2(spec):
        return float(np.sqrt(hx * np.sum(np.abs(spec) ** 2)))

    dxa = np.fft.ifft(1j * hermitian_fix(grid, xi) * ahat, norm="ortho")
    dxa = dxa.real if np.isrealobj(A.physical()) else dxa
    return {
        "abs_dx_5_6_A_H4_3": l2(bessel(4.0 / 3.0) * np.abs(xi) ** (5.0 / 6.0) * ahat),
        "abs_dx_5_6_A_L2": l2(np.abs(xi) ** (5.0 / 6.0) * ahat),
        "dxA_L3": float((hx * np.sum(np.abs(dxa) ** 3)) ** (1.0 / 3.0)),
        "dxA_H7_6": l2(bessel(7.0 / 6.0) * xi * ahat),
    }
