"""Cutoff, the change of variables ``Phi``, velocities and the reduced-system coefficients.

With ``chi = chi_R``, ``a = A chi'`` and ``Phi(x, y) = y - chi(y) A(x)``,
the transformed unknown ``w(x, y) = omega(x, Phi(x, y))`` satisfies

    y w_x - w_yy = -theta1 w_x - (theta21 + theta22 + theta23) w_y + theta3 w_yy

with

    theta1  = u(Phi) - A chi
    theta21 = J(Phi) / (1 - a),        J(eta) = int_0^eta int_z^inf (omega_x - A_x omega_y)
    theta22 = -(1 - chi) (Phi + u(Phi)) A_x / (1 - a)
    theta23 = -A chi'' / (1 - a)^3
    theta3  = (1 - a)^{-2} - 1

This follows from the chain rule ``w_y = (1 - a) omega_y(Phi)``,
``w_x = omega_x(Phi) - chi A_x omega_y(Phi)`` and
``w_yy = (1 - a)^2 omega_yy(Phi) - A chi'' omega_y(Phi)``.  The residual of
the reduced system at ``(x, y)`` equals the residual of the original
vorticity equation at ``(x, Phi(x, y))``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import InconsistentState, InvariantError
from .spectral import (
    Field,
    GridSpec,
    LineFunction,
    cumulative_from_zero,
    cumulative_to_top,
    dealias,
    dx,
    dy_array,
    dyy_array,
    integral_full,
)

__all__ = [
    "CHI_W1INF",
    "CutoffProfile",
    "ThetaSet",
    "step",
    "build_cutoff",
    "phi",
    "phi_inverse",
    "to_w",
    "to_omega",
    "velocity",
    "velocity_direct",
    "theta_coefficients",
    "rhs_assemble",
    "residual_ptd3",
    "consistency_error",
]

# sup|S'| + sup|S''| for the smooth step S below: 2 (at s = 1/2) plus
# 9.841042301831145 (at s ~ 0.21826).
CHI_W1INF = 11.841042301831145

CONSISTENCY_TOL = 1e-8


def step(s):
    """Smooth monotone step and its first two derivatives.

    ``S(s) = e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)})`` on ``(0, 1)``, 0 below
    and 1 above, evaluated as ``1/(1 + exp(1/s - 1/(1-s)))``.

    Returns
    -------
    S, dS, d2S : ndarray
    """
    s = np.asarray(s, dtype=float)
    S = np.where(s >= 1.0, 1.0, 0.0)
    dS = np.zeros_like(s)
    d2S = np.zeros_like(s)
    inner = (s > 0.0) & (s < 1.0)
    if np.any(inner):
        t = s[inner]
        q = 1.0 / t - 1.0 / (1.0 - t)
        q1 = -1.0 / t ** 2 - 1.0 / (1.0 - t) ** 2
        q2 = 2.0 / t ** 3 - 2.0 / (1.0 - t) ** 3
        with np.errstate(over="ignore"):
            val = 1.0 / (1.0 + np.exp(q))
        one = val * (1.0 - val)
        d1 = -one * q1
        d2 = -(d1 * (1.0 - val) - val * d1) * q1 - one * q2
        S[inner] = val
        dS[inner] = d1
        d2S[inner] = d2
    return S, dS, d2S


@dataclass(frozen=True)
class CutoffProfile:
    """``chi_R(y) = chi(y / scale)`` with ``scale = R K (1 + ||A||_inf)``.

    ``chi(t) = S(t - 1)`` vanishes for ``t <= 1`` and equals 1 for
    ``t >= 2``; ``K`` is :data:`CHI_W1INF`.
    """

    grid: GridSpec
    R: float
    a_sup: float
    scale: float
    chi: np.ndarray
    dchi: np.ndarray
    d2chi: np.ndarray

    def at(self, y):
        """``chi_R`` and its derivatives at arbitrary heights."""
        S, dS, d2S = step(np.asarray(y, dtype=float) / self.scale - 1.0)
        return S, dS / self.scale, d2S / self.scale ** 2

    @property
    def active(self) -> bool:
        """True when the transition band intersects the grid."""
        return bool(self.scale < self.grid.Ly)


def build_cutoff(A: LineFunction, R: float = 8.0) -> CutoffProfile:
    """Sample the cutoff for the displacement ``A``.

    Parameters
    ----------
    A : LineFunction
    R : float
        Cutoff parameter, at least 2.
    """
    if R < 2:
        raise ValueError("R must be >= 2")
    a_sup = float(np.max(np.abs(A.physical())))
    scale = R * CHI_W1INF * (1.0 + a_sup)
    S, dS, d2S = step(A.grid.y / scale - 1.0)
    return CutoffProfile(A.grid, float(R), a_sup, scale, S, dS / scale, d2S / scale ** 2)


def _real_line(A):
    vals = A.physical()
    return vals.real if np.iscomplexobj(vals) else vals


def _jacobian(A, cutoff):
    """``1 - A chi'`` on the grid; checked against ``[1/2, 3/2]``."""
    jac = 1.0 - _real_line(A)[:, None] * cutoff.dchi[None, :]
    if np.any(jac < 0.5) or np.any(jac > 1.5):
        raise InvariantError("1 - A d_y chi_R left [1/2, 3/2]")
    return jac


def phi(A: LineFunction, cutoff: CutoffProfile, y=None) -> np.ndarray:
    """``Phi(x_i, y) = y - chi_R(y) A(x_i)``.

    Parameters
    ----------
    y : array_like, optional
        Heights, either shape ``(M,)`` (shared) or ``(Nx, M)``.  Defaults
        to the grid nodes.

    Returns
    -------
    ndarray, shape (Nx, M)
    """
    a = _real_line(A)
    if y is None:
        return cutoff.grid.y[None, :] - cutoff.chi[None, :] * a[:, None]
    y = np.asarray(y, dtype=float)
    yy = np.broadcast_to(y if y.ndim == 2 else y[None, :], (a.size, y.shape[-1]))
    chi, _, _ = cutoff.at(yy)
    return yy - chi * a[:, None]


def phi_inverse(A: LineFunction, cutoff: CutoffProfile, eta=None, tol: float = 1e-12) -> np.ndarray:
    """Solve ``Phi(x_i, y) = eta`` for y by bisection and Newton polishing.

    Since ``chi_R`` takes values in [0, 1], the root lies between ``eta``
    and ``eta + A(x_i)``; ``d_y Phi`` in ``[1/2, 3/2]`` makes it unique.

    Returns
    -------
    ndarray, shape (Nx, M)
    """
    a = _real_line(A)[:, None]
    if eta is None:
        eta = cutoff.grid.y
    eta = np.asarray(eta, dtype=float)
    eta = np.broadcast_to(eta if eta.ndim == 2 else eta[None, :], (a.shape[0], eta.shape[-1])).copy()
    lo = eta + np.minimum(a, 0.0)
    hi = eta + np.maximum(a, 0.0)
    # identity wherever the whole bracket lies below the band
    trivial = hi <= cutoff.scale
    out = eta.copy()
    if np.all(trivial):
        return out
    aa = np.broadcast_to(a, eta.shape)
    lo, hi, e, av = lo[~trivial], hi[~trivial], eta[~trivial], aa[~trivial]

    def g(y):
        chi, dchi, _ = cutoff.at(y)
        return y - chi * av - e, 1.0 - dchi * av

    glo, _ = g(lo)
    ghi, _ = g(hi)
    if np.any(glo > 1e-14 * (1 + np.abs(e))) or np.any(ghi < -1e-14 * (1 + np.abs(e))):
        raise InvariantError("Phi is not monotone on the bracket")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        gm, _ = g(mid)
        left = gm < 0
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        if np.max(hi - lo) < 1e-6:
            break
    y = 0.5 * (lo + hi)
    for _ in range(8):
        gv, dg = g(y)
        if np.any(dg < 0.5 - 1e-12):
            raise InvariantError("d_y Phi left [1/2, 3/2]")
        y = y - gv / dg
        if np.max(np.abs(gv)) <= tol * max(1.0, float(np.max(np.abs(e)))):
            break
    out[~trivial] = y
    return out


def _compose(values: np.ndarray, grid: GridSpec, targets: np.ndarray, meta: dict) -> np.ndarray:
    """Evaluate each x-row of ``values`` at heights ``targets`` (monotone cubic)."""
    out = np.array(values, dtype=float if np.isrealobj(values) else complex, copy=True)
    y = grid.y
    moved = np.abs(targets - y[None, :]) > 0
    if not np.any(moved):
        return out
    if np.any(targets > grid.Ly):
        over = float(np.max(targets) - grid.Ly)
        note = f"composition beyond Ly by {over:.3e}; clamped to the top value"
        meta["warning"] = note
        warnings.warn(note, RuntimeWarning, stacklevel=3)
    clamped = np.clip(targets, 0.0, grid.Ly)
    for i in np.nonzero(np.any(moved, axis=1))[0]:
        cols = moved[i]
        row = values[i]
        if np.iscomplexobj(row):
            out[i, cols] = PchipInterpolator(y, row.real)(clamped[i, cols]) + 1j * PchipInterpolator(
                y, row.imag
            )(clamped[i, cols])
        else:
            out[i, cols] = PchipInterpolator(y, row)(clamped[i, cols])
    return out


def to_w(omega: Field, A: LineFunction, cutoff: CutoffProfile) -> Field:
    """``w(x, y) = omega(x, Phi(x, y))``."""
    meta = {}
    vals = _compose(omega.physical(), omega.grid, phi(A, cutoff), meta)
    return Field(omega.grid, vals, meta=meta)


def to_omega(w: Field, A: LineFunction, cutoff: CutoffProfile) -> Field:
    """``omega(x, eta) = w(x, Phi^{-1}(x, eta))``."""
    meta = {}
    vals = _compose(w.physical(), w.grid, phi_inverse(A, cutoff), meta)
    return Field(w.grid, vals, meta=meta)


def consistency_error(omega: Field, A: LineFunction) -> float:
    """``max_x |I_inf[omega] - A|``."""
    return float(np.max(np.abs(integral_full(omega.physical(), omega.grid) - A.physical())))


def _check_consistency(omega, A, tol):
    err = consistency_error(omega, A)
    size = max(1.0, float(np.max(np.abs(A.physical()))))
    if err > tol * size:
        raise InconsistentState(f"I_inf[omega] differs from A by {err:.3e}")


def _transport_parts(omega: Field, A: LineFunction):
    grid = omega.grid
    om = omega.physical()
    om_x = dx(omega).physical()
    om_y = dy_array(om, grid)
    ax = dx(A).physical()
    return om, om_x, om_y, ax


def velocity(omega: Field, A: LineFunction, tol: float = CONSISTENCY_TOL):
    """Velocity perturbation ``(u, v)`` from the vorticity and displacement.

    ``u = I_y[omega]`` and
    ``v = -y A_x + I_y[I^inf[omega_x - A_x omega_y]] - A_x I_y[omega]``,
    which avoids differentiating ``I_y[u]`` in x.

    Raises
    ------
    InconsistentState
        If ``I_inf[omega]`` differs from ``A`` by more than ``tol``
        (relative to ``max(1, ||A||_inf)``).
    """
    _check_consistency(omega, A, tol)
    grid = omega.grid
    om, om_x, om_y, ax = _transport_parts(omega, A)
    u = cumulative_from_zero(om, grid)
    transport = om_x - ax[:, None] * om_y
    v = -grid.y[None, :] * ax[:, None] + cumulative_from_zero(cumulative_to_top(transport, grid), grid) - ax[:, None] * u
    return Field(grid, u), Field(grid, v)


def velocity_direct(omega: Field) -> Field:
    """``v = -d_x I_y[u]``, used only as a cross-check."""
    grid = omega.grid
    u = cumulative_from_zero(omega.physical(), grid)
    uu = cumulative_from_zero(u, grid)
    return Field(grid, -dx(Field(grid, uu)).physical())


@dataclass(frozen=True)
class ThetaSet:
    """Coefficient fields of the reduced system."""

    theta1: Field
    theta21: Field
    theta22: Field
    theta23: Field
    theta3: Field

    def theta2(self) -> np.ndarray:
        return self.theta21.values + self.theta22.values + self.theta23.values


def theta_coefficients(omega: Field, w: Field, A: LineFunction, cutoff: CutoffProfile,
                       tol: float = CONSISTENCY_TOL) -> ThetaSet:
    """Evaluate the five coefficient fields on the grid.

    ``u`` and ``J`` are integrated on the original grid and composed with
    ``Phi`` by monotone cubic interpolation wherever ``Phi`` differs from
    the identity.

    Raises
    ------
    InconsistentState
        If the state violates ``I_inf[omega] = A``.
    InvariantError
        If ``1 - A d_y chi_R`` leaves ``[1/2, 3/2]``.
    """
    _check_consistency(omega, A, tol)
    grid = omega.grid
    if w.grid != grid:
        raise ValueError("omega and w live on different grids")
    om, om_x, om_y, ax = _transport_parts(omega, A)
    a = _real_line(A)
    jac = _jacobian(A, cutoff)
    chi = cutoff.chi[None, :]
    ph = phi(A, cutoff)
    meta = {}
    u = cumulative_from_zero(om, grid)
    J = cumulative_from_zero(cumulative_to_top(om_x - ax[:, None] * om_y, grid), grid)
    u_phi = _compose(u, grid, ph, meta)
    J_phi = _compose(J, grid, ph, meta)
    theta1 = u_phi - a[:, None] * chi
    theta21 = J_phi / jac
    theta22 = -(1.0 - chi) * (ph + u_phi) * ax[:, None] / jac
    theta23 = -a[:, None] * cutoff.d2chi[None, :] / jac ** 3
    theta3 = jac ** -2 - 1.0
    return ThetaSet(*(Field(grid, t) for t in (theta1, theta21, theta22, theta23, theta3)))


def _w_derivatives(w: Field):
    grid = w.grid
    wv = w.physical()
    return dx(w).physical(), dy_array(wv, grid), dyy_array(wv, grid)


def rhs_assemble(theta: ThetaSet, w: Field, dealiased: bool = True) -> Field:
    """``-theta1 w_x - theta2 w_y + theta3 w_yy`` (the forcing of the reduced system)."""
    w_x, w_y, w_yy = _w_derivatives(w)
    F = -theta.theta1.values * w_x - theta.theta2() * w_y + theta.theta3.values * w_yy
    if dealiased:
        F = dealias(F, w.grid)
    return Field(w.grid, F)


def residual_ptd3(w: Field, omega: Field, A: LineFunction, theta: ThetaSet) -> Field:
    """Pointwise residual ``y w_x - w_yy - (forcing)`` of the reduced system.

    ``omega`` and ``A`` are accepted for symmetry with the other
    operations; the coefficients in ``theta`` already encode them.
    """
    grid = w.grid
    w_x, w_y, w_yy = _w_derivatives(w)
    forcing = -theta.theta1.values * w_x - theta.theta2() * w_y + theta.theta3.values * w_yy
    return Field(grid, grid.y[None, :] * w_x - w_yy - forcing)


def displacement_identity_error(w: Field, A: LineFunction, cutoff: CutoffProfile) -> float:
    """``max_x |I_inf[w (1 - A d_y chi_R)] - A|``."""
    jac = 1.0 - _real_line(A)[:, None] * cutoff.dchi[None, :]
    return float(np.max(np.abs(integral_full(w.physical() * jac, w.grid) - A.physical())))


def cutoff_band_report(cutoff: CutoffProfile) -> dict:
    """Where the transition band sits relative to the grid."""
    return {
        "R": cutoff.R,
        "scale": cutoff.scale,
        "band": [cutoff.scale, 2.0 * cutoff.scale],
        "Ly": cutoff.grid.Ly,
        "band_on_grid": cutoff.active,
        "K": CHI_W1INF,
        "sup_A_dchi": float(cutoff.a_sup * np.max(np.abs(cutoff.dchi))) if cutoff.dchi.size else 0.0,
        "bound_1_over_R": 1.0 / cutoff.R if math.isfinite(cutoff.R) else 0.0,
    }
