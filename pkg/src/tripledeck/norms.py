"""Lebesgue, mixed, Lorentz and weak norms, and the composite norms of the problem.

Discrete conventions
--------------------
* A field sample carries the measure of its quadrature cell: trapezoid
  weights in y, the uniform spacing in x.
* Rearrangements sort ``|f|`` decreasingly; with cumulative measures
  ``M_k`` the weak norm is ``max_k M_k^{1/p} v_k`` and
  ``||f||_{p,q}^q = (p/q) sum_k v_k^q (M_k^{q/p} - M_{k-1}^{q/p})``.
* Mixed norms are inner-y, outer-x.  Sup norms are grid maxima.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Field, GridSpec, LineFunction, dx, dy_array, dyy_array, hermitian_fix

__all__ = [
    "NormReport",
    "weak_lp",
    "lorentz_pq",
    "weak_rows",
    "nested_weak",
    "l2",
    "lp_x_lq_y",
    "linf_x_l1_y",
    "line_lp",
    "y_norm",
    "y_norm_per_mode",
    "trace_norm",
    "sc_norm",
    "x_q_norm",
    "Y_KEYS",
    "SC_KEYS",
    "XQ_KEYS",
]

Y_KEYS = (
    "dyy_L2",
    "y_dx_L2",
    "abs_dx_2_3_L2",
    "abs_dx_1_3_dy_L2",
    "abs_dx_1_2_y_1_2_dy_L2",
    "abs_dx_5_12_y_1_4_dy_L2",
)
SC_KEYS = (
    "omega_LinfL1",
    "dxA_L3",
    "product",
    "omega_Linf",
    "dyomega_L6L2",
    "transport_weak",
)
XQ_KEYS = ("f_LinfL1", "dyf_L6L2", "dyyf_L2", "transport_L2")

OVERFLOW_GUARD = 1e300


@dataclass
class NormReport:
    """Named norm components with a total.

    Attributes
    ----------
    components : dict
        Component name to value.
    total_key : str
        Name under which the total is stored in :meth:`to_dict`.
    total : float
    """

    components: dict
    total_key: str
    total: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: float(v) for k, v in self.components.items()}
        out[self.total_key] = float(self.total)
        out.update({k: float(v) for k, v in self.extra.items()})
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __getitem__(self, key):
        return self.to_dict()[key]


# ---------------------------------------------------------------------------
# rearrangement norms


def _prepare(values, measures):
    v = np.abs(np.asarray(values)).ravel().astype(float)
    m = np.broadcast_to(np.asarray(measures, dtype=float), np.shape(values)).ravel()
    if np.any(m <= 0):
        raise ValueError("measures must be positive")
    order = np.argsort(-v, kind="stable")
    return v[order], np.cumsum(m[order])


def weak_lp(values, measures, p: float) -> float:
    """Weak ``L^p`` quasi-norm ``sup_t t mu(|f| > t)^{1/p}`` of a discrete function.

    Parameters
    ----------
    values : array_like
        Sample values.
    measures : array_like
        Positive measure of each sample (broadcast against ``values``).
    p : float
        Exponent, ``p > 1``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    v, M = _prepare(values, measures)
    if v.size == 0:
        return 0.0
    return float(np.max(M ** (1.0 / p) * v))


def lorentz_pq(values, measures, p: float, q: float) -> float:
    """Lorentz ``L^{p,q}`` norm, ``(int_0^inf (t^{1/p} f*(t))^q dt/t)^{1/q}``.

    The rearrangement is piecewise constant, so each plateau contributes
    ``(p/q) v^q (M_k^{q/p} - M_{k-1}^{q/p})``.  ``q = inf`` is the weak norm.
    Returns ``inf`` if the sum overflows.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if math.isinf(q):
        return weak_lp(values, measures, p)
    if not q >= 1:
        raise ValueError("q must be >= 1")
    v, M = _prepare(values, measures)
    if v.size == 0:
        return 0.0
    Mq = M ** (q / p)
    inc = np.diff(np.concatenate([[0.0], Mq]))
    with np.errstate(over="ignore"):
        total = (p / q) * np.sum(v ** q * inc)
    if not np.isfinite(total) or total > OVERFLOW_GUARD:
        return math.inf
    return float(total ** (1.0 / q))


def weak_rows(values: np.ndarray, measures: np.ndarray, p: float) -> np.ndarray:
    """Weak ``L^p`` norm of every row of a 2-D array (shared row measures)."""
    v = np.abs(np.asarray(values))
    order = np.argsort(-v, axis=1, kind="stable")
    vs = np.take_along_axis(v, order, axis=1)
    M = np.cumsum(np.asarray(measures, dtype=float)[order], axis=1)
    return np.max(M ** (1.0 / p) * vs, axis=1)


def nested_weak(f: Field, p_out: float = 12.0 / 5.0, p_in: float = 4.0 / 3.0) -> float:
    """``|| f ||_{L^{p_out,inf}_x (L^{p_in,inf}_y)}``: weak in y per slice, then weak in x."""
    grid = f.grid
    inner = weak_rows(f.physical(), grid.wy, p_in)
    return weak_lp(inner, np.full(grid.Nx, grid.hx), p_out)


# ---------------------------------------------------------------------------
# Lebesgue and mixed norms


def l2(values: np.ndarray, grid: GridSpec) -> float:
    """``L^2`` norm over the half plane of a physical array."""
    return float(np.sqrt(grid.hx * np.sum(np.abs(values) ** 2 * grid.wy[None, :])))


def _l2_spec(spec: np.ndarray, grid: GridSpec) -> float:
    # unitary DFT: sum_x |f|^2 = sum_k |f_hat|^2
    return float(np.sqrt(grid.hx * np.sum(np.abs(spec) ** 2 * grid.wy[None, :])))


def lp_x_lq_y(values: np.ndarray, grid: GridSpec, p: float, q: float) -> float:
    """``|| f ||_{L^p_x(L^q_y)}`` with finite exponents."""
    inner = (np.abs(values) ** q @ grid.wy) ** (1.0 / q)
    if math.isinf(p):
        return float(np.max(inner))
    return float((grid.hx * np.sum(inner ** p)) ** (1.0 / p))


def linf_x_l1_y(values: np.ndarray, grid: GridSpec) -> float:
    """``sup_x int |f| dy``."""
    return float(np.max(np.abs(values) @ grid.wy))


def line_lp(values: np.ndarray, grid: GridSpec, p: float) -> float:
    """``L^p`` norm of a function of x."""
    if math.isinf(p):
        return float(np.max(np.abs(values)))
    return float((grid.hx * np.sum(np.abs(values) ** p)) ** (1.0 / p))


# ---------------------------------------------------------------------------
# Y norm


def y_norm_per_mode(f: Field) -> dict:
    """Per-frequency squared ``L^2_y`` pieces of the Y norm.

    Returns
    -------
    dict of ndarray, shape (Nx,)
        ``xi``, ``f`` (``||f_hat||^2``), ``yf`` (``||y f_hat||^2``),
        ``dyf``, ``y_1_2_dyf``, ``y_1_4_dyf``, ``dyyf`` and the
        trace ``|d_y f_hat(0)|``.
    """
    grid = f.grid
    spec = f.spectrum()
    dys = dy_array(spec, grid)
    dyys = dyy_array(spec, grid)
    w = grid.wy
    y = grid.y

    def sq(a):
        return np.abs(a) ** 2 @ w

    return {
        "xi": grid.xi.copy(),
        "f": sq(spec),
        "yf": sq(y[None, :] * spec),
        "dyf": sq(dys),
        "y_1_2_dyf": sq(np.sqrt(y)[None, :] * dys),
        "y_1_4_dyf": sq(y[None, :] ** 0.25 * dys),
        "dyyf": sq(dyys),
        "trace": np.abs(dys[:, 0]),
    }


def y_norm(f: Field) -> NormReport:
    """The six components of the Y norm and their sum."""
    grid = f.grid
    per = y_norm_per_mode(f)
    xi = np.abs(per["xi"])
    hx = grid.hx

    def total(weights, key):
        return float(np.sqrt(hx * np.sum(weights * per[key])))

    comps = {
        "dyy_L2": total(1.0, "dyyf"),
        "y_dx_L2": total(xi ** 2, "yf"),
        "abs_dx_2_3_L2": total(xi ** (4.0 / 3.0), "f"),
        "abs_dx_1_3_dy_L2": total(xi ** (2.0 / 3.0), "dyf"),
        "abs_dx_1_2_y_1_2_dy_L2": total(xi, "y_1_2_dyf"),
        "abs_dx_5_12_y_1_4_dy_L2": total(xi ** (5.0 / 6.0), "y_1_4_dyf"),
    }
    return NormReport(comps, "y_total", sum(comps.values()))


def trace_norm(f: Field) -> float:
    """``|| |d_x|^{1/6} d_y f(., 0) ||_{L^2(R)}``."""
    grid = f.grid
    tr = dy_array(f.spectrum(), grid)[:, 0]
    return float(np.sqrt(grid.hx * np.sum(np.abs(grid.xi) ** (1.0 / 3.0) * np.abs(tr) ** 2)))


# ---------------------------------------------------------------------------
# composite norms


def _dx_line(A: LineFunction) -> np.ndarray:
    grid = A.grid
    out = np.fft.ifft(1j * hermitian_fix(grid, grid.xi) * A.spectrum, norm="ortho")
    return out.real if np.isrealobj(A.physical()) else out


def sc_norm(omega: Field, A: LineFunction) -> NormReport:
    """Scale-critical functional of a state.

    ``||w||_{Linf_x L1_y} ||A_x||_{L3} + ||w||_{Linf} + ||w_y||_{L6_x L2_y}
    + ||y (w_x - A_x w_y)||_{L^{12/5,inf}_x (L^{4/3,inf}_y)}`` with ``w = omega``.
    """
    grid = omega.grid
    om = omega.physical()
    ax = _dx_line(A)
    om_x = dx(omega).physical()
    om_y = dy_array(om, grid)
    l1 = linf_x_l1_y(om, grid)
    l3 = line_lp(ax, grid, 3.0)
    comps = {
        "omega_LinfL1": l1,
        "dxA_L3": l3,
        "product": l1 * l3,
        "omega_Linf": float(np.max(np.abs(om))),
        "dyomega_L6L2": lp_x_lq_y(om_y, grid, 6.0, 2.0),
        "transport_weak": nested_weak(Field(grid, grid.y[None, :] * (om_x - ax[:, None] * om_y))),
    }
    total = comps["product"] + comps["omega_Linf"] + comps["dyomega_L6L2"] + comps["transport_weak"]
    return NormReport(comps, "sc_total", total)


def x_q_norm(f: Field, Q: LineFunction | None = None) -> NormReport:
    """Components of the solution-space norm with transport shift ``Q``."""
    grid = f.grid
    fv = f.physical()
    f_y = dy_array(fv, grid)
    f_x = dx(f).physical()
    qx = np.zeros(grid.Nx) if Q is None else _dx_line(Q)
    comps = {
        "f_LinfL1": linf_x_l1_y(fv, grid),
        "dyf_L6L2": lp_x_lq_y(f_y, grid, 6.0, 2.0),
        "dyyf_L2": l2(dyy_array(fv, grid), grid),
        "transport_L2": l2(grid.y[None, :] * (f_x - qx[:, None] * f_y), grid),
    }
    return NormReport(comps, "x_q_total", sum(comps.values()))
