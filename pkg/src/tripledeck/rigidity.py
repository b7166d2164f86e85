"""Fixed-point iteration towards the Couette flow and the inequality audit.

One step maps a state ``(omega, A)`` to a new one:

1. coefficients of the reduced system from the current state;
2. forcing ``F`` from those coefficients and the current ``w``;
3. ``w_in'`` solves the kinetic problem with forcing ``F`` and zero
   Neumann data;
4. ``A'`` solves the displacement equation with ``w_in'``;
5. ``w_b'`` is the Airy resolvent of ``d_x |d_x| A'``;
6. ``w' = w_in' + w_b'`` and ``omega'`` is ``w'`` pulled back through ``Phi``.

Every forcing term is quadratic in the state, so near zero the map
contracts faster than linearly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import elliptic_a, norms, reduction, resolvent
from .errors import StageError, TripleDeckError
from .spectral import Field, GridSpec, LineFunction, dx_abs_dx, dy_array, dyy_array, integral_full

__all__ = [
    "State",
    "RigidityTrace",
    "TRACE_COLUMNS",
    "AUDIT_KEYS",
    "zero_state",
    "state_from_omega",
    "seed_state",
    "iterate_once",
    "run_rigidity",
    "state_residuals",
    "random_field_sampler",
    "audit_inequalities",
]

TRACE_COLUMNS = ("iteration", "w_in_Y", "sc_total", "abs_dx_5_6_A_H4_3", "ratio")
AUDIT_KEYS = ("trace", "y_estimate", "lemma_I", "prop_A", "mode_energy", "lemma_in_1")
A_SELF_CONSISTENCY_RTOL = 1e-12
A_SELF_CONSISTENCY_MAX = 20


@dataclass
class State:
    """Vorticity, displacement and the transformed fields of one iterate."""

    omega: Field
    A: LineFunction
    w: Field
    w_b: Field
    w_in: Field
    R: float

    @property
    def grid(self) -> GridSpec:
        return self.omega.grid


def _wb_of(A: LineFunction) -> Field:
    g = dx_abs_dx(A)
    return resolvent.solve_homogeneous_neumann(g).w_b


def zero_state(grid: GridSpec, R: float = 8.0) -> State:
    z = Field.zeros(grid)
    return State(z, LineFunction.zeros(grid), z, Field.zeros(grid), Field.zeros(grid), R)


def state_from_omega(omega: Field, R: float = 8.0) -> State:
    """Complete a vorticity field to a consistent state (``A = I_inf[omega]``)."""
    grid = omega.grid
    A = LineFunction(grid, integral_full(omega.physical(), grid))
    cutoff = reduction.build_cutoff(A, R)
    w = reduction.to_w(omega, A, cutoff)
    w_b = _wb_of(A)
    return State(omega, A, w, w_b, Field(grid, w.values - w_b.values), R)


def _bump(t):
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def _seed_shape(grid: GridSpec, rng_seed: int) -> Field:
    """Random band-limited, compactly supported (in y) vorticity of unit size."""
    rng = np.random.default_rng(rng_seed)
    kmax = grid.Nx // 8
    k = np.fft.fftfreq(grid.Nx) * grid.Nx
    band = (np.abs(k) <= kmax) & (k != 0)
    profiles = [_bump(grid.y / 6.0), (grid.y / 3.0) * _bump(grid.y / 6.0)]
    vals = np.zeros(grid.shape)
    for prof in profiles:
        coeff = (rng.standard_normal(grid.Nx) + 1j * rng.standard_normal(grid.Nx)) * band
        coeff *= np.exp(-((grid.xi / 1.0) ** 2))
        line = np.fft.ifft(coeff).real
        line /= max(np.max(np.abs(line)), 1e-300)
        vals += line[:, None] * prof[None, :]
    return Field(grid, vals)


def seed_state(grid: GridSpec, amplitude: float, R: float = 8.0, rng_seed: int = 0) -> State:
    """Random consistent state scaled so that its scale-critical norm equals ``amplitude``.

    The norm is not homogeneous (it contains products), so the scale
    factor is found by root bracketing.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be non-negative")
    if amplitude == 0:
        return zero_state(grid, R)
    shape = _seed_shape(grid, rng_seed)

    def sc_at(eps):
        om = Field(grid, eps * shape.values)
        A = LineFunction(grid, integral_full(om.values, grid))
        return norms.sc_norm(om, A).total

    hi = 1.0
    while sc_at(hi) < amplitude:
        hi *= 2.0
    lo = 0.0
    eps = brentq(lambda e: sc_at(e) - amplitude, lo, hi, xtol=1e-15, rtol=1e-13)
    return state_from_omega(Field(grid, eps * shape.values), R)


def iterate_once(s: State, damping: float = 1.0) -> State:
    """One step of the fixed-point map.

    The displacement update inverts the quadrature version of ``m`` and
    is repeated with the refreshed ``w'`` and cutoff until ``A'`` stops
    changing, so that the returned state satisfies ``I_inf[omega'] = A'``
    for the discrete integral.

    Raises
    ------
    StageError
        Wrapping the error of the failing stage.
    """
    grid = s.grid

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TripleDeckError as exc:
            raise StageError(name, exc) from exc

    cutoff = stage("cutoff", reduction.build_cutoff, s.A, s.R)
    theta = stage("theta", reduction.theta_coefficients, s.omega, s.w, s.A, cutoff)
    F = stage("rhs", reduction.rhs_assemble, theta, s.w)
    w_in = stage("kinetic_solve", resolvent.solve_inhomogeneous, F)
    if damping != 1.0:
        w_in = Field(grid, damping * w_in.values + (1.0 - damping) * s.w_in.values)
    A = stage("displacement", elliptic_a.solve_A, w_in, s.w, cutoff, symbol="quadrature")
    for _ in range(A_SELF_CONSISTENCY_MAX):
        w_b = stage("resolvent", _wb_of, A)
        w = Field(grid, w_in.values + w_b.values)
        new_cut = stage("cutoff", reduction.build_cutoff, A, s.R)
        A_next = stage("displacement", elliptic_a.solve_A, w_in, w, new_cut, symbol="quadrature")
        change = float(np.max(np.abs(A_next.values - A.values)))
        A = A_next
        if change <= A_SELF_CONSISTENCY_RTOL * max(float(np.max(np.abs(A.values))), 1e-300):
            break
    w_b = stage("resolvent", _wb_of, A)
    w = Field(grid, w_in.values + w_b.values)
    cutoff = stage("cutoff", reduction.build_cutoff, A, s.R)
    omega = stage("pullback", reduction.to_omega, w, A, cutoff)
    return State(omega, A, w, w_b, w_in, s.R)


@dataclass
class RigidityTrace:
    """Per-iteration record of a fixed-point run."""

    rows: list = field(default_factory=list)
    converged: bool = False
    status: str = "running"
    final_residuals: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def ratios(self):
        return [r["ratio"] for r in self.rows if r["ratio"] is not None]

    @property
    def rho_max(self):
        rs = [r for r in self.ratios if math.isfinite(r)]
        return max(rs) if rs else None

    def summary(self) -> dict:
        last = self.rows[-1] if self.rows else {}
        return {
            "converged": self.converged,
            "status": self.status,
            "iterations": (len(self.rows) - 1) if self.rows else 0,
            "rho_max": self.rho_max,
            "final_norms": {k: last.get(k) for k in TRACE_COLUMNS if k not in ("iteration", "ratio")},
            "final_residuals": self.final_residuals,
            "config": self.config,
        }


def state_residuals(s: State) -> dict:
    """Residual diagnostics of a state.

    Returns
    -------
    dict
        ``reduced_residual``: max of the reduced-system residual;
        ``boundary_trace``: max of ``|d_y w(., 0) - d_x|d_x| A|``;
        ``displacement_identity``: max of ``|I_inf[w (1 - A chi')] - A|``;
        ``consistency``: max of ``|I_inf[omega] - A|``.
    """
    cutoff = reduction.build_cutoff(s.A, s.R)
    theta = reduction.theta_coefficients(s.omega, s.w, s.A, cutoff, tol=math.inf)
    res = reduction.residual_ptd3(s.w, s.omega, s.A, theta)
    trace = dy_array(s.w.physical(), s.grid)[:, 0] - dx_abs_dx(s.A).physical()
    return {
        "reduced_residual": float(np.max(np.abs(res.values))),
        "boundary_trace": float(np.max(np.abs(trace))),
        "displacement_identity": reduction.displacement_identity_error(s.w, s.A, cutoff),
        "consistency": reduction.consistency_error(s.omega, s.A),
    }


def _row(k, s, ratio):
    a_norm = elliptic_a.a_regularity_norms(s.A)["abs_dx_5_6_A_H4_3"]
    return {
        "iteration": k,
        "w_in_Y": norms.y_norm(s.w_in).total,
        "sc_total": norms.sc_norm(s.omega, s.A).total,
        "abs_dx_5_6_A_H4_3": a_norm,
        "ratio": ratio,
    }


def run_rigidity(seed_amplitude: float, R: float = 8.0, max_iters: int = 40, tol: float = 1e-12,
                 grid: GridSpec | None = None, rng_seed: int = 0, damping: float = 1.0) -> RigidityTrace:
    """Iterate from a random seed until ``||w_in||_Y < tol`` or ``max_iters``.

    Non-contraction (ratio above 1 three times in a row) and stage
    failures end the run with ``converged = False``; they are reported,
    not raised.
    """
    grid = grid or GridSpec()
    trace = RigidityTrace(config={
        "seed_amplitude": seed_amplitude, "R": R, "max_iters": max_iters, "tol": tol,
        "rng_seed": rng_seed, "damping": damping, "grid": grid.to_dict(),
    })
    state = seed_state(grid, seed_amplitude, R, rng_seed)
    row = _row(0, state, None)
    trace.rows.append(row)
    above = 0
    if row["w_in_Y"] < tol:
        trace.converged, trace.status = True, "converged"
    else:
        for k in range(1, max_iters + 1):
            prev = row["w_in_Y"]
            try:
                state = iterate_once(state, damping=damping)
            except StageError as exc:
                trace.status = f"failed in stage '{exc.stage}': {exc.cause}"
                break
            cur = norms.y_norm(state.w_in).total
            ratio = cur / prev if prev > 0 else math.inf
            if not math.isfinite(cur):
                trace.status = "diverged (non-finite norm)"
                break
            row = _row(k, state, ratio)
            trace.rows.append(row)
            if cur < tol:
                trace.converged, trace.status = True, "converged"
                break
            above = above + 1 if ratio > 1.0 else 0
            if above >= 3:
                trace.status = "non-contraction"
                break
        else:
            trace.status = "max_iters reached"
    try:
        trace.final_residuals = state_residuals(state)
    except TripleDeckError as exc:
        trace.final_residuals = {"error": str(exc)}
    return trace


# ---------------------------------------------------------------------------
# inequality audit


def random_field_sampler(rng: np.random.Generator, Lx: float, n_modes: int = 12):
    """Draw a smooth random field defined independently of the resolution.

    Returns
    -------
    callable
        ``fn(grid) -> Field`` sampling the same continuous function on any
        grid with half-period ``Lx``.
    """
    ks = np.arange(0, n_modes + 1)
    coeff = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) * np.exp(-ks / 6.0)
    widths = rng.uniform(0.5, 3.0, ks.size)
    poly = rng.standard_normal((ks.size, 3))

    def fn(grid: GridSpec) -> Field:
        if grid.Lx != Lx:
            raise ValueError("grid half-period differs from the sampler's")
        x = grid.x[:, None]
        vals = np.zeros(grid.shape)
        for i, k in enumerate(ks):
            t = grid.y / widths[i]
            prof = (poly[i, 0] + poly[i, 1] * t + poly[i, 2] * t ** 2) * np.exp(-0.5 * t ** 2)
            vals += np.real(coeff[i] * np.exp(1j * np.pi * k * x / Lx)) * prof[None, :]
        return Field(grid, vals)

    return fn


def _ratios(f: Field, R: float, small: float) -> dict:
    grid = f.grid
    xi = np.abs(grid.xi)
    fv = f.physical()
    yn = norms.y_norm(f)
    per = norms.y_norm_per_mode(f)
    tr = norms.trace_norm(f)
    spec = f.spectrum()
    h_spec = 1j * grid.xi[:, None] * grid.y[None, :] * spec - dyy_array(spec, grid)
    h_l2 = float(np.sqrt(grid.hx * np.sum(np.abs(h_spec) ** 2 * grid.wy[None, :])))
    c = yn.components

    i_inf = np.fft.fft(integral_full(fv, grid), norm="ortho")
    lem_i = float(np.sqrt(grid.hx * np.sum(xi ** (5.0 / 3.0) * np.abs(i_inf) ** 2)))

    cutoff = reduction.build_cutoff(LineFunction.zeros(grid), R)
    A = elliptic_a.solve_A(f, f, cutoff)
    a_norm = elliptic_a.a_regularity_norms(A)["abs_dx_5_6_A_H4_3"]

    # per-mode energy B^2 against boundary and forcing data
    b2 = xi ** 2 * per["yf"] + xi ** (4.0 / 3.0) * per["f"]
    h2 = np.abs(h_spec) ** 2 @ grid.wy
    rhs_mode = (xi ** (1.0 / 6.0) * per["trace"]) ** 2 + h2
    ok = rhs_mode > 1e-30 * max(np.max(rhs_mode), 1e-300)
    mode = float(np.max(b2[ok] / rhs_mode[ok])) if np.any(ok) else 0.0

    # coefficient bound on a small consistent state built from f
    st = state_from_omega(Field(grid, small * fv), R)
    cut = reduction.build_cutoff(st.A, R)
    th = reduction.theta_coefficients(st.omega, st.w, st.A, cut, tol=math.inf)
    wv = st.w.physical()
    w_x = np.fft.ifft(1j * grid.xi[:, None] * np.fft.fft(wv, axis=0, norm="ortho"), axis=0, norm="ortho").real
    w_y = dy_array(wv, grid)
    w_yy = dyy_array(wv, grid)
    lhs = (norms.l2(th.theta1.values * w_x, grid) + norms.l2(th.theta21.values * w_y, grid)
           + norms.l2(th.theta22.values * w_y, grid) + norms.l2(th.theta3.values * w_yy, grid))
    sc = norms.sc_norm(st.omega, st.A)
    rhs = ((R * sc.total + 1.0 / R) * norms.y_norm(st.w).total
           + R * sc.components["dxA_L3"] * sc.components["dyomega_L6L2"])

    def div(a, b):
        return a / b if b > 0 else math.nan

    return {
        "trace": div(tr, c["dyy_L2"] + c["y_dx_L2"]),
        "y_estimate": div(yn.total, h_l2 + tr),
        "lemma_I": div(lem_i, c["y_dx_L2"] + c["abs_dx_2_3_L2"]),
        "prop_A": div(a_norm, yn.total / R + lem_i),
        "mode_energy": mode,
        "lemma_in_1": div(lhs, rhs),
    }


def _audit_one(args):
    child_seed, grids, R, small = args
    rng = np.random.default_rng(child_seed)
    sampler = random_field_sampler(rng, grids[0].Lx)
    out = []
    for g in grids:
        f = sampler(g)
        if not np.any(f.values):
            out.append(None)
            continue
        out.append(_ratios(f, R, small))
    return out


def audit_inequalities(n_samples: int = 100, seed: int = 0, grid: GridSpec | None = None,
                       R: float = 8.0, workers: int | None = None, small: float = 1e-3) -> dict:
    """Empirical constants of the a-priori estimates at two resolutions.

    Each sample is a random smooth field; every ratio LHS/RHS is computed
    on ``grid`` and on its refinement (``Nx`` and ``Ny - 1`` doubled).

    Returns
    -------
    dict
        ``rows``: per sample and resolution ratios; ``constants``: for each
        inequality, the maxima at both resolutions and their relative drift.
    """
    if n_samples < 30:
        raise ValueError("n_samples must be at least 30")
    grid = grid or GridSpec(Lx=40.0, Nx=128, Ly=30.0, Ny=513)
    grids = (grid, grid.refined())
    children = np.random.SeedSequence(seed).spawn(n_samples)
    jobs = [(c, grids, R, small) for c in children]
    workers = workers or int(os.environ.get("TDK_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_audit_one, jobs))
    else:
        results = [_audit_one(j) for j in jobs]
    rows = []
    for i, pair in enumerate(results):
        for level, ratios in enumerate(pair):
            if ratios is None:
                continue
            rows.append({"sample": i, "level": level, **ratios})
    constants = {}
    for key in AUDIT_KEYS:
        c = []
        for level in (0, 1):
            vals = [r[key] for r in rows if r["level"] == level and math.isfinite(r[key])]
            c.append(max(vals) if vals else math.nan)
        drift = abs(c[1] - c[0]) / c[0] if c[0] and math.isfinite(c[0]) else math.nan
        constants[key] = {"C_coarse": c[0], "C_fine": c[1], "drift": drift}
    return {
        "n_samples": n_samples,
        "seed": seed,
        "grids": [g.to_dict() for g in grids],
        "rows": rows,
        "constants": constants,
    }


def with_R(s: State, R: float) -> State:
    """Same fields with a different cutoff parameter."""
    return replace(s, R=R)
