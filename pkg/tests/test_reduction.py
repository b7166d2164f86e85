import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from tripledeck import norms, reduction
from tripledeck.errors import InconsistentState
from tripledeck.spectral import (
    Field,
    GridSpec,
    LineFunction,
    cumulative_from_zero,
    cumulative_to_top,
    dx,
    dx_abs_dx,
    dy_array,
    integral_full,
)

# Tall grid so that the cutoff band [scale, 2 scale] (about 24..48 for R = 2)
# sits well inside the domain.
TALL = GridSpec(Lx=40.0, Nx=128, Ly=150.0, Ny=2049)
WIDTH = 25.0


def profile(x):
    return np.exp(-x ** 2 / 16) * (1 + 0.3 * np.sin(x))


def profile_dx(x):
    return np.exp(-x ** 2 / 16) * (-x / 8 * (1 + 0.3 * np.sin(x)) + 0.3 * np.cos(x))


def gauss(y):
    return np.exp(-(y / WIDTH) ** 2)


def state(grid, eps, with_trace=False):
    """Consistent (omega, A); optionally corrected to satisfy the wall condition."""
    om = eps * profile(grid.x)[:, None] * gauss(grid.y)[None, :]
    A = LineFunction(grid, integral_full(om, grid))
    if with_trace:
        # phi has zero integral and unit slope at the wall
        phi = np.exp(-grid.y) * (grid.y - grid.y ** 2 / 2)
        c = dx_abs_dx(A).values
        om = om + c[:, None] * phi[None, :]
    return Field(grid, om), A


# ---------------------------------------------------------------------------
# cutoff


def test_step_function_shape():
    s = np.linspace(-0.5, 1.5, 2001)
    S, dS, _ = reduction.step(s)
    assert np.all(S[s <= 0] == 0) and np.all(S[s >= 1] == 1)
    assert np.all(np.diff(S) >= 0) and np.all(dS >= 0)
    assert S[1000] == pytest.approx(0.5, abs=1e-15)


def test_step_derivatives_match_mpmath():
    f = lambda s: mpmath.exp(-1 / s) / (mpmath.exp(-1 / s) + mpmath.exp(-1 / (1 - s)))
    for s in (0.1, 0.3, 0.5, 0.77):
        _, d1, d2 = reduction.step(np.array([s]))
        assert d1[0] == pytest.approx(float(mpmath.diff(f, s)), rel=1e-10)
        assert d2[0] == pytest.approx(float(mpmath.diff(f, s, 2)), rel=1e-9)


def test_w1inf_constant_against_mpmath():
    # sum convention: sup S' (at s = 1/2) + sup |S''| (root of S''' near 0.2183)
    mpmath.mp.dps = 30
    f = lambda s: mpmath.exp(-1 / s) / (mpmath.exp(-1 / s) + mpmath.exp(-1 / (1 - s)))
    root = mpmath.findroot(lambda s: mpmath.diff(f, s, 3), (0.2175, 0.219), solver="bisect")
    k = float(mpmath.diff(f, mpmath.mpf(1) / 2) + abs(mpmath.diff(f, root, 2)))
    assert reduction.CHI_W1INF == pytest.approx(k, rel=1e-14)


def test_cutoff_support_and_sign(small_grid):
    grid = GridSpec(Lx=40.0, Nx=64, Ly=150.0, Ny=1025)
    A = LineFunction.from_function(grid, lambda x: 0.4 * np.exp(-x ** 2))
    cut = reduction.build_cutoff(A, 2.0)
    y = grid.y
    assert np.all(cut.chi[y <= cut.scale] == 0)
    assert np.all(cut.chi[y >= 2 * cut.scale] == 1)
    assert np.all(cut.dchi >= 0)
    S_lo, _, _ = cut.at(cut.scale)
    S_hi, _, _ = cut.at(2 * cut.scale)
    assert S_hi - S_lo == 1.0
    assert cut.active


def test_cutoff_scale_for_zero_displacement(small_grid):
    cut = reduction.build_cutoff(LineFunction.zeros(small_grid), 2.0)
    assert cut.scale == 2 * reduction.CHI_W1INF
    assert cut.active and cut.scale < small_grid.Ly < 2 * cut.scale


def test_cutoff_rejects_small_R(small_grid):
    with pytest.raises(ValueError):
        reduction.build_cutoff(LineFunction.zeros(small_grid), 1.5)


@given(st.floats(-50, 50), st.floats(2.0, 64.0))
def test_jacobian_in_range(amp, R):
    grid = GridSpec(Lx=10.0, Nx=16, Ly=50.0, Ny=513, grading=1.0)
    A = LineFunction.from_function(grid, lambda x: amp * np.cos(np.pi * x / grid.Lx))
    cut = reduction.build_cutoff(A, R)
    y = np.linspace(0, 3 * cut.scale, 4001)
    _, d, _ = cut.at(y)
    jac = 1 - np.outer(A.values, d)
    assert jac.min() >= 0.5 and jac.max() <= 1.5
    assert cut.a_sup * d.max() <= 1 / R + 1e-15


# ---------------------------------------------------------------------------
# Phi and its inverse


def test_phi_identity_below_band():
    om, A = state(TALL, 0.02)
    cut = reduction.build_cutoff(A, 2.0)
    ph = reduction.phi(A, cut)
    below = TALL.y <= cut.scale
    assert np.array_equal(ph[:, below], np.broadcast_to(TALL.y[below], ph[:, below].shape))


def test_phi_identity_for_zero_displacement(small_grid):
    A = LineFunction.zeros(small_grid)
    cut = reduction.build_cutoff(A, 2.0)
    assert np.array_equal(reduction.phi(A, cut), np.broadcast_to(small_grid.y, small_grid.shape))


@given(st.integers(0, 2**32 - 1))
def test_phi_round_trip(seed):
    rng = np.random.default_rng(seed)
    grid = GridSpec(Lx=10.0, Nx=16, Ly=150.0, Ny=257)
    A = LineFunction.from_function(grid, lambda x: rng.uniform(-3, 3) * np.cos(np.pi * x / grid.Lx) + rng.uniform(-1, 1))
    cut = reduction.build_cutoff(A, rng.uniform(2, 4))
    eta = rng.uniform(0, grid.Ly, size=(grid.Nx, 40))
    y = reduction.phi_inverse(A, cut, eta)
    back = reduction.phi(A, cut, y)
    assert np.max(np.abs(back - eta)) <= 1e-12 * grid.Ly


def test_phi_monotone():
    om, A = state(TALL, 0.5)
    cut = reduction.build_cutoff(A, 2.0)
    ph = reduction.phi(A, cut)
    assert np.all(np.diff(ph, axis=1) > 0)


# ---------------------------------------------------------------------------
# composition


def test_to_w_identity_for_zero_displacement(small_grid, rng):
    om = Field(small_grid, rng.standard_normal(small_grid.shape))
    A = LineFunction.zeros(small_grid)
    w = reduction.to_w(om, A, reduction.build_cutoff(A, 2.0))
    assert np.array_equal(w.values, om.values)


def test_sup_norm_preserved_and_round_trip():
    om, A = state(TALL, 0.02)
    cut = reduction.build_cutoff(A, 2.0)
    w = reduction.to_w(om, A, cut)
    assert abs(np.max(np.abs(w.values)) - np.max(np.abs(om.values))) <= 1e-8
    with pytest.warns(RuntimeWarning, match="beyond Ly"):
        # Phi(Ly) < Ly, so pulling back samples heights above the grid
        back = reduction.to_omega(w, A, cut)
    assert np.max(np.abs(back.values - om.values)) <= 1e-8


def test_displacement_identity():
    om, A = state(TALL, 0.02)
    cut = reduction.build_cutoff(A, 2.0)
    w = reduction.to_w(om, A, cut)
    assert reduction.displacement_identity_error(w, A, cut) <= 1e-8


# ---------------------------------------------------------------------------
# velocity


def test_velocity_zero(small_grid):
    u, v = reduction.velocity(Field.zeros(small_grid), LineFunction.zeros(small_grid))
    assert np.all(u.values == 0) and np.all(v.values == 0)


def test_velocity_requires_consistency(small_grid):
    om, A = state(small_grid, 0.1)
    with pytest.raises(InconsistentState):
        reduction.velocity(om, LineFunction(small_grid, A.values + 1e-3))


def test_velocity_formulas_agree_and_divergence_free():
    grid = GridSpec(Lx=40.0, Nx=256, Ly=150.0, Ny=4097)
    om, A = state(grid, 0.05)
    u, v = reduction.velocity(om, A)
    v_direct = reduction.velocity_direct(om)
    lower = grid.y <= grid.Ly / 2
    scale = np.max(np.abs(v.values[:, lower]))
    assert np.max(np.abs(v.values - v_direct.values)[:, lower]) <= 1e-6 * scale
    div = dx(u).values + dy_array(v.values, grid)
    assert np.max(np.abs(div)) <= 1e-6 * np.max(np.abs(dx(u).values))


# ---------------------------------------------------------------------------
# coefficients and the reduced system


def test_theta_for_zero_displacement(small_grid):
    g = small_grid
    om = Field(g, np.exp(-g.x[:, None] ** 2 / 10) * ((1 - g.y) * np.exp(-g.y))[None, :])
    A = LineFunction.zeros(g)
    cut = reduction.build_cutoff(A, 2.0)
    # the profile integrates to zero analytically; loosen the discrete check
    th = reduction.theta_coefficients(om, om, A, cut, tol=1e-2)
    assert np.all(th.theta22.values == 0) and np.all(th.theta23.values == 0) and np.all(th.theta3.values == 0)
    assert np.array_equal(th.theta1.values, cumulative_from_zero(om.values, g))
    J = cumulative_from_zero(cumulative_to_top(dx(om).values, g), g)
    # the coefficient of w_y is +int_0^y int_z^inf omega_x
    assert np.max(np.abs(th.theta21.values - J)) < 1e-14


def test_theta_zero_state(small_grid):
    z = Field.zeros(small_grid)
    A = LineFunction.zeros(small_grid)
    th = reduction.theta_coefficients(z, z, A, reduction.build_cutoff(A, 2.0))
    for f in (th.theta1, th.theta21, th.theta22, th.theta23, th.theta3):
        assert np.all(f.values == 0)
    assert np.all(reduction.residual_ptd3(z, z, A, th).values == 0)


def test_theta_band_support():
    om, A = state(TALL, 0.05)
    cut = reduction.build_cutoff(A, 2.0)
    w = reduction.to_w(om, A, cut)
    th = reduction.theta_coefficients(om, w, A, cut)
    outside = (TALL.y < cut.scale) | (TALL.y > 2 * cut.scale)
    assert np.all(th.theta23.values[:, outside] == 0)
    assert np.all(th.theta3.values[:, outside] == 0)
    assert np.max(np.abs(th.theta3.values)) > 0


def _manufactured_forcing(grid, eps, eta):
    """Right-hand side -u omega_x - v omega_y of the vorticity equation at height eta."""
    x = grid.x[:, None]
    b = gauss(eta)
    bp = -2 * eta / WIDTH ** 2 * b
    bpp = (4 * eta ** 2 / WIDTH ** 4 - 2 / WIDTH ** 2) * b
    B = WIDTH * math.sqrt(math.pi) / 2 * erf(eta / WIDTH)
    C = WIDTH * math.sqrt(math.pi) / 2 * (eta * erf(eta / WIDTH) + WIDTH / math.sqrt(math.pi) * (np.exp(-(eta / WIDTH) ** 2) - 1))
    om_x, om_y, om_yy = eps * profile_dx(x) * b, eps * profile(x) * bp, eps * profile(x) * bpp
    u, v = eps * profile(x) * B, -eps * profile_dx(x) * C
    return eta * om_x - om_yy + u * om_x + v * om_y


def _mms_error(grid, eps=1e-2):
    om, A = state(grid, eps)
    cut = reduction.build_cutoff(A, 2.0)
    w = reduction.to_w(om, A, cut)
    th = reduction.theta_coefficients(om, w, A, cut)
    res = reduction.residual_ptd3(w, om, A, th).values
    ref = _manufactured_forcing(grid, eps, reduction.phi(A, cut))
    scale = np.max(np.abs(grid.y[None, :] * dx(w).values))
    return np.max(np.abs(res - ref)) / scale, th, w, om, A, cut


def test_manufactured_residual():
    # the omega equation holds up to the analytic forcing, so the reduced
    # residual must equal that forcing evaluated at (x, Phi)
    err, *_ = _mms_error(GridSpec(Lx=40.0, Nx=256, Ly=150.0, Ny=2049))
    assert err <= 1e-5


def test_printed_coefficient_variants_fail_manufactured_check():
    grid = GridSpec(Lx=40.0, Nx=256, Ly=150.0, Ny=2049)
    err, th, w, om, A, cut = _mms_error(grid)
    jac = 1 - A.values[:, None] * cut.dchi[None, :]
    ph = reduction.phi(A, cut)
    u_phi = th.theta1.values + A.values[:, None] * cut.chi[None, :]
    ax = dx(A).values[:, None]
    ref = _manufactured_forcing(grid, 1e-2, ph)
    scale = np.max(np.abs(grid.y[None, :] * dx(w).values))
    variants = {
        "theta21": -th.theta21.values * jac,
        "theta22": -(1 - cut.chi[None, :]) * (u_phi - ph) * ax / jac,
        "theta3": 1 - jac ** -2,
    }
    for name, vals in variants.items():
        parts = {k: getattr(th, k) for k in ("theta1", "theta21", "theta22", "theta23", "theta3")}
        parts[name] = Field(grid, vals)
        res = reduction.residual_ptd3(w, om, A, reduction.ThetaSet(**parts)).values
        assert np.max(np.abs(res - ref)) / scale > 100 * err


def test_boundary_trace_of_transformed_field():
    om, A = state(TALL, 0.02, with_trace=True)
    cut = reduction.build_cutoff(A, 2.0)
    w = reduction.to_w(om, A, cut)
    trace = dy_array(w.values, TALL)[:, 0]
    target = dx_abs_dx(A).values
    assert np.max(np.abs(trace - target)) <= 1e-6 * max(1.0, np.max(np.abs(target)))


def test_theta3_scales_like_inverse_R():
    grid = GridSpec(Lx=40.0, Nx=128, Ly=250.0, Ny=2049)
    om, A = state(grid, 0.02)
    consts = []
    for R in (2.0, 3.0, 4.0):
        cut = reduction.build_cutoff(A, R)
        assert 2 * cut.scale < grid.Ly
        w = reduction.to_w(om, A, cut)
        th = reduction.theta_coefficients(om, w, A, cut)
        consts.append(R * np.max(np.abs(th.theta3.values)))
        wyy = np.gradient(np.gradient(w.values, grid.y, axis=1), grid.y, axis=1)
        assert norms.l2(th.theta3.values * wyy, grid) <= consts[-1] / R * norms.l2(wyy, grid) * (1 + 1e-12)
    # bounded by 2 * (2 / K) * (1 + small) from |A chi_R'| <= 2/(R K)
    assert max(consts) <= 4.0 / reduction.CHI_W1INF * 1.5


def _theta21_growth_constant(grid):
    om, A = state(grid, 0.05)
    cut = reduction.build_cutoff(A, 2.0)
    w = reduction.to_w(om, A, cut)
    th = reduction.theta_coefficients(om, w, A, cut)
    om_y = dy_array(om.values, grid)
    transport = grid.y[None, :] * (dx(om).values - dx(A).values[:, None] * om_y)
    weak = norms.weak_rows(transport, grid.wy, 4 / 3)
    y = grid.y[1:]
    ratio = np.abs(th.theta21.values[:, 1:]) / (y[None, :] ** 0.25 * weak[:, None])
    return np.max(ratio)


def test_theta21_growth_bound_refinement_stable():
    coarse = GridSpec(Lx=40.0, Nx=128, Ly=150.0, Ny=1025)
    c1 = _theta21_growth_constant(coarse)
    c2 = _theta21_growth_constant(coarse.refined())
    assert np.isfinite(c1) and abs(c2 - c1) <= 0.1 * c1


def test_band_report():
    om, A = state(TALL, 0.02)
    rep = reduction.cutoff_band_report(reduction.build_cutoff(A, 2.0))
    assert rep["band_on_grid"] and rep["sup_A_dchi"] <= rep["bound_1_over_R"]
