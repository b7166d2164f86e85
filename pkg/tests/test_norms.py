import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tripledeck import norms, oracle
from tripledeck.spectral import Field, GridSpec, LineFunction, dx, dy_array, dyy_array

GRID = GridSpec(Lx=20.0, Nx=32, Ly=30.0, Ny=257)

exponent = st.floats(1.1, 6.0)
seeds = st.integers(0, 2**32 - 1)


def random_sample(seed, n=200):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(n) * np.exp(rng.uniform(-3, 3, n))
    # repeated values exercise the plateau handling
    vals[: n // 5] = vals[0]
    return vals, rng.uniform(0.01, 2.0, n)


def random_field(seed, grid=GRID):
    rng = np.random.default_rng(seed)
    x, y = grid.x[:, None], grid.y[None, :]
    out = np.zeros(grid.shape)
    for _ in range(4):
        k = 2 * np.pi * rng.integers(1, 5) / grid.Lx
        out += rng.standard_normal() * np.cos(k * x + rng.uniform(0, 2 * np.pi)) * y * np.exp(-rng.uniform(0.5, 2) * y)
    return Field(grid, out)


# ---------------------------------------------------------------------------
# rearrangement norms


@given(st.floats(0.1, 10), st.floats(0.01, 100), exponent, st.floats(1.0, 8.0))
def test_indicator_closed_forms(c, a, p, q):
    vals = np.full(7, c)
    meas = np.full(7, a / 7)
    assert norms.weak_lp(vals, meas, p) == pytest.approx(c * a ** (1 / p), rel=1e-13)
    assert norms.lorentz_pq(vals, meas, p, q) == pytest.approx(c * a ** (1 / p) * (p / q) ** (1 / q), rel=1e-13)


def test_weak_norm_of_power_is_one():
    # y^{-3/4} sampled at right cell ends has exact weak L^{4/3} norm 1
    h = 0.01
    y = h * np.arange(1, 5001)
    assert norms.weak_lp(y ** -0.75, np.full(y.size, h), 4 / 3) == pytest.approx(1.0, rel=1e-14)


@given(seeds, exponent, st.floats(1.0, 8.0))
def test_agrees_with_bruteforce(seed, p, q):
    vals, meas = random_sample(seed)
    assert norms.weak_lp(vals, meas, p) == pytest.approx(oracle.weak_bruteforce(vals, meas, p), rel=1e-12)
    assert norms.lorentz_pq(vals, meas, p, q) == pytest.approx(oracle.lorentz_bruteforce(vals, meas, p, q), rel=1e-12)


@given(seeds, exponent)
def test_lorentz_pp_is_lebesgue(seed, p):
    vals, meas = random_sample(seed)
    lp = np.sum(np.abs(vals) ** p * meas) ** (1 / p)
    assert norms.lorentz_pq(vals, meas, p, p) == pytest.approx(lp, rel=1e-12)
    assert norms.lorentz_pq(vals, meas, p, math.inf) == norms.weak_lp(vals, meas, p)


def test_lorentz_41_of_inverse_distance():
    # || 1/y on (z, inf) ||_{L^{4,1}} = z^{-3/4} pi sqrt(2)
    s = np.geomspace(1.0, 1e12, 200_001)
    mid = np.sqrt(s[1:] * s[:-1])
    ds = np.diff(s)
    results = {}
    for z in (0.5, 1.0, 4.0):
        results[z] = norms.lorentz_pq(1 / (z * mid), z * ds, 4.0, 1.0)
        assert results[z] == pytest.approx(z ** -0.75 * math.pi * math.sqrt(2), rel=1e-3)
    assert results[4.0] / results[1.0] == pytest.approx(4.0 ** -0.75, rel=1e-12)


@given(seeds, exponent, st.floats(1.0, 4.0), st.floats(0.1, 4.0))
def test_lorentz_decreasing_in_q_with_embedding_constant(seed, p, q, dq):
    vals, meas = random_sample(seed)
    r = q + dq
    a, b = norms.lorentz_pq(vals, meas, p, q), norms.lorentz_pq(vals, meas, p, r)
    assert b <= (q / p) ** (1 / q - 1 / r) * a * (1 + 1e-12)
    assert norms.weak_lp(vals, meas, p) <= a * (q / p) ** (1 / q) * (1 + 1e-12)


@given(seeds, exponent, st.floats(1.0, 6.0))
def test_lorentz_holder(seed, p, q):
    vals, meas = random_sample(seed)
    other = np.roll(vals, 3) * 0.7 + 0.1
    pp, qq = p / (p - 1), (q / (q - 1) if q > 1 else math.inf)
    lhs = np.sum(np.abs(vals * other) * meas)
    assert lhs <= norms.lorentz_pq(vals, meas, p, q) * norms.lorentz_pq(other, meas, pp, qq) * (1 + 1e-12)


@given(seeds, st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), exponent)
def test_homogeneity(seed, c, p):
    vals, meas = random_sample(seed)
    assert norms.weak_lp(c * vals, meas, p) == pytest.approx(abs(c) * norms.weak_lp(vals, meas, p), rel=1e-13)
    assert norms.lorentz_pq(c * vals, meas, p, 2.0) == pytest.approx(abs(c) * norms.lorentz_pq(vals, meas, p, 2.0), rel=1e-13)
    f = random_field(seed)
    scaled = norms.y_norm(Field(GRID, c * f.values)).total
    assert scaled == pytest.approx(abs(c) * norms.y_norm(f).total, rel=1e-12)


def test_rejects_bad_exponents():
    with pytest.raises(ValueError):
        norms.weak_lp([1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        norms.lorentz_pq([1.0], [1.0], 2.0, 0.5)
    with pytest.raises(ValueError):
        norms.weak_lp([1.0], [0.0], 2.0)


def test_nested_weak_separable():
    a = 1 + np.cos(2 * np.pi * GRID.x / GRID.Lx) ** 2
    b = GRID.y * np.exp(-GRID.y)
    f = Field(GRID, a[:, None] * b[None, :])
    expect = norms.weak_lp(a, np.full(GRID.Nx, GRID.hx), 12 / 5) * norms.weak_lp(b, GRID.wy, 4 / 3)
    assert norms.nested_weak(f) == pytest.approx(expect, rel=1e-13)


# ---------------------------------------------------------------------------
# Y norm


def test_y_norm_single_mode_matches_physical_quadrature():
    k = 2 * np.pi * 3 / GRID.Lx
    b = GRID.y ** 2 * np.exp(-GRID.y)
    f = Field(GRID, np.cos(k * GRID.x)[:, None] * b[None, :])
    rep = norms.y_norm(f)
    v = f.values
    assert rep["y_dx_L2"] == pytest.approx(norms.l2(GRID.y[None, :] * dx(f).values, GRID), rel=1e-12)
    assert rep["abs_dx_2_3_L2"] == pytest.approx(k ** (2 / 3) * norms.l2(v, GRID), rel=1e-12)
    assert rep["dyy_L2"] == pytest.approx(norms.l2(dyy_array(v, GRID), GRID), rel=1e-12)
    dyv = dy_array(v, GRID)
    assert rep["abs_dx_1_2_y_1_2_dy_L2"] == pytest.approx(k ** 0.5 * norms.l2(np.sqrt(GRID.y) * dyv, GRID), rel=1e-12)
    assert rep["y_total"] == pytest.approx(sum(rep[key] for key in norms.Y_KEYS), rel=1e-15)


@given(seeds)
def test_y_norm_interpolation_per_mode(seed):
    f = random_field(seed)
    per = norms.y_norm_per_mode(f)
    assert np.all(per["y_1_4_dyf"] <= np.sqrt(per["dyf"] * per["y_1_2_dyf"]) * (1 + 1e-12) + 1e-300)
    rep = norms.y_norm(f)
    bound = math.sqrt(rep["abs_dx_1_3_dy_L2"] * rep["abs_dx_1_2_y_1_2_dy_L2"])
    assert rep["abs_dx_5_12_y_1_4_dy_L2"] <= bound * (1 + 1e-12)


def test_trace_norm_single_mode():
    k = 2 * np.pi * 2 / GRID.Lx
    f = Field(GRID, np.sin(k * GRID.x)[:, None] * (GRID.y * np.exp(-GRID.y))[None, :])
    slope = dy_array(f.values, GRID)[:, 0]
    assert norms.trace_norm(f) == pytest.approx(k ** (1 / 6) * norms.line_lp(slope, GRID, 2.0), rel=1e-12)


# ---------------------------------------------------------------------------
# composite norms


def test_sc_norm_zero_state():
    rep = norms.sc_norm(Field.zeros(GRID), LineFunction.zeros(GRID))
    assert rep.total == 0.0 and all(v == 0.0 for v in rep.components.values())


def test_sc_norm_constant_displacement():
    om = Field(GRID, np.exp(-GRID.x[:, None] ** 2 / 4) * (GRID.y * np.exp(-GRID.y))[None, :])
    A = LineFunction(GRID, np.full(GRID.Nx, 0.7))
    rep = norms.sc_norm(om, A)
    assert rep["dxA_L3"] < 1e-14 and rep["product"] < 1e-14
    assert rep["omega_LinfL1"] == pytest.approx(np.max(om.values @ GRID.wy), rel=1e-14)
    expect = norms.nested_weak(Field(GRID, GRID.y[None, :] * dx(om).values))
    assert rep["transport_weak"] == pytest.approx(expect, rel=1e-10)
    assert set(rep.to_dict()) == set(norms.SC_KEYS) | {"sc_total"}


def test_x_q_norm_without_shift():
    f = random_field(5)
    rep = norms.x_q_norm(f)
    assert rep["transport_L2"] == pytest.approx(norms.l2(GRID.y[None, :] * dx(f).values, GRID), rel=1e-14)
    assert rep["x_q_total"] == pytest.approx(sum(rep[k] for k in norms.XQ_KEYS), rel=1e-15)
    assert norms.x_q_norm(f, LineFunction.zeros(GRID)).to_dict() == rep.to_dict()


@given(seeds)
def test_mixed_norm_holder(seed):
    f, g = random_field(seed), random_field(seed + 1)
    lhs = np.sum(np.abs(f.values * g.values) @ GRID.wy) * GRID.hx
    rhs = norms.lp_x_lq_y(f.values, GRID, 3.0, 4.0) * norms.lp_x_lq_y(g.values, GRID, 1.5, 4 / 3)
    assert lhs <= rhs * (1 + 1e-12)
    assert norms.lp_x_lq_y(f.values, GRID, 2.0, 2.0) == pytest.approx(norms.l2(f.values, GRID), rel=1e-13)
