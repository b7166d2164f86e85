import math

import numpy as np
import pytest

from tripledeck import norms, reduction, resolvent, rigidity
from tripledeck.spectral import GridSpec, dx, dx_abs_dx, dy_array, dyy_array

SMALL = GridSpec(Lx=40.0, Nx=32, Ly=30.0, Ny=257)


def test_zero_state_is_fixed(small_grid):
    s = rigidity.zero_state(small_grid)
    out = rigidity.iterate_once(s)
    for f in (out.omega, out.w, out.w_b, out.w_in):
        assert np.all(f.values == 0)
    assert np.all(out.A.values == 0)


def test_seed_state_hits_amplitude():
    s = rigidity.seed_state(SMALL, 1e-2, rng_seed=3)
    assert norms.sc_norm(s.omega, s.A).total == pytest.approx(1e-2, rel=1e-10)
    assert reduction.consistency_error(s.omega, s.A) == 0.0
    assert np.all(rigidity.seed_state(SMALL, 0.0).omega.values == 0)
    with pytest.raises(ValueError):
        rigidity.seed_state(SMALL, -1.0)


def test_state_from_omega_splits_w():
    s = rigidity.seed_state(SMALL, 1e-2, rng_seed=1)
    assert np.max(np.abs(s.w.values - s.w_in.values - s.w_b.values)) <= 1e-15 * np.max(np.abs(s.w.values))
    # w_b carries the wall slope d_x |d_x| A
    slope = dy_array(s.w_b.values, SMALL)[:, 0]
    target = dx_abs_dx(s.A).values
    assert np.max(np.abs(slope - target)) <= 1e-3 * np.max(np.abs(target))


def test_iterate_once_consistency_and_kinetic_equation():
    s = rigidity.seed_state(SMALL, 1e-2, rng_seed=2)
    out = rigidity.iterate_once(s)
    # the new state is consistent and its w splits as w_in + w_b(A)
    assert reduction.consistency_error(out.omega, out.A) <= 1e-10 * max(np.max(np.abs(out.A.values)), 1e-300) + 1e-14
    assert np.allclose(out.w.values, out.w_in.values + out.w_b.values, rtol=0, atol=1e-15)
    # w_in solves the kinetic problem with the frozen-coefficient forcing
    cut = reduction.build_cutoff(s.A, s.R)
    F = reduction.rhs_assemble(reduction.theta_coefficients(s.omega, s.w, s.A, cut), s.w)
    assert np.array_equal(out.w_in.values, resolvent.solve_inhomogeneous(F).values)
    lhs = SMALL.y[None, :] * dx(out.w_in).values - dyy_array(out.w_in.values, SMALL)
    assert np.max(np.abs(lhs - F.values)[:, 1:-1]) <= 1e-2 * np.max(np.abs(F.values))


def test_iteration_contracts_small_seed():
    trace = rigidity.run_rigidity(1e-3, R=8.0, max_iters=10, tol=1e-12, grid=SMALL)
    assert trace.converged and trace.status == "converged"
    vals = [r["w_in_Y"] for r in trace.rows]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert trace.rho_max is not None and trace.rho_max <= 0.5
    summary = trace.summary()
    assert summary["iterations"] == len(trace.rows) - 1
    assert set(summary["final_norms"]) == {"w_in_Y", "sc_total", "abs_dx_5_6_A_H4_3"}
    assert summary["final_residuals"]["consistency"] <= 1e-10


def test_zero_amplitude_converges_immediately():
    trace = rigidity.run_rigidity(0.0, grid=SMALL)
    assert trace.converged and trace.summary()["iterations"] == 0


def test_with_R_changes_only_R():
    s = rigidity.seed_state(SMALL, 1e-3)
    t = rigidity.with_R(s, 3.0)
    assert t.R == 3.0 and t.omega is s.omega and t.A is s.A


def test_audit_requires_enough_samples():
    with pytest.raises(ValueError):
        rigidity.audit_inequalities(n_samples=29)


@pytest.mark.slow
def test_audit_small_grid_structure_and_determinism():
    grid = GridSpec(Lx=40.0, Nx=32, Ly=30.0, Ny=129)
    a = rigidity.audit_inequalities(n_samples=30, seed=7, grid=grid)
    b = rigidity.audit_inequalities(n_samples=30, seed=7, grid=grid)
    assert a == b
    assert set(a["constants"]) == set(rigidity.AUDIT_KEYS)
    for key, c in a["constants"].items():
        assert c["C_coarse"] > 0 and math.isfinite(c["C_fine"])
    levels = {r["level"] for r in a["rows"]}
    assert levels == {0, 1}
