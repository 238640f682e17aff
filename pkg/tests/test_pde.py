import numpy as np
import pytest

from kbr.baselines.euler import euler_flux, prim_to_cons
from kbr.errors import InvalidConfig, InvalidInput
from kbr.grid import Grid1D, clustered_grid, uniform_grid
from kbr.pde import (InterfacePredictor, SolverConfig, burgers_conservation_residual,
                     kbr_interface_flux, maccormack_kbr_step, maccormack_step, roe_kbr_step,
                     roe_step, run_simulation, sod_initial)


def test_solver_config_validation():
    with pytest.raises(InvalidConfig):
        SolverConfig(cfl=1.2)
    with pytest.raises(InvalidConfig):
        SolverConfig(retrain_every=0)


def test_grid_rejects_unsorted_nodes():
    with pytest.raises(InvalidInput):
        Grid1D(np.array([0.0, 0.5, 0.4, 1.0]))
    g = clustered_grid(21)
    assert np.all((g.interfaces > g.nodes[:-1]) & (g.interfaces < g.nodes[1:]))
    assert g.cell_widths.sum() == pytest.approx(1.0)


# ---------------------------------------------------------------- interface flux

def test_interface_flux_constant_and_quadratic():
    grid = clustered_grid(41)
    x = grid.nodes
    assert np.allclose(kbr_interface_flux(np.full(41, 2.5), grid), 2.5, atol=1e-14)
    F = 1 + 2 * x - 3 * x * x
    xf = grid.interfaces
    assert np.max(np.abs(kbr_interface_flux(F, grid) - (1 + 2 * xf - 3 * xf * xf))) < 1e-10


def test_interface_flux_components_share_width():
    grid = uniform_grid(31)
    x = grid.nodes
    F = np.vstack([np.sin(3 * x) + 2, x ** 2, np.ones_like(x)])
    pred = InterfacePredictor(grid)
    out = kbr_interface_flux(F, grid, predictor=pred)
    assert out.shape == (3, 30)
    assert np.allclose(out[1], grid.interfaces ** 2, atol=1e-10)
    assert np.allclose(out[2], 1.0, atol=1e-14)


def test_interface_flux_on_step_overshoot_is_bounded():
    # characterize (not forbid) Gibbs overshoot against a monotone interpolant
    from scipy.interpolate import PchipInterpolator

    grid = clustered_grid(251)
    U = sod_initial(grid)
    F = euler_flux(U)[0 + 1]  # momentum flux = pressure for the resting gas
    pred = kbr_interface_flux(F, grid)
    mono = PchipInterpolator(grid.nodes, F)(grid.interfaces)
    lo = np.minimum(F[:-1], F[1:])
    hi = np.maximum(F[:-1], F[1:])
    osc = np.max(np.abs(pred - mono))
    assert np.all(pred >= lo - osc - 1e-15) and np.all(pred <= hi + osc + 1e-15)
    assert osc < 0.5 * np.ptp(F)


# ---------------------------------------------------------------- Burgers

def test_maccormack_constant_state():
    grid = uniform_grid(51)
    u = np.full(51, 0.7)
    assert np.array_equal(maccormack_step(u, grid, 0.01), u)
    pred = InterfacePredictor(grid)
    pred.fit(grid.nodes ** 2 + 1)
    assert np.allclose(maccormack_kbr_step(u, grid, 0.01, pred), u, atol=1e-14)


def _classical_maccormack(u, x, dt):
    # independent forward/backward MacCormack on non-uniform nodes
    n = u.size
    us = np.array(u, dtype=float)
    for i in range(n - 1):
        us[i] = u[i] - dt / (x[i + 1] - x[i]) * (0.5 * u[i + 1] ** 2 - 0.5 * u[i] ** 2)
    out = np.array(u, dtype=float)
    for i in range(1, n - 1):
        out[i] = 0.5 * (u[i] + us[i] - dt / (x[i] - x[i - 1]) * (0.5 * us[i] ** 2 - 0.5 * us[i - 1] ** 2))
    return out


def test_maccormack_twin_without_prediction_is_classical():
    grid = clustered_grid(61)
    u = np.where(grid.nodes < 0.5, 1.0, 0.0) + 0.1 * np.sin(7 * grid.nodes)
    a = maccormack_kbr_step(u, grid, 0.002, None)
    b = maccormack_step(u, grid, 0.002)
    assert np.array_equal(a, b)
    assert np.allclose(a, _classical_maccormack(u, grid.nodes, 0.002), rtol=0, atol=1e-15)


def test_burgers_kbr_shock_and_conservation():
    res = run_simulation("burgers-maccormack-kbr", SolverConfig(t_end=0.3))
    x = res.grid.nodes
    u = res.snapshots[-1]
    h = x[1] - x[0]
    xs = x[np.argmin(np.abs(u - 0.5))]
    assert abs(xs - 0.65) <= 2 * h
    assert res.max_conservation_residual < 1e-10
    assert np.linalg.norm(u) < 10 * np.linalg.norm(res.snapshots[0])


def test_burgers_conservation_residual_classical():
    grid = uniform_grid(101)
    u0 = np.where(grid.nodes < 0.5, 1.0, 0.0)
    u1, stage = maccormack_step(u0, grid, 0.004, return_stage=True)
    assert abs(burgers_conservation_residual(u0, u1, stage, grid, 0.004)) < 1e-14


# ---------------------------------------------------------------- Euler

def test_roe_constant_state_and_twin():
    grid = clustered_grid(51)
    U = np.tile(prim_to_cons(0.9, 0.1, 0.8)[:, None], (1, 51))
    assert np.allclose(roe_step(U, grid, 1e-3), U, rtol=0, atol=1e-15)
    V = sod_initial(grid)
    assert np.array_equal(roe_kbr_step(V, grid, 1e-3, None), roe_step(V, grid, 1e-3))


def test_sod_runs_conserve_and_stay_physical():
    cfg = SolverConfig(t_end=0.15)
    for problem in ("sod-roe", "sod-roe-kbr"):
        res = run_simulation(problem, cfg)
        assert res.max_conservation_residual < 1e-10
        assert np.all(np.isfinite(res.snapshots[-1]))
        assert res.times[-1] == pytest.approx(0.15, abs=1e-14)


def test_zero_end_time_returns_initial_condition():
    res = run_simulation("sod-roe-kbr", SolverConfig(t_end=0.0))
    assert res.steps == 0 and len(res.snapshots) == 1
    assert np.array_equal(res.snapshots[0], sod_initial(res.grid))


def test_rerun_is_bit_identical():
    cfg = SolverConfig(t_end=0.05)
    a = run_simulation("sod-roe-kbr", cfg)
    b = run_simulation("sod-roe-kbr", cfg)
    assert np.array_equal(a.snapshots[-1], b.snapshots[-1])
    assert a.k_history == b.k_history


def test_unknown_problem():
    with pytest.raises(InvalidInput):
        run_simulation("heat", SolverConfig())
