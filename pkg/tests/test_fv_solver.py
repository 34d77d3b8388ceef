import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgsl.errors import ConfigError, DivergedState
from mgsl.euler_core import U1, U3, primitive_from_conservative
from mgsl.fourier_symbols import GridSpec, convective_symbol, viscous_symbol
from mgsl.fv_solver import (
    HISTORY_COLUMNS,
    FrozenLinearProblem,
    MultigridHierarchy,
    SolverConfig,
    StructuredGrid,
    TimeState,
    fas_w_cycle,
    jst_residual,
    jst_split,
    l2_norm,
    perturbed_uniform,
    prolong,
    restrict,
    smooth,
    solve_steady,
    solve_unsteady,
    time_derivative,
    uniform_field,
    unsteady_residual,
    write_history_csv,
)


def mode_field(grid, kx, ky, vec):
    """Real single-mode perturbation ``Re(vec * exp(i(theta_x i + theta_y j)))`` and its phases."""
    tx, ty = 2 * np.pi * kx / grid.n_x, 2 * np.pi * ky / grid.n_y
    i, j = np.meshgrid(np.arange(grid.n_x), np.arange(grid.n_y), indexing="ij")
    wave = np.exp(1j * (tx * i + ty * j))[..., None]
    return wave, np.real(wave * vec), tx, ty


# --------------------------------------------------------------------------
# residual


@pytest.mark.parametrize("state", [U1, U3])
@pytest.mark.parametrize("ar", [1.0, 100.0, 10000.0])
@pytest.mark.parametrize("order", ["second", "first"])
def test_freestream_preserved(state, ar, order):
    g = StructuredGrid(16, 8, 1.0 / 16, ar)
    assert np.max(np.abs(jst_residual(g, uniform_field(g, state), order))) <= 1e-13


@given(st.integers(0, 2**31 - 1), st.sampled_from(["second", "first"]))
def test_residual_is_conservative(seed, order):
    g = StructuredGrid(8, 12, 0.1, 3.0)
    r = np.random.default_rng(seed)
    u = uniform_field(g, U1) * (1.0 + 0.05 * r.standard_normal((8, 12, 1)))
    u[..., 3] += 0.1 * r.random((8, 12))
    res = jst_residual(g, u, order)
    total = np.sum(res, axis=(0, 1)) * g.volume
    scale = np.sum(np.abs(res), axis=(0, 1)) * g.volume
    assert np.all(np.abs(total) <= 1e-11 * np.maximum(scale, 1.0))
    # an explicit update keeps the domain totals
    u1 = u - 1e-3 * res
    np.testing.assert_allclose(u1.sum(axis=(0, 1)), u.sum(axis=(0, 1)), rtol=1e-11)


@pytest.mark.parametrize("state,ar,kx,ky", [(U3, 2.0, 1, 2), (U1, 1.0, 3, -1), (U3, 10.0, 2, 1)])
def test_residual_linearizes_to_fourier_symbol(state, ar, kx, ky):
    g = StructuredGrid(16, 16, 1.0 / 16, ar)
    st_ = primitive_from_conservative(state)
    vec = np.array([1.0, 0.3 - 0.2j, -0.5j, 2.0 + 1.0j])
    wave, e, tx, ty = mode_field(g, kx, ky, vec)
    spec = GridSpec(dx=g.dx, dy=g.dy, n_x=g.n_x, n_y=g.n_y)
    H = convective_symbol(st_, spec, tx, ty) + viscous_symbol(
        st_, spec, tx, ty, correction=True, sensor=False, m_form="exact"
    )
    lin = np.real(wave * (H @ vec))
    base = uniform_field(g, state)
    errs = []
    for eps in (1e-3, 5e-4, 2.5e-4):
        errs.append(np.max(np.abs(jst_residual(g, base + eps * e) - eps * lin)))
    slopes = [math.log2(errs[k] / errs[k + 1]) for k in range(2)]
    assert min(slopes) >= 1.9
    assert errs[0] <= 1e-2 * np.max(np.abs(1e-3 * lin))


def test_frozen_linear_problem_matches_symbol():
    g = StructuredGrid(8, 8, 0.125, 4.0)
    prob = FrozenLinearProblem(g, U1, correction=True, dt=0.3)
    st_ = primitive_from_conservative(U1)
    vec = np.array([0.2, 1.0, -1.0j, 0.5])
    wave, e, tx, ty = mode_field(g, 1, 3, vec)
    spec = GridSpec(dx=g.dx, dy=g.dy, n_x=8, n_y=8)
    H = convective_symbol(st_, spec, tx, ty, 0.3) + viscous_symbol(
        st_, spec, tx, ty, correction=True, sensor=False, m_form="exact"
    )
    np.testing.assert_allclose(prob.apply(e), np.real(wave * (H @ vec)), atol=1e-12)


def test_split_parts_add_up(rng):
    g = StructuredGrid(8, 8, 0.125)
    u = perturbed_uniform(g, U3, 0.05, ((1, 0), (2, 3)))
    fc, fv = jst_split(g, u)
    np.testing.assert_allclose(fc + fv, jst_residual(g, u), atol=0)
    assert np.max(np.abs(fv)) > 0


def test_residual_rejects_nonphysical_field():
    g = StructuredGrid(4, 4, 0.25)
    u = uniform_field(g)
    u[1, 2, 0] = -1.0
    with pytest.raises(DivergedState):
        jst_residual(g, u)
    u[1, 2, 0] = np.nan
    with pytest.raises(DivergedState):
        jst_residual(g, u)
    with pytest.raises(ConfigError):
        jst_residual(g, uniform_field(g), order="third")


def test_perturbed_uniform_keeps_velocity_and_pressure():
    g = StructuredGrid(8, 4, 0.125, 2.0)
    u = perturbed_uniform(g, U1, 1e-2, ((1, 1),))
    rho = u[..., 0]
    np.testing.assert_allclose(u[..., 1] / rho, math.sqrt(0.5), rtol=1e-14)
    assert np.ptp(rho) > 0.0
    np.testing.assert_allclose(np.mean(rho), 1.0, atol=1e-14)


# --------------------------------------------------------------------------
# transfers


def test_restrict_examples():
    np.testing.assert_allclose(restrict(np.full((4, 6, 4), 2.5)), 2.5)
    checker = np.indices((4, 4)).sum(axis=0) % 2 * 2.0 - 1.0
    np.testing.assert_allclose(restrict(checker), 0.0)
    f = np.arange(16.0).reshape(4, 4)
    assert restrict(f)[0, 0] == pytest.approx((0 + 1 + 4 + 5) / 4)
    vol = np.ones((4, 4))
    vol[0, 0] = 3.0
    assert restrict(f, vol)[0, 0] == pytest.approx((0 * 3 + 1 + 4 + 5) / 6)
    with pytest.raises(ConfigError):
        restrict(np.ones((3, 4)))


def test_prolong_examples():
    c = np.full((4, 4, 4), -1.5)
    np.testing.assert_allclose(prolong(c), -1.5)
    np.testing.assert_allclose(restrict(prolong(c)), c)
    # linear data away from the periodic seam is reproduced at fine centres
    n = 8
    xc = (np.arange(n) + 0.5) * 2.0
    coarse = np.broadcast_to(xc[:, None], (n, n)).copy()
    fine = prolong(coarse)
    xf = np.arange(2 * n) + 0.5
    np.testing.assert_allclose(fine[1:-1, :], np.broadcast_to(xf[1:-1, None], (2 * n - 2, 2 * n)), atol=1e-13)


@given(st.integers(0, 2**31 - 1))
def test_transfers_preserve_mean(seed):
    c = np.random.default_rng(seed).standard_normal((4, 6))
    assert prolong(c).mean() == pytest.approx(c.mean(), abs=1e-13)
    assert restrict(prolong(c)).mean() == pytest.approx(c.mean(), abs=1e-13)


# --------------------------------------------------------------------------
# time discretization


def test_time_residual_examples(rng):
    g = StructuredGrid(4, 4, 0.25)
    u = uniform_field(g, U3)
    ts = TimeState(u, u, 0.1, startup=False)
    np.testing.assert_allclose(unsteady_residual(g, u, ts), 0.0, atol=1e-13)
    w = u + 0.01 * rng.standard_normal(u.shape)
    np.testing.assert_allclose(time_derivative(w, ts), 3.0 * (w - u) / 0.2, rtol=1e-12)
    start = TimeState(u, None, 0.1)
    np.testing.assert_allclose(time_derivative(w, start), (w - u) / 0.1, rtol=1e-12)
    huge = TimeState(u, u, 1e300, startup=False)
    np.testing.assert_allclose(unsteady_residual(g, w, huge), jst_residual(g, w), atol=1e-12)


def test_bdf2_truncation_error_is_second_order():
    # for u = t^3 the BDF-2 quotient misses u' by exactly -2 h^2
    t = 1.0
    errs = []
    for h in (0.1, 0.05, 0.025):
        ts = TimeState(np.array([(t - h) ** 3]), np.array([(t - 2 * h) ** 3]), h, startup=False)
        errs.append(time_derivative(np.array([t**3]), ts)[0] - 3 * t**2)
        assert errs[-1] == pytest.approx(-2 * h * h, rel=1e-9)
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=1e-6)


def test_time_state_validation():
    with pytest.raises(ConfigError):
        TimeState(np.zeros(4), None, 0.0)
    with pytest.raises(ConfigError):
        TimeState(np.zeros(4), None, 1.0, startup=False)


# --------------------------------------------------------------------------
# multigrid


def test_grid_levels_and_coarsening():
    g = StructuredGrid(64, 48, 1 / 64, 2.0)
    assert g.max_levels() == 5
    c = g.coarsen()
    assert (c.n_x, c.n_y, c.dx, c.aspect_ratio) == (32, 24, 2 / 64, 2.0)
    with pytest.raises(ConfigError):
        StructuredGrid(3, 4, 0.1).coarsen()
    with pytest.raises(ConfigError):
        MultigridHierarchy(StructuredGrid(4, 4, 0.25), uniform_field(StructuredGrid(4, 4, 0.25)), 4)


@pytest.mark.parametrize(
    "kw",
    [{"scheme": "ROS3J"}, {"precond": "ilu"}, {"mode": "dual"}, {"levels": 0}, {"cstar": 0.0}, {"d": 1.5}, {"eta": -0.1}],
)
def test_solver_config_validation(kw):
    with pytest.raises(ConfigError):
        SolverConfig(**kw)


def test_single_level_cycle_is_smoothing():
    g = StructuredGrid(8, 8, 0.125)
    u0 = perturbed_uniform(g, U3, 1e-2)
    cfg = SolverConfig(scheme="AW3", levels=1, nu1=2, cstar=50.0)
    h = MultigridHierarchy(g, u0, 1)
    fas_w_cycle(h, 0, cfg, cfg.cstar)
    h2 = MultigridHierarchy(g, u0, 1)
    smooth(h2.finest, cfg, cfg.cstar)
    smooth(h2.finest, cfg, cfg.cstar)
    np.testing.assert_array_equal(h.finest.u, h2.finest.u)


def test_cycle_is_identity_at_the_solution():
    g = StructuredGrid(16, 16, 1 / 16, 10.0)
    u0 = uniform_field(g, U1)
    h = MultigridHierarchy(g, u0, 3)
    fas_w_cycle(h, 2, SolverConfig(levels=3), 1e4)
    np.testing.assert_allclose(h.finest.u, u0, atol=1e-13)


def test_already_converged():
    g = StructuredGrid(8, 8, 0.125)
    rep = solve_steady(g, uniform_field(g), SolverConfig(levels=2))
    assert rep.converged and rep.cycles == 0 and rep.message == "already converged"
    assert math.isnan(rep.rate)


def test_steady_solve_reduces_residual_and_writes_history():
    g = StructuredGrid(16, 16, 1 / 16, 1.0)
    cfg = SolverConfig(scheme="AW3", cstar=1e4, eta=0.5, d=0.5, levels=3, max_cycles=15, tol=1e-8)
    rep = solve_steady(g, perturbed_uniform(g, U3, 1e-3), cfg)
    assert rep.cycles == len(rep.history) - 1
    assert rep.rate < 0.9
    assert rep.reduction == pytest.approx(rep.rate**rep.cycles, rel=1e-9)
    work = [w for _, w, _, _ in rep.history]
    assert all(b > a for a, b in zip(work, work[1:]))
    buf = io.StringIO()
    write_history_csv(rep.history, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(HISTORY_COLUMNS)
    assert lines[1].endswith(",")  # no rate before the first cycle
    assert len(lines) == rep.cycles + 2


def test_divergence_reports_cycle():
    g = StructuredGrid(8, 8, 0.125)
    cfg = SolverConfig(scheme="ERK3", precond="none", cstar=50.0, levels=1, startup_iters=0, max_cycles=50)
    with pytest.raises(DivergedState) as info:
        solve_steady(g, perturbed_uniform(g, U3, 1e-2), cfg)
    assert info.value.cycle is not None and info.value.cycle >= 1


def test_unsteady_steps_and_history_offsets():
    g = StructuredGrid(8, 8, 0.125)
    cfg = SolverConfig(scheme="AW3", cstar=1e4, levels=2, mode="unsteady", max_cycles=40, tol=1e-8)
    rep = solve_unsteady(g, perturbed_uniform(g, U3, 1e-3), cfg, 3, dt=0.05)
    assert len(rep.steps) == 3 and rep.times == pytest.approx([0.0, 0.05, 0.1, 0.15])
    assert all(s.converged for s in rep.steps)
    firsts = [s.history[0][0] for s in rep.steps]
    assert firsts[0] == 0 and firsts[1] == rep.steps[0].cycles
    # density mean is conserved by every implicit step
    assert rep.u[..., 0].mean() == pytest.approx(1.0, abs=1e-12)


def test_l2_norm():
    assert l2_norm(np.full((2, 2, 4), 3.0)) == pytest.approx(3.0)
