import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mgsl.errors import DivergedState, UnknownScheme
from mgsl.euler_core import U1, U3, primitive_from_conservative
from mgsl.fourier_symbols import GridSpec, convective_symbol, viscous_symbol
from mgsl.preconditioners import PreconditionerSpec, sgs_symbol
from mgsl.smoothers import (
    SCHEMES,
    SmootherScheme,
    amplification_matrix,
    closed_form_three_stage,
    nonlinear_pseudo_step,
    rosenbrock_reference_matrix,
    scheme_registry,
    stage_recursion,
)

scheme_names = st.sampled_from(sorted(SCHEMES))


def symbols(state, grid, tx, ty, dt=None):
    s = primitive_from_conservative(state)
    return convective_symbol(s, grid, tx, ty, dt), viscous_symbol(s, grid, tx, ty)


def random_phases(seed, n):
    r = np.random.default_rng(seed)
    return r.uniform(-math.pi, math.pi, n), r.uniform(-math.pi, math.pi, n)


# --------------------------------------------------------------------------
# registry


def test_registry_coefficients():
    assert scheme_registry("ARK3J").alpha[0] == 0.1481
    assert scheme_registry("ARK3J").beta == (1.0, 0.5, 0.5)
    assert scheme_registry("ERK3J").alpha == scheme_registry("ARK3J").alpha
    assert scheme_registry("ERK3J").beta == (1.0, 1.0, 1.0)
    assert scheme_registry("ARK52").beta[2] == 0.56
    assert scheme_registry("ARK51").beta == scheme_registry("ARK5J").beta
    assert scheme_registry("ARK5J").alpha == (0.25, 1 / 6, 0.375, 0.5, 1.0)
    assert scheme_registry("ARK51").alpha == (0.0533, 0.1263, 0.2375, 0.4414, 1.0)
    assert scheme_registry("AW52").alpha == scheme_registry("ARK52").alpha
    assert scheme_registry("aw3").name == "AW3"


@given(scheme_names)
def test_registry_invariants(name):
    s = SCHEMES[name]
    assert s.alpha[-1] == 1.0
    assert s.beta[0] == 1.0
    assert s.unsplit().beta == (1.0,) * s.stages


def test_unknown_scheme():
    with pytest.raises(UnknownScheme):
        scheme_registry("ARK4J")
    with pytest.raises(KeyError):
        scheme_registry("RK9")


def test_scheme_validation():
    with pytest.raises(ValueError):
        SmootherScheme("bad", (1.0,), (0.5,), "erk")
    with pytest.raises(ValueError):
        SmootherScheme("bad", (0.5, 1.0), (1.0,), "erk")


# --------------------------------------------------------------------------
# scalar oracles


@given(st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False))
def test_three_stage_scalar_polynomial(z):
    # 1 - z(1 - 0.4 z (1 - 0.1481 z)) expanded by hand
    expected = 1 - z + 0.4 * z**2 - 0.05924 * z**3
    g = stage_recursion(scheme_registry("ERK3"), np.array([[z]]), np.zeros((1, 1)), 1.0)
    assert g[0, 0] == pytest.approx(expected, rel=1e-12, abs=1e-12)
    # the same polynomial when the whole operator is dissipative
    g = stage_recursion(scheme_registry("ERK3"), np.zeros((1, 1)), np.array([[z]]), 1.0)
    assert g[0, 0] == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(st.floats(0.0, 10.0), st.floats(0.0, 1.0))
def test_one_stage_rosenbrock_scalar(z, eta):
    one = SmootherScheme("R1", (1.0,), (1.0,), "rosenbrock")
    g = rosenbrock_reference_matrix(one, np.array([[z]]), np.zeros((1, 1)), eta, 1.0)
    assert g[0, 0].real == pytest.approx(1.0 - z / (1.0 + eta * z), abs=1e-14)


def test_rosenbrock_with_zero_eta_is_explicit():
    grid = GridSpec.unit_square(1.0)
    hc, hv = symbols(U3, grid, *random_phases(1, 20))
    for name in ("ARK3J", "ARK5J"):
        s = scheme_registry(name)
        np.testing.assert_allclose(
            rosenbrock_reference_matrix(s, hc, hv, 0.0, 0.01), stage_recursion(s, hc, hv, 0.01), atol=1e-13
        )


# --------------------------------------------------------------------------
# matrix identities


@given(scheme_names, st.integers(0, 1000))
def test_zero_pseudo_step_is_identity(name, seed):
    grid = GridSpec.unit_square(100.0)
    hc, hv = symbols(U1, grid, *random_phases(seed, 5), dt=0.3)
    s = SCHEMES[name]
    if s.kind == "rosenbrock":
        g = rosenbrock_reference_matrix(s, hc, hv, 0.7, 0.0)
    else:
        g = amplification_matrix(s, hc, hv, None, 0.0)
    np.testing.assert_array_equal(g, np.broadcast_to(np.eye(4), g.shape))


@pytest.mark.parametrize("name", ["ERK3J", "ERK5J", "ERK51", "ERK52"])
def test_unsplit_scheme_ignores_operator_split(name):
    grid = GridSpec.unit_square(1.0)
    hc, hv = symbols(U3, grid, *random_phases(2, 30))
    s = scheme_registry(name)
    a = stage_recursion(s, hc, hv, 0.05)
    b = stage_recursion(s, hc + hv, np.zeros_like(hv), 0.05)
    np.testing.assert_allclose(a, b, atol=1e-14 * max(1.0, np.abs(a).max()))


def test_aw_with_identity_w_is_plain_ark():
    grid = GridSpec.unit_square(1.0)
    hc, hv = symbols(U3, grid, *random_phases(3, 30))
    eye = np.broadcast_to(np.eye(4), hc.shape)
    a = amplification_matrix(scheme_registry("AW3"), hc, hv, eye, 0.05)
    np.testing.assert_allclose(a, amplification_matrix(scheme_registry("ARK3J"), hc, hv, None, 0.05), atol=1e-14)


@pytest.mark.parametrize("name", ["AW3", "AW5J", "AW51", "AW52", "W3J"])
@pytest.mark.parametrize("ar,state,dt", [(1.0, U3, None), (100.0, U1, 200.0 / 800), (10000.0, U3, 0.01)])
def test_aw_with_exact_w_equals_rosenbrock(name, ar, state, dt):
    grid = GridSpec.unit_square(ar)
    hc, hv = symbols(state, grid, *random_phases(11, 100), dt=dt)
    s = scheme_registry(name)
    eta, dts = 0.6, 30.0 * grid.min_width
    W = np.eye(4) + eta * dts * (hc + hv)
    aw = amplification_matrix(s, hc, hv, W, dts)
    ros = rosenbrock_reference_matrix(s, hc, hv, eta, dts)
    np.testing.assert_allclose(aw, ros, rtol=0, atol=1e-12 * max(1.0, np.abs(ros).max()))


@pytest.mark.parametrize("name,precond", [("ARK3J", "sgs"), ("ERK3", None), ("AW3", "sgs"), ("W3J", "sgs")])
@pytest.mark.parametrize("ar", [1.0, 100.0])
def test_three_stage_recursion_matches_closed_form(name, precond, ar):
    grid = GridSpec.unit_square(ar)
    tx, ty = random_phases(7, 100)
    hc, hv = symbols(U3, grid, tx, ty, dt=200.0 * grid.min_width)
    s = scheme_registry(name)
    dts = 10.0 * grid.min_width
    if precond is None:
        P = None
        hcb, hvb = hc, hv
    else:
        spec = PreconditionerSpec("sgs", "aw" if s.kind == "aw" else "aerk", eta=0.8, d=0.5, dt=200.0 * grid.min_width)
        P = sgs_symbol(spec, primitive_from_conservative(U3), grid, dts, tx, ty)
        hcb, hvb = np.linalg.solve(P, hc), np.linalg.solve(P, hv)
    g = amplification_matrix(s, hc, hv, P, dts)
    ref = closed_form_three_stage(s, hcb, hvb, dts)
    np.testing.assert_allclose(g, ref, rtol=0, atol=1e-13 * max(1.0, np.abs(ref).max()))


def test_closed_form_rejects_five_stages():
    with pytest.raises(ValueError):
        closed_form_three_stage(scheme_registry("ARK5J"), np.eye(4), np.eye(4), 1.0)


@given(st.integers(0, 10_000), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_amplification_is_linear_on_modes(seed, a, b):
    grid = GridSpec.unit_square(1.0)
    hc, hv = symbols(U3, grid, *random_phases(seed, 1))
    g = amplification_matrix(scheme_registry("ARK3J"), hc, hv, None, 0.02)[0]
    r = np.random.default_rng(seed)
    x, y = r.standard_normal(4), r.standard_normal(4)
    np.testing.assert_allclose(g @ (a * x + b * y), a * (g @ x) + b * (g @ y), atol=1e-12)


# --------------------------------------------------------------------------
# nonlinear step


def test_zero_residual_leaves_state_unchanged(rng):
    u = rng.standard_normal((3, 3, 4))
    out = nonlinear_pseudo_step(scheme_registry("ARK5J"), u, lambda v: (np.zeros_like(v), np.zeros_like(v)), None, 0.5)
    np.testing.assert_array_equal(out, u)


@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.sampled_from(["ARK3J", "ARK5J", "ERK52"]))
def test_nonlinear_step_on_linear_scalar_model(zc, zv, name):
    s = scheme_registry(name)
    out = nonlinear_pseudo_step(s, np.array([1.0]), lambda v: (zc * v, zv * v), None, 1.0)
    g = stage_recursion(s, np.array([[zc]]), np.array([[zv]]), 1.0)
    assert out[0] == pytest.approx(g[0, 0].real, rel=1e-12, abs=1e-12)


def test_nonlinear_step_applies_preconditioner():
    s = scheme_registry("AW3")
    w = 1.0 + 0.5 * 2.0  # W = 1 + eta * dt * z with z = 2, eta = 0.5, dt = 1
    out = nonlinear_pseudo_step(s, np.array([1.0]), lambda v: (2.0 * v, 0.0 * v), lambda r: r / w, 1.0)
    g = amplification_matrix(s, np.array([[2.0]]), np.zeros((1, 1)), np.array([[w]]), 1.0)
    assert out[0] == pytest.approx(g[0, 0].real, rel=1e-13)


def test_nonlinear_step_detects_divergence():
    with pytest.raises(DivergedState):
        nonlinear_pseudo_step(scheme_registry("ARK3J"), np.array([1.0]), lambda v: (v * np.inf, v), None, 1.0)
