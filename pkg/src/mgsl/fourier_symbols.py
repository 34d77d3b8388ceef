"""Fourier symbols of the linearized JST finite-volume operator.

Every symbol function is vectorized: phase arguments may be scalars or
equal-shape arrays, and matrix results carry the phase shape in front of the
trailing ``(4, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .euler_core import EulerState, flux_jacobian

SENSOR_REGULARIZER = 1e-3


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic cartesian lattice with ``n_x * n_y`` cells of size ``dx * dy``."""

    dx: float
    dy: float
    n_x: int = 8
    n_y: int = 8

    def __post_init__(self):
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("mesh widths must be positive")
        for n in (self.n_x, self.n_y):
            if n < 2 or n % 2:
                raise ValueError("cell counts must be even and >= 2")

    @property
    def aspect_ratio(self) -> float:
        return max(self.dx, self.dy) / min(self.dx, self.dy)

    @property
    def volume(self) -> float:
        return self.dx * self.dy

    @property
    def min_width(self) -> float:
        return min(self.dx, self.dy)

    @classmethod
    def unit_square(cls, ar: float, n_x: int = 8) -> "GridSpec":
        """``n_x x (n_x*AR)`` cells on the unit square, so cells are thin in y.

        This is the lattice used for all tabulated analysis results.
        """
        n_y = int(round(n_x * ar))
        return cls(dx=1.0 / n_x, dy=1.0 / n_y, n_x=n_x, n_y=n_y)

    @classmethod
    def stretched(cls, ar: float, dx: float = 1.0 / 8, n_x: int = 8, n_y: int | None = None) -> "GridSpec":
        """Cells elongated in y (``dy = AR * dx``)."""
        return cls(dx=dx, dy=ar * dx, n_x=n_x, n_y=n_y if n_y is not None else int(round(n_x * ar)))

    def phases(self):
        """All lattice phase pairs, flattened, ``k`` in ``(-n/2, n/2]``."""
        kx = np.arange(-self.n_x // 2 + 1, self.n_x // 2 + 1)
        ky = np.arange(-self.n_y // 2 + 1, self.n_y // 2 + 1)
        tx, ty = np.meshgrid(2 * np.pi * kx / self.n_x, 2 * np.pi * ky / self.n_y, indexing="ij")
        return tx.ravel(), ty.ravel()


@dataclass(frozen=True)
class PhasePair:
    theta_x: float
    theta_y: float

    def on_lattice(self, n_x: int, n_y: int, tol: float = 1e-12) -> bool:
        ok = True
        for theta, n in ((self.theta_x, n_x), (self.theta_y, n_y)):
            k = theta * n / (2 * np.pi)
            ok &= abs(k - round(k)) < tol and -n / 2 < round(k) <= n / 2
        return bool(ok)


def shift_symbol(theta, power: int = 1):
    """Symbol ``e^{i*power*theta}`` of the shift operator ``E^power``."""
    return np.exp(1j * power * np.asarray(theta, dtype=float))


def second_difference_symbol(theta):
    """Symbol of ``-E + 2 - E^-1``: ``2 - 2 cos(theta)``, always >= 0."""
    return 2.0 - 2.0 * np.cos(theta)


def fourth_difference_symbol(theta):
    """Symbol of ``E^2 - 4E + 6 - 4E^-1 + E^-2``: ``(2 - 2 cos(theta))**2``."""
    return 6.0 - 8.0 * np.cos(theta) + 2.0 * np.cos(2.0 * theta)


def _mat(m, shape):
    return np.broadcast_to(m, tuple(shape) + (4, 4))


def convective_symbol(state: EulerState, grid: GridSpec, theta_x, theta_y, dt: float | None = None):
    """Central-difference convective symbol; ``dt`` adds the BDF-2 diagonal ``3/(2 dt)``."""
    tx, ty = np.broadcast_arrays(np.asarray(theta_x, float), np.asarray(theta_y, float))
    A = flux_jacobian(state, (1.0, 0.0))
    B = flux_jacobian(state, (0.0, 1.0))
    # (E^+1 - E^-1) = 2i sin(theta)
    sx = np.asarray(1j * np.sin(tx) / grid.dx)[..., None, None]
    sy = np.asarray(1j * np.sin(ty) / grid.dy)[..., None, None]
    H = sx * A + sy * B
    if dt is not None:
        H = H + 1.5 / dt * np.eye(4)
    return H


def _sensor_components(state: EulerState, denominator: str):
    g1 = state.gamma - 1.0
    if denominator == "printed":
        kd = 2.0
    elif denominator == "consistent":
        kd = 0.5
    else:
        raise ValueError(f"unknown sensor denominator variant {denominator!r}")
    num = g1 * (state.rhoE - 0.5 * state.vel2 * state.rho)
    den = g1 * (state.rhoE - kd * state.vel2 * state.rho)
    return num, den


def sensor_symbol(state: EulerState, theta, denominator: str = "printed", regularizer: float = SENSOR_REGULARIZER):
    """Pressure-sensor symbol clamped to ``[0, 0.25]``.

    The shifted pressure second difference and sum are evaluated with
    ``E + E^-1 -> 2 cos(theta)`` and the modulus of the ratio is taken.
    """
    theta = np.asarray(theta, dtype=float)
    num_c, den_c = _sensor_components(state, denominator)
    c = np.cos(theta)
    num = num_c * (2.0 * c - 2.0)
    den = den_c * (2.0 * c + 2.0) + regularizer
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.abs(num / den)
    s = np.where(np.isfinite(s), s, 0.25)
    s = np.where(num == 0.0, 0.0, s)
    return np.minimum(0.25, s)


def spectral_radii(state: EulerState, correction: bool = False):
    """Directional scaling ``r = |v_n| + a``, optionally with the multidimensional correction."""
    rx = abs(state.v1) + state.a
    ry = abs(state.v2) + state.a
    if correction:
        rx, ry = rx * (1.0 + (ry / rx) ** (2.0 / 3.0)), ry * (1.0 + (rx / ry) ** (2.0 / 3.0))
    return rx, ry


def dissipation_coefficients(
    state: EulerState,
    theta,
    direction: str = "x",
    coupling: str = "per-direction",
    denominator: str = "printed",
    correction: bool = False,
    theta_other=None,
    sensor: bool = True,
):
    """``(eps2, eps4)`` for one stencil direction.

    ``sensor=False`` zeroes the sensor; this is the small-amplitude limit of
    the nonlinear scheme, where the sensor itself is a perturbation quantity.

    With ``coupling='shared'`` both directions use the x-direction spectral
    radius and the sensor of the x phase; ``theta`` is then taken as the x phase
    regardless of ``direction`` (pass it through ``theta`` when calling for y).
    """
    rx, ry = spectral_radii(state, correction)
    if coupling == "per-direction":
        r = rx if direction == "x" else ry
    elif coupling == "shared":
        r = rx
    else:
        raise ValueError(f"unknown coupling {coupling!r}")
    s = sensor_symbol(state, theta, denominator) if sensor else np.zeros_like(np.asarray(theta, float))
    eps2 = r * s
    eps4 = np.maximum(0.0, r / 32.0 - 2.0 * eps2)
    return eps2, eps4


def dissipation_matrix(state: EulerState, form: str = "printed") -> np.ndarray:
    """``M`` mapping conservative to (rho, m1, m2, rhoH) differences.

    ``printed`` freezes ``|v|^2`` in ``rhoH = gamma*rhoE - (gamma-1)|v|^2 rho/2``;
    ``exact`` is the true Jacobian ``d(rhoH)/du`` and is what the nonlinear
    residual linearizes to.
    """
    g1 = state.gamma - 1.0
    M = np.eye(4)
    M[3, 3] = state.gamma
    if form == "printed":
        M[3, 0] = -g1 * state.vel2 / 2.0
    elif form == "exact":
        M[3, 0] = g1 * state.vel2 / 2.0
        M[3, 1] = -g1 * state.v1
        M[3, 2] = -g1 * state.v2
    else:
        raise ValueError(f"unknown dissipation matrix form {form!r}")
    return M


def viscous_symbol(
    state: EulerState,
    grid: GridSpec,
    theta_x,
    theta_y,
    coupling: str = "per-direction",
    denominator: str = "printed",
    correction: bool = False,
    sensor: bool = True,
    m_form: str = "printed",
):
    """Artificial-dissipation symbol ``M * (scalar >= 0)``."""
    tx, ty = np.broadcast_arrays(np.asarray(theta_x, float), np.asarray(theta_y, float))
    e2x, e4x = dissipation_coefficients(state, tx, "x", coupling, denominator, correction, sensor=sensor)
    if coupling == "shared":
        e2y, e4y = e2x, e4x
    else:
        e2y, e4y = dissipation_coefficients(state, ty, "y", coupling, denominator, correction, sensor=sensor)
    scal = (
        (e2x * second_difference_symbol(tx) + e4x * fourth_difference_symbol(tx)) / grid.dx
        + (e2y * second_difference_symbol(ty) + e4y * fourth_difference_symbol(ty)) / grid.dy
    )
    return np.asarray(scal)[..., None, None] * dissipation_matrix(state, m_form)
