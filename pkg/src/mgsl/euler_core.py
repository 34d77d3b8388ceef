"""Frozen-state 2D Euler flux Jacobians, eigenvalue cutoff and flux-vector splitting.

All functions accept either a single conservative 4-vector or a stack of them
with shape ``(..., 4)``; matrix-valued results then have shape ``(..., 4, 4)``.
The scalar-state API (:class:`EulerState`) is a thin wrapper used by the
Fourier analysis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigendecompositionFailure, NonPhysicalState

GAMMA = 1.4


@dataclass(frozen=True)
class EulerState:
    """Conservative state ``(rho, m1, m2, rhoE)`` with derived primitives."""

    rho: float
    m1: float
    m2: float
    rhoE: float
    gamma: float = GAMMA

    @property
    def u(self) -> np.ndarray:
        return np.array([self.rho, self.m1, self.m2, self.rhoE])

    @property
    def v1(self) -> float:
        return self.m1 / self.rho

    @property
    def v2(self) -> float:
        return self.m2 / self.rho

    @property
    def vel2(self) -> float:
        return self.v1**2 + self.v2**2

    @property
    def p(self) -> float:
        return (self.gamma - 1.0) * (self.rhoE - 0.5 * self.rho * self.vel2)

    @property
    def a(self) -> float:
        return float(np.sqrt(self.gamma * self.p / self.rho))

    @property
    def H(self) -> float:
        return (self.rhoE + self.p) / self.rho

    @property
    def mach(self) -> float:
        return float(np.sqrt(self.vel2)) / self.a


def primitive_from_conservative(u, gamma: float = GAMMA) -> EulerState:
    u = np.asarray(u, dtype=float)
    if u.shape != (4,):
        raise ValueError(f"expected a conservative 4-vector, got shape {u.shape}")
    if not u[0] > 0.0:
        raise NonPhysicalState(f"density must be positive, got {u[0]!r}")
    state = EulerState(*(float(x) for x in u), gamma=gamma)
    if not state.p > 0.0:
        raise NonPhysicalState(f"pressure must be positive, got {state.p!r}")
    return state


def _as_u(state) -> np.ndarray:
    if isinstance(state, EulerState):
        return state.u
    return np.asarray(state, dtype=float)


def pressure(u, gamma: float = GAMMA) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    return (gamma - 1.0) * (u[..., 3] - 0.5 * (u[..., 1] ** 2 + u[..., 2] ** 2) / rho)


def check_physical(u, gamma: float = GAMMA) -> None:
    """Raise :class:`NonPhysicalState` if any cell has rho <= 0 or p <= 0 (or NaN)."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    if not np.all(rho > 0.0):
        raise NonPhysicalState("nonpositive or NaN density")
    if not np.all(pressure(u, gamma) > 0.0):
        raise NonPhysicalState("nonpositive or NaN pressure")


def euler_flux(u, normal, gamma: float = GAMMA) -> np.ndarray:
    """Inviscid flux ``f(u) . n``."""
    u = np.asarray(u, dtype=float)
    nx, ny = normal
    rho = u[..., 0]
    v1 = u[..., 1] / rho
    v2 = u[..., 2] / rho
    p = pressure(u, gamma)
    vn = v1 * nx + v2 * ny
    return np.stack(
        [rho * vn, u[..., 1] * vn + p * nx, u[..., 2] * vn + p * ny, (u[..., 3] + p) * vn],
        axis=-1,
    )


def flux_jacobian(state, normal, gamma: float = GAMMA) -> np.ndarray:
    """Analytic Jacobian ``A n1 + B n2`` of the Euler flux at a frozen state."""
    u = _as_u(state)
    nx, ny = normal
    rho = u[..., 0]
    v1 = u[..., 1] / rho
    v2 = u[..., 2] / rho
    p = pressure(u, gamma)
    H = (u[..., 3] + p) / rho
    vn = v1 * nx + v2 * ny
    phi = 0.5 * (gamma - 1.0) * (v1**2 + v2**2)
    g1 = gamma - 1.0
    zero = np.zeros_like(rho)
    J = np.empty(u.shape[:-1] + (4, 4))
    J[..., 0, :] = np.stack([zero, zero + nx, zero + ny, zero], axis=-1)
    J[..., 1, :] = np.stack(
        [phi * nx - v1 * vn, vn - (gamma - 2.0) * v1 * nx, v1 * ny - g1 * v2 * nx, zero + g1 * nx],
        axis=-1,
    )
    J[..., 2, :] = np.stack(
        [phi * ny - v2 * vn, v2 * nx - g1 * v1 * ny, vn - (gamma - 2.0) * v2 * ny, zero + g1 * ny],
        axis=-1,
    )
    J[..., 3, :] = np.stack(
        [vn * (phi - H), H * nx - g1 * v1 * vn, H * ny - g1 * v2 * vn, gamma * vn], axis=-1
    )
    return J


def eigensystem(state, normal, gamma: float = GAMMA):
    """Eigenvalues ``(vn-a, vn, vn, vn+a)`` and right-eigenvector matrix ``R``."""
    u = _as_u(state)
    nx, ny = normal
    rho = u[..., 0]
    v1 = u[..., 1] / rho
    v2 = u[..., 2] / rho
    p = pressure(u, gamma)
    a = np.sqrt(gamma * p / rho)
    H = (u[..., 3] + p) / rho
    vn = v1 * nx + v2 * ny
    vt = -v1 * ny + v2 * nx
    one = np.ones_like(rho)
    zero = np.zeros_like(rho)
    lam = np.stack([vn - a, vn, vn, vn + a], axis=-1)
    R = np.empty(u.shape[:-1] + (4, 4))
    R[..., :, 0] = np.stack([one, v1 - a * nx, v2 - a * ny, H - a * vn], axis=-1)
    R[..., :, 1] = np.stack([one, v1, v2, 0.5 * (v1**2 + v2**2)], axis=-1)
    R[..., :, 2] = np.stack([zero, zero - ny, zero + nx, vt], axis=-1)
    R[..., :, 3] = np.stack([one, v1 + a * nx, v2 + a * ny, H + a * vn], axis=-1)
    return lam, R, a


def apply_cutoff(lambda_abs, a, d):
    """Parabolic floor on eigenvalue moduli below ``a*d``.

    ``d = 0`` leaves the moduli untouched.  Written as ``lam * (lam / ad)`` so
    that the two branches agree bit for bit at ``lam == ad``.
    """
    lam = np.asarray(lambda_abs, dtype=float)
    ad = np.asarray(a, dtype=float) * d
    if np.all(ad == 0.0):
        out = lam.copy()
    else:
        safe = np.where(ad > 0.0, ad, 1.0)
        # the unselected branch may overflow for subnormal ad
        with np.errstate(over="ignore"):
            out = np.where((lam <= ad) & (ad > 0.0), 0.5 * (ad + lam * (lam / safe)), lam)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class JacobianSplit:
    a_plus: np.ndarray
    a_minus: np.ndarray
    normal: tuple


def split_jacobian(state, normal, d: float, gamma: float = GAMMA) -> JacobianSplit:
    """Split ``A_n = A+ + A-`` with cutoff-modified eigenvalue moduli.

    ``lam+- = (lam +- |lam|_cut) / 2``, assembled as ``R diag(lam+-) R^-1``.
    """
    lam, R, a = eigensystem(state, normal, gamma)
    lam_abs = apply_cutoff(np.abs(lam), a[..., None], d)
    try:
        Rinv = np.linalg.inv(R)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionFailure(str(exc)) from exc
    if not np.all(np.isfinite(Rinv)):
        raise EigendecompositionFailure("non-finite inverse eigenvector matrix")
    lp = 0.5 * (lam + lam_abs)
    lm = 0.5 * (lam - lam_abs)
    a_plus = (R * lp[..., None, :]) @ Rinv
    a_minus = (R * lm[..., None, :]) @ Rinv
    return JacobianSplit(a_plus, a_minus, tuple(float(c) for c in normal))


def average_state(u_left, u_right) -> np.ndarray:
    """Arithmetic interface average used by the physical-space preconditioner."""
    return 0.5 * (np.asarray(u_left, dtype=float) + np.asarray(u_right, dtype=float))


# Reference linearization points (Mach 0.8).
U1 = np.array([1.0, np.sqrt(2.0) / 2.0, np.sqrt(2.0) / 2.0, 3.290])  # alpha = 45 deg
U3 = np.array([1.0, 1.0, 0.0, 3.290])  # alpha = 0 deg
