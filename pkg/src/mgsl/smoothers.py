"""Smoother coefficient registry and stage-recursion engines.

The same low-storage recursion drives preconditioned additive Runge-Kutta
(ARK/ERK) and additive W (AW) smoothers; they differ only in which matrix is
inverted in front of the stage residual.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergedState, SingularPreconditioner, SingularStageMatrix, UnknownScheme


@dataclass(frozen=True)
class SmootherScheme:
    name: str
    alpha: tuple
    beta: tuple
    kind: str  # erk | ark | aw | rosenbrock

    def __post_init__(self):
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta must have the same length")
        if self.beta[0] != 1.0:
            raise ValueError("beta_1 must equal 1")

    @property
    def stages(self) -> int:
        return len(self.alpha)

    @property
    def additive(self) -> bool:
        return any(b != 1.0 for b in self.beta)

    def unsplit(self) -> "SmootherScheme":
        """Same alphas with every beta set to 1."""
        return replace(self, beta=(1.0,) * self.stages)


_ALPHA = {
    "3J": (0.1481, 2.0 / 5.0, 1.0),
    "5J": (1.0 / 4.0, 1.0 / 6.0, 3.0 / 8.0, 1.0 / 2.0, 1.0),
    "51": (0.0533, 0.1263, 0.2375, 0.4414, 1.0),
    "52": (0.0695, 0.1602, 0.2898, 0.5060, 1.0),
}
_BETA = {
    "3J": (1.0, 0.5, 0.5),
    # ARK51/ARK52 were not designed as additive schemes; they borrow ARK5J's betas.
    "5J": (1.0, 0.0, 0.56, 0.0, 0.44),
    "51": (1.0, 0.0, 0.56, 0.0, 0.44),
    "52": (1.0, 0.0, 0.56, 0.0, 0.44),
}


def _build_registry():
    reg = {}
    for key in _ALPHA:
        a, b = _ALPHA[key], _BETA[key]
        ones = (1.0,) * len(a)
        reg[f"ARK{key}"] = SmootherScheme(f"ARK{key}", a, b, "ark")
        reg[f"ERK{key}"] = SmootherScheme(f"ERK{key}", a, ones, "erk")
        reg[f"AW{key}"] = SmootherScheme(f"AW{key}", a, b, "aw")
        reg[f"W{key}"] = SmootherScheme(f"W{key}", a, ones, "aw")
        reg[f"AROS{key}"] = SmootherScheme(f"AROS{key}", a, b, "rosenbrock")
        reg[f"ROS{key}"] = SmootherScheme(f"ROS{key}", a, ones, "rosenbrock")
    # Short names used in the tables.
    reg["ERK3"] = replace(reg["ERK3J"], name="ERK3")
    reg["AW3"] = replace(reg["AW3J"], name="AW3")
    return reg


SCHEMES = _build_registry()


def scheme_registry(name: str) -> SmootherScheme:
    try:
        return SCHEMES[name.upper()]
    except KeyError:
        raise UnknownScheme(f"unknown smoother scheme {name!r}; known: {sorted(SCHEMES)}") from None


def _solve(P, X, exc):
    try:
        out = np.linalg.solve(P, X)
    except np.linalg.LinAlgError as err:
        raise exc(str(err)) from err
    if not np.all(np.isfinite(out)):
        raise exc("non-finite result from preconditioner solve")
    return out


def stage_recursion(scheme: SmootherScheme, hc, hv, pseudo_dt):
    """Amplification matrix of the low-storage recursion for (already preconditioned) ``hc``, ``hv``.

    ``hc`` and ``hv`` have shape ``(..., n, n)``; ``pseudo_dt`` is a scalar or
    broadcastable to the leading shape.
    """
    hc = np.asarray(hc)
    hv = np.asarray(hv)
    n = hc.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=hc.dtype), hc.shape)
    dts = np.asarray(pseudo_dt, dtype=float)[..., None, None]
    u = eye
    fc = hc
    fv = hv
    alpha, beta = scheme.alpha, scheme.beta
    for i in range(1, scheme.stages + 1):
        u = eye - alpha[i - 1] * dts * (fc + fv)
        if i == scheme.stages:
            break
        fc = hc @ u
        b = beta[i]
        fv = b * (hv @ u) + (1.0 - b) * fv
    return u


def amplification_matrix(scheme: SmootherScheme, hc, hv, precond_symbol, pseudo_dt):
    """``G`` with ``u^{k+1} = G u^k`` for the preconditioned recursion.

    ``precond_symbol`` is the matrix inverted in front of the stage residual
    (``P`` for ARK framing, ``W`` for AW framing); ``None`` means identity.
    """
    if precond_symbol is None:
        return stage_recursion(scheme, hc, hv, pseudo_dt)
    hc, hv = np.broadcast_arrays(np.asarray(hc), np.asarray(hv))
    both = _solve(precond_symbol, np.concatenate([hc, hv], axis=-1), SingularPreconditioner)
    n = hc.shape[-1]
    return stage_recursion(scheme, both[..., :n], both[..., n:], pseudo_dt)


def closed_form_three_stage(scheme: SmootherScheme, hcb, hvb, pseudo_dt):
    """Expanded 3-stage operator, written out term by term (reference for tests)."""
    if scheme.stages != 3:
        raise ValueError("closed form exists only for 3-stage schemes")
    n = hcb.shape[-1]
    eye = np.broadcast_to(np.eye(n, dtype=complex), hcb.shape)
    dts = np.asarray(pseudo_dt, dtype=float)[..., None, None]
    a1, a2, a3 = (dts * a for a in scheme.alpha)
    _, b2, b3 = scheme.beta
    inner = eye - a1 * (hcb + hvb)
    second = eye - a2 * ((hcb + b2 * hvb) @ inner + (1 - b2) * hvb)
    return eye - a3 * ((hcb + b3 * hvb) @ second + (1 - b3) * (b2 * hvb @ inner + (1 - b2) * hvb))


def rosenbrock_reference_matrix(scheme: SmootherScheme, hc, hv, eta: float, pseudo_dt):
    """Additive Rosenbrock amplification matrix with the exact stage matrix ``I + eta*dt*(hc+hv)``.

    Evaluated through the stage-derivative (Butcher) form rather than the
    low-storage form, so it serves as an independent check of the AW engine.
    """
    hc = np.asarray(hc)
    hv = np.asarray(hv)
    n = hc.shape[-1]
    s = scheme.stages
    eye = np.broadcast_to(np.eye(n, dtype=complex), hc.shape)
    dts = np.asarray(pseudo_dt, dtype=float)[..., None, None]
    W = eye + eta * dts * (hc + hv)
    ac, av = _butcher_arrays(scheme)
    kc, kv = [], []
    for i in range(s):
        arg = eye.copy()
        for j in range(i):
            arg = arg + dts * (ac[i, j] * kc[j] + av[i, j] * kv[j])
        # stage derivative splits into convective/dissipative parts
        k = -_solve(W, (hc + hv) @ arg, SingularStageMatrix)
        kc.append(-_solve(W, hc @ arg, SingularStageMatrix))
        kv.append(k - kc[-1])
    out = eye.copy()
    for j in range(s):
        out = out + dts * (ac[s, j] * kc[j] + av[s, j] * kv[j])
    return out


def _butcher_arrays(scheme: SmootherScheme):
    """Strictly lower-triangular stage coefficients (row ``s`` holds the update weights).

    Derived from the low-storage recursion: stage ``i`` evaluates at
    ``u - alpha_i dt (fc_{i-1} + fv_{i-1})``, with ``fv`` the beta-blended
    history of dissipative evaluations.
    """
    s = scheme.stages
    a, b = scheme.alpha, scheme.beta
    ac = np.zeros((s + 1, s))
    av = np.zeros((s + 1, s))
    # weights w[j] of fv_{i-1} on dissipative evaluations at stage j
    w = np.zeros(s)
    for i in range(1, s + 1):
        if i == 1:
            w[:] = 0.0
            w[0] = 1.0
        else:
            w = (1.0 - b[i - 1]) * w
            w[i - 1] += b[i - 1]
        ac[i, i - 1] = a[i - 1]
        av[i, :] = a[i - 1] * w
    return ac, av


def nonlinear_pseudo_step(scheme: SmootherScheme, u, residual_fn, precond_op=None, pseudo_dt=1.0):
    """One pseudo-time step of the low-storage recursion on a nonlinear residual.

    ``residual_fn(u)`` returns ``(fc, fv)``: convective part (with time
    derivative and source terms) and dissipative part.  ``precond_op(r)``
    applies the inverse of the stage matrix; ``None`` means identity.
    ``pseudo_dt`` is a scalar or broadcasts against ``u``.
    """
    u0 = np.asarray(u, dtype=float)
    dts = np.asarray(pseudo_dt, dtype=float)
    fc, fv = residual_fn(u0)
    ui = u0
    for i in range(1, scheme.stages + 1):
        rhs = fc + fv
        step = rhs if precond_op is None else precond_op(rhs)
        ui = u0 - scheme.alpha[i - 1] * dts * step
        if not np.all(np.isfinite(ui)):
            raise DivergedState(f"non-finite state after stage {i}")
        if i == scheme.stages:
            break
        fc_new, fv_new = residual_fn(ui)
        b = scheme.beta[i]
        fc = fc_new
        fv = b * fv_new + (1.0 - b) * fv
    return ui
