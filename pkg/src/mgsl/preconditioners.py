"""Block SGS preconditioner built from a first-order flux-split Jacobian.

Two framings share one implementation:

* ``aerk``: ``L + D + U`` approximates the Jacobian ``J``;
* ``aw``:   ``L + D + U`` approximates ``I + eta*dt_pseudo*J``.

Fourier symbols live here next to the physical-space operator so that the
two can be checked against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularDiagonal
from .euler_core import split_jacobian
from .fourier_symbols import GridSpec


@dataclass(frozen=True)
class PreconditionerSpec:
    kind: str = "sgs"  # sgs | exact | jacobian | identity
    framing: str = "aerk"  # aerk | aw
    eta: float = 1.0
    d: float = 0.5
    dt: float | None = None  # physical time step; None means steady

    def __post_init__(self):
        if self.kind not in ("sgs", "exact", "jacobian", "identity"):
            raise ValueError(f"unknown preconditioner kind {self.kind!r}")
        if self.framing not in ("aerk", "aw"):
            raise ValueError(f"unknown framing {self.framing!r}")
        if not 0.0 <= self.d <= 1.0:
            raise ValueError("cutoff fraction d must lie in [0, 1]")
        if self.framing == "aw" and not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("physical time step must be positive")


@dataclass
class BlockTriple:
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray


def _scale(spec: PreconditionerSpec, pseudo_dt):
    """Factor multiplying the Jacobian part, and the identity shift."""
    if spec.framing == "aw":
        return spec.eta * np.asarray(pseudo_dt, dtype=float), 1.0
    return np.ones_like(np.asarray(pseudo_dt, dtype=float)), 0.0


def symbol_blocks(spec: PreconditionerSpec, state, grid: GridSpec, pseudo_dt, theta_x, theta_y) -> BlockTriple:
    """Fourier symbols of ``L``, ``D`` and ``U`` at the given phases."""
    tx, ty = np.broadcast_arrays(np.asarray(theta_x, float), np.asarray(theta_y, float))
    sa = split_jacobian(state, (1.0, 0.0), spec.d)
    sb = split_jacobian(state, (0.0, 1.0), spec.d)
    vol = grid.volume
    ex_m = np.asarray(np.exp(-1j * tx))[..., None, None]
    ey_m = np.asarray(np.exp(-1j * ty))[..., None, None]
    ex_p = np.asarray(np.exp(1j * tx))[..., None, None]
    ey_p = np.asarray(np.exp(1j * ty))[..., None, None]
    lo = -(grid.dy * sa.a_plus * ex_m + grid.dx * sb.a_plus * ey_m) / vol
    up = (grid.dy * sa.a_minus * ex_p + grid.dx * sb.a_minus * ey_p) / vol
    dj = (grid.dy * (sa.a_plus - sa.a_minus) + grid.dx * (sb.a_plus - sb.a_minus)) / vol
    if spec.dt is not None:
        dj = dj + 1.5 / spec.dt * np.eye(4)
    fac, shift = _scale(spec, pseudo_dt)
    fac = np.asarray(fac)[..., None, None]
    # D has no phase dependence; it keeps shape (4, 4) unless pseudo_dt varies.
    dg = (shift * np.eye(4) + fac * dj).astype(complex)
    return BlockTriple(fac * lo, dg, fac * up)


def sgs_symbol(spec: PreconditionerSpec, state, grid: GridSpec, pseudo_dt, theta_x, theta_y):
    """Symbol of ``(D + L) D^-1 (D + U)``."""
    b = symbol_blocks(spec, state, grid, pseudo_dt, theta_x, theta_y)
    dinv = _invert_diag(b.diag)
    # expanded form D + L + U + L D^-1 U avoids a solve per phase
    return b.diag + b.lower + b.upper + b.lower @ (dinv @ b.upper)


def _invert_diag(diag):
    diag = np.asarray(diag)
    scale = np.max(np.abs(diag), axis=(-2, -1))
    if np.any(~np.isfinite(scale)) or np.any(scale == 0.0):
        raise SingularDiagonal("diagonal symbol is zero or non-finite")
    if np.any(np.linalg.cond(diag) > 1e14):
        raise SingularDiagonal("diagonal symbol is numerically singular")
    try:
        return np.linalg.inv(diag)
    except np.linalg.LinAlgError as exc:
        raise SingularDiagonal(str(exc)) from exc


def split_operator_symbol(spec: PreconditionerSpec, state, grid: GridSpec, pseudo_dt, theta_x, theta_y):
    """Symbol of ``L + D + U`` itself, i.e. the flux-split operator solved exactly."""
    b = symbol_blocks(spec, state, grid, pseudo_dt, theta_x, theta_y)
    return b.lower + b.diag + b.upper


def exact_symbol(spec: PreconditionerSpec, pseudo_dt, system_symbol):
    """Preconditioner equal to the analysed operator itself.

    ``system_symbol`` is ``Hc + Hv``; in AW framing the returned matrix is
    ``I + eta*dt_pseudo*(Hc + Hv)``.
    """
    system_symbol = np.asarray(system_symbol)
    if spec.framing == "aw":
        fac = (spec.eta * np.asarray(pseudo_dt, float))[..., None, None]
        return np.eye(system_symbol.shape[-1]) + fac * system_symbol
    return system_symbol


def preconditioner_symbol(spec: PreconditionerSpec, state, grid, pseudo_dt, theta_x, theta_y, system_symbol=None):
    """Dispatch on ``spec.kind``; returns ``None`` for the identity."""
    if spec.kind == "identity":
        return None
    if spec.kind == "sgs":
        return sgs_symbol(spec, state, grid, pseudo_dt, theta_x, theta_y)
    if spec.kind == "exact":
        return split_operator_symbol(spec, state, grid, pseudo_dt, theta_x, theta_y)
    if system_symbol is None:
        raise ValueError("jacobian preconditioner needs the system symbol")
    return exact_symbol(spec, pseudo_dt, system_symbol)


# --------------------------------------------------------------------------
# physical space


def solve_block4(a, b):
    """Gaussian elimination with partial pivoting for ``a x = b``.

    Works on a single system or on stacks: ``a`` is ``(..., n, n)`` and ``b``
    is ``(..., n)`` or ``(..., n, k)``.
    """
    a, b = np.asarray(a), np.asarray(b)
    a = np.array(a, dtype=np.result_type(a, b, float), copy=True)
    b = np.array(b, dtype=a.dtype, copy=True)
    vec = b.ndim == a.ndim - 1
    if vec:
        b = b[..., None]
    n = a.shape[-1]
    if a.shape[-2] != n or b.shape[-2] != n:
        raise ValueError("shape mismatch in solve_block4")
    lead = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    a = np.array(np.broadcast_to(a, lead + a.shape[-2:]))
    b = np.array(np.broadcast_to(b, lead + b.shape[-2:]))
    scale = np.max(np.abs(a), axis=(-2, -1))
    tiny = 1e-14 * np.where(scale > 0, scale, 1.0)
    idx = np.indices(lead) if lead else ()
    for k in range(n):
        piv = k + np.argmax(np.abs(a[..., k:, k]), axis=-1)
        if np.any(np.abs(np.take_along_axis(a[..., :, k], piv[..., None], -1)[..., 0]) <= tiny):
            raise SingularDiagonal("zero pivot in 4x4 block solve")
        if lead:
            rows_k = a[(*idx, np.full(lead, k))].copy()
            a[(*idx, np.full(lead, k))] = a[(*idx, piv)]
            a[(*idx, piv)] = rows_k
            rk = b[(*idx, np.full(lead, k))].copy()
            b[(*idx, np.full(lead, k))] = b[(*idx, piv)]
            b[(*idx, piv)] = rk
        else:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        f = a[..., k + 1 :, k] / a[..., k, k][..., None]
        a[..., k + 1 :, :] -= f[..., :, None] * a[..., k, :][..., None, :]
        b[..., k + 1 :, :] -= f[..., :, None] * b[..., k, :][..., None, :]
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        acc = b[..., k, :] - np.einsum("...j,...jm->...m", a[..., k, k + 1 :], x[..., k + 1 :, :])
        x[..., k, :] = acc / a[..., k, k][..., None]
    return x[..., 0] if vec else x


_DIRS = ("east", "west", "north", "south")


class PhysicalSGS:
    """One symmetric block Gauss-Seidel sweep on a periodic structured level.

    The Jacobian approximation ``J = D + (neighbour couplings)`` is split by
    lexicographic cell index (``idx = i * n_y + j``): couplings to
    lower-indexed cells form ``L``, the rest ``U``.  On a periodic grid the
    wrap-around couplings therefore change sides, which keeps both triangular
    solves exact.  Solves run over anti-diagonal wavefronts ``i + j = const``;
    every dependency of a cell lies on an earlier wavefront, so the result is
    identical to a cell-by-cell lexicographic sweep.
    """

    def __init__(self, diag, couplings, n_x: int, n_y: int):
        self.n_x, self.n_y = n_x, n_y
        self.diag = diag  # (n_x, n_y, 4, 4)
        self.couplings = couplings  # dict dir -> (n_x, n_y, 4, 4)
        self.dinv = solve_block4(diag, np.broadcast_to(np.eye(4), diag.shape))
        ii, jj = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="ij")
        self._nb = {
            "east": ((ii + 1) % n_x, jj),
            "west": ((ii - 1) % n_x, jj),
            "north": (ii, (jj + 1) % n_y),
            "south": (ii, (jj - 1) % n_y),
        }
        me = ii * n_y + jj
        self._lower, self._upper = {}, {}
        for k, (ni, nj) in self._nb.items():
            other = ni * n_y + nj
            blk = couplings[k]
            self._lower[k] = np.where((other < me)[..., None, None], blk, 0.0)
            self._upper[k] = np.where((other > me)[..., None, None], blk, 0.0)
        # per wavefront: flat cell ids, neighbour ids (cell, dir) and masked blocks
        flat = me.ravel()
        wave = (ii + jj).ravel()
        order = np.argsort(wave, kind="stable")
        bounds = np.searchsorted(wave[order], np.arange(n_x + n_y))
        nb_flat = np.stack([(ni * n_y + nj).ravel() for ni, nj in self._nb.values()], axis=1)
        low = np.stack([self._lower[k].reshape(-1, 4, 4) for k in self._nb], axis=1)
        upp = np.stack([self._upper[k].reshape(-1, 4, 4) for k in self._nb], axis=1)
        dinv = self.dinv.reshape(-1, 4, 4)
        self._fronts = []
        for w in range(n_x + n_y - 1):
            cells = flat[order[bounds[w] : bounds[w + 1]]]
            self._fronts.append((cells, nb_flat[cells], low[cells], upp[cells], dinv[cells]))

    def _sweep(self, rhs, forward: bool):
        shape = rhs.shape
        b = rhs.reshape(-1, 4)
        x = np.zeros_like(b)
        fronts = self._fronts if forward else self._fronts[::-1]
        for cells, nbs, low, upp, dinv in fronts:
            blk = low if forward else upp
            acc = b[cells] - np.einsum("cdab,cdb->ca", blk, x[nbs])
            x[cells] = np.einsum("cab,cb->ca", dinv, acc)
        return x.reshape(shape)

    def apply(self, r):
        """Solve ``(D + L) D^-1 (D + U) x = r``."""
        r = np.asarray(r, dtype=float)
        z = self._sweep(r, forward=True)
        y = np.einsum("...ab,...b->...a", self.diag, z)
        return self._sweep(y, forward=False)

    __call__ = apply

    # dense assemblies (small grids only; used by tests)
    def _dense(self, blocks_lower, blocks_upper):
        n = self.n_x * self.n_y
        D = np.zeros((4 * n, 4 * n))
        L = np.zeros_like(D)
        U = np.zeros_like(D)
        for i in range(self.n_x):
            for j in range(self.n_y):
                c = i * self.n_y + j
                D[4 * c : 4 * c + 4, 4 * c : 4 * c + 4] = self.diag[i, j]
                for k, (ni, nj) in self._nb.items():
                    o = ni[i, j] * self.n_y + nj[i, j]
                    if o == c:
                        continue
                    L[4 * c : 4 * c + 4, 4 * o : 4 * o + 4] += blocks_lower[k][i, j]
                    U[4 * c : 4 * c + 4, 4 * o : 4 * o + 4] += blocks_upper[k][i, j]
        return D, L, U

    def dense(self):
        """Dense ``(D + L) D^-1 (D + U)`` with the triangular split used by :meth:`apply`."""
        D, L, U = self._dense(self._lower, self._upper)
        return (D + L) @ np.linalg.solve(D, D + U)

    def dense_shift_split(self):
        """Dense SGS product with ``L`` = west/south and ``U`` = east/north couplings.

        This is the circulant operator whose Fourier symbol is :func:`sgs_symbol`.
        """
        zero = {k: np.zeros_like(v) for k, v in self.couplings.items()}
        lower = dict(zero, west=self.couplings["west"], south=self.couplings["south"])
        upper = dict(zero, east=self.couplings["east"], north=self.couplings["north"])
        D, L, U = self._dense(lower, upper)
        return (D + L) @ np.linalg.solve(D, D + U)


def build_physical_sgs(spec: PreconditionerSpec, grid, cell_states, pseudo_dt=None) -> PhysicalSGS:
    """Assemble per-cell blocks from interface-averaged split Jacobians.

    ``grid`` needs ``dx``, ``dy``, ``n_x``, ``n_y``; ``cell_states`` has shape
    ``(n_x, n_y, 4)``.  ``pseudo_dt`` (scalar or per cell) is required for the
    W framing.
    """
    u = np.asarray(cell_states, dtype=float)
    n_x, n_y = u.shape[:2]
    vol = grid.dx * grid.dy
    ue = 0.5 * (u + np.roll(u, -1, axis=0))  # face i+1/2
    un = 0.5 * (u + np.roll(u, -1, axis=1))  # face j+1/2
    se = split_jacobian(ue, (1.0, 0.0), spec.d)
    sn = split_jacobian(un, (0.0, 1.0), spec.d)
    ap_e, am_e = se.a_plus, se.a_minus
    ap_w, am_w = np.roll(ap_e, 1, axis=0), np.roll(am_e, 1, axis=0)
    bp_n, bm_n = sn.a_plus, sn.a_minus
    bp_s, bm_s = np.roll(bp_n, 1, axis=1), np.roll(bm_n, 1, axis=1)
    # outward normals: west/south faces see the splits of -A, -B
    dj = (grid.dy * (ap_e - am_w) + grid.dx * (bp_n - bm_s)) / vol
    coup = {
        "east": grid.dy * am_e / vol,
        "west": -grid.dy * ap_w / vol,
        "north": grid.dx * bm_n / vol,
        "south": -grid.dx * bp_s / vol,
    }
    eye = np.broadcast_to(np.eye(4), dj.shape)
    if spec.dt is not None:
        dj = dj + 1.5 / spec.dt * eye
    if spec.framing == "aw":
        if pseudo_dt is None:
            raise ValueError("W framing needs the pseudo time step")
        fac = spec.eta * np.broadcast_to(np.asarray(pseudo_dt, float), (n_x, n_y))[..., None, None]
        dj = eye + fac * dj
        coup = {k: fac * v for k, v in coup.items()}
    return PhysicalSGS(dj, coup, n_x, n_y)
