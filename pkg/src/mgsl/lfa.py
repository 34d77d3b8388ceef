"""Discrete Fourier analysis of the smoothers on a periodic ``n_x x n_y`` lattice.

The iteration matrix block-diagonalizes into one 4x4 symbol ``G(theta)`` per
lattice phase.  The amplification factor is the largest spectral radius over
the lattice, the smoothing factor the largest over the high-frequency subset.

Evaluation is exact (every lattice phase is accounted for) but avoids most
eigenvalue solves: ``rho(G) <= ||G^k||^(1/k)`` for any induced norm, so a
phase whose cheap power bound lies below the running maximum cannot change
the result and is skipped.  Because ``G(-theta) = conj(G(theta))`` only half
of the lattice is swept by default.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NonConvergence
from .euler_core import U1, U3, primitive_from_conservative
from .fourier_symbols import GridSpec, convective_symbol, viscous_symbol
from .preconditioners import PreconditionerSpec, preconditioner_symbol
from .smoothers import amplification_matrix, rosenbrock_reference_matrix, scheme_registry

UNBOUNDED = math.inf
STABILITY_TOL = 1e-8
CSTAR_CEILING = 1e6

STATES = {"u1": tuple(U1), "u3": tuple(U3)}
HF_SETS = ("max", "x", "y", "min")
_CHUNK = 16384


@dataclass(frozen=True)
class AnalysisConfig:
    """Full parameter bundle for one Fourier-analysis evaluation.

    ``dt_rule`` fixes the physical step in unsteady mode: ``min-width`` uses
    ``c * min(dx, dy)``; ``x-width-over-r`` uses ``c * dx / (|v1| + a)``.
    The pseudo step is always ``cstar * min(dx, dy)``.
    """

    scheme: str = "ARK3J"
    precond: str = "identity"  # identity | sgs | exact | jacobian
    ar: float = 1.0
    cstar: float = 1.0
    d: float = 0.5
    eta: float = 0.8
    c: float = 200.0
    mode: str = "unsteady"  # steady | unsteady
    state: tuple = tuple(U3)
    n_x: int = 8
    n_y: int | None = None  # default 8 * AR
    coupling: str = "per-direction"
    sensor_denominator: str = "printed"
    correction: bool = False
    m_form: str = "printed"  # printed | exact
    hf_set: str = "max"
    zero_mode: str = "auto"  # auto | include | exclude
    dt_rule: str = "min-width"
    lattice: str = "unit-square"  # unit-square | stretched
    sensor: bool = True
    half_lattice: bool = True

    def __post_init__(self):
        scheme_registry(self.scheme)
        if self.precond not in ("identity", "sgs", "exact", "jacobian"):
            raise ConfigError(f"unknown preconditioner {self.precond!r}")
        if self.mode not in ("steady", "unsteady"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.m_form not in ("printed", "exact"):
            raise ConfigError(f"unknown dissipation matrix form {self.m_form!r}")
        if self.hf_set not in HF_SETS:
            raise ConfigError(f"unknown high-frequency set {self.hf_set!r}")
        if self.zero_mode not in ("auto", "include", "exclude"):
            raise ConfigError(f"unknown zero-mode policy {self.zero_mode!r}")
        if self.lattice not in ("unit-square", "stretched"):
            raise ConfigError(f"unknown lattice {self.lattice!r}")
        if self.dt_rule not in ("min-width", "x-width-over-r"):
            raise ConfigError(f"unknown time-step rule {self.dt_rule!r}")
        if not self.ar >= 1.0:
            raise ConfigError("aspect ratio must be >= 1")
        if not self.cstar >= 0.0:
            raise ConfigError("cstar must be nonnegative")
        if not 0.0 <= self.d <= 1.0:
            raise ConfigError("d must lie in [0, 1]")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        if self.mode == "unsteady" and not self.c > 0.0:
            raise ConfigError("physical CFL c must be positive")
        if len(self.state) != 4:
            raise ConfigError("state must be a conservative 4-vector")

    def with_(self, **changes) -> "AnalysisConfig":
        return replace(self, **changes)

    @property
    def scheme_obj(self):
        return scheme_registry(self.scheme)

    @property
    def framing(self) -> str:
        return "aw" if self.scheme_obj.kind in ("aw", "rosenbrock") else "aerk"

    def grid(self) -> GridSpec:
        if self.lattice == "stretched":
            # solver geometry: dy = AR * dx, n_x * n_y cells
            n_y = self.n_y if self.n_y is not None else self.n_x
            return GridSpec(dx=1.0 / self.n_x, dy=self.ar / self.n_x, n_x=self.n_x, n_y=n_y)
        if self.n_y is None:
            return GridSpec.unit_square(self.ar, self.n_x)
        return GridSpec(dx=1.0 / self.n_x, dy=1.0 / self.n_y, n_x=self.n_x, n_y=self.n_y)

    def euler_state(self):
        return primitive_from_conservative(self.state)

    def physical_dt(self, grid: GridSpec | None = None):
        if self.mode == "steady":
            return None
        grid = grid or self.grid()
        if self.dt_rule == "min-width":
            return self.c * grid.min_width
        st = self.euler_state()
        return self.c * grid.dx / (abs(st.v1) + st.a)

    def pseudo_dt(self, grid: GridSpec | None = None) -> float:
        grid = grid or self.grid()
        return self.cstar * grid.min_width

    def exclude_zero(self) -> bool:
        if self.zero_mode == "auto":
            return self.mode == "steady"
        return self.zero_mode == "exclude"

    def precond_spec(self, grid: GridSpec | None = None) -> PreconditionerSpec:
        kind = "identity" if self.precond == "identity" else self.precond
        return PreconditionerSpec(kind=kind, framing=self.framing, eta=self.eta, d=self.d, dt=self.physical_dt(grid))


@dataclass(frozen=True)
class AnalysisResult:
    amplification_factor: float
    smoothing_factor: float
    stable: bool
    worst_phase: tuple = (0, 0)  # integer wavenumbers (k_x, k_y)
    worst_hf_phase: tuple = (0, 0)
    aborted: bool = False
    eigen_solves: int = 0


@dataclass(frozen=True)
class OptimumResult:
    cstar: float
    eta: float
    amplification_factor: float
    smoothing_factor: float
    evaluated: int = 0
    found: bool = True


@dataclass(frozen=True)
class SpectrumRecord:
    theta_x: float
    theta_y: float
    eigenvalues: tuple
    rho: float


# --------------------------------------------------------------------------
# spectral radius


def spectral_radius_4x4(m) -> float:
    """Largest eigenvalue modulus of a single 4x4 complex matrix (LAPACK QR)."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    try:
        ev = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    return float(np.max(np.abs(ev)))


def spectral_radii(stack) -> np.ndarray:
    """Vectorized spectral radius over a ``(..., n, n)`` stack; non-finite matrices give ``inf``."""
    stack = np.asarray(stack)
    lead = stack.shape[:-2]
    flat = stack.reshape((-1,) + stack.shape[-2:])
    out = np.full(flat.shape[0], np.inf)
    ok = np.all(np.isfinite(flat), axis=(-2, -1))
    if np.any(ok):
        try:
            ev = np.linalg.eigvals(flat[ok])
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(str(exc)) from exc
        out[ok] = np.max(np.abs(ev), axis=-1)
    return out.reshape(lead)


def power_bound(stack, squarings: int = 5) -> np.ndarray:
    """Upper bound ``||G^(2^q)||_inf^(1/2^q) >= rho(G)``, evaluated with rescaling."""
    m = np.asarray(stack)
    logs = np.zeros(m.shape[:-2])
    with np.errstate(all="ignore"):
        for _ in range(squarings):
            s = np.max(np.sum(np.abs(m), axis=-1), axis=-1)
            s = np.where((s > 0) & np.isfinite(s), s, 1.0)
            m = m / s[..., None, None]
            logs = 2.0 * (logs + np.log(s))
            m = m @ m
        top = np.max(np.sum(np.abs(m), axis=-1), axis=-1)
        bound = np.exp((np.log(top) + logs) / 2.0**squarings)
    bound = np.where(np.isfinite(bound), bound, np.inf)
    # rounding in the squarings; the margin keeps the bound one-sided
    return bound * (1.0 + 1e-9)


# --------------------------------------------------------------------------
# lattice


def lattice_wavenumbers(grid: GridSpec, half: bool = False):
    """Integer wavenumbers ``k in (-n/2, n/2]``, optionally one per conjugate pair."""
    return _wavenumbers(grid.n_x, grid.n_y, half)


@lru_cache(maxsize=8)
def _wavenumbers(n_x: int, n_y: int, half: bool):
    kx, ky = _build_wavenumbers(n_x, n_y, half)
    kx.flags.writeable = False
    ky.flags.writeable = False
    return kx, ky


def _build_wavenumbers(n_x: int, n_y: int, half: bool):
    kx = np.arange(-n_x // 2 + 1, n_x // 2 + 1)
    ky = np.arange(-n_y // 2 + 1, n_y // 2 + 1)
    KX, KY = np.meshgrid(kx, ky, indexing="ij")
    KX, KY = KX.ravel(), KY.ravel()
    if not half:
        return KX, KY
    # -k folded back into (-n/2, n/2]; keep the lexicographically larger of each pair
    ckx = np.where(KX == n_x // 2, KX, -KX)
    cky = np.where(KY == n_y // 2, KY, -KY)
    keep = (KY > cky) | ((KY == cky) & (KX >= ckx))
    return KX[keep], KY[keep]


def _phases(grid: GridSpec, kx, ky):
    return 2 * np.pi * kx / grid.n_x, 2 * np.pi * ky / grid.n_y


def hf_mask(hf_set: str, grid: GridSpec, kx, ky) -> np.ndarray:
    # integer test: |theta| >= pi/2  <=>  4|k| >= n
    ax = 4 * np.abs(kx) >= grid.n_x
    ay = 4 * np.abs(ky) >= grid.n_y
    if hf_set == "max":
        return ax | ay
    if hf_set == "x":
        return ax
    if hf_set == "y":
        return ay
    return ax & ay


class _Operators:
    """Phase-independent ingredients of ``G`` for one configuration."""

    def __init__(self, config: AnalysisConfig):
        self.config = config
        self.grid = config.grid()
        self.state = config.euler_state()
        self.dt = config.physical_dt(self.grid)
        self.dts = config.pseudo_dt(self.grid)
        self.scheme = config.scheme_obj
        self.spec = config.precond_spec(self.grid)

    def matrices(self, kx, ky):
        cfg = self.config
        tx, ty = _phases(self.grid, kx, ky)
        hc = convective_symbol(self.state, self.grid, tx, ty, self.dt)
        hv = viscous_symbol(
            self.state, self.grid, tx, ty, cfg.coupling, cfg.sensor_denominator, cfg.correction,
            sensor=cfg.sensor,
            m_form=cfg.m_form,
        )
        if self.scheme.kind == "rosenbrock":
            return rosenbrock_reference_matrix(self.scheme, hc, hv, cfg.eta, self.dts)
        if cfg.precond == "identity":
            precond = None
        else:
            precond = preconditioner_symbol(self.spec, self.state, self.grid, self.dts, tx, ty, hc + hv)
        return amplification_matrix(self.scheme, hc, hv, precond, self.dts)


# Wavenumbers that were maximizers in earlier evaluations of a similar
# configuration.  They are swept first so that searches abort early; the
# cache only affects speed, never results.
_PROBES: dict = {}
_PROBE_LIMIT = 256


def _probe_key(config: AnalysisConfig):
    return replace(config, cstar=0.0, eta=0.0)


def _remember(config, phases):
    key = _probe_key(config)
    old = _PROBES.get(key, [])
    merged = list(dict.fromkeys([p for p in phases if p is not None] + old))
    _PROBES[key] = merged[:_PROBE_LIMIT]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MGSL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class _Running:
    amp: float = 0.0
    hf: float = 0.0
    amp_at: tuple | None = None
    hf_at: tuple | None = None
    solves: int = 0
    aborted: bool = False
    seen: list = field(default_factory=list)


def _sweep(config, need_amp=True, need_hf=True, stop_amp=None, stop_hf=None, stride=1) -> AnalysisResult:
    """Core lattice sweep; ``stop_*`` abort as soon as a running maximum exceeds it.

    ``stride > 1`` restricts the sweep to ``ky % stride == 0`` plus the cached
    probe modes, which gives a necessary (not sufficient) stability test.
    """
    ops = _Operators(config)
    grid = ops.grid
    kx, ky = lattice_wavenumbers(grid, half=config.half_lattice)
    hf = hf_mask(config.hf_set, grid, kx, ky)
    use = np.ones(kx.shape, bool)
    if config.exclude_zero():
        use &= ~((kx == 0) & (ky == 0))

    # excluded modes are never formed: the preconditioner may be singular there
    order = np.nonzero(use)[0]
    first = _locate(kx, ky, grid, _PROBES.get(_probe_key(config), []))
    first = first[use[first]]
    if stride > 1:
        order = order[ky % stride == 0]
    if first.size:
        rest = np.setdiff1d(order, first)
        chunks = [first] + [rest[i : i + _CHUNK] for i in range(0, rest.size, _CHUNK)]
    else:
        chunks = [order[i : i + _CHUNK] for i in range(0, order.size, _CHUNK)]

    run = _Running()

    def evaluate(idx, amp_floor, hf_floor):
        G = ops.matrices(kx[idx], ky[idx])
        b = power_bound(G)
        u = use[idx]
        h = hf[idx] & u
        cand = np.zeros(idx.size, bool)
        if need_amp:
            cand |= u & (b > amp_floor)
        if need_hf:
            cand |= h & (b > hf_floor)
        rho = np.zeros(idx.size)
        if np.any(cand):
            rho[cand] = spectral_radii(G[cand])
        return idx, rho, cand

    def absorb(idx, rho, cand):
        run.solves += int(cand.sum())
        u = use[idx] & cand
        h = hf[idx] & u
        if need_amp and np.any(u):
            j = np.argmax(np.where(u, rho, -np.inf))
            if rho[j] > run.amp or run.amp_at is None:
                run.amp, run.amp_at = float(rho[j]), (int(kx[idx[j]]), int(ky[idx[j]]))
        if need_hf and np.any(h):
            j = np.argmax(np.where(h, rho, -np.inf))
            if rho[j] > run.hf or run.hf_at is None:
                run.hf, run.hf_at = float(rho[j]), (int(kx[idx[j]]), int(ky[idx[j]]))
        if stop_amp is not None and run.amp > stop_amp:
            run.aborted = True
        if stop_hf is not None and run.hf > stop_hf:
            run.aborted = True

    nthreads = _threads()
    if nthreads == 1 or len(chunks) == 1:
        for idx in chunks:
            absorb(*evaluate(idx, run.amp, run.hf))
            if run.aborted:
                break
    else:
        # first chunk alone seeds the floors; the rest run in parallel batches
        absorb(*evaluate(chunks[0], run.amp, run.hf))
        rest = chunks[1:]
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            for start in range(0, len(rest), nthreads):
                if run.aborted:
                    break
                batch = rest[start : start + nthreads]
                fa, fh = run.amp, run.hf
                for out in pool.map(lambda i: evaluate(i, fa, fh), batch):
                    absorb(*out)

    if stride == 1:
        _remember(config, [run.amp_at, run.hf_at])
    amp = run.amp if need_amp else math.nan
    sm = run.hf if need_hf else math.nan
    stable = bool(need_amp and not run.aborted and run.amp <= 1.0 + STABILITY_TOL)
    return AnalysisResult(
        amplification_factor=amp,
        smoothing_factor=sm,
        stable=stable,
        worst_phase=run.amp_at or (0, 0),
        worst_hf_phase=run.hf_at or (0, 0),
        aborted=run.aborted,
        eigen_solves=run.solves,
    )


def _locate(kx, ky, grid, probes):
    """Positions of the probe wavenumbers within ``(kx, ky)``."""
    if not probes:
        return np.array([], dtype=int)
    width = 4 * grid.n_y
    code = kx.astype(np.int64) * width + ky.astype(np.int64)
    pk = np.asarray(probes, dtype=np.int64)
    return np.nonzero(np.isin(code, pk[:, 0] * width + pk[:, 1]))[0]


# --------------------------------------------------------------------------
# public analysis entry points


def analyze(config: AnalysisConfig) -> AnalysisResult:
    """Amplification and smoothing factor in one sweep."""
    return _sweep(config)


def amplification_factor(config: AnalysisConfig) -> float:
    return _sweep(config, need_hf=False).amplification_factor


def smoothing_factor(config: AnalysisConfig) -> float:
    return _sweep(config, need_amp=False).smoothing_factor


def is_stable(config: AnalysisConfig, tol: float = STABILITY_TOL) -> bool:
    r = _sweep(config, need_hf=False, stop_amp=1.0 + tol)
    return (not r.aborted) and r.amplification_factor <= 1.0 + tol


def _floor_sig(x: float, digits: int) -> float:
    if x <= 0:
        return 0.0
    e = math.floor(math.log10(x)) - (digits - 1)
    q = 10.0**e
    return math.floor(x / q + 1e-9) * q


_SUBLATTICE_MODES = 20000


def max_stable_cfl(
    config: AnalysisConfig,
    ceiling: float = CSTAR_CEILING,
    tol: float = STABILITY_TOL,
    digits: int = 2,
) -> float:
    """Largest stable ``cstar`` (doubling from 1, then bisection to ``digits`` significant digits).

    Returns :data:`UNBOUNDED` when the scheme is still stable at ``ceiling``.
    The result is rounded down, so it is itself a stable value whenever
    stability is monotone on the bracket.

    On large lattices the bisection runs on a strided sublattice plus the
    cached worst modes; the candidate is then checked on the full lattice and
    any violating mode joins the cache before the search repeats.  The answer
    equals that of a full-lattice bisection.
    """
    n_modes = config.grid().n_x * config.grid().n_y
    stride = max(1, int(math.ceil(n_modes / _SUBLATTICE_MODES)))
    for _ in range(64):
        c = _bisect_cfl(config, ceiling, tol, digits, stride)
        if stride == 1:
            return c
        probe = ceiling if c == UNBOUNDED else c
        if probe > 0 and is_stable(config.with_(cstar=float(probe)), tol):
            return c
        if probe == 0:
            return c
    raise NonConvergence("stability search did not settle on the full lattice")


def _bisect_cfl(config, ceiling, tol, digits, stride):
    def ok(c):
        res = _sweep(config.with_(cstar=float(c)), need_hf=False, stop_amp=1.0 + tol, stride=stride)
        return res.stable

    if ok(1.0):
        lo = 1.0
        while True:
            nxt = min(2.0 * lo, ceiling)
            if ok(nxt):
                lo = nxt
                if lo >= ceiling:
                    return UNBOUNDED
            else:
                hi = nxt
                break
    else:
        lo, hi = 0.0, 1.0
    for _ in range(80):
        ref = lo if lo > 0 else hi
        unit = 10.0 ** (math.floor(math.log10(ref)) - (digits - 1))
        if hi - lo <= 0.5 * unit:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return _floor_sig(lo, digits)


def default_cstar_grid(ceiling: float = CSTAR_CEILING) -> list:
    """Integers 1..20, then 1-9 times each decade up to ``ceiling``."""
    vals = set(float(i) for i in range(1, 21))
    e = 1
    while 10.0**e <= ceiling:
        for m in range(1, 10):
            v = m * 10.0**e
            if v <= ceiling:
                vals.add(v)
        e += 1
    return sorted(vals)


def default_eta_grid() -> list:
    return [round(0.1 * i, 1) for i in range(1, 11)]


def optimize(
    config: AnalysisConfig,
    cstar_grid=None,
    eta_grid=None,
    require_stable: bool = True,
    tol: float = STABILITY_TOL,
) -> OptimumResult:
    """Exhaustive grid search minimizing the smoothing factor.

    Ties go to the smaller ``cstar``, then the smaller ``eta``.  With
    ``require_stable`` a candidate only counts if its amplification factor is
    at most ``1 + tol``.  ``eta`` is only searched for W-type schemes.
    """
    cstars = sorted(float(c) for c in (cstar_grid if cstar_grid is not None else default_cstar_grid()))
    if config.framing == "aw":
        etas = sorted(float(e) for e in (eta_grid if eta_grid is not None else default_eta_grid()))
    else:
        etas = [config.eta]
    if not cstars or not etas:
        raise ConfigError("search grids must be nonempty")
    points = [(cs, eta) for cs in cstars for eta in etas]
    n_modes = config.grid().n_x * config.grid().n_y
    stride = max(1, int(math.ceil(n_modes / _BOUND_MODES)))
    if stride == 1:
        best = _scan_points(config, points, require_stable, tol)
    else:
        best = _branch_and_bound(config, points, require_stable, tol, stride)
    if best is None:
        return OptimumResult(math.nan, math.nan, math.nan, math.nan, len(points), found=False)
    return replace(best, evaluated=len(points))


# sublattice size for the lower bounds in large optimizations
_BOUND_MODES = 2000


def _scan_points(config, points, require_stable, tol):
    best = None
    for cs, eta in points:
        cfg = config.with_(cstar=cs, eta=eta)
        # strict improvement only, so the first (smallest) point wins ties
        stop = None if best is None else best.smoothing_factor
        r = _sweep(cfg, need_amp=False, stop_hf=stop)
        if r.aborted or (best is not None and not r.smoothing_factor < best.smoothing_factor):
            continue
        a = _sweep(cfg, need_hf=False, stop_amp=(1.0 + tol) if require_stable else None)
        if require_stable and (a.aborted or a.amplification_factor > 1.0 + tol):
            continue
        best = OptimumResult(cs, eta, a.amplification_factor, r.smoothing_factor)
    return best


def _branch_and_bound(config, points, require_stable, tol, stride):
    """Exact search for large lattices.

    A sublattice smoothing factor is a lower bound on the full one, and a
    sublattice instability is a full-lattice instability, so candidates are
    visited in ascending bound order and the search stops once the bound
    exceeds the best full value.
    """
    stop_amp = (1.0 + tol) if require_stable else None
    bounds = []
    for pos, (cs, eta) in enumerate(points):
        sub = _sweep(config.with_(cstar=cs, eta=eta), stop_amp=stop_amp, stride=stride)
        if sub.aborted:
            continue
        bounds.append((sub.smoothing_factor, pos))
    bounds.sort()
    best, best_pos = None, -1
    for bound, pos in bounds:
        if best is not None and bound > best.smoothing_factor:
            break
        cfg = config.with_(cstar=points[pos][0], eta=points[pos][1])
        # equal values still compete so that grid order decides ties
        r = _sweep(cfg, need_amp=False, stop_hf=None if best is None else best.smoothing_factor)
        if r.aborted:
            continue
        sm = r.smoothing_factor
        if best is not None and sm == best.smoothing_factor and pos > best_pos:
            continue
        a = _sweep(cfg, need_hf=False, stop_amp=stop_amp)
        if require_stable and (a.aborted or a.amplification_factor > 1.0 + tol):
            continue
        best, best_pos = OptimumResult(cfg.cstar, cfg.eta, a.amplification_factor, sm), pos
    return best


def spectrum_dump(config: AnalysisConfig) -> list:
    """Eigenvalues of ``G`` at every lattice phase (full lattice, ``k_x``-major order)."""
    ops = _Operators(config)
    kx, ky = lattice_wavenumbers(ops.grid, half=False)
    tx, ty = _phases(ops.grid, kx, ky)
    out = []
    for s in range(0, kx.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        G = ops.matrices(kx[sl], ky[sl])
        try:
            ev = np.linalg.eigvals(G)
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(str(exc)) from exc
        mod = np.abs(ev)
        orderi = np.argsort(-mod, axis=-1, kind="stable")
        ev = np.take_along_axis(ev, orderi, axis=-1)
        for j in range(ev.shape[0]):
            out.append(
                SpectrumRecord(float(tx[sl][j]), float(ty[sl][j]), tuple(complex(z) for z in ev[j]), float(np.abs(ev[j, 0])))
            )
    return out


# --------------------------------------------------------------------------
# CSV output

RESULT_COLUMNS = ("scheme", "precond", "framing", "mode", "AR", "d", "eta", "c", "c_star", "rho", "smoothing", "stable")
SPECTRUM_COLUMNS = (
    ("theta_x", "theta_y")
    + tuple(f"re_ev{i}" for i in range(1, 5))
    + tuple(f"im_ev{i}" for i in range(1, 5))
    + ("rho",)
)


def fmt(x) -> str:
    """Six significant digits; infinity is written as ``unbounded``."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isinf(x) and x > 0:
            return "unbounded"
        if math.isnan(x):
            return ""
        return f"{float(x):.6g}"
    return str(x)


def result_row(config: AnalysisConfig, result: AnalysisResult) -> dict:
    return {
        "scheme": config.scheme,
        "precond": config.precond,
        "framing": config.framing,
        "mode": config.mode,
        "AR": config.ar,
        "d": config.d,
        "eta": config.eta,
        "c": config.c,
        "c_star": config.cstar,
        "rho": result.amplification_factor,
        "smoothing": result.smoothing_factor,
        "stable": result.stable,
    }


def write_csv(rows, fh, columns) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c, "")) for c in columns])


def spectrum_rows(records) -> list:
    rows = []
    for r in records:
        row = {"theta_x": r.theta_x, "theta_y": r.theta_y, "rho": r.rho}
        for i, z in enumerate(r.eigenvalues, start=1):
            row[f"re_ev{i}"] = z.real
            row[f"im_ev{i}"] = z.imag
        rows.append(row)
    return rows
