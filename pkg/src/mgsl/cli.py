"""``mgsl`` command: Fourier analysis, table reproduction and solver runs.

Every command reads an optional JSON config (``--config``) whose keys mirror
the command's flags with underscores; flags given on the command line win.
Unknown config keys are rejected before any computation.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from contextlib import contextmanager

from . import lfa, tables
from .errors import ConfigError, DivergedState, MGSLError, NonPhysicalState, UnknownScheme
from .euler_core import U3, primitive_from_conservative
from .fv_solver import (
    SolverConfig,
    StructuredGrid,
    perturbed_uniform,
    solve_steady,
    solve_unsteady,
    write_history_csv,
)
from .lfa import AnalysisConfig, fmt

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

STABILITY_COLUMNS = ("scheme", "precond", "framing", "mode", "AR", "d", "eta", "c", "c_star_max")
OPTIMUM_COLUMNS = (
    "scheme", "precond", "framing", "mode", "AR", "d", "c", "c_star_opt", "eta_opt", "rho", "smoothing", "evaluated",
)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# value parsing


def _float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    return float(v)


def _int(v):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError("expected an integer")
    return int(v)


def _bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false"):
        return v.lower() == "true"
    raise ValueError("expected true or false")


def _str(v):
    if not isinstance(v, str):
        raise ValueError("expected a string")
    return v


def _state(v):
    if isinstance(v, str):
        key = v.lower()
        if key in lfa.STATES:
            return lfa.STATES[key]
        v = v.split(",")
    vals = tuple(float(x) for x in v)
    if len(vals) != 4:
        raise ValueError("state must be u1, u3 or four numbers")
    return vals


def _list(conv):
    """Scalar or list (JSON) or comma-separated string (flag) to a list."""

    def parse(v):
        if isinstance(v, str):
            v = [x for x in v.split(",") if x.strip()]
        elif not isinstance(v, (list, tuple)):
            v = [v]
        return [conv(x.strip() if isinstance(x, str) else x) for x in v]

    return parse


def _modes(v):
    if isinstance(v, str):
        out = []
        for item in v.split(","):
            if item.strip():
                kx, ky = item.split(":")
                out.append((int(kx), int(ky)))
        return tuple(out)
    return tuple((int(a), int(b)) for a, b in v)


# Config keys per command: name -> converter.  Sweepable analysis keys take lists.
_ANALYSIS_COMMON = {
    "precond": _str,
    "c": _float,
    "mode": _str,
    "state": _state,
    "n_x": _int,
    "n_y": _int,
    "coupling": _str,
    "sensor_denominator": _str,
    "correction": _bool,
    "m_form": _str,
    "hf_set": _str,
    "zero_mode": _str,
    "dt_rule": _str,
    "lattice": _str,
    "sensor": _bool,
    "output": _str,
}
_SWEEP = {"scheme": _list(_str), "ar": _list(_float), "d": _list(_float), "eta": _list(_float), "cstar": _list(_float)}

SCHEMAS = {
    "analyze": {**_ANALYSIS_COMMON, **_SWEEP},
    "spectrum": {**_ANALYSIS_COMMON, "scheme": _str, "ar": _float, "d": _float, "eta": _float, "cstar": _float},
    "stability": {
        **_ANALYSIS_COMMON, **{k: v for k, v in _SWEEP.items() if k != "cstar"},
        "cstar_grid": _list(_float), "ceiling": _float, "digits": _int,
    },
    "optimize": {
        **_ANALYSIS_COMMON, **{k: v for k, v in _SWEEP.items() if k not in ("cstar", "eta")},
        "eta": _float, "cstar_grid": _list(_float), "eta_grid": _list(_float),
    },
    "tables": {"output": _str, "cstar_grid": _list(_float), "eta_grid": _list(_float)},
    "solve": {
        "scheme": _str,
        "precond": _str,
        "cstar": _float,
        "eta": _float,
        "d": _float,
        "levels": _int,
        "nu1": _int,
        "mode": _str,
        "c": _float,
        "correction": _bool,
        "startup_cap": _float,
        "startup_iters": _int,
        "max_cycles": _int,
        "tol": _float,
        "n_x": _int,
        "n_y": _int,
        "ar": _float,
        "state": _state,
        "amplitude": _float,
        "modes": _modes,
        "steps": _int,
        "dt": _float,
        "output": _str,
    },
}

REQUIRED = {
    "analyze": ("scheme", "cstar"),
    "spectrum": ("scheme", "cstar"),
    "stability": ("scheme",),
    "optimize": ("scheme",),
    "tables": (),
    "solve": (),
}


def load_config(path: str | None, command: str) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    return {k: _convert(schema, k, v) for k, v in raw.items()}


def _convert(schema, key, value):
    try:
        return schema[key](value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None


def merged_options(args, command: str) -> dict:
    """JSON config overlaid with the flags that were actually given."""
    opts = load_config(args.config, command)
    schema = SCHEMAS[command]
    for key in schema:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = _convert(schema, key, val)
    missing = [k for k in REQUIRED[command] if k not in opts]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return opts


# --------------------------------------------------------------------------
# argument parser


def _analysis_flags(p, sweep: bool):
    many = " (comma-separated list allowed)" if sweep else ""
    p.add_argument("--scheme", help="smoother scheme, e.g. ARK3J, AW3" + many)
    p.add_argument("--precond", help="identity | sgs | exact | jacobian")
    p.add_argument("--ar", help="aspect ratio" + many)
    p.add_argument("--d", help="eigenvalue cutoff fraction" + many)
    p.add_argument("--eta", help="W-method parameter" + many)
    p.add_argument("--c", help="physical CFL number")
    p.add_argument("--mode", help="steady | unsteady")
    p.add_argument("--state", help="u1, u3 or rho,m1,m2,rhoE")
    p.add_argument("--n-x", dest="n_x", help="lattice cells in x")
    p.add_argument("--n-y", dest="n_y", help="lattice cells in y (default 8*AR)")
    p.add_argument("--coupling", help="per-direction | shared")
    p.add_argument("--sensor-denominator", dest="sensor_denominator", help="printed | consistent")
    p.add_argument("--correction", help="multidimensional spectral-radius correction (true/false)")
    p.add_argument("--m-form", dest="m_form", help="printed | exact")
    p.add_argument("--hf-set", dest="hf_set", help="max | x | y | min")
    p.add_argument("--zero-mode", dest="zero_mode", help="auto | include | exclude")
    p.add_argument("--dt-rule", dest="dt_rule", help="min-width | x-width-over-r")
    p.add_argument("--lattice", help="unit-square | stretched")
    p.add_argument("--sensor", help="pressure sensor on (true/false)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgsl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--output", "-o", help="write CSV here instead of stdout")

    p = sub.add_parser("analyze", help="amplification and smoothing factors")
    common(p)
    _analysis_flags(p, sweep=True)
    p.add_argument("--cstar", help="pseudo CFL number (comma-separated list allowed)")

    p = sub.add_parser("stability", help="largest stable pseudo CFL number")
    common(p)
    _analysis_flags(p, sweep=True)
    p.add_argument("--cstar-grid", dest="cstar_grid", help="scan these c* values instead of bisecting")
    p.add_argument("--ceiling", help="search ceiling (default 1e6)")
    p.add_argument("--digits", help="significant digits of the bisection (default 2)")

    p = sub.add_parser("optimize", help="grid search for the smallest smoothing factor")
    common(p)
    _analysis_flags(p, sweep=True)
    p.add_argument("--cstar-grid", dest="cstar_grid", help="comma-separated c* candidates")
    p.add_argument("--eta-grid", dest="eta_grid", help="comma-separated eta candidates (W schemes)")

    p = sub.add_parser("spectrum", help="eigenvalues of the amplification matrix at every lattice phase")
    common(p)
    _analysis_flags(p, sweep=False)
    p.add_argument("--cstar", help="pseudo CFL number")

    p = sub.add_parser("tables", help="recompute a tabulated result with reference values")
    common(p)
    p.add_argument("table_id", nargs="?", help="one of: " + ", ".join(tables.table_ids()))
    p.add_argument("--list", action="store_true", help="list table ids and exit")
    p.add_argument("--cstar-grid", dest="cstar_grid", help="override the c* search grid")
    p.add_argument("--eta-grid", dest="eta_grid", help="override the eta search grid")

    p = sub.add_parser("solve", help="nonlinear FAS multigrid run on a periodic grid")
    common(p)
    p.add_argument("--scheme", "--smoother", dest="scheme", help="smoother (default AW3)")
    p.add_argument("--precond", help="sgs | none")
    p.add_argument("--cstar", help="pseudo CFL number")
    p.add_argument("--eta", help="W-method parameter")
    p.add_argument("--d", help="eigenvalue cutoff fraction")
    p.add_argument("--levels", help="multigrid levels")
    p.add_argument("--nu1", help="presmoothing steps")
    p.add_argument("--mode", help="steady | unsteady")
    p.add_argument("--c", help="physical CFL (unsteady)")
    p.add_argument("--correction", help="spectral-radius correction (true/false)")
    p.add_argument("--startup-cap", dest="startup_cap", help="c* cap during the startup cycles")
    p.add_argument("--startup-iters", dest="startup_iters", help="number of capped startup cycles")
    p.add_argument("--max-cycles", dest="max_cycles", help="cycle limit per solve")
    p.add_argument("--tol", help="relative residual target")
    p.add_argument("--n-x", dest="n_x", help="cells in x (default 64)")
    p.add_argument("--n-y", dest="n_y", help="cells in y (default 64)")
    p.add_argument("--ar", help="cell aspect ratio dy/dx")
    p.add_argument("--state", help="u1, u3 or rho,m1,m2,rhoE")
    p.add_argument("--amplitude", help="density perturbation amplitude (0 for uniform flow)")
    p.add_argument("--modes", help="perturbation wavenumbers as kx:ky,kx:ky")
    p.add_argument("--steps", help="physical time steps (unsteady)")
    p.add_argument("--dt", help="physical time step (unsteady; default c * min width)")
    for name, p in sub.choices.items():
        p.set_defaults(usage=p.format_usage())
    return parser


# --------------------------------------------------------------------------
# commands


@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


_ANALYSIS_FIELDS = set(AnalysisConfig.__dataclass_fields__)


def _analysis_configs(opts: dict, sweep_keys) -> list:
    fixed = {k: v for k, v in opts.items() if k in _ANALYSIS_FIELDS and k not in sweep_keys}
    lists = [(k, opts[k]) for k in sweep_keys if k in opts]
    for k, vals in lists:
        if not vals:
            raise ConfigError(f"{k} list is empty")
    out = []
    for combo in itertools.product(*(vals for _, vals in lists)):
        kw = dict(fixed)
        kw.update({k: v for (k, _), v in zip(lists, combo)})
        out.append(AnalysisConfig(**kw))
    return out


def cmd_analyze(opts: dict) -> int:
    rows = []
    for cfg in _analysis_configs(opts, ("scheme", "ar", "d", "eta", "cstar")):
        rows.append(lfa.result_row(cfg, lfa.analyze(cfg)))
    with _sink(opts.get("output")) as fh:
        lfa.write_csv(rows, fh, lfa.RESULT_COLUMNS)
    return EXIT_OK


def _grid_stability(cfg: AnalysisConfig, grid) -> float:
    """Largest grid value such that it and every smaller grid value are stable."""
    best = 0.0
    for cs in sorted(grid):
        if not lfa.is_stable(cfg.with_(cstar=cs)):
            break
        best = cs
    return best


def cmd_stability(opts: dict) -> int:
    grid = opts.get("cstar_grid")
    if grid is not None and not grid:
        raise ConfigError("cstar grid is empty")
    rows = []
    for cfg in _analysis_configs(opts, ("scheme", "ar", "d", "eta")):
        if grid is not None:
            cmax = _grid_stability(cfg, grid)
        else:
            cmax = lfa.max_stable_cfl(cfg, ceiling=opts.get("ceiling", lfa.CSTAR_CEILING), digits=opts.get("digits", 2))
        rows.append(
            {
                "scheme": cfg.scheme,
                "precond": cfg.precond,
                "framing": cfg.framing,
                "mode": cfg.mode,
                "AR": cfg.ar,
                "d": cfg.d,
                "eta": cfg.eta,
                "c": cfg.c,
                "c_star_max": cmax,
            }
        )
    with _sink(opts.get("output")) as fh:
        lfa.write_csv(rows, fh, STABILITY_COLUMNS)
    return EXIT_OK


def cmd_optimize(opts: dict) -> int:
    for key in ("cstar_grid", "eta_grid"):
        if key in opts and not opts[key]:
            raise ConfigError(f"{key.replace('_', ' ')} is empty")
    rows = []
    for cfg in _analysis_configs(opts, ("scheme", "ar", "d")):
        res = lfa.optimize(cfg, cstar_grid=opts.get("cstar_grid"), eta_grid=opts.get("eta_grid"))
        rows.append(
            {
                "scheme": cfg.scheme,
                "precond": cfg.precond,
                "framing": cfg.framing,
                "mode": cfg.mode,
                "AR": cfg.ar,
                "d": cfg.d,
                "c": cfg.c,
                "c_star_opt": res.cstar,
                "eta_opt": res.eta,
                "rho": res.amplification_factor,
                "smoothing": res.smoothing_factor,
                "evaluated": res.evaluated,
            }
        )
    with _sink(opts.get("output")) as fh:
        lfa.write_csv(rows, fh, OPTIMUM_COLUMNS)
    return EXIT_OK


def cmd_spectrum(opts: dict) -> int:
    cfg = _analysis_configs(opts, ())[0]
    rows = lfa.spectrum_rows(lfa.spectrum_dump(cfg))
    with _sink(opts.get("output")) as fh:
        lfa.write_csv(rows, fh, lfa.SPECTRUM_COLUMNS)
    return EXIT_OK


def cmd_tables(opts: dict, table_id: str | None, list_only: bool) -> int:
    if list_only:
        for tid in tables.table_ids():
            print(f"{tid}\t{tables.get_table(tid).caption}")
        return EXIT_OK
    if table_id is None:
        raise UsageError("a table id is required (see --list)")
    try:
        tables.get_table(table_id)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    for key in ("cstar_grid", "eta_grid"):
        if key in opts and not opts[key]:
            raise ConfigError(f"{key.replace('_', ' ')} is empty")
    rows = tables.table_rows(table_id, opts.get("cstar_grid"), opts.get("eta_grid"))
    with _sink(opts.get("output")) as fh:
        lfa.write_csv(rows, fh, tables.TABLE_COLUMNS)
    return EXIT_OK


_SOLVER_FIELDS = set(SolverConfig.__dataclass_fields__)


def cmd_solve(opts: dict) -> int:
    n_x = opts.get("n_x", 64)
    n_y = opts.get("n_y", n_x)
    grid = StructuredGrid(n_x, n_y, 1.0 / n_x, opts.get("ar", 1.0))
    state = opts.get("state", tuple(U3))
    primitive_from_conservative(state)
    amplitude = opts.get("amplitude", 1e-3)
    init = perturbed_uniform(grid, state, amplitude, opts.get("modes", ((1, 1),)))
    config = SolverConfig(**{k: v for k, v in opts.items() if k in _SOLVER_FIELDS})
    out = opts.get("output")
    # the summary goes wherever the CSV is not
    say = (lambda s: print(s)) if out is not None else (lambda s: print(s, file=sys.stderr))
    if config.mode == "steady":
        rep = solve_steady(grid, init, config)
        with _sink(out) as fh:
            write_history_csv(rep.history, fh)
        say(_summary(rep))
        return EXIT_OK
    steps = opts.get("steps", 1)
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    rep = solve_unsteady(grid, init, config, steps, opts.get("dt"))
    history = [row for k, r in enumerate(rep.steps) for row in (r.history if k == 0 else r.history[1:])]
    with _sink(out) as fh:
        write_history_csv(history, fh)
    for k, r in enumerate(rep.steps, start=1):
        say(f"step {k}: " + _summary(r))
    return EXIT_OK


def _summary(rep) -> str:
    if rep.message == "already converged":
        return "already converged (initial residual at round-off level)"
    r0, rn = rep.history[0][2], rep.history[-1][2]
    return (
        f"{rep.message}: {rep.cycles} cycles, residual {fmt(r0)} -> {fmt(rn)}, "
        f"average rate {fmt(rep.rate)}"
    )


# --------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        opts = merged_options(args, command)
        if command == "analyze":
            return cmd_analyze(opts)
        if command == "stability":
            return cmd_stability(opts)
        if command == "optimize":
            return cmd_optimize(opts)
        if command == "spectrum":
            return cmd_spectrum(opts)
        if command == "tables":
            return cmd_tables(opts, args.table_id, args.list)
        return cmd_solve(opts)
    except UsageError as exc:
        print(args.usage.rstrip(), file=sys.stderr)
        print(f"mgsl {command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, UnknownScheme, NonPhysicalState, ValueError, TypeError) as exc:
        print(f"mgsl {command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedState as exc:
        where = f" at cycle {exc.cycle}" if exc.cycle is not None else ""
        print(f"mgsl {command}: diverged{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MGSLError as exc:
        print(f"mgsl {command}: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
