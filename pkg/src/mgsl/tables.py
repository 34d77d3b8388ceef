"""Registry of the tabulated analysis results and the code that recomputes them.

Each table is a list of cells.  A cell fixes a configuration and says how the
tabulated quantities are obtained: evaluation at a given ``cstar``, a
stability search, or a grid optimization.  Reference values are stored next
to the configuration so the ``tables`` command can report deviations.

``UNBOUNDED`` in a reference ``cstar`` means no finite bound was observed (or
the optimum lies beyond the search ceiling).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .euler_core import U1, U3
from .lfa import (
    CSTAR_CEILING,
    UNBOUNDED,
    AnalysisConfig,
    analyze,
    default_eta_grid,
    max_stable_cfl,
    optimize,
)

INF = UNBOUNDED
AR_VALUES = (1.0, 100.0, 10000.0)
D_VALUES = (0.0, 0.1, 0.25, 0.5, 1.0)

TABLE_COLUMNS = (
    "table",
    "scheme",
    "precond",
    "d",
    "AR",
    "eta",
    "c_star",
    "quantity",
    "computed",
    "reference",
    "deviation",
    "rel_deviation",
)


@dataclass(frozen=True)
class Cell:
    """One table cell; ``kind`` is ``point``, ``stability``, ``optimize-cstar`` or ``optimize``."""

    config: AnalysisConfig
    kind: str
    reference: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TableSpec:
    table_id: str
    caption: str
    cells: tuple


def _base(**kw) -> AnalysisConfig:
    # frozen calibration: unsteady, c = 200, per-direction coupling, printed sensor
    return AnalysisConfig(mode="unsteady", c=200.0, **kw)


def _grid(rows):
    """Expand ``{d: (v_AR1, v_AR100, v_AR10000)}`` into ``{(d, AR): v}``."""
    return {(d, ar): v for d, vals in rows.items() for ar, v in zip(AR_VALUES, vals)}


# --------------------------------------------------------------------------
# reference data


_ERK_ARK = {
    "ERK3": {"rho": (0.9933, 0.9935, 0.9935), "smoothing": (0.5158, 0.9935, 0.9935)},
    "ARK3J": {"rho": (0.9933, 0.9935, 0.9935), "smoothing": (0.4634, 0.9935, 0.9935)},
}

_ARK_CMAX = {
    "sgs": _grid({0.0: (1, 80, 10500), 0.1: (6, 900, 95000), 0.25: (15, 2200, 220000), 0.5: (30, 4400, 440000), 1.0: (55, 6500, 800000)}),
    "exact": _grid({0.0: (1, 80, 8500), 0.1: (8, 850, 80000), 0.25: (16, 2050, 200000), 0.5: (27, 4000, 400000), 1.0: (59, 6800, 790000)}),
}

_ARK_RATES = {
    "sgs": {
        "c_star": _grid({0.0: (1, 80, 10500), 0.1: (5, 900, 95000), 0.25: (10, 2100, 220000), 0.5: (14, 4300, 440000), 1.0: (20, 6100, 700000)}),
        "rho": _grid({
            0.0: (0.9974, 0.9708, 0.9455), 0.1: (0.9878, 0.7730, 0.7739), 0.25: (0.9774, 0.6932, 0.6649),
            0.5: (0.9722, 0.6422, 0.7411), 1.0: (0.9661, 0.7122, 0.6707),
        }),
        "smoothing": _grid({
            0.0: (0.9439, 0.9708, 0.9455), 0.1: (0.7370, 0.7730, 0.7739), 0.25: (0.5480, 0.6932, 0.6649),
            0.5: (0.4240, 0.6422, 0.7411), 1.0: (0.2908, 0.7122, 0.6707),
        }),
    },
    "exact": {
        "c_star": _grid({0.0: (1, 80, 8500), 0.1: (8, 800, 80000), 0.25: (9, 1900, 190000), 0.5: (14, 2200, 370000), 1.0: (30, 6300, 650000)}),
        "rho": _grid({
            0.0: (0.9480, 0.9587, 0.9557), 0.1: (0.6395, 0.6434, 0.6424), 0.25: (0.6028, 0.5273, 0.4282),
            0.5: (0.4504, 0.3158, 0.3653), 1.0: (0.2653, 0.5088, 0.3984),
        }),
        "smoothing": _grid({
            0.0: (0.9446, 0.9587, 0.9557), 0.1: (0.6533, 0.6434, 0.6424), 0.25: (0.5738, 0.5273, 0.4282),
            0.5: (0.4504, 0.3158, 0.3653), 1.0: (0.2653, 0.5088, 0.3984),
        }),
    },
}

_AW_CMAX = {
    "sgs": _grid({0.0: (8, 8, 8), 0.1: (13, 13, 13), 0.25: (30, 2100, INF), 0.5: (INF, INF, INF), 1.0: (INF, INF, INF)}),
    "exact": _grid({0.0: (8, 8, 8), 0.1: (11, 13, 13), 0.25: (47, 98, 98), 0.5: (INF, INF, INF), 1.0: (INF, INF, INF)}),
}

_AW_RATES = {
    "sgs": {
        "c_star": _grid({0.0: (3, 8, 8), 0.1: (3, 12, 13), 0.25: (3, 240, 500), 0.5: (3, INF, INF), 1.0: (7, INF, INF)}),
        "rho": _grid({
            0.0: (0.9836, 0.9452, 0.9441), 0.1: (0.9837, 0.9217, 0.9140), 0.25: (0.9838, 0.7157, 0.6813),
            0.5: (0.9841, 0.7965, 0.7903), 1.0: (0.9765, 0.8845, 0.8822),
        }),
        "smoothing": _grid({
            0.0: (0.3046, 0.9452, 0.9441), 0.1: (0.2969, 0.9217, 0.9140), 0.25: (0.2818, 0.7157, 0.6813),
            0.5: (0.2686, 0.7965, 0.7903), 1.0: (0.2564, 0.8845, 0.8822),
        }),
    },
    "exact": {
        "c_star": _grid({0.0: (3, 8, 8), 0.1: (3, 12, 12), 0.25: (3, 70, 70), 0.5: (4, INF, INF), 1.0: (7, INF, INF)}),
        "rho": _grid({
            0.0: (0.9781, 0.9440, 0.9440), 0.1: (0.9781, 0.9188, 0.9188), 0.25: (0.9781, 0.6831, 0.6831),
            0.5: (0.9740, 0.3473, 0.3473), 1.0: (0.9506, 0.4045, 0.4045),
        }),
        "smoothing": _grid({
            0.0: (0.3046, 0.9440, 0.9440), 0.1: (0.2933, 0.9188, 0.9188), 0.25: (0.2787, 0.6831, 0.6831),
            0.5: (0.2669, 0.3473, 0.3473), 1.0: (0.2627, 0.4045, 0.4045),
        }),
    },
}

# {scheme: {d: (c_star, eta, rho, smoothing) per AR}}
_AW_OPT = {
    "a0": {
        "AW3": {
            0.1: ((3, 12, 13), (0.6, 0.8, 0.8), (0.9823, 0.9217, 0.9140), (0.2604, 0.9217, 0.9140)),
            0.5: ((3, INF, INF), (0.4, 0.5, 0.5), (0.9809, 0.6918, 0.6830), (0.2630, 0.6918, 0.6830)),
        },
        "AW51": {
            0.1: ((3, 8, 11), (0.6, 0.8, 0.9), (0.9823, 0.9454, 0.9824), (0.2624, 0.9454, 0.9824)),
            0.5: ((4, 30, INF), (0.5, 0.5, 0.7), (0.9776, 0.8598, 0.7656), (0.2611, 0.8598, 0.7656)),
        },
        "AW52": {
            0.1: ((3, 8, 10), (0.6, 0.8, 0.8), (0.9823, 0.9456, 0.9323), (0.2256, 0.9456, 0.9323)),
            0.5: ((3, INF, INF), (0.5, 0.5, 0.5), (0.9818, 0.7016, 0.6934), (0.1762, 0.7016, 0.6934)),
        },
        "AW5J": {
            0.1: ((3, 9, 10), (0.5, 0.7, 0.8), (0.9815, 0.9389, 0.9323), (0.2064, 0.9389, 0.9323)),
            0.5: ((3, INF, INF), (0.4, 0.5, 0.5), (0.9809, 0.6991, 0.6907), (0.1721, 0.6991, 0.6907)),
        },
    },
    "a45": {
        "AW3": {
            0.1: ((3, 900, 400), (0.6, 0.8, 0.9), (0.9804, 0.4481, 0.4367), (0.2642, 0.4481, 0.4367)),
            0.5: ((3, INF, INF), (0.6, 0.8, 0.9), (0.9809, 0.4441, 0.4363), (0.2642, 0.4441, 0.4363)),
        },
        "AW51": {
            0.1: ((3, 1200, 300), (0.6, 0.8, 0.8), (0.9804, 0.4545, 0.4390), (0.2654, 0.4545, 0.4390)),
            0.5: ((3, INF, INF), (0.6, 0.8, 0.9), (0.9804, 0.4484, 0.4351), (0.2654, 0.4484, 0.4351)),
        },
        "AW52": {
            0.1: ((3, INF, 500), (0.5, 0.8, 0.8), (0.9798, 0.4378, 0.4107), (0.1750, 0.4378, 0.4107)),
            0.5: ((3, INF, INF), (0.5, 0.8, 0.9), (0.9799, 0.4710, 0.3957), (0.1750, 0.4710, 0.3957)),
        },
        "AW5J": {
            0.1: ((3, 300, 200), (0.5, 0.8, 0.9), (0.9798, 0.5460, 0.5220), (0.1526, 0.5460, 0.5220)),
            0.5: ((3, 1100, 800), (0.5, 0.8, 0.9), (0.9799, 0.5427, 0.4205), (0.1527, 0.5427, 0.4205)),
        },
    },
}


# --------------------------------------------------------------------------
# table construction


def _erk_ark():
    cells = []
    for scheme, ref in _ERK_ARK.items():
        for k, ar in enumerate(AR_VALUES):
            cfg = _base(scheme=scheme, precond="identity", ar=ar, cstar=0.9)
            cells.append(Cell(cfg, "point", {"rho": ref["rho"][k], "smoothing": ref["smoothing"][k]}))
    return cells


def _stability(scheme, table, eta=0.8):
    cells = []
    for precond, ref in table.items():
        for (d, ar), v in ref.items():
            cfg = _base(scheme=scheme, precond=precond, ar=ar, d=d, eta=eta)
            cells.append(Cell(cfg, "stability", {"c_star_max": float(v)}))
    return cells


def _rates(scheme, table, eta=0.8):
    cells = []
    for precond, ref in table.items():
        for (d, ar), cs in ref["c_star"].items():
            at = CSTAR_CEILING if math.isinf(cs) else float(cs)
            cfg = _base(scheme=scheme, precond=precond, ar=ar, d=d, eta=eta, cstar=at)
            values = {"c_star_opt": float(cs), "rho": ref["rho"][(d, ar)], "smoothing": ref["smoothing"][(d, ar)]}
            cells.append(Cell(cfg, "point", values))
    return cells


def _aw_opt(key):
    state = tuple(U3) if key == "a0" else tuple(U1)
    cells = []
    for scheme, rows in _AW_OPT[key].items():
        for d, (cs, eta, rho, sm) in rows.items():
            for k, ar in enumerate(AR_VALUES):
                cfg = _base(scheme=scheme, precond="sgs", ar=ar, d=d, state=state)
                ref = {"c_star_opt": float(cs[k]), "eta_opt": eta[k], "rho": rho[k], "smoothing": sm[k]}
                cells.append(Cell(cfg, "optimize", ref))
    return cells


TABLES = {
    "erk-ark": TableSpec("erk-ark", "Amplification and smoothing factors of ERK3 and ARK3J", tuple(_erk_ark())),
    "prec-ark-stability": TableSpec("prec-ark-stability", "Maximal c* for ARK3J", tuple(_stability("ARK3J", _ARK_CMAX))),
    "prec-ark": TableSpec("prec-ark", "Amplification and smoothing factors of ARK3J", tuple(_rates("ARK3J", _ARK_RATES))),
    "aw-stability": TableSpec("aw-stability", "Maximal c* for AW3", tuple(_stability("AW3", _AW_CMAX))),
    "aw": TableSpec("aw", "Amplification and smoothing factors of AW3", tuple(_rates("AW3", _AW_RATES))),
    "aw-opt-a0": TableSpec("aw-opt-a0", "Optimal eta, c*, amplification and smoothing factors, alpha = 0", tuple(_aw_opt("a0"))),
    "aw-opt-a45": TableSpec("aw-opt-a45", "Optimal eta, c*, amplification and smoothing factors, alpha = 45", tuple(_aw_opt("a45"))),
}


def table_ids() -> list:
    return list(TABLES)


def get_table(table_id: str) -> TableSpec:
    try:
        return TABLES[table_id]
    except KeyError:
        raise KeyError(f"unknown table {table_id!r}; known: {', '.join(TABLES)}") from None


# --------------------------------------------------------------------------
# evaluation


def report_cstar(c: float) -> float:
    """A ``cstar`` at the search ceiling is reported as unbounded."""
    return UNBOUNDED if c >= CSTAR_CEILING else c


def evaluate_cell(cell: Cell, cstar_grid=None, eta_grid=None) -> dict:
    """Computed counterparts of the cell's reference quantities."""
    cfg = cell.config
    if cell.kind == "point":
        res = analyze(cfg)
        out = {"rho": res.amplification_factor, "smoothing": res.smoothing_factor}
        if "c_star_opt" in cell.reference:
            # fixed eta: search cstar only
            opt = optimize(cfg, cstar_grid=cstar_grid, eta_grid=[cfg.eta])
            out["c_star_opt"] = report_cstar(opt.cstar) if opt.found else math.nan
        return out
    if cell.kind == "stability":
        return {"c_star_max": max_stable_cfl(cfg)}
    if cell.kind == "optimize":
        opt = optimize(cfg, cstar_grid=cstar_grid, eta_grid=eta_grid if eta_grid is not None else default_eta_grid())
        if not opt.found:
            return {k: math.nan for k in cell.reference}
        return {
            "c_star_opt": report_cstar(opt.cstar),
            "eta_opt": opt.eta,
            "rho": opt.amplification_factor,
            "smoothing": opt.smoothing_factor,
        }
    raise ValueError(f"unknown cell kind {cell.kind!r}")


def deviation(computed: float, reference: float):
    """``(computed - reference, relative deviation)``; two unbounded values agree exactly."""
    if math.isinf(computed) or math.isinf(reference):
        same = math.isinf(computed) and math.isinf(reference)
        return (0.0, 0.0) if same else (math.nan, math.nan)
    if math.isnan(computed):
        return math.nan, math.nan
    diff = computed - reference
    return diff, (diff / abs(reference) if reference != 0 else math.nan)


def table_rows(table_id: str, cstar_grid=None, eta_grid=None, progress=None) -> list:
    spec = get_table(table_id)
    rows = []
    for cell in spec.cells:
        got = evaluate_cell(cell, cstar_grid, eta_grid)
        cfg = cell.config
        for quantity, ref in cell.reference.items():
            value = got[quantity]
            dev, rel = deviation(value, ref)
            rows.append(
                {
                    "table": table_id,
                    "scheme": cfg.scheme,
                    "precond": cfg.precond,
                    "d": cfg.d,
                    "AR": cfg.ar,
                    "eta": cfg.eta if cell.kind != "optimize" and cfg.framing == "aw" else math.nan,
                    "c_star": cfg.cstar if cell.kind == "point" else math.nan,
                    "quantity": quantity,
                    "computed": value,
                    "reference": ref,
                    "deviation": dev,
                    "rel_deviation": rel,
                }
            )
        if progress is not None:
            progress(cell, got)
    return rows
