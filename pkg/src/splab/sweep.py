"""Small-c continuation sweeps and the monotone-trend checks applied to them."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .functionals import FiberError, fiber_max
from .limit import LimitGroundState, normalize_mass
from .minimize import MinimizeOptions, MinimizerReport, minimize_rescaled
from .nonlinearity import Nonlinearity, ScalingContext
from .radial import h1_distance

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
CSV_COLUMNS = ("c", "K", "t_star_phi", "omega", "h1_dist", "q_residual", "converged",
               "el_residual", "iterations")


@dataclass
class SweepRow:
    c: float
    K: float
    t_star_phi: float
    omega: float
    h1_dist_to_phi: float
    q_residual: float
    converged: bool = True
    el_residual: float = math.nan
    iterations: int = 0

    def csv_record(self) -> list:
        return [self.c, self.K, self.t_star_phi, self.omega, self.h1_dist_to_phi,
                self.q_residual, int(self.converged), self.el_residual, self.iterations]


@dataclass
class SweepOptions:
    warm_start: bool = True
    minimize: MinimizeOptions = field(default_factory=lambda: MinimizeOptions(tol=1e-10))
    workers: int = 1


@dataclass
class SweepResult:
    rows: list
    limit: LimitGroundState
    fields: list = field(repr=False, default_factory=list)


def _row(nl, ctx, limit: LimitGroundState, rep: MinimizerReport) -> SweepRow:
    try:
        t_phi = fiber_max(nl, ctx, limit.phi).t_star
    except FiberError:
        t_phi = math.nan
    return SweepRow(ctx.c, rep.K, t_phi, rep.omega, h1_distance(rep.field, limit.phi),
                    rep.q_residual, rep.converged, rep.el_residual, rep.iterations)


def _solve(args):
    nl, c, p, init, mopts = args
    return minimize_rescaled(nl, ScalingContext(c, p), init, mopts)


def continuation_sweep(nl: Nonlinearity, p: float, c_schedule=DEFAULT_SCHEDULE,
                       opts: SweepOptions | None = None,
                       limit: LimitGroundState | None = None) -> SweepResult:
    """Minimize at each c of a strictly decreasing schedule.

    Warm starts reuse the previous minimizer; cold starts begin every row
    from the limit state and may then run on ``opts.workers`` processes.
    """
    opts = opts or SweepOptions()
    cs = [float(c) for c in c_schedule]
    if not cs or any(c <= 0 for c in cs):
        raise ValueError("c values must be positive")
    if any(b >= a for a, b in zip(cs, cs[1:])):
        raise ValueError("c schedule must be strictly decreasing")
    if nl.p != p:
        raise ValueError(f"nonlinearity exponent {nl.p} does not match p={p}")
    limit = limit or normalize_mass(p)
    reports: list[MinimizerReport] = []
    if opts.warm_start:
        init = limit.phi
        for c in cs:
            rep = _solve((nl, c, p, init, opts.minimize))
            reports.append(rep)
            if rep.converged:
                init = rep.field
            else:
                log.warning("c=%g did not converge: %s", c, rep.message)
    else:
        jobs = [(nl, c, p, limit.phi, opts.minimize) for c in cs]
        if opts.workers > 1 and nl.kind != "custom":
            with ProcessPoolExecutor(max_workers=opts.workers) as pool:
                reports = list(pool.map(_solve, jobs))
        else:
            reports = [_solve(j) for j in jobs]
    rows = [_row(nl, ScalingContext(c, p), limit, rep) for c, rep in zip(cs, reports)]
    return SweepResult(rows, limit, [rep.field for rep in reports])


# ---------------------------------------------------------------- trend checks

@dataclass
class TrendCheck:
    name: str
    values: list
    violations: int
    ratio: float
    passed: bool


def trend_check(name: str, values, allowed: int = 1, max_ratio: float = 1e-2) -> TrendCheck:
    """Decrease with at most ``allowed`` strictly increasing adjacent pairs.

    Equal neighbours count as non-increasing, so a column that has reached
    round-off and stays there is not penalized.
    """
    v = [float(x) for x in values]
    bad = sum(1 for a, b in zip(v, v[1:]) if b > a)
    ratio = v[-1] / v[0] if v and v[0] != 0 else math.inf
    ok = bad <= allowed and ratio <= max_ratio and all(np.isfinite(v))
    return TrendCheck(name, v, bad, ratio, ok)


def convergence_columns(result: SweepResult) -> dict[str, list[float]]:
    """The four distance-to-limit columns over converged rows."""
    lim = result.limit
    rows = [r for r in result.rows if r.converged]
    K0 = lim.energy
    return {
        "t_star": [abs(r.t_star_phi - 1.0) for r in rows],
        "omega": [abs(r.omega - lim.omega0) for r in rows],
        "energy": [abs(r.K - K0) for r in rows],
        "h1": [r.h1_dist_to_phi for r in rows],
    }


def trend_report(result: SweepResult, allowed: int = 1, max_ratio: float = 1e-2) -> list[TrendCheck]:
    return [trend_check(k, v, allowed, max_ratio) for k, v in convergence_columns(result).items()]


# ---------------------------------------------------------------- persistence

def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in r.csv_record()])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[SweepRow]:
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append(SweepRow(float(rec["c"]), float(rec["K"]), float(rec["t_star_phi"]),
                            float(rec["omega"]), float(rec["h1_dist"]), float(rec["q_residual"]),
                            bool(int(rec["converged"])), float(rec.get("el_residual", "nan")),
                            int(rec.get("iterations", 0))))
    return out


def sweep_metadata(nl: Nonlinearity, result: SweepResult, opts: SweepOptions) -> dict:
    import scipy

    g = result.limit.phi.grid
    return {
        "nonlinearity": nl.to_config(),
        "p": result.limit.p,
        "grid": {"rmax": g.rmax, "n": g.n},
        "omega0": result.limit.omega0,
        "K0": result.limit.energy,
        "warm_start": opts.warm_start,
        "tolerances": asdict(opts.minimize),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__,
                     "splab": _version()},
        "columns": list(CSV_COLUMNS),
    }


def _version() -> str:
    from . import __version__
    return __version__


def metadata_json(meta: dict) -> str:
    return json.dumps(meta, indent=2, sort_keys=True)
