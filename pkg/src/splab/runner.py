"""Experiment orchestration: one entry point per experiment kind.

Every file goes through a single ``ArtifactWriter`` which records its
SHA-256; the manifest written last lists all of them together with the
configuration, the seed and library versions.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy import fft

from . import __version__
from .branch import NewtonError, newton_branch
from .config import ExperimentConfig
from .limit import normalize_mass, omega_from_quotient
from .minimize import MinimizeOptions, minimize_rescaled
from .nonlinearity import DEFAULT_Q_L, ScalingContext, check_assumptions
from .radial import h1_distance, mass, to_bytes, to_text

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


class ArtifactWriter:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.entries: dict[str, dict] = {}

    def _record(self, name: str, data: bytes) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.entries[name] = {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
        return path

    def text(self, name: str, text: str) -> Path:
        return self._record(name, text.encode("utf-8"))

    def binary(self, name: str, data: bytes) -> Path:
        return self._record(name, data)

    def json(self, name: str, obj) -> Path:
        return self.text(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def manifest(self, config: ExperimentConfig, status: str, extra: dict | None = None) -> Path:
        doc = {
            "status": status,
            "kind": config.kind,
            "seed": config.seed,
            "config": config.to_dict(),
            "versions": versions(),
            "schema": {"sweep.csv": "c,K,t_star_phi,omega,h1_dist,q_residual,converged,"
                                    "el_residual,iterations", "version": 1},
            "artifacts": dict(sorted(self.entries.items())),
        }
        if extra:
            doc.update(extra)
        data = (json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n").encode()
        path = self.root / "manifest.json"
        path.write_bytes(data)
        return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serializable: {type(x)}")


def versions() -> dict:
    return {"splab": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


@dataclass
class RunResult:
    status: int
    out_dir: Path
    summary: dict = field(default_factory=dict)


# ---------------------------------------------------------------- kinds

def _limit(cfg: ExperimentConfig):
    return normalize_mass(cfg.p, rmax_scaled=cfg.radial.rmax_scaled, n=cfg.radial.n)


def _min_opts(cfg: ExperimentConfig) -> MinimizeOptions:
    s = cfg.solver
    return MinimizeOptions(tol=s.tol, max_iter=s.max_iter, c_ceiling=s.c_ceiling)


def _run_groundstate(cfg, w: ArtifactWriter) -> tuple[bool, dict]:
    st = _limit(cfg)
    doc = st.to_dict()
    doc["omega0_quotient"] = omega_from_quotient(st)
    w.json("groundstate.json", doc)
    w.text("phi_profile.txt", st.profile_text())
    w.binary("phi.bin", to_bytes(st.phi))
    ok = (st.el_residual <= 1e-8 and abs(st.pohozaev_residual) <= 1e-6
          and st.nehari_residual <= 1e-6 and st.mass_residual <= 1e-10)
    return ok, doc


def _run_minimize(cfg, w) -> tuple[bool, dict]:
    nl = cfg.build_nonlinearity()
    st = _limit(cfg)
    rep = minimize_rescaled(nl, ScalingContext(cfg.c, cfg.p), st.phi, _min_opts(cfg))
    doc = {"c": cfg.c, "p": cfg.p, "nonlinearity": nl.to_config(), **rep.summary(),
           "energy": rep.energy.to_record(), "K0": st.energy, "omega0": st.omega0,
           "h1_dist_to_phi": h1_distance(rep.field, st.phi)}
    w.json("minimize.json", doc)
    w.text("profile.txt", to_text(rep.field))
    w.binary("field.bin", to_bytes(rep.field))
    return rep.converged, doc


def _run_branch(cfg, w) -> tuple[bool, dict]:
    nl = cfg.build_nonlinearity()
    st = _limit(cfg)
    omega = cfg.omega if cfg.omega is not None else st.omega0
    ctx = ScalingContext(cfg.c, cfg.p)
    try:
        u, info = newton_branch(nl, ctx, omega, st.phi, tol=cfg.solver.newton_tol,
                                omega0=st.omega0, return_info=True)
    except NewtonError as exc:
        doc = {"c": cfg.c, "omega": omega, "converged": False, "message": str(exc)}
        w.json("branch.json", doc)
        return False, doc
    doc = {"c": cfg.c, "omega": omega, "omega0": st.omega0, "converged": True,
           "steps": info.steps, "residuals": info.residuals,
           "linear_iterations": info.linear_iterations,
           "quadratic_ratios": info.quadratic_ratios(),
           "h1_dist_to_phi": h1_distance(u, st.phi)}
    w.json("branch.json", doc)
    w.text("profile.txt", to_text(u))
    w.binary("field.bin", to_bytes(u))
    return True, doc


def _run_sweep(cfg, w) -> tuple[bool, dict]:
    from .sweep import (SweepOptions, continuation_sweep, metadata_json, rows_to_csv,
                        sweep_metadata, trend_report)
    nl = cfg.build_nonlinearity()
    st = _limit(cfg)
    opts = SweepOptions(warm_start=cfg.warm_start, minimize=_min_opts(cfg),
                        workers=cfg.threads)
    res = continuation_sweep(nl, cfg.p, cfg.c_schedule, opts, limit=st)
    w.text("sweep.csv", rows_to_csv(res.rows))
    meta = sweep_metadata(nl, res, opts)
    w.text("sweep.meta.json", metadata_json(meta) + "\n")
    w.text("phi_profile.txt", st.profile_text())
    for i, (row, fld) in enumerate(zip(res.rows, res.fields)):
        w.text(f"profiles/profile_{i:02d}.txt", f"# c={row.c!r}\n" + to_text(fld))
    trends = trend_report(res)
    tdoc = {t.name: {"values": t.values, "violations": t.violations, "ratio": t.ratio,
                     "passed": t.passed} for t in trends}
    tdoc["K_positive"] = all(r.K > 0 for r in res.rows if r.converged)
    w.json("trends.json", tdoc)
    ok = all(r.converged for r in res.rows)
    return ok, {"rows": len(res.rows), "converged": ok, "trends": tdoc}


def _run_assumptions(cfg, w) -> tuple[bool, dict]:
    nl = cfg.build_nonlinearity()
    q0, l0 = DEFAULT_Q_L[nl.kind](nl) if nl.kind in DEFAULT_Q_L else (None, None)
    q = cfg.assumptions.q if cfg.assumptions.q is not None else q0
    l = cfg.assumptions.l if cfg.assumptions.l is not None else l0
    if q is None or l is None:
        raise ValueError("custom nonlinearities need assumptions.q and assumptions.l")
    rep = check_assumptions(nl, q, l)
    doc = {"nonlinearity": nl.to_config(), **rep.to_dict(), "failed": rep.failed()}
    w.json("assumptions.json", doc)
    return rep.all_passed, doc


def smooth_perturbation(box, phi_values, rng, scale: float, length: float) -> np.ndarray:
    """phi times a random combination of low-order non-radial harmonic polynomials.

    The result has L2 norm ``scale`` times that of phi; ``length`` sets the
    unit of the polynomial coordinates.
    """
    X, Y, Z = box.coordinates()
    x, y, z = X / length, Y / length, Z / length
    basis = [x, y, z, x * y, y * z, z * x, x * x - y * y, 2 * z * z - x * x - y * y]
    a = rng.normal(size=len(basis))
    q = phi_values * sum(ai * b for ai, b in zip(a, basis))
    nq = math.sqrt(np.sum(q * q))
    nphi = math.sqrt(np.sum(phi_values ** 2))
    return scale * nphi / nq * q


def _run_symmetry3d(cfg, w) -> tuple[bool, dict]:
    from .cartesian import (Box3D, RadialProfile, embed_radial, minimize_3d, slice_text,
                            symmetry_defect, to_bytes as to_bytes3)
    from .recenter import recenter
    nl = cfg.build_nonlinearity()
    st = _limit(cfg)
    ctx = ScalingContext(cfg.c, cfg.p)
    rad = minimize_rescaled(nl, ctx, st.phi, _min_opts(cfg))
    box = Box3D(cfg.grid3d.L_scaled / math.sqrt(st.omega0), cfg.grid3d.n)
    prof = RadialProfile(st.phi)
    U = embed_radial(st.phi, box, profile=prof)
    rng = np.random.default_rng(cfg.seed)
    u0 = U + smooth_perturbation(box, U.values, rng, cfg.perturbation,
                                 1.0 / math.sqrt(st.omega0))
    u0 = u0 * (1.0 / math.sqrt(mass(u0)))
    d0 = symmetry_defect(u0)
    t0 = time.perf_counter()
    opts3 = MinimizeOptions(tol=cfg.solver.tol3d, max_iter=cfg.solver.max_iter3d,
                            c_ceiling=cfg.solver.c_ceiling)
    f, rep = minimize_3d(nl, ctx, u0, opts3)
    elapsed = time.perf_counter() - t0
    rc = recenter(f, prof)
    defect = symmetry_defect(f, -rc.tau)
    doc = {"c": cfg.c, "p": cfg.p, "L": box.L, "n": box.n, "seed": cfg.seed,
           "perturbation": cfg.perturbation, "initial_defect": d0, "defect": defect,
           "tau": rc.tau, "remainder_norm": math.sqrt(mass(rc.remainder)),
           "orthogonality": rc.orthogonality, "K3d": rep.K, "K_radial": rad.K,
           "energy_rel_gap": abs(rep.K / rad.K - 1.0), "boundary_level": f.boundary_level(),
           "seconds": elapsed, **{f"report_{k}": v for k, v in rep.summary().items()}}
    w.json("symmetry3d.json", doc)
    w.text("slice_x.txt", slice_text(f, 0))
    w.binary("field3d.bin", to_bytes3(f))
    return rep.converged and rad.converged, doc


RUNNERS = {
    "groundstate": _run_groundstate,
    "minimize": _run_minimize,
    "branch": _run_branch,
    "sweep": _run_sweep,
    "check-assumptions": _run_assumptions,
    "symmetry3d": _run_symmetry3d,
}


def run(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None) -> RunResult:
    """Execute one experiment and write its artifacts plus manifest."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.output)
    w = ArtifactWriter(out)
    w.text("config.yaml", cfg.to_yaml())
    np.random.seed(cfg.seed % 2 ** 32)
    try:
        with fft.set_workers(cfg.threads):
            ok, summary = RUNNERS[cfg.kind](cfg, w)
        status = EXIT_OK if ok else EXIT_FAILED
    except Exception as exc:  # keep partial artifacts and flag the run
        log.exception("run failed")
        summary = {"error": f"{type(exc).__name__}: {exc}"}
        w.json("error.json", summary)
        status = EXIT_FAILED
    w.manifest(cfg, "ok" if status == EXIT_OK else "failed")
    return RunResult(status, out, summary)
