"""SVG figures computed purely from a results directory."""

from __future__ import annotations

import json
import logging
import math
import warnings
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

CONVERGENCE = {
    "t_star": ("|t*_c(phi) - 1|", lambda r, m: abs(r["t_star_phi"] - 1.0)),
    "omega": ("|omega_c - omega_0|", lambda r, m: abs(r["omega"] - m["omega0"])),
    "energy": ("|K_c - K_0|", lambda r, m: abs(r["K"] - m["K0"])),
    "h1": ("||u_c - phi||_H1", lambda r, m: r["h1_dist"]),
}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "splab"
    return plt


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _read_sweep(results: Path):
    import csv
    csv_path, meta_path = results / "sweep.csv", results / "sweep.meta.json"
    if not csv_path.exists() or not meta_path.exists():
        return None, None
    with open(csv_path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    meta = json.loads(meta_path.read_text())
    return rows, meta


def _read_profile(path: Path):
    data = np.loadtxt(path, comments="#")
    return data[:, 0], data[:, 1]


def _convergence_plots(rows, meta, out: Path, plt) -> list[Path]:
    written = []
    for name, (label, fn) in CONVERGENCE.items():
        try:
            pts = [(float(r["c"]), fn({k: float(v) for k, v in r.items()}, meta))
                   for r in rows if int(r.get("converged", 1))]
        except KeyError as exc:
            warnings.warn(f"skipping {name} plot: missing column {exc}")
            continue
        pts = [(c, v) for c, v in pts if v > 0 and math.isfinite(v)]
        if not pts:
            warnings.warn(f"skipping {name} plot: no positive values")
            continue
        c, v = map(np.array, zip(*pts))
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.loglog(c, v, "o-")
        ax.set_xlabel("c")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = out / f"convergence_{name}.svg"
        _save(fig, path)
        plt.close(fig)
        written.append(path)
    return written


def _profile_overlay(results: Path, rows, out: Path, plt, target_c: float = 1e-4) -> list[Path]:
    prof_dir = results / "profiles"
    phi_path = results / "phi_profile.txt"
    if not prof_dir.is_dir() or not phi_path.exists():
        return []
    cs = [float(r["c"]) for r in rows]
    if not cs:
        return []
    i = int(np.argmin([abs(math.log(c / target_c)) for c in cs]))
    path_u = prof_dir / f"profile_{i:02d}.txt"
    if not path_u.exists():
        warnings.warn(f"missing {path_u.name}; skipping profile overlay")
        return []
    r, phi = _read_profile(phi_path)
    ru, u = _read_profile(path_u)
    gap = float(np.max(np.abs(u - phi))) if len(u) == len(phi) else math.nan
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(r, phi, "k-", label="phi")
    ax.plot(ru, u, "r--", label=f"u_c, c={cs[i]:g}")
    ax.set_xlabel("r")
    ax.legend()
    fig.tight_layout()
    svg = out / "profile_overlay.svg"
    _save(fig, svg)
    plt.close(fig)
    side = out / "profile_overlay.json"
    side.write_text(json.dumps({"c": cs[i], "max_abs_gap": gap,
                                "max_rel_gap": gap / float(np.max(np.abs(phi)))},
                               indent=2, sort_keys=True) + "\n")
    return [svg, side]


def _symmetry_bars(results: Path, out: Path, plt) -> list[Path]:
    path = results / "symmetry3d.json"
    if not path.exists():
        return []
    doc = json.loads(path.read_text())
    try:
        vals = [doc["initial_defect"], doc["defect"]]
    except KeyError as exc:
        warnings.warn(f"skipping symmetry plot: missing {exc}")
        return []
    fig, ax = plt.subplots(figsize=(4.0, 3.5))
    ax.bar(["initial", "minimizer"], vals, color=["0.6", "C0"])
    ax.set_yscale("log")
    ax.set_ylabel("symmetry defect")
    fig.tight_layout()
    svg = out / "symmetry_defect.svg"
    _save(fig, svg)
    plt.close(fig)
    return [svg]


def emit_plots(results_dir, out_dir=None) -> list[Path]:
    """Write every figure the results support; return the written paths."""
    results = Path(results_dir)
    out = Path(out_dir) if out_dir is not None else results / "plots"
    rows, meta = _read_sweep(results) if results.is_dir() else (None, None)
    has_sym = (results / "symmetry3d.json").exists()
    if rows is None and not has_sym:
        warnings.warn(f"no plottable results in {results}")
        return []
    out.mkdir(parents=True, exist_ok=True)
    plt = _pyplot()
    written: list[Path] = []
    if rows is not None:
        written += _convergence_plots(rows, meta, out, plt)
        written += _profile_overlay(results, rows, out, plt)
    written += _symmetry_bars(results, out, plt)
    return written
