"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import coulomb_double_integral, random_bumps  # noqa: E402
from splab.branch import branch_residual, jacobian_action, newton_branch  # noqa: E402
from splab.cartesian import (Box3D, Field3D, RadialProfile, coulomb_energy_3d,  # noqa: E402
                             embed_radial, minimize_3d, symmetry_defect)
from splab.functionals import (energy_rescaled, fiber_max, fiber_max_closed_form,  # noqa: E402
                               gradient_rescaled, pohozaev_rescaled)
from splab.limit import normalize_mass, omega_from_quotient  # noqa: E402
from splab.minimize import MinimizeOptions, minimize_rescaled  # noqa: E402
from splab.nonlinearity import (DEFAULT_Q_L, Nonlinearity, ScalingContext,  # noqa: E402
                                check_assumptions, eval_f, eval_F, f1_default, f2_default,
                                scaled_f, scaled_F)
from splab.radial import (RadialField, RadialGrid, coulomb_energy, dilate,  # noqa: E402
                          grad_norm_sq, h1_distance, inner, lp_norm, mass)
from splab.recenter import recenter  # noqa: E402
from splab.runner import smooth_perturbation  # noqa: E402
from splab.sweep import SweepOptions, continuation_sweep, trend_report  # noqa: E402

CUBIC = Nonlinearity.pure_power(3.0)
SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
_STATE: dict = {}


def _phi():
    if "phi" not in _STATE:
        _STATE["phi"] = normalize_mass(3.0)
    return _STATE["phi"]


def _gauss(grid, sigma):
    return RadialField(grid, (math.pi * sigma ** 2) ** -0.75 * np.exp(-grid.r ** 2 / (2 * sigma ** 2)))


def _smooth(grid, rng, scale):
    return grid.sample(lambda r: random_bumps(rng)(r / scale))


# ---------------------------------------------------------------- criteria

def criterion_1():
    t0 = time.perf_counter()
    worst_r = worst_3 = 0.0
    for sigma in (0.5, 1.0, 2.0):
        exact = math.sqrt(2 / math.pi) / sigma
        g = RadialGrid(16.0 * sigma, 4096)
        worst_r = max(worst_r, abs(coulomb_energy(_gauss(g, sigma)) / exact - 1))
        box = Box3D(12.0 * sigma, 64)
        r = box.radius()
        u = Field3D(box, (math.pi * sigma ** 2) ** -0.75 * np.exp(-r ** 2 / (2 * sigma ** 2)))
        worst_3 = max(worst_3, abs(coulomb_energy_3d(u) / exact - 1))
    dt = time.perf_counter() - t0
    ok = worst_r <= 1e-6 and worst_3 <= 1e-3 and dt < 5.0
    return ok, f"radial rel err {worst_r:.2e} (<=1e-6), 3D rel err {worst_3:.2e} (<=1e-3), {dt:.2f} s (<5)"


def criterion_2():
    rng = np.random.default_rng(2)
    g = RadialGrid(12.0, 128)
    worst = 0.0
    for _ in range(5):
        f = random_bumps(rng)
        ref = coulomb_double_integral(f, g.rmax)
        worst = max(worst, abs(coulomb_energy(g.sample(f)) / ref - 1))
    return worst <= 1e-4, f"max rel diff vs double quadrature {worst:.2e} (<=1e-4)"


def criterion_3():
    s = np.concatenate([-np.geomspace(1e-3, 1e3, 200), np.geomspace(1e-3, 1e3, 200)])
    ref_f, ref_F = eval_f(CUBIC, s), eval_F(CUBIC, s)
    exact = all(np.array_equal(scaled_f(CUBIC, ScalingContext(c, 3.0), s), ref_f)
                and np.array_equal(scaled_F(CUBIC, ScalingContext(c, 3.0), s), ref_F)
                for c in (1.0, 1e-1, 1e-3, 1e-5, 1e-8))
    g = RadialGrid(16.0, 2048)
    u = _gauss(g, 0.7)
    worst = 0.0
    for c in SCHEDULE:
        ctx = ScalingContext(c, 3.0)
        closed = 0.5 * grad_norm_sq(u) + 0.25 * c ** ctx.alpha * coulomb_energy(u) - lp_norm(u, 4) ** 4 / 4
        worst = max(worst, abs(energy_rescaled(CUBIC, ctx, u).total / closed - 1))
    ok = exact and worst <= 1e-14
    return ok, f"scaled f/F bitwise c-independent: {exact}; three-term form rel diff {worst:.1e}"


def criterion_4():
    rng = np.random.default_rng(4)
    g = RadialGrid(16.0, 2048)
    worst_id = 0.0
    for nl in (CUBIC, f2_default()):
        ctx = ScalingContext(1e-2, 3.0)
        for _ in range(3):
            u = _smooth(g, rng, 0.3)
            for t in (0.5, 1.0, 2.0):
                h = 1e-4 * t
                fd = (energy_rescaled(nl, ctx, dilate(u, t + h)).total
                      - energy_rescaled(nl, ctx, dilate(u, t - h)).total) / (2 * h)
                q = pohozaev_rescaled(nl, ctx, dilate(u, t)) / t
                worst_id = max(worst_id, abs(fd - q) / abs(q))
    worst_t = 0.0
    for p in (2.8, 3.0, 3.6):
        for sigma in (0.3, 1.0, 2.5):
            u = _gauss(g, sigma)
            t = fiber_max(Nonlinearity.pure_power(p), ScalingContext.limit(p), u).t_star
            worst_t = max(worst_t, abs(t / fiber_max_closed_form(u, p) - 1))
    ok = worst_id <= 1e-5 and worst_t <= 1e-8
    return ok, f"fiber identity rel err {worst_id:.2e} (<=1e-5), t* vs closed form {worst_t:.2e} (<=1e-8)"


def criterion_5():
    st = _phi()
    q0 = st.pohozaev_residual
    wq = abs(omega_from_quotient(st) / st.omega0 - 1)
    ref = normalize_mass(3.0, n=4096).omega0
    e1, e2 = (abs(normalize_mass(3.0, n=n).omega0 - ref) for n in (256, 512))
    order = math.log2(e1 / e2)
    ok = (st.el_residual <= 1e-8 and q0 <= 1e-6 and st.nehari_residual <= 1e-6
          and wq <= 1e-6 and order >= 2)
    return ok, (f"EL {st.el_residual:.1e}, |Q0| {q0:.1e}, Nehari {st.nehari_residual:.1e}, "
                f"omega0 quotient diff {wq:.1e}, refinement order {order:.1f}")


def criterion_6():
    st = _phi()
    rng = np.random.default_rng(6)
    g = st.phi.grid
    scale = 1 / math.sqrt(st.omega0)
    omega = st.omega0
    worst_g = worst_j = 0.0
    for nl in (CUBIC, f2_default()):
        for c in (1e-2, 1e-4):
            ctx = ScalingContext(c, 3.0)
            u = st.phi + _smooth(g, rng, scale).values * 0.1 * st.phi.values[0]
            grad = gradient_rescaled(nl, ctx, omega, u)
            for _ in range(3):
                h = _smooth(g, rng, scale)
                e = lambda v: energy_rescaled(nl, ctx, v).total + 0.5 * omega * mass(v)
                eps = 1e-6 * st.phi.values[0]
                fd = (e(u + h.values * eps) - e(u - h.values * eps)) / (2 * eps)
                worst_g = max(worst_g, abs(inner(grad, h) - fd) / abs(fd))
                # step at 1e-5 of the field amplitude balances round-off and truncation
                eps_j = 1e-5 * np.max(np.abs(u.values)) / np.max(np.abs(h.values))
                fdj = (branch_residual(nl, ctx, omega, u + h.values * eps_j).values
                       - branch_residual(nl, ctx, omega, u - h.values * eps_j).values) / (2 * eps_j)
                jh = jacobian_action(nl, ctx, omega, u, h.values)
                sl = slice(1, -1)
                worst_j = max(worst_j, float(np.max(np.abs(jh[sl] - fdj[sl])) / np.max(np.abs(jh[sl]))))
    ok = worst_g <= 1e-5 and worst_j <= 1e-5
    return ok, f"gradient rel err {worst_g:.2e}, Jacobian rel err {worst_j:.2e} (<=1e-5)"


def criterion_7():
    st = _phi()
    t0 = time.perf_counter()
    notes, ok = [], True
    for label, nl in (("pure power", CUBIC), ("f2", f2_default())):
        res = continuation_sweep(nl, 3.0, SCHEDULE, SweepOptions(), st)
        _STATE[f"sweep_{label}"] = res
        checks = trend_report(res)
        pos = all(r.K > 0 for r in res.rows)
        conv = all(r.converged for r in res.rows)
        ok &= pos and conv and all(c.passed for c in checks)
        worst = max(c.ratio for c in checks)
        notes.append(f"{label}: trends {'ok' if all(c.passed for c in checks) else 'FAIL'} "
                     f"(worst ratio {worst:.1e}), K>0 {pos}")
    dt = time.perf_counter() - t0
    ok &= dt <= 600
    return ok, "; ".join(notes) + f"; {dt:.1f} s"


def criterion_8():
    st = _phi()
    worst_nm = 0.0
    for c in (1e-2, 1e-3, 1e-4):
        ctx = ScalingContext(c, 3.0)
        rep = minimize_rescaled(f2_default(), ctx, st.phi, MinimizeOptions(tol=1e-10))
        u = newton_branch(f2_default(), ctx, rep.omega, rep.field, omega0=st.omega0, tol=1e-11)
        worst_nm = max(worst_nm, h1_distance(u, rep.field))
    cold = continuation_sweep(f2_default(), 3.0, SCHEDULE, SweepOptions(warm_start=False), st)
    warm = _STATE.get("sweep_f2") or continuation_sweep(f2_default(), 3.0, SCHEDULE, SweepOptions(), st)
    worst_cw = max(h1_distance(a, b) for a, b in zip(cold.fields, warm.fields))
    ok = worst_nm <= 1e-6 and worst_cw <= 1e-6
    return ok, f"minimizer vs Newton H1 {worst_nm:.1e}, cold vs warm H1 {worst_cw:.1e} (<=1e-6)"


def criterion_9():
    st = _phi()
    ctx = ScalingContext(1e-2, 3.0)
    rad = minimize_rescaled(CUBIC, ctx, st.phi, MinimizeOptions(tol=1e-10))
    box = Box3D(8.0 / math.sqrt(st.omega0), 64)
    prof = RadialProfile(st.phi)
    U = embed_radial(st.phi, box, profile=prof)
    rng = np.random.default_rng(0)
    u0 = U + smooth_perturbation(box, U.values, rng, 0.1, 1 / math.sqrt(st.omega0))
    u0 = u0 * (1 / math.sqrt(mass(u0)))
    t0 = time.perf_counter()
    f, rep = minimize_3d(CUBIC, ctx, u0, MinimizeOptions(tol=1e-6, max_iter=2000))
    rc = recenter(f, prof)
    dt = time.perf_counter() - t0
    defect = symmetry_defect(f, -rc.tau)
    gap = abs(rep.K / rad.K - 1)
    orth = float(np.max(np.abs(rc.orthogonality)))
    ok = rep.converged and defect <= 1e-3 and gap <= 1e-3 and orth <= 1e-10 and dt <= 900
    return ok, (f"converged {rep.converged} in {rep.iterations} it, defect {defect:.1e} (<=1e-3), "
                f"energy gap {gap:.1e} (<=1e-3), orthogonality {orth:.1e}, {dt:.0f} s")


def criterion_10():
    f1, f2 = f1_default(), f2_default()
    r1 = check_assumptions(f1, *DEFAULT_Q_L[f1.kind](f1))
    r2 = check_assumptions(f2, *DEFAULT_Q_L[f2.kind](f2))
    viol = check_assumptions(Nonlinearity.pure_power(3.0), 3.5, 4.0)
    caught = "F1" in viol.failed()
    ok = r1.all_passed and r2.all_passed and caught
    return ok, (f"f1 {'pass' if r1.all_passed else 'fail ' + ','.join(r1.failed())}, "
                f"f2 {'pass' if r2.all_passed else 'fail ' + ','.join(r2.failed())}, "
                f"violator caught {caught}")


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def _line(i, ok, detail):
    return f"criterion {i:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("i", sorted(CRITERIA))
def test_criterion(i, capsys):
    ok, detail = CRITERIA[i]()
    with capsys.disabled():
        print("\n" + _line(i, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(_line(i, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
