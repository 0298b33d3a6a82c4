"""Ground states by descent of the fiber-maximized energy on the unit sphere.

The objective is E(u) = max_t I(u^t) over unit-mass u.  Because the fiber
maximum is stationary in t, the gradient of E is the gradient of
u -> I(u^t) at frozen t = t*(u):

    t^2 (-Lap u) + t P phi_u u - t^(-3/2) g(t^(3/2) u),

so iterates need not be resampled.  E is invariant along dilation orbits,
so an iterate whose t* drifts away from 1 is carried back to u^(t*) to keep
it well resolved on the grid; the final dilation by t* places the result on
the constraint manifold.

Steps are Barzilai-Borwein in the metric of the Helmholtz operator
t^2 (-Lap) + omega, projected onto the tangent space of the sphere, with
nonmonotone backtracking on E.  The solver is grid-agnostic: it only uses
the operators that both the radial and the 3D grids provide.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .functionals import (EnergyBreakdown, FiberError, FieldTerms, energy_rescaled,
                          euler_lagrange_residual, fiber_max, lagrange_multiplier)
from .nonlinearity import Nonlinearity, ScalingContext, scaled_f

log = logging.getLogger(__name__)


@dataclass
class MinimizeOptions:
    tol: float = 1e-8
    max_iter: int = 5000
    divergence_window: int = 50
    memory: int = 10
    c_ceiling: float = 1.0
    max_backtracks: int = 40
    mass_tol: float = 1e-6
    redilate: float = 0.05
    fix_dilation: bool = True


@dataclass
class MinimizerReport:
    field: object
    energy: EnergyBreakdown
    omega: float
    q_residual: float
    el_residual: float
    iterations: int
    converged: bool
    t_star: float = 1.0
    curvature: float = math.nan
    grad_norm: float = math.nan
    sign_flips: int = 0
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def K(self) -> float:
        return self.energy.total

    def summary(self) -> dict:
        return {"K": self.K, "omega": self.omega, "q_residual": self.q_residual,
                "el_residual": self.el_residual, "iterations": self.iterations,
                "converged": self.converged, "t_star": self.t_star,
                "curvature": self.curvature, "grad_norm": self.grad_norm,
                "sign_flips": self.sign_flips, "message": self.message}


def _dot(g, a, b) -> float:
    return float(np.sum(g.weights * a * b))


def _project(grid, v):
    reg = getattr(grid, "regularize", None)
    return reg(v) if reg is not None else v


def pulled_back_gradient(nl, ctx, u, t, terms: FieldTerms) -> np.ndarray:
    """L2 gradient of u -> I(u^t) at fixed t."""
    g = u.grid
    v = u.values
    out = t * t * g.neg_laplacian(v) - t ** -1.5 * scaled_f(nl, ctx, t ** 1.5 * v)
    P = ctx.coulomb_prefactor
    if P != 0.0:
        out = out + t * P * terms.phi * v
    return out


def _sign_flips(values) -> int:
    peak = np.max(np.abs(values))
    return int(np.count_nonzero(values < -1e-10 * peak))


def minimize_rescaled(nl: Nonlinearity, ctx: ScalingContext, init,
                      opts: MinimizeOptions | None = None) -> MinimizerReport:
    """Minimize the fiber-maximized rescaled energy over unit-mass fields."""
    opts = opts or MinimizeOptions()
    if nl.p != ctx.p:
        raise ValueError(f"nonlinearity exponent {nl.p} does not match context p={ctx.p}")
    if ctx.c > opts.c_ceiling:
        raise ValueError(f"c={ctx.c} above the configured ceiling {opts.c_ceiling}")
    grid = init.grid
    m0 = _dot(grid, init.values, init.values)
    if abs(m0 - 1.0) > opts.mass_tol:
        raise ValueError(f"initial mass {m0:.10g} is not 1 within {opts.mass_tol}")

    def sphere(v):
        v = _project(grid, v)
        return init.with_values(v / math.sqrt(_dot(grid, v, v)))

    u = sphere(np.abs(init.values))
    gen = getattr(grid, "dilation_generator", None)
    history: list[float] = []
    it, converged, message = 0, False, ""
    rel = math.inf
    u_prev = G_prev = None
    rises = 0
    try:
        terms = FieldTerms.of(u)
        fm = fiber_max(nl, ctx, u, terms)
        E = fm.value
        history.append(E)
        recent = [E]
        for it in range(opts.max_iter + 1):
            t = fm.t_star
            grad = pulled_back_gradient(nl, ctx, u, t, terms)
            omega = -_dot(grid, grad, u.values)
            G = grad + omega * u.values
            if opts.fix_dilation and gen is not None:
                # E is constant along dilation orbits; drop the spurious
                # component the discretization leaves in that direction
                gv = gen(u.values)
                G = G - (_dot(grid, G, gv) / _dot(grid, gv, gv)) * gv
            # preconditioner: (t^2 (-Lap) + shift)^-1; shift stays positive
            shift = omega if omega > 0 else t * t * terms.kinetic
            TG = grid.helmholtz_solve(shift, G, scale=t * t)
            Tu = grid.helmholtz_solve(shift, u.values, scale=t * t)
            d = -(TG - (_dot(grid, TG, u.values) / _dot(grid, Tu, u.values)) * Tu)
            d = _project(grid, d)
            gTg = _dot(grid, G, TG)
            rel = math.sqrt(max(gTg, 0.0) / (t * t * terms.kinetic + shift))
            if rel <= opts.tol:
                converged = True
                break
            if it == opts.max_iter:
                message = f"max_iter reached (gradient {rel:.3e})"
                break
            tau = 1.0
            if u_prev is not None:
                s = u.values - u_prev
                y = G - G_prev
                sy = _dot(grid, s, y)
                sAs = _dot(grid, s, t * t * grid.neg_laplacian(s) + shift * s)
                if sy > 0:
                    tau = min(max(sAs / sy, 1e-4), 1e4)
            slope = _dot(grid, G, d)
            E_ref = max(recent[-opts.memory:])
            for _ in range(opts.max_backtracks):
                trial = sphere(u.values + tau * d)
                tt = FieldTerms.of(trial)
                fm_t = fiber_max(nl, ctx, trial, tt, guess=t)
                if fm_t.value <= E_ref + 1e-4 * tau * slope + 1e-13 * abs(E_ref):
                    break
                tau *= 0.5
            else:
                log.debug("line search failed: slope=%.3e E=%.15g E_ref=%.15g last=%.15g",
                          slope, E, E_ref, fm_t.value)
                message = f"line search failed (gradient {rel:.3e})"
                break
            rises = rises + 1 if fm_t.value > E else 0
            if rises >= opts.divergence_window:
                message = f"energy increased over {rises} consecutive steps"
                break
            u_prev, G_prev = u.values, G
            u, terms, fm, E = trial, tt, fm_t, fm_t.value
            if abs(math.log(fm.t_star)) > opts.redilate:
                u = sphere(grid.dilate(u.values, fm.t_star))
                terms = FieldTerms.of(u)
                fm = fiber_max(nl, ctx, u, terms, guess=1.0)
                E = fm.value
                u_prev = G_prev = None
                recent.clear()
            history.append(E)
            recent.append(E)
            if it % 100 == 0:
                log.debug("iter %d: E=%.15g t*=%.6g grad=%.3e tau=%.3g", it, E, t, rel, tau)
    except FiberError as exc:
        message = f"fiber maximization failed: {exc}"
        converged = False

    return _finalize(nl, ctx, u, it, converged, rel, message, history)


def _finalize(nl, ctx, u, iterations, converged, grad_norm, message, history):
    grid = u.grid
    t_star = math.nan
    curvature = math.nan
    try:
        t_star = fiber_max(nl, ctx, u).t_star
        v = grid.dilate(u.values, t_star)
        v = _project(grid, v)
        v = u.with_values(v / math.sqrt(_dot(grid, v, v)))
        terms = FieldTerms.of(v)
        curvature = fiber_max(nl, ctx, v, terms, guess=1.0).curvature
    except FiberError as exc:
        v, terms = u, FieldTerms.of(u)
        converged = False
        message = message or f"final fiber projection failed: {exc}"
    en = energy_rescaled(nl, ctx, v, terms)
    omega = lagrange_multiplier(nl, ctx, v, terms)
    el = euler_lagrange_residual(nl, ctx, omega, v, terms)
    return MinimizerReport(field=v, energy=en, omega=omega, q_residual=en.constraint_q,
                           el_residual=el, iterations=iterations, converged=converged,
                           t_star=t_star, curvature=curvature, grad_norm=grad_norm,
                           sign_flips=_sign_flips(v.values), message=message,
                           history=history)
