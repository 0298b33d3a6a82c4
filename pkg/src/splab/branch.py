"""Newton continuation of the radial solution branch w(c, omega).

Solves  (-Lap + omega) u + c^alpha phi_u u - lam^p f(u/lam) = 0  for fixed
(c, omega).  The linearization is applied matrix-free and the linear
systems are solved by GMRES on the Helmholtz-preconditioned operator
I + (-Lap + omega)^-1 [...], a compact perturbation of the identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .functionals import gradient_rescaled
from .nonlinearity import Nonlinearity, ScalingContext, scaled_fprime

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    """Newton iteration left its basin (step rejected or linear solve stalled)."""


@dataclass
class NewtonInfo:
    residuals: list = field(default_factory=list)
    steps: int = 0
    linear_iterations: list = field(default_factory=list)

    def quadratic_ratios(self, floor: float = 1e-12) -> list[float]:
        """r_{k+1} / r_k^2 over steps with r_k above the round-off floor."""
        r = self.residuals
        return [r[k + 1] / r[k] ** 2 for k in range(len(r) - 1) if r[k] > floor and r[k + 1] > 0]


def branch_residual(nl: Nonlinearity, ctx: ScalingContext, omega: float, u):
    """The map Phi(c, omega, u) as a field."""
    return gradient_rescaled(nl, ctx, omega, u)


def jacobian_action(nl: Nonlinearity, ctx: ScalingContext, omega: float, u, h,
                    phi_u: np.ndarray | None = None) -> np.ndarray:
    """dPhi_(c,omega,u)[h] on grid values.

    (-Lap + omega) h + c^alpha [phi_u h + 2 u (|x|^-1 * (u h))] - lam^(p-1) f'(u/lam) h
    """
    g = u.grid
    v = u.values
    out = g.neg_laplacian(h) + omega * h - scaled_fprime(nl, ctx, v) * h
    P = ctx.coulomb_prefactor
    if P != 0.0:
        if phi_u is None:
            phi_u = g.coulomb_potential(v ** 2)
        out = out + P * (phi_u * h + 2.0 * v * g.coulomb_potential(v * h))
    return out


def _relative_residual(res: np.ndarray, u, omega: float) -> float:
    g = u.grid
    scale = np.abs(g.neg_laplacian(u.values) + omega * u.values)[1:-1]
    return float(np.max(np.abs(res[1:-1])) / max(np.max(scale), 1e-300))


def newton_branch(nl: Nonlinearity, ctx: ScalingContext, omega: float, init, *,
                  tol: float = 1e-10, max_iter: int = 30, omega0: float | None = None,
                  window: float = 0.25, linear_rtol: float = 1e-13,
                  return_info: bool = False):
    """Solve Phi(c, omega, u) = 0 from ``init`` by damped Newton.

    ``tol`` bounds the sup-norm residual relative to sup |(-Lap + omega) u|.
    With ``omega0`` given, omega must lie within ``window * omega0`` of it.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if omega0 is not None and abs(omega - omega0) > window * omega0:
        raise ValueError(f"omega={omega} outside the window around omega0={omega0}")
    grid = init.grid
    n_int = grid.n - 2
    u = init.with_values(grid.regularize(init.values))
    info = NewtonInfo()

    def full(x):
        v = np.zeros(grid.n)
        v[1:-1] = x
        return v

    res = branch_residual(nl, ctx, omega, u).values
    r = _relative_residual(res, u, omega)
    info.residuals.append(r)
    for step in range(max_iter):
        if r <= tol:
            break
        phi_u = grid.coulomb_potential(u.values ** 2) if ctx.coulomb_prefactor else None

        def matvec(x, u=u, phi_u=phi_u):
            h = full(x)
            jh = jacobian_action(nl, ctx, omega, u, h, phi_u)
            return grid.helmholtz_solve(omega, jh)[1:-1]

        op = LinearOperator((n_int, n_int), matvec=matvec, dtype=float)
        rhs = -grid.helmholtz_solve(omega, res)[1:-1]
        count = [0]
        delta, status = gmres(op, rhs, rtol=linear_rtol, atol=0.0, restart=120, maxiter=4,
                              callback=lambda _: count.__setitem__(0, count[0] + 1),
                              callback_type="pr_norm")
        info.linear_iterations.append(count[0])
        if status < 0 or not np.all(np.isfinite(delta)):
            raise NewtonError(f"linear solve failed (status {status})")
        lam = 1.0
        while True:
            trial = u.with_values(grid.regularize(u.values + lam * full(delta)))
            res_t = branch_residual(nl, ctx, omega, trial).values
            r_t = _relative_residual(res_t, trial, omega)
            if r_t < (1.0 - 1e-4 * lam) * r or r_t <= tol:
                break
            lam *= 0.5
            if lam < 1e-6:
                raise NewtonError(f"step rejected after backtracking (residual {r:.3e})")
        u, res, r = trial, res_t, r_t
        info.residuals.append(r)
        info.steps = step + 1
        log.debug("newton step %d: residual %.3e (damping %.3g)", step + 1, r, lam)
    else:
        if r > tol:
            raise NewtonError(f"no convergence in {max_iter} steps (residual {r:.3e})")
    if r > tol:
        raise NewtonError(f"no convergence in {max_iter} steps (residual {r:.3e})")
    return (u, info) if return_info else u
