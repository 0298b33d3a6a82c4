"""Split a field near the translate family of phi into a translate plus a remainder.

tau solves <u - phi_tau, d_i phi_tau> = 0 (i = 1, 2, 3) with
phi_tau(x) = phi(x + tau), so R = u - phi_tau is L2-orthogonal to the
tangent space of the translate family at phi_tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cartesian import Field3D, RadialProfile
from .radial import RadialField

MAX_STEPS = 50


class RecenterError(RuntimeError):
    """Newton on tau left the basin."""


@dataclass
class Recentering:
    tau: np.ndarray
    remainder: object
    orthogonality: np.ndarray
    steps: int

    def __iter__(self):
        # allows ``tau, R = recenter(u, phi)``
        yield self.tau
        yield self.remainder


def _translate_terms(box, prof, tau, hessian=True):
    X, Y, Z = box.coordinates(-np.asarray(tau))
    rho = np.sqrt(X * X + Y * Y + Z * Z)
    val = prof(rho)
    d1 = prof(rho, 1)
    safe = np.where(rho > 0, rho, 1.0)
    unit = [X / safe, Y / safe, Z / safe]
    grads = [d1 * e for e in unit]
    hess = None
    if hessian:
        d2 = prof(rho, 2)
        over_r = np.where(rho > 0, d1 / safe, d2)
        hess = [[(d2 - over_r) * unit[i] * unit[j] + (over_r if i == j else 0.0)
                 for j in range(3)] for i in range(3)]
    return val, grads, hess


def orthogonality_residuals(u: Field3D, phi, tau) -> np.ndarray:
    """<u - phi_tau, d_i phi_tau> for i = 1, 2, 3."""
    prof = phi if isinstance(phi, RadialProfile) else RadialProfile(phi)
    val, grads, _ = _translate_terms(u.grid, prof, tau, hessian=False)
    w = u.grid.weights
    r = u.values - val
    return np.array([np.sum(r * g) * w for g in grads])


def recenter(u, phi, tol: float = 1e-13) -> Recentering:
    """Newton on tau from the centroid of u^2, then R = u - phi_tau.

    For a radial field tau is pinned to the origin and R = u - phi.
    """
    if isinstance(u, RadialField):
        if not isinstance(phi, RadialField) or phi.grid != u.grid:
            raise ValueError("radial recentering needs phi on the same grid")
        return Recentering(np.zeros(3), u - phi, np.zeros(3), 0)
    box = u.grid
    prof = phi if isinstance(phi, RadialProfile) else RadialProfile(phi)
    w = box.weights
    dens = u.values ** 2
    X, Y, Z = box.coordinates()
    tau = -np.array([np.sum(X * dens), np.sum(Y * dens), np.sum(Z * dens)]) / np.sum(dens)
    scale = np.sqrt(np.sum(u.values ** 2) * w)
    for step in range(1, MAX_STEPS + 1):
        val, grads, hess = _translate_terms(box, prof, tau)
        r = u.values - val
        F = np.array([np.sum(r * g) * w for g in grads])
        J = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                J[i, j] = (-np.sum(grads[j] * grads[i]) + np.sum(r * hess[i][j])) * w
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise RecenterError(f"singular translation Jacobian at tau={tau}") from exc
        tau = tau + delta
        if np.max(np.abs(tau)) >= box.L:
            raise RecenterError("translation left the box")
        if np.max(np.abs(delta)) <= tol * max(1.0, np.max(np.abs(tau))) * box.L or \
                np.max(np.abs(F)) <= 1e-15 * scale:
            break
    else:
        raise RecenterError(f"no convergence in {MAX_STEPS} steps")
    val, _, _ = _translate_terms(box, prof, tau, hessian=False)
    R = u.with_values(u.values - val)
    return Recentering(tau, R, orthogonality_residuals(u, prof, tau), step)
