"""The limit ground state: -Lap phi + omega0 phi = |phi|^(p-1) phi, |phi|_2 = 1.

The radial profile at omega = 1 comes from a shooting method on the central
value; the sampled profile is then polished by Newton on the discrete
equation.  The exact symmetry phi_omega(r) = omega^(1/(p-1)) phi_1(sqrt(omega) r)
carries it to any omega, and on a grid that is stretched along with
omega the discrete problem is covariant as well, so the unit-mass
frequency follows in closed form from a single solve at omega = 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .branch import newton_branch
from .functionals import energy_limit, euler_lagrange_residual, lagrange_multiplier
from .nonlinearity import P_LOWER, P_UPPER, Nonlinearity, ScalingContext
from .radial import RadialField, RadialGrid, mass, to_text

W_MAX = 50.0
SHOOT_RTOL = 1e-13
RMAX_SCALED = 24.0
N_DEFAULT = 2048


class ShootingError(RuntimeError):
    pass


def _check_p(p):
    if not P_LOWER < p < P_UPPER:
        raise ValueError(f"p={p} must lie strictly inside (7/3, 5)")


def _rhs(p):
    def f(r, y):
        w, dw = y
        return [dw, -2.0 * dw / r + w - abs(w) ** (p - 1.0) * w]
    return f


def _start(p, w0, r0):
    curv = (w0 - w0 ** p) / 3.0
    return [w0 + 0.5 * curv * r0 ** 2, curv * r0]


def _classify(p, w0, r_end=40.0):
    """+1 if the trajectory crosses zero (overshoot), -1 if it turns up (undershoot)."""
    cross = lambda r, y: y[0]
    cross.terminal, cross.direction = True, -1
    turn = lambda r, y: y[1]
    turn.terminal, turn.direction = True, 1
    r0 = 1e-6
    sol = solve_ivp(_rhs(p), (r0, r_end), _start(p, w0, r0), method="DOP853",
                    rtol=SHOOT_RTOL, atol=1e-14 * w0, events=(cross, turn))
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 1 if sol.y[0, -1] < 0 else -1


@lru_cache(maxsize=16)
def shoot_central_value(p: float, w_max: float = W_MAX) -> float:
    """Central value of the positive radial solution at omega = 1, by bisection."""
    _check_p(p)
    lo, hi = 1.0 + 1e-9, w_max
    if _classify(p, lo) != -1 or _classify(p, hi) != 1:
        raise ShootingError(f"no bisection bracket for w(0) in (1, {w_max}]")
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if _classify(p, mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=16)
def _shot_profile(p: float):
    """Dense ODE profile at omega = 1 up to the tail-fit radius, plus tail amplitude."""
    w0 = shoot_central_value(p)
    r0 = 1e-6
    small = lambda r, y: y[0] - 1e-6 * w0
    small.terminal, small.direction = True, -1
    sol = solve_ivp(_rhs(p), (r0, 60.0), _start(p, w0, r0), method="DOP853",
                    rtol=SHOOT_RTOL, atol=1e-14 * w0, dense_output=True, events=small)
    if not sol.t_events[0].size:
        raise ShootingError("profile never reached the tail-fit level")
    r_fit = float(sol.t_events[0][0])
    amp = 1e-6 * w0 * r_fit * math.exp(r_fit)
    return w0, r_fit, amp, sol.sol


def shot_profile(p: float, r):
    """Shooting solution at omega = 1 with Yukawa tail amp e^-r / r beyond the fit radius."""
    w0, r_fit, amp, dense = _shot_profile(p)
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    core = r <= r_fit
    rc = np.maximum(r[core], 1e-6)
    out[core] = dense(rc)[0]
    rt = r[~core]
    out[~core] = amp * np.exp(-rt) / rt
    return out


def shoot_ground_state(p: float, omega: float, grid: RadialGrid, *, polish: bool = True,
                       tol: float = 1e-10) -> RadialField:
    """Positive radial solution of -Lap w + omega w = |w|^(p-1) w sampled on ``grid``.

    The shooting profile is rescaled to ``omega`` and, unless ``polish`` is
    False, corrected by Newton so that it solves the discrete equation.
    """
    _check_p(p)
    if omega <= 0:
        raise ValueError("omega must be positive")
    k = math.sqrt(omega)
    u = RadialField(grid, omega ** (1.0 / (p - 1.0)) * shot_profile(p, k * grid.r))
    if not polish:
        return u
    nl = Nonlinearity.pure_power(p)
    return newton_branch(nl, ScalingContext.limit(p), omega, u, tol=tol)


@dataclass
class LimitGroundState:
    p: float
    omega0: float
    phi: RadialField
    mass_residual: float
    el_residual: float
    nehari_residual: float
    pohozaev_residual: float

    @property
    def energy(self) -> float:
        """K_{0,p}: the limit energy of phi."""
        return energy_limit(self.phi, self.p).total

    def to_dict(self) -> dict:
        return {"p": self.p, "omega0": self.omega0, "rmax": self.phi.grid.rmax,
                "n": self.phi.grid.n, "energy": self.energy,
                "mass_residual": self.mass_residual, "el_residual": self.el_residual,
                "nehari_residual": self.nehari_residual,
                "pohozaev_residual": self.pohozaev_residual}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def profile_text(self) -> str:
        return to_text(self.phi)


def mass_exponent(p: float) -> float:
    """e in mass(phi_omega) = omega^e mass(phi_1)."""
    return 2.0 / (p - 1.0) - 1.5


def _residuals(p, omega, phi):
    nl = Nonlinearity.pure_power(p)
    ctx = ScalingContext.limit(p)
    w = phi.grid.weights
    a = float(np.sum(w * phi.values * phi.grid.neg_laplacian(phi.values)))
    m = mass(phi)
    b = float(np.sum(w * np.abs(phi.values) ** (p + 1.0)))
    return dict(
        mass_residual=abs(m - 1.0),
        el_residual=euler_lagrange_residual(nl, ctx, omega, phi),
        nehari_residual=abs(a + omega * m - b) / b,
        pohozaev_residual=abs(energy_limit(phi, p).constraint_q),
    )


def normalize_mass(p: float, grid: RadialGrid | None = None, *,
                   rmax_scaled: float = RMAX_SCALED, n: int = N_DEFAULT) -> LimitGroundState:
    """Unit-mass limit ground state and its frequency omega0.

    Without ``grid`` the state lives on [0, rmax_scaled / sqrt(omega0)] with
    ``n`` nodes, where the scaling law is exact.  With a fixed ``grid`` the
    frequency is corrected by fixed-point steps omega <- omega m^(-1/e).
    """
    _check_p(p)
    e = mass_exponent(p)
    if e >= 0:
        raise ValueError("mass is omega-independent at p = 7/3")
    base = RadialGrid(rmax_scaled, n)
    phi1 = shoot_ground_state(p, 1.0, base)
    omega0 = mass(phi1) ** (-1.0 / e)
    if grid is None:
        grid = base.scaled(1.0 / math.sqrt(omega0))
        phi = RadialField(grid, omega0 ** (1.0 / (p - 1.0)) * phi1.values)
        phi = newton_branch(Nonlinearity.pure_power(p), ScalingContext.limit(p), omega0, phi)
    else:
        phi = shoot_ground_state(p, omega0, grid)
        for _ in range(30):
            m = mass(phi)
            if abs(m - 1.0) < 1e-14:
                break
            omega0 = omega0 * m ** (-1.0 / e)
            phi = newton_branch(Nonlinearity.pure_power(p), ScalingContext.limit(p), omega0, phi)
    return LimitGroundState(p, omega0, phi, **_residuals(p, omega0, phi))


def omega_from_quotient(state: LimitGroundState) -> float:
    """(|phi|_{p+1}^{p+1} - |grad phi|^2) / |phi|_2^2."""
    p = state.p
    return lagrange_multiplier(Nonlinearity.pure_power(p), ScalingContext.limit(p), state.phi)
