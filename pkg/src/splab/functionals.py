"""Energies, Pohozaev-type constraints, fiber maximization and gradients.

All functions accept any field exposing ``grid`` and ``values`` whose grid
provides ``weights``, ``neg_laplacian`` and ``coulomb_potential`` (radial
fields and 3D box fields both qualify).

Along the mass-preserving fiber u^t = t^(3/2) u(t .) the rescaled energy is

    Psi(t) = t^2 A / 2 + t P D / 4 - t^-3 int G(t^(3/2) u)

with A = |grad u|^2, D the Coulomb energy, P = c^alpha and G the scaled
antiderivative.  Psi and its first two t-derivatives are therefore cheap
functions of t once A and D are known, and no field is resampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .nonlinearity import (Nonlinearity, ScalingContext, eval_F, eval_f,
                           scaled_F, scaled_f, scaled_fprime)

FIBER_WINDOW = (1e-3, 1e3)
FIBER_PROBES = 61


class FiberError(RuntimeError):
    """No maximizer of the fiber map inside the bracketing window."""


@dataclass
class EnergyBreakdown:
    kinetic: float
    coulomb: float
    potential: float
    total: float
    constraint_q: float

    def to_record(self) -> dict:
        return {"kinetic": self.kinetic, "coulomb": self.coulomb, "potential": self.potential,
                "total": self.total, "q": self.constraint_q}


@dataclass
class FieldTerms:
    """Quadratic and quartic terms of a field, computed once and reused.

    The Coulomb part is filled lazily since it is the only nonlocal piece.
    """

    u: object
    mass: float
    kinetic: float
    _phi: Optional[np.ndarray] = field(default=None, repr=False)
    _coulomb: Optional[float] = None

    @classmethod
    def of(cls, u) -> "FieldTerms":
        g = u.grid
        m = float(np.sum(g.weights * u.values ** 2))
        a = float(np.sum(g.weights * u.values * g.neg_laplacian(u.values)))
        return cls(u, m, a)

    @property
    def phi(self) -> np.ndarray:
        if self._phi is None:
            self._phi = self.u.grid.coulomb_potential(self.u.values ** 2)
        return self._phi

    @property
    def coulomb(self) -> float:
        if self._coulomb is None:
            self._coulomb = float(np.sum(self.u.grid.weights * self.u.values ** 2 * self.phi))
        return self._coulomb

    def coulomb_if(self, prefactor: float) -> float:
        return self.coulomb if prefactor != 0.0 else 0.0


def _integral(u, g) -> float:
    return float(np.sum(u.grid.weights * g))


def _terms(u, terms):
    return terms if terms is not None else FieldTerms.of(u)


# ---------------------------------------------------------------- energies

def energy_original(nl: Nonlinearity, u, terms: FieldTerms | None = None) -> EnergyBreakdown:
    """I(u) = |grad u|^2/2 + D(u)/4 - int F(u), with Q(u) = d/dt I(u^t) at t = 1."""
    t = _terms(u, terms)
    v = u.values
    F = eval_F(nl, v)
    pot = _integral(u, F)
    coul = 0.25 * t.coulomb
    kin = 0.5 * t.kinetic
    q = t.kinetic + coul - 1.5 * _integral(u, eval_f(nl, v) * v - 2.0 * F)
    return EnergyBreakdown(kin, coul, pot, kin + coul - pot, q)


def energy_rescaled(nl: Nonlinearity, ctx: ScalingContext, u,
                    terms: FieldTerms | None = None) -> EnergyBreakdown:
    """Rescaled energy |grad u|^2/2 + c^alpha D/4 - int lam^(p+1) F(u/lam)."""
    t = _terms(u, terms)
    v = u.values
    P = ctx.coulomb_prefactor
    G = scaled_F(nl, ctx, v)
    pot = _integral(u, G)
    coul = 0.25 * P * t.coulomb_if(P)
    kin = 0.5 * t.kinetic
    q = t.kinetic + coul - 1.5 * _integral(u, scaled_f(nl, ctx, v) * v - 2.0 * G)
    return EnergyBreakdown(kin, coul, pot, kin + coul - pot, q)


def pohozaev_rescaled(nl: Nonlinearity, ctx: ScalingContext, u,
                      terms: FieldTerms | None = None) -> float:
    return energy_rescaled(nl, ctx, u, terms).constraint_q


def energy_limit(u, p: float, terms: FieldTerms | None = None) -> EnergyBreakdown:
    """|grad u|^2/2 - |u|_{p+1}^{p+1}/(p+1), with its Pohozaev functional."""
    t = _terms(u, terms)
    b = _integral(u, np.abs(u.values) ** (p + 1.0))
    kin = 0.5 * t.kinetic
    pot = b / (p + 1.0)
    q = t.kinetic - 1.5 * (p - 1.0) / (p + 1.0) * b
    return EnergyBreakdown(kin, 0.0, pot, kin - pot, q)


def pohozaev_limit(u, p: float, terms: FieldTerms | None = None) -> float:
    return energy_limit(u, p, terms).constraint_q


# ---------------------------------------------------------------- fiber map

@dataclass
class FiberMax:
    t_star: float
    value: float
    curvature: float
    iterations: int = 0


def fiber_profile(nl: Nonlinearity, ctx: ScalingContext, u, t: float,
                  terms: FieldTerms | None = None, order: int = 2):
    """(Psi(t), Psi'(t), Psi''(t)) for Psi(t) = rescaled energy of u^t."""
    tm = _terms(u, terms)
    P = ctx.coulomb_prefactor
    PD = P * tm.coulomb_if(P)
    w = u.grid.weights
    y = t ** 1.5 * u.values
    G = scaled_F(nl, ctx, y)
    g = scaled_f(nl, ctx, y)
    gy = g * y
    H = float(np.sum(w * (gy - 2.0 * G)))
    psi = 0.5 * t * t * tm.kinetic + 0.25 * t * PD - float(np.sum(w * G)) / t ** 3
    d1 = t * tm.kinetic + 0.25 * PD - 1.5 * H / t ** 4
    if order < 2:
        return psi, d1, math.nan
    X = float(np.sum(w * (scaled_fprime(nl, ctx, y) * y * y - gy)))
    d2 = tm.kinetic + 6.0 * H / t ** 5 - 2.25 * X / t ** 5
    return psi, d1, d2


def fiber_max(nl: Nonlinearity, ctx: ScalingContext, u, terms: FieldTerms | None = None,
              window: tuple[float, float] = FIBER_WINDOW, probes: int = FIBER_PROBES,
              rtol: float = 1e-10, guess: float | None = None) -> FiberMax:
    """Maximize t -> rescaled energy of u^t over t > 0.

    A geometric probe grid brackets the sign change of Psi', then a
    safeguarded Newton iteration on log t polishes the root to round-off.
    A ``guess`` (e.g. the previous iterate's t*) is tried as a cheap
    bracket [guess/2, 2 guess] before falling back to the full probe grid.
    """
    tm = _terms(u, terms)
    if tm.mass == 0.0:
        raise FiberError("zero field has no fiber maximum")
    bracket = None
    if guess is not None:
        a, b = 0.5 * guess, 2.0 * guess
        if (fiber_profile(nl, ctx, u, a, tm, order=1)[1] > 0
                and fiber_profile(nl, ctx, u, b, tm, order=1)[1] <= 0):
            bracket = (math.log(a), math.log(b))
    if bracket is None:
        ts = np.geomspace(window[0], window[1], probes)
        d1s = np.array([fiber_profile(nl, ctx, u, t, tm, order=1)[1] for t in ts])
        down = np.nonzero((d1s[:-1] > 0) & (d1s[1:] <= 0))[0]
        if len(down) == 0:
            raise FiberError(f"no sign change of the fiber derivative in {window}")
        i = down[0]
        bracket = (math.log(ts[i]), math.log(ts[i + 1]))
    lo, hi = bracket
    x = 0.5 * (lo + hi)
    iters = 0
    for iters in range(1, 200):
        t = math.exp(x)
        psi, d1, d2 = fiber_profile(nl, ctx, u, t, tm)
        g = t * d1
        if g == 0.0:
            break
        if g > 0:
            lo = x
        else:
            hi = x
        gp = g + t * t * d2
        x_new = x - g / gp if gp < 0 else math.nan
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        done = abs(x_new - x) <= 4e-16 * max(1.0, abs(x)) or hi - lo < 1e-15
        x = x_new
        if done:
            break
    t = math.exp(x)
    psi, d1, d2 = fiber_profile(nl, ctx, u, t, tm)
    if abs(d1) > rtol * max(abs(psi), 1e-300):
        raise FiberError(f"fiber Newton stalled at t={t:.6g}, Psi'={d1:.3e}")
    return FiberMax(t, psi, d2, iters)


def fiber_max_closed_form(u, p: float) -> float:
    """Limit functional, pure power: t* = [2(p+1)A / (3(p-1)B)]^(2/(3p-7))."""
    a = float(np.sum(u.grid.weights * u.values * u.grid.neg_laplacian(u.values)))
    b = float(np.sum(u.grid.weights * np.abs(u.values) ** (p + 1.0)))
    return (2.0 * (p + 1.0) * a / (3.0 * (p - 1.0) * b)) ** (2.0 / (3.0 * p - 7.0))


# ---------------------------------------------------------------- gradients

def gradient_rescaled(nl: Nonlinearity, ctx: ScalingContext, omega: float, u,
                      terms: FieldTerms | None = None):
    """L2 gradient of the rescaled energy plus (omega/2) |u|_2^2.

    (-Lap + omega) u + c^alpha phi_u u - lam^p f(u/lam)
    """
    g = u.grid
    v = u.values
    out = g.neg_laplacian(v) + omega * v - scaled_f(nl, ctx, v)
    P = ctx.coulomb_prefactor
    if P != 0.0:
        phi = terms.phi if terms is not None else g.coulomb_potential(v ** 2)
        out = out + P * phi * v
    return u.with_values(out)


def lagrange_multiplier(nl: Nonlinearity, ctx: ScalingContext, u,
                        terms: FieldTerms | None = None) -> float:
    """omega = [int lam^p f(u/lam) u - |grad u|^2 - c^alpha D(u)] / |u|_2^2."""
    t = _terms(u, terms)
    if t.mass == 0.0:
        raise ZeroDivisionError("Lagrange multiplier undefined for a zero field")
    P = ctx.coulomb_prefactor
    fu = _integral(u, scaled_f(nl, ctx, u.values) * u.values)
    return (fu - t.kinetic - P * t.coulomb_if(P)) / t.mass


def euler_lagrange_residual(nl: Nonlinearity, ctx: ScalingContext, omega: float, u,
                            terms: FieldTerms | None = None) -> float:
    """Relative sup-norm of the stationary equation on the interior nodes.

    Normalized by sup |(-Lap + omega) u| so the figure is resolution- and
    amplitude-independent.
    """
    g = gradient_rescaled(nl, ctx, omega, u, terms).values
    scale = np.abs(u.grid.neg_laplacian(u.values) + omega * u.values)
    sl = _interior(u)
    return float(np.max(np.abs(g[sl])) / max(np.max(scale[sl]), 1e-300))


def _interior(u):
    if u.values.ndim == 1:
        return slice(1, -1)
    return (slice(None),) * u.values.ndim


# ---------------------------------------------------------------- original variables

@dataclass
class OriginalFrameField:
    """A rescaled field mapped back to the original variables."""

    field: object
    c: float
    induced_mass: float
    spectral_parameter_factor: float

    def spectral_parameter(self, omega: float) -> float:
        """lambda in -Lap u - lambda u + phi_u u = f(u) for frequency omega."""
        return -omega * self.spectral_parameter_factor


def rescale_to_original(v, ctx: ScalingContext) -> OriginalFrameField:
    """x -> c^(4/(7-3p)) v(c^(2(p-1)/(7-3p)) x), sampled on a stretched radial grid."""
    if ctx.is_limit:
        raise ValueError("the limit context has no original-variable counterpart")
    c, p = ctx.c, ctx.p
    a = 4.0 / (7.0 - 3.0 * p)
    b = 2.0 * (p - 1.0) / (7.0 - 3.0 * p)
    grid = v.grid.scaled(c ** (-b))
    out = type(v)(grid, c ** a * v.values)
    m = float(np.sum(v.grid.weights * v.values ** 2))
    return OriginalFrameField(out, c, c ** 2 * m, c ** (2.0 * b))


def original_residual(nl: Nonlinearity, u, spectral_parameter: float) -> float:
    """Relative sup-norm of -Lap u - lambda u + phi_u u - f(u) on interior nodes."""
    g = u.grid
    v = u.values
    lap = g.neg_laplacian(v)
    res = lap - spectral_parameter * v + g.coulomb_potential(v ** 2) * v - eval_f(nl, v)
    scale = np.abs(lap - spectral_parameter * v)
    sl = _interior(u)
    return float(np.max(np.abs(res[sl])) / np.max(scale[sl]))


def coercivity_bound(l: float, kinetic_sq: float) -> float:
    """(3l - 10) / (6(l - 2)) |grad u|^2, a lower bound for the energy on the manifold."""
    return (3.0 * l - 10.0) / (6.0 * (l - 2.0)) * kinetic_sq

