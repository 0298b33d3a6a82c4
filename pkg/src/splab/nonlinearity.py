"""Nonlinearities f, their antiderivatives, the c-scaled family and assumption checks.

Built-in kinds are sums of odd powers ``sum_i a_i |s|^(p_i - 1) s``.  The
scaled family ``lambda^p f(s / lambda)`` is evaluated term by term as
``a_i lambda^(p - p_i) |s|^(p_i - 1) s`` so no huge intermediate is formed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

P_LOWER = 7.0 / 3.0
P_UPPER = 5.0
KINDS = ("pure_power", "power_sum", "power_difference", "custom")


class NonlinearityError(ValueError):
    pass


class ScalingOverflowWarning(RuntimeWarning):
    """Custom f was evaluated through its dominant-power asymptote."""


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    powers: tuple[float, ...]
    coefficients: tuple[float, ...]
    limit_exponent: float
    func: Optional[Callable] = field(default=None, compare=False, repr=False)
    antiderivative: Optional[Callable] = field(default=None, compare=False, repr=False)
    derivative: Optional[Callable] = field(default=None, compare=False, repr=False)
    expression: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NonlinearityError(f"unknown kind {self.kind!r}")
        p = self.limit_exponent
        if not P_LOWER < p < P_UPPER:
            raise NonlinearityError(f"limit exponent {p} outside (7/3, 5)")
        if self.kind == "custom":
            if self.func is None:
                raise NonlinearityError("custom nonlinearity needs a callable f")
            return
        if len(self.powers) != len(self.coefficients) or not self.powers:
            raise NonlinearityError("powers and coefficients must be non-empty and aligned")
        if self.kind == "power_difference":
            p1, p2 = self.powers
            if not (P_LOWER < p1 < P_UPPER and 2.0 < p2 < p1):
                raise NonlinearityError("power_difference needs 7/3 < p1 < 5 and 2 < p2 < p1")
        else:
            for q in self.powers:
                if not P_LOWER < q < P_UPPER:
                    raise NonlinearityError(f"power {q} outside (7/3, 5)")
        if not math.isclose(p, max(self.powers)):
            raise NonlinearityError("limit exponent must equal the dominant power")

    # construction -----------------------------------------------------

    @classmethod
    def pure_power(cls, p: float) -> "Nonlinearity":
        return cls("pure_power", (float(p),), (1.0,), float(p))

    @classmethod
    def power_sum(cls, powers: Sequence[float]) -> "Nonlinearity":
        """f1(s) = sum_i |s|^(p_i-1) s with all p_i in (7/3, 5)."""
        powers = tuple(sorted(float(q) for q in powers))
        return cls("power_sum", powers, (1.0,) * len(powers), max(powers))

    @classmethod
    def power_difference(cls, p1: float, p2: float) -> "Nonlinearity":
        """f2(s) = |s|^(p1-1) s - |s|^(p2-1) s."""
        return cls("power_difference", (float(p1), float(p2)), (1.0, -1.0), float(p1))

    @classmethod
    def custom(cls, f: Callable, p: float, F: Callable | None = None,
               fprime: Callable | None = None, expression: str | None = None) -> "Nonlinearity":
        return cls("custom", (), (), float(p), func=f, antiderivative=F,
                   derivative=fprime, expression=expression)

    @classmethod
    def from_expression(cls, expression: str, p: float) -> "Nonlinearity":
        """Custom f from a numpy expression in ``s``, e.g. ``"np.abs(s)**2*s"``."""
        code = compile(expression, "<nonlinearity>", "eval")
        namespace = {"np": np, "__builtins__": {}}

        def f(s):
            return eval(code, namespace, {"s": np.asarray(s, dtype=float)})

        return cls.custom(f, p, expression=expression)

    @classmethod
    def from_config(cls, block: dict) -> "Nonlinearity":
        kind = block.get("kind")
        if kind == "pure_power":
            return cls.pure_power(block["powers"][0] if "powers" in block else block["p"])
        if kind == "power_sum":
            return cls.power_sum(block["powers"])
        if kind == "power_difference":
            p1, p2 = block["powers"]
            return cls.power_difference(p1, p2)
        if kind == "custom":
            return cls.from_expression(block["expression"], block["p"])
        raise NonlinearityError(f"unknown kind {kind!r}")

    def to_config(self) -> dict:
        if self.kind == "custom":
            return {"kind": "custom", "expression": self.expression, "p": self.limit_exponent}
        return {"kind": self.kind, "powers": list(self.powers),
                "coefficients": list(self.coefficients)}

    @property
    def p(self) -> float:
        return self.limit_exponent


def f1_default() -> Nonlinearity:
    return Nonlinearity.power_sum((2.5, 3.0, 3.5))


def f2_default() -> Nonlinearity:
    return Nonlinearity.power_difference(3.0, 2.5)


# defaults (q, l) used by the assumption suite, keyed by kind
DEFAULT_Q_L = {
    "pure_power": lambda nl: (nl.p + 1.0, min(nl.p + 1.0, 5.999)),
    "power_sum": lambda nl: (max(nl.powers) + 1.0, min(min(nl.powers) + 1.0, 5.999)),
    "power_difference": lambda nl: (4.0, 3.5),
}


def _odd_power(s, q):
    a = np.abs(s)
    return a ** (q - 1.0) * s


# ---------------------------------------------------------------- f, F, f'

def eval_f(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    if nl.kind == "custom":
        return np.asarray(nl.func(s), dtype=float)
    out = np.zeros_like(s)
    for q, a in zip(nl.powers, nl.coefficients):
        out = out + a * _odd_power(s, q)
    return out


def eval_F(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    if nl.kind == "custom":
        if nl.antiderivative is not None:
            return np.asarray(nl.antiderivative(s), dtype=float)
        return _quad_F(nl, s)
    out = np.zeros_like(s)
    for q, a in zip(nl.powers, nl.coefficients):
        # written as |s|^(q-1) s * s so that f(s) s = (q+1) F(s) holds bitwise
        out = out + a * (_odd_power(s, q) * s) / (q + 1.0)
    return out


def _quad_F(nl, s):
    flat = np.atleast_1d(s).ravel()
    out = np.empty_like(flat)
    g = lambda t: float(nl.func(np.asarray(t)))
    for i, x in enumerate(flat):
        if x == 0.0:
            out[i] = 0.0
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(g, 0.0, x, epsabs=1e-12, epsrel=1e-12, limit=200)
            except integrate.IntegrationWarning as exc:
                raise NonlinearityError(f"F({x}) quadrature did not converge: {exc}") from exc
        out[i] = val
    return out.reshape(np.shape(s))


def eval_fprime(nl: Nonlinearity, s):
    s = np.asarray(s, dtype=float)
    if nl.kind == "custom":
        if nl.derivative is not None:
            return np.asarray(nl.derivative(s), dtype=float)
        step = 1e-6 * np.maximum(1.0, np.abs(s))
        return (eval_f(nl, s + step) - eval_f(nl, s - step)) / (2.0 * step)
    out = np.zeros_like(s)
    a_s = np.abs(s)
    for q, a in zip(nl.powers, nl.coefficients):
        out = out + a * q * a_s ** (q - 1.0)
    return out


# ---------------------------------------------------------------- scaling

@dataclass(frozen=True)
class ScalingContext:
    """Rescaling data for a mass parameter c > 0 and limit exponent p.

    ``lam`` is the zoom parameter c^(4/(3p-7)) that tends to 0 with c and
    ``zoom`` = 1/lam is the factor applied to the argument of f.  ``c == 0``
    denotes the limit functional (pure power, no Coulomb term).
    """

    c: float
    p: float

    def __post_init__(self):
        if self.c < 0 or not math.isfinite(self.c):
            raise ValueError(f"c must be >= 0, got {self.c}")
        if not P_LOWER < self.p < P_UPPER:
            raise ValueError(f"p={self.p} outside (7/3, 5)")

    @classmethod
    def limit(cls, p: float) -> "ScalingContext":
        return cls(0.0, p)

    @property
    def is_limit(self) -> bool:
        return self.c == 0.0

    @property
    def alpha(self) -> float:
        p = self.p
        return 8.0 * (2.0 - p) / (7.0 - 3.0 * p)

    @property
    def lam(self) -> float:
        if self.is_limit:
            return 0.0
        return self.c ** (4.0 / (3.0 * self.p - 7.0))

    @property
    def zoom(self) -> float:
        if self.is_limit:
            return math.inf
        return self.c ** (4.0 / (7.0 - 3.0 * self.p))

    @property
    def coulomb_prefactor(self) -> float:
        """c^alpha, the weight of the Coulomb term in the rescaled energy."""
        if self.is_limit:
            return 0.0
        return self.c ** self.alpha


OVERFLOW_CAP = 1e8


def _scaled_terms(nl, ctx, s, which):
    """Sum over built-in power terms of the scaled f, F or f'."""
    p = ctx.p
    a_s = np.abs(s)
    out = np.zeros_like(s)
    for q, a in zip(nl.powers, nl.coefficients):
        if ctx.is_limit:
            if q != p:
                continue
            weight = a
        else:
            weight = a * ctx.lam ** (p - q)
        if which == "f":
            out = out + weight * a_s ** (q - 1.0) * s
        elif which == "F":
            out = out + weight * (a_s ** (q - 1.0) * s * s) / (q + 1.0)
        else:
            out = out + weight * q * a_s ** (q - 1.0)
    return out


def _scaled_custom(nl, ctx, s, which, cap):
    p = ctx.p
    if ctx.is_limit:
        big = np.ones(np.shape(s), dtype=bool)
    else:
        big = np.abs(s) * ctx.zoom > cap
    out = np.empty_like(s)
    a_s = np.abs(s)
    if which == "f":
        asym = a_s ** (p - 1.0) * s
    elif which == "F":
        asym = a_s ** (p + 1.0) / (p + 1.0)
    else:
        asym = p * a_s ** (p - 1.0)
    out[big] = asym[big]
    if np.any(big) and not ctx.is_limit:
        warnings.warn(f"{int(big.sum())} points beyond overflow cap {cap:g}; "
                      "using dominant-power asymptote", ScalingOverflowWarning, stacklevel=3)
    small = ~big
    if np.any(small):
        lam, x = ctx.lam, s[small] * ctx.zoom
        if which == "f":
            out[small] = lam ** p * eval_f(nl, x)
        elif which == "F":
            out[small] = lam ** (p + 1.0) * eval_F(nl, x)
        else:
            out[small] = lam ** (p - 1.0) * eval_fprime(nl, x)
    return out


def scaled_f(nl: Nonlinearity, ctx: ScalingContext, s, cap: float = OVERFLOW_CAP):
    """lam^p f(s/lam); for c = 0 the limit |s|^(p-1) s."""
    s = np.asarray(s, dtype=float)
    if nl.kind == "custom":
        return _scaled_custom(nl, ctx, s, "f", cap)
    return _scaled_terms(nl, ctx, s, "f")


def scaled_F(nl: Nonlinearity, ctx: ScalingContext, s, cap: float = OVERFLOW_CAP):
    s = np.asarray(s, dtype=float)
    if nl.kind == "custom":
        return _scaled_custom(nl, ctx, s, "F", cap)
    return _scaled_terms(nl, ctx, s, "F")


def scaled_fprime(nl: Nonlinearity, ctx: ScalingContext, s, cap: float = OVERFLOW_CAP):
    s = np.asarray(s, dtype=float)
    if nl.kind == "custom":
        return _scaled_custom(nl, ctx, s, "fprime", cap)
    return _scaled_terms(nl, ctx, s, "fprime")


# ---------------------------------------------------------------- assumptions

@dataclass(frozen=True)
class SamplingSpec:
    """Sample sets for the assumption checks.

    The s-grid is symmetric, logarithmic from ``s_min`` up to ``s_max``.
    """

    n_s: int = 2001
    s_min: float = 1e-6
    s_max: float = 1e3
    lambdas: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    interval: tuple[float, float] = (-10.0, 10.0)
    chi: Optional[float] = None
    n_interval: int = 2001

    def s_grid(self) -> np.ndarray:
        half = np.geomspace(self.s_min, self.s_max, (self.n_s - 1) // 2)
        return np.concatenate([-half[::-1], [0.0], half])


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    margin: float
    detail: dict = field(default_factory=dict)


@dataclass
class AssumptionReport:
    q: float
    l: float
    checks: dict

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {"q": self.q, "l": self.l, "all_passed": self.all_passed,
                "checks": {k: {"passed": c.passed, "margin": c.margin, **c.detail}
                           for k, c in self.checks.items()}}


def _check_F1(nl, q, s):
    fs = eval_f(nl, s) * s
    qF = q * eval_F(nl, s)
    excess = fs - qF
    scale = np.abs(fs) + np.abs(qF)
    nz = scale > 0
    rel = np.zeros_like(excess)
    rel[nz] = excess[nz] / scale[nz]
    worst = int(np.argmax(rel))
    return AssumptionCheck("F1", bool(rel.max() <= 1e-12), float(excess.max()),
                           {"max_relative_excess": float(rel.max()),
                            "worst_s": float(s[worst])})


def _check_F2(nl, s):
    pos = s[s > 0]
    small = pos[:40]
    r_small = np.abs(eval_F(nl, small)) / small ** 2
    big = pos[-200:]
    r_big = eval_F(nl, big) / big ** (10.0 / 3.0)
    near_zero = bool(r_small[0] <= 1e-2 * max(r_small[-1], 1e-300) or r_small[0] < 1e-6)
    trend_small = bool(np.all(np.diff(r_small) >= -1e-12 * r_small[1:]))
    growing = bool(np.all(np.diff(r_big) > 0) and r_big[-1] > 10.0 * r_big[0])
    passed = near_zero and trend_small and growing
    return AssumptionCheck("F2", passed, float(r_small[0]),
                           {"F_over_s2_at_smallest": float(r_small[0]),
                            "F_over_s103_at_largest": float(r_big[-1])})


def _check_F3(nl, l, s):
    worst = 0.0
    ok = True
    for half in (s[s > 0], s[s < 0]):
        half = np.sort(half)
        g = (eval_f(nl, half) * half - 2.0 * eval_F(nl, half)) / (np.abs(half) ** (l - 1.0) * half)
        drop = -np.diff(g)
        tol = 1e-11 * np.maximum(np.abs(g[1:]), np.abs(g[:-1]))
        bad = drop - tol
        worst = max(worst, float(drop.max()))
        ok = ok and bool(np.all(bad <= 0))
    return AssumptionCheck("F3", ok, worst, {"max_decrease": worst})


def a1_deviation(nl, lam: float, s) -> float:
    """sup over s of |lam^(p-1) f'(s/lam) - p |s|^(p-1)|."""
    ctx = ScalingContext(lam ** ((3.0 * nl.p - 7.0) / 4.0), nl.p)
    dev = np.abs(scaled_fprime(nl, ctx, s) - nl.p * np.abs(s) ** (nl.p - 1.0))
    return float(dev.max())


def _check_A1(nl, samples):
    a, b = samples.interval
    s = np.linspace(a, b, samples.n_interval)
    devs = [a1_deviation(nl, lam, s) for lam in sorted(samples.lambdas, reverse=True)]
    decreasing = all(d2 <= d1 * (1 + 1e-12) + 1e-300 for d1, d2 in zip(devs, devs[1:]))
    passed = decreasing and (devs[-1] <= 1e-2 * devs[0] or devs[-1] < 1e-12)
    return AssumptionCheck("A1", passed, devs[-1], {"sup_deviation_by_lambda": devs})


def _check_A2(nl, samples, s):
    """Envelope |lam^(p-1) f'(s/lam) - p|s|^(p-1)| < eps |s|^(p-1) for |s| > chi.

    Also evaluates the two integrated bounds on scaled f and F for the
    bands |s| <= chi + 1 and |s| > chi, reporting the tighter of the two in
    the overlap band.
    """
    p = nl.p
    # the integrated bound needs chi^p / p >= chi
    chi = samples.chi if samples.chi is not None else p ** (1.0 / (p - 1.0))
    outer = s[np.abs(s) > chi]
    inner = s[(np.abs(s) <= chi + 1.0) & (s != 0)]
    eps_by_lam, bound_ok = [], True
    tighter = []
    for lam in sorted(samples.lambdas, reverse=True):
        ctx = ScalingContext(lam ** ((3.0 * p - 7.0) / 4.0), p)
        dev = np.abs(scaled_fprime(nl, ctx, outer) - p * np.abs(outer) ** (p - 1.0))
        eps = float(np.max(dev / np.abs(outer) ** (p - 1.0)))
        eps_by_lam.append(eps)
        if eps == 0.0:
            tighter.append(0.0)
            continue
        # integrated bounds on the scaled f and F
        e_in = np.abs(scaled_f(nl, ctx, inner) - _odd_power(inner, p))
        e_out = np.abs(scaled_f(nl, ctx, outer) - _odd_power(outer, p))
        dF_out = np.abs(scaled_F(nl, ctx, outer) - np.abs(outer) ** (p + 1) / (p + 1))
        slack = 1.0 + 1e-9
        eps_in = float(np.max(e_in / np.abs(inner)))
        eps_all = max(eps, eps_in)
        ok_out = bool(np.all(e_out <= slack * eps_all / p * np.abs(outer) ** p))
        ok_F = bool(np.all(dF_out <= slack * eps_all / (p * (p + 1)) * np.abs(outer) ** (p + 1)))
        bound_ok = bound_ok and ok_out and ok_F
        band = (np.abs(inner) > chi)
        if np.any(band):
            tighter.append(float(min(np.max(e_in[band] / np.abs(inner[band])),
                                     np.max(e_in[band] / (np.abs(inner[band]) ** p / p)))))
        else:
            tighter.append(eps_in)
    decreasing = all(e2 <= e1 * (1 + 1e-12) for e1, e2 in zip(eps_by_lam, eps_by_lam[1:]))
    shrinks = eps_by_lam[-1] <= 1e-2 * eps_by_lam[0] or eps_by_lam[-1] < 1e-12
    passed = decreasing and bound_ok and shrinks
    return AssumptionCheck("A2", passed, eps_by_lam[-1],
                           {"eps_by_lambda": eps_by_lam, "overlap_band_margin": tighter})


def check_assumptions(nl: Nonlinearity, q: float, l: float,
                      samples: SamplingSpec | None = None) -> AssumptionReport:
    """Sampled check of (F1)-(F3), (A1), (A2); failures are report entries."""
    if not (10.0 / 3.0 < q < 6.0 and 10.0 / 3.0 < l < 6.0):
        raise ValueError("q and l must lie in (10/3, 6)")
    samples = samples or SamplingSpec()
    s = samples.s_grid()
    checks = {
        "F1": _check_F1(nl, q, s),
        "F2": _check_F2(nl, s),
        "F3": _check_F3(nl, l, s),
        "A1": _check_A1(nl, samples),
        "A2": _check_A2(nl, samples, s),
    }
    return AssumptionReport(q, l, checks)
