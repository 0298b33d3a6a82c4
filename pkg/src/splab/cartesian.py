"""Full 3D fields on a periodic box, for testing radial symmetry without imposing it.

Nodes are x_j = -L + j h with h = 2L/n.  Derivatives and the Helmholtz
inverse are spectral.  The free-space Coulomb potential uses an Ewald split
of 1/|x|: the smooth part erf(|x|/eta)/|x| is convolved on a zero-padded
doubled box, and the short-range remainder is applied in Fourier space,
where its transform 4 pi (1 - exp(-k^2 eta^2/4)) / k^2 is bounded.  Both
pieces are spectrally accurate once the density is resolved and decayed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft
from scipy.interpolate import make_interp_spline
from scipy.special import erf, spherical_jn

from .minimize import MinimizeOptions, MinimizerReport, minimize_rescaled
from .radial import FieldError, RadialField, to_text

EWALD_ETA = 3.0  # in grid spacings
DECAY_TOL = 1e-8


@dataclass(frozen=True)
class Box3D:
    L: float
    n: int

    def __post_init__(self):
        if self.L <= 0:
            raise FieldError("box half-width must be positive")
        if self.n < 8 or self.n & (self.n - 1):
            raise FieldError("n must be a power of two >= 8")

    @cached_property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + np.arange(self.n) * self.h

    @cached_property
    def weights(self) -> float:
        return self.h ** 3

    @property
    def shape(self):
        return (self.n,) * 3

    def coordinates(self, center=(0.0, 0.0, 0.0)):
        """Broadcastable (X, Y, Z) offsets from ``center``."""
        x = self.x
        return (x[:, None, None] - center[0], x[None, :, None] - center[1],
                x[None, None, :] - center[2])

    def radius(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        X, Y, Z = self.coordinates(center)
        return np.sqrt(X * X + Y * Y + Z * Z)

    @cached_property
    def _k2(self) -> np.ndarray:
        k = 2.0 * np.pi * fft.fftfreq(self.n, self.h)
        kr = 2.0 * np.pi * fft.rfftfreq(self.n, self.h)
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + kr[None, None, :] ** 2

    def _apply(self, values, symbol):
        return fft.irfftn(fft.rfftn(values) * symbol, s=self.shape)

    def neg_laplacian(self, values) -> np.ndarray:
        return self._apply(values, self._k2)

    def helmholtz_solve(self, omega: float, rhs, scale: float = 1.0) -> np.ndarray:
        return self._apply(rhs, 1.0 / (scale * self._k2 + omega))

    # Coulomb ------------------------------------------------------------

    @cached_property
    def _eta(self) -> float:
        return EWALD_ETA * self.h

    @cached_property
    def _smooth_kernel_hat(self) -> np.ndarray:
        n, h, eta = self.n, self.h, self._eta
        m = np.arange(2 * n)
        d = np.minimum(m, 2 * n - m) * h
        R = np.sqrt(d[:, None, None] ** 2 + d[None, :, None] ** 2 + d[None, None, :] ** 2)
        K = np.empty_like(R)
        nz = R > 0
        K[nz] = erf(R[nz] / eta) / R[nz]
        K[~nz] = 2.0 / (eta * math.sqrt(math.pi))
        return fft.rfftn(K) * h ** 3

    @cached_property
    def _short_kernel_hat(self) -> np.ndarray:
        k2, eta = self._k2, self._eta
        safe = np.where(k2 > 0, k2, 1.0)
        return np.where(k2 > 0, 4.0 * np.pi * -np.expm1(-k2 * eta ** 2 / 4.0) / safe,
                        np.pi * eta ** 2)

    def coulomb_potential(self, rho) -> np.ndarray:
        n = self.n
        pad = np.zeros((2 * n,) * 3)
        pad[:n, :n, :n] = rho
        smooth = fft.irfftn(fft.rfftn(pad) * self._smooth_kernel_hat, s=pad.shape)[:n, :n, :n]
        return smooth + self._apply(rho, self._short_kernel_hat)

    def coulomb_energy(self, rho) -> float:
        return float(np.sum(rho * self.coulomb_potential(rho)) * self.weights)

    # dilation -----------------------------------------------------------

    def interpolation_matrix(self, points) -> np.ndarray:
        """Rows evaluate the periodic trigonometric interpolant at ``points``.

        Points outside [-L, L) get zero rows, so fields are truncated there.
        """
        pts = np.asarray(points, dtype=float)
        y = (pts[:, None] - self.x[None, :]) / self.h
        s = np.sin(np.pi * y)
        tn = self.n * np.tan(np.pi * y / self.n)
        small = np.abs(s) < 1e-14
        M = np.where(small, 0.0, s / np.where(small, 1.0, tn))
        # exact nodes: Kronecker rows (y integer multiple of n never occurs inside)
        M[small] = np.where(np.abs(np.round(y[small]) % self.n) == 0, 1.0, 0.0)
        outside = (pts < -self.L) | (pts >= self.L)
        M[outside] = 0.0
        return M

    def dilate(self, values, t: float) -> np.ndarray:
        """Samples of t^(3/2) u(t x)."""
        if t <= 0:
            raise FieldError("dilation parameter must be positive")
        values = np.asarray(values, dtype=float)
        if t == 1.0:
            return values.copy()
        M = self.interpolation_matrix(t * self.x)
        out = np.einsum("ia,jb,kc,abc->ijk", M, M, M, values, optimize=True)
        return t ** 1.5 * out

    def gradient(self, values) -> list[np.ndarray]:
        """Spectral partial derivatives (Nyquist mode dropped)."""
        k = 2.0 * np.pi * fft.fftfreq(self.n, self.h)
        k[self.n // 2] = 0.0
        out = []
        for axis in range(3):
            shape = [1, 1, 1]
            shape[axis] = self.n
            out.append(fft.ifft(1j * k.reshape(shape) * fft.fft(values, axis=axis), axis=axis).real)
        return out

    def dilation_generator(self, values) -> np.ndarray:
        """d/dt u^t at t = 1: x . grad u + 3/2 u."""
        X, Y, Z = self.coordinates()
        gx, gy, gz = self.gradient(values)
        return X * gx + Y * gy + Z * gz + 1.5 * np.asarray(values)

    def translate(self, values, shift) -> np.ndarray:
        """Samples of u(x - shift) by Fourier phase shift (periodic)."""
        k = 2.0 * np.pi * fft.fftfreq(self.n, self.h)
        kr = 2.0 * np.pi * fft.rfftfreq(self.n, self.h)
        phase = np.exp(-1j * (k[:, None, None] * shift[0] + k[None, :, None] * shift[1]
                              + kr[None, None, :] * shift[2]))
        return fft.irfftn(fft.rfftn(values) * phase, s=self.shape)

    def zeros(self) -> "Field3D":
        return Field3D(self, np.zeros(self.shape))

    def sample(self, func) -> "Field3D":
        X, Y, Z = self.coordinates()
        return Field3D(self, np.broadcast_to(func(X, Y, Z), self.shape).astype(float))


@dataclass(frozen=True, eq=False)
class Field3D:
    grid: Box3D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise FieldError(f"expected shape {self.grid.shape}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise FieldError("field has non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def L(self) -> float:
        return self.grid.L

    @property
    def n(self) -> int:
        return self.grid.n

    def with_values(self, values) -> "Field3D":
        return Field3D(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, k):
        return self.with_values(self.values * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def boundary_level(self) -> float:
        """max |u| on the outermost node layer relative to max |u|."""
        v = np.abs(self.values)
        peak = v.max()
        if peak == 0:
            return 0.0
        faces = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max(),
                    v[:, :, 0].max(), v[:, :, -1].max())
        return float(faces / peak)


def _vals(x):
    return x.values if isinstance(x, Field3D) else x


def check_decay(u: Field3D, tol: float = DECAY_TOL) -> None:
    level = u.boundary_level()
    if level > tol:
        raise FieldError(f"field not decayed at the box boundary ({level:.2e} of max > {tol:g})")


def coulomb_energy_3d(u: Field3D) -> float:
    """int phi_u u^2 with phi_u the free-space potential of u^2."""
    check_decay(u)
    return u.grid.coulomb_energy(u.values ** 2)


# ---------------------------------------------------------------- radial profiles

class RadialProfile:
    """Smooth evaluation of a radial field (and its r-derivatives) off its grid.

    The sine expansion is sampled on a refined even grid over [-rmax, rmax]
    and interpolated by a quintic spline; the field is zero beyond rmax.
    """

    def __init__(self, u: RadialField, refine: int = 8):
        g = u.grid
        coef = g.sine_coefficients(u.values)
        m = refine * (g.n - 1)
        r = np.linspace(0.0, g.rmax, m + 1)
        vals = np.empty_like(r)
        vals[0] = np.dot(coef, g.kappa)
        for chunk in np.array_split(np.arange(1, m + 1), max(1, m // 512)):
            vals[chunk] = np.sin(np.outer(r[chunk], g.kappa)) @ coef / r[chunk]
        vals[-1] = 0.0
        rr = np.concatenate([-r[:0:-1], r])
        vv = np.concatenate([vals[:0:-1], vals])
        self.rmax = g.rmax
        self._spline = make_interp_spline(rr, vv, k=5)

    def __call__(self, r, nu: int = 0) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = self._spline(np.minimum(r, self.rmax), nu)
        return np.where(r < self.rmax, out, 0.0)


def embed_radial(u: RadialField, box: Box3D, center=(0.0, 0.0, 0.0),
                 profile: RadialProfile | None = None) -> Field3D:
    """Sample a radial field at |x - center| on the box."""
    prof = profile or RadialProfile(u)
    return Field3D(box, prof(box.radius(center)))


# ---------------------------------------------------------------- symmetry

def _on_node(box: Box3D, center) -> bool:
    j = (np.asarray(center, dtype=float) + box.L) / box.h
    return bool(np.all(np.abs(j - np.round(j)) < 1e-9))


def spherical_average(u: Field3D, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Spherical average of u about ``center``, sampled back on the box.

    For a node center the lattice shells |x - center|^2 = m h^2 are exact, so
    the average is the mean over each shell.  Otherwise the average of the
    trigonometric interpolant is taken mode by mode: a plane wave averages
    to e^(i k.c) j0(|k| rho), and modes are grouped by |k|^2.
    """
    box = u.grid
    if _on_node(box, center):
        X, Y, Z = box.coordinates(center)
        m = np.rint((X * X + Y * Y + Z * Z) / box.h ** 2).astype(np.int64)
        flat = m.ravel()
        sums = np.bincount(flat, weights=u.values.ravel())
        counts = np.bincount(flat)
        means = sums / np.maximum(counts, 1)
        return means[m]
    # zero-pad to a doubled box so that spheres about the center never reach
    # a periodic image of the field
    n = 2 * box.n
    pad = np.zeros((n,) * 3)
    pad[:box.n, :box.n, :box.n] = u.values
    coef = fft.fftn(pad) / pad.size
    idx = fft.fftfreq(n, 1.0 / n)
    I, J, K = np.meshgrid(idx, idx, idx, indexing="ij")
    dk = np.pi / (2.0 * box.L)
    # phase relative to the node origin x_0 = -L
    c = np.asarray(center, dtype=float) + box.L
    coef = coef * np.exp(1j * dk * (I * c[0] + J * c[1] + K * c[2]))
    shell = (I * I + J * J + K * K).astype(np.int64).ravel()
    S = np.bincount(shell, weights=coef.real.ravel())
    S = S + 1j * np.bincount(shell, weights=coef.imag.ravel())
    used = np.nonzero(np.abs(S) > 0)[0]
    rho = box.radius(center)
    rmax = float(rho.max())
    nr = 32 * box.n
    rs = np.linspace(0.0, rmax, nr)
    prof = np.zeros(nr)
    for chunk in np.array_split(used, max(1, len(used) // 256)):
        kk = np.sqrt(chunk.astype(float)) * dk
        prof += (spherical_jn(0, np.outer(rs, kk)) @ S[chunk]).real
    return make_interp_spline(rs, prof, k=5)(rho)


def symmetry_defect(u: Field3D, center=(0.0, 0.0, 0.0)) -> float:
    """|u - A_center u|_2 / |u|_2 with A_center the spherical average."""
    c = np.asarray(center, dtype=float)
    if np.any(np.abs(c) >= u.grid.L):
        raise ValueError("center must lie inside the box")
    avg = spherical_average(u, c)
    return float(np.sqrt(np.sum((u.values - avg) ** 2) / np.sum(u.values ** 2)))


# ---------------------------------------------------------------- minimization

def default_3d_options() -> MinimizeOptions:
    return MinimizeOptions(tol=1e-6, max_iter=2000)


def minimize_3d(nl, ctx, init: Field3D, opts: MinimizeOptions | None = None
                ) -> tuple[Field3D, MinimizerReport]:
    """Same descent as the radial solver, on the box."""
    if init.grid.n > 96:
        raise ValueError("n above 96 per axis is outside the supported 3D scale")
    rep = minimize_rescaled(nl, ctx, init, opts or default_3d_options())
    return rep.field, rep


# ---------------------------------------------------------------- I/O

_MAGIC = b"SPF3"


def to_bytes(u: Field3D) -> bytes:
    header = _MAGIC + struct.pack("<dQ", u.grid.L, u.grid.n)
    return header + np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C")


def from_bytes(blob: bytes) -> Field3D:
    if blob[:4] != _MAGIC:
        raise FieldError("not a 3D field frame")
    L, n = struct.unpack("<dQ", blob[4:20])
    n = int(n)
    vals = np.frombuffer(blob[20:20 + 8 * n ** 3], dtype="<f8").reshape((n, n, n)).copy()
    return Field3D(Box3D(L, n), vals)


def axis_slice(u: Field3D, axis: int = 0) -> RadialField:
    """Values along the positive half of one axis through the origin node.

    Returned as a radial field over [0, L - h] so it can be written in the
    two-column radial text format.
    """
    from .radial import RadialGrid

    n = u.grid.n
    mid = n // 2
    sl = [mid, mid, mid]
    sl[axis] = slice(mid, n)
    vals = u.values[tuple(sl)]
    grid = RadialGrid(u.grid.L - u.grid.h, len(vals))
    return RadialField(grid, vals)


def slice_text(u: Field3D, axis: int = 0) -> str:
    return to_text(axis_slice(u, axis))
